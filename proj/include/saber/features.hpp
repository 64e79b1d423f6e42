#pragma once

#include "saber/error.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace saber {

using Vector = std::vector<double>;

/// Extracted hidden-state features for one instance: the query-only prior
/// vector and K reasoning-trace vectors per side.
struct FeatureRecord {
    std::string instance_id;
    Vector h_q;
    std::vector<Vector> traces_pk;
    std::vector<Vector> traces_ck;

    friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

struct FusedInput {
    Vector z_pk;
    Vector z_ck;
    Vector x;
};

namespace detail {

inline void require_finite(std::span<const double> v, const char* what) {
    for (double e : v)
        if (!std::isfinite(e)) throw data_error(std::string("non-finite value in ") + what);
}

} // namespace detail

/// Elementwise mean of the K trace vectors.
inline Vector mean_pool(const std::vector<Vector>& traces) {
    if (traces.empty()) throw data_error("no traces");
    const std::size_t dim = traces.front().size();
    Vector out(dim, 0.0);
    for (const auto& t : traces) {
        if (t.size() != dim) throw data_error("dimension mismatch");
        detail::require_finite(t, "trace");
        for (std::size_t i = 0; i < dim; ++i) out[i] += t[i];
    }
    const auto k = static_cast<double>(traces.size());
    for (double& e : out) e /= k;
    return out;
}

/// [h_q ; pooled]
inline Vector fuse(std::span<const double> h_q, std::span<const double> pooled) {
    detail::require_finite(h_q, "prior vector");
    detail::require_finite(pooled, "pooled vector");
    Vector out;
    out.reserve(h_q.size() + pooled.size());
    out.insert(out.end(), h_q.begin(), h_q.end());
    out.insert(out.end(), pooled.begin(), pooled.end());
    return out;
}

inline void validate_record(const FeatureRecord& r) {
    if (r.traces_pk.empty() || r.traces_ck.empty()) throw data_error("no traces");
    if (r.traces_pk.size() != r.traces_ck.size())
        throw data_error("trace count differs between sides for " + r.instance_id);
}

/// x = [h_q ; mean(pk traces) ; h_q ; mean(ck traces)]
inline FusedInput build_input(const FeatureRecord& r) {
    validate_record(r);
    FusedInput f;
    f.z_pk = fuse(r.h_q, mean_pool(r.traces_pk));
    f.z_ck = fuse(r.h_q, mean_pool(r.traces_ck));
    if (f.z_pk.size() != f.z_ck.size()) throw data_error("dimension mismatch");
    f.x = f.z_pk;
    f.x.insert(f.x.end(), f.z_ck.begin(), f.z_ck.end());
    return f;
}

/// Per-feature affine standardization fit on the training inputs.
struct Standardizer {
    Vector mean;
    Vector std;
    double epsilon = 1e-6;

    std::size_t dim() const noexcept { return mean.size(); }

    Vector apply(std::span<const double> v) const {
        if (v.size() != mean.size())
            throw data_error("standardizer expects dimension " + std::to_string(mean.size()) +
                             ", got " + std::to_string(v.size()));
        Vector out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean[i]) / std[i];
        return out;
    }

    Vector invert(std::span<const double> v) const {
        if (v.size() != mean.size()) throw data_error("standardizer dimension mismatch");
        Vector out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * std[i] + mean[i];
        return out;
    }

    friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

namespace detail {

// Neumaier-compensated left-to-right sum.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

} // namespace detail

/// Two passes: compensated mean, then population (1/N) standard deviation of
/// the centered values, floored at epsilon.
inline Standardizer fit_standardizer(const std::vector<Vector>& inputs, double epsilon = 1e-6) {
    if (inputs.empty()) throw data_error("cannot fit standardizer on an empty set");
    const std::size_t dim = inputs.front().size();
    for (const auto& v : inputs)
        if (v.size() != dim) throw data_error("dimension mismatch");
    const auto n = static_cast<double>(inputs.size());

    Standardizer s;
    s.epsilon = epsilon;
    s.mean.resize(dim);
    s.std.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        detail::CompensatedSum sum;
        for (const auto& v : inputs) sum.add(v[j]);
        s.mean[j] = sum.value() / n;
    }
    for (std::size_t j = 0; j < dim; ++j) {
        detail::CompensatedSum sq;
        for (const auto& v : inputs) {
            const double d = v[j] - s.mean[j];
            sq.add(d * d);
        }
        s.std[j] = std::max(std::sqrt(sq.value() / n), epsilon);
    }
    return s;
}

} // namespace saber
