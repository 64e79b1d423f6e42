#pragma once

// Per-side reliability predictor: a ReLU MLP with inverted dropout, trained
// with mean BCE-with-logits and AdamW, early-stopped on validation AUROC.
// All math is double precision; every random draw comes from SplitMix64.

#include "saber/auroc.hpp"
#include "saber/error.hpp"
#include "saber/features.hpp"
#include "saber/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace saber {

struct NetConfig {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims{256, 128};
    double dropout_rate = 0.2;
    std::uint64_t seed = 42;

    void validate() const {
        if (input_dim == 0) throw usage_error("input_dim must be positive");
        if (hidden_dims.empty()) throw usage_error("hidden_dims must not be empty");
        for (auto h : hidden_dims)
            if (h == 0) throw usage_error("hidden layer sizes must be positive");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw usage_error("dropout must lie in [0, 1)");
    }

    friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_opt = 1e-8;
    std::size_t batch_size = 256;
    std::size_t max_epochs = 50;
    std::size_t patience = 8;

    void validate() const {
        if (!(lr > 0 && weight_decay >= 0 && eps_opt > 0)) throw usage_error("lr and eps must be positive, weight decay non-negative");
        if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1)) throw usage_error("betas must lie in (0, 1)");
        if (batch_size == 0 || max_epochs == 0 || patience == 0) throw usage_error("batch size, epochs and patience must be positive");
        if (patience > max_epochs) throw usage_error("patience must not exceed max epochs");
    }

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Dense layer; weight is (in x out) row-major, so weight[i * out + j] maps
/// input i to output j.
struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weight;
    std::vector<double> bias;

    Layer() = default;
    Layer(std::size_t in_dim, std::size_t out_dim)
        : in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

    double& w(std::size_t i, std::size_t j) { return weight[i * out + j]; }
    double w(std::size_t i, std::size_t j) const { return weight[i * out + j]; }

    friend bool operator==(const Layer&, const Layer&) = default;
};

using Parameters = std::vector<Layer>;

struct TrainingMeta {
    std::size_t epochs_run = 0;
    double best_val_auroc = std::numeric_limits<double>::quiet_NaN();
    std::size_t best_epoch = 0;
    bool early_stopped = false;
};

struct BeliefNet {
    NetConfig config;
    Parameters layers;
    Standardizer standardizer;
    TrainingMeta meta;

    std::size_t input_dim() const noexcept { return layers.empty() ? 0 : layers.front().in; }

    std::size_t parameter_count() const noexcept {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }

    /// Shapes chain input -> ... -> 1 and every parameter is finite.
    void validate() const {
        if (layers.empty()) throw invariant_error("network has no layers");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& L = layers[l];
            if (L.weight.size() != L.in * L.out || L.bias.size() != L.out)
                throw invariant_error("layer " + std::to_string(l) + " has inconsistent storage");
            if (l > 0 && layers[l - 1].out != L.in)
                throw invariant_error("layer " + std::to_string(l) + " does not chain");
            for (double p : L.weight)
                if (!std::isfinite(p)) throw invariant_error("non-finite weight");
            for (double p : L.bias)
                if (!std::isfinite(p)) throw invariant_error("non-finite bias");
        }
        if (layers.back().out != 1) throw invariant_error("final layer must have a single output");
    }

    /// Wraps explicit layers (any depth, including a bare linear unit).
    static BeliefNet from_layers(Parameters layers, double dropout_rate = 0.0) {
        BeliefNet net;
        net.layers = std::move(layers);
        net.validate();
        net.config.input_dim = net.layers.front().in;
        net.config.hidden_dims.clear();
        for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) net.config.hidden_dims.push_back(net.layers[l].out);
        net.config.dropout_rate = dropout_rate;
        return net;
    }
};

/// Layer l draws its weights row-major from SplitMix64(seed + l) as
/// (2u - 1) / sqrt(fan_in); biases start at zero.
inline BeliefNet init_params(const NetConfig& cfg) {
    cfg.validate();
    BeliefNet net;
    net.config = cfg;
    std::size_t fan_in = cfg.input_dim;
    std::vector<std::size_t> widths = cfg.hidden_dims;
    widths.push_back(1);
    for (std::size_t l = 0; l < widths.size(); ++l) {
        Layer layer(fan_in, widths[l]);
        SplitMix64 rng(cfg.seed + l);
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& w : layer.weight) w = (2.0 * rng.uniform() - 1.0) * bound;
        net.layers.push_back(std::move(layer));
        fan_in = widths[l];
    }
    return net;
}

// ---------------------------------------------------------------------------
// Forward / backward

/// Row-major dense batch.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Per hidden layer, a (batch x units) multiplier: 0 for dropped units,
/// 1 / (1 - rate) for kept ones. Empty means dropout is off.
using DropoutMasks = std::vector<Matrix>;

/// Draw order: hidden layer, then example, then unit; a unit is dropped when
/// its uniform draw is below the rate.
inline DropoutMasks sample_dropout(const BeliefNet& net, std::size_t batch, SplitMix64& rng) {
    DropoutMasks masks;
    const double rate = net.config.dropout_rate;
    if (rate <= 0.0) return masks;
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
        Matrix m(batch, net.layers[l].out);
        for (double& e : m.data) e = rng.uniform() < rate ? 0.0 : keep_scale;
        masks.push_back(std::move(m));
    }
    return masks;
}

struct ForwardCache {
    std::vector<Matrix> activations; // [0] is the input batch, then each hidden output
    std::vector<Matrix> pre;         // hidden pre-activations
    DropoutMasks masks;
    std::vector<double> logits;
};

namespace detail {

// out = in * W + b
inline Matrix affine(const Matrix& in, const Layer& L) {
    Matrix out(in.rows, L.out);
    for (std::size_t b = 0; b < in.rows; ++b) {
        double* o = out.data.data() + b * L.out;
        std::copy(L.bias.begin(), L.bias.end(), o);
        const double* x = in.data.data() + b * in.cols;
        for (std::size_t i = 0; i < L.in; ++i) {
            const double xi = x[i];
            if (xi == 0.0) continue;
            const double* w = L.weight.data() + i * L.out;
            for (std::size_t j = 0; j < L.out; ++j) o[j] += xi * w[j];
        }
    }
    return out;
}

} // namespace detail

/// Affine -> ReLU -> dropout per hidden layer, then a final affine to one logit.
inline ForwardCache forward_batch(const BeliefNet& net, const Matrix& x, DropoutMasks masks = {}) {
    if (x.cols != net.input_dim())
        throw data_error("network expects input dimension " + std::to_string(net.input_dim()) + ", got " +
                         std::to_string(x.cols));
    const std::size_t hidden = net.layers.size() - 1;
    if (!masks.empty() && masks.size() != hidden) throw invariant_error("dropout masks do not match depth");
    ForwardCache cache;
    cache.masks = std::move(masks);
    cache.activations.push_back(x);
    for (std::size_t l = 0; l < hidden; ++l) {
        Matrix z = detail::affine(cache.activations.back(), net.layers[l]);
        Matrix a = z;
        for (std::size_t k = 0; k < a.data.size(); ++k) {
            double v = a.data[k] > 0.0 ? a.data[k] : 0.0;
            if (!cache.masks.empty()) v *= cache.masks[l].data[k];
            a.data[k] = v;
        }
        cache.pre.push_back(std::move(z));
        cache.activations.push_back(std::move(a));
    }
    Matrix out = detail::affine(cache.activations.back(), net.layers.back());
    cache.logits = std::move(out.data);
    return cache;
}

/// Single-example logit. With training=true a fresh dropout mask is drawn
/// from `rng`; with training=false dropout is the identity.
inline double forward(const BeliefNet& net, std::span<const double> x, bool training = false,
                      SplitMix64* rng = nullptr) {
    Matrix m(1, x.size());
    std::copy(x.begin(), x.end(), m.data.begin());
    DropoutMasks masks;
    if (training) {
        if (rng == nullptr) throw invariant_error("training forward pass needs a generator");
        masks = sample_dropout(net, 1, *rng);
    }
    return forward_batch(net, m, std::move(masks)).logits.front();
}

inline double sigmoid(double z) noexcept {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// max(l, 0) - l*y + log(1 + exp(-|l|))
inline double bce_with_logits(double logit, int y) noexcept {
    return std::max(logit, 0.0) - logit * static_cast<double>(y) + std::log1p(std::exp(-std::abs(logit)));
}

inline double mean_bce(std::span<const double> logits, std::span<const int> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) s += bce_with_logits(logits[i], y[i]);
    return s / static_cast<double>(logits.size());
}

/// Zero-initialized gradient buffers shaped like the network.
inline Parameters zeros_like(const Parameters& p) {
    Parameters g;
    g.reserve(p.size());
    for (const auto& L : p) g.emplace_back(L.in, L.out);
    return g;
}

/// Exact gradients of the mean BCE over the batch, reusing the forward
/// cache (and therefore its dropout masks).
inline Parameters backward(const BeliefNet& net, const ForwardCache& cache, std::span<const int> y) {
    const std::size_t batch = cache.logits.size();
    if (y.size() != batch) throw data_error("labels do not match batch size");
    Parameters grads = zeros_like(net.layers);

    // delta: (batch x units) gradient w.r.t. the current layer's pre-activation
    Matrix delta(batch, 1);
    const double inv_b = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b)
        delta.data[b] = (sigmoid(cache.logits[b]) - static_cast<double>(y[b])) * inv_b;

    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const Layer& L = net.layers[l];
        Layer& G = grads[l];
        const Matrix& a = cache.activations[l];
        for (std::size_t b = 0; b < batch; ++b) {
            const double* d = delta.data.data() + b * L.out;
            const double* ai = a.data.data() + b * L.in;
            for (std::size_t j = 0; j < L.out; ++j) G.bias[j] += d[j];
            for (std::size_t i = 0; i < L.in; ++i) {
                const double av = ai[i];
                if (av == 0.0) continue;
                double* g = G.weight.data() + i * L.out;
                for (std::size_t j = 0; j < L.out; ++j) g[j] += av * d[j];
            }
        }
        if (l == 0) break;

        Matrix prev(batch, L.in);
        const Matrix& z = cache.pre[l - 1];
        for (std::size_t b = 0; b < batch; ++b) {
            const double* d = delta.data.data() + b * L.out;
            for (std::size_t i = 0; i < L.in; ++i) {
                const std::size_t k = b * L.in + i;
                if (z.data[k] <= 0.0) continue;
                const double scale = cache.masks.empty() ? 1.0 : cache.masks[l - 1].data[k];
                if (scale == 0.0) continue;
                const double* w = L.weight.data() + i * L.out;
                double s = 0.0;
                for (std::size_t j = 0; j < L.out; ++j) s += w[j] * d[j];
                prev.data[k] = s * scale;
            }
        }
        delta = std::move(prev);
    }
    return grads;
}

// ---------------------------------------------------------------------------
// AdamW

struct AdamState {
    Parameters m;
    Parameters v;
};

inline AdamState make_adam_state(const Parameters& p) { return {zeros_like(p), zeros_like(p)}; }

/// One decoupled-weight-decay Adam update over a flat parameter block:
/// theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta), with wd applied
/// only when `decay` is set.
inline void adamw_update(std::span<double> theta, std::span<const double> g, std::span<double> m,
                         std::span<double> v, std::size_t t, const TrainConfig& cfg, bool decay) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    const double wd = decay ? cfg.weight_decay : 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        theta[i] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps_opt) + wd * theta[i]);
    }
}

/// Step t (1-based) over every layer; biases are not decayed.
inline void adamw_step(Parameters& params, const Parameters& grads, AdamState& state, std::size_t t,
                       const TrainConfig& cfg) {
    if (t == 0) throw invariant_error("AdamW step index starts at 1");
    for (std::size_t l = 0; l < params.size(); ++l) {
        adamw_update(params[l].weight, grads[l].weight, state.m[l].weight, state.v[l].weight, t, cfg, true);
        adamw_update(params[l].bias, grads[l].bias, state.m[l].bias, state.v[l].bias, t, cfg, false);
    }
}

// ---------------------------------------------------------------------------
// Training

/// Patience counter over validation AUROC. Only a strictly greater value
/// counts as improvement; an undefined AUROC never does.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    /// Returns true when this epoch is the new best.
    bool observe(std::size_t epoch, std::optional<double> metric) {
        if (metric && (!best_ || *metric > *best_)) {
            best_ = metric;
            best_epoch_ = epoch;
            stale_ = 0;
            return true;
        }
        ++stale_;
        return false;
    }

    bool should_stop() const noexcept { return stale_ >= patience_; }
    std::optional<double> best() const noexcept { return best_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }

private:
    std::size_t patience_;
    std::optional<double> best_;
    std::size_t best_epoch_ = 0;
    std::size_t stale_ = 0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_auroc = 0.0;
};

inline Matrix gather_rows(const std::vector<Vector>& xs, std::span<const std::size_t> idx, std::size_t dim) {
    Matrix m(idx.size(), dim);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto& src = xs[idx[r]];
        if (src.size() != dim) throw data_error("input dimension mismatch");
        std::copy(src.begin(), src.end(), m.data.begin() + static_cast<std::ptrdiff_t>(r * dim));
    }
    return m;
}

/// Evaluation-mode logits for a list of inputs.
inline std::vector<double> predict_logits(const BeliefNet& net, const std::vector<Vector>& xs,
                                          std::size_t chunk = 1024) {
    std::vector<double> out;
    out.reserve(xs.size());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < xs.size(); start += chunk) {
        const std::size_t end = std::min(xs.size(), start + chunk);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        auto cache = forward_batch(net, gather_rows(xs, idx, net.input_dim()));
        out.insert(out.end(), cache.logits.begin(), cache.logits.end());
    }
    return out;
}

inline double predict_belief(const BeliefNet& net, std::span<const double> x) {
    return sigmoid(forward(net, x, false));
}

/// Mini-batch AdamW over a seeded shuffle each epoch; validation AUROC (on
/// logits, dropout off) after every epoch; stops after `patience` epochs
/// without strict improvement and restores the best epoch's parameters.
/// Shuffles and dropout masks share one stream seeded from
/// derive_seed(config.seed, "train").
inline BeliefNet train(BeliefNet net, const std::vector<Vector>& train_x, const std::vector<int>& train_y,
                       const std::vector<Vector>& val_x, const std::vector<int>& val_y, const TrainConfig& cfg,
                       std::vector<EpochRecord>* history = nullptr) {
    cfg.validate();
    net.validate();
    if (train_x.empty() || val_x.empty()) throw data_error("training and validation splits must be non-empty");
    if (train_x.size() != train_y.size() || val_x.size() != val_y.size())
        throw data_error("inputs and labels differ in length");
    const auto has = [&](int c) { return std::find(val_y.begin(), val_y.end(), c) != val_y.end(); };
    if (!has(0) || !has(1)) throw data_error("AUROC undefined: validation split has a single class");

    const std::size_t dim = net.input_dim();
    SplitMix64 rng(derive_seed(net.config.seed, "train"));
    AdamState adam = make_adam_state(net.layers);
    EarlyStopping stopper(cfg.patience);
    Parameters best = net.layers;
    std::size_t step = 0;
    std::vector<std::size_t> order(train_x.size());
    std::vector<int> batch_y;

    net.meta = {};
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(std::span<std::size_t>(order), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            batch_y.resize(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) batch_y[i] = train_y[idx[i]];
            auto masks = sample_dropout(net, idx.size(), rng);
            auto cache = forward_batch(net, gather_rows(train_x, idx, dim), std::move(masks));
            loss_sum += mean_bce(cache.logits, batch_y) * static_cast<double>(idx.size());
            auto grads = backward(net, cache, batch_y);
            adamw_step(net.layers, grads, adam, ++step, cfg);
        }
        const double val_auc = auroc(predict_logits(net, val_x), val_y);
        if (stopper.observe(epoch, val_auc)) best = net.layers;
        net.meta.epochs_run = epoch;
        if (history) history->push_back({epoch, loss_sum / static_cast<double>(order.size()), val_auc});
        if (stopper.should_stop()) {
            net.meta.early_stopped = true;
            break;
        }
    }
    net.layers = std::move(best);
    net.meta.best_epoch = stopper.best_epoch();
    net.meta.best_val_auroc = stopper.best().value_or(std::numeric_limits<double>::quiet_NaN());
    net.validate();
    return net;
}

} // namespace saber
