#pragma once

// Synthetic benchmarks with planted 4-cell labels and Gaussian features
// whose separability is set by `signal` / `noise_sigma`.
//
// Geometry: the PK-side trace mean is +/-signal along the first conditional
// axis, the CK-side mean +/-signal along the second; the prior vector h_q
// carries +/-signal/2 along its first axis for the PK label only. A side's
// feature label is flipped with probability `label_flip` (features only; the
// planted answers never change).

#include "saber/core.hpp"
#include "saber/decision.hpp"
#include "saber/error.hpp"
#include "saber/features.hpp"
#include "saber/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace saber {

/// Cell fractions in C00, C10, C01, C11 order.
using CellFractions = std::array<double, 4>;

/// Default cell mix, roughly one third C00 and one third C11.
inline constexpr CellFractions kDefaultCellFractions{0.339, 0.087, 0.246, 0.328};

struct SynthConfig {
    std::size_t n = 1000;
    CellFractions cell_fracs = kDefaultCellFractions;
    std::size_t d_p = 32;
    std::size_t d_c = 32;
    std::size_t k_traces = 3;
    double signal = 4.0;
    double noise_sigma = 1.0;
    double label_flip = 0.0;
    std::uint64_t seed = 42;
    std::string dataset_tag = "synthetic";
    SplitConfig split{};

    void validate() const {
        if (n == 0) throw usage_error("synthetic instance count must be positive");
        double sum = 0.0;
        for (double f : cell_fracs) {
            if (!(f >= 0.0)) throw usage_error("cell fractions must be non-negative");
            sum += f;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw usage_error("cell fractions must sum to 1");
        if (d_p < 1) throw usage_error("prior dimension must be at least 1");
        if (d_c < 2) throw usage_error("conditional dimension must be at least 2");
        if (k_traces < 1) throw usage_error("at least one trace per side is required");
        if (!(signal >= 0.0)) throw usage_error("signal must be non-negative");
        if (!(noise_sigma > 0.0)) throw usage_error("noise sigma must be positive");
        if (!(label_flip >= 0.0 && label_flip < 0.5)) throw usage_error("label flip must lie in [0, 0.5)");
    }
};

/// Largest-remainder apportionment of n over the four fractions; remainders
/// that tie go to the earlier cell. Quotas within 1e-9 of an integer are
/// snapped first so decimal fractions apportion as written.
inline std::array<std::size_t, 4> apportion(std::size_t n, const CellFractions& fracs) {
    std::array<std::size_t, 4> counts{};
    std::array<double, 4> rem{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        double q = fracs[i] * static_cast<double>(n);
        if (std::abs(q - std::round(q)) < 1e-9 * std::max(1.0, static_cast<double>(n))) q = std::round(q);
        counts[i] = static_cast<std::size_t>(std::floor(q));
        rem[i] = q - std::floor(q);
        assigned += counts[i];
    }
    std::array<std::size_t, 4> order{0, 1, 2, 3};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; assigned < n; k = (k + 1) % 4, ++assigned) ++counts[order[k]];
    return counts;
}

/// Exact per-cell counts, shuffled with the "cells" stream of the seed.
inline std::vector<Cell> sample_cells(const SynthConfig& cfg) {
    cfg.validate();
    const auto counts = apportion(cfg.n, cfg.cell_fracs);
    std::vector<Cell> cells;
    cells.reserve(cfg.n);
    for (std::size_t i = 0; i < 4; ++i) cells.insert(cells.end(), counts[i], kAllCells[i]);
    SplitMix64 rng(derive_seed(cfg.seed, "cells"));
    shuffle(std::span<Cell>(cells), rng);
    return cells;
}

struct SynthBenchmark {
    std::vector<QAInstance> instances;
    std::vector<FeatureRecord> features;
    std::vector<Cell> planted;
};

inline std::string synth_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "syn-%06zu", i);
    return buf;
}

inline SynthBenchmark generate(const SynthConfig& cfg) {
    cfg.validate();
    SynthBenchmark out;
    out.planted = sample_cells(cfg);
    SplitMix64 rng(derive_seed(cfg.seed, "features"));

    std::vector<QAInstance> instances;
    instances.reserve(cfg.n);
    out.features.reserve(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const Cell cell = out.planted[i];
        QAInstance inst;
        inst.id = synth_id(i);
        inst.query = "synthetic query " + inst.id;
        inst.context = "synthetic context " + inst.id;
        inst.gold_aliases = {"gold-" + inst.id};
        inst.answer_pk = pk_correct(cell) ? inst.gold_aliases.front() : "wrong-pk-" + inst.id;
        inst.answer_ck = ck_correct(cell) ? inst.gold_aliases.front() : "wrong-ck-" + inst.id;
        inst.dataset_tag = cfg.dataset_tag;

        const bool flip_pk = rng.uniform() < cfg.label_flip;
        const bool flip_ck = rng.uniform() < cfg.label_flip;
        const double sign_pk = (pk_correct(cell) != flip_pk) ? 1.0 : -1.0;
        const double sign_ck = (ck_correct(cell) != flip_ck) ? 1.0 : -1.0;

        FeatureRecord rec;
        rec.instance_id = inst.id;
        rec.h_q.resize(cfg.d_p);
        for (std::size_t j = 0; j < cfg.d_p; ++j)
            rec.h_q[j] = cfg.noise_sigma * rng.normal() + (j == 0 ? sign_pk * cfg.signal / 2.0 : 0.0);
        auto trace = [&](std::size_t axis, double sign) {
            Vector v(cfg.d_c);
            for (std::size_t j = 0; j < cfg.d_c; ++j)
                v[j] = cfg.noise_sigma * rng.normal() + (j == axis ? sign * cfg.signal : 0.0);
            return v;
        };
        for (std::size_t k = 0; k < cfg.k_traces; ++k) rec.traces_pk.push_back(trace(0, sign_pk));
        for (std::size_t k = 0; k < cfg.k_traces; ++k) rec.traces_ck.push_back(trace(1, sign_ck));

        instances.push_back(std::move(inst));
        out.features.push_back(std::move(rec));
    }

    SplitConfig split = cfg.split;
    split.seed = cfg.seed;
    const auto parts = split_by_group(instances, split);
    std::unordered_map<std::string_view, Split> assigned;
    for (const auto* part : {&parts.train, &parts.val, &parts.test})
        for (const auto& inst : *part) assigned.emplace(inst.id, inst.split);
    for (auto& inst : instances) inst.split = assigned.at(inst.id);
    out.instances = std::move(instances);
    return out;
}

enum class Policy : std::uint8_t { always_pk, always_ck, oracle, random };

/// Reference arbitration policies that ignore beliefs. `oracle` answers a
/// correct side when one exists (PK only when CK is wrong), else CK;
/// `random` picks a side uniformly from SplitMix64(seed).
inline std::vector<Decision> policy_answers(const std::vector<QAInstance>& instances,
                                            const std::vector<CellLabel>& labels, Policy policy,
                                            std::uint64_t seed = 0) {
    if (instances.size() != labels.size()) throw data_error("instances and labels differ in length");
    SplitMix64 rng(seed);
    std::vector<Decision> out;
    out.reserve(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        bool pick_pk = false;
        switch (policy) {
        case Policy::always_pk: pick_pk = true; break;
        case Policy::always_ck: pick_pk = false; break;
        case Policy::oracle: pick_pk = labels[i].y_pk && !labels[i].y_ck; break;
        case Policy::random: pick_pk = rng.uniform() < 0.5; break;
        }
        Decision d;
        d.p_pk = pick_pk ? 1.0 : 0.0;
        d.p_ck = pick_pk ? 0.0 : 1.0;
        d.cell = assign_cell(d.p_pk, d.p_ck, 0.5);
        d.action = pick_pk ? Action::answer_pk : Action::answer_ck;
        d.emitted = pick_pk ? instances[i].answer_pk : instances[i].answer_ck;
        out.push_back(std::move(d));
    }
    return out;
}

} // namespace saber
