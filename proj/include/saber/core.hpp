#pragma once

#include "saber/error.hpp"
#include "saber/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace saber {

/// Joint correctness of the PK-only and CK-conditioned answer paths.
/// The enumerator value packs (y_pk, y_ck) as 2*y_pk + y_ck.
enum class Cell : std::uint8_t { C00 = 0, C01 = 1, C10 = 2, C11 = 3 };

inline constexpr std::array<Cell, 4> kAllCells{Cell::C00, Cell::C10, Cell::C01, Cell::C11};

constexpr Cell cell_label(bool y_pk, bool y_ck) noexcept {
    return static_cast<Cell>((y_pk ? 2 : 0) | (y_ck ? 1 : 0));
}

constexpr bool pk_correct(Cell c) noexcept { return (static_cast<int>(c) & 2) != 0; }
constexpr bool ck_correct(Cell c) noexcept { return (static_cast<int>(c) & 1) != 0; }

constexpr std::string_view to_string(Cell c) noexcept {
    switch (c) {
    case Cell::C00: return "C00";
    case Cell::C01: return "C01";
    case Cell::C10: return "C10";
    case Cell::C11: return "C11";
    }
    return "C00";
}

inline std::optional<Cell> parse_cell(std::string_view s) {
    for (Cell c : kAllCells)
        if (to_string(c) == s) return c;
    return std::nullopt;
}

/// Index in the C00, C10, C01, C11 ordering used by histograms and cell fractions.
constexpr std::size_t histogram_index(Cell c) noexcept {
    switch (c) {
    case Cell::C00: return 0;
    case Cell::C10: return 1;
    case Cell::C01: return 2;
    case Cell::C11: return 3;
    }
    return 0;
}

struct CellLabel {
    bool y_pk = false;
    bool y_ck = false;

    constexpr Cell cell() const noexcept { return cell_label(y_pk, y_ck); }
    friend constexpr bool operator==(const CellLabel&, const CellLabel&) = default;
};

/// Cell counts in C00, C10, C01, C11 order.
using CellHistogram = std::array<std::size_t, 4>;

enum class Split : std::uint8_t { train, val, test };

constexpr std::string_view to_string(Split s) noexcept {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "train";
}

inline std::optional<Split> parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    return std::nullopt;
}

struct QAInstance {
    std::string id;
    std::string query;
    std::string context;
    std::vector<std::string> gold_aliases;
    std::string answer_pk;
    std::string answer_ck;
    std::string dataset_tag;
    Split split = Split::train;

    friend bool operator==(const QAInstance&, const QAInstance&) = default;
};

/// Throws a data error when ids repeat within the collection.
inline void require_unique_ids(const std::vector<QAInstance>& instances) {
    std::unordered_map<std::string_view, std::size_t> seen;
    seen.reserve(instances.size());
    for (const auto& inst : instances)
        if (!seen.emplace(inst.id, 0).second)
            throw data_error("duplicate instance id: " + inst.id);
}

struct SplitConfig {
    double train_frac = 0.8;
    double val_frac = 0.1;
    double test_frac = 0.1;
    std::uint64_t seed = 42;
    std::string group_key = "id";

    void validate() const {
        for (double f : {train_frac, val_frac, test_frac})
            if (!(f >= 0.0 && f <= 1.0))
                throw usage_error("split fractions must lie in [0, 1]");
        if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
            throw usage_error("split fractions must sum to 1");
        if (group_key != "id" && group_key != "query" && group_key != "context" &&
            group_key != "dataset_tag")
            throw usage_error("unsupported group key: " + group_key);
    }
};

inline const std::string& group_value(const QAInstance& inst, const std::string& key) {
    if (key == "query") return inst.query;
    if (key == "context") return inst.context;
    if (key == "dataset_tag") return inst.dataset_tag;
    return inst.id;
}

struct SplitResult {
    std::vector<QAInstance> train;
    std::vector<QAInstance> val;
    std::vector<QAInstance> test;
};

/// Assigns whole groups to train/val/test.
///
/// Groups are ordered by hash_key(group value, seed) (ties broken by the value
/// itself) and laid end to end; bucket boundaries sit at round(train_frac * N)
/// and round((train_frac + val_frac) * N) instances. A group lands in the
/// bucket holding its first position, so bucket sizes match the fractions to
/// within one group's size. The result does not depend on input order.
/// Returned instances carry their assigned `split` and keep input order.
inline SplitResult split_by_group(const std::vector<QAInstance>& instances, const SplitConfig& cfg) {
    if (instances.empty()) throw data_error("empty dataset");
    cfg.validate();

    struct Group {
        std::uint64_t hash;
        std::string_view key;
        std::size_t size;
        Split split;
    };
    std::unordered_map<std::string_view, std::size_t> index;
    std::vector<Group> groups;
    for (const auto& inst : instances) {
        const std::string& key = group_value(inst, cfg.group_key);
        auto [it, inserted] = index.emplace(key, groups.size());
        if (inserted) groups.push_back({hash_key(key, cfg.seed), key, 0, Split::train});
        ++groups[it->second].size;
    }

    std::vector<std::size_t> order(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (groups[a].hash != groups[b].hash) return groups[a].hash < groups[b].hash;
        return groups[a].key < groups[b].key;
    });

    const auto n = static_cast<double>(instances.size());
    const auto train_end = static_cast<std::size_t>(std::llround(cfg.train_frac * n));
    const auto val_end = static_cast<std::size_t>(std::llround((cfg.train_frac + cfg.val_frac) * n));
    std::size_t position = 0;
    for (std::size_t g : order) {
        groups[g].split = position < train_end ? Split::train
                          : position < val_end ? Split::val
                                               : Split::test;
        position += groups[g].size;
    }

    SplitResult out;
    for (const auto& inst : instances) {
        QAInstance copy = inst;
        copy.split = groups[index.at(group_value(inst, cfg.group_key))].split;
        switch (copy.split) {
        case Split::train: out.train.push_back(std::move(copy)); break;
        case Split::val: out.val.push_back(std::move(copy)); break;
        case Split::test: out.test.push_back(std::move(copy)); break;
        }
    }
    return out;
}

} // namespace saber
