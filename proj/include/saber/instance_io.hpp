#pragma once

// Instance collections as JSON Lines: one object per line with the fields
// id, query, context, gold_aliases, answer_pk, answer_ck, dataset_tag, split.
// Labeled files add y_pk, y_ck and cell.

#include "saber/core.hpp"
#include "saber/error.hpp"
#include "saber/matcher.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace saber {

struct LineIssue {
    std::size_t line = 0;
    std::string message;
};

/// Records that parsed, plus the lines that were skipped and why.
struct InstanceReadResult {
    std::vector<QAInstance> instances;
    std::vector<LineIssue> skipped;
};

namespace detail {

inline std::string required_string(const nlohmann::json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end()) throw data_error(std::string("missing field ") + field);
    if (!it->is_string()) throw data_error(std::string("field ") + field + " is not a string");
    return it->get<std::string>();
}

} // namespace detail

inline QAInstance instance_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw data_error("record is not an object");
    QAInstance inst;
    inst.id = detail::required_string(j, "id");
    inst.query = detail::required_string(j, "query");
    inst.context = detail::required_string(j, "context");
    inst.answer_pk = detail::required_string(j, "answer_pk");
    inst.answer_ck = detail::required_string(j, "answer_ck");
    inst.dataset_tag = detail::required_string(j, "dataset_tag");
    auto aliases = j.find("gold_aliases");
    if (aliases == j.end() || !aliases->is_array()) throw data_error("gold_aliases must be a list");
    for (const auto& a : *aliases) {
        if (!a.is_string()) throw data_error("gold_aliases entries must be strings");
        inst.gold_aliases.push_back(a.get<std::string>());
    }
    const auto split = parse_split(detail::required_string(j, "split"));
    if (!split) throw data_error("split must be one of train, val, test");
    inst.split = *split;
    validate_instance(inst);
    return inst;
}

inline nlohmann::ordered_json instance_to_json(const QAInstance& inst) {
    nlohmann::ordered_json j;
    j["id"] = inst.id;
    j["query"] = inst.query;
    j["context"] = inst.context;
    j["gold_aliases"] = inst.gold_aliases;
    j["answer_pk"] = inst.answer_pk;
    j["answer_ck"] = inst.answer_ck;
    j["dataset_tag"] = inst.dataset_tag;
    j["split"] = std::string(to_string(inst.split));
    return j;
}

inline nlohmann::ordered_json labeled_to_json(const QAInstance& inst, const CellLabel& label) {
    auto j = instance_to_json(inst);
    j["y_pk"] = label.y_pk;
    j["y_ck"] = label.y_ck;
    j["cell"] = std::string(to_string(label.cell()));
    return j;
}

/// Parses every line; malformed records and duplicate ids are skipped and
/// reported with their 1-based line numbers. Blank lines are ignored.
inline InstanceReadResult read_instances(std::istream& in) {
    InstanceReadResult out;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            QAInstance inst = instance_from_json(nlohmann::json::parse(line));
            if (!seen.emplace(inst.id, line_no).second)
                throw data_error("duplicate id " + inst.id);
            out.instances.push_back(std::move(inst));
        } catch (const nlohmann::json::exception& e) {
            out.skipped.push_back({line_no, e.what()});
        } catch (const Error& e) {
            out.skipped.push_back({line_no, e.what()});
        }
    }
    return out;
}

inline InstanceReadResult read_instances(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open instance file: " + path);
    return read_instances(in);
}

inline void write_instances(std::ostream& out, const std::vector<QAInstance>& instances) {
    for (const auto& inst : instances) out << instance_to_json(inst).dump() << '\n';
}

inline void write_labeled(std::ostream& out, const std::vector<QAInstance>& instances,
                          const std::vector<CellLabel>& labels) {
    for (std::size_t i = 0; i < instances.size(); ++i)
        out << labeled_to_json(instances[i], labels[i]).dump() << '\n';
}

} // namespace saber
