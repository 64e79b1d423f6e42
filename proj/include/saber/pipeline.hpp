#pragma once

// File-level stages behind the CLI: label, synth, featurize, train, eval,
// sweep and report. Each stage reads its declared inputs, writes its outputs
// and embeds the tool version plus the effective configuration (binary
// files in their headers, text files in a `<file>.meta.json` sidecar, plots
// in an SVG <metadata> element).

#include "saber/belief_net.hpp"
#include "saber/checkpoint.hpp"
#include "saber/core.hpp"
#include "saber/decision.hpp"
#include "saber/error.hpp"
#include "saber/feature_io.hpp"
#include "saber/features.hpp"
#include "saber/instance_io.hpp"
#include "saber/matcher.hpp"
#include "saber/metrics.hpp"
#include "saber/synth.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace saber {

inline constexpr std::string_view kToolVersion = "0.1.0";

using Json = nlohmann::ordered_json;

namespace detail {

inline Json provenance(std::string_view command, const Json& config) {
    Json j;
    j["tool"] = "saber";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["config"] = config;
    return j;
}

inline void write_sidecar(const std::string& path, std::string_view command, const Json& config) {
    write_text_file(path + ".meta.json", provenance(command, config).dump(2) + "\n");
}

/// Writes through a temporary file so a failed stage leaves no partial output.
inline void write_atomically(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    write_text_file(tmp, content);
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw data_error("cannot move " + tmp + " to " + path + ": " + ec.message());
}

inline std::string join_first(const std::vector<std::string>& ids, std::size_t limit = 5) {
    std::string s;
    for (std::size_t i = 0; i < ids.size() && i < limit; ++i) {
        if (i) s += ", ";
        s += ids[i];
    }
    if (ids.size() > limit) s += ", ...";
    return s;
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw data_error("cannot create directory " + dir + ": " + ec.message());
}

inline std::string in_dir(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

} // namespace detail

inline Json report_to_json(const EvalReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
    Json j;
    j["n"] = r.n;
    j["acc"] = r.acc();
    j["cf"] = opt(r.cf());
    j["kf"] = opt(r.kf());
    j["mfs"] = opt(r.mfs());
    j["score"] = r.score();
    j["coverage"] = r.coverage();
    j["risk_answered"] = opt(r.risk_answered());
    j["abstain_f1"] = r.abstain_f1();
    j["n_plus"] = r.n_plus;
    j["n_minus"] = r.n_minus;
    j["n_zero"] = r.n_zero;
    j["per_cell_counts"] = {{"C00", r.per_cell_counts[0]},
                            {"C10", r.per_cell_counts[1]},
                            {"C01", r.per_cell_counts[2]},
                            {"C11", r.per_cell_counts[3]}};
    return j;
}

/// Reads an instance file and fails on any malformed line.
inline std::vector<QAInstance> read_instances_strict(const std::string& path) {
    auto res = read_instances(path);
    if (!res.skipped.empty()) {
        const auto& first = res.skipped.front();
        throw data_error(path + ": " + std::to_string(res.skipped.size()) + " malformed record(s); line " +
                         std::to_string(first.line) + ": " + first.message);
    }
    if (res.instances.empty()) throw data_error(path + ": empty dataset");
    return std::move(res.instances);
}

// ---------------------------------------------------------------------------
// label

struct LabelSummary {
    std::size_t labeled = 0;
    std::vector<LineIssue> skipped;
    CellHistogram histogram{};
};

inline LabelSummary cmd_label(const std::string& instances_path, const std::string& out_path, const Json& config) {
    auto res = read_instances(instances_path);
    std::vector<CellLabel> labels;
    labels.reserve(res.instances.size());
    for (const auto& inst : res.instances) labels.push_back(label_instance(inst));
    std::ostringstream body;
    write_labeled(body, res.instances, labels);
    detail::write_atomically(out_path, body.str());
    detail::write_sidecar(out_path, "label", config);
    return {res.instances.size(), std::move(res.skipped), cell_histogram(labels)};
}

// ---------------------------------------------------------------------------
// synth

inline Json synth_config_json(const SynthConfig& c) {
    Json j;
    j["n"] = c.n;
    j["cell_fracs"] = c.cell_fracs;
    j["d_p"] = c.d_p;
    j["d_c"] = c.d_c;
    j["k_traces"] = c.k_traces;
    j["signal"] = c.signal;
    j["noise_sigma"] = c.noise_sigma;
    j["label_flip"] = c.label_flip;
    j["seed"] = c.seed;
    j["dataset_tag"] = c.dataset_tag;
    j["split"] = {c.split.train_frac, c.split.val_frac, c.split.test_frac};
    return j;
}

inline SynthBenchmark cmd_synth(const SynthConfig& cfg, const std::string& instances_path,
                                const std::string& features_path, const Json& config) {
    auto bench = generate(cfg);
    std::ostringstream body;
    write_instances(body, bench.instances);
    detail::write_atomically(instances_path, body.str());
    detail::write_sidecar(instances_path, "synth", config);

    FeatureFile file;
    file.manifest.dim_prior = cfg.d_p;
    file.manifest.dim_cond = cfg.d_c;
    file.manifest.traces = cfg.k_traces;
    file.manifest.backbone_tag = "synthetic";
    file.manifest.meta = nlohmann::json::parse(detail::provenance("synth", config).dump());
    file.records = bench.features;
    write_feature_file(features_path, file);
    return bench;
}

// ---------------------------------------------------------------------------
// Model inputs

/// Fused inputs keyed by instance id. Raw feature files yield unstandardized
/// vectors; fused files yield their stored standardized vectors plus the
/// standardizer that produced them.
struct InputTable {
    FeatureManifest manifest;
    std::vector<std::string> ids;
    std::vector<Vector> x;
    std::optional<Standardizer> standardizer;

    std::size_t dim() const noexcept { return manifest.input_dim(); }
};

inline InputTable load_inputs(const std::string& path) {
    InputTable t;
    if (feature_file_kind(path) == "fused") {
        auto f = read_fused_file(path);
        t.manifest = std::move(f.manifest);
        t.ids = std::move(f.ids);
        t.x = std::move(f.inputs);
        t.standardizer = std::move(f.standardizer);
        return t;
    }
    auto f = read_feature_file(path);
    t.manifest = std::move(f.manifest);
    for (const auto& r : f.records) {
        t.ids.push_back(r.instance_id);
        t.x.push_back(build_input(r).x);
    }
    return t;
}

/// Rows of `table` in the order of `instances`; errors list the first five
/// ids that have no feature row.
inline std::vector<Vector> align_inputs(const InputTable& table, const std::vector<QAInstance>& instances) {
    std::unordered_map<std::string_view, std::size_t> row;
    for (std::size_t i = 0; i < table.ids.size(); ++i) row.emplace(table.ids[i], i);
    std::vector<std::string> missing;
    std::vector<Vector> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) {
        auto it = row.find(inst.id);
        if (it == row.end()) {
            missing.push_back(inst.id);
            continue;
        }
        out.push_back(table.x[it->second]);
    }
    if (!missing.empty())
        throw data_error("id mismatch: " + std::to_string(missing.size()) +
                         " instance(s) have no features: " + detail::join_first(missing));
    return out;
}

// ---------------------------------------------------------------------------
// featurize

inline FusedFile cmd_featurize(const std::string& features_path, const std::string& instances_path,
                               const std::string& out_path, double epsilon, const Json& config) {
    const auto raw = read_feature_file(features_path);
    const auto instances = read_instances_strict(instances_path);
    std::unordered_map<std::string_view, Split> split_of;
    for (const auto& inst : instances) split_of.emplace(inst.id, inst.split);

    FusedFile out;
    out.manifest = raw.manifest;
    out.manifest.meta = nlohmann::json::parse(detail::provenance("featurize", config).dump());
    out.manifest.meta["source"] = raw.manifest.meta;
    std::vector<std::string> unknown;
    std::vector<Vector> train_x;
    for (const auto& r : raw.records) {
        auto it = split_of.find(r.instance_id);
        if (it == split_of.end()) {
            unknown.push_back(r.instance_id);
            continue;
        }
        out.ids.push_back(r.instance_id);
        out.inputs.push_back(build_input(r).x);
        if (it->second == Split::train) train_x.push_back(out.inputs.back());
    }
    if (!unknown.empty())
        throw data_error("id mismatch: " + std::to_string(unknown.size()) +
                         " feature record(s) have no instance: " + detail::join_first(unknown));
    if (train_x.empty()) throw data_error("no training-split records to fit the standardizer");
    out.standardizer = fit_standardizer(train_x, epsilon);
    for (auto& x : out.inputs) x = out.standardizer.apply(x);
    write_fused_file(out_path, out);
    return out;
}

// ---------------------------------------------------------------------------
// train

struct TrainRequest {
    std::string features_path;
    std::string instances_path;
    std::string out_dir;
    NetConfig net;            // input_dim is filled from the features
    TrainConfig train;
    double epsilon = 1e-6;
    std::optional<SplitConfig> resplit; // re-derive splits instead of using the file's
};

struct TrainResult {
    Checkpoint pk;
    Checkpoint ck;
    std::vector<EpochRecord> pk_history;
    std::vector<EpochRecord> ck_history;
    std::string pk_path;
    std::string ck_path;
    std::string log_path;
};

inline std::string format_log_line(std::string_view side, const EpochRecord& e) {
    return "side=" + std::string(side) + " epoch=" + std::to_string(e.epoch) +
           " train_loss=" + format_number(e.train_loss) + " val_auroc=" + format_number(e.val_auroc);
}

inline std::string format_stop_line(std::string_view side, const TrainingMeta& m) {
    return "side=" + std::string(side) + (m.early_stopped ? " early-stopped" : " max-epochs-reached") +
           " best_epoch=" + std::to_string(m.best_epoch) + " best_val_auroc=" + format_number(m.best_val_auroc) +
           " epochs_run=" + std::to_string(m.epochs_run);
}

inline TrainResult cmd_train(const TrainRequest& req, const Json& config) {
    auto instances = read_instances_strict(req.instances_path);
    if (req.resplit) {
        const auto parts = split_by_group(instances, *req.resplit);
        std::unordered_map<std::string, Split> assigned;
        for (const auto* part : {&parts.train, &parts.val, &parts.test})
            for (const auto& inst : *part) assigned.emplace(inst.id, inst.split);
        for (auto& inst : instances) inst.split = assigned.at(inst.id);
    }
    const auto table = load_inputs(req.features_path);
    auto inputs = align_inputs(table, instances);

    std::vector<Vector> train_x, val_x;
    std::vector<int> train_pk, train_ck, val_pk, val_ck;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto label = label_instance(instances[i]);
        if (instances[i].split == Split::train) {
            train_x.push_back(std::move(inputs[i]));
            train_pk.push_back(label.y_pk);
            train_ck.push_back(label.y_ck);
        } else if (instances[i].split == Split::val) {
            val_x.push_back(std::move(inputs[i]));
            val_pk.push_back(label.y_pk);
            val_ck.push_back(label.y_ck);
        }
    }
    if (train_x.empty()) throw data_error("empty training split");
    if (val_x.empty()) throw data_error("empty validation split");

    Standardizer standardizer;
    if (table.standardizer) {
        standardizer = *table.standardizer;
    } else {
        standardizer = fit_standardizer(train_x, req.epsilon);
        for (auto& x : train_x) x = standardizer.apply(x);
        for (auto& x : val_x) x = standardizer.apply(x);
    }

    NetConfig base = req.net;
    base.input_dim = table.dim();
    detail::ensure_dir(req.out_dir);

    TrainResult result;
    auto fit_side = [&](std::string_view side, const std::vector<int>& ty, const std::vector<int>& vy,
                        std::vector<EpochRecord>& history) {
        NetConfig cfg = base;
        cfg.seed = derive_seed(base.seed, side);
        BeliefNet net = init_params(cfg);
        net = train(std::move(net), train_x, ty, val_x, vy, req.train, &history);
        net.standardizer = standardizer;
        Checkpoint ck{std::string(side), std::move(net), req.train,
                      nlohmann::json::parse(detail::provenance("train", config).dump())};
        return ck;
    };
    result.pk = fit_side("pk", train_pk, val_pk, result.pk_history);
    result.ck = fit_side("ck", train_ck, val_ck, result.ck_history);

    result.pk_path = detail::in_dir(req.out_dir, "pk_predictor.ckpt");
    result.ck_path = detail::in_dir(req.out_dir, "ck_predictor.ckpt");
    result.log_path = detail::in_dir(req.out_dir, "train_log.txt");
    write_checkpoint(result.pk_path, result.pk);
    write_checkpoint(result.ck_path, result.ck);

    std::string log;
    log += "# saber " + std::string(kToolVersion) + " training log\n";
    for (const auto& e : result.pk_history) log += format_log_line("pk", e) + "\n";
    log += format_stop_line("pk", result.pk.net.meta) + "\n";
    for (const auto& e : result.ck_history) log += format_log_line("ck", e) + "\n";
    log += format_stop_line("ck", result.ck.net.meta) + "\n";
    write_text_file(result.log_path, log);
    detail::write_sidecar(result.log_path, "train", config);
    return result;
}

// ---------------------------------------------------------------------------
// eval / sweep

enum class SplitFilter : std::uint8_t { train, val, test, all };

inline SplitFilter parse_split_filter(std::string_view s) {
    if (s == "all") return SplitFilter::all;
    if (auto sp = parse_split(s)) return static_cast<SplitFilter>(*sp);
    throw usage_error("split must be one of train, val, test, all");
}

struct Scored {
    std::vector<QAInstance> instances;
    std::vector<CellLabel> labels;
    std::vector<Beliefs> beliefs;
};

/// Beliefs of both predictors for the selected instances.
inline Scored score_instances(const std::string& pk_path, const std::string& ck_path,
                              const std::string& features_path, const std::string& instances_path,
                              SplitFilter filter) {
    const auto pk = read_checkpoint(pk_path);
    const auto ck = read_checkpoint(ck_path);
    const auto table = load_inputs(features_path);
    for (const auto* c : {&pk, &ck})
        if (c->net.input_dim() != table.dim())
            throw data_error("dimension mismatch: checkpoint expects input dimension " +
                             std::to_string(c->net.input_dim()) + ", features provide " +
                             std::to_string(table.dim()));

    Scored s;
    for (auto& inst : read_instances_strict(instances_path))
        if (filter == SplitFilter::all || static_cast<SplitFilter>(inst.split) == filter)
            s.instances.push_back(std::move(inst));
    if (s.instances.empty()) throw data_error("no instances in the selected split");
    const auto inputs = align_inputs(table, s.instances);
    // Fused files are already standardized; raw ones use each checkpoint's statistics.
    auto logits_for = [&](const Checkpoint& c) {
        if (table.standardizer) return predict_logits(c.net, inputs);
        std::vector<Vector> xs;
        xs.reserve(inputs.size());
        for (const auto& x : inputs) xs.push_back(c.net.standardizer.apply(x));
        return predict_logits(c.net, xs);
    };
    const auto lp = logits_for(pk);
    const auto lc = logits_for(ck);
    for (std::size_t i = 0; i < s.instances.size(); ++i) {
        s.beliefs.push_back({sigmoid(lp[i]), sigmoid(lc[i])});
        s.labels.push_back(label_instance(s.instances[i]));
    }
    return s;
}

inline Json decision_to_json(const QAInstance& inst, const Decision& d, bool correct) {
    Json j;
    j["id"] = inst.id;
    j["p_pk"] = d.p_pk;
    j["p_ck"] = d.p_ck;
    j["cell"] = to_string(d.cell);
    j["action"] = to_string(d.action);
    j["emitted"] = d.emitted;
    j["correct"] = correct;
    return j;
}

struct EvalRequest {
    std::string pk_path;
    std::string ck_path;
    std::string features_path;
    std::string instances_path;
    std::string out_dir;
    DecisionMode mode{};
    SplitFilter split = SplitFilter::test;
};

struct EvalResult {
    Scored scored;
    std::vector<Decision> decisions;
    std::vector<Outcome> outcomes;
    EvalReport report;
    std::string decisions_path;
    std::string report_path;
};

inline EvalResult cmd_eval(const EvalRequest& req, const Json& config) {
    req.mode.validate();
    EvalResult r;
    r.scored = score_instances(req.pk_path, req.ck_path, req.features_path, req.instances_path, req.split);
    r.decisions = decide_batch(r.scored.instances, r.scored.beliefs, req.mode);
    r.outcomes = grade(r.decisions, r.scored.instances, r.scored.labels);
    r.report = evaluate(r.outcomes);

    detail::ensure_dir(req.out_dir);
    r.decisions_path = detail::in_dir(req.out_dir, "decisions.jsonl");
    r.report_path = detail::in_dir(req.out_dir, "eval_report.json");
    std::string body;
    for (std::size_t i = 0; i < r.decisions.size(); ++i)
        body += decision_to_json(r.scored.instances[i], r.decisions[i], r.outcomes[i].correct).dump() + "\n";
    write_text_file(r.decisions_path, body);
    detail::write_sidecar(r.decisions_path, "eval", config);
    Json report = detail::provenance("eval", config);
    report["mode"] = req.mode.mode == Mode::abstention ? "abstention" : "default";
    report["tau"] = req.mode.tau;
    report["report"] = report_to_json(r.report);
    write_text_file(r.report_path, report.dump(2) + "\n");
    return r;
}

struct SweepResult {
    EvalReport summary;
    std::vector<SweepRow> rows;
    std::string csv_path;
    std::string svg_path;
};

inline SweepResult emit_sweep(const Scored& scored, const std::vector<double>& grid, const DecisionMode& summary_mode,
                              const std::string& out_dir, const std::string& stem, std::string_view command,
                              const Json& config) {
    SweepResult r;
    r.summary = evaluate(grade_by_label(decide_batch(scored.instances, scored.beliefs, summary_mode), scored.labels));
    r.rows = grid.empty() ? std::vector<SweepRow>{} : tau_sweep(scored.beliefs, scored.instances, scored.labels, grid);
    detail::ensure_dir(out_dir);
    r.csv_path = detail::in_dir(out_dir, stem + ".csv");
    r.svg_path = detail::in_dir(out_dir, stem + ".svg");
    report_emit(r.summary, r.rows, r.csv_path, r.svg_path, detail::provenance(command, config).dump());
    detail::write_sidecar(r.csv_path, command, config);
    return r;
}

struct SweepRequest {
    std::string pk_path;
    std::string ck_path;
    std::string features_path;
    std::string instances_path;
    std::string out_dir;
    std::vector<double> grid = default_tau_grid();
    DecisionMode summary_mode{Mode::abstention, 0.5};
    SplitFilter split = SplitFilter::test;
};

inline SweepResult cmd_sweep(const SweepRequest& req, const Json& config) {
    req.summary_mode.validate();
    const auto scored = score_instances(req.pk_path, req.ck_path, req.features_path, req.instances_path, req.split);
    return emit_sweep(scored, req.grid, req.summary_mode, req.out_dir, "sweep", "sweep", config);
}

// ---------------------------------------------------------------------------
// report

struct ReportRequest {
    std::string decisions_path;
    std::string instances_path;
    std::string out_dir;
    std::vector<double> grid = default_tau_grid();
    double tau = 0.5;
};

struct ReportResult {
    EvalReport report; // from the recorded decisions, graded by matching
    SweepResult sweep; // re-thresholded recorded beliefs
    std::string json_path;
};

/// Recomputes metrics from recorded decisions (no checkpoints needed) and
/// re-runs the threshold sweep over the recorded beliefs.
inline ReportResult cmd_report(const ReportRequest& req, const Json& config) {
    std::unordered_map<std::string, QAInstance> by_id;
    for (auto& inst : read_instances_strict(req.instances_path)) by_id.emplace(inst.id, std::move(inst));

    std::ifstream in(req.decisions_path);
    if (!in) throw data_error("cannot open decision file: " + req.decisions_path);
    Scored scored;
    std::vector<Decision> decisions;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto id = j.at("id").get<std::string>();
            auto it = by_id.find(id);
            if (it == by_id.end()) throw data_error("unknown instance id " + id);
            Decision d;
            d.p_pk = j.at("p_pk").get<double>();
            d.p_ck = j.at("p_ck").get<double>();
            d.cell = parse_cell(j.at("cell").get<std::string>()).value_or(assign_cell(d.p_pk, d.p_ck, req.tau));
            const auto action = parse_action(j.at("action").get<std::string>());
            if (!action) throw data_error("unknown action");
            d.action = *action;
            d.emitted = j.at("emitted").get<std::string>();
            scored.instances.push_back(it->second);
            scored.labels.push_back(label_instance(it->second));
            scored.beliefs.push_back({d.p_pk, d.p_ck});
            decisions.push_back(std::move(d));
        } catch (const nlohmann::json::exception& e) {
            throw data_error(req.decisions_path + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw data_error(req.decisions_path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (decisions.empty()) throw data_error(req.decisions_path + ": no decisions");

    ReportResult r;
    r.report = evaluate(grade(decisions, scored.instances, scored.labels));
    detail::ensure_dir(req.out_dir);
    // Summary row of the table reflects the recorded decisions, not a re-threshold.
    r.sweep.rows = req.grid.empty() ? std::vector<SweepRow>{}
                                    : tau_sweep(scored.beliefs, scored.instances, scored.labels, req.grid);
    r.sweep.summary = r.report;
    r.sweep.csv_path = detail::in_dir(req.out_dir, "report.csv");
    r.sweep.svg_path = detail::in_dir(req.out_dir, "report.svg");
    report_emit(r.report, r.sweep.rows, r.sweep.csv_path, r.sweep.svg_path,
                detail::provenance("report", config).dump());
    detail::write_sidecar(r.sweep.csv_path, "report", config);
    r.json_path = detail::in_dir(req.out_dir, "report.json");
    Json j = detail::provenance("report", config);
    j["report"] = report_to_json(r.report);
    write_text_file(r.json_path, j.dump(2) + "\n");
    return r;
}

} // namespace saber
