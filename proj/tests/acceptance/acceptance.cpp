// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Usage: acceptance [work_dir] [fixture_json]

#include "saber/saber.hpp"

#include "../support/oracles.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace saber;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_s;
    Verdict verdict;
    double seconds = 0.0;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------------------

Verdict faithfulness_identity() {
    struct Row {
        double cf, kf, printed_mfs;
    };
    const Row rows[] = {{0.928, 0.722, 82.5}, {0.079, 1.000, 53.9}};
    double worst = 0.0;
    for (const auto& r : rows) worst = std::max(worst, std::abs(100.0 * macro_faithfulness(r.cf, r.kf) - r.printed_mfs));
    const bool exact = macro_faithfulness(0.928, 0.722) == 0.825;
    return {exact && worst <= 0.05, "mfs(0.928,0.722)=" + format_number(macro_faithfulness(0.928, 0.722)) +
                                         " mfs(0.079,1.000)=" + format_number(macro_faithfulness(0.079, 1.0)) +
                                         " max_dev_pp=" + fmt("%.4f", worst)};
}

/// Score, coverage and risk columns of every data row of a sweep/report CSV.
std::vector<std::array<std::optional<double>, 3>> csv_metrics(const fs::path& p) {
    std::vector<std::array<std::optional<double>, 3>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        auto num = [](const std::string& s) -> std::optional<double> {
            if (s == "undefined") return std::nullopt;
            return std::stod(s);
        };
        rows.push_back({num(cells.at(1)), num(cells.at(2)), num(cells.at(3))});
    }
    return rows;
}

Verdict selective_identity(const std::vector<fs::path>& artifacts) {
    struct Row {
        double cov, risk, score;
    };
    const Row rows[] = {{65.0, 16.2, 43.9}, {58.5, 12.9, 43.4}, {58.6, 17.2, 38.5}, {60.0, 17.0, 39.6}};
    double worst = 0.0;
    for (const auto& r : rows)
        worst = std::max(worst, std::abs(score_from_coverage_risk(r.cov, r.risk / 100.0) - r.score));

    double worst_artifact = 0.0;
    std::size_t checked = 0;
    for (const auto& p : artifacts) {
        for (const auto& [score, cov, risk] : csv_metrics(p)) {
            if (!cov || *cov == 0.0 || !risk) continue;
            worst_artifact = std::max(worst_artifact, std::abs(*score - score_from_coverage_risk(*cov, *risk)));
            ++checked;
        }
    }
    return {worst <= 0.2 && checked > 0 && worst_artifact <= 1e-12,
            "reference_rows=4 max_dev_pp=" + fmt("%.3f", worst) + " artifact_rows=" + std::to_string(checked) +
                " max_identity_err=" + fmt("%.2e", worst_artifact)};
}

Verdict sweep_shape() {
    // Reference tau-sweep rows: (tau, score, coverage, risk) in percent.
    struct Row {
        double tau, score, cov, risk;
    };
    const Row table[] = {
        {0.05, 38.4, 84.0, 27.1}, {0.10, 40.2, 81.2, 25.2}, {0.15, 41.1, 79.2, 24.0}, {0.20, 41.7, 77.8, 23.2},
        {0.25, 42.4, 76.0, 22.1}, {0.30, 43.1, 74.3, 21.0}, {0.35, 43.6, 72.5, 19.9}, {0.40, 44.0, 70.5, 18.8},
        {0.45, 44.0, 68.3, 17.8}, {0.50, 43.9, 65.1, 16.3}, {0.55, 43.7, 62.6, 15.1}, {0.60, 43.3, 60.8, 14.3},
        {0.65, 42.9, 58.9, 13.6}, {0.70, 42.5, 57.0, 12.7}, {0.75, 41.9, 55.2, 12.0}, {0.80, 41.4, 53.0, 11.0},
        {0.85, 40.2, 50.2, 10.0}, {0.90, 38.3, 46.9, 9.1},  {0.95, 34.8, 41.2, 7.8}};
    double worst_reference = 0.0;
    for (const auto& r : table)
        worst_reference = std::max(worst_reference, std::abs(score_from_coverage_risk(r.cov, r.risk / 100.0) - r.score));

    // 10k synthetic instances with noisy beliefs.
    SplitMix64 rng(2025);
    std::vector<QAInstance> instances;
    std::vector<CellLabel> labels;
    std::vector<Beliefs> beliefs;
    for (std::size_t i = 0; i < 10000; ++i) {
        const CellLabel l{rng.below(2) == 1, rng.below(2) == 1};
        QAInstance q;
        q.id = std::to_string(i);
        q.gold_aliases = {"gold"};
        q.answer_pk = l.y_pk ? "gold" : "pk wrong";
        q.answer_ck = l.y_ck ? "gold" : "ck wrong";
        auto belief = [&](bool y) { return sigmoid((y ? 1.5 : -1.5) + 1.5 * rng.normal()); };
        beliefs.push_back({belief(l.y_pk), belief(l.y_ck)});
        instances.push_back(std::move(q));
        labels.push_back(l);
    }
    const auto rows = tau_sweep(beliefs, instances, labels, default_tau_grid());
    bool monotone = true;
    for (std::size_t i = 1; i < rows.size(); ++i) monotone &= rows[i].coverage() <= rows[i - 1].coverage();
    return {rows.size() == 19 && monotone && worst_reference <= 0.3,
            "rows=" + std::to_string(rows.size()) + " coverage_monotone=" + (monotone ? "yes" : "no") +
                " reference_rows_checked=19 max_dev_pp=" + fmt("%.3f", worst_reference)};
}

Verdict gradient_oracle() {
    SplitMix64 rng(4);
    double worst = 0.0;
    std::size_t params = 0;
    const int nets = 30;
    for (int i = 0; i < nets; ++i) {
        const auto p = oracle::random_problem(rng);
        const auto c = oracle::finite_difference_check(p.net, p.x, p.y);
        worst = std::max(worst, c.max_rel_error);
        params += c.parameters;
    }
    return {worst < 1e-4, "nets=" + std::to_string(nets) + " parameters=" + std::to_string(params) +
                              " max_rel_err=" + fmt("%.2e", worst)};
}

Verdict auroc_oracle() {
    SplitMix64 rng(5);
    std::size_t mismatches = 0, ties = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(300);
        std::vector<double> s(n);
        std::vector<int> y(n);
        const std::uint64_t levels = 2 + rng.below(40);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
            y[i] = static_cast<int>(rng.below(2));
        }
        y[0] = 0;
        y[n - 1] = 1;
        ties += n > levels;
        if (auroc(s, y) != oracle::pairwise_auroc(s, y)) ++mismatches;
    }
    return {mismatches == 0,
            "cases=200 with_ties=" + std::to_string(ties) + " mismatches=" + std::to_string(mismatches)};
}

Verdict structural_baselines() {
    SynthConfig cfg;
    cfg.n = 2000;
    const auto b = generate(cfg);
    std::vector<CellLabel> labels;
    for (const auto& i : b.instances) labels.push_back(label_instance(i));
    auto report = [&](Policy p) { return evaluate(grade(policy_answers(b.instances, labels, p, 1), b.instances, labels)); };
    const auto pk = report(Policy::always_pk);
    const auto ck = report(Policy::always_ck);
    const auto orc = report(Policy::oracle);
    const double expected = static_cast<double>(orc.n - orc.per_cell_counts[0]) / static_cast<double>(orc.n);
    const bool ok = *pk.kf() == 1.0 && *pk.cf() == 0.0 && *ck.cf() == 1.0 && *ck.kf() == 0.0 && orc.acc() == expected;
    return {ok, "always_pk KF=" + format_number(*pk.kf()) + " CF=" + format_number(*pk.cf()) +
                    "; always_ck CF=" + format_number(*ck.cf()) + " KF=" + format_number(*ck.kf()) +
                    "; oracle Acc=" + format_number(orc.acc()) + " (1-frac(C00)=" + format_number(expected) + ")"};
}

Verdict match_corpus(const std::string& fixture) {
    std::ifstream in(fixture);
    if (!in) return {false, "cannot open " + fixture};
    const auto cases = nlohmann::json::parse(in);
    std::size_t failed = 0;
    for (const auto& c : cases) {
        if (c["kind"] == "normalize") {
            failed += normalize(c["input"].get<std::string>()) != c["expected"].get<std::string>();
        } else {
            const auto v = match(c["answer"].get<std::string>(), c["aliases"].get<std::vector<std::string>>());
            failed += v.matched != c["matched"].get<bool>() || to_string(v.stage) != c["stage"].get<std::string>();
        }
    }

    const std::vector<std::string> vocab{"paris", "new", "york", "city", "the", "of", "Lutetia", "capital", "Ｐａｒｉｓ"};
    const char* ws[] = {" ", "  ", "\t", "\n ", "  "};
    SplitMix64 rng(9);
    auto phrase = [&](std::size_t max_len) {
        std::string s;
        const auto len = 1 + rng.below(max_len);
        for (std::uint64_t k = 0; k < len; ++k) s += (k ? " " : "") + vocab[rng.below(vocab.size())];
        return s;
    };
    auto jitter = [&](const std::string& s) {
        std::string out = ws[rng.below(5)];
        for (char ch : s) {
            if (ch == ' ') out += ws[rng.below(5)];
            else out += rng.below(2) ? static_cast<char>(std::toupper(static_cast<unsigned char>(ch))) : ch;
        }
        return out + ws[rng.below(5)];
    };
    std::size_t violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto answer = phrase(5);
        std::vector<std::string> aliases;
        const auto k = 1 + rng.below(4);
        for (std::uint64_t i = 0; i < k; ++i) aliases.push_back(phrase(2));
        const auto base = match(answer, aliases);
        auto perm = aliases;
        shuffle(std::span<std::string>(perm), rng);
        std::vector<std::string> noisy;
        for (const auto& a : perm) noisy.push_back(jitter(a));
        violations += match(answer, perm) != base || match(jitter(answer), noisy) != base;
    }
    return {cases.size() == 50 && failed == 0 && violations == 0,
            "fixture_cases=" + std::to_string(cases.size()) + " failed=" + std::to_string(failed) +
                " perturbation_trials=1000 violations=" + std::to_string(violations)};
}

// ---------------------------------------------------------------------------
// End-to-end run shared by the learnability, dominance and determinism checks.

struct PipelineRun {
    TrainResult train;
    EvalResult eval;
    SweepResult sweep;
    ReportResult report;
    double frac_c00_config = 0.0;
};

SynthConfig learnability_config() {
    SynthConfig cfg;
    cfg.n = 20000;
    cfg.d_p = 32;
    cfg.d_c = 32;
    cfg.k_traces = 3;
    cfg.signal = 4.0;
    cfg.noise_sigma = 1.0;
    cfg.cell_fracs = kDefaultCellFractions;
    cfg.seed = 42;
    return cfg;
}

PipelineRun run_pipeline(const fs::path& dir) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto cfg = learnability_config();
    const Json config = {{"seed", cfg.seed}, {"synth", synth_config_json(cfg)}};
    auto p = [&](const char* name) { return (dir / name).string(); };

    PipelineRun run;
    run.frac_c00_config = cfg.cell_fracs[0];
    cmd_synth(cfg, p("instances.jsonl"), p("features.sbfv"), config);
    cmd_label(p("instances.jsonl"), p("labeled.jsonl"), config);
    cmd_featurize(p("features.sbfv"), p("instances.jsonl"), p("fused.sbfv"), 1e-6, config);

    TrainRequest tr;
    tr.features_path = p("fused.sbfv");
    tr.instances_path = p("instances.jsonl");
    tr.out_dir = p("model");
    tr.net.seed = cfg.seed; // remaining net/train fields keep their defaults
    run.train = cmd_train(tr, config);

    EvalRequest ev;
    ev.pk_path = run.train.pk_path;
    ev.ck_path = run.train.ck_path;
    ev.features_path = p("fused.sbfv");
    ev.instances_path = p("instances.jsonl");
    ev.out_dir = p("eval");
    run.eval = cmd_eval(ev, config);

    SweepRequest sw;
    sw.pk_path = ev.pk_path;
    sw.ck_path = ev.ck_path;
    sw.features_path = ev.features_path;
    sw.instances_path = ev.instances_path;
    sw.out_dir = p("sweep");
    run.sweep = cmd_sweep(sw, config);

    ReportRequest rr;
    rr.decisions_path = run.eval.decisions_path;
    rr.instances_path = ev.instances_path;
    rr.out_dir = p("report");
    run.report = cmd_report(rr, config);
    return run;
}

Verdict learnability(const PipelineRun& run) {
    const auto& r = run.eval.report;
    const double frac_c00 = static_cast<double>(r.per_cell_counts[0]) / static_cast<double>(r.n);
    const double bound = 0.9 * (1.0 - frac_c00);
    const double pk = run.train.pk.net.meta.best_val_auroc;
    const double ck = run.train.ck.net.meta.best_val_auroc;
    const bool ok = pk >= 0.95 && ck >= 0.95 && r.acc() >= bound;
    return {ok, "val_auroc pk=" + fmt("%.4f", pk) + " ck=" + fmt("%.4f", ck) + " test_acc=" + fmt("%.4f", r.acc()) +
                    " bound=" + fmt("%.4f", bound) + " (test frac(C00)=" + fmt("%.4f", frac_c00) +
                    ") epochs pk=" + std::to_string(run.train.pk.net.meta.epochs_run) +
                    " ck=" + std::to_string(run.train.ck.net.meta.epochs_run)};
}

Verdict dominance(const PipelineRun& run) {
    const auto& beliefs = run.eval.scored.beliefs;
    const auto& outcomes = run.eval.outcomes;
    const double random_risk = random_abstainer_risk(outcomes);
    bool ok = true;
    std::string detail = "random_risk=" + fmt("%.4f", random_risk) + " saber:";
    for (int k = 0; k <= 4; ++k) {
        const double target = 0.60 + 0.05 * k;
        const auto pt = risk_at_coverage(beliefs, outcomes, target);
        ok &= pt.risk.has_value() && *pt.risk < random_risk;
        detail += " cov=" + fmt("%.3f", pt.coverage) + "->" + fmt("%.4f", pt.risk.value_or(NAN));
    }
    return {ok, detail};
}

Verdict determinism(const fs::path& a, const fs::path& b) {
    std::size_t compared = 0;
    std::vector<std::string> differing;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a);
        const auto ext = rel.extension().string();
        const bool text = ext == ".csv" || ext == ".svg" || ext == ".json" || ext == ".jsonl" || ext == ".txt";
        if (!text && ext != ".ckpt") continue;
        ++compared;
        if (!fs::exists(b / rel) || slurp(entry.path()) != slurp(b / rel)) differing.push_back(rel.string());
    }
    std::string detail = "files_compared=" + std::to_string(compared) + " differing=" + std::to_string(differing.size());
    for (const auto& d : differing) detail += " " + d;
    return {compared > 0 && differing.empty(), detail};
}

} // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "saber_acceptance";
    const std::string fixture = argc > 2 ? argv[2] : std::string(SABER_TEST_DATA) + "/match_cases.json";

    std::map<int, Criterion> results;
    auto run = [&](int id, std::string name, double budget, const std::function<Verdict()>& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        results[id] = {id, std::move(name), budget, std::move(v), s};
        return s;
    };

    run(1, "faithfulness metric identity", 1.0, faithfulness_identity);
    run(3, "tau-sweep shape", 5.0, sweep_shape);
    run(4, "gradient oracle", 30.0, gradient_oracle);
    run(5, "AUROC oracle", 5.0, auroc_oracle);
    run(7, "structural baselines", 1.0, structural_baselines);
    run(9, "match-cascade corpus", 5.0, [&] { return match_corpus(fixture); });

    PipelineRun first;
    const double t6 = run(6, "learnability end-to-end", 60.0, [&] {
        first = run_pipeline(work / "run_a");
        return learnability(first);
    });
    run(8, "abstention quality dominance", 10.0, [&] { return dominance(first); });
    run(2, "selective-prediction identity", 1.0, [&] {
        return selective_identity({first.sweep.csv_path, first.report.sweep.csv_path});
    });
    results[10] = {10, "determinism", 2.0 * t6, {}, 0.0};
    run(10, "determinism", 2.0 * t6, [&] {
        run_pipeline(work / "run_b");
        return determinism(work / "run_a", work / "run_b");
    });

    int failed = 0;
    for (auto& [id, c] : results) {
        const bool in_time = c.seconds < c.budget_s;
        const bool pass = c.verdict.pass && in_time;
        failed += !pass;
        std::printf("[%s] criterion %d: %s | %s | time=%.2fs budget=%.2fs%s\n", pass ? "PASS" : "FAIL", id,
                    c.name.c_str(), c.verdict.detail.c_str(), c.seconds, c.budget_s, in_time ? "" : " OVER BUDGET");
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
    return failed == 0 ? 0 : 1;
}
