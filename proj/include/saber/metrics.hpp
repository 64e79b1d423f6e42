#pragma once

// Answer-quality and selective-prediction metrics, all accumulated as exact
// integer counts and divided only when a fraction is requested. Metrics that
// are undefined on a slice (empty restricted cell, nothing answered) are
// std::nullopt, never zero.

#include "saber/core.hpp"
#include "saber/decision.hpp"
#include "saber/error.hpp"
#include "saber/matcher.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace saber {

/// One graded decision: whether it answered, whether the emitted answer
/// alias-matches the gold, and the instance's ground-truth cell.
struct Outcome {
    bool answered = true;
    bool correct = false;
    Cell gold = Cell::C00;
};

/// Grades each decision by matching its emitted text against the gold
/// aliases. Abstentions are never correct.
inline std::vector<Outcome> grade(const std::vector<Decision>& decisions, const std::vector<QAInstance>& instances,
                                  const std::vector<CellLabel>& labels) {
    if (decisions.size() != instances.size() || decisions.size() != labels.size())
        throw data_error("decisions, instances and labels differ in length");
    std::vector<Outcome> out;
    out.reserve(decisions.size());
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        const bool answered = decisions[i].action != Action::abstain;
        const bool correct = answered && match(decisions[i].emitted, instances[i].gold_aliases).matched;
        out.push_back({answered, correct, labels[i].cell()});
    }
    return out;
}

/// Grades from the instance labels: an answer's correctness is the label of
/// the side whose text was emitted. Equivalent to grade() without re-matching.
inline std::vector<Outcome> grade_by_label(const std::vector<Decision>& decisions,
                                           const std::vector<CellLabel>& labels) {
    if (decisions.size() != labels.size()) throw data_error("decisions and labels differ in length");
    std::vector<Outcome> out;
    out.reserve(decisions.size());
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        const auto a = decisions[i].action;
        const bool correct = (a == Action::answer_pk && labels[i].y_pk) || (a == Action::answer_ck && labels[i].y_ck);
        out.push_back({a != Action::abstain, correct, labels[i].cell()});
    }
    return out;
}

struct EvalReport {
    std::size_t n = 0;
    std::size_t n_correct = 0;
    std::size_t n_c01 = 0, n_c01_correct = 0;
    std::size_t n_c10 = 0, n_c10_correct = 0;
    std::size_t n_plus = 0, n_minus = 0, n_zero = 0;
    std::size_t n_gold_abstain = 0;   // |G|, ground-truth C00
    std::size_t n_abstain_in_gold = 0; // |A ∩ G|
    CellHistogram per_cell_counts{};

    double acc() const { return ratio(n_correct, n); }
    std::optional<double> cf() const { return optional_ratio(n_c01_correct, n_c01); }
    std::optional<double> kf() const { return optional_ratio(n_c10_correct, n_c10); }
    std::optional<double> mfs() const {
        const auto c = cf();
        const auto k = kf();
        if (!c || !k) return std::nullopt;
        return (*c + *k) / 2.0;
    }
    double score() const {
        return (static_cast<double>(n_plus) - static_cast<double>(n_minus)) / static_cast<double>(n);
    }
    double coverage() const { return ratio(n_plus + n_minus, n); }
    std::optional<double> risk_answered() const { return optional_ratio(n_minus, n_plus + n_minus); }
    /// 2|A∩G| / (|A| + |G|); 1 when both sets are empty.
    double abstain_f1() const {
        const std::size_t denom = n_zero + n_gold_abstain;
        if (denom == 0) return 1.0;
        return static_cast<double>(2 * n_abstain_in_gold) / static_cast<double>(denom);
    }

private:
    static double ratio(std::size_t a, std::size_t b) {
        return static_cast<double>(a) / static_cast<double>(b);
    }
    static std::optional<double> optional_ratio(std::size_t a, std::size_t b) {
        if (b == 0) return std::nullopt;
        return ratio(a, b);
    }
};

inline EvalReport evaluate(const std::vector<Outcome>& outcomes) {
    if (outcomes.empty()) throw data_error("cannot evaluate an empty decision set");
    EvalReport r;
    r.n = outcomes.size();
    for (const auto& o : outcomes) {
        ++r.per_cell_counts[histogram_index(o.gold)];
        if (o.correct) ++r.n_correct;
        if (o.gold == Cell::C01) {
            ++r.n_c01;
            if (o.correct) ++r.n_c01_correct;
        } else if (o.gold == Cell::C10) {
            ++r.n_c10;
            if (o.correct) ++r.n_c10_correct;
        }
        if (!o.answered)
            ++r.n_zero;
        else if (o.correct)
            ++r.n_plus;
        else
            ++r.n_minus;
        if (o.gold == Cell::C00) {
            ++r.n_gold_abstain;
            if (!o.answered) ++r.n_abstain_in_gold;
        }
    }
    return r;
}

/// Abstentions count as incorrect.
inline double accuracy(const std::vector<Outcome>& outcomes) { return evaluate(outcomes).acc(); }

struct Faithfulness {
    std::optional<double> cf;
    std::optional<double> kf;
    std::optional<double> mfs;
};

constexpr double macro_faithfulness(double cf, double kf) noexcept { return (cf + kf) / 2.0; }

inline Faithfulness cf_kf_mfs(const std::vector<Outcome>& outcomes) {
    const auto r = evaluate(outcomes);
    return {r.cf(), r.kf(), r.mfs()};
}

struct SelectiveMetrics {
    double score = 0.0;
    double coverage = 0.0;
    std::optional<double> risk_answered;
    double abstain_f1 = 0.0;
};

/// Score in terms of coverage and answered risk: cov * (1 - 2 * risk).
constexpr double score_from_coverage_risk(double coverage, double risk) noexcept {
    return coverage * (1.0 - 2.0 * risk);
}

inline SelectiveMetrics selective_metrics(const std::vector<Outcome>& outcomes) {
    const auto r = evaluate(outcomes);
    return {r.score(), r.coverage(), r.risk_answered(), r.abstain_f1()};
}

// ---------------------------------------------------------------------------
// Threshold sweep

struct SweepRow {
    double tau = 0.0;
    EvalReport report;

    double score() const { return report.score(); }
    double coverage() const { return report.coverage(); }
    std::optional<double> risk_answered() const { return report.risk_answered(); }
    double abstain_f1() const { return report.abstain_f1(); }
};

/// 0.05, 0.10, ..., 0.95 (computed as k / 20).
inline std::vector<double> default_tau_grid() {
    std::vector<double> g;
    for (int k = 1; k <= 19; ++k) g.push_back(static_cast<double>(k) / 20.0);
    return g;
}

/// Abstention-mode decisions at every tau, graded from the instance labels.
/// Rows come back sorted by tau.
inline std::vector<SweepRow> tau_sweep(const std::vector<Beliefs>& beliefs, const std::vector<QAInstance>& instances,
                                       const std::vector<CellLabel>& labels, std::vector<double> grid) {
    if (beliefs.size() != instances.size() || beliefs.size() != labels.size())
        throw data_error("beliefs, instances and labels differ in length");
    std::sort(grid.begin(), grid.end());
    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (double tau : grid) {
        const DecisionMode mode{Mode::abstention, tau};
        mode.validate();
        rows.push_back({tau, evaluate(grade_by_label(decide_batch(instances, beliefs, mode), labels))});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Matched-coverage comparison

struct CoveragePoint {
    double coverage = 0.0;
    std::optional<double> risk;
};

/// Risk when answering only the instances whose larger belief is among the
/// top ceil(target * n); ties with the cut-off belief are all answered, as a
/// threshold would. `default_outcomes` are the full-coverage decisions.
inline CoveragePoint risk_at_coverage(const std::vector<Beliefs>& beliefs, const std::vector<Outcome>& default_outcomes,
                                      double target) {
    if (beliefs.size() != default_outcomes.size() || beliefs.empty())
        throw data_error("beliefs and outcomes must be non-empty and aligned");
    std::vector<double> conf;
    conf.reserve(beliefs.size());
    for (const auto& b : beliefs) conf.push_back(std::max(b.p_pk, b.p_ck));
    std::vector<double> sorted = conf;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const auto n = sorted.size();
    const auto m = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(target * static_cast<double>(n) - 1e-9)), 1, n);
    const double cut = sorted[m - 1];
    std::size_t answered = 0, wrong = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (conf[i] < cut) continue;
        ++answered;
        if (!default_outcomes[i].correct) ++wrong;
    }
    return {static_cast<double>(answered) / static_cast<double>(n),
            static_cast<double>(wrong) / static_cast<double>(answered)};
}

/// Expected answered risk of an abstainer that drops a uniformly random
/// subset: equal to the full-coverage error rate at every coverage level.
inline double random_abstainer_risk(const std::vector<Outcome>& default_outcomes) {
    if (default_outcomes.empty()) throw data_error("empty outcome set");
    std::size_t wrong = 0;
    for (const auto& o : default_outcomes)
        if (!o.correct) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(default_outcomes.size());
}

// ---------------------------------------------------------------------------
// Emission

/// Shortest round-trip decimal for a double.
inline std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_metric(const std::optional<double>& v) {
    return v ? format_number(*v) : std::string("undefined");
}

inline constexpr std::string_view kSweepCsvHeader =
    "tau,score,coverage,risk_answered,abstain_f1,n_plus,n_minus,n_zero";

inline std::string csv_row(const std::string& tau, const EvalReport& r) {
    return tau + "," + format_number(r.score()) + "," + format_number(r.coverage()) + "," +
           format_metric(r.risk_answered()) + "," + format_number(r.abstain_f1()) + "," + std::to_string(r.n_plus) +
           "," + std::to_string(r.n_minus) + "," + std::to_string(r.n_zero);
}

/// Header, one row per tau, then a row whose tau column reads "summary".
inline std::string sweep_csv(const EvalReport& summary, const std::vector<SweepRow>& sweep) {
    std::string out(kSweepCsvHeader);
    out += '\n';
    for (const auto& row : sweep) out += csv_row(format_number(row.tau), row.report) + '\n';
    out += csv_row("summary", summary) + '\n';
    return out;
}

namespace detail {

inline std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace detail

/// Risk-coverage plot: coverage on x, answered risk on y, the swept curve
/// plus a marker at tau = 0.5 when that point is on the grid.
inline std::string risk_coverage_svg(const std::vector<SweepRow>& sweep, std::string_view metadata = {}) {
    constexpr double W = 480, H = 360, L = 60, R = 20, T = 30, B = 50;
    double y_max = 0.5;
    for (const auto& row : sweep)
        if (auto r = row.risk_answered()) y_max = std::max(y_max, *r);
    y_max = std::ceil(y_max * 10.0) / 10.0;
    auto px = [&](double cov) { return L + cov * (W - L - R); };
    auto py = [&](double risk) { return H - B - risk / y_max * (H - T - B); };

    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"360\" viewBox=\"0 0 480 360\">\n";
    if (!metadata.empty()) s += "<metadata>" + detail::xml_escape(metadata) + "</metadata>\n";
    s += "<title>Risk-coverage curve</title>\n";
    s += "<rect x=\"0\" y=\"0\" width=\"480\" height=\"360\" fill=\"white\"/>\n";
    // axes
    s += "<line x1=\"" + detail::fixed(L) + "\" y1=\"" + detail::fixed(H - B) + "\" x2=\"" + detail::fixed(W - R) +
         "\" y2=\"" + detail::fixed(H - B) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + detail::fixed(L) + "\" y1=\"" + detail::fixed(T) + "\" x2=\"" + detail::fixed(L) +
         "\" y2=\"" + detail::fixed(H - B) + "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double c = k / 5.0;
        s += "<text x=\"" + detail::fixed(px(c)) + "\" y=\"" + detail::fixed(H - B + 16) +
             "\" font-size=\"10\" text-anchor=\"middle\">" + detail::fixed(c, 1) + "</text>\n";
        const double r = y_max * k / 5.0;
        s += "<text x=\"" + detail::fixed(L - 6) + "\" y=\"" + detail::fixed(py(r) + 3) +
             "\" font-size=\"10\" text-anchor=\"end\">" + detail::fixed(r, 2) + "</text>\n";
    }
    s += "<text x=\"" + detail::fixed((L + W - R) / 2) + "\" y=\"" + detail::fixed(H - 12) +
         "\" font-size=\"12\" text-anchor=\"middle\">Coverage</text>\n";
    s += "<text x=\"16\" y=\"" + detail::fixed((T + H - B) / 2) + "\" font-size=\"12\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 16 " + detail::fixed((T + H - B) / 2) + ")\">Risk on answered</text>\n";

    std::string points;
    for (const auto& row : sweep) {
        const auto r = row.risk_answered();
        if (!r) continue;
        if (!points.empty()) points += ' ';
        points += detail::fixed(px(row.coverage())) + "," + detail::fixed(py(*r));
    }
    if (!points.empty())
        s += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    for (const auto& row : sweep) {
        const auto r = row.risk_answered();
        if (!r || std::abs(row.tau - 0.5) > 1e-9) continue;
        s += "<circle cx=\"" + detail::fixed(px(row.coverage())) + "\" cy=\"" + detail::fixed(py(*r)) +
             "\" r=\"5\" fill=\"crimson\"><title>tau = 0.5</title></circle>\n";
    }
    s += "</svg>\n";
    return s;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot create " + path);
    out << content;
    out.flush();
    if (!out) throw data_error("write failed: " + path);
}

/// Writes the sweep table (CSV) and the risk-coverage plot (SVG).
inline void report_emit(const EvalReport& summary, const std::vector<SweepRow>& sweep, const std::string& csv_path,
                        const std::string& svg_path, std::string_view metadata = {}) {
    write_text_file(csv_path, sweep_csv(summary, sweep));
    write_text_file(svg_path, risk_coverage_svg(sweep, metadata));
}

} // namespace saber
