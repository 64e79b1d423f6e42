#pragma once

#include "saber/core.hpp"
#include "saber/error.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace saber {

inline constexpr std::string_view kAbstainText = "I don't know";

enum class Action : std::uint8_t { answer_pk, answer_ck, abstain };

constexpr std::string_view to_string(Action a) noexcept {
    switch (a) {
    case Action::answer_pk: return "answer_pk";
    case Action::answer_ck: return "answer_ck";
    case Action::abstain: return "abstain";
    }
    return "abstain";
}

inline std::optional<Action> parse_action(std::string_view s) {
    if (s == "answer_pk") return Action::answer_pk;
    if (s == "answer_ck") return Action::answer_ck;
    if (s == "abstain") return Action::abstain;
    return std::nullopt;
}

enum class Mode : std::uint8_t { fallback, abstention };

struct DecisionMode {
    Mode mode = Mode::fallback;
    double tau = 0.5;

    void validate() const {
        if (!(tau > 0.0 && tau < 1.0)) throw usage_error("tau must lie strictly inside (0, 1)");
    }
};

struct Beliefs {
    double p_pk = 0.5;
    double p_ck = 0.5;
};

struct Decision {
    double p_pk = 0.0;
    double p_ck = 0.0;
    Cell cell = Cell::C00;
    Action action = Action::answer_ck;
    std::string emitted;
};

/// A side is reliable when its belief reaches tau (p >= tau).
constexpr Cell assign_cell(double p_pk, double p_ck, double tau) noexcept {
    return cell_label(p_pk >= tau, p_ck >= tau);
}

/// Higher-belief side; CK wins exact ties.
constexpr Action preferred_side(double p_pk, double p_ck) noexcept {
    return p_pk > p_ck ? Action::answer_pk : Action::answer_ck;
}

/// C10 -> PK, C01 -> CK, C11 -> higher belief. C00 falls back to the higher
/// belief, or abstains in abstention mode. Only the candidate strings are
/// consulted; nothing is regenerated.
inline Decision decide(const QAInstance& inst, double p_pk, double p_ck, const DecisionMode& mode) {
    Decision d;
    d.p_pk = p_pk;
    d.p_ck = p_ck;
    d.cell = assign_cell(p_pk, p_ck, mode.tau);
    switch (d.cell) {
    case Cell::C10: d.action = Action::answer_pk; break;
    case Cell::C01: d.action = Action::answer_ck; break;
    case Cell::C11: d.action = preferred_side(p_pk, p_ck); break;
    case Cell::C00:
        d.action = mode.mode == Mode::abstention ? Action::abstain : preferred_side(p_pk, p_ck);
        break;
    }
    switch (d.action) {
    case Action::answer_pk: d.emitted = inst.answer_pk; break;
    case Action::answer_ck: d.emitted = inst.answer_ck; break;
    case Action::abstain: d.emitted = std::string(kAbstainText); break;
    }
    return d;
}

inline std::vector<Decision> decide_batch(const std::vector<QAInstance>& instances,
                                          const std::vector<Beliefs>& beliefs, const DecisionMode& mode) {
    if (instances.size() != beliefs.size()) throw data_error("instances and beliefs differ in length");
    std::vector<Decision> out;
    out.reserve(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i)
        out.push_back(decide(instances[i], beliefs[i].p_pk, beliefs[i].p_ck, mode));
    return out;
}

} // namespace saber
