#pragma once

// Alias-aware answer matching: normalize both strings, try an exact match
// against every alias, then fall back to contiguous token containment of an
// alias inside the answer.
//
// Containment requires the alias tokens to appear as one contiguous run in
// the answer (an interpretation; a bag-of-tokens subset test would accept
// more). Only alias-inside-answer is checked, never the reverse.

#include "saber/core.hpp"
#include "saber/error.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <string>
#include <string_view>
#include <vector>

namespace saber {

enum class MatchStage : std::uint8_t { none, exact, containment };

constexpr std::string_view to_string(MatchStage s) noexcept {
    switch (s) {
    case MatchStage::exact: return "exact";
    case MatchStage::containment: return "containment";
    case MatchStage::none: return "none";
    }
    return "none";
}

struct MatchVerdict {
    bool matched = false;
    MatchStage stage = MatchStage::none;

    friend bool operator==(const MatchVerdict&, const MatchVerdict&) = default;
};

namespace detail {

inline const icu::Normalizer2& nfkc() {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFKCInstance(status);
    if (U_FAILURE(status) || n == nullptr)
        throw invariant_error(std::string("ICU NFKC unavailable: ") + u_errorName(status));
    return *n;
}

inline bool is_punctuation(UChar32 c) {
    return (U_GET_GC_MASK(c) & U_GC_P_MASK) != 0;
}

// One pass: NFKC, full case folding, punctuation deletion, whitespace collapse.
inline icu::UnicodeString normalize_once(const icu::UnicodeString& in) {
    UErrorCode status = U_ZERO_ERROR;
    icu::UnicodeString text = nfkc().normalize(in, status);
    if (U_FAILURE(status)) throw data_error(std::string("normalization failed: ") + u_errorName(status));
    text.foldCase(U_FOLD_CASE_DEFAULT);

    icu::UnicodeString out;
    bool pending_space = false;
    for (int32_t i = 0; i < text.length();) {
        const UChar32 c = text.char32At(i);
        i += U16_LENGTH(c);
        if (u_isUWhiteSpace(c)) {
            pending_space = true;
            continue;
        }
        if (is_punctuation(c)) continue;
        if (pending_space && !out.isEmpty()) out.append(static_cast<UChar>(u' '));
        pending_space = false;
        out.append(c);
    }
    return out;
}

inline std::vector<std::string_view> tokens(std::string_view s) {
    std::vector<std::string_view> out;
    if (s.empty()) return out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t end = s.find(' ', start);
        if (end == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, end - start));
        start = end + 1;
    }
}

inline bool contains_run(const std::vector<std::string_view>& hay,
                         const std::vector<std::string_view>& needle) {
    if (needle.empty() || needle.size() > hay.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        bool ok = true;
        for (std::size_t j = 0; j < needle.size() && ok; ++j) ok = hay[i + j] == needle[j];
        if (ok) return true;
    }
    return false;
}

} // namespace detail

/// NFKC, casefold, delete Unicode punctuation (P*), collapse whitespace runs to
/// one space and trim. Punctuation is deleted, not replaced ("well-known" ->
/// "wellknown"). The pass repeats until the text is stable, so the result is
/// always a fixed point.
inline std::string normalize(std::string_view text) {
    icu::UnicodeString current = icu::UnicodeString::fromUTF8(
        icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    for (int pass = 0; pass < 8; ++pass) {
        icu::UnicodeString next = detail::normalize_once(current);
        if (next == current) break;
        current = std::move(next);
    }
    std::string out;
    current.toUTF8String(out);
    return out;
}

/// Match with aliases that are already normalized.
inline MatchVerdict match_normalized(std::string_view answer, const std::vector<std::string>& aliases) {
    if (aliases.empty()) throw data_error("no gold aliases");
    for (const auto& alias : aliases)
        if (!alias.empty() && alias == answer) return {true, MatchStage::exact};
    const auto answer_tokens = detail::tokens(answer);
    for (const auto& alias : aliases)
        if (detail::contains_run(answer_tokens, detail::tokens(alias)))
            return {true, MatchStage::containment};
    return {};
}

inline MatchVerdict match(std::string_view answer, const std::vector<std::string>& gold_aliases) {
    if (gold_aliases.empty()) throw data_error("no gold aliases");
    std::vector<std::string> aliases;
    aliases.reserve(gold_aliases.size());
    for (const auto& a : gold_aliases) aliases.push_back(normalize(a));
    return match_normalized(normalize(answer), aliases);
}

inline CellLabel label_instance(const QAInstance& inst) {
    if (inst.gold_aliases.empty()) throw data_error("no gold aliases");
    std::vector<std::string> aliases;
    aliases.reserve(inst.gold_aliases.size());
    for (const auto& a : inst.gold_aliases) aliases.push_back(normalize(a));
    return {match_normalized(normalize(inst.answer_pk), aliases).matched,
            match_normalized(normalize(inst.answer_ck), aliases).matched};
}

/// Checks the QAInstance invariants that need normalization.
inline void validate_instance(const QAInstance& inst) {
    if (inst.id.empty()) throw data_error("instance id is empty");
    if (inst.gold_aliases.empty()) throw data_error("no gold aliases for " + inst.id);
    for (const auto& a : inst.gold_aliases)
        if (normalize(a).empty())
            throw data_error("gold alias normalizes to empty for " + inst.id);
}

inline CellHistogram cell_histogram(const std::vector<CellLabel>& labels) {
    CellHistogram h{};
    for (const auto& l : labels) ++h[histogram_index(l.cell())];
    return h;
}

} // namespace saber
