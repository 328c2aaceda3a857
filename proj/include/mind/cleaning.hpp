#pragma once

// Splitting of batch-generated responses and per-rationale cleaning.

#include "mind/dataset.hpp"

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mind {

struct RawBatch {
    std::string prompt_digest;
    std::string text;
};

namespace detail {

inline std::string_view strip_label(std::string_view s) {
    for (auto label : {kPositiveLabel, kNegativeLabel}) {
        if (s.starts_with(label)) {
            s.remove_prefix(label.size());
            return trim(s);
        }
    }
    return s;
}

}  // namespace detail

/// Splits on the exact delimiter, strips one leading output label per segment
/// and surrounding whitespace, and drops empty segments.
inline std::vector<std::string> split_batch(const RawBatch& raw) {
    std::vector<std::string> out;
    std::string_view rest = raw.text;
    while (true) {
        const auto pos = rest.find(kDelimiter);
        const std::string_view seg = detail::strip_label(trim(rest.substr(0, pos)));
        if (!seg.empty()) out.emplace_back(seg);
        if (pos == std::string_view::npos) break;
        rest.remove_prefix(pos + kDelimiter.size());
    }
    return out;
}

enum class RejectReason { EMPTY, TOO_SHORT, TOO_LONG, VERBATIM_COPY, DELIMITER_LEAK };

inline std::string_view reject_code(RejectReason r) {
    switch (r) {
        case RejectReason::EMPTY: return "EMPTY";
        case RejectReason::TOO_SHORT: return "TOO_SHORT";
        case RejectReason::TOO_LONG: return "TOO_LONG";
        case RejectReason::VERBATIM_COPY: return "VERBATIM_COPY";
        case RejectReason::DELIMITER_LEAK: return "DELIMITER_LEAK";
    }
    return "UNKNOWN";
}

inline constexpr RejectReason kAllRejectReasons[] = {RejectReason::EMPTY, RejectReason::TOO_SHORT,
                                                     RejectReason::TOO_LONG, RejectReason::VERBATIM_COPY,
                                                     RejectReason::DELIMITER_LEAK};

struct CleanConfig {
    std::size_t min_chars = 10;
    std::size_t max_chars = 2000;
};

/// Trims and collapses every whitespace run to one space.
inline std::string normalize_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : trim(s)) {
        if (is_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += c;
    }
    return out;
}

inline std::vector<std::string_view> whitespace_tokens(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        std::size_t j = i;
        while (j < s.size() && !is_space(s[j])) ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

/// Levenshtein distance over whitespace tokens.
inline std::size_t token_edit_distance(std::string_view a, std::string_view b) {
    const auto ta = whitespace_tokens(a);
    const auto tb = whitespace_tokens(b);
    std::vector<std::size_t> prev(tb.size() + 1), cur(tb.size() + 1);
    for (std::size_t j = 0; j <= tb.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= ta.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= tb.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ta[i - 1] == tb[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[tb.size()];
}

using CleanResult = std::variant<Rationale, RejectReason>;

/// Accepts a segment as a Rationale of `parent`, or names why it was rejected.
/// `source_solution` is the text the generator was asked to perturb.
inline CleanResult clean_rationale(std::string_view segment, Polarity polarity, const Sample& parent,
                                   std::string_view source_solution, const Provenance& provenance,
                                   const CleanConfig& cfg = {}) {
    if (segment.find(kDelimiter) != std::string_view::npos) return RejectReason::DELIMITER_LEAK;
    std::string_view body = trim(segment);
    for (auto stripped = detail::strip_label(body); stripped.size() != body.size();
         stripped = detail::strip_label(body))
        body = stripped;
    std::string text = normalize_whitespace(body);
    if (text.empty()) return RejectReason::EMPTY;
    if (text.size() < cfg.min_chars) return RejectReason::TOO_SHORT;
    if (text.size() > cfg.max_chars) return RejectReason::TOO_LONG;
    const std::string source = normalize_whitespace(source_solution);
    if (text == source) return RejectReason::VERBATIM_COPY;
    if (polarity == Polarity::negative && token_edit_distance(text, source) == 0) return RejectReason::VERBATIM_COPY;
    return Rationale{std::move(text), polarity, parent.id, provenance};
}

}  // namespace mind
