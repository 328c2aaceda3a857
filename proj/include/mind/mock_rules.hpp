#pragma once

// Rule-based rationale rewriting used by the offline generator backend and by
// the corruption harness: meaning-preserving paraphrases and meaning-reversing
// inversions (answer-entity swap, negation insertion).

#include "mind/cleaning.hpp"
#include "mind/prompts.hpp"

#include <algorithm>
#include <optional>
#include <random>
#include <regex>
#include <string>
#include <vector>

namespace mind::rules {

/// What a generator can recover from a rendered prompt.
struct ParsedPrompt {
    Polarity polarity = Polarity::positive;
    std::string solution;
    int repeat_number = 1;
    std::vector<std::string> options;
    std::size_t answer_index = 0;
};

inline std::optional<ParsedPrompt> parse_prompt(const std::string& prompt) {
    ParsedPrompt p;
    const bool negative = prompt.find("\"" + std::string(kNegativeLabel) + "\"") != std::string::npos;
    p.polarity = negative ? Polarity::negative : Polarity::positive;

    static const std::regex repeat_re(R"(Please output (\d+) different solutions\.)");
    std::smatch m;
    if (!std::regex_search(prompt, m, repeat_re)) return std::nullopt;
    p.repeat_number = std::stoi(m[1].str());

    const std::string head = negative ? "abilities. \"" : "random content adjustments to \"";
    const std::string tail = negative ? "\" is the explanation for the above problem." : "\" within a range of 10% to 50%";
    const auto b = prompt.find(head);
    if (b == std::string::npos) return std::nullopt;
    const auto e = prompt.find(tail, b + head.size());
    if (e == std::string::npos) return std::nullopt;
    p.solution = prompt.substr(b + head.size(), e - b - head.size());

    static const std::regex opt_re(R"(\(([A-E])\) ([^(\n]*[^(\s]))");
    const auto opt_line_b = prompt.find("\nOptions:");
    const auto opt_line_e = prompt.find('\n', opt_line_b + 1);
    if (opt_line_b != std::string::npos && opt_line_e != std::string::npos) {
        const std::string line = prompt.substr(opt_line_b, opt_line_e - opt_line_b);
        for (std::sregex_iterator it(line.begin(), line.end(), opt_re), end; it != end; ++it)
            p.options.push_back((*it)[2].str());
    }
    static const std::regex ans_re(R"(\nAnswer: \(([A-E])\))");
    if (std::regex_search(prompt, m, ans_re)) p.answer_index = static_cast<std::size_t>(m[1].str()[0] - 'A');
    return p;
}

namespace detail {

inline std::string replace_word(const std::string& text, const std::string& from, const std::string& to) {
    if (from.empty()) return text;
    std::string out;
    std::size_t i = 0;
    auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    while (i < text.size()) {
        if (text.compare(i, from.size(), from) == 0 && (i == 0 || !is_word(text[i - 1])) &&
            (i + from.size() == text.size() || !is_word(text[i + from.size()]))) {
            out += to;
            i += from.size();
        } else {
            out += text[i++];
        }
    }
    return out;
}

inline std::string lower_first(std::string s) {
    if (s.size() > 1 && std::isupper(static_cast<unsigned char>(s[0])) &&
        !std::isupper(static_cast<unsigned char>(s[1])))
        s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
    return s;
}

}  // namespace detail

/// Deterministic meaning-preserving rewrites of `solution`, in a seeded order.
inline std::vector<std::string> paraphrases(const std::string& solution, std::size_t count, std::mt19937_64& rng) {
    static const std::vector<std::string> prefixes = {"",
                                                      "We can see that ",
                                                      "From the context, ",
                                                      "Looking at the given information, ",
                                                      "It is clear that ",
                                                      "Note that ",
                                                      "As described, "};
    static const std::vector<std::pair<std::string, std::string>> synonyms = {
        {"caption", "context"}, {"says", "states"}, {"says", "tells us"}, {"shows", "indicates"},
        {"because", "since"},   {"so", "therefore"}};
    static const std::vector<std::string> suffixes = {"", " This supports the answer.",
                                                      " So the answer follows from it."};

    std::vector<std::string> candidates;
    for (std::size_t syn = 0; syn <= synonyms.size(); ++syn) {
        std::string base = solution;
        if (syn > 0) base = detail::replace_word(base, synonyms[syn - 1].first, synonyms[syn - 1].second);
        for (const auto& pre : prefixes)
            for (const auto& suf : suffixes) {
                std::string s = pre.empty() ? base : pre + detail::lower_first(base);
                s += suf;
                if (s != solution) candidates.push_back(std::move(s));
            }
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    std::shuffle(candidates.begin(), candidates.end(), rng);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count && !candidates.empty(); ++i) out.push_back(candidates[i % candidates.size()]);
    return out;
}

/// Replaces the answer entity with each wrong option in turn.
inline std::vector<std::string> answer_swaps(const std::string& solution, const std::vector<std::string>& options,
                                             std::size_t answer_index) {
    std::vector<std::string> out;
    if (answer_index >= options.size()) return out;
    const std::string& answer = options[answer_index];
    for (std::size_t i = 0; i < options.size(); ++i) {
        if (i == answer_index) continue;
        std::string s = detail::replace_word(solution, answer, options[i]);
        if (s != solution) out.push_back(std::move(s));
    }
    return out;
}

/// Negation insertions; falls back to a sentence-level negation.
inline std::vector<std::string> negations(const std::string& solution) {
    static const std::vector<std::pair<std::string, std::string>> rules = {
        {"is", "is not"}, {"are", "are not"}, {"can", "cannot"}, {"does", "does not"}, {"has", "does not have"}};
    std::vector<std::string> out;
    for (const auto& [from, to] : rules) {
        std::string s = detail::replace_word(solution, from, to);
        if (s != solution) out.push_back(std::move(s));
    }
    if (out.empty()) out.push_back("It is not true that " + detail::lower_first(solution));
    return out;
}

/// Deterministic meaning-reversing rewrites of `solution`.
inline std::vector<std::string> inversions(const std::string& solution, const std::vector<std::string>& options,
                                           std::size_t answer_index, std::size_t count, std::mt19937_64& rng) {
    static const std::vector<std::string> prefixes = {"", "In fact, ", "Actually, ", "Clearly, "};
    std::vector<std::string> candidates;
    auto bases = answer_swaps(solution, options, answer_index);
    for (auto& n : negations(solution)) bases.push_back(std::move(n));
    for (const auto& base : bases)
        for (const auto& pre : prefixes) candidates.push_back(pre.empty() ? base : pre + detail::lower_first(base));
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    std::shuffle(candidates.begin(), candidates.end(), rng);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(candidates[i % candidates.size()]);
    return out;
}

/// Single corruption used by the robustness harness: swap the answer entity
/// for a wrong option when it occurs, otherwise insert a negation.
inline std::string invert(const std::string& rationale, const Sample& sample, std::mt19937_64& rng) {
    auto cands = answer_swaps(rationale, sample.options, sample.answer_index);
    if (cands.empty()) cands = negations(rationale);
    std::uniform_int_distribution<std::size_t> pick(0, cands.size() - 1);
    return cands[pick(rng)];
}

/// Complete offline response for a rendered prompt: labelled solutions joined
/// by the delimiter. `nonce` distinguishes repeated calls with the same prompt.
inline std::string respond(const std::string& prompt, std::uint64_t seed, std::uint64_t nonce = 0) {
    const auto parsed = parse_prompt(prompt);
    if (!parsed) return "";
    std::mt19937_64 rng = substream(seed ^ (nonce * 0x9E3779B97F4A7C15ULL), sha256_hex(prompt));
    const auto n = static_cast<std::size_t>(parsed->repeat_number);
    const auto texts = parsed->polarity == Polarity::positive
                           ? paraphrases(parsed->solution, n, rng)
                           : inversions(parsed->solution, parsed->options, parsed->answer_index, n, rng);
    const std::string_view label = parsed->polarity == Polarity::positive ? kPositiveLabel : kNegativeLabel;
    std::string out;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (i) out += kDelimiter;
        out += label;
        out += ' ';
        out += texts[i];
    }
    return out;
}

}  // namespace mind::rules
