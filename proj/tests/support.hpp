#pragma once

#include "mind/dataset.hpp"

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace mind::testing {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::size_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("mind-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Sample make_sample(const std::string& id = "s1") {
    Sample s;
    s.id = id;
    s.image_feature_ref = "";
    s.question = "What color is the box?";
    s.options = {"red", "blue", "green", "yellow"};
    s.caption = "the ball is red. the box is blue.";
    s.answer_index = 1;
    s.rationale_gt = "The caption says the box is blue.";
    return s;
}

inline Rationale make_rationale(const std::string& text, Polarity pol, const std::string& parent = "s1") {
    return {text, pol, parent, {"mock-rules", std::string(64, 'a'), Timestamp{std::chrono::seconds{1700000000}}}};
}

/// Random printable text with interior whitespace, quotes, backslashes and
/// non-ASCII bytes; never empty, never padded, never label-prefixed.
template <class Rng>
std::string random_text(Rng& rng, std::size_t min_len = 1, std::size_t max_len = 60) {
    static const std::string alphabet =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,;:!?'\"\\/{}[]()~-_\t";
    static const std::vector<std::string> extras = {"\xc3\xa9", "\xe2\x82\xac", "\xf0\x9f\x99\x82", "\n", "~~~"};
    std::uniform_int_distribution<std::size_t> len(min_len, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() + extras.size() - 1);
    std::string s;
    const std::size_t n = len(rng);
    while (s.size() < n) {
        const auto i = pick(rng);
        s += i < alphabet.size() ? std::string(1, alphabet[i]) : extras[i - alphabet.size()];
    }
    while (s.find(kDelimiter) != std::string::npos) s.replace(s.find(kDelimiter), kDelimiter.size(), "x");
    s = std::string(trim(s));
    if (s.empty() || s.starts_with(kPositiveLabel) || s.starts_with(kNegativeLabel)) s = "r" + s;
    return s;
}

template <class Rng>
Rationale random_rationale(Rng& rng, Polarity pol) {
    std::uniform_int_distribution<long long> secs(0, 4102444799LL);  // up to 2099-12-31T23:59:59Z
    std::uniform_int_distribution<int> hex(0, 15);
    std::string digest;
    for (int i = 0; i < 64; ++i) digest += "0123456789abcdef"[hex(rng)];
    return {random_text(rng), pol, random_text(rng, 1, 12), {random_text(rng, 1, 16), digest,
                                                             Timestamp{std::chrono::seconds{secs(rng)}}}};
}

inline RadSample well_formed_rad() {
    RadSample rs{make_sample("s1"), {}, {}};
    rs.positives = {make_rationale("We can see that the box is blue.", Polarity::positive),
                    make_rationale("The context states the box is blue.", Polarity::positive)};
    rs.negatives = {make_rationale("The caption says the box is red.", Polarity::negative),
                    make_rationale("The caption says the box is not blue.", Polarity::negative)};
    return rs;
}

struct InjectedViolation {
    const char* code;
    std::function<void(RadSample&)> inject;
};

/// One mutation of well_formed_rad() per violation class.
inline std::vector<InjectedViolation> violation_cases() {
    return {
        {"EMPTY_ID", [](RadSample& r) { r.sample.id.clear(); }},
        {"OPTION_COUNT", [](RadSample& r) { r.sample.options = {"red"}; r.sample.answer_index = 0; }},
        {"OPTION_COUNT", [](RadSample& r) { r.sample.options = {"a", "b", "c", "d", "e", "f"}; }},
        {"ANSWER_INDEX_OUT_OF_RANGE", [](RadSample& r) { r.sample.answer_index = 4; }},
        {"EMPTY_QUESTION", [](RadSample& r) { r.sample.question.clear(); }},
        {"EMPTY_RATIONALE_GT", [](RadSample& r) { r.sample.rationale_gt.clear(); }},
        {"DUPLICATE_OPTION", [](RadSample& r) { r.sample.options[2] = "red"; }},
        {"EMPTY_TEXT", [](RadSample& r) { r.positives[0].text.clear(); }},
        {"DELIMITER_IN_TEXT", [](RadSample& r) { r.negatives[0].text = "x\n\n~~~\n\ny"; }},
        {"UNTRIMMED_TEXT", [](RadSample& r) { r.negatives[0].text += " "; }},
        {"LABEL_PREFIX", [](RadSample& r) { r.positives[1].text = "Adjusted Solution: the box is blue."; }},
        {"POLARITY_MISMATCH", [](RadSample& r) { r.negatives[1].polarity = Polarity::positive; }},
        {"PARENT_MISMATCH", [](RadSample& r) { r.positives[0].parent_id = "other"; }},
        {"DUPLICATE_RATIONALE", [](RadSample& r) { r.negatives.push_back(r.negatives[0]); }},
        {"DUPLICATE_RATIONALE",
         [](RadSample& r) { r.positives.push_back(make_rationale(r.sample.rationale_gt, Polarity::positive)); }},
        {"CROSS_POLARITY_COLLISION",
         [](RadSample& r) { r.positives.push_back(make_rationale(r.negatives[0].text, Polarity::positive)); }},
    };
}

/// A generated response and the segments split_batch must recover from it.
struct FuzzBatch {
    std::string text;
    std::vector<std::string> expected;
};

/// Joins random trimmed segments with the delimiter, with optional labels,
/// padding and empty segments. Segments may contain near-delimiters but never
/// form the delimiter with the one that follows.
template <class Rng>
FuzzBatch random_batch(Rng& rng) {
    static const std::vector<std::string> near = {"\n~~~\n", "~~~", "\n\n~~", "~~\n\n", "\n\n~~~\n", "~~~~"};
    static const std::vector<std::string> pads = {"", " ", "\n", "\t ", "  \n "};
    std::uniform_int_distribution<int> count(0, 12);
    std::uniform_int_distribution<int> roll(0, 9);
    auto pick = [&](const std::vector<std::string>& v) {
        return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
    };
    FuzzBatch b;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
        if (i) b.text += kDelimiter;
        if (roll(rng) == 0) {
            b.text += pick(pads);
            continue;
        }
        const std::string tail = pick(pads);
        std::string seg;
        do {
            seg = random_text(rng, 1, 40);
            if (roll(rng) < 4) seg = std::string(trim(seg + pick(near) + random_text(rng, 1, 10)));
            if (seg.empty() || seg.starts_with(kPositiveLabel) || seg.starts_with(kNegativeLabel)) seg = "s" + seg;
        } while ((seg + tail + std::string(kDelimiter)).find(kDelimiter) < seg.size());
        const int r = roll(rng);
        const std::string label = r < 3 ? std::string(kPositiveLabel) : r < 5 ? std::string(kNegativeLabel) : "";
        b.text += pick(pads) + label + (label.empty() ? "" : pick(pads)) + seg + tail;
        b.expected.push_back(seg);
    }
    return b;
}

}  // namespace mind::testing
