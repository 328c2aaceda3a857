#pragma once

#include "mind/common.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mind::toy {

/// Word-level tokens: runs of alphanumerics (plus ' - _ %), every other
/// non-space character on its own.
inline std::vector<std::string> tokenize(std::string_view text) {
    auto is_word = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '\'' || c == '-' || c == '_' || c == '%';
    };
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (is_word(c)) {
            std::size_t j = i;
            while (j < text.size() && is_word(text[j])) ++j;
            out.emplace_back(text.substr(i, j - i));
            i = j;
        } else {
            out.emplace_back(1, c);
            ++i;
        }
    }
    return out;
}

inline std::string detokenize(const std::vector<std::string>& tokens) {
    static const std::string_view no_space_before = ".,:;?!)";
    std::string out;
    bool after_open = false;
    for (const auto& t : tokens) {
        const bool attach = t.size() == 1 && no_space_before.find(t[0]) != std::string_view::npos;
        if (!out.empty() && !attach && !after_open) out += ' ';
        out += t;
        after_open = t == "(";
    }
    return out;
}

class Vocab {
public:
    static constexpr int PAD = 0, BOS = 1, EOS = 2, UNK = 3, SEP = 4;
    static constexpr int kSpecials = 5;

    Vocab() : tokens_{"<pad>", "<bos>", "<eos>", "<unk>", "<sep>"} { reindex(); }

    explicit Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
        if (tokens_.size() < kSpecials || tokens_[PAD] != "<pad>" || tokens_[BOS] != "<bos>" ||
            tokens_[EOS] != "<eos>" || tokens_[UNK] != "<unk>" || tokens_[SEP] != "<sep>")
            throw ValidationError("vocabulary does not start with the special tokens");
        reindex();
        if (index_.size() != tokens_.size()) throw ValidationError("vocabulary has duplicate tokens");
    }

    /// Most frequent tokens first (ties lexicographic), capped at `cap` entries including specials.
    static Vocab build(const std::vector<std::string>& texts, std::size_t cap) {
        std::map<std::string, std::size_t> counts;
        for (const auto& t : texts)
            for (auto& tok : tokenize(t)) ++counts[tok];
        std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        Vocab v;
        for (const auto& [tok, n] : ranked) {
            if (v.tokens_.size() >= cap) break;
            v.tokens_.push_back(tok);
        }
        v.reindex();
        return v;
    }

    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

    int id(const std::string& tok) const {
        auto it = index_.find(tok);
        return it == index_.end() ? UNK : it->second;
    }

    std::vector<int> encode(std::string_view text) const {
        std::vector<int> ids;
        for (const auto& t : tokenize(text)) ids.push_back(id(t));
        return ids;
    }

    std::string decode(const std::vector<int>& ids) const {
        std::vector<std::string> toks;
        for (int i : ids)
            if (i >= kSpecials) toks.push_back(token(i));
        return detokenize(toks);
    }

    std::string hash() const {
        std::string joined;
        for (const auto& t : tokens_) {
            joined += t;
            joined += '\n';
        }
        return sha256_hex(joined);
    }

private:
    void reindex() {
        index_.clear();
        for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace mind::toy
