#pragma once

// Synthetic attribute-lookup corpus: each caption lists one color per object,
// the question asks for one object's color, the options enumerate the colors,
// and the ground-truth rationale quotes the relevant fact.

#include "mind/dataset.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace mind::synth {

inline const std::vector<std::string> kObjects = {"ball", "box", "cup", "hat", "kite", "lamp"};
inline const std::vector<std::string> kColors = {"red", "blue", "green", "yellow"};

struct CorpusConfig {
    std::size_t train_size = 500;
    std::size_t test_size = 100;
    std::size_t feature_dim = 8;
    /// Fraction of samples with no image (empty feature ref).
    double no_image_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct Corpus {
    std::vector<Sample> train;
    std::vector<Sample> test;
};

/// Builds one sample; `feature_ref` is filled in by the caller.
template <class Rng>
Sample make_sample(const std::string& id, Rng& rng) {
    std::uniform_int_distribution<std::size_t> color(0, kColors.size() - 1);
    std::uniform_int_distribution<std::size_t> object(0, kObjects.size() - 1);
    std::vector<std::size_t> assigned;
    std::string caption;
    for (const auto& o : kObjects) {
        assigned.push_back(color(rng));
        if (!caption.empty()) caption += ' ';
        caption += "the " + o + " is " + kColors[assigned.back()] + ".";
    }
    const std::size_t q = object(rng);
    Sample s;
    s.id = id;
    s.question = "What color is the " + kObjects[q] + "?";
    s.options = kColors;
    s.caption = caption;
    s.answer_index = assigned[q];
    s.rationale_gt = "The caption says the " + kObjects[q] + " is " + kColors[assigned[q]] + ".";
    return s;
}

/// Writes train.jsonl, test.jsonl and features.bin into `dir`.
inline Corpus write_corpus(const CorpusConfig& cfg, const std::filesystem::path& dir) {
    if (cfg.feature_dim == 0) throw ConfigError("feature_dim must be positive");
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng = substream(cfg.seed, "synth");
    std::normal_distribution<float> normal(0.0f, 1.0f);
    std::bernoulli_distribution no_image(cfg.no_image_fraction);
    std::ofstream features(dir / "features.bin", std::ios::binary | std::ios::trunc);
    if (!features) throw IoError("cannot write " + (dir / "features.bin").string());

    Corpus c;
    auto build = [&](std::size_t n, const std::string& prefix, std::vector<Sample>& out) {
        for (std::size_t i = 0; i < n; ++i) {
            Sample s = make_sample(prefix + std::to_string(i), rng);
            if (!no_image(rng)) {
                std::vector<float> f(cfg.feature_dim);
                for (auto& v : f) v = normal(rng);
                s.image_feature_ref = "features.bin@" + std::to_string(append_float_record(features, f));
            }
            out.push_back(std::move(s));
        }
    };
    build(cfg.train_size, "train-", c.train);
    build(cfg.test_size, "test-", c.test);
    features.close();
    write_dataset(c.train, dir / "train.jsonl");
    write_dataset(c.test, dir / "test.jsonl");
    return c;
}

}  // namespace mind::synth
