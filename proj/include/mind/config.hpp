#pragma once

// Run configuration: built-in defaults, merged with an optional JSON file,
// merged with command-line overrides (later layers win), then parsed strictly.

#include "mind/augment.hpp"
#include "mind/generator.hpp"
#include "mind/gradcheck.hpp"
#include "mind/synth.hpp"
#include "mind/toy/trainer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace mind {

namespace fs = std::filesystem;

inline nlohmann::json default_config_json() {
    return nlohmann::json::parse(R"({
  "dataset": "",
  "eval_dataset": "",
  "positive_pool": "",
  "negative_pool": "",
  "output_dir": "out",
  "checkpoint": "",
  "seed": 0,
  "generator": {
    "endpoint": "mock://rules",
    "model_id": "mock-rules",
    "profile": "completions",
    "max_attempts": 3,
    "request_timeout_ms": 30000,
    "max_parallel": 4,
    "temperature": 0.7,
    "max_tokens": 2048,
    "initial_backoff_ms": 500,
    "backoff_factor": 2.0,
    "max_requests_per_second": 0
  },
  "augment": {
    "pos_count": 10,
    "neg_count": 10,
    "repeat_number": 10,
    "workers": 4,
    "min_chars": 10,
    "max_chars": 2000
  },
  "mining": {"N": 5, "k": 1, "margin": 0.2, "alpha": 1.0},
  "p2cl": {"phase1_epochs": 50, "phase2_epochs": 50, "policy": "FULL_MIX", "mix_ratio": 0.5},
  "model": {
    "d_model": 32,
    "layers": 1,
    "ff_dim": 64,
    "proj_dim": 16,
    "feature_dim": 8,
    "max_input_len": 96,
    "max_target_len": 48,
    "vocab_cap": 2000,
    "optimizer": "adam",
    "learning_rate": 0.003,
    "batch_size": 8,
    "clip_norm": 1.0
  },
  "gradcheck": {"instances": 50, "step": 0.001, "coords_per_tensor": 6, "floor": 0.01},
  "synth": {"train_size": 500, "test_size": 100, "no_image_fraction": 0.2}
})");
}

struct SynthOptions {
    std::size_t train_size = 500;
    std::size_t test_size = 100;
    double no_image_fraction = 0.2;
};

struct RunConfig {
    fs::path dataset;
    fs::path eval_dataset;
    fs::path positive_pool;
    fs::path negative_pool;
    fs::path output_dir;
    fs::path checkpoint;
    std::uint64_t seed = 0;
    GeneratorConfig generator;
    AugmentOptions augment;
    int augment_workers = 4;
    toy::TrainConfig train;
    gradcheck::Config gradcheck;
    SynthOptions synth;
    /// The merged configuration, echoed into reports.
    nlohmann::json source;

    fs::path metrics_path() const { return output_dir / "metrics.jsonl"; }
    bool mock_generator() const { return generator.endpoint.rfind("mock://", 0) == 0; }
};

inline const std::vector<std::string> kPathKeys = {"dataset",       "eval_dataset", "positive_pool",
                                                   "negative_pool", "output_dir",   "checkpoint"};

namespace detail {

/// Rejects keys absent from the defaults, so typos fail loudly.
inline void check_known_keys(const nlohmann::json& value, const nlohmann::json& schema, const std::string& where) {
    if (!value.is_object()) return;
    for (auto it = value.begin(); it != value.end(); ++it) {
        const std::string path = where.empty() ? it.key() : where + "." + it.key();
        if (!schema.contains(it.key())) throw ConfigError("unknown configuration key '" + path + "'");
        if (schema[it.key()].is_object()) {
            if (!it.value().is_object()) throw ConfigError("configuration key '" + path + "' must be an object");
            check_known_keys(it.value(), schema[it.key()], path);
        }
    }
}

template <class T>
T get(const nlohmann::json& j, const char* section, const char* key) {
    const auto& v = section ? j.at(section).at(key) : j.at(key);
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("configuration key '") + (section ? std::string(section) + "." : "") + key +
                          "' has the wrong type");
    }
}

}  // namespace detail

/// Reads a configuration file, resolving its relative paths against its directory.
inline nlohmann::json load_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open configuration file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("configuration file " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("configuration file must hold an object");
    for (const auto& key : kPathKeys)
        if (j.contains(key) && j[key].is_string() && !j[key].get<std::string>().empty()) {
            fs::path p = j[key].get<std::string>();
            if (p.is_relative()) j[key] = (path.parent_path() / p).lexically_normal().string();
        }
    return j;
}

/// Parses "a.b=value" into a merge patch; the value is JSON when it parses, else a string.
inline nlohmann::json override_patch(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    nlohmann::json patch = nlohmann::json::object();
    nlohmann::json* cur = &patch;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
        if (dot == std::string::npos) {
            (*cur)[part] = value;
            break;
        }
        cur = &(*cur)[part];
        start = dot + 1;
    }
    return patch;
}

/// Builds a RunConfig from merge patches applied over the defaults, in order.
inline RunConfig make_run_config(const std::vector<nlohmann::json>& layers) {
    const nlohmann::json defaults = default_config_json();
    nlohmann::json j = defaults;
    for (const auto& layer : layers) {
        detail::check_known_keys(layer, defaults, "");
        j.merge_patch(layer);
    }
    detail::check_known_keys(j, defaults, "");
    using detail::get;

    RunConfig c;
    c.source = j;
    c.dataset = get<std::string>(j, nullptr, "dataset");
    c.eval_dataset = get<std::string>(j, nullptr, "eval_dataset");
    c.output_dir = get<std::string>(j, nullptr, "output_dir");
    if (c.output_dir.empty()) throw ConfigError("output_dir must be set");
    c.positive_pool = get<std::string>(j, nullptr, "positive_pool");
    c.negative_pool = get<std::string>(j, nullptr, "negative_pool");
    c.checkpoint = get<std::string>(j, nullptr, "checkpoint");
    if (c.positive_pool.empty()) c.positive_pool = c.output_dir / "positives.jsonl";
    if (c.negative_pool.empty()) c.negative_pool = c.output_dir / "negatives.jsonl";
    if (c.checkpoint.empty()) c.checkpoint = c.output_dir / "checkpoint.json";
    c.seed = get<std::uint64_t>(j, nullptr, "seed");

    auto& g = c.generator;
    g.endpoint = get<std::string>(j, "generator", "endpoint");
    g.model_id = get<std::string>(j, "generator", "model_id");
    g.profile = BackendProfile::named(get<std::string>(j, "generator", "profile"));
    g.max_attempts = get<int>(j, "generator", "max_attempts");
    g.request_timeout = std::chrono::milliseconds(get<long long>(j, "generator", "request_timeout_ms"));
    g.max_parallel = get<int>(j, "generator", "max_parallel");
    g.temperature = get<double>(j, "generator", "temperature");
    g.max_tokens = get<int>(j, "generator", "max_tokens");
    g.initial_backoff = std::chrono::milliseconds(get<long long>(j, "generator", "initial_backoff_ms"));
    g.backoff_factor = get<double>(j, "generator", "backoff_factor");
    g.max_requests_per_second = get<double>(j, "generator", "max_requests_per_second");
    g.seed = substream(c.seed, "augment")();
    if (g.request_timeout.count() <= 0) throw ConfigError("generator.request_timeout_ms must be > 0");
    if (g.max_requests_per_second < 0) throw ConfigError("generator.max_requests_per_second must be >= 0");
    g.validate();

    auto& a = c.augment;
    a.pos_count = get<int>(j, "augment", "pos_count");
    a.neg_count = get<int>(j, "augment", "neg_count");
    a.repeat_number = get<int>(j, "augment", "repeat_number");
    a.clean.min_chars = get<std::size_t>(j, "augment", "min_chars");
    a.clean.max_chars = get<std::size_t>(j, "augment", "max_chars");
    c.augment_workers = get<int>(j, "augment", "workers");
    if (c.mock_generator()) a.clock = [] { return Timestamp{}; };
    if (c.augment_workers < 1) throw ConfigError("augment.workers must be >= 1");
    a.validate();

    auto& t = c.train;
    t.seed = c.seed;
    t.mining.sample_count = get<int>(j, "mining", "N");
    t.mining.top_k = get<int>(j, "mining", "k");
    t.mining.margin = get<double>(j, "mining", "margin");
    t.mining.alpha = get<double>(j, "mining", "alpha");
    t.mining.seed = c.seed;
    t.schedule.phase1_epochs = get<int>(j, "p2cl", "phase1_epochs");
    t.schedule.phase2_epochs = get<int>(j, "p2cl", "phase2_epochs");
    t.schedule.policy.variant = parse_policy(get<std::string>(j, "p2cl", "policy"));
    t.schedule.policy.mix_ratio = get<double>(j, "p2cl", "mix_ratio");
    t.model.d_model = get<int>(j, "model", "d_model");
    t.model.layers = get<int>(j, "model", "layers");
    t.model.ff_dim = get<int>(j, "model", "ff_dim");
    t.model.proj_dim = get<int>(j, "model", "proj_dim");
    t.model.feature_dim = get<int>(j, "model", "feature_dim");
    t.model.max_input_len = get<int>(j, "model", "max_input_len");
    t.model.max_target_len = get<int>(j, "model", "max_target_len");
    t.vocab_cap = get<std::size_t>(j, "model", "vocab_cap");
    t.optim.kind = get<std::string>(j, "model", "optimizer");
    t.optim.learning_rate = get<double>(j, "model", "learning_rate");
    t.optim.batch_size = get<int>(j, "model", "batch_size");
    t.optim.clip_norm = get<double>(j, "model", "clip_norm");
    t.validate();

    auto& gc = c.gradcheck;
    gc.instances = get<int>(j, "gradcheck", "instances");
    gc.step = get<double>(j, "gradcheck", "step");
    gc.coords_per_tensor = get<int>(j, "gradcheck", "coords_per_tensor");
    gc.floor = get<double>(j, "gradcheck", "floor");
    gc.seed = c.seed;
    if (gc.instances < 1 || !(gc.step > 0) || gc.coords_per_tensor < 1 || !(gc.floor > 0))
        throw ConfigError("gradcheck settings must be positive");

    c.synth.train_size = get<std::size_t>(j, "synth", "train_size");
    c.synth.test_size = get<std::size_t>(j, "synth", "test_size");
    c.synth.no_image_fraction = get<double>(j, "synth", "no_image_fraction");
    if (!(c.synth.no_image_fraction >= 0.0 && c.synth.no_image_fraction <= 1.0))
        throw ConfigError("synth.no_image_fraction must lie in [0, 1]");
    return c;
}

/// Fails unless every listed input path exists.
inline void require_inputs(std::initializer_list<std::pair<const char*, const fs::path*>> inputs) {
    for (const auto& [name, path] : inputs) {
        if (path->empty()) throw ConfigError(std::string(name) + " is not configured");
        if (!fs::exists(*path)) throw ConfigError(std::string(name) + " " + path->string() + " does not exist");
    }
}

}  // namespace mind
