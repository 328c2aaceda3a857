#pragma once

// Command implementations behind the `mind` executable. Each command writes a
// JSON report to `out` and returns the process exit status.

#include "mind/config.hpp"

#include <spdlog/spdlog.h>

#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace mind::cli {

enum Exit : int { kOk = 0, kValidation = 1, kTransport = 2, kNumeric = 3 };

/// Maps an in-flight exception to an exit status and logs it.
inline int exit_code_for(std::exception_ptr e) {
    try {
        std::rethrow_exception(e);
    } catch (const TransportError& ex) {
        spdlog::error("transport: {}", ex.what());
        return kTransport;
    } catch (const BackendError& ex) {
        spdlog::error("backend: {}", ex.what());
        return kTransport;
    } catch (const NumericFault& ex) {
        spdlog::error("numeric fault: {}", ex.what());
        return kNumeric;
    } catch (const DegenerateInputError& ex) {
        spdlog::error("numeric fault: {}", ex.what());
        return kNumeric;
    } catch (const std::exception& ex) {
        spdlog::error("{}", ex.what());
        return kValidation;
    }
}

inline void write_json_file(const fs::path& path, const nlohmann::ordered_json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failure on " + path.string());
}

inline std::vector<RadSample> load_joined(const RunConfig& c) {
    require_inputs({{"dataset", &c.dataset}, {"positive_pool", &c.positive_pool}, {"negative_pool", &c.negative_pool}});
    const auto samples = read_dataset(c.dataset);
    const auto pos = read_pool(c.positive_pool);
    const auto neg = read_pool(c.negative_pool);
    return join_pools(samples, pos, neg);
}

inline nlohmann::ordered_json to_json(const PolarityYield& y) {
    nlohmann::ordered_json rejected;
    for (auto r : kAllRejectReasons) rejected[std::string(reject_code(r))] = y.rejected[static_cast<std::size_t>(r)];
    return {{"requested", y.requested}, {"calls", y.calls},         {"segments", y.segments},
            {"accepted", y.accepted},   {"duplicates", y.duplicates}, {"surplus", y.surplus},
            {"rejected", rejected}};
}

// --- commands ---------------------------------------------------------------

inline int cmd_synth(const RunConfig& c, std::ostream& out) {
    synth::CorpusConfig sc;
    sc.train_size = c.synth.train_size;
    sc.test_size = c.synth.test_size;
    sc.feature_dim = static_cast<std::size_t>(c.train.model.feature_dim);
    sc.no_image_fraction = c.synth.no_image_fraction;
    sc.seed = c.seed;
    const auto corpus = synth::write_corpus(sc, c.output_dir);
    nlohmann::ordered_json rep = {{"train", (c.output_dir / "train.jsonl").string()},
                                  {"test", (c.output_dir / "test.jsonl").string()},
                                  {"features", (c.output_dir / "features.bin").string()},
                                  {"train_size", corpus.train.size()},
                                  {"test_size", corpus.test.size()}};
    out << rep.dump(2) << '\n';
    return kOk;
}

inline int cmd_augment(const RunConfig& c, std::ostream& out) {
    require_inputs({{"dataset", &c.dataset}});
    const auto samples = read_dataset(c.dataset);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto rep = validate_sample(samples[i]);
        if (!rep.ok()) throw ValidationError(i, "sample " + samples[i].id + ": " + rep.violations.front().code);
    }
    fs::create_directories(c.output_dir);
    GeneratorClient client(c.generator);
    const auto run = augment_dataset(samples, client, c.augment, c.positive_pool, c.negative_pool, c.augment_workers);

    nlohmann::ordered_json rep;
    rep["samples"] = run.samples;
    rep["completed"] = run.completed;
    rep["generator"] = client.generator_id();
    rep["positive"] = to_json(run.stats.positive);
    rep["negative"] = to_json(run.stats.negative);
    rep["positive_pool"] = {{"path", run.positive_pool.path.string()}, {"records", run.positive_pool.record_count}};
    rep["negative_pool"] = {{"path", run.negative_pool.path.string()}, {"records", run.negative_pool.record_count}};
    rep["expansion_factor"] = run.expansion_factor;
    rep["warnings"] = run.stats.warnings;
    rep["status"] = run.error ? "failed" : "ok";
    write_json_file(c.output_dir / "augment_report.json", rep);
    out << rep.dump(2) << '\n';
    if (run.error) return exit_code_for(run.error);
    return kOk;
}

inline int cmd_validate(const RunConfig& c, std::ostream& out) {
    require_inputs({{"dataset", &c.dataset}, {"positive_pool", &c.positive_pool}, {"negative_pool", &c.negative_pool}});
    const auto samples = read_dataset(c.dataset);
    const auto pos = read_pool(c.positive_pool);
    const auto neg = read_pool(c.negative_pool);
    nlohmann::ordered_json violations = nlohmann::ordered_json::array();
    std::map<std::string, std::size_t> counts;
    auto add = [&](const std::string& id, const std::string& code, const std::string& detail) {
        violations.push_back({{"sample", id}, {"code", code}, {"detail", detail}});
        ++counts[code];
    };
    // Orphans are reported instead of aborting the join.
    std::set<std::string> ids;
    for (const auto& s : samples)
        if (!ids.insert(s.id).second) add(s.id, "DUPLICATE_SAMPLE_ID", "sample id appears more than once");
    std::vector<Rationale> pos_known, neg_known;
    for (const auto* pool : {&pos, &neg})
        for (const auto& r : *pool) {
            if (!ids.count(r.parent_id)) {
                add(r.parent_id, "ORPHAN_RATIONALE", "no sample with this id: " + r.text);
                continue;
            }
            (pool == &pos ? pos_known : neg_known).push_back(r);
        }
    if (counts.count("DUPLICATE_SAMPLE_ID") == 0) {
        for (const auto& rs : join_pools(samples, pos_known, neg_known)) {
            const auto rep = validate_rad_sample(rs);
            for (const auto& v : rep.violations) add(rs.sample.id, v.code, v.detail);
        }
    }
    nlohmann::ordered_json rep;
    rep["samples"] = samples.size();
    rep["positives"] = pos.size();
    rep["negatives"] = neg.size();
    rep["ok"] = violations.empty();
    rep["violation_counts"] = counts;
    rep["violations"] = violations;
    out << rep.dump(2) << '\n';
    return violations.empty() ? kOk : kValidation;
}

inline int cmd_stats(const RunConfig& c, std::ostream& out) {
    const auto data = load_joined(c);
    const auto st = compute_stats(data);
    nlohmann::ordered_json rep = {{"samples", st.samples},
                                  {"positives", st.positives},
                                  {"negatives", st.negatives},
                                  {"expansion_factor", st.expansion_factor},
                                  {"min_rationales_per_sample", st.min_per_sample},
                                  {"max_rationales_per_sample", st.max_per_sample}};
    out << rep.dump(2) << '\n';
    return kOk;
}

inline int cmd_train(const RunConfig& c, std::ostream& out) {
    const auto data = load_joined(c);
    fs::create_directories(c.output_dir);
    toy::FeatureStore features(c.dataset.parent_path(), static_cast<std::size_t>(c.train.model.feature_dim));
    auto st = toy::TrainState::fresh(toy::init_model(data, c.train), c.seed);
    std::ofstream metrics(c.metrics_path(), std::ios::trunc);
    if (!metrics) throw IoError("cannot write " + c.metrics_path().string());
    auto log_epoch = [&](const toy::EpochMetrics& e) {
        metrics << toy::to_json(e).dump() << '\n';
        metrics.flush();
        spdlog::info("epoch {} phase {} nll {:.4f} mca {:.4f}", e.epoch, phase_name(e.phase), e.mean_nll, e.mean_mca);
    };
    try {
        toy::train(st, data, c.train, features, log_epoch);
    } catch (const NumericFault&) {
        toy::save_checkpoint(st.model, st.step, c.checkpoint);
        spdlog::error("numeric fault; last good parameters saved to {}", c.checkpoint.string());
        throw;
    }
    toy::save_checkpoint(st.model, st.step, c.checkpoint);
    nlohmann::ordered_json rep = {{"checkpoint", c.checkpoint.string()},
                                  {"metrics", c.metrics_path().string()},
                                  {"steps", st.step},
                                  {"vocab_size", st.model.vocab.size()},
                                  {"parameters", st.model.params.parameter_count()}};
    out << rep.dump(2) << '\n';
    return kOk;
}

inline int cmd_eval(const RunConfig& c, std::ostream& out) {
    const fs::path& data_path = c.eval_dataset.empty() ? c.dataset : c.eval_dataset;
    require_inputs({{"checkpoint", &c.checkpoint}, {"eval dataset", &data_path}});
    const auto ck = toy::load_checkpoint(c.checkpoint);
    const auto samples = read_dataset(data_path);
    toy::FeatureStore features(data_path.parent_path(), static_cast<std::size_t>(ck.model.cfg.feature_dim));
    const auto report = toy::evaluate(ck.model, samples, features, c.seed);
    nlohmann::ordered_json rep = toy::to_json(report);
    rep["checkpoint"] = c.checkpoint.string();
    rep["dataset"] = data_path.string();
    rep["chance"] = samples.empty() ? 0.0 : 1.0 / static_cast<double>(samples.front().options.size());
    write_json_file(c.output_dir / "eval_report.json", rep);
    out << rep.dump(2) << '\n';
    return kOk;
}

inline int cmd_gradcheck(const RunConfig& c, std::ostream& out) {
    const auto results = gradcheck::run_all(c.gradcheck);
    nlohmann::ordered_json rep;
    double worst = 0.0;
    bool ok = true;
    auto& suites = rep["suites"] = nlohmann::ordered_json::array();
    for (const auto& r : results) {
        suites.push_back(gradcheck::to_json(r));
        worst = std::max(worst, r.max_rel_error);
        ok = ok && r.passed();
    }
    rep["max_rel_error"] = worst;
    rep["passed"] = ok;
    out << rep.dump(2) << '\n';
    return ok ? kOk : kNumeric;
}

}  // namespace mind::cli
