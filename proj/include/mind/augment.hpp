#pragma once

// Augments samples with positive and negative rationale pools: prompt, generate,
// split, clean, deduplicate. Dataset-level runs fan out over worker threads and
// persist results in dataset order.

#include "mind/cleaning.hpp"
#include "mind/dataset.hpp"
#include "mind/generator.hpp"
#include "mind/prompts.hpp"

#include <spdlog/spdlog.h>

#include <array>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <thread>
#include <vector>

namespace mind {

struct PolarityYield {
    std::size_t requested = 0;
    std::size_t calls = 0;
    std::size_t segments = 0;
    std::size_t accepted = 0;
    std::size_t duplicates = 0;
    std::size_t surplus = 0;
    std::array<std::size_t, std::size(kAllRejectReasons)> rejected{};

    void merge(const PolarityYield& o) {
        requested += o.requested;
        calls += o.calls;
        segments += o.segments;
        accepted += o.accepted;
        duplicates += o.duplicates;
        surplus += o.surplus;
        for (std::size_t i = 0; i < rejected.size(); ++i) rejected[i] += o.rejected[i];
    }
};

struct YieldStats {
    PolarityYield positive;
    PolarityYield negative;
    std::vector<std::string> warnings;

    std::size_t calls() const { return positive.calls + negative.calls; }
    void merge(const YieldStats& o) {
        positive.merge(o.positive);
        negative.merge(o.negative);
        warnings.insert(warnings.end(), o.warnings.begin(), o.warnings.end());
    }
};

using Clock = std::function<Timestamp()>;

inline Timestamp system_now() {
    return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
}

struct AugmentOptions {
    int pos_count = 10;
    int neg_count = 10;
    int repeat_number = 10;
    CleanConfig clean;
    Clock clock = system_now;

    void validate() const {
        if (pos_count < 0 || neg_count < 0) throw ConfigError("pos_count and neg_count must be >= 0");
        if (repeat_number < 1) throw ConfigError("repeat_number must be >= 1");
        if (clean.min_chars > clean.max_chars) throw ConfigError("min_chars exceeds max_chars");
    }
};

struct AugmentResult {
    RadSample rad;
    YieldStats stats;
};

namespace detail {

inline void collect(const Sample& sample, Polarity pol, int count, GeneratorClient& client,
                    const AugmentOptions& opts, std::set<std::string>& seen, std::vector<Rationale>& out,
                    PolarityYield& y, std::vector<std::string>& warnings) {
    y.requested += static_cast<std::size_t>(count);
    const int calls = (count + opts.repeat_number - 1) / opts.repeat_number;
    for (int call = 0; call < calls; ++call) {
        const int n = std::min(opts.repeat_number, count - call * opts.repeat_number);
        const std::string prompt = pol == Polarity::positive ? build_positive_prompt(sample, sample.rationale_gt, n)
                                                             : build_negative_prompt(sample, sample.rationale_gt, n);
        const RawBatch raw = client.generate(prompt, static_cast<std::uint64_t>(call));
        ++y.calls;
        const Provenance prov{client.generator_id(), raw.prompt_digest, opts.clock()};
        for (const auto& seg : split_batch(raw)) {
            ++y.segments;
            auto res = clean_rationale(seg, pol, sample, sample.rationale_gt, prov, opts.clean);
            if (auto* reason = std::get_if<RejectReason>(&res)) {
                ++y.rejected[static_cast<std::size_t>(*reason)];
                continue;
            }
            auto& r = std::get<Rationale>(res);
            if (!seen.insert(r.text).second) {
                ++y.duplicates;
                spdlog::warn("sample {}: dropping duplicate {} rationale '{}'", sample.id, polarity_code(pol), r.text);
                continue;
            }
            if (out.size() >= static_cast<std::size_t>(count)) {
                ++y.surplus;
                continue;
            }
            out.push_back(std::move(r));
            ++y.accepted;
        }
    }
    if (count > 0 && out.empty()) {
        warnings.push_back("sample " + sample.id + ": zero usable " + std::string(polarity_code(pol)) +
                           " rationales");
        spdlog::warn("{}", warnings.back());
    }
}

}  // namespace detail

/// Generates, cleans and deduplicates rationale pools for one sample. The
/// source solution for every call is the sample's R_gt.
inline AugmentResult augment_sample(const Sample& sample, GeneratorClient& client, const AugmentOptions& opts) {
    opts.validate();
    AugmentResult res{{sample, {}, {}}, {}};
    std::set<std::string> seen{sample.rationale_gt};
    detail::collect(sample, Polarity::positive, opts.pos_count, client, opts, seen, res.rad.positives,
                    res.stats.positive, res.stats.warnings);
    detail::collect(sample, Polarity::negative, opts.neg_count, client, opts, seen, res.rad.negatives,
                    res.stats.negative, res.stats.warnings);
    return res;
}

struct AugmentRunReport {
    std::size_t samples = 0;
    std::size_t completed = 0;
    YieldStats stats;
    PoolFile positive_pool;
    PoolFile negative_pool;
    double expansion_factor = 0.0;
    /// First failure, if any; pools already hold every sample that completed.
    std::exception_ptr error;
};

/// Augments every sample with up to `workers` concurrent samples and writes
/// both pools in dataset order. After a failure no new samples start; samples
/// that finished are still written and the error is returned in the report.
inline AugmentRunReport augment_dataset(std::span<const Sample> samples, GeneratorClient& client,
                                        const AugmentOptions& opts, const std::filesystem::path& pos_path,
                                        const std::filesystem::path& neg_path, int workers) {
    opts.validate();
    std::vector<std::optional<AugmentResult>> results(samples.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr first_error;
    std::mutex err_mu;

    auto work = [&] {
        while (!stop.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= samples.size()) return;
            try {
                results[i] = augment_sample(samples[i], client, opts);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!first_error) first_error = std::current_exception();
                stop.store(true);
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const int n = std::max(1, std::min<int>(workers, static_cast<int>(samples.size())));
        for (int t = 1; t < n; ++t) pool.emplace_back(work);
        work();
    }

    AugmentRunReport report;
    report.samples = samples.size();
    std::vector<Rationale> pos, neg;
    for (auto& r : results) {
        if (!r) continue;
        ++report.completed;
        report.stats.merge(r->stats);
        pos.insert(pos.end(), r->rad.positives.begin(), r->rad.positives.end());
        neg.insert(neg.end(), r->rad.negatives.begin(), r->rad.negatives.end());
    }
    report.positive_pool = write_pool(pos, pos_path, Polarity::positive);
    report.negative_pool = write_pool(neg, neg_path, Polarity::negative);
    if (report.completed > 0)
        report.expansion_factor = static_cast<double>(pos.size() + neg.size() + report.completed) /
                                  static_cast<double>(report.completed);
    report.error = first_error;
    return report;
}

}  // namespace mind
