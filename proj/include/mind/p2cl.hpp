#pragma once

// Two-stage correction learning: Phase-I examples supervise a sampled positive
// rationale from (I, Q, O, C); Phase-II examples condition on a positive or
// negative rationale and supervise the answer, optionally followed by a
// positive rationale. The scheduler emits every Phase-I epoch before Phase II.

#include "mind/dataset.hpp"
#include "mind/prompts.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mind {

enum class Phase { I, II };
enum class CondPolarity { none, positive, negative };

inline std::string_view phase_name(Phase p) { return p == Phase::I ? "I" : "II"; }

/// Conditioning-input and supervision rule for Phase II.
enum class PolicyVariant {
    POS_TO_NA,          // Pos -> N/A
    NEG_TO_NA,          // Neg -> N/A
    POS_TO_POS,         // Pos -> Pos
    NEG_TO_POS,         // Neg -> Pos
    MIX_NA,             // Pos -> N/A or Neg -> N/A
    MIX_POS_OR_NA,      // Pos -> Pos or Neg -> N/A
    MIX_NEG_CORRECTED,  // Pos -> N/A or Neg -> Pos
    FULL_MIX,           // Pos -> Pos or Neg -> Pos
};

inline constexpr std::pair<PolicyVariant, std::string_view> kPolicyNames[] = {
    {PolicyVariant::POS_TO_NA, "POS_TO_NA"},
    {PolicyVariant::NEG_TO_NA, "NEG_TO_NA"},
    {PolicyVariant::POS_TO_POS, "POS_TO_POS"},
    {PolicyVariant::NEG_TO_POS, "NEG_TO_POS"},
    {PolicyVariant::MIX_NA, "MIX_NA"},
    {PolicyVariant::MIX_POS_OR_NA, "MIX_POS_OR_NA"},
    {PolicyVariant::MIX_NEG_CORRECTED, "MIX_NEG_CORRECTED"},
    {PolicyVariant::FULL_MIX, "FULL_MIX"},
};

inline std::string_view policy_name(PolicyVariant v) {
    for (auto [p, n] : kPolicyNames)
        if (p == v) return n;
    return "?";
}

inline PolicyVariant parse_policy(std::string_view name) {
    for (auto [p, n] : kPolicyNames)
        if (n == name) return p;
    throw ConfigError("unknown conditioning policy '" + std::string(name) + "'");
}

struct ConditioningPolicy {
    PolicyVariant variant = PolicyVariant::FULL_MIX;
    /// Probability of a negative conditioner in the mixed variants.
    double mix_ratio = 0.5;

    void validate() const {
        if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) throw ConfigError("mix_ratio must lie in [0, 1]");
    }

    template <class Rng>
    CondPolarity draw(Rng& rng) const {
        switch (variant) {
            case PolicyVariant::POS_TO_NA:
            case PolicyVariant::POS_TO_POS: return CondPolarity::positive;
            case PolicyVariant::NEG_TO_NA:
            case PolicyVariant::NEG_TO_POS: return CondPolarity::negative;
            default: break;
        }
        return std::bernoulli_distribution(mix_ratio)(rng) ? CondPolarity::negative : CondPolarity::positive;
    }

    /// Whether the target continues with a positive rationale after the answer.
    bool supervises_rationale(CondPolarity cond) const {
        switch (variant) {
            case PolicyVariant::POS_TO_NA:
            case PolicyVariant::NEG_TO_NA:
            case PolicyVariant::MIX_NA: return false;
            case PolicyVariant::POS_TO_POS:
            case PolicyVariant::NEG_TO_POS:
            case PolicyVariant::FULL_MIX: return true;
            case PolicyVariant::MIX_POS_OR_NA: return cond == CondPolarity::positive;
            case PolicyVariant::MIX_NEG_CORRECTED: return cond == CondPolarity::negative;
        }
        return true;
    }
};

struct TrainingExample {
    Phase phase = Phase::I;
    std::string input_text;
    std::string feature_ref;
    std::string target_text;
    CondPolarity cond_polarity = CondPolarity::none;
    /// Position of the source RadSample in the scheduled dataset.
    std::size_t source_index = 0;
};

/// Question / options / context lines, plus a rationale line when conditioning.
inline std::string render_input(const Sample& s, const std::string* rationale = nullptr) {
    std::string out = "Question: " + s.question + "\nOptions:";
    for (std::size_t i = 0; i < s.options.size(); ++i) {
        out += " (";
        out += option_letter(i);
        out += ") " + s.options[i];
    }
    out += "\nContext: " + s.caption;
    if (rationale) out += "\nRationale: " + *rationale;
    return out;
}

inline std::string render_answer(const Sample& s, const std::string* rationale = nullptr) {
    std::string out = "The answer is (";
    out += option_letter(s.answer_index);
    out += ").";
    if (rationale) out += " " + *rationale;
    return out;
}

template <class Rng>
const std::string& pick_uniform(const std::vector<std::string>& pool, Rng& rng) {
    std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
    return pool[d(rng)];
}

template <class Rng>
TrainingExample assemble_phase1(const RadSample& rs, Rng& rng, std::size_t source_index = 0) {
    const auto pool = positive_texts(rs);
    if (pool.empty() || pool.front().empty()) throw AssemblyError("sample " + rs.sample.id + " has no positives");
    return {Phase::I, render_input(rs.sample), rs.sample.image_feature_ref, pick_uniform(pool, rng),
            CondPolarity::none, source_index};
}

template <class Rng>
TrainingExample assemble_phase2(const RadSample& rs, const ConditioningPolicy& policy, Rng& rng,
                                std::size_t source_index = 0) {
    const CondPolarity cond = policy.draw(rng);
    const auto pos = positive_texts(rs);
    const auto neg = negative_texts(rs);
    const auto& cond_pool = cond == CondPolarity::negative ? neg : pos;
    if (cond_pool.empty())
        throw AssemblyError("sample " + rs.sample.id + " has an empty " +
                            (cond == CondPolarity::negative ? "negative" : "positive") + " pool");
    const std::string& r_cond = pick_uniform(cond_pool, rng);
    std::string target;
    if (policy.supervises_rationale(cond)) {
        const std::string& r_sup = pick_uniform(pos, rng);
        target = render_answer(rs.sample, &r_sup);
    } else {
        target = render_answer(rs.sample);
    }
    return {Phase::II, render_input(rs.sample, &r_cond), rs.sample.image_feature_ref, std::move(target), cond,
            source_index};
}

struct ScheduleConfig {
    int phase1_epochs = 50;
    int phase2_epochs = 50;
    ConditioningPolicy policy;
    std::uint64_t seed = 0;

    void validate() const {
        if (phase1_epochs < 0 || phase2_epochs < 0) throw ConfigError("epoch counts must be >= 0");
        if (phase1_epochs == 0 && phase2_epochs == 0) throw ConfigError("both phases have zero epochs");
        policy.validate();
    }
};

/// Single-producer stream of training examples: Phase-I epochs, then Phase-II
/// epochs, each epoch a seeded permutation of the dataset.
class Scheduler {
public:
    Scheduler(const std::vector<RadSample>& data, ScheduleConfig cfg)
        : data_(data), cfg_(std::move(cfg)), rng_(cfg_.seed) {
        cfg_.validate();
        if (data_.empty()) throw ConfigError("cannot schedule an empty dataset");
        order_.resize(data_.size());
    }

    std::size_t total() const {
        return static_cast<std::size_t>(cfg_.phase1_epochs + cfg_.phase2_epochs) * data_.size();
    }
    /// 0-based epoch within its phase of the most recently emitted example.
    int epoch_in_phase() const { return epoch_ < cfg_.phase1_epochs ? epoch_ : epoch_ - cfg_.phase1_epochs; }

    std::optional<TrainingExample> next() {
        if (pos_ == data_.size() || epoch_ < 0) {
            ++epoch_;
            if (epoch_ >= cfg_.phase1_epochs + cfg_.phase2_epochs) return std::nullopt;
            std::iota(order_.begin(), order_.end(), 0);
            std::shuffle(order_.begin(), order_.end(), rng_);
            pos_ = 0;
        }
        const std::size_t i = order_[pos_++];
        if (epoch_ < cfg_.phase1_epochs) return assemble_phase1(data_[i], rng_, i);
        return assemble_phase2(data_[i], cfg_.policy, rng_, i);
    }

private:
    const std::vector<RadSample>& data_;
    ScheduleConfig cfg_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
    int epoch_ = -1;
};

inline std::vector<TrainingExample> schedule(const std::vector<RadSample>& data, const ScheduleConfig& cfg) {
    Scheduler s(data, cfg);
    std::vector<TrainingExample> out;
    out.reserve(s.total());
    while (auto ex = s.next()) out.push_back(std::move(*ex));
    return out;
}

}  // namespace mind
