#pragma once

// Central finite-difference checks of the analytic gradients: the contrastive
// loss through the projection head, and the full toy Phase-I / Phase-II losses.

#include "mind/mca.hpp"
#include "mind/toy/trainer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

namespace mind::gradcheck {

using toy::McaDraw;
using toy::Model;
using toy::ModelParams;
using toy::StepLoss;
using toy::Vocab;

struct Config {
    int instances = 50;
    double step = 1e-3;
    /// Coordinates sampled per parameter tensor in the toy suites.
    int coords_per_tensor = 6;
    /// Denominator floor of the relative error, so gradients that vanish
    /// analytically are compared on an absolute scale.
    double floor = 1e-2;
    std::uint64_t seed = 0;
};

struct Result {
    std::string suite;
    double tolerance = 0.0;
    int instances = 0;
    std::size_t coordinates = 0;
    /// Coordinates skipped because the perturbation crossed a hard-set or ReLU boundary.
    std::size_t skipped = 0;
    double max_rel_error = 0.0;

    bool passed() const { return max_rel_error <= tolerance && coordinates > 0; }
};

inline nlohmann::ordered_json to_json(const Result& r) {
    return {{"suite", r.suite},
            {"instances", r.instances},
            {"coordinates", r.coordinates},
            {"skipped", r.skipped},
            {"max_rel_error", r.max_rel_error},
            {"tolerance", r.tolerance},
            {"passed", r.passed()}};
}

inline double relative_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline bool same_selection(const HardSets& a, const HardSets& b) {
    return a.hard_pos_indices == b.hard_pos_indices && a.hard_neg_indices == b.hard_neg_indices;
}

// --- contrastive loss -------------------------------------------------------

namespace detail {

template <class Rng>
Vector random_vector(Eigen::Index n, Rng& rng, double stddev = 1.0) {
    std::normal_distribution<double> normal(0.0, stddev);
    Vector v(n);
    for (auto& x : v) x = normal(rng);
    return v;
}

}  // namespace detail

/// Relative to its gradient, cosine curvature grows like 1/|e|^2, so a fixed
/// step on an embedding much shorter than the head's scale is dominated by
/// truncation error. Such instances are redrawn.
inline bool well_conditioned(const ContrastiveBatch& hidden, const ProjectionHead& head, double min_ratio = 0.5) {
    const double floor = min_ratio * head.weight.norm();
    if (project(hidden.pred, head).norm() < floor) return false;
    for (const auto* set : {&hidden.positives, &hidden.negatives})
        for (const auto& h : *set)
            if (project(h, head).norm() < floor) return false;
    return true;
}

inline Result check_mca(const Config& cfg) {
    Result res{"mca", 1e-4};
    auto rng = substream(cfg.seed, "gradcheck-mca");
    std::uniform_int_distribution<int> dim(2, 8), count(1, 8);
    // Entries are drawn at scale 2 so that a fixed step is a small relative perturbation.
    const double scale = 2.0;
    std::normal_distribution<double> normal(0.0, scale);
    for (int inst = 0; inst < cfg.instances; ++inst) {
        const Eigen::Index d_model = dim(rng), d = dim(rng);
        MiningConfig mc;
        mc.sample_count = count(rng);
        mc.top_k = std::uniform_int_distribution<int>(1, mc.sample_count)(rng);
        ProjectionHead head{Matrix(d, d_model), detail::random_vector(d, rng, scale)};
        for (auto& x : head.weight.reshaped()) x = normal(rng);
        ContrastiveBatch hidden;
        hidden.pred = detail::random_vector(d_model, rng, scale);
        for (int i = 0; i < mc.sample_count; ++i)
            hidden.positives.push_back(detail::random_vector(d_model, rng, scale));
        for (int i = 0; i < mc.sample_count; ++i)
            hidden.negatives.push_back(detail::random_vector(d_model, rng, scale));
        if (!well_conditioned(hidden, head)) {
            --inst;
            continue;
        }
        // Keep the hinge active: the margin sits 0.25 above the current gap.
        mc.margin = 0.0;
        const auto base = mca_loss_and_gradient(hidden, head, mc).hard;
        mc.margin = std::max(0.2, base.mean_pos - base.mean_neg + 0.25);
        const McaGradient g = mca_loss_and_gradient(hidden, head, mc);

        auto probe = [&](double& x, double analytic) {
            const double saved = x;
            x = saved + cfg.step;
            const auto up = mca_loss_and_gradient(hidden, head, mc);
            x = saved - cfg.step;
            const auto down = mca_loss_and_gradient(hidden, head, mc);
            x = saved;
            if (!same_selection(up.hard, g.hard) || !same_selection(down.hard, g.hard) || up.loss <= 0.0 ||
                down.loss <= 0.0) {
                ++res.skipped;
                return;
            }
            const double numeric = (up.loss - down.loss) / (2.0 * cfg.step);
            res.max_rel_error = std::max(res.max_rel_error, relative_error(analytic, numeric, cfg.floor));
            ++res.coordinates;
        };
        for (Eigen::Index i = 0; i < head.weight.size(); ++i)
            probe(head.weight.data()[i], g.grad_head.weight.data()[i]);
        for (Eigen::Index i = 0; i < head.bias.size(); ++i) probe(head.bias[i], g.grad_head.bias[i]);
        for (Eigen::Index i = 0; i < d_model; ++i) probe(hidden.pred[i], g.grad_pred_hidden[i]);
        for (std::size_t j = 0; j < hidden.positives.size(); ++j)
            for (Eigen::Index i = 0; i < d_model; ++i) probe(hidden.positives[j][i], g.grad_pos_hidden[j][i]);
        for (std::size_t j = 0; j < hidden.negatives.size(); ++j)
            for (Eigen::Index i = 0; i < d_model; ++i) probe(hidden.negatives[j][i], g.grad_neg_hidden[j][i]);
        ++res.instances;
    }
    return res;
}

// --- toy model --------------------------------------------------------------

namespace detail {

template <class Rng>
std::string random_words(const std::vector<std::string>& words, int min_len, int max_len, Rng& rng) {
    std::uniform_int_distribution<int> len(min_len, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    std::string out;
    for (int i = len(rng); i > 0; --i) {
        if (!out.empty()) out += ' ';
        out += words[pick(rng)];
    }
    return out;
}

}  // namespace detail

/// Phase-I (nll + alpha * L_mca) or Phase-II (nll) loss of a random small model
/// (V = 20, d_model = 16, L = 1) against central differences.
inline Result check_toy(Phase phase, const Config& cfg) {
    Result res{phase == Phase::I ? "toy_phase1" : "toy_phase2", 1e-3};
    auto rng = substream(cfg.seed, phase == Phase::I ? "gradcheck-toy1" : "gradcheck-toy2");
    const std::vector<std::string> words = {"red", "blue", "green", "box", "ball", "is", "the", "not", "a", "says"};
    for (int inst = 0; inst < cfg.instances; ++inst) {
        Sample s;
        s.id = "g" + std::to_string(inst);
        s.question = detail::random_words(words, 2, 4, rng);
        s.options = {"red", "blue"};
        s.caption = detail::random_words(words, 2, 5, rng);
        s.answer_index = 0;
        s.rationale_gt = detail::random_words(words, 2, 5, rng);
        McaDraw draw;
        MiningConfig mc;
        mc.sample_count = std::uniform_int_distribution<int>(1, 3)(rng);
        mc.top_k = std::uniform_int_distribution<int>(1, mc.sample_count)(rng);
        mc.margin = 1.5;  // keeps the hinge active at random initialization
        mc.alpha = 1.0;
        for (int i = 0; i < mc.sample_count; ++i) {
            draw.positives.push_back(detail::random_words(words, 1, 4, rng));
            draw.negatives.push_back(detail::random_words(words, 1, 4, rng));
        }
        TrainingExample ex;
        ex.phase = phase;
        if (phase == Phase::I) {
            ex.input_text = render_input(s);
            ex.target_text = s.rationale_gt;
        } else {
            ex.input_text = render_input(s, &draw.negatives.front());
            ex.target_text = render_answer(s, &draw.positives.front());
        }

        std::vector<std::string> texts = {ex.input_text, ex.target_text};
        Model m;
        m.cfg.d_model = 16;
        m.cfg.layers = 1;
        m.cfg.ff_dim = 24;
        m.cfg.proj_dim = 6;
        m.cfg.feature_dim = 4;
        m.vocab = Vocab::build(texts, 20);
        m.params = ModelParams::init(m.cfg, m.vocab.size(), rng);
        // Move layer-norm affine parameters and biases off their initial values.
        std::normal_distribution<double> jitter(0.0, 0.1);
        for (auto& t : m.params.tensors())
            for (Eigen::Index i = 0; i < t.size; ++i) t.data[i] += jitter(rng);
        Eigen::RowVectorXd feature = detail::random_vector(m.cfg.feature_dim, rng).transpose();

        // Returns {total loss, contrastive term}.
        auto loss = [&](ModelParams* g, HardSets* h) -> std::pair<double, double> {
            if (phase == Phase::II) return {nll_loss(m, ex, feature, 1.0, g).nll, 0.0};
            const StepLoss l = phase1_loss(m, ex, s, draw, feature, mc, 1.0, g, h);
            return {combined_phase1_loss(l.nll, l.mca, mc.alpha), l.mca};
        };
        ModelParams grad = ModelParams::zeros(m.cfg, m.vocab.size());
        HardSets base_hard;
        const double base_mca = loss(&grad, &base_hard).second;

        auto params = m.params.tensors();
        auto grads = grad.tensors();
        for (std::size_t k = 0; k < params.size(); ++k) {
            const auto picks = sample_without_replacement(static_cast<std::size_t>(params[k].size),
                                                          static_cast<std::size_t>(cfg.coords_per_tensor), rng);
            for (auto i : picks) {
                double& x = params[k].data[i];
                const double saved = x;
                HardSets hu, hd;
                x = saved + cfg.step;
                const auto up = loss(nullptr, &hu);
                x = saved - cfg.step;
                const auto down = loss(nullptr, &hd);
                x = saved;
                const bool active = base_mca > 0.0;
                if (phase == Phase::I &&
                    ((up.second > 0.0) != active || (down.second > 0.0) != active ||
                     (active && (!same_selection(hu, base_hard) || !same_selection(hd, base_hard))))) {
                    ++res.skipped;
                    continue;
                }
                const double numeric = (up.first - down.first) / (2.0 * cfg.step);
                res.max_rel_error =
                    std::max(res.max_rel_error, relative_error(grads[k].data[i], numeric, cfg.floor));
                ++res.coordinates;
            }
        }
        ++res.instances;
    }
    return res;
}

inline std::vector<Result> run_all(const Config& cfg) {
    return {check_mca(cfg), check_toy(Phase::I, cfg), check_toy(Phase::II, cfg)};
}

}  // namespace mind::gradcheck
