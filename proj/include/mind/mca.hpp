#pragma once

// Multi-rationale contrastive alignment: a linear projection into the
// contrastive space, cosine similarity against the predicted embedding, dual
// hard mining (lowest-similarity positives, highest-similarity negatives) and
// the margin loss ReLU(mean_neg + m - mean_pos), with exact gradients.

#include "mind/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace mind {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// g_phi: maps a d_model hidden state to a d-dimensional embedding. `weight` is d x d_model.
struct ProjectionHead {
    Matrix weight;
    Vector bias;

    Eigen::Index in_dim() const { return weight.cols(); }
    Eigen::Index out_dim() const { return weight.rows(); }

    static ProjectionHead zeros(Eigen::Index d_model, Eigen::Index d) {
        return {Matrix::Zero(d, d_model), Vector::Zero(d)};
    }

    void validate() const {
        if (bias.size() != weight.rows())
            throw ShapeError("projection bias has " + std::to_string(bias.size()) + " entries, expected " +
                             std::to_string(weight.rows()));
        if (!weight.allFinite() || !bias.allFinite()) throw DegenerateInputError("projection head is not finite");
    }
};

struct MiningConfig {
    int sample_count = 5;  // N
    int top_k = 1;         // k
    double margin = 0.2;   // m
    double alpha = 1.0;    // weight of the contrastive term in the Phase-I objective
    std::uint64_t seed = 0;

    void validate() const {
        if (sample_count < 1) throw ConfigError("sample_count (N) must be >= 1");
        if (top_k < 1) throw ConfigError("top_k (k) must be >= 1");
        if (top_k > sample_count) throw ConfigError("top_k (k) must not exceed sample_count (N)");
        if (!(margin >= 0)) throw ConfigError("margin must be >= 0");
        if (!(alpha >= 0)) throw ConfigError("alpha must be >= 0");
    }
};

struct ContrastiveBatch {
    Vector pred;
    std::vector<Vector> positives;
    std::vector<Vector> negatives;
};

struct HardSets {
    std::vector<std::size_t> hard_pos_indices;  // Bottom-k of the positive similarities
    std::vector<std::size_t> hard_neg_indices;  // Top-k of the negative similarities
    double mean_pos = 0.0;
    double mean_neg = 0.0;
    std::vector<double> pos_sims;
    std::vector<double> neg_sims;
};

inline Vector project(const Vector& hidden, const ProjectionHead& head) {
    if (hidden.size() != head.in_dim())
        throw ShapeError("hidden has dimension " + std::to_string(hidden.size()) + ", head expects " +
                         std::to_string(head.in_dim()));
    if (head.bias.size() != head.out_dim()) throw ShapeError("projection bias does not match weight rows");
    return head.weight * hidden + head.bias;
}

inline double cosine_similarity(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw ShapeError("cosine_similarity: dimension mismatch");
    if (!a.allFinite() || !b.allFinite()) throw DegenerateInputError("cosine_similarity: non-finite input");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw DegenerateInputError("cosine_similarity: zero-norm input");
    return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

namespace detail {

/// The k extreme entries of `values` (smallest when `lowest`), ties to the lower
/// index, returned in ascending index order.
inline std::vector<std::size_t> select_extreme(const std::vector<double>& values, std::size_t k, bool lowest) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    k = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (values[a] != values[b]) return lowest ? values[a] < values[b] : values[a] > values[b];
                          return a < b;
                      });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline double mean_at(const std::vector<double>& values, const std::vector<std::size_t>& idx) {
    double sum = 0.0;
    for (auto i : idx) sum += values[i];
    return sum / static_cast<double>(idx.size());
}

}  // namespace detail

inline HardSets mine_hard(const ContrastiveBatch& batch, const MiningConfig& cfg) {
    if (batch.positives.empty() || batch.negatives.empty())
        throw DegenerateInputError("mine_hard needs at least one positive and one negative");
    if (cfg.top_k < 1) throw ConfigError("top_k must be >= 1");
    HardSets h;
    h.pos_sims.reserve(batch.positives.size());
    h.neg_sims.reserve(batch.negatives.size());
    for (const auto& p : batch.positives) h.pos_sims.push_back(cosine_similarity(batch.pred, p));
    for (const auto& n : batch.negatives) h.neg_sims.push_back(cosine_similarity(batch.pred, n));
    const auto k = static_cast<std::size_t>(cfg.top_k);
    h.hard_pos_indices = detail::select_extreme(h.pos_sims, k, true);
    h.hard_neg_indices = detail::select_extreme(h.neg_sims, k, false);
    h.mean_pos = detail::mean_at(h.pos_sims, h.hard_pos_indices);
    h.mean_neg = detail::mean_at(h.neg_sims, h.hard_neg_indices);
    return h;
}

inline double contrastive_loss(const HardSets& hard, double margin) {
    return std::max(0.0, hard.mean_neg + margin - hard.mean_pos);
}

/// Phase-I objective: generation loss plus the alpha-weighted contrastive term.
inline double combined_phase1_loss(double l_pos, double l_mca, double alpha) { return l_pos + alpha * l_mca; }

struct McaGradient {
    double loss = 0.0;
    HardSets hard;
    ProjectionHead grad_head;
    Vector grad_pred_hidden;
    std::vector<Vector> grad_pos_hidden;
    std::vector<Vector> grad_neg_hidden;
};

namespace detail {

/// d cos(a, b) / d a.
inline Vector cosine_grad(const Vector& a, const Vector& b) {
    const double na = a.norm();
    const double nb = b.norm();
    const double c = a.dot(b) / (na * nb);
    return b / (na * nb) - c * a / (na * na);
}

}  // namespace detail

/// Loss and gradients for a batch given at the hidden (pre-projection) level.
/// Hard-set membership is held fixed at the current point; at or below the
/// ReLU kink every gradient is zero.
inline McaGradient mca_loss_and_gradient(const ContrastiveBatch& hidden, const ProjectionHead& head,
                                         const MiningConfig& cfg) {
    head.validate();
    ContrastiveBatch emb;
    emb.pred = project(hidden.pred, head);
    for (const auto& p : hidden.positives) emb.positives.push_back(project(p, head));
    for (const auto& n : hidden.negatives) emb.negatives.push_back(project(n, head));

    McaGradient g;
    g.hard = mine_hard(emb, cfg);
    g.loss = contrastive_loss(g.hard, cfg.margin);
    g.grad_head = ProjectionHead::zeros(head.in_dim(), head.out_dim());
    g.grad_pred_hidden = Vector::Zero(hidden.pred.size());
    for (const auto& p : hidden.positives) g.grad_pos_hidden.push_back(Vector::Zero(p.size()));
    for (const auto& n : hidden.negatives) g.grad_neg_hidden.push_back(Vector::Zero(n.size()));
    if (g.hard.mean_neg + cfg.margin - g.hard.mean_pos <= 0.0) return g;

    Vector d_pred = Vector::Zero(emb.pred.size());
    auto accumulate = [&](const std::vector<Vector>& embs, const std::vector<Vector>& hiddens,
                          const std::vector<std::size_t>& picked, double coeff, std::vector<Vector>& grad_hidden) {
        for (auto i : picked) {
            d_pred += coeff * detail::cosine_grad(emb.pred, embs[i]);
            const Vector d_e = coeff * detail::cosine_grad(embs[i], emb.pred);
            g.grad_head.weight += d_e * hiddens[i].transpose();
            g.grad_head.bias += d_e;
            grad_hidden[i] = head.weight.transpose() * d_e;
        }
    };
    accumulate(emb.positives, hidden.positives, g.hard.hard_pos_indices,
               -1.0 / static_cast<double>(g.hard.hard_pos_indices.size()), g.grad_pos_hidden);
    accumulate(emb.negatives, hidden.negatives, g.hard.hard_neg_indices,
               1.0 / static_cast<double>(g.hard.hard_neg_indices.size()), g.grad_neg_hidden);
    g.grad_head.weight += d_pred * hidden.pred.transpose();
    g.grad_head.bias += d_pred;
    g.grad_pred_hidden = head.weight.transpose() * d_pred;
    return g;
}

/// Up to `n` distinct indices from [0, available), without replacement.
template <class Rng>
std::vector<std::size_t> sample_without_replacement(std::size_t available, std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(available);
    std::iota(idx.begin(), idx.end(), 0);
    n = std::min(n, available);
    for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, available - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(n);
    return idx;
}

}  // namespace mind
