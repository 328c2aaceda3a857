#pragma once

// Row-per-position building blocks with hand-written backward passes.
// Backward functions accumulate (+=) into gradient structs of the same shape.

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace mind::toy {

using Mat = Eigen::MatrixXd;
using ColVec = Eigen::VectorXd;

inline Mat add_bias(const Mat& x, const Mat& bias) { return x.rowwise() + bias.row(0); }

struct LayerNorm {
    Mat gain;  // 1 x d
    Mat bias;  // 1 x d
};

struct LnCache {
    Mat xhat;
    ColVec rstd;
};

inline constexpr double kLnEps = 1e-5;

inline Mat layer_norm(const Mat& x, const LayerNorm& p, LnCache& c) {
    const ColVec mu = x.rowwise().mean();
    const Mat xc = x.colwise() - mu;
    const ColVec var = xc.array().square().rowwise().mean();
    c.rstd = (var.array() + kLnEps).rsqrt();
    c.xhat = xc.array().colwise() * c.rstd.array();
    return (c.xhat.array().rowwise() * p.gain.row(0).array()).rowwise() + p.bias.row(0).array();
}

inline Mat layer_norm_backward(const Mat& dy, const LayerNorm& p, const LnCache& c, LayerNorm& g) {
    g.gain += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    g.bias += dy.colwise().sum();
    const Mat dxhat = dy.array().rowwise() * p.gain.row(0).array();
    const ColVec m1 = dxhat.rowwise().mean();
    const ColVec m2 = (dxhat.array() * c.xhat.array()).rowwise().mean();
    const Mat centered = dxhat.colwise() - m1;
    return (centered.array() - c.xhat.array().colwise() * m2.array()).colwise() * c.rstd.array();
}

/// Single-head scaled dot-product attention with output projection.
struct Attention {
    Mat wq, wk, wv, wo;  // d x d
};

struct AttnCache {
    Mat xq, xkv, q, k, v, a, o;
};

inline Mat attention(const Mat& xq, const Mat& xkv, const Attention& p, bool causal, AttnCache& c) {
    c.xq = xq;
    c.xkv = xkv;
    c.q = xq * p.wq;
    c.k = xkv * p.wk;
    c.v = xkv * p.wv;
    const double scale = 1.0 / std::sqrt(static_cast<double>(c.q.cols()));
    Mat s = (c.q * c.k.transpose()) * scale;
    if (causal)
        for (Eigen::Index i = 0; i < s.rows(); ++i)
            for (Eigen::Index j = i + 1; j < s.cols(); ++j) s(i, j) = -std::numeric_limits<double>::infinity();
    const ColVec row_max = s.rowwise().maxCoeff();
    c.a = (s.colwise() - row_max).array().exp();
    const ColVec row_sum = c.a.rowwise().sum();
    c.a = c.a.array().colwise() / row_sum.array();
    c.o = c.a * c.v;
    return c.o * p.wo;
}

inline void attention_backward(const Mat& dy, const Attention& p, const AttnCache& c, Attention& g, Mat& dxq,
                               Mat& dxkv) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(c.q.cols()));
    g.wo.noalias() += c.o.transpose() * dy;
    const Mat d_o = dy * p.wo.transpose();
    const Mat d_a = d_o * c.v.transpose();
    const Mat d_v = c.a.transpose() * d_o;
    const ColVec inner = (d_a.array() * c.a.array()).rowwise().sum();
    const Mat d_s = (c.a.array() * (d_a.colwise() - inner).array()) * scale;
    const Mat d_q = d_s * c.k;
    const Mat d_k = d_s.transpose() * c.q;
    g.wq.noalias() += c.xq.transpose() * d_q;
    g.wk.noalias() += c.xkv.transpose() * d_k;
    g.wv.noalias() += c.xkv.transpose() * d_v;
    dxq = d_q * p.wq.transpose();
    dxkv = d_k * p.wk.transpose() + d_v * p.wv.transpose();
}

struct FeedForward {
    Mat w1, b1, w2, b2;  // d x f, 1 x f, f x d, 1 x d
};

struct FfCache {
    Mat x, pre, act;
};

// tanh approximation of GELU; smooth everywhere, which keeps finite-difference checks clean.
inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
inline constexpr double kGeluA = 0.044715;

inline double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

inline double gelu_grad(double x) {
    const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

inline Mat feed_forward(const Mat& x, const FeedForward& p, FfCache& c) {
    c.x = x;
    c.pre = add_bias(x * p.w1, p.b1);
    c.act = c.pre.unaryExpr([](double v) { return gelu(v); });
    return add_bias(c.act * p.w2, p.b2);
}

inline Mat feed_forward_backward(const Mat& dy, const FeedForward& p, const FfCache& c, FeedForward& g) {
    g.w2.noalias() += c.act.transpose() * dy;
    g.b2 += dy.colwise().sum();
    const Mat d_act = dy * p.w2.transpose();
    const Mat d_pre = d_act.cwiseProduct(c.pre.unaryExpr([](double v) { return gelu_grad(v); }));
    g.w1.noalias() += c.x.transpose() * d_pre;
    g.b1 += d_pre.colwise().sum();
    return d_pre * p.w1.transpose();
}

}  // namespace mind::toy
