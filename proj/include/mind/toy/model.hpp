#pragma once

// A small encoder-decoder transformer. The image feature vector is mapped by a
// learned linear layer into one extra encoder position in front of the text.
// Pre-norm residual blocks, single-head attention, GELU feed-forward, final
// layer norms, untied output projection, and the contrastive projection head.

#include "mind/mca.hpp"
#include "mind/toy/layers.hpp"
#include "mind/toy/vocab.hpp"

#include <random>
#include <string>
#include <vector>

namespace mind::toy {

struct ModelConfig {
    int d_model = 32;
    int layers = 1;
    int ff_dim = 64;
    int proj_dim = 16;
    int feature_dim = 8;
    int max_input_len = 96;   // text tokens, excluding the feature position
    int max_target_len = 48;  // including EOS

    void validate() const {
        if (d_model < 1 || layers < 1 || ff_dim < 1 || proj_dim < 1 || feature_dim < 1)
            throw ConfigError("model dimensions must be positive");
        if (max_input_len < 1 || max_target_len < 2) throw ConfigError("sequence limits too small");
    }
};

struct EncoderLayer {
    LayerNorm ln1;
    Attention attn;
    LayerNorm ln2;
    FeedForward ff;
};

struct DecoderLayer {
    LayerNorm ln1;
    Attention self_attn;
    LayerNorm ln2;
    Attention cross_attn;
    LayerNorm ln3;
    FeedForward ff;
};

/// Non-owning view of one parameter tensor as a flat array.
struct TensorRef {
    std::string name;
    double* data;
    Eigen::Index size;
};

struct ModelParams {
    Mat tok_emb;  // V x d
    Mat enc_pos;  // (max_input_len + 1) x d
    Mat dec_pos;  // max_target_len x d
    Mat feat_w;   // F x d
    Mat feat_b;   // 1 x d
    std::vector<EncoderLayer> enc;
    LayerNorm enc_ln;
    std::vector<DecoderLayer> dec;
    LayerNorm dec_ln;
    Mat out_w;  // d x V
    Mat out_b;  // 1 x V
    ProjectionHead head;

    std::vector<TensorRef> tensors() {
        std::vector<TensorRef> out;
        auto add = [&](std::string name, auto& t) { out.push_back({std::move(name), t.data(), t.size()}); };
        auto add_ln = [&](const std::string& n, LayerNorm& ln) {
            add(n + ".gain", ln.gain);
            add(n + ".bias", ln.bias);
        };
        auto add_attn = [&](const std::string& n, Attention& a) {
            add(n + ".wq", a.wq);
            add(n + ".wk", a.wk);
            add(n + ".wv", a.wv);
            add(n + ".wo", a.wo);
        };
        auto add_ff = [&](const std::string& n, FeedForward& f) {
            add(n + ".w1", f.w1);
            add(n + ".b1", f.b1);
            add(n + ".w2", f.w2);
            add(n + ".b2", f.b2);
        };
        add("tok_emb", tok_emb);
        add("enc_pos", enc_pos);
        add("dec_pos", dec_pos);
        add("feat_w", feat_w);
        add("feat_b", feat_b);
        for (std::size_t l = 0; l < enc.size(); ++l) {
            const std::string p = "enc" + std::to_string(l);
            add_ln(p + ".ln1", enc[l].ln1);
            add_attn(p + ".attn", enc[l].attn);
            add_ln(p + ".ln2", enc[l].ln2);
            add_ff(p + ".ff", enc[l].ff);
        }
        add_ln("enc_ln", enc_ln);
        for (std::size_t l = 0; l < dec.size(); ++l) {
            const std::string p = "dec" + std::to_string(l);
            add_ln(p + ".ln1", dec[l].ln1);
            add_attn(p + ".self", dec[l].self_attn);
            add_ln(p + ".ln2", dec[l].ln2);
            add_attn(p + ".cross", dec[l].cross_attn);
            add_ln(p + ".ln3", dec[l].ln3);
            add_ff(p + ".ff", dec[l].ff);
        }
        add_ln("dec_ln", dec_ln);
        add("out_w", out_w);
        add("out_b", out_b);
        add("head.weight", head.weight);
        add("head.bias", head.bias);
        return out;
    }

    /// Shape of every tensor, in `tensors()` order.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes() const {
        auto& self = const_cast<ModelParams&>(*this);
        std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
        auto add = [&](const auto& t) { out.emplace_back(t.rows(), t.cols()); };
        add(self.tok_emb);
        add(self.enc_pos);
        add(self.dec_pos);
        add(self.feat_w);
        add(self.feat_b);
        for (const auto& e : enc) {
            for (const auto* m : {&e.ln1.gain, &e.ln1.bias, &e.attn.wq, &e.attn.wk, &e.attn.wv, &e.attn.wo,
                                  &e.ln2.gain, &e.ln2.bias, &e.ff.w1, &e.ff.b1, &e.ff.w2, &e.ff.b2})
                add(*m);
        }
        add(enc_ln.gain);
        add(enc_ln.bias);
        for (const auto& d : dec) {
            for (const auto* m : {&d.ln1.gain, &d.ln1.bias, &d.self_attn.wq, &d.self_attn.wk, &d.self_attn.wv,
                                  &d.self_attn.wo, &d.ln2.gain, &d.ln2.bias, &d.cross_attn.wq, &d.cross_attn.wk,
                                  &d.cross_attn.wv, &d.cross_attn.wo, &d.ln3.gain, &d.ln3.bias, &d.ff.w1, &d.ff.b1,
                                  &d.ff.w2, &d.ff.b2})
                add(*m);
        }
        add(dec_ln.gain);
        add(dec_ln.bias);
        add(out_w);
        add(out_b);
        add(head.weight);
        out.emplace_back(head.bias.rows(), head.bias.cols());
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& t : const_cast<ModelParams*>(this)->tensors()) n += static_cast<std::size_t>(t.size);
        return n;
    }

    void set_zero() {
        for (auto& t : tensors()) std::fill(t.data, t.data + t.size, 0.0);
    }

    bool all_finite() const {
        for (const auto& t : const_cast<ModelParams*>(this)->tensors())
            for (Eigen::Index i = 0; i < t.size; ++i)
                if (!std::isfinite(t.data[i])) return false;
        return true;
    }

    /// Zero-valued tensors of the given architecture.
    static ModelParams zeros(const ModelConfig& cfg, std::size_t vocab_size) {
        cfg.validate();
        const Eigen::Index d = cfg.d_model, f = cfg.ff_dim, v = static_cast<Eigen::Index>(vocab_size);
        auto ln = [&] { return LayerNorm{Mat::Zero(1, d), Mat::Zero(1, d)}; };
        auto attn = [&] { return Attention{Mat::Zero(d, d), Mat::Zero(d, d), Mat::Zero(d, d), Mat::Zero(d, d)}; };
        auto ff = [&] { return FeedForward{Mat::Zero(d, f), Mat::Zero(1, f), Mat::Zero(f, d), Mat::Zero(1, d)}; };
        ModelParams p;
        p.tok_emb = Mat::Zero(v, d);
        p.enc_pos = Mat::Zero(cfg.max_input_len + 1, d);
        p.dec_pos = Mat::Zero(cfg.max_target_len, d);
        p.feat_w = Mat::Zero(cfg.feature_dim, d);
        p.feat_b = Mat::Zero(1, d);
        for (int l = 0; l < cfg.layers; ++l) p.enc.push_back({ln(), attn(), ln(), ff()});
        p.enc_ln = ln();
        for (int l = 0; l < cfg.layers; ++l) p.dec.push_back({ln(), attn(), ln(), attn(), ln(), ff()});
        p.dec_ln = ln();
        p.out_w = Mat::Zero(d, v);
        p.out_b = Mat::Zero(1, v);
        p.head = ProjectionHead::zeros(d, cfg.proj_dim);
        return p;
    }

    /// Random initialization: fan-in scaled projections, small embeddings and
    /// output weights, unit layer-norm gains.
    static ModelParams init(const ModelConfig& cfg, std::size_t vocab_size, std::mt19937_64& rng) {
        ModelParams p = zeros(cfg, vocab_size);
        std::normal_distribution<double> normal(0.0, 1.0);
        auto fill = [&](Mat& m, double stddev) { m = m.unaryExpr([&](double) { return stddev * normal(rng); }); };
        const double d = cfg.d_model;
        auto init_ln = [&](LayerNorm& ln) { ln.gain.setOnes(); };
        auto init_attn = [&](Attention& a) {
            for (Mat* w : {&a.wq, &a.wk, &a.wv, &a.wo}) fill(*w, 1.0 / std::sqrt(d));
        };
        auto init_ff = [&](FeedForward& f) {
            fill(f.w1, 1.0 / std::sqrt(d));
            fill(f.w2, 1.0 / std::sqrt(static_cast<double>(cfg.ff_dim)));
        };
        fill(p.tok_emb, 0.5);
        fill(p.enc_pos, 0.5);
        fill(p.dec_pos, 0.5);
        fill(p.feat_w, 0.1);
        for (auto& e : p.enc) {
            init_ln(e.ln1);
            init_attn(e.attn);
            init_ln(e.ln2);
            init_ff(e.ff);
        }
        init_ln(p.enc_ln);
        for (auto& l : p.dec) {
            init_ln(l.ln1);
            init_attn(l.self_attn);
            init_ln(l.ln2);
            init_attn(l.cross_attn);
            init_ln(l.ln3);
            init_ff(l.ff);
        }
        init_ln(p.dec_ln);
        fill(p.out_w, 0.02);
        p.head.weight = p.head.weight.unaryExpr([&](double) { return normal(rng) / std::sqrt(d); });
        return p;
    }
};

// --- forward / backward -----------------------------------------------------

struct EncLayerCache {
    LnCache ln1, ln2;
    AttnCache attn;
    FfCache ff;
};

struct EncoderCache {
    std::vector<int> tokens;
    Eigen::RowVectorXd feature;
    std::vector<EncLayerCache> layers;
    LnCache ln;
    Mat out;  // (T + 1) x d
};

struct DecLayerCache {
    LnCache ln1, ln2, ln3;
    AttnCache self_attn, cross_attn;
    FfCache ff;
};

struct DecoderCache {
    std::vector<int> inputs;
    std::vector<DecLayerCache> layers;
    LnCache ln;
    Mat out;  // T x d
};

inline void encode(const ModelParams& p, const std::vector<int>& tokens, const Eigen::RowVectorXd& feature,
                   EncoderCache& c) {
    const Eigen::Index rows = static_cast<Eigen::Index>(tokens.size()) + 1;
    if (rows > p.enc_pos.rows()) throw ShapeError("encoder input exceeds the positional table");
    if (feature.size() != p.feat_w.rows()) throw ShapeError("feature dimension does not match the fusion layer");
    c.tokens = tokens;
    c.feature = feature;
    Mat x(rows, p.tok_emb.cols());
    x.row(0) = feature * p.feat_w + p.feat_b + p.enc_pos.row(0);
    for (Eigen::Index i = 1; i < rows; ++i) x.row(i) = p.tok_emb.row(tokens[static_cast<std::size_t>(i - 1)]) + p.enc_pos.row(i);
    c.layers.resize(p.enc.size());
    for (std::size_t l = 0; l < p.enc.size(); ++l) {
        auto& lc = c.layers[l];
        const Mat a = layer_norm(x, p.enc[l].ln1, lc.ln1);
        x += attention(a, a, p.enc[l].attn, false, lc.attn);
        const Mat b = layer_norm(x, p.enc[l].ln2, lc.ln2);
        x += feed_forward(b, p.enc[l].ff, lc.ff);
    }
    c.out = layer_norm(x, p.enc_ln, c.ln);
}

inline void encode_backward(const ModelParams& p, const EncoderCache& c, const Mat& d_out, ModelParams& g) {
    Mat dx = layer_norm_backward(d_out, p.enc_ln, c.ln, g.enc_ln);
    for (std::size_t li = p.enc.size(); li-- > 0;) {
        const auto& lc = c.layers[li];
        const Mat d_b = feed_forward_backward(dx, p.enc[li].ff, lc.ff, g.enc[li].ff);
        dx += layer_norm_backward(d_b, p.enc[li].ln2, lc.ln2, g.enc[li].ln2);
        Mat dq, dkv;
        attention_backward(dx, p.enc[li].attn, lc.attn, g.enc[li].attn, dq, dkv);
        dx += layer_norm_backward(dq + dkv, p.enc[li].ln1, lc.ln1, g.enc[li].ln1);
    }
    g.feat_w.noalias() += c.feature.transpose() * dx.row(0);
    g.feat_b += dx.row(0);
    for (Eigen::Index i = 0; i < dx.rows(); ++i) {
        g.enc_pos.row(i) += dx.row(i);
        if (i > 0) g.tok_emb.row(c.tokens[static_cast<std::size_t>(i - 1)]) += dx.row(i);
    }
}

inline void decode(const ModelParams& p, const std::vector<int>& inputs, const Mat& memory, DecoderCache& c) {
    const Eigen::Index rows = static_cast<Eigen::Index>(inputs.size());
    if (rows > p.dec_pos.rows()) throw ShapeError("decoder input exceeds the positional table");
    c.inputs = inputs;
    Mat y(rows, p.tok_emb.cols());
    for (Eigen::Index i = 0; i < rows; ++i) y.row(i) = p.tok_emb.row(inputs[static_cast<std::size_t>(i)]) + p.dec_pos.row(i);
    c.layers.resize(p.dec.size());
    for (std::size_t l = 0; l < p.dec.size(); ++l) {
        auto& lc = c.layers[l];
        const Mat a = layer_norm(y, p.dec[l].ln1, lc.ln1);
        y += attention(a, a, p.dec[l].self_attn, true, lc.self_attn);
        const Mat b = layer_norm(y, p.dec[l].ln2, lc.ln2);
        y += attention(b, memory, p.dec[l].cross_attn, false, lc.cross_attn);
        const Mat e = layer_norm(y, p.dec[l].ln3, lc.ln3);
        y += feed_forward(e, p.dec[l].ff, lc.ff);
    }
    c.out = layer_norm(y, p.dec_ln, c.ln);
}

/// Returns the gradient with respect to the encoder memory.
inline Mat decode_backward(const ModelParams& p, const DecoderCache& c, const Mat& d_out, ModelParams& g) {
    Mat dy = layer_norm_backward(d_out, p.dec_ln, c.ln, g.dec_ln);
    Mat d_memory;
    for (std::size_t li = p.dec.size(); li-- > 0;) {
        const auto& lc = c.layers[li];
        const Mat d_e = feed_forward_backward(dy, p.dec[li].ff, lc.ff, g.dec[li].ff);
        dy += layer_norm_backward(d_e, p.dec[li].ln3, lc.ln3, g.dec[li].ln3);
        Mat dq, dmem;
        attention_backward(dy, p.dec[li].cross_attn, lc.cross_attn, g.dec[li].cross_attn, dq, dmem);
        if (d_memory.size() == 0)
            d_memory = dmem;
        else
            d_memory += dmem;
        dy += layer_norm_backward(dq, p.dec[li].ln2, lc.ln2, g.dec[li].ln2);
        Mat sq, skv;
        attention_backward(dy, p.dec[li].self_attn, lc.self_attn, g.dec[li].self_attn, sq, skv);
        dy += layer_norm_backward(sq + skv, p.dec[li].ln1, lc.ln1, g.dec[li].ln1);
    }
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        g.dec_pos.row(i) += dy.row(i);
        g.tok_emb.row(c.inputs[static_cast<std::size_t>(i)]) += dy.row(i);
    }
    return d_memory;
}

inline Mat logits(const ModelParams& p, const Mat& hidden) { return add_bias(hidden * p.out_w, p.out_b); }

/// Teacher-forced pass over one (input, target) pair.
struct SeqForward {
    EncoderCache enc;
    DecoderCache dec;
    std::vector<int> targets;  // next-token targets, ending in EOS
    Mat probs;
    double nll = 0.0;  // mean over target positions
    ColVec pooled;     // mean decoder hidden state over target positions
};

inline void forward_seq(const ModelParams& p, const std::vector<int>& input, const Eigen::RowVectorXd& feature,
                        const std::vector<int>& target, SeqForward& f) {
    encode(p, input, feature, f.enc);
    std::vector<int> dec_in{Vocab::BOS};
    dec_in.insert(dec_in.end(), target.begin(), target.end());
    f.targets = target;
    f.targets.push_back(Vocab::EOS);
    decode(p, dec_in, f.enc.out, f.dec);
    const Mat z = logits(p, f.dec.out);
    const ColVec row_max = z.rowwise().maxCoeff();
    f.probs = (z.colwise() - row_max).array().exp();
    const ColVec row_sum = f.probs.rowwise().sum();
    f.probs = f.probs.array().colwise() / row_sum.array();
    double total = 0.0;
    for (std::size_t t = 0; t < f.targets.size(); ++t) {
        const auto i = static_cast<Eigen::Index>(t);
        total -= (z(i, f.targets[t]) - row_max(i)) - std::log(row_sum(i));
    }
    f.nll = total / static_cast<double>(f.targets.size());
    if (!std::isfinite(f.nll)) throw NumericFault("non-finite sequence loss");
    f.pooled = f.dec.out.colwise().mean().transpose();
}

/// Backpropagates `scale * nll + d_pooled . pooled` into `g`.
inline void backward_seq(const ModelParams& p, const SeqForward& f, double scale, const ColVec* d_pooled,
                         ModelParams& g) {
    const double rows = static_cast<double>(f.targets.size());
    Mat dz = f.probs;
    for (std::size_t t = 0; t < f.targets.size(); ++t) dz(static_cast<Eigen::Index>(t), f.targets[t]) -= 1.0;
    dz *= scale / rows;
    g.out_w.noalias() += f.dec.out.transpose() * dz;
    g.out_b += dz.colwise().sum();
    Mat dh = dz * p.out_w.transpose();
    if (d_pooled) dh.rowwise() += d_pooled->transpose() / rows;
    const Mat d_mem = decode_backward(p, f.dec, dh, g);
    encode_backward(p, f.enc, d_mem, g);
}

/// Mean encoder state: the rationale embedding input to the projection head.
inline ColVec pooled_encoding(const ModelParams& p, const std::vector<int>& input, const Eigen::RowVectorXd& feature,
                              EncoderCache& c) {
    encode(p, input, feature, c);
    return c.out.colwise().mean().transpose();
}

inline void pooled_encoding_backward(const ModelParams& p, const EncoderCache& c, const ColVec& d_pooled,
                                     ModelParams& g) {
    Mat d_out = Mat::Zero(c.out.rows(), c.out.cols());
    d_out.rowwise() += d_pooled.transpose() / static_cast<double>(c.out.rows());
    encode_backward(p, c, d_out, g);
}

/// Greedy decoding; returns generated ids without BOS/EOS.
inline std::vector<int> greedy_decode(const ModelParams& p, const std::vector<int>& input,
                                      const Eigen::RowVectorXd& feature, int max_len) {
    EncoderCache enc;
    encode(p, input, feature, enc);
    std::vector<int> seq{Vocab::BOS};
    DecoderCache dec;
    for (int step = 0; step < max_len; ++step) {
        decode(p, seq, enc.out, dec);
        const Eigen::RowVectorXd last = dec.out.row(dec.out.rows() - 1) * p.out_w + p.out_b;
        Eigen::Index best = 0;
        last.maxCoeff(&best);
        if (best == Vocab::EOS) break;
        seq.push_back(static_cast<int>(best));
    }
    return {seq.begin() + 1, seq.end()};
}

}  // namespace mind::toy
