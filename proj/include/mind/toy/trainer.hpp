#pragma once

// Training, checkpointing and two-phase inference for the toy model.

#include "mind/mca.hpp"
#include "mind/mock_rules.hpp"
#include "mind/p2cl.hpp"
#include "mind/toy/model.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

namespace mind::toy {

struct OptimConfig {
    std::string kind = "adam";  // "adam" or "sgd"
    double learning_rate = 3e-3;
    double clip_norm = 1.0;
    int batch_size = 8;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (kind != "adam" && kind != "sgd") throw ConfigError("optimizer must be 'adam' or 'sgd'");
        if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
        if (!(clip_norm > 0)) throw ConfigError("clip_norm must be > 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    }
};

struct TrainConfig {
    ModelConfig model;
    OptimConfig optim;
    MiningConfig mining;
    ScheduleConfig schedule;
    std::size_t vocab_cap = 2000;
    std::uint64_t seed = 0;

    void validate() const {
        model.validate();
        optim.validate();
        mining.validate();
        schedule.validate();
        if (vocab_cap <= Vocab::kSpecials) throw ConfigError("vocab_cap too small");
    }
};

/// Vocabulary, architecture and weights.
struct Model {
    ModelConfig cfg;
    Vocab vocab;
    ModelParams params;
};

/// Loads and caches feature vectors by locator.
class FeatureStore {
public:
    FeatureStore(std::filesystem::path base_dir, std::size_t dim) : base_(std::move(base_dir)), dim_(dim) {}

    const Eigen::RowVectorXd& get(const std::string& ref) {
        auto it = cache_.find(ref);
        if (it != cache_.end()) return it->second;
        const auto f = load_feature(ref, base_, dim_);
        Eigen::RowVectorXd v(static_cast<Eigen::Index>(dim_));
        for (std::size_t i = 0; i < dim_; ++i) v(static_cast<Eigen::Index>(i)) = f[i];
        return cache_.emplace(ref, std::move(v)).first->second;
    }

private:
    std::filesystem::path base_;
    std::size_t dim_;
    std::map<std::string, Eigen::RowVectorXd> cache_;
};

/// Every text the model may read or write for this dataset.
inline std::vector<std::string> corpus_texts(const std::vector<RadSample>& data) {
    std::vector<std::string> texts;
    for (const auto& rs : data) {
        texts.push_back(render_input(rs.sample));
        texts.push_back(render_answer(rs.sample));
        for (auto& t : positive_texts(rs)) texts.push_back(std::move(t));
        for (auto& t : negative_texts(rs)) texts.push_back(std::move(t));
    }
    return texts;
}

inline std::vector<int> encode_clipped(const Vocab& vocab, const std::string& text, int max_len, const char* what) {
    auto ids = vocab.encode(text);
    if (static_cast<int>(ids.size()) > max_len) {
        spdlog::warn("{} truncated from {} to {} tokens", what, ids.size(), max_len);
        ids.resize(static_cast<std::size_t>(max_len));
    }
    return ids;
}

inline std::vector<int> encode_input(const Model& m, const std::string& text) {
    return encode_clipped(m.vocab, text, m.cfg.max_input_len, "input");
}

inline std::vector<int> encode_target(const Model& m, const std::string& text) {
    return encode_clipped(m.vocab, text, m.cfg.max_target_len - 1, "target");
}

// --- losses -----------------------------------------------------------------

struct StepLoss {
    double nll = 0.0;
    double mca = 0.0;
};

/// Phase-II style loss (also the Phase-I generation term): nll of the target.
/// Gradients are accumulated into `g` scaled by `scale`.
inline StepLoss nll_loss(const Model& m, const TrainingExample& ex, const Eigen::RowVectorXd& feature,
                         double scale, ModelParams* g) {
    SeqForward f;
    forward_seq(m.params, encode_input(m, ex.input_text), feature, encode_target(m, ex.target_text), f);
    if (g) backward_seq(m.params, f, scale, nullptr, *g);
    return {f.nll, 0.0};
}

/// Rationale texts drawn for one contrastive term.
struct McaDraw {
    std::vector<std::string> positives;
    std::vector<std::string> negatives;
};

template <class Rng>
McaDraw draw_rationales(const RadSample& rs, int n, Rng& rng) {
    McaDraw d;
    const auto pos = positive_texts(rs);
    const auto neg = negative_texts(rs);
    for (auto i : sample_without_replacement(pos.size(), static_cast<std::size_t>(n), rng)) d.positives.push_back(pos[i]);
    for (auto i : sample_without_replacement(neg.size(), static_cast<std::size_t>(n), rng)) d.negatives.push_back(neg[i]);
    return d;
}

/// Phase-I loss nll + alpha * L_mca for fixed drawn rationales. The rationale
/// embeddings come from the encoder applied to the Phase-II style input.
inline StepLoss phase1_loss(const Model& m, const TrainingExample& ex, const Sample& sample, const McaDraw& draw,
                            const Eigen::RowVectorXd& feature, const MiningConfig& mining, double scale,
                            ModelParams* g, HardSets* hard_out = nullptr) {
    SeqForward f;
    forward_seq(m.params, encode_input(m, ex.input_text), feature, encode_target(m, ex.target_text), f);
    StepLoss loss{f.nll, 0.0};
    if (mining.alpha == 0.0 || draw.positives.empty() || draw.negatives.empty()) {
        if (g) backward_seq(m.params, f, scale, nullptr, *g);
        return loss;
    }
    ContrastiveBatch hidden;
    hidden.pred = f.pooled;
    std::vector<EncoderCache> pos_cache(draw.positives.size()), neg_cache(draw.negatives.size());
    for (std::size_t i = 0; i < draw.positives.size(); ++i)
        hidden.positives.push_back(
            pooled_encoding(m.params, encode_input(m, render_input(sample, &draw.positives[i])), feature, pos_cache[i]));
    for (std::size_t i = 0; i < draw.negatives.size(); ++i)
        hidden.negatives.push_back(
            pooled_encoding(m.params, encode_input(m, render_input(sample, &draw.negatives[i])), feature, neg_cache[i]));
    const McaGradient mg = mca_loss_and_gradient(hidden, m.params.head, mining);
    loss.mca = mg.loss;
    if (hard_out) *hard_out = mg.hard;
    if (!g) return loss;
    const double w = scale * mining.alpha;
    const ColVec d_pred = w * mg.grad_pred_hidden;
    backward_seq(m.params, f, scale, &d_pred, *g);
    if (mg.loss > 0.0) {
        for (auto i : mg.hard.hard_pos_indices)
            pooled_encoding_backward(m.params, pos_cache[i], w * mg.grad_pos_hidden[i], *g);
        for (auto i : mg.hard.hard_neg_indices)
            pooled_encoding_backward(m.params, neg_cache[i], w * mg.grad_neg_hidden[i], *g);
        g->head.weight += w * mg.grad_head.weight;
        g->head.bias += w * mg.grad_head.bias;
    }
    return loss;
}

// --- optimizer --------------------------------------------------------------

struct TrainState {
    Model model;
    ModelParams m1;  // first moments
    ModelParams m2;  // second moments
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    Phase phase = Phase::I;
    std::uint64_t phase_step = 0;  // updates since the last moment reset

    void reset_moments() {
        m1.set_zero();
        m2.set_zero();
        phase_step = 0;
    }

    static TrainState fresh(Model model, std::uint64_t seed) {
        TrainState st;
        st.m1 = ModelParams::zeros(model.cfg, model.vocab.size());
        st.m2 = ModelParams::zeros(model.cfg, model.vocab.size());
        st.model = std::move(model);
        st.seed = seed;
        return st;
    }
};

inline double clip_gradient(ModelParams& g, double max_norm) {
    double sq = 0.0;
    for (const auto& t : g.tensors())
        for (Eigen::Index i = 0; i < t.size; ++i) sq += t.data[i] * t.data[i];
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw NumericFault("non-finite gradient");
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& t : g.tensors())
            for (Eigen::Index i = 0; i < t.size; ++i) t.data[i] *= s;
    }
    return norm;
}

inline void apply_update(TrainState& st, ModelParams& g, const OptimConfig& o) {
    clip_gradient(g, o.clip_norm);
    ++st.step;
    ++st.phase_step;
    auto params = st.model.params.tensors();
    auto grads = g.tensors();
    if (o.kind == "sgd") {
        for (std::size_t k = 0; k < params.size(); ++k)
            for (Eigen::Index i = 0; i < params[k].size; ++i) params[k].data[i] -= o.learning_rate * grads[k].data[i];
        return;
    }
    auto m1 = st.m1.tensors();
    auto m2 = st.m2.tensors();
    const double t = static_cast<double>(st.phase_step);
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k)
        for (Eigen::Index i = 0; i < params[k].size; ++i) {
            const double gi = grads[k].data[i];
            double& a = m1[k].data[i];
            double& b = m2[k].data[i];
            a = o.beta1 * a + (1.0 - o.beta1) * gi;
            b = o.beta2 * b + (1.0 - o.beta2) * gi * gi;
            params[k].data[i] -= o.learning_rate * (a / c1) / (std::sqrt(b / c2) + o.eps);
        }
}

// --- training loop ----------------------------------------------------------

struct EpochMetrics {
    int epoch = 0;  // 1-based over the whole run
    Phase phase = Phase::I;
    double mean_nll = 0.0;
    double mean_mca = 0.0;
    double combined = 0.0;
};

inline nlohmann::ordered_json to_json(const EpochMetrics& e) {
    return {{"epoch", e.epoch},
            {"phase", phase_name(e.phase)},
            {"mean_nll", e.mean_nll},
            {"mean_mca", e.mean_mca},
            {"combined", e.combined}};
}

inline Model init_model(const std::vector<RadSample>& data, const TrainConfig& cfg) {
    Model m;
    m.cfg = cfg.model;
    m.vocab = Vocab::build(corpus_texts(data), cfg.vocab_cap);
    auto rng = substream(cfg.seed, "init");
    m.params = ModelParams::init(cfg.model, m.vocab.size(), rng);
    return m;
}

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Runs the full schedule. On a numeric fault the state keeps the parameters
/// of the last completed update and the fault propagates.
inline void train(TrainState& st, const std::vector<RadSample>& data, const TrainConfig& cfg, FeatureStore& features,
                  const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (data.empty()) throw ConfigError("cannot train on an empty dataset");
    ScheduleConfig sched = cfg.schedule;
    sched.seed = substream(cfg.seed, "schedule")();
    Scheduler scheduler(data, sched);
    auto mining_rng = substream(cfg.seed, "mining");
    const std::size_t n = data.size();
    const auto batch = static_cast<std::size_t>(cfg.optim.batch_size);

    ModelParams grad = ModelParams::zeros(st.model.cfg, st.model.vocab.size());
    std::size_t in_batch = 0, in_epoch = 0;
    int epoch = 0;
    double sum_nll = 0.0, sum_mca = 0.0;
    Phase phase = sched.phase1_epochs > 0 ? Phase::I : Phase::II;
    st.phase = phase;

    while (auto ex = scheduler.next()) {
        if (ex->phase != st.phase) {
            st.phase = ex->phase;
            st.reset_moments();
        }
        const auto& rs = data[ex->source_index];
        const auto& feature = features.get(ex->feature_ref);
        const std::size_t remaining_in_epoch = n - in_epoch;
        const std::size_t this_batch = std::min(batch, in_batch + remaining_in_epoch);
        const double scale = 1.0 / static_cast<double>(this_batch);
        StepLoss l;
        if (ex->phase == Phase::I) {
            const McaDraw draw = draw_rationales(rs, cfg.mining.sample_count, mining_rng);
            l = phase1_loss(st.model, *ex, rs.sample, draw, feature, cfg.mining, scale, &grad);
        } else {
            l = nll_loss(st.model, *ex, feature, scale, &grad);
        }
        sum_nll += l.nll;
        sum_mca += l.mca;
        ++in_batch;
        ++in_epoch;
        if (in_batch == this_batch) {
            apply_update(st, grad, cfg.optim);
            grad.set_zero();
            in_batch = 0;
        }
        if (in_epoch == n) {
            EpochMetrics em;
            em.epoch = ++epoch;
            em.phase = ex->phase;
            em.mean_nll = sum_nll / static_cast<double>(n);
            em.mean_mca = sum_mca / static_cast<double>(n);
            em.combined = ex->phase == Phase::I ? combined_phase1_loss(em.mean_nll, em.mean_mca, cfg.mining.alpha)
                                                : em.mean_nll;
            if (on_epoch) on_epoch(em);
            sum_nll = sum_mca = 0.0;
            in_epoch = 0;
        }
    }
}

// --- inference --------------------------------------------------------------

struct Inference {
    std::string rationale;  // Phase-I output
    std::string conditioned_on;
    std::string output;     // Phase-II output
    char answer_letter = '?';
};

inline char extract_answer_letter(const std::string& output) {
    static const std::regex letter(R"(\(([A-E])\))");
    std::smatch m;
    if (!std::regex_search(output, m, letter)) throw ExtractionFailed(output);
    return m[1].str()[0];
}

/// Drops a leading "The answer is (X)." clause so only the rationale conditions Phase II.
inline std::string strip_answer_clause(const std::string& text) {
    static const std::regex clause(R"(^The answer is \([A-E]\)\.\s*)");
    return std::regex_replace(text, clause, "", std::regex_constants::format_first_only);
}

/// Two-phase greedy inference. `corrupt`, when given, rewrites the generated
/// rationale before it conditions Phase II.
inline Inference infer(const Model& m, const Sample& sample, const Eigen::RowVectorXd& feature,
                       const std::function<std::string(const std::string&)>& corrupt = {}) {
    Inference r;
    r.rationale = m.vocab.decode(
        greedy_decode(m.params, encode_input(m, render_input(sample)), feature, m.cfg.max_target_len - 1));
    const std::string own = strip_answer_clause(r.rationale);
    r.conditioned_on = corrupt ? corrupt(own) : own;
    r.output = m.vocab.decode(greedy_decode(m.params, encode_input(m, render_input(sample, &r.conditioned_on)),
                                            feature, m.cfg.max_target_len - 1));
    r.answer_letter = extract_answer_letter(r.output);
    return r;
}

struct EvalReport {
    std::size_t items = 0;
    std::size_t correct = 0;
    std::size_t extraction_failures = 0;
    std::size_t forced_negative_correct = 0;
    std::size_t forced_negative_extraction_failures = 0;

    double accuracy() const { return items ? static_cast<double>(correct) / static_cast<double>(items) : 0.0; }
    double forced_negative_accuracy() const {
        return items ? static_cast<double>(forced_negative_correct) / static_cast<double>(items) : 0.0;
    }
};

inline nlohmann::ordered_json to_json(const EvalReport& r) {
    return {{"items", r.items},
            {"accuracy", r.accuracy()},
            {"correct", r.correct},
            {"extraction_failures", r.extraction_failures},
            {"forced_negative_accuracy", r.forced_negative_accuracy()},
            {"forced_negative_correct", r.forced_negative_correct},
            {"forced_negative_extraction_failures", r.forced_negative_extraction_failures}};
}

/// Accuracy with the model's own rationale and with that rationale inverted by
/// the rule-based corruptor before Phase II.
inline EvalReport evaluate(const Model& m, const std::vector<Sample>& samples, FeatureStore& features,
                           std::uint64_t seed) {
    EvalReport rep;
    auto rng = substream(seed, "corrupt");
    for (const auto& s : samples) {
        ++rep.items;
        const auto& f = features.get(s.image_feature_ref);
        const char expected = option_letter(s.answer_index);
        try {
            rep.correct += infer(m, s, f).answer_letter == expected;
        } catch (const ExtractionFailed&) {
            ++rep.extraction_failures;
        }
        try {
            auto corrupt = [&](const std::string& r) { return rules::invert(r, s, rng); };
            rep.forced_negative_correct += infer(m, s, f, corrupt).answer_letter == expected;
        } catch (const ExtractionFailed&) {
            ++rep.forced_negative_extraction_failures;
        }
    }
    return rep;
}

// --- checkpoint -------------------------------------------------------------

inline nlohmann::ordered_json to_json(const ModelConfig& c) {
    return {{"d_model", c.d_model},         {"layers", c.layers},
            {"ff_dim", c.ff_dim},           {"proj_dim", c.proj_dim},
            {"feature_dim", c.feature_dim}, {"max_input_len", c.max_input_len},
            {"max_target_len", c.max_target_len}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.d_model = j.at("d_model").get<int>();
    c.layers = j.at("layers").get<int>();
    c.ff_dim = j.at("ff_dim").get<int>();
    c.proj_dim = j.at("proj_dim").get<int>();
    c.feature_dim = j.at("feature_dim").get<int>();
    c.max_input_len = j.at("max_input_len").get<int>();
    c.max_target_len = j.at("max_target_len").get<int>();
    c.validate();
    return c;
}

/// Writes `path` (JSON header) and `path` + ".bin" (one float record per tensor).
inline void save_checkpoint(const Model& m, std::uint64_t step, const std::filesystem::path& path) {
    auto& params = const_cast<ModelParams&>(m.params);
    const auto tensors = params.tensors();
    const auto shapes = m.params.shapes();
    const std::filesystem::path bin_path = path.string() + ".bin";
    std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
    if (!bin) throw IoError("cannot write " + bin_path.string());
    nlohmann::ordered_json header;
    header["format"] = "mind-toy-checkpoint";
    header["version"] = 1;
    header["step"] = step;
    header["model"] = to_json(m.cfg);
    header["vocab_hash"] = m.vocab.hash();
    header["vocab"] = m.vocab.tokens();
    header["weights"] = bin_path.filename().string();
    auto& list = header["tensors"] = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        std::vector<float> values(static_cast<std::size_t>(tensors[k].size));
        for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<float>(tensors[k].data[i]);
        const auto offset = append_float_record(bin, values);
        list.push_back({{"name", tensors[k].name},
                        {"rows", shapes[k].first},
                        {"cols", shapes[k].second},
                        {"offset", offset}});
    }
    bin.close();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << header.dump(2) << '\n';
    if (!out) throw IoError("write failure on " + path.string());
}

struct LoadedCheckpoint {
    Model model;
    std::uint64_t step = 0;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(0, std::string("checkpoint header: ") + e.what());
    }
    if (header.value("format", "") != "mind-toy-checkpoint") throw ParseError(0, "not a checkpoint header");
    LoadedCheckpoint ck;
    ck.step = header.at("step").get<std::uint64_t>();
    ck.model.cfg = model_config_from_json(header.at("model"));
    ck.model.vocab = Vocab(header.at("vocab").get<std::vector<std::string>>());
    if (ck.model.vocab.hash() != header.at("vocab_hash").get<std::string>())
        throw ValidationError("checkpoint vocabulary hash mismatch");
    ck.model.params = ModelParams::zeros(ck.model.cfg, ck.model.vocab.size());
    auto tensors = ck.model.params.tensors();
    const auto shapes = ck.model.params.shapes();
    const auto& list = header.at("tensors");
    if (list.size() != tensors.size()) throw ShapeError("checkpoint tensor count mismatch");
    std::ifstream bin(path.parent_path() / header.at("weights").get<std::string>(), std::ios::binary);
    if (!bin) throw IoError("cannot open checkpoint weights for " + path.string());
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        const auto& t = list[k];
        if (t.at("name").get<std::string>() != tensors[k].name || t.at("rows").get<Eigen::Index>() != shapes[k].first ||
            t.at("cols").get<Eigen::Index>() != shapes[k].second)
            throw ShapeError("checkpoint tensor " + tensors[k].name + " does not match the architecture");
        bin.seekg(static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
        const auto values = read_float_record(bin);
        if (static_cast<Eigen::Index>(values.size()) != tensors[k].size)
            throw ShapeError("checkpoint tensor " + tensors[k].name + " has the wrong length");
        for (std::size_t i = 0; i < values.size(); ++i) tensors[k].data[i] = values[i];
    }
    if (!ck.model.params.all_finite()) throw NumericFault("checkpoint contains non-finite weights");
    return ck;
}

}  // namespace mind::toy
