#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sefusion/attention.hpp"
#include "sefusion/layers.hpp"
#include "sefusion/ops.hpp"
#include "sefusion/rng.hpp"
#include "sefusion/tape.hpp"
#include "sefusion/weights_io.hpp"

namespace sefusion {

enum class HeadOrder {
    Algorithm,  // dense -> batch_norm -> dropout (default)
    Prose,      // dense -> dropout -> batch_norm
};

struct BackboneStage {
    int64_t convs = 1;
    int64_t kernel = 3;
    int64_t channels = 0;
    int64_t stride = 2;
};

/// Plain stride-2 conv stack reproducing the two-tap geometry: the shallow
/// tap sits at total stride 16, the deep tap at total stride 32.
struct BackboneConfig {
    std::vector<BackboneStage> stages;
    int64_t shallow_tap = 3;  // stage index producing F1
    int64_t deep_tap = 4;     // stage index producing F2

    void validate(int64_t c1, int64_t c2) const {
        if (shallow_tap < 0 || deep_tap <= shallow_tap ||
            deep_tap >= static_cast<int64_t>(stages.size()))
            throw ConfigError("backbone tap indices are inconsistent");
        int64_t stride = 1;
        for (int64_t i = 0; i <= deep_tap; ++i) {
            stride *= stages[static_cast<size_t>(i)].stride;
            if (i == shallow_tap && stride != 16)
                throw ConfigError("shallow tap must sit at total stride 16, found " +
                                  std::to_string(stride));
        }
        if (stride != 32)
            throw ConfigError("deep tap must sit at total stride 32, found " +
                              std::to_string(stride));
        if (stages[static_cast<size_t>(shallow_tap)].channels != c1)
            throw ConfigError("shallow tap channels must equal C1");
        if (stages[static_cast<size_t>(deep_tap)].channels != c2)
            throw ConfigError("deep tap channels must equal C2");
    }
};

inline BackboneConfig default_backbone(int64_t c1, int64_t c2) {
    BackboneConfig b;
    for (int64_t ch : {int64_t{8}, int64_t{16}, int64_t{32}, c1, c2})
        b.stages.push_back(BackboneStage{1, 3, ch, 2});
    b.shallow_tap = 3;
    b.deep_tap = 4;
    return b;
}

struct ModelConfig {
    int64_t input_size = 64;  // S; any multiple of 32 is accepted at forward time
    int64_t c1 = 64;
    int64_t c2 = 128;
    int64_t r = 16;
    int64_t n_classes = 4;
    int64_t hidden = 512;
    double dropout_rate = 0.5;
    HeadOrder head_order = HeadOrder::Algorithm;
    bool se_shared = false;        // tie the two SE parameter sets
    bool se_bias = true;           // biases on the SE dense pair
    bool attention_fusion = true;  // false = ablation, F1 feeds the head directly
    std::vector<int64_t> stage_channels;  // empty -> {8,16,32,c1,c2}

    void validate() const {
        if (input_size < 32 || input_size % 32 != 0)
            throw ConfigError("input_size must be a positive multiple of 32");
        if (c1 < 1 || c2 < 1) throw ConfigError("channel plan must be positive");
        if (r < 1 || c1 % r != 0)
            throw ConfigError("reduction ratio r=" + std::to_string(r) +
                              " must divide C1=" + std::to_string(c1));
        if (n_classes < 2) throw ConfigError("n_classes must be at least 2");
        if (hidden < 1) throw ConfigError("head width must be positive");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw ConfigError("dropout_rate must lie in [0,1)");
        if (!stage_channels.empty()) {
            if (stage_channels.size() != 5)
                throw ConfigError("stage_channels must list 5 stages");
            if (stage_channels[3] != c1 || stage_channels[4] != c2)
                throw ConfigError("stage_channels must end with C1, C2");
        }
    }

    BackboneConfig backbone() const {
        if (stage_channels.empty()) return default_backbone(c1, c2);
        BackboneConfig b;
        for (int64_t ch : stage_channels) b.stages.push_back(BackboneStage{1, 3, ch, 2});
        b.shallow_tap = 3;
        b.deep_tap = 4;
        return b;
    }
};

/// Trainable parameters live in `params` (the registry: stable sorted names,
/// each tensor exactly once); non-trainable state (BN running statistics)
/// lives in `buffers`.
template <typename T>
struct Model {
    ModelConfig config;
    std::map<std::string, Tensor<T>> params;
    std::map<std::string, Tensor<T>> buffers;

    T bn_momentum = T(0.9);
    T bn_epsilon = T(1e-3);

    const Tensor<T>& param(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end()) throw ContractError("no parameter named " + name);
        return it->second;
    }
};

namespace detail {

inline std::string stage_name(int64_t s, const char* leaf) {
    return "backbone/s" + std::to_string(s) + "/" + leaf;
}

inline std::string se_prefix(const ModelConfig& cfg, int branch) {
    if (cfg.se_shared) return "fusion/se";
    return branch == 1 ? "fusion/se1" : "fusion/se2";
}

}  // namespace detail

/// Build a model with He-uniform conv/dense weights, zero biases, and
/// identity batch-norm, drawn in a fixed parameter order from the `init`
/// sub-stream of `seed`. Bit-identical for a fixed (config, seed).
template <typename T>
Model<T> build(const ModelConfig& config, uint64_t seed) {
    config.validate();
    BackboneConfig bb = config.backbone();
    bb.validate(config.c1, config.c2);

    Model<T> m;
    m.config = config;
    auto rng = SeedStream(seed).rng_for("init");

    const int64_t last_stage = config.attention_fusion ? bb.deep_tap : bb.shallow_tap;
    int64_t cin = 3;
    for (int64_t s = 0; s <= last_stage; ++s) {
        const BackboneStage& st = bb.stages[static_cast<size_t>(s)];
        m.params[detail::stage_name(s, "kernel")] =
            he_uniform<T>(Shape{st.kernel, st.kernel, cin, st.channels},
                          st.kernel * st.kernel * cin, rng);
        m.params[detail::stage_name(s, "bias")] = Tensor<T>::zeros(Shape{st.channels});
        cin = st.channels;
    }

    if (config.attention_fusion) {
        m.params["fusion/align/kernel"] =
            he_uniform<T>(Shape{1, 1, config.c2, config.c1}, config.c2, rng);
        m.params["fusion/align/bias"] = Tensor<T>::zeros(Shape{config.c1});
        const int branches = config.se_shared ? 1 : 2;
        for (int b = 1; b <= branches; ++b) {
            const std::string p = detail::se_prefix(config, b);
            const int64_t mid = config.c1 / config.r;
            m.params[p + "/w1/weight"] = he_uniform<T>(Shape{config.c1, mid}, config.c1, rng);
            m.params[p + "/w2/weight"] = he_uniform<T>(Shape{mid, config.c1}, mid, rng);
            if (config.se_bias) {
                m.params[p + "/w1/bias"] = Tensor<T>::zeros(Shape{mid});
                m.params[p + "/w2/bias"] = Tensor<T>::zeros(Shape{config.c1});
            }
        }
    }

    m.params["head/d1/weight"] = he_uniform<T>(Shape{config.c1, config.hidden}, config.c1, rng);
    m.params["head/d1/bias"] = Tensor<T>::zeros(Shape{config.hidden});
    m.params["head/bn/gamma"] = Tensor<T>::full(Shape{config.hidden}, T(1));
    m.params["head/bn/beta"] = Tensor<T>::zeros(Shape{config.hidden});
    m.params["head/d_out/weight"] =
        he_uniform<T>(Shape{config.hidden, config.n_classes}, config.hidden, rng);
    m.params["head/d_out/bias"] = Tensor<T>::zeros(Shape{config.n_classes});

    m.buffers["head/bn/running_mean"] = Tensor<T>::zeros(Shape{config.hidden});
    m.buffers["head/bn/running_var"] = Tensor<T>::full(Shape{config.hidden}, T(1));
    return m;
}

template <typename T>
int64_t param_count(const Model<T>& m) {
    int64_t n = 0;
    for (const auto& [name, t] : m.params) n += t.numel();
    return n;
}

/// Registry parameters bound onto a tape as leaves, by name.
template <typename T>
std::map<std::string, NodeId> bind_params(GradTape<T>& tape, const Model<T>& m, bool trainable) {
    std::map<std::string, NodeId> nodes;
    for (const auto& [name, t] : m.params) nodes[name] = tape.leaf(t, trainable);
    return nodes;
}

/// Per-sample activation nodes a forward pass exposes for explainability,
/// plus the batched head outputs.
struct ForwardNodes {
    NodeId logits = -1;  // [N, n_classes]
    NodeId probs = -1;   // [N, n_classes]
    std::vector<NodeId> f1, f2, f1_att, f2_att, merged;  // fusion ones empty in ablation mode
};

namespace detail {

template <typename T>
SENodes se_nodes(GradTape<T>& tape, const std::map<std::string, NodeId>& pn,
                 const ModelConfig& cfg, int branch) {
    const std::string p = se_prefix(cfg, branch);
    SENodes n;
    n.w1 = pn.at(p + "/w1/weight");
    n.w2 = pn.at(p + "/w2/weight");
    if (cfg.se_bias) {
        n.b1 = pn.at(p + "/w1/bias");
        n.b2 = pn.at(p + "/w2/bias");
    } else {
        const Tensor<T>& w1 = tape.value(n.w1);
        const Tensor<T>& w2 = tape.value(n.w2);
        n.b1 = tape.leaf(Tensor<T>::zeros(Shape{w1.shape.dim(1)}));
        n.b2 = tape.leaf(Tensor<T>::zeros(Shape{w2.shape.dim(1)}));
    }
    return n;
}

/// Backbone features of one sample: x -> (F1, F2). F2 is -1 in ablation mode.
template <typename T>
std::pair<NodeId, NodeId> backbone_taps(GradTape<T>& tape, const Model<T>& m,
                                        const std::map<std::string, NodeId>& pn, NodeId x) {
    BackboneConfig bb = m.config.backbone();
    const int64_t last_stage = m.config.attention_fusion ? bb.deep_tap : bb.shallow_tap;
    NodeId f1 = -1, f2 = -1;
    NodeId cur = x;
    for (int64_t s = 0; s <= last_stage; ++s) {
        const BackboneStage& st = bb.stages[static_cast<size_t>(s)];
        cur = conv2d(tape, cur, pn.at(stage_name(s, "kernel")), pn.at(stage_name(s, "bias")),
                     st.stride, Padding::Same);
        cur = relu(tape, cur);
        if (s == bb.shallow_tap) f1 = cur;
        if (s == bb.deep_tap) f2 = cur;
    }
    return {f1, f2};
}

}  // namespace detail

/// Head on a batch of pooled vectors [N,C1]: dense(hidden)+relu, then
/// batch-norm and dropout in the configured order, then dense(n_classes)
/// and row-wise softmax.
template <typename T>
std::pair<NodeId, NodeId> head_on_pooled(GradTape<T>& tape, Model<T>& m,
                                         const std::map<std::string, NodeId>& pn, NodeId pooled,
                                         Mode mode, std::mt19937_64* dropout_rng) {
    NodeId h = relu(tape, dense(tape, pooled, pn.at("head/d1/weight"), pn.at("head/d1/bias")));

    auto bn = [&](NodeId v) {
        return batch_norm(tape, v, pn.at("head/bn/gamma"), pn.at("head/bn/beta"),
                          m.buffers.at("head/bn/running_mean"),
                          m.buffers.at("head/bn/running_var"), m.bn_momentum, m.bn_epsilon, mode);
    };
    auto drop = [&](NodeId v) {
        const T rate = static_cast<T>(m.config.dropout_rate);
        if (mode == Mode::Train && rate > T(0)) {
            if (!dropout_rng)
                throw ContractError("train-mode forward with dropout needs an rng");
            return dropout(tape, v, rate, mode, *dropout_rng);
        }
        return v;
    };

    NodeId reg = m.config.head_order == HeadOrder::Algorithm ? drop(bn(h)) : bn(drop(h));
    NodeId logits = dense(tape, reg, pn.at("head/d_out/weight"), pn.at("head/d_out/bias"));
    NodeId probs = softmax_rows(tape, logits);
    return {logits, probs};
}

/// Full forward over per-sample input nodes (each [S,S,3]).
template <typename T>
ForwardNodes forward_samples(GradTape<T>& tape, Model<T>& m,
                             const std::map<std::string, NodeId>& pn,
                             const std::vector<NodeId>& samples, Mode mode,
                             std::mt19937_64* dropout_rng) {
    if (samples.empty()) throw ContractError("forward needs at least one sample");
    ForwardNodes out;
    std::vector<NodeId> pooled;
    pooled.reserve(samples.size());

    for (NodeId x : samples) {
        const Shape& s = tape.value(x).shape;
        if (s.rank() != 3 || s.dim(2) != 3)
            throw ShapeError("forward sample must be [S,S,3], got " + s.str());
        if (s.dim(0) != s.dim(1) || s.dim(0) % 32 != 0)
            throw ShapeError("forward sample extent must be square and divisible by 32");

        auto [f1, f2] = detail::backbone_taps(tape, m, pn, x);
        out.f1.push_back(f1);

        NodeId final_map = f1;
        if (m.config.attention_fusion) {
            out.f2.push_back(f2);
            const Shape& f1s = tape.value(f1).shape;
            NodeId f2p = align_and_upsample(tape, f2, pn.at("fusion/align/kernel"),
                                            pn.at("fusion/align/bias"), f1s.dim(0), f1s.dim(1));
            NodeId f1_att = se_block(tape, f1, detail::se_nodes(tape, pn, m.config, 1));
            NodeId f2_att = se_block(tape, f2p, detail::se_nodes(tape, pn, m.config, 2));
            out.f1_att.push_back(f1_att);
            out.f2_att.push_back(f2_att);
            final_map = fuse(tape, f1_att, f2_att);
            out.merged.push_back(final_map);
        }
        pooled.push_back(global_avg_pool(tape, final_map));
    }

    NodeId g = stack_rows(tape, pooled);
    auto [logits, probs] = head_on_pooled(tape, m, pn, g, mode, dropout_rng);
    out.logits = logits;
    out.probs = probs;
    return out;
}

/// Values of the intermediate maps a forward pass caches per sample.
template <typename T>
struct ActivationsCache {
    std::vector<Tensor<T>> f1, f2, f1_att, f2_att, merged;
};

namespace detail {

template <typename T>
std::vector<NodeId> split_batch(GradTape<T>& tape, const Tensor<T>& batch) {
    if (batch.shape.rank() != 4 || batch.shape.dim(3) != 3)
        throw ShapeError("batch must be [N,S,S,3], got " + batch.shape.str());
    for (T v : batch.v)
        if (v > T(1) + T(1e-6))
            throw DataError("batch is not normalized to [0,1] (found a value > 1 + 1e-6)");
    const int64_t n = batch.shape.dim(0);
    const int64_t per = batch.numel() / n;
    Shape sample_shape{batch.shape.dim(1), batch.shape.dim(2), int64_t{3}};
    std::vector<NodeId> samples;
    samples.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        std::vector<T> vals(batch.v.begin() + static_cast<size_t>(i * per),
                            batch.v.begin() + static_cast<size_t>((i + 1) * per));
        samples.push_back(tape.leaf(Tensor<T>(sample_shape, std::move(vals))));
    }
    return samples;
}

}  // namespace detail

/// Forward a normalized batch [N,S,S,3]; rows of the returned probability
/// matrix each sum to 1. The cache keeps F1/F2/attention/merged values for
/// explainability.
template <typename T>
std::pair<Tensor<T>, ActivationsCache<T>> forward(Model<T>& m, const Tensor<T>& batch, Mode mode,
                                                  std::mt19937_64* dropout_rng = nullptr) {
    GradTape<T> tape;
    auto pn = bind_params(tape, m, /*trainable=*/false);
    auto samples = detail::split_batch(tape, batch);
    ForwardNodes fn = forward_samples(tape, m, pn, samples, mode, dropout_rng);

    ActivationsCache<T> cache;
    auto collect = [&](const std::vector<NodeId>& ids, std::vector<Tensor<T>>& dst) {
        for (NodeId id : ids) dst.push_back(tape.value(id));
    };
    collect(fn.f1, cache.f1);
    collect(fn.f2, cache.f2);
    collect(fn.f1_att, cache.f1_att);
    collect(fn.f2_att, cache.f2_att);
    collect(fn.merged, cache.merged);
    return {tape.value(fn.probs), std::move(cache)};
}

/// Spec-level head op on a single merged map [H,W,C1]: pooled vector ->
/// (logits, probs), both [n_classes].
template <typename T>
std::pair<Tensor<T>, Tensor<T>> head_forward(Model<T>& m, const Tensor<T>& merged, Mode mode,
                                             std::mt19937_64* dropout_rng = nullptr) {
    if (merged.shape.rank() != 3 || merged.shape.dim(2) != m.config.c1)
        throw ShapeError("head_forward input must be [H,W,C1], got " + merged.shape.str());
    GradTape<T> tape;
    auto pn = bind_params(tape, m, false);
    NodeId x = tape.leaf(merged);
    NodeId pooled = global_avg_pool(tape, x);
    NodeId row = reshape(tape, pooled, Shape{1, m.config.c1});
    auto [logits, probs] = head_on_pooled(tape, m, pn, row, mode, dropout_rng);
    Tensor<T> lt = tape.value(logits);
    Tensor<T> pt = tape.value(probs);
    return {Tensor<T>(Shape{m.config.n_classes}, lt.v), Tensor<T>(Shape{m.config.n_classes}, pt.v)};
}

/// Fusion + head on externally supplied tap features (the import path for
/// feature maps exported from a full-scale backbone).
template <typename T>
Tensor<T> forward_features(Model<T>& m, const Tensor<T>& f1, const Tensor<T>& f2, Mode mode,
                           std::mt19937_64* dropout_rng = nullptr) {
    if (!m.config.attention_fusion)
        throw ContractError("feature forward requires attention fusion to be enabled");
    GradTape<T> tape;
    auto pn = bind_params(tape, m, false);
    NodeId n1 = tape.leaf(f1);
    NodeId n2 = tape.leaf(f2);
    const Shape& f1s = f1.shape;
    NodeId f2p = align_and_upsample(tape, n2, pn.at("fusion/align/kernel"),
                                    pn.at("fusion/align/bias"), f1s.dim(0), f1s.dim(1));
    NodeId f1_att = se_block(tape, n1, detail::se_nodes(tape, pn, m.config, 1));
    NodeId f2_att = se_block(tape, f2p, detail::se_nodes(tape, pn, m.config, 2));
    NodeId merged = fuse(tape, f1_att, f2_att);
    NodeId pooled = global_avg_pool(tape, merged);
    NodeId row = reshape(tape, pooled, Shape{1, m.config.c1});
    auto [logits, probs] = head_on_pooled(tape, m, pn, row, mode, dropout_rng);
    (void)logits;
    Tensor<T> pt = tape.value(probs);
    return Tensor<T>(Shape{m.config.n_classes}, pt.v);
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline std::map<std::string, float> config_scalars(const ModelConfig& c) {
    return {
        {"config/input_size", static_cast<float>(c.input_size)},
        {"config/c1", static_cast<float>(c.c1)},
        {"config/c2", static_cast<float>(c.c2)},
        {"config/r", static_cast<float>(c.r)},
        {"config/n_classes", static_cast<float>(c.n_classes)},
        {"config/hidden", static_cast<float>(c.hidden)},
        {"config/dropout_rate", static_cast<float>(c.dropout_rate)},
        {"config/head_order", c.head_order == HeadOrder::Prose ? 1.0f : 0.0f},
        {"config/se_shared", c.se_shared ? 1.0f : 0.0f},
        {"config/se_bias", c.se_bias ? 1.0f : 0.0f},
        {"config/attention_fusion", c.attention_fusion ? 1.0f : 0.0f},
    };
}

}  // namespace detail

template <typename T>
void save_weights(const Model<T>& m, const std::string& path) {
    std::map<std::string, Tensor<float>> entries;
    for (const auto& [name, t] : m.params) entries.emplace(name, t.template cast<float>());
    for (const auto& [name, t] : m.buffers) entries.emplace(name, t.template cast<float>());
    for (const auto& [name, v] : detail::config_scalars(m.config))
        entries.emplace(name, Tensor<float>(Shape{1}, {v}));
    container::write(path, entries);
}

/// Rebuild the model configuration a weight file was saved with.
inline ModelConfig read_embedded_config(const std::string& path) {
    std::map<std::string, Tensor<float>> entries = container::read(path);
    auto get = [&](const char* key) -> float {
        auto it = entries.find(key);
        if (it == entries.end() || it->second.numel() != 1)
            throw FormatError(path + ": no embedded model config (missing " + key + ")");
        return it->second.v[0];
    };
    ModelConfig c;
    c.input_size = static_cast<int64_t>(get("config/input_size"));
    c.c1 = static_cast<int64_t>(get("config/c1"));
    c.c2 = static_cast<int64_t>(get("config/c2"));
    c.r = static_cast<int64_t>(get("config/r"));
    c.n_classes = static_cast<int64_t>(get("config/n_classes"));
    c.hidden = static_cast<int64_t>(get("config/hidden"));
    c.dropout_rate = static_cast<double>(get("config/dropout_rate"));
    c.head_order = get("config/head_order") != 0.0f ? HeadOrder::Prose : HeadOrder::Algorithm;
    c.se_shared = get("config/se_shared") != 0.0f;
    c.se_bias = get("config/se_bias") != 0.0f;
    c.attention_fusion = get("config/attention_fusion") != 0.0f;
    return c;
}

template <typename T>
Model<T> load_weights(const std::string& path, const ModelConfig& config) {
    Model<T> m = build<T>(config, /*seed=*/0);
    std::map<std::string, Tensor<float>> entries = container::read(path);

    auto expect = [&](const std::map<std::string, Tensor<T>>& want) {
        for (const auto& [name, t] : want) {
            auto it = entries.find(name);
            if (it == entries.end())
                throw FormatError(path + ": missing entry " + name);
            if (it->second.shape != t.shape)
                throw FormatError(path + ": entry " + name + " has shape " +
                                  it->second.shape.str() + ", config expects " + t.shape.str());
        }
    };
    expect(m.params);
    expect(m.buffers);
    for (const auto& [name, t] : entries)
        if (!m.params.count(name) && !m.buffers.count(name) && name.rfind("config/", 0) != 0)
            throw FormatError(path + ": unexpected entry " + name);

    for (auto& [name, t] : m.params) t = entries.at(name).template cast<T>();
    for (auto& [name, t] : m.buffers) t = entries.at(name).template cast<T>();
    return m;
}

// ---------------------------------------------------------------------------
// Feature-pair import (f1/<i>, f2/<i>, label/<i> entries in a container)

template <typename T>
struct FeaturePair {
    Tensor<T> f1, f2;
    int64_t label = 0;
};

template <typename T>
std::vector<FeaturePair<T>> import_feature_pairs(const std::string& path) {
    std::map<std::string, Tensor<float>> entries = container::read(path);
    std::vector<FeaturePair<T>> out;
    for (int64_t i = 0;; ++i) {
        const std::string si = std::to_string(i);
        auto f1 = entries.find("f1/" + si);
        auto f2 = entries.find("f2/" + si);
        auto lb = entries.find("label/" + si);
        if (f1 == entries.end() && f2 == entries.end() && lb == entries.end()) {
            if (3 * static_cast<size_t>(i) != entries.size())
                throw FormatError(path + ": stray entries after record " + si);
            break;
        }
        if (f1 == entries.end() || f2 == entries.end() || lb == entries.end())
            throw FormatError(path + ": record " + si + " is incomplete");
        FeaturePair<T> p;
        p.f1 = f1->second.template cast<T>();
        p.f2 = f2->second.template cast<T>();
        if (lb->second.numel() != 1)
            throw FormatError(path + ": label/" + si + " must be a scalar");
        p.label = static_cast<int64_t>(lb->second.v[0]);
        if (!out.empty() &&
            (p.f1.shape != out.front().f1.shape || p.f2.shape != out.front().f2.shape))
            throw FormatError(path + ": record " + si +
                              " has inconsistent feature shapes");
        out.push_back(std::move(p));
    }
    if (out.empty()) throw FormatError(path + ": no feature records found");
    return out;
}

template <typename T>
void export_feature_pairs(const std::string& path, const std::vector<FeaturePair<T>>& pairs) {
    std::map<std::string, Tensor<float>> entries;
    for (size_t i = 0; i < pairs.size(); ++i) {
        const std::string si = std::to_string(i);
        entries.emplace("f1/" + si, pairs[i].f1.template cast<float>());
        entries.emplace("f2/" + si, pairs[i].f2.template cast<float>());
        entries.emplace("label/" + si,
                        Tensor<float>(Shape{1}, {static_cast<float>(pairs[i].label)}));
    }
    container::write(path, entries);
}

}  // namespace sefusion
