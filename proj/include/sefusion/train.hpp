#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sefusion/metrics.hpp"
#include "sefusion/model.hpp"
#include "sefusion/ops.hpp"
#include "sefusion/rng.hpp"
#include "sefusion/tape.hpp"

namespace sefusion {

struct TrainConfig {
    int64_t epochs = 15;
    int64_t batch_size = 16;
    double learning_rate = 1e-4;
    int64_t early_stop_patience = 3;  // 0 disables early stopping
    std::optional<double> lr_plateau_factor;     // e.g. 0.5
    std::optional<int64_t> lr_plateau_patience;  // e.g. 2
    uint64_t seed = 0;

    void validate() const {
        if (epochs < 1) throw ConfigError("train.epochs must be positive");
        if (batch_size < 2) throw ConfigError("train.batch_size must be at least 2");
        if (!(learning_rate > 0)) throw ConfigError("train.learning_rate must be positive");
        if (early_stop_patience < 0) throw ConfigError("train.patience must be >= 0");
        if (lr_plateau_factor.has_value() != lr_plateau_patience.has_value())
            throw ConfigError("lr plateau factor and patience must be set together");
        if (lr_plateau_factor && !(*lr_plateau_factor > 0 && *lr_plateau_factor < 1))
            throw ConfigError("train.lr_factor must lie in (0,1)");
        if (lr_plateau_patience && *lr_plateau_patience < 1)
            throw ConfigError("train.lr_patience must be >= 1");
    }
};

/// Mean over the batch of -log(p_true), p clamped below at 1e-12.
/// probs: [N,n] rows summing to 1 within 1e-5; labels in [0,n).
template <typename T>
NodeId cross_entropy(GradTape<T>& tape, NodeId probs, const std::vector<int64_t>& labels) {
    const Tensor<T>& tp = tape.value(probs);
    if (tp.shape.rank() != 2) throw ShapeError("cross_entropy expects probs [N,n]");
    const int64_t n_samples = tp.shape.dim(0), n_classes = tp.shape.dim(1);
    if (static_cast<int64_t>(labels.size()) != n_samples)
        throw ContractError("cross_entropy: label count does not match batch");

    const T clamp = T(1e-12);
    T loss = 0;
    for (int64_t i = 0; i < n_samples; ++i) {
        if (labels[static_cast<size_t>(i)] < 0 || labels[static_cast<size_t>(i)] >= n_classes)
            throw DataError("cross_entropy: label out of range at sample " + std::to_string(i));
        T row = 0;
        for (int64_t c = 0; c < n_classes; ++c)
            row += tp.v[static_cast<size_t>(i * n_classes + c)];
        if (std::abs(row - T(1)) > T(1e-5))
            throw DataError("cross_entropy: probability row " + std::to_string(i) +
                            " does not sum to 1");
        const T p = tp.v[static_cast<size_t>(i * n_classes + labels[static_cast<size_t>(i)])];
        loss += -std::log(std::max(p, clamp));
    }
    loss /= static_cast<T>(n_samples);

    Tensor<T> out = Tensor<T>::scalar(loss);
    check_finite(out, "cross_entropy");
    std::vector<int64_t> labs = labels;
    return tape.record(
        std::move(out), {probs},
        [labs, n_samples, n_classes, clamp](typename GradTape<T>::BackwardCtx& ctx) {
            if (!ctx.parent_grad[0]) return;
            const T u = ctx.upstream.v[0] / static_cast<T>(n_samples);
            const auto& pv = ctx.in[0]->v;
            for (int64_t i = 0; i < n_samples; ++i) {
                const size_t off =
                    static_cast<size_t>(i * n_classes + labs[static_cast<size_t>(i)]);
                if (pv[off] > clamp) ctx.parent_grad[0]->v[off] += -u / pv[off];
            }
        });
}

/// Eager convenience form.
template <typename T>
T cross_entropy_value(const Tensor<T>& probs, const std::vector<int64_t>& labels) {
    GradTape<T> tape;
    NodeId p = tape.leaf(probs);
    return tape.value(cross_entropy(tape, p, labels)).item();
}

// ---------------------------------------------------------------------------
// Adam

template <typename T>
struct AdamState {
    std::map<std::string, Tensor<T>> m;  // first moments
    std::map<std::string, Tensor<T>> v;  // second moments
    int64_t t = 0;
};

template <typename T>
AdamState<T> init_adam(const Model<T>& model) {
    AdamState<T> s;
    for (const auto& [name, p] : model.params) {
        s.m.emplace(name, Tensor<T>::zeros(p.shape));
        s.v.emplace(name, Tensor<T>::zeros(p.shape));
    }
    return s;
}

/// One bias-corrected Adam update: m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2;
/// p <- p - lr * m_hat / (sqrt(v_hat) + eps). Defaults b1=0.9, b2=0.999, eps=1e-8.
template <typename T>
void adam_step(std::map<std::string, Tensor<T>>& params,
               const std::map<std::string, Tensor<T>>& grads, AdamState<T>& state, T lr,
               T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8)) {
    state.t += 1;
    const T bc1 = T(1) - std::pow(beta1, static_cast<T>(state.t));
    const T bc2 = T(1) - std::pow(beta2, static_cast<T>(state.t));
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) throw ContractError("adam_step: no gradient for " + name);
        const Tensor<T>& g = git->second;
        auto mit = state.m.find(name);
        auto vit = state.v.find(name);
        if (mit == state.m.end() || vit == state.v.end())
            throw ContractError("adam_step: optimizer state missing " + name);
        if (g.shape != p.shape || mit->second.shape != p.shape)
            throw ContractError("adam_step: shape misalignment for " + name);
        auto& m = mit->second.v;
        auto& v = vit->second.v;
        for (size_t i = 0; i < p.v.size(); ++i) {
            m[i] = beta1 * m[i] + (T(1) - beta1) * g.v[i];
            v[i] = beta2 * v[i] + (T(1) - beta2) * g.v[i] * g.v[i];
            const T mhat = m[i] / bc1;
            const T vhat = v[i] / bc2;
            p.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Fold training loop

template <typename T>
struct LabeledData {
    std::vector<Tensor<T>> images;  // each [S,S,3], normalized
    std::vector<int64_t> labels;

    size_t size() const { return images.size(); }
};

template <typename T>
struct EvalResult {
    double loss = 0;
    double acc = 0;
    Tensor<T> probs;  // [N, n_classes]
    std::vector<int64_t> preds;
};

/// Eval-mode pass over a labeled set, batched only for memory locality.
template <typename T>
EvalResult<T> evaluate(Model<T>& model, const LabeledData<T>& data, int64_t batch_size) {
    if (data.size() == 0) throw ContractError("evaluate: empty dataset");
    EvalResult<T> res;
    const int64_t n = static_cast<int64_t>(data.size());
    res.probs = Tensor<T>::zeros(Shape{n, model.config.n_classes});

    for (int64_t start = 0; start < n; start += batch_size) {
        const int64_t stop = std::min(n, start + batch_size);
        GradTape<T> tape;
        auto pn = bind_params(tape, model, false);
        std::vector<NodeId> samples;
        for (int64_t i = start; i < stop; ++i)
            samples.push_back(tape.leaf(data.images[static_cast<size_t>(i)]));
        ForwardNodes fn = forward_samples(tape, model, pn, samples, Mode::Eval, nullptr);
        const Tensor<T>& probs = tape.value(fn.probs);
        for (int64_t i = start; i < stop; ++i)
            for (int64_t c = 0; c < model.config.n_classes; ++c)
                res.probs.v[static_cast<size_t>(i * model.config.n_classes + c)] =
                    probs.v[static_cast<size_t>((i - start) * model.config.n_classes + c)];
    }

    int64_t correct = 0;
    for (int64_t i = 0; i < n; ++i) {
        int64_t best = 0;
        for (int64_t c = 1; c < model.config.n_classes; ++c)
            if (res.probs.v[static_cast<size_t>(i * model.config.n_classes + c)] >
                res.probs.v[static_cast<size_t>(i * model.config.n_classes + best)])
                best = c;
        res.preds.push_back(best);
        correct += (best == data.labels[static_cast<size_t>(i)]) ? 1 : 0;
    }
    res.acc = static_cast<double>(correct) / static_cast<double>(n);
    res.loss = static_cast<double>(cross_entropy_value(res.probs, data.labels));
    return res;
}

struct EpochRecord {
    int64_t epoch = 0;
    double lr = 0;
    double train_loss = 0, train_acc = 0;
    double val_loss = 0, val_acc = 0;
};

template <typename T>
struct TrainResult {
    std::vector<EpochRecord> history;
    int64_t best_epoch = -1;
    double best_val_loss = 0;
    std::map<std::string, Tensor<T>> best_params;
    std::map<std::string, Tensor<T>> best_buffers;
    bool early_stopped = false;
};

/// Train one fold: per-epoch seed-shuffled minibatches, Adam updates,
/// val-loss model selection, optional early stopping and reduce-on-plateau.
/// On return the model holds the best-epoch weights. Deterministic for a
/// fixed (cfg.seed, fold_index) in this single-threaded implementation.
template <typename T>
TrainResult<T> train_fold(Model<T>& model, const LabeledData<T>& train_set,
                          const LabeledData<T>& val_set, const TrainConfig& cfg,
                          int64_t fold_index = 0) {
    cfg.validate();
    if (train_set.size() < 2) throw ConfigError("train set must hold at least 2 samples");
    if (val_set.size() == 0) throw ConfigError("validation set is empty");
    if (train_set.size() != train_set.labels.size() || val_set.size() != val_set.labels.size())
        throw ContractError("labeled data images/labels misaligned");

    SeedStream seeds(cfg.seed);
    auto shuffle_rng = seeds.rng_for("shuffle", static_cast<uint64_t>(fold_index));
    auto dropout_rng = seeds.rng_for("dropout", static_cast<uint64_t>(fold_index));

    AdamState<T> adam = init_adam(model);
    TrainResult<T> result;
    double lr = cfg.learning_rate;
    int64_t epochs_since_best = 0;
    int64_t plateau_counter = 0;

    std::vector<int64_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);

    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        deterministic_shuffle(order, shuffle_rng);

        double loss_sum = 0;
        int64_t correct = 0, seen = 0;
        const int64_t n = static_cast<int64_t>(order.size());
        for (int64_t start = 0; start < n; start += cfg.batch_size) {
            const int64_t stop = std::min(n, start + cfg.batch_size);
            if (stop - start < 2) continue;  // batch-norm needs >= 2; drop the odd remainder

            GradTape<T> tape;
            auto pn = bind_params(tape, model, true);
            std::vector<NodeId> samples;
            std::vector<int64_t> labels;
            for (int64_t i = start; i < stop; ++i) {
                const int64_t idx = order[static_cast<size_t>(i)];
                samples.push_back(tape.leaf(train_set.images[static_cast<size_t>(idx)]));
                labels.push_back(train_set.labels[static_cast<size_t>(idx)]);
            }
            ForwardNodes fn = forward_samples(tape, model, pn, samples, Mode::Train, &dropout_rng);
            NodeId loss = cross_entropy(tape, fn.probs, labels);

            const Tensor<T>& probs = tape.value(fn.probs);
            const int64_t bs = stop - start;
            for (int64_t i = 0; i < bs; ++i) {
                int64_t best = 0;
                for (int64_t c = 1; c < model.config.n_classes; ++c)
                    if (probs.v[static_cast<size_t>(i * model.config.n_classes + c)] >
                        probs.v[static_cast<size_t>(i * model.config.n_classes + best)])
                        best = c;
                correct += (best == labels[static_cast<size_t>(i)]) ? 1 : 0;
            }
            loss_sum += static_cast<double>(tape.value(loss).item()) * static_cast<double>(bs);
            seen += bs;

            Gradients<T> grads = tape.backward(loss);
            std::map<std::string, Tensor<T>> by_name;
            for (const auto& [name, node] : pn) by_name.emplace(name, grads.leaf_grad(node));
            adam_step(model.params, by_name, adam, static_cast<T>(lr));
        }

        EvalResult<T> val = evaluate(model, val_set, cfg.batch_size);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
        rec.train_acc = seen > 0 ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
        rec.val_loss = val.loss;
        rec.val_acc = val.acc;
        result.history.push_back(rec);

        if (result.best_epoch < 0 || val.loss < result.best_val_loss) {
            result.best_epoch = epoch;
            result.best_val_loss = val.loss;
            result.best_params = model.params;
            result.best_buffers = model.buffers;
            epochs_since_best = 0;
            plateau_counter = 0;
        } else {
            ++epochs_since_best;
            ++plateau_counter;
        }

        if (cfg.lr_plateau_factor && plateau_counter >= *cfg.lr_plateau_patience) {
            lr *= *cfg.lr_plateau_factor;
            plateau_counter = 0;
        }
        if (cfg.early_stop_patience > 0 && epochs_since_best >= cfg.early_stop_patience) {
            result.early_stopped = true;
            break;
        }
    }

    model.params = result.best_params;
    model.buffers = result.best_buffers;
    return result;
}

}  // namespace sefusion
