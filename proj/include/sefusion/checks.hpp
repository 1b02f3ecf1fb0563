#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sefusion/attention.hpp"
#include "sefusion/gradcheck.hpp"
#include "sefusion/layers.hpp"
#include "sefusion/model.hpp"
#include "sefusion/ops.hpp"
#include "sefusion/rng.hpp"
#include "sefusion/train.hpp"

namespace sefusion {

struct OpCheckResult {
    std::string op;
    double max_rel_err = 0;
    double tol = 1e-6;
    int instances = 0;
    bool pass() const { return max_rel_err < tol; }
};

namespace checks_detail {

using D = double;

inline Tensor<D> rand_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<D> t = Tensor<D>::zeros(std::move(s));
    for (auto& v : t.v) v = uniform_in(rng, lo, hi);
    return t;
}

/// Uniform over [-1,-margin] u [margin,1]; keeps relu arguments away from
/// the kink so central differences stay valid.
inline Tensor<D> rand_away_from_zero(Shape s, std::mt19937_64& rng, double margin = 0.1) {
    Tensor<D> t = Tensor<D>::zeros(std::move(s));
    for (auto& v : t.v) {
        const double mag = uniform_in(rng, margin, 1.0);
        v = (rng() & 1) ? mag : -mag;
    }
    return t;
}

/// Scalar "sum of squares" head for op checks: nonlinear in the op output,
/// so miscalibrated gradients cannot cancel.
template <typename T>
NodeId ssq(GradTape<T>& tape, NodeId x) {
    return sum_all(tape, mul(tape, x, x));
}

using CheckFn = std::function<GradCheckResult<D>(std::mt19937_64&)>;

inline void run_instances(std::vector<OpCheckResult>& out, const std::string& op, double tol,
                          int instances, std::mt19937_64& rng, const CheckFn& one) {
    OpCheckResult r;
    r.op = op;
    r.tol = tol;
    r.instances = instances;
    for (int i = 0; i < instances; ++i) {
        GradCheckResult<D> g = one(rng);
        r.max_rel_err = std::max(r.max_rel_err, static_cast<double>(g.max_rel_err));
    }
    out.push_back(r);
}

}  // namespace checks_detail

/// Central-difference gradient suite across every differentiable operation,
/// in 64-bit mode. Each op appears exactly once; each runs `instances`
/// random cases. `inject_fault` appends a deliberately wrong gradient as a
/// detection self-test.
inline std::vector<OpCheckResult> run_gradient_suite(uint64_t seed, int instances = 5,
                                                     bool inject_fault = false) {
    using namespace checks_detail;
    std::vector<OpCheckResult> out;
    auto rng = SeedStream(seed).rng_for("gradsuite");
    const double eps = 1e-4;
    const double tol = 1e-6;

    run_instances(out, "add", tol, instances, rng, [&](std::mt19937_64& r) {
        const bool broadcast = r() & 1;
        std::vector<Tensor<D>> ps;
        ps.push_back(rand_tensor(Shape{2, 3, 4}, r));
        ps.push_back(broadcast ? rand_tensor(Shape{4}, r) : rand_tensor(Shape{2, 3, 4}, r));
        return grad_check<D>(
            [](GradTape<D>& t, const std::vector<NodeId>& n) {
                return ssq(t, add(t, n[0], n[1]));
            },
            ps, eps);
    });

    run_instances(out, "mul", tol, instances, rng, [&](std::mt19937_64& r) {
        const bool broadcast = r() & 1;
        std::vector<Tensor<D>> ps;
        ps.push_back(rand_tensor(Shape{2, 3, 4}, r));
        ps.push_back(broadcast ? rand_tensor(Shape{4}, r) : rand_tensor(Shape{2, 3, 4}, r));
        return grad_check<D>(
            [](GradTape<D>& t, const std::vector<NodeId>& n) {
                return ssq(t, mul(t, n[0], n[1]));
            },
            ps, eps);
    });

    run_instances(out, "matmul", tol, instances, rng, [&](std::mt19937_64& r) {
        std::vector<Tensor<D>> ps{rand_tensor(Shape{3, 4}, r), rand_tensor(Shape{4, 2}, r)};
        return grad_check<D>(
            [](GradTape<D>& t, const std::vector<NodeId>& n) {
                return ssq(t, matmul(t, n[0], n[1]));
            },
            ps, eps);
    });

    run_instances(out, "reduce_mean", tol, instances, rng, [&](std::mt19937_64& r) {
        const bool all_axes = r() & 1;
        std::vector<Tensor<D>> ps{rand_tensor(Shape{3, 4, 5}, r)};
        return grad_check<D>(
            [all_axes](GradTape<D>& t, const std::vector<NodeId>& n) {
                const std::vector<int64_t> axes =
                    all_axes ? std::vector<int64_t>{0, 1, 2} : std::vector<int64_t>{0, 1};
                return ssq(t, reduce_mean(t, n[0], axes));
            },
            ps, eps);
    });

    run_instances(out, "conv2d", tol, instances, rng, [&](std::mt19937_64& r) {
        const int64_t stride = (r() & 1) ? 1 : 2;
        const Padding pad = (r() & 1) ? Padding::Same : Padding::Valid;
        std::vector<Tensor<D>> ps{rand_tensor(Shape{5, 5, 3}, r),
                                  rand_tensor(Shape{3, 3, 3, 4}, r), rand_tensor(Shape{4}, r)};
        return grad_check<D>(
            [stride, pad](GradTape<D>& t, const std::vector<NodeId>& n) {
                return ssq(t, conv2d(t, n[0], n[1], n[2], stride, pad));
            },
            ps, eps);
    });

    run_instances(out, "dense", tol, instances, rng, [&](std::mt19937_64& r) {
        const bool batched = r() & 1;
        std::vector<Tensor<D>> ps;
        ps.push_back(batched ? rand_tensor(Shape{3, 6}, r) : rand_tensor(Shape{6}, r));
        ps.push_back(rand_tensor(Shape{6, 4}, r));
        ps.push_back(rand_tensor(Shape{4}, r));
        return grad_check<D>(
            [](GradTape<D>& t, const std::vector<NodeId>& n) {
                return ssq(t, dense(t, n[0], n[1], n[2]));
            },
            ps, eps);
    });

    run_instances(out, "relu", tol, instances, rng, [&](std::mt19937_64& r) {
        std::vector<Tensor<D>> ps{rand_away_from_zero(Shape{4, 4}, r)};
        return grad_check<D>(
            [](GradTape<D>& t, const std::vector<NodeId>& n) { return ssq(t, relu(t, n[0])); },
            ps, eps);
    });

    run_instances(out, "sigmoid", tol, instances, rng, [&](std::mt19937_64& r) {
        std::vector<Tensor<D>> ps{rand_tensor(Shape{3, 5}, r, -2.0, 2.0)};
        return grad_check<D>(
            [](GradTape<D>& t, const std::vector<NodeId>& n) { return ssq(t, sigmoid(t, n[0])); },
            ps, eps);
    });

    run_instances(out, "softmax", tol, instances, rng, [&](std::mt19937_64& r) {
        std::vector<Tensor<D>> ps{rand_tensor(Shape{7}, r, -2.0, 2.0)};
        return grad_check<D>(
            [](GradTape<D>& t, const std::vector<NodeId>& n) {
                return ssq(t, activation(t, Activation::Softmax, n[0]));
            },
            ps, eps);
    });

    run_instances(out, "global_avg_pool", tol, instances, rng, [&](std::mt19937_64& r) {
        std::vector<Tensor<D>> ps{rand_tensor(Shape{4, 5, 3}, r)};
        return grad_check<D>(
            [](GradTape<D>& t, const std::vector<NodeId>& n) {
                return ssq(t, global_avg_pool(t, n[0]));
            },
            ps, eps);
    });

    run_instances(out, "batch_norm_train", tol, instances, rng, [&](std::mt19937_64& r) {
        std::vector<Tensor<D>> ps{rand_tensor(Shape{6, 5}, r),
                                  rand_tensor(Shape{5}, r, 0.5, 1.5),
                                  rand_tensor(Shape{5}, r, -0.5, 0.5)};
        return grad_check<D>(
            [](GradTape<D>& t, const std::vector<NodeId>& n) {
                Tensor<D> rm = Tensor<D>::zeros(Shape{5});
                Tensor<D> rv = Tensor<D>::full(Shape{5}, 1.0);
                return ssq(t, batch_norm(t, n[0], n[1], n[2], rm, rv, D(0.99), D(1e-3),
                                         Mode::Train));
            },
            ps, eps);
    });

    run_instances(out, "dropout_train", tol, instances, rng, [&](std::mt19937_64& r) {
        const uint64_t mask_seed = r();
        std::vector<Tensor<D>> ps{rand_tensor(Shape{4, 6}, r)};
        return grad_check<D>(
            [mask_seed](GradTape<D>& t, const std::vector<NodeId>& n) {
                std::mt19937_64 mask_rng(mask_seed);  // same mask on every evaluation
                return ssq(t, dropout(t, n[0], D(0.5), Mode::Train, mask_rng));
            },
            ps, eps);
    });

    run_instances(out, "bilinear_resize", tol, instances, rng, [&](std::mt19937_64& r) {
        const bool up = r() & 1;
        std::vector<Tensor<D>> ps{rand_tensor(Shape{4, 5, 2}, r)};
        return grad_check<D>(
            [up](GradTape<D>& t, const std::vector<NodeId>& n) {
                return ssq(t, bilinear_resize(t, n[0], up ? 7 : 2, up ? 9 : 3));
            },
            ps, eps);
    });

    run_instances(out, "se_excite", tol, instances, rng, [&](std::mt19937_64& r) {
        std::vector<Tensor<D>> ps{rand_tensor(Shape{8}, r), rand_tensor(Shape{8, 2}, r),
                                  rand_tensor(Shape{2}, r), rand_tensor(Shape{2, 8}, r),
                                  rand_tensor(Shape{8}, r)};
        return grad_check<D>(
            [](GradTape<D>& t, const std::vector<NodeId>& n) {
                SENodes se{n[1], n[2], n[3], n[4]};
                return ssq(t, se_excite(t, n[0], se));
            },
            ps, eps);
    });

    run_instances(out, "se_block", tol, instances, rng, [&](std::mt19937_64& r) {
        std::vector<Tensor<D>> ps{rand_tensor(Shape{3, 3, 8}, r), rand_tensor(Shape{8, 2}, r),
                                  rand_tensor(Shape{2}, r), rand_tensor(Shape{2, 8}, r),
                                  rand_tensor(Shape{8}, r)};
        return grad_check<D>(
            [](GradTape<D>& t, const std::vector<NodeId>& n) {
                SENodes se{n[1], n[2], n[3], n[4]};
                return ssq(t, se_block(t, n[0], se));
            },
            ps, eps);
    });

    run_instances(out, "align_and_upsample", tol, instances, rng, [&](std::mt19937_64& r) {
        std::vector<Tensor<D>> ps{rand_tensor(Shape{2, 2, 6}, r),
                                  rand_tensor(Shape{1, 1, 6, 4}, r), rand_tensor(Shape{4}, r)};
        return grad_check<D>(
            [](GradTape<D>& t, const std::vector<NodeId>& n) {
                return ssq(t, align_and_upsample(t, n[0], n[1], n[2], 4, 4));
            },
            ps, eps);
    });

    run_instances(out, "fuse", tol, instances, rng, [&](std::mt19937_64& r) {
        std::vector<Tensor<D>> ps{rand_tensor(Shape{3, 3, 4}, r), rand_tensor(Shape{3, 3, 4}, r)};
        return grad_check<D>(
            [](GradTape<D>& t, const std::vector<NodeId>& n) {
                return ssq(t, fuse(t, n[0], n[1]));
            },
            ps, eps);
    });

    run_instances(out, "head_forward", tol, instances, rng, [&](std::mt19937_64& r) {
        // Real head path (eval-mode batch norm) over grad-checked parameters.
        std::vector<Tensor<D>> ps{rand_tensor(Shape{3, 3, 8}, r),          // merged map
                                  rand_tensor(Shape{8, 8}, r),             // d1 weight
                                  rand_away_from_zero(Shape{8}, r, 0.3),   // d1 bias
                                  rand_tensor(Shape{8}, r, 0.5, 1.5),      // gamma
                                  rand_tensor(Shape{8}, r, -0.5, 0.5),     // beta
                                  rand_tensor(Shape{8, 3}, r),             // d_out weight
                                  rand_tensor(Shape{3}, r)};               // d_out bias
        return grad_check<D>(
            [](GradTape<D>& t, const std::vector<NodeId>& n) {
                Model<D> m;
                m.config.c1 = 8;
                m.config.hidden = 8;
                m.config.n_classes = 3;
                m.config.dropout_rate = 0.0;
                m.buffers["head/bn/running_mean"] = Tensor<D>::zeros(Shape{8});
                m.buffers["head/bn/running_var"] = Tensor<D>::full(Shape{8}, 1.0);
                std::map<std::string, NodeId> pn{
                    {"head/d1/weight", n[1]},    {"head/d1/bias", n[2]},
                    {"head/bn/gamma", n[3]},     {"head/bn/beta", n[4]},
                    {"head/d_out/weight", n[5]}, {"head/d_out/bias", n[6]},
                };
                NodeId pooled = global_avg_pool(t, n[0]);
                NodeId row = reshape(t, pooled, Shape{1, 8});
                auto [logits, probs] = head_on_pooled(t, m, pn, row, Mode::Eval, nullptr);
                (void)logits;
                return ssq(t, probs);
            },
            ps, eps);
    });

    run_instances(out, "cross_entropy", tol, instances, rng, [&](std::mt19937_64& r) {
        // Direct check on simplex rows kept away from the clamp.
        Tensor<D> probs = Tensor<D>::zeros(Shape{3, 4});
        std::vector<int64_t> labels;
        for (int64_t i = 0; i < 3; ++i) {
            double row[4], sum = 0;
            for (auto& v : row) {
                v = uniform_in(r, 0.2, 1.0);
                sum += v;
            }
            for (int64_t c = 0; c < 4; ++c) probs.v[static_cast<size_t>(i * 4 + c)] = row[c] / sum;
            labels.push_back(static_cast<int64_t>(draw_below(r, 4)));
        }
        return grad_check<D>(
            [labels](GradTape<D>& t, const std::vector<NodeId>& n) {
                return cross_entropy(t, n[0], labels);
            },
            {probs}, 1e-5);
    });

    run_instances(out, "softmax_cross_entropy", tol, instances, rng, [&](std::mt19937_64& r) {
        Tensor<D> logits = rand_tensor(Shape{3, 4}, r, -2.0, 2.0);
        std::vector<int64_t> labels;
        for (int64_t i = 0; i < 3; ++i) labels.push_back(static_cast<int64_t>(draw_below(r, 4)));
        return grad_check<D>(
            [labels](GradTape<D>& t, const std::vector<NodeId>& n) {
                return cross_entropy(t, softmax_rows(t, n[0]), labels);
            },
            {logits}, eps);
    });

    // End-to-end tiny model: every registry parameter on a 2-sample batch,
    // batch-norm on the train path (dropout is checked op-level).
    {
        OpCheckResult r;
        r.op = "end_to_end_tiny_model";
        r.tol = 1e-5;
        r.instances = 1;

        ModelConfig cfg;
        cfg.input_size = 32;
        cfg.c1 = 8;
        cfg.c2 = 16;
        cfg.r = 4;
        cfg.n_classes = 3;
        cfg.hidden = 8;
        cfg.dropout_rate = 0.0;
        cfg.stage_channels = {4, 4, 8, 8, 16};
        Model<D> model = build<D>(cfg, seed ^ 0x5eedULL);

        auto img_rng = SeedStream(seed).rng_for("e2e-input");
        std::vector<Tensor<D>> images;
        for (int i = 0; i < 2; ++i)
            images.push_back(rand_tensor(Shape{32, 32, 3}, img_rng, 0.0, 1.0));
        const std::vector<int64_t> labels{0, 2};

        std::vector<std::string> names;
        std::vector<Tensor<D>> ps;
        for (const auto& [name, t] : model.params) {
            names.push_back(name);
            ps.push_back(t);
        }

        GradCheckResult<D> g = grad_check<D>(
            [&](GradTape<D>& t, const std::vector<NodeId>& n) {
                Model<D> m = model;  // fresh running stats per evaluation
                std::map<std::string, NodeId> pn;
                for (size_t i = 0; i < names.size(); ++i) pn[names[i]] = n[i];
                std::vector<NodeId> samples;
                for (const auto& img : images) samples.push_back(t.leaf(img));
                ForwardNodes fn = forward_samples(t, m, pn, samples, Mode::Train, nullptr);
                return cross_entropy(t, fn.probs, labels);
            },
            ps, eps);
        r.max_rel_err = static_cast<double>(g.max_rel_err);
        out.push_back(r);
    }

    if (inject_fault) {
        // Detection self-test: an op whose backward is wrong by 1% must fail.
        OpCheckResult r;
        r.op = "fault_injection(broken_scale)";
        r.tol = tol;
        r.instances = 1;
        auto broken_scale = [](GradTape<D>& t, NodeId x) {
            Tensor<D> outv = t.value(x);
            for (auto& v : outv.v) v *= 2.0;
            return t.record(std::move(outv), {x}, [](GradTape<D>::BackwardCtx& ctx) {
                if (!ctx.parent_grad[0]) return;
                auto& g = ctx.parent_grad[0]->v;
                for (size_t i = 0; i < g.size(); ++i) g[i] += ctx.upstream.v[i] * 2.02;
            });
        };
        GradCheckResult<D> g = grad_check<D>(
            [&](GradTape<D>& t, const std::vector<NodeId>& n) {
                return ssq(t, broken_scale(t, n[0]));
            },
            {rand_tensor(Shape{3, 3}, rng)}, eps);
        r.max_rel_err = static_cast<double>(g.max_rel_err);
        out.push_back(r);
    }

    return out;
}

}  // namespace sefusion
