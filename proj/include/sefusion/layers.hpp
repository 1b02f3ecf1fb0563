#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sefusion/ops.hpp"
#include "sefusion/rng.hpp"
#include "sefusion/tape.hpp"
#include "sefusion/tensor.hpp"

namespace sefusion {

enum class Mode { Train, Eval };
enum class Padding { Same, Valid };
enum class Activation { Relu, Sigmoid, Softmax };

template <typename T>
struct ConvParams {
    Tensor<T> kernel;  // [kh, kw, Cin, Cout]
    Tensor<T> bias;    // [Cout]
    int64_t stride = 1;
    Padding padding = Padding::Same;

    void validate() const {
        if (kernel.shape.rank() != 4)
            throw ShapeError("conv kernel must be [kh,kw,Cin,Cout], got " + kernel.shape.str());
        const int64_t kh = kernel.shape.dim(0), kw = kernel.shape.dim(1);
        if ((kh != 1 && kh != 3) || (kw != 1 && kw != 3))
            throw ShapeError("conv kernel extents must be 1 or 3");
        if (bias.shape.rank() != 1 || bias.shape.dim(0) != kernel.shape.dim(3))
            throw ShapeError("conv bias must be [Cout]");
        if (stride < 1) throw ShapeError("conv stride must be positive");
    }
};

template <typename T>
struct DenseParams {
    Tensor<T> weight;  // [in, out]
    Tensor<T> bias;    // [out]

    void validate() const {
        if (weight.shape.rank() != 2) throw ShapeError("dense weight must be [in,out]");
        if (bias.shape.rank() != 1 || bias.shape.dim(0) != weight.shape.dim(1))
            throw ShapeError("dense bias must be [out]");
    }
};

// Momentum 0.9: running statistics converge within ~50 steps, so eval-mode
// validation metrics are meaningful from the first epochs even on the short
// desk-scale schedules this project targets.
template <typename T>
struct BatchNormParams {
    Tensor<T> gamma;         // [C], trainable
    Tensor<T> beta;          // [C], trainable
    Tensor<T> running_mean;  // [C], state
    Tensor<T> running_var;   // [C], state
    T momentum = T(0.9);
    T epsilon = T(1e-3);
};

/// He-uniform draw: U(-limit, limit) with limit = sqrt(6/fan_in). Draws are
/// made in double and cast, so float and double builds consume the stream
/// identically.
template <typename T>
Tensor<T> he_uniform(Shape shape, int64_t fan_in, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor<T> t = Tensor<T>::zeros(shape);
    for (auto& v : t.v) v = static_cast<T>(uniform_in(rng, -limit, limit));
    return t;
}

template <typename T>
ConvParams<T> make_conv_params(int64_t kh, int64_t kw, int64_t cin, int64_t cout, int64_t stride,
                               Padding padding, std::mt19937_64& rng) {
    ConvParams<T> p;
    p.kernel = he_uniform<T>(Shape{kh, kw, cin, cout}, kh * kw * cin, rng);
    p.bias = Tensor<T>::zeros(Shape{cout});
    p.stride = stride;
    p.padding = padding;
    p.validate();
    return p;
}

template <typename T>
DenseParams<T> make_dense_params(int64_t in, int64_t out, std::mt19937_64& rng) {
    DenseParams<T> p;
    p.weight = he_uniform<T>(Shape{in, out}, in, rng);
    p.bias = Tensor<T>::zeros(Shape{out});
    return p;
}

template <typename T>
BatchNormParams<T> make_batch_norm_params(int64_t c) {
    BatchNormParams<T> p;
    p.gamma = Tensor<T>::full(Shape{c}, T(1));
    p.beta = Tensor<T>::zeros(Shape{c});
    p.running_mean = Tensor<T>::zeros(Shape{c});
    p.running_var = Tensor<T>::full(Shape{c}, T(1));
    return p;
}

namespace detail {

inline int64_t conv_out_extent(int64_t in, int64_t k, int64_t stride, Padding pad) {
    if (pad == Padding::Same) return (in + stride - 1) / stride;  // ceil(in/stride)
    if (in < k) throw ShapeError("conv input smaller than kernel under valid padding");
    return (in - k) / stride + 1;
}

/// Symmetric zero padding, extra pixel on the bottom/right when odd.
inline int64_t conv_pad_before(int64_t in, int64_t out, int64_t k, int64_t stride, Padding pad) {
    if (pad == Padding::Valid) return 0;
    const int64_t total = std::max<int64_t>(0, (out - 1) * stride + k - in);
    return total / 2;
}

}  // namespace detail

/// 2-d cross-correlation (no kernel flip) plus bias.
/// x: [H,W,Cin], kernel: [kh,kw,Cin,Cout], bias: [Cout] -> [H',W',Cout].
template <typename T>
NodeId conv2d(GradTape<T>& tape, NodeId x, NodeId kernel, NodeId bias, int64_t stride,
              Padding padding) {
    const Tensor<T>& tx = tape.value(x);
    const Tensor<T>& tk = tape.value(kernel);
    const Tensor<T>& tb = tape.value(bias);
    if (tx.shape.rank() != 3) throw ShapeError("conv2d input must be [H,W,C]");
    if (tk.shape.rank() != 4) throw ShapeError("conv2d kernel must be [kh,kw,Cin,Cout]");
    const int64_t h = tx.shape.dim(0), w = tx.shape.dim(1), cin = tx.shape.dim(2);
    const int64_t kh = tk.shape.dim(0), kw = tk.shape.dim(1);
    const int64_t kcin = tk.shape.dim(2), cout = tk.shape.dim(3);
    if (cin != kcin)
        throw ShapeError("conv2d: input has " + std::to_string(cin) + " channels, kernel expects " +
                         std::to_string(kcin));
    if (tb.shape.rank() != 1 || tb.shape.dim(0) != cout) throw ShapeError("conv2d: bias must be [Cout]");

    const int64_t oh = detail::conv_out_extent(h, kh, stride, padding);
    const int64_t ow = detail::conv_out_extent(w, kw, stride, padding);
    const int64_t pt = detail::conv_pad_before(h, oh, kh, stride, padding);
    const int64_t pl = detail::conv_pad_before(w, ow, kw, stride, padding);

    Tensor<T> out = Tensor<T>::zeros(Shape{oh, ow, cout});
    for (int64_t i = 0; i < oh; ++i) {
        for (int64_t j = 0; j < ow; ++j) {
            T* orow = &out.v[static_cast<size_t>((i * ow + j) * cout)];
            for (int64_t co = 0; co < cout; ++co) orow[co] = tb.v[static_cast<size_t>(co)];
            for (int64_t u = 0; u < kh; ++u) {
                const int64_t ih = i * stride + u - pt;
                if (ih < 0 || ih >= h) continue;
                for (int64_t v = 0; v < kw; ++v) {
                    const int64_t iw = j * stride + v - pl;
                    if (iw < 0 || iw >= w) continue;
                    const T* xrow = &tx.v[static_cast<size_t>((ih * w + iw) * cin)];
                    const T* krow = &tk.v[static_cast<size_t>(((u * kw + v) * cin) * cout)];
                    for (int64_t ci = 0; ci < cin; ++ci) {
                        const T xv = xrow[ci];
                        const T* kk = krow + ci * cout;
                        for (int64_t co = 0; co < cout; ++co) orow[co] += xv * kk[co];
                    }
                }
            }
        }
    }
    check_finite(out, "conv2d");

    auto backward = [=](typename GradTape<T>::BackwardCtx& ctx) {
        const auto& xv = ctx.in[0]->v;
        const auto& kv = ctx.in[1]->v;
        const auto& up = ctx.upstream.v;
        Tensor<T>* gx = ctx.parent_grad[0];
        Tensor<T>* gk = ctx.parent_grad[1];
        Tensor<T>* gb = ctx.parent_grad[2];
        for (int64_t i = 0; i < oh; ++i) {
            for (int64_t j = 0; j < ow; ++j) {
                const T* urow = &up[static_cast<size_t>((i * ow + j) * cout)];
                if (gb) {
                    for (int64_t co = 0; co < cout; ++co) gb->v[static_cast<size_t>(co)] += urow[co];
                }
                for (int64_t u = 0; u < kh; ++u) {
                    const int64_t ih = i * stride + u - pt;
                    if (ih < 0 || ih >= h) continue;
                    for (int64_t v = 0; v < kw; ++v) {
                        const int64_t iw = j * stride + v - pl;
                        if (iw < 0 || iw >= w) continue;
                        const size_t xoff = static_cast<size_t>((ih * w + iw) * cin);
                        const size_t koff = static_cast<size_t>(((u * kw + v) * cin) * cout);
                        if (gk) {
                            for (int64_t ci = 0; ci < cin; ++ci) {
                                const T xvv = xv[xoff + static_cast<size_t>(ci)];
                                T* gkrow = &gk->v[koff + static_cast<size_t>(ci * cout)];
                                for (int64_t co = 0; co < cout; ++co) gkrow[co] += xvv * urow[co];
                            }
                        }
                        if (gx) {
                            for (int64_t ci = 0; ci < cin; ++ci) {
                                const T* krow = &kv[koff + static_cast<size_t>(ci * cout)];
                                T acc = 0;
                                for (int64_t co = 0; co < cout; ++co) acc += krow[co] * urow[co];
                                gx->v[xoff + static_cast<size_t>(ci)] += acc;
                            }
                        }
                    }
                }
            }
        }
    };
    return tape.record(std::move(out), {x, kernel, bias}, backward);
}

template <typename T>
NodeId conv2d(GradTape<T>& tape, NodeId x, const ConvParams<T>& p) {
    p.validate();
    NodeId k = tape.leaf(p.kernel);
    NodeId b = tape.leaf(p.bias);
    return conv2d(tape, x, k, b, p.stride, p.padding);
}

/// x^T W + b. Accepts a vector [in] or a batch [N,in]; the result keeps the
/// input's rank. Built from matmul + broadcast add, so it inherits their
/// gradients.
template <typename T>
NodeId dense(GradTape<T>& tape, NodeId x, NodeId weight, NodeId bias) {
    const Shape xs = tape.value(x).shape;
    const Shape ws = tape.value(weight).shape;
    if (ws.rank() != 2) throw ShapeError("dense weight must be [in,out]");
    const int64_t in = ws.dim(0), out = ws.dim(1);
    if (xs.rank() == 1) {
        if (xs.dim(0) != in)
            throw ShapeError("dense: input " + xs.str() + " does not match weight " + ws.str());
        NodeId row = reshape(tape, x, Shape{1, in});
        NodeId y = matmul(tape, row, weight);
        NodeId yb = add(tape, y, bias);
        return reshape(tape, yb, Shape{out});
    }
    if (xs.rank() == 2) {
        if (xs.dim(1) != in)
            throw ShapeError("dense: input " + xs.str() + " does not match weight " + ws.str());
        NodeId y = matmul(tape, x, weight);
        return add(tape, y, bias);
    }
    throw ShapeError("dense input must be [in] or [N,in], got " + xs.str());
}

template <typename T>
NodeId dense(GradTape<T>& tape, NodeId x, const DenseParams<T>& p) {
    p.validate();
    NodeId w = tape.leaf(p.weight);
    NodeId b = tape.leaf(p.bias);
    return dense(tape, x, w, b);
}

template <typename T>
NodeId relu(GradTape<T>& tape, NodeId x) {
    Tensor<T> out = tape.value(x);
    for (T& v : out.v) v = v > T(0) ? v : T(0);
    check_finite(out, "relu");
    return tape.record(std::move(out), {x}, [](typename GradTape<T>::BackwardCtx& ctx) {
        if (!ctx.parent_grad[0]) return;
        auto& g = ctx.parent_grad[0]->v;
        const auto& xv = ctx.in[0]->v;
        for (size_t i = 0; i < g.size(); ++i)
            if (xv[i] > T(0)) g[i] += ctx.upstream.v[i];
    });
}

template <typename T>
NodeId sigmoid(GradTape<T>& tape, NodeId x) {
    Tensor<T> out = tape.value(x);
    for (T& v : out.v) {
        if (v >= T(0)) {
            v = T(1) / (T(1) + std::exp(-v));
        } else {
            const T e = std::exp(v);
            v = e / (T(1) + e);
        }
    }
    check_finite(out, "sigmoid");
    return tape.record(std::move(out), {x}, [](typename GradTape<T>::BackwardCtx& ctx) {
        if (!ctx.parent_grad[0]) return;
        auto& g = ctx.parent_grad[0]->v;
        const auto& s = ctx.out.v;
        for (size_t i = 0; i < g.size(); ++i) g[i] += ctx.upstream.v[i] * s[i] * (T(1) - s[i]);
    });
}

/// Row-wise stable softmax over the last axis of [n] or [N,n].
template <typename T>
NodeId softmax_rows(GradTape<T>& tape, NodeId x) {
    const Tensor<T>& tx = tape.value(x);
    if (tx.shape.rank() > 2) throw ShapeError("softmax expects [n] or [N,n]");
    const int64_t n = tx.shape.dim(tx.shape.rank() - 1);
    const int64_t rows = tx.numel() / n;

    Tensor<T> out = tx;
    for (int64_t r = 0; r < rows; ++r) {
        T* row = &out.v[static_cast<size_t>(r * n)];
        T mx = row[0];
        for (int64_t i = 1; i < n; ++i) mx = std::max(mx, row[i]);
        T sum = 0;
        for (int64_t i = 0; i < n; ++i) {
            row[i] = std::exp(row[i] - mx);
            sum += row[i];
        }
        for (int64_t i = 0; i < n; ++i) row[i] /= sum;
    }
    check_finite(out, "softmax");
    return tape.record(std::move(out), {x}, [n, rows](typename GradTape<T>::BackwardCtx& ctx) {
        if (!ctx.parent_grad[0]) return;
        auto& g = ctx.parent_grad[0]->v;
        const auto& s = ctx.out.v;
        const auto& up = ctx.upstream.v;
        for (int64_t r = 0; r < rows; ++r) {
            const size_t base = static_cast<size_t>(r * n);
            T dot = 0;
            for (int64_t i = 0; i < n; ++i) dot += up[base + i] * s[base + i];
            for (int64_t i = 0; i < n; ++i) g[base + i] += s[base + i] * (up[base + i] - dot);
        }
    });
}

/// Public activation entry point. Softmax is restricted to logit vectors
/// here; the batched head uses softmax_rows internally.
template <typename T>
NodeId activation(GradTape<T>& tape, Activation kind, NodeId x) {
    switch (kind) {
        case Activation::Relu:
            return relu(tape, x);
        case Activation::Sigmoid:
            return sigmoid(tape, x);
        case Activation::Softmax:
            if (tape.value(x).shape.rank() != 1)
                throw ShapeError("softmax activation requires a 1-d logit vector, got " +
                                 tape.value(x).shape.str());
            return softmax_rows(tape, x);
    }
    throw ContractError("unknown activation kind");
}

/// z_c = mean over spatial positions of channel c: [H,W,C] -> [C].
template <typename T>
NodeId global_avg_pool(GradTape<T>& tape, NodeId x) {
    if (tape.value(x).shape.rank() != 3)
        throw ShapeError("global_avg_pool input must be [H,W,C], got " +
                         tape.value(x).shape.str());
    return reduce_mean(tape, x, {0, 1});
}

/// Batch normalization over [N,C] with per-feature statistics.
/// Train mode normalizes by batch moments and folds them into the running
/// statistics (mutated through `running_mean/var`); eval mode normalizes by
/// the running statistics.
template <typename T>
NodeId batch_norm(GradTape<T>& tape, NodeId x, NodeId gamma, NodeId beta, Tensor<T>& running_mean,
                  Tensor<T>& running_var, T momentum, T eps, Mode mode) {
    const Tensor<T>& tx = tape.value(x);
    if (tx.shape.rank() != 2) throw ShapeError("batch_norm input must be [N,C]");
    const int64_t n = tx.shape.dim(0), c = tx.shape.dim(1);
    if (tape.value(gamma).shape != Shape{c} || tape.value(beta).shape != Shape{c} ||
        running_mean.shape != Shape{c} || running_var.shape != Shape{c})
        throw ShapeError("batch_norm: parameter channel count does not match input");

    const auto& gv = tape.value(gamma).v;
    const auto& bv = tape.value(beta).v;

    if (mode == Mode::Eval) {
        std::vector<T> invstd(static_cast<size_t>(c));
        for (int64_t j = 0; j < c; ++j)
            invstd[static_cast<size_t>(j)] =
                T(1) / std::sqrt(running_var.v[static_cast<size_t>(j)] + eps);
        Tensor<T> out = tx;
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < c; ++j) {
                const size_t off = static_cast<size_t>(i * c + j);
                out.v[off] = (tx.v[off] - running_mean.v[static_cast<size_t>(j)]) *
                                 invstd[static_cast<size_t>(j)] * gv[static_cast<size_t>(j)] +
                             bv[static_cast<size_t>(j)];
            }
        check_finite(out, "batch_norm");
        std::vector<T> rm = running_mean.v;
        return tape.record(
            std::move(out), {x, gamma, beta},
            [n, c, invstd, rm](typename GradTape<T>::BackwardCtx& ctx) {
                const auto& xv = ctx.in[0]->v;
                const auto& gvv = ctx.in[1]->v;
                const auto& up = ctx.upstream.v;
                for (int64_t i = 0; i < n; ++i)
                    for (int64_t j = 0; j < c; ++j) {
                        const size_t off = static_cast<size_t>(i * c + j);
                        const size_t jj = static_cast<size_t>(j);
                        if (ctx.parent_grad[0]) ctx.parent_grad[0]->v[off] += up[off] * gvv[jj] * invstd[jj];
                        if (ctx.parent_grad[1])
                            ctx.parent_grad[1]->v[jj] += up[off] * (xv[off] - rm[jj]) * invstd[jj];
                        if (ctx.parent_grad[2]) ctx.parent_grad[2]->v[jj] += up[off];
                    }
            });
    }

    if (n < 2) throw ContractError("batch_norm train mode needs a batch of at least 2");

    std::vector<T> mean(static_cast<size_t>(c), T(0)), var(static_cast<size_t>(c), T(0));
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < c; ++j) mean[static_cast<size_t>(j)] += tx.v[static_cast<size_t>(i * c + j)];
    for (auto& m : mean) m /= static_cast<T>(n);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < c; ++j) {
            const T d = tx.v[static_cast<size_t>(i * c + j)] - mean[static_cast<size_t>(j)];
            var[static_cast<size_t>(j)] += d * d;
        }
    for (auto& v : var) v /= static_cast<T>(n);  // biased, like the running estimate

    std::vector<T> invstd(static_cast<size_t>(c));
    for (int64_t j = 0; j < c; ++j)
        invstd[static_cast<size_t>(j)] = T(1) / std::sqrt(var[static_cast<size_t>(j)] + eps);

    std::vector<T> xhat(static_cast<size_t>(n * c));
    Tensor<T> out = tx;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < c; ++j) {
            const size_t off = static_cast<size_t>(i * c + j);
            const size_t jj = static_cast<size_t>(j);
            xhat[off] = (tx.v[off] - mean[jj]) * invstd[jj];
            out.v[off] = xhat[off] * gv[jj] + bv[jj];
        }
    check_finite(out, "batch_norm");

    for (int64_t j = 0; j < c; ++j) {
        const size_t jj = static_cast<size_t>(j);
        running_mean.v[jj] = momentum * running_mean.v[jj] + (T(1) - momentum) * mean[jj];
        running_var.v[jj] = momentum * running_var.v[jj] + (T(1) - momentum) * var[jj];
    }

    return tape.record(
        std::move(out), {x, gamma, beta},
        [n, c, invstd, xhat](typename GradTape<T>::BackwardCtx& ctx) {
            const auto& gvv = ctx.in[1]->v;
            const auto& up = ctx.upstream.v;
            // dL/dx via the batch-statistics chain:
            // dx = invstd * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
            for (int64_t j = 0; j < c; ++j) {
                const size_t jj = static_cast<size_t>(j);
                T sum_dxh = 0, sum_dxh_xh = 0, sum_up = 0;
                for (int64_t i = 0; i < n; ++i) {
                    const size_t off = static_cast<size_t>(i * c + j);
                    const T dxh = up[off] * gvv[jj];
                    sum_dxh += dxh;
                    sum_dxh_xh += dxh * xhat[off];
                    sum_up += up[off];
                }
                if (ctx.parent_grad[0]) {
                    const T m1 = sum_dxh / static_cast<T>(n);
                    const T m2 = sum_dxh_xh / static_cast<T>(n);
                    for (int64_t i = 0; i < n; ++i) {
                        const size_t off = static_cast<size_t>(i * c + j);
                        const T dxh = up[off] * gvv[jj];
                        ctx.parent_grad[0]->v[off] += invstd[jj] * (dxh - m1 - xhat[off] * m2);
                    }
                }
                if (ctx.parent_grad[1]) {
                    T acc = 0;
                    for (int64_t i = 0; i < n; ++i) {
                        const size_t off = static_cast<size_t>(i * c + j);
                        acc += up[off] * xhat[off];
                    }
                    ctx.parent_grad[1]->v[jj] += acc;
                }
                if (ctx.parent_grad[2]) ctx.parent_grad[2]->v[jj] += sum_up;
            }
        });
}

template <typename T>
NodeId batch_norm(GradTape<T>& tape, NodeId x, BatchNormParams<T>& p, Mode mode) {
    NodeId g = tape.leaf(p.gamma);
    NodeId b = tape.leaf(p.beta);
    return batch_norm(tape, x, g, b, p.running_mean, p.running_var, p.momentum, p.epsilon, mode);
}

/// Inverted dropout: train-mode survivors are scaled by 1/(1-rate) so eval
/// mode is the identity.
template <typename T>
NodeId dropout(GradTape<T>& tape, NodeId x, T rate, Mode mode, std::mt19937_64& rng) {
    if (!(rate >= T(0) && rate < T(1))) throw ContractError("dropout rate must lie in [0,1)");
    if (mode == Mode::Eval || rate == T(0)) return scale(tape, x, T(1));

    const Tensor<T>& tx = tape.value(x);
    std::vector<T> mask(tx.v.size());
    const T keep_scale = T(1) / (T(1) - rate);
    for (auto& m : mask) m = uniform01(rng) < static_cast<double>(rate) ? T(0) : keep_scale;

    Tensor<T> out = tx;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= mask[i];
    check_finite(out, "dropout");
    return tape.record(std::move(out), {x}, [mask](typename GradTape<T>::BackwardCtx& ctx) {
        if (!ctx.parent_grad[0]) return;
        auto& g = ctx.parent_grad[0]->v;
        for (size_t i = 0; i < g.size(); ++i) g[i] += ctx.upstream.v[i] * mask[i];
    });
}

/// Bilinear resize with half-pixel centers and edge clamping:
/// src = (dst + 0.5) * (src_extent / dst_extent) - 0.5, clamped to
/// [0, extent-1]; 4-neighbor blend. Resizing to the same size is exactly the
/// identity.
template <typename T>
NodeId bilinear_resize(GradTape<T>& tape, NodeId x, int64_t out_h, int64_t out_w) {
    const Tensor<T>& tx = tape.value(x);
    if (tx.shape.rank() != 3) throw ShapeError("bilinear_resize input must be [H,W,C]");
    if (out_h < 1 || out_w < 1) throw ShapeError("bilinear_resize target extents must be >= 1");
    const int64_t h = tx.shape.dim(0), w = tx.shape.dim(1), c = tx.shape.dim(2);

    struct Corner {
        int64_t lo, hi;
        T frac;
    };
    auto axis_map = [](int64_t src, int64_t dst, int64_t i) {
        const T s = (static_cast<T>(i) + T(0.5)) * (static_cast<T>(src) / static_cast<T>(dst)) -
                    T(0.5);
        const T clamped = std::min(std::max(s, T(0)), static_cast<T>(src - 1));
        const int64_t lo = static_cast<int64_t>(std::floor(clamped));
        const int64_t hi = std::min(lo + 1, src - 1);
        return Corner{lo, hi, clamped - static_cast<T>(lo)};
    };

    std::vector<Corner> ys(static_cast<size_t>(out_h)), xs(static_cast<size_t>(out_w));
    for (int64_t i = 0; i < out_h; ++i) ys[static_cast<size_t>(i)] = axis_map(h, out_h, i);
    for (int64_t j = 0; j < out_w; ++j) xs[static_cast<size_t>(j)] = axis_map(w, out_w, j);

    Tensor<T> out = Tensor<T>::zeros(Shape{out_h, out_w, c});
    for (int64_t i = 0; i < out_h; ++i) {
        const Corner& cy = ys[static_cast<size_t>(i)];
        for (int64_t j = 0; j < out_w; ++j) {
            const Corner& cx = xs[static_cast<size_t>(j)];
            const T w00 = (T(1) - cy.frac) * (T(1) - cx.frac);
            const T w01 = (T(1) - cy.frac) * cx.frac;
            const T w10 = cy.frac * (T(1) - cx.frac);
            const T w11 = cy.frac * cx.frac;
            for (int64_t k = 0; k < c; ++k) {
                const T v = w00 * tx.v[static_cast<size_t>((cy.lo * w + cx.lo) * c + k)] +
                            w01 * tx.v[static_cast<size_t>((cy.lo * w + cx.hi) * c + k)] +
                            w10 * tx.v[static_cast<size_t>((cy.hi * w + cx.lo) * c + k)] +
                            w11 * tx.v[static_cast<size_t>((cy.hi * w + cx.hi) * c + k)];
                out.v[static_cast<size_t>((i * out_w + j) * c + k)] = v;
            }
        }
    }
    check_finite(out, "bilinear_resize");

    return tape.record(std::move(out), {x},
                       [ys, xs, w, c, out_h, out_w](typename GradTape<T>::BackwardCtx& ctx) {
                           if (!ctx.parent_grad[0]) return;
                           auto& g = ctx.parent_grad[0]->v;
                           const auto& up = ctx.upstream.v;
                           for (int64_t i = 0; i < out_h; ++i) {
                               const Corner& cy = ys[static_cast<size_t>(i)];
                               for (int64_t j = 0; j < out_w; ++j) {
                                   const Corner& cx = xs[static_cast<size_t>(j)];
                                   const T w00 = (T(1) - cy.frac) * (T(1) - cx.frac);
                                   const T w01 = (T(1) - cy.frac) * cx.frac;
                                   const T w10 = cy.frac * (T(1) - cx.frac);
                                   const T w11 = cy.frac * cx.frac;
                                   for (int64_t k = 0; k < c; ++k) {
                                       const T u = up[static_cast<size_t>((i * out_w + j) * c + k)];
                                       g[static_cast<size_t>((cy.lo * w + cx.lo) * c + k)] += w00 * u;
                                       g[static_cast<size_t>((cy.lo * w + cx.hi) * c + k)] += w01 * u;
                                       g[static_cast<size_t>((cy.hi * w + cx.lo) * c + k)] += w10 * u;
                                       g[static_cast<size_t>((cy.hi * w + cx.hi) * c + k)] += w11 * u;
                                   }
                               }
                           }
                       });
}

}  // namespace sefusion
