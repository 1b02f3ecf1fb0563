#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "sefusion/tape.hpp"
#include "sefusion/tensor.hpp"

namespace sefusion {

namespace detail {

/// The one broadcast this library supports: a channel vector b of shape [C]
/// (or [1,1,C]) combined with any tensor whose last extent is C. Covers the
/// SE scaling vector, the conv/dense bias, and nothing else.
inline bool channel_broadcastable(const Shape& a, const Shape& b) {
    int64_t c = a.dim(a.rank() - 1);
    if (b.rank() == 1) return b.dim(0) == c && a.rank() > 1;
    if (b.rank() == 3) return b.dim(0) == 1 && b.dim(1) == 1 && b.dim(2) == c;
    return false;
}

}  // namespace detail

/// Element-wise sum. b may be a channel vector broadcast over a's leading
/// axes; its gradient is then summed over those axes.
template <typename T>
NodeId add(GradTape<T>& tape, NodeId a, NodeId b) {
    const Tensor<T>& ta = tape.value(a);
    const Tensor<T>& tb = tape.value(b);

    if (ta.shape == tb.shape) {
        Tensor<T> out = ta;
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += tb.v[i];
        check_finite(out, "add");
        return tape.record(std::move(out), {a, b},
                           [](typename GradTape<T>::BackwardCtx& ctx) {
                               for (int k = 0; k < 2; ++k) {
                                   if (!ctx.parent_grad[k]) continue;
                                   auto& g = ctx.parent_grad[k]->v;
                                   for (size_t i = 0; i < g.size(); ++i) g[i] += ctx.upstream.v[i];
                               }
                           });
    }
    if (detail::channel_broadcastable(ta.shape, tb.shape)) {
        const int64_t c = ta.shape.dim(ta.shape.rank() - 1);
        Tensor<T> out = ta;
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += tb.v[i % c];
        check_finite(out, "add");
        return tape.record(std::move(out), {a, b},
                           [c](typename GradTape<T>::BackwardCtx& ctx) {
                               if (ctx.parent_grad[0]) {
                                   auto& g = ctx.parent_grad[0]->v;
                                   for (size_t i = 0; i < g.size(); ++i) g[i] += ctx.upstream.v[i];
                               }
                               if (ctx.parent_grad[1]) {
                                   auto& g = ctx.parent_grad[1]->v;
                                   for (size_t i = 0; i < ctx.upstream.v.size(); ++i)
                                       g[i % c] += ctx.upstream.v[i];
                               }
                           });
    }
    throw ShapeError("add: incompatible shapes " + ta.shape.str() + " and " + tb.shape.str());
}

/// Element-wise product with the same broadcast rule as add.
template <typename T>
NodeId mul(GradTape<T>& tape, NodeId a, NodeId b) {
    const Tensor<T>& ta = tape.value(a);
    const Tensor<T>& tb = tape.value(b);

    if (ta.shape == tb.shape) {
        Tensor<T> out = ta;
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= tb.v[i];
        check_finite(out, "mul");
        return tape.record(std::move(out), {a, b},
                           [](typename GradTape<T>::BackwardCtx& ctx) {
                               const auto& av = ctx.in[0]->v;
                               const auto& bv = ctx.in[1]->v;
                               if (ctx.parent_grad[0]) {
                                   auto& g = ctx.parent_grad[0]->v;
                                   for (size_t i = 0; i < g.size(); ++i)
                                       g[i] += ctx.upstream.v[i] * bv[i];
                               }
                               if (ctx.parent_grad[1]) {
                                   auto& g = ctx.parent_grad[1]->v;
                                   for (size_t i = 0; i < g.size(); ++i)
                                       g[i] += ctx.upstream.v[i] * av[i];
                               }
                           });
    }
    if (detail::channel_broadcastable(ta.shape, tb.shape)) {
        const int64_t c = ta.shape.dim(ta.shape.rank() - 1);
        Tensor<T> out = ta;
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= tb.v[i % c];
        check_finite(out, "mul");
        return tape.record(std::move(out), {a, b},
                           [c](typename GradTape<T>::BackwardCtx& ctx) {
                               const auto& av = ctx.in[0]->v;
                               const auto& bv = ctx.in[1]->v;
                               if (ctx.parent_grad[0]) {
                                   auto& g = ctx.parent_grad[0]->v;
                                   for (size_t i = 0; i < g.size(); ++i)
                                       g[i] += ctx.upstream.v[i] * bv[i % c];
                               }
                               if (ctx.parent_grad[1]) {
                                   auto& g = ctx.parent_grad[1]->v;
                                   for (size_t i = 0; i < ctx.upstream.v.size(); ++i)
                                       g[i % c] += ctx.upstream.v[i] * av[i];
                               }
                           });
    }
    throw ShapeError("mul: incompatible shapes " + ta.shape.str() + " and " + tb.shape.str());
}

/// [M,K] x [K,N] -> [M,N]. dA = dY.B^T, dB = A^T.dY.
template <typename T>
NodeId matmul(GradTape<T>& tape, NodeId a, NodeId b) {
    const Tensor<T>& ta = tape.value(a);
    const Tensor<T>& tb = tape.value(b);
    if (ta.shape.rank() != 2 || tb.shape.rank() != 2)
        throw ShapeError("matmul expects rank-2 operands, got " + ta.shape.str() + " and " +
                         tb.shape.str());
    const int64_t m = ta.shape.dim(0), k = ta.shape.dim(1);
    const int64_t k2 = tb.shape.dim(0), n = tb.shape.dim(1);
    if (k != k2)
        throw ShapeError("matmul: inner dims disagree, " + ta.shape.str() + " vs " +
                         tb.shape.str());

    Tensor<T> out = Tensor<T>::zeros(Shape{m, n});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t kk = 0; kk < k; ++kk) {
            const T aik = ta.v[static_cast<size_t>(i * k + kk)];
            const T* brow = &tb.v[static_cast<size_t>(kk * n)];
            T* orow = &out.v[static_cast<size_t>(i * n)];
            for (int64_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    check_finite(out, "matmul");

    return tape.record(std::move(out), {a, b}, [m, k, n](typename GradTape<T>::BackwardCtx& ctx) {
        const auto& av = ctx.in[0]->v;
        const auto& bv = ctx.in[1]->v;
        const auto& up = ctx.upstream.v;
        if (ctx.parent_grad[0]) {
            auto& ga = ctx.parent_grad[0]->v;
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < n; ++j) {
                    const T u = up[static_cast<size_t>(i * n + j)];
                    for (int64_t kk = 0; kk < k; ++kk)
                        ga[static_cast<size_t>(i * k + kk)] +=
                            u * bv[static_cast<size_t>(kk * n + j)];
                }
        }
        if (ctx.parent_grad[1]) {
            auto& gb = ctx.parent_grad[1]->v;
            for (int64_t i = 0; i < m; ++i)
                for (int64_t kk = 0; kk < k; ++kk) {
                    const T aik = av[static_cast<size_t>(i * k + kk)];
                    for (int64_t j = 0; j < n; ++j)
                        gb[static_cast<size_t>(kk * n + j)] +=
                            aik * up[static_cast<size_t>(i * n + j)];
                }
        }
    });
}

/// Arithmetic mean over an axis set; each contributing element receives
/// 1/(reduced count) of the upstream gradient.
template <typename T>
NodeId reduce_mean(GradTape<T>& tape, NodeId x, const std::vector<int64_t>& axes) {
    const Tensor<T>& tx = tape.value(x);
    const int64_t rank = tx.shape.rank();
    if (axes.empty()) throw ShapeError("reduce_mean: empty axis set");
    std::set<int64_t> axis_set;
    for (int64_t a : axes) {
        if (a < 0 || a >= rank)
            throw ShapeError("reduce_mean: axis " + std::to_string(a) + " invalid for shape " +
                             tx.shape.str());
        axis_set.insert(a);
    }

    std::vector<int64_t> out_dims;
    int64_t count = 1;
    for (int64_t a = 0; a < rank; ++a) {
        if (axis_set.count(a))
            count *= tx.shape.dim(a);
        else
            out_dims.push_back(tx.shape.dim(a));
    }
    Shape out_shape = out_dims.empty() ? Shape{1} : Shape(out_dims);

    // Row-major strides of x, and the stride each kept axis has in the output.
    std::vector<int64_t> xs(static_cast<size_t>(rank)), os(static_cast<size_t>(rank), 0);
    int64_t acc = 1;
    for (int64_t a = rank - 1; a >= 0; --a) {
        xs[static_cast<size_t>(a)] = acc;
        acc *= tx.shape.dim(a);
    }
    acc = 1;
    for (int64_t a = rank - 1; a >= 0; --a) {
        if (!axis_set.count(a)) {
            os[static_cast<size_t>(a)] = acc;
            acc *= tx.shape.dim(a);
        }
    }

    auto out_offset = [rank, &xs, &os, &tx](int64_t flat) {
        int64_t off = 0;
        for (int64_t a = 0; a < rank; ++a) {
            int64_t idx = (flat / xs[static_cast<size_t>(a)]) % tx.shape.dim(a);
            off += idx * os[static_cast<size_t>(a)];
        }
        return off;
    };

    Tensor<T> out = Tensor<T>::zeros(out_shape);
    for (int64_t i = 0; i < tx.numel(); ++i)
        out.v[static_cast<size_t>(out_offset(i))] += tx.v[static_cast<size_t>(i)];
    const T inv = T(1) / static_cast<T>(count);
    for (T& o : out.v) o *= inv;
    check_finite(out, "reduce_mean");

    // The offset map is recomputed in the closure from copied strides; the
    // input tensor itself is not captured.
    std::vector<int64_t> dims = tx.shape.dims();
    return tape.record(std::move(out), {x},
                       [rank, xs, os, dims, inv](typename GradTape<T>::BackwardCtx& ctx) {
                           if (!ctx.parent_grad[0]) return;
                           auto& g = ctx.parent_grad[0]->v;
                           for (size_t i = 0; i < g.size(); ++i) {
                               int64_t off = 0;
                               for (int64_t a = 0; a < rank; ++a) {
                                   int64_t idx = (static_cast<int64_t>(i) /
                                                  xs[static_cast<size_t>(a)]) %
                                                 dims[static_cast<size_t>(a)];
                                   off += idx * os[static_cast<size_t>(a)];
                               }
                               g[i] += ctx.upstream.v[static_cast<size_t>(off)] * inv;
                           }
                       });
}

/// Sum of every element, as a scalar node.
template <typename T>
NodeId sum_all(GradTape<T>& tape, NodeId x) {
    const Tensor<T>& tx = tape.value(x);
    T s = 0;
    for (T v : tx.v) s += v;
    Tensor<T> out = Tensor<T>::scalar(s);
    check_finite(out, "sum_all");
    return tape.record(std::move(out), {x}, [](typename GradTape<T>::BackwardCtx& ctx) {
        if (!ctx.parent_grad[0]) return;
        for (T& g : ctx.parent_grad[0]->v) g += ctx.upstream.v[0];
    });
}

/// Multiply by a compile-time-known constant.
template <typename T>
NodeId scale(GradTape<T>& tape, NodeId x, T c) {
    Tensor<T> out = tape.value(x);
    for (T& v : out.v) v *= c;
    check_finite(out, "scale");
    return tape.record(std::move(out), {x}, [c](typename GradTape<T>::BackwardCtx& ctx) {
        if (!ctx.parent_grad[0]) return;
        auto& g = ctx.parent_grad[0]->v;
        for (size_t i = 0; i < g.size(); ++i) g[i] += ctx.upstream.v[i] * c;
    });
}

/// Same data, new extents (element count must match). Free in both passes.
template <typename T>
NodeId reshape(GradTape<T>& tape, NodeId x, Shape s) {
    const Tensor<T>& tx = tape.value(x);
    if (s.numel() != tx.numel())
        throw ShapeError("reshape: " + tx.shape.str() + " -> " + s.str() +
                         " changes the element count");
    Tensor<T> out(std::move(s), tx.v);
    return tape.record(std::move(out), {x}, [](typename GradTape<T>::BackwardCtx& ctx) {
        if (!ctx.parent_grad[0]) return;
        auto& g = ctx.parent_grad[0]->v;
        for (size_t i = 0; i < g.size(); ++i) g[i] += ctx.upstream.v[i];
    });
}

/// One element of x as a scalar node (flat row-major index).
template <typename T>
NodeId select(GradTape<T>& tape, NodeId x, int64_t flat_index) {
    const Tensor<T>& tx = tape.value(x);
    if (flat_index < 0 || flat_index >= tx.numel())
        throw ShapeError("select: index " + std::to_string(flat_index) + " out of range for " +
                         tx.shape.str());
    Tensor<T> out = Tensor<T>::scalar(tx.v[static_cast<size_t>(flat_index)]);
    return tape.record(std::move(out), {x}, [flat_index](typename GradTape<T>::BackwardCtx& ctx) {
        if (!ctx.parent_grad[0]) return;
        ctx.parent_grad[0]->v[static_cast<size_t>(flat_index)] += ctx.upstream.v[0];
    });
}

/// Stack N same-shape vectors [C] into [N,C] (lifts per-sample values into a
/// batch). Row k's gradient flows back to parent k.
template <typename T>
NodeId stack_rows(GradTape<T>& tape, const std::vector<NodeId>& rows) {
    if (rows.empty()) throw ShapeError("stack_rows: no rows");
    const Shape& rs = tape.value(rows[0]).shape;
    if (rs.rank() != 1) throw ShapeError("stack_rows expects rank-1 rows, got " + rs.str());
    const int64_t c = rs.dim(0);
    for (NodeId r : rows)
        if (tape.value(r).shape != rs)
            throw ShapeError("stack_rows: mismatched row shapes");

    const int64_t n = static_cast<int64_t>(rows.size());
    Tensor<T> out = Tensor<T>::zeros(Shape{n, c});
    for (int64_t i = 0; i < n; ++i) {
        const auto& rv = tape.value(rows[static_cast<size_t>(i)]).v;
        std::copy(rv.begin(), rv.end(), out.v.begin() + static_cast<size_t>(i * c));
    }
    return tape.record(std::move(out), rows, [c](typename GradTape<T>::BackwardCtx& ctx) {
        for (size_t k = 0; k < ctx.parent_grad.size(); ++k) {
            if (!ctx.parent_grad[k]) continue;
            auto& g = ctx.parent_grad[k]->v;
            const size_t base = k * static_cast<size_t>(c);
            for (size_t i = 0; i < g.size(); ++i) g[i] += ctx.upstream.v[base + i];
        }
    });
}

}  // namespace sefusion
