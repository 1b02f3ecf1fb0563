#pragma once

#include <cstdint>
#include <string>

#include "sefusion/layers.hpp"
#include "sefusion/ops.hpp"
#include "sefusion/tape.hpp"

namespace sefusion {

/// Squeeze-and-excitation block parameters: a C -> C/r -> C bottleneck.
template <typename T>
struct SEParams {
    DenseParams<T> w1;  // [C, C/r]
    DenseParams<T> w2;  // [C/r, C]
    int64_t r = 16;

    int64_t channels() const { return w1.weight.shape.dim(0); }

    void validate() const {
        w1.validate();
        w2.validate();
        const int64_t c = w1.weight.shape.dim(0);
        const int64_t mid = w1.weight.shape.dim(1);
        if (r < 1 || c % r != 0 || mid != c / r)
            throw ShapeError("SE bottleneck must be C -> C/r -> C with C divisible by r");
        if (w2.weight.shape.dim(0) != mid || w2.weight.shape.dim(1) != c)
            throw ShapeError("SE second dense must map C/r back to C");
    }
};

template <typename T>
SEParams<T> make_se_params(int64_t c, int64_t r, std::mt19937_64& rng) {
    if (r < 1 || c % r != 0)
        throw ConfigError("SE reduction ratio " + std::to_string(r) +
                          " must divide the channel count " + std::to_string(c));
    SEParams<T> p;
    p.w1 = make_dense_params<T>(c, c / r, rng);
    p.w2 = make_dense_params<T>(c / r, c, rng);
    p.r = r;
    return p;
}

/// Alignment + two per-branch SE blocks over the C1 channel plan.
template <typename T>
struct FusionParams {
    ConvParams<T> align;  // 1x1, C2 -> C1, stride 1
    SEParams<T> se_f1;
    SEParams<T> se_f2;

    void validate() const {
        align.validate();
        if (align.kernel.shape.dim(0) != 1 || align.kernel.shape.dim(1) != 1)
            throw ShapeError("fusion alignment conv must be 1x1");
        se_f1.validate();
        se_f2.validate();
        if (se_f1.channels() != align.kernel.shape.dim(3) ||
            se_f2.channels() != align.kernel.shape.dim(3))
            throw ShapeError("fusion SE blocks must operate on the aligned channel count");
    }
};

/// Tape-resident SE parameters (leaves or registry nodes).
struct SENodes {
    NodeId w1, b1, w2, b2;
};

/// Excitation: s = sigmoid(W2 . relu(W1 . z)), every s_c in (0,1).
template <typename T>
NodeId se_excite(GradTape<T>& tape, NodeId z, const SENodes& p) {
    const Tensor<T>& tz = tape.value(z);
    if (tz.shape.rank() != 1)
        throw ShapeError("se_excite expects a squeezed channel vector, got " + tz.shape.str());
    if (tz.shape.dim(0) != tape.value(p.w1).shape.dim(0))
        throw ShapeError("se_excite: vector length " + tz.shape.str() +
                         " does not match SE weights " + tape.value(p.w1).shape.str());
    NodeId h = relu(tape, dense(tape, z, p.w1, p.b1));
    return sigmoid(tape, dense(tape, h, p.w2, p.b2));
}

template <typename T>
NodeId se_excite(GradTape<T>& tape, NodeId z, const SEParams<T>& p) {
    p.validate();
    SENodes n{tape.leaf(p.w1.weight), tape.leaf(p.w1.bias), tape.leaf(p.w2.weight),
              tape.leaf(p.w2.bias)};
    return se_excite(tape, z, n);
}

/// Recalibration: channel scales broadcast over the spatial grid. Kept as a
/// separate entry point so tests can inject an arbitrary scale vector.
template <typename T>
NodeId se_recalibrate(GradTape<T>& tape, NodeId feature, NodeId scales) {
    const Tensor<T>& tf = tape.value(feature);
    const Tensor<T>& ts = tape.value(scales);
    if (tf.shape.rank() != 3 || ts.shape.rank() != 1 ||
        ts.shape.dim(0) != tf.shape.dim(2))
        throw ShapeError("se_recalibrate: scales " + ts.shape.str() +
                         " do not match feature channels " + tf.shape.str());
    return mul(tape, feature, scales);
}

/// Full SE block: F_att = excite(gap(F)) (.) F.
template <typename T>
NodeId se_block(GradTape<T>& tape, NodeId feature, const SENodes& p) {
    NodeId z = global_avg_pool(tape, feature);
    NodeId s = se_excite(tape, z, p);
    return se_recalibrate(tape, feature, s);
}

template <typename T>
NodeId se_block(GradTape<T>& tape, NodeId feature, const SEParams<T>& p) {
    p.validate();
    SENodes n{tape.leaf(p.w1.weight), tape.leaf(p.w1.bias), tape.leaf(p.w2.weight),
              tape.leaf(p.w2.bias)};
    return se_block(tape, feature, n);
}

/// Deep-tap alignment: 1x1 conv down to the shallow tap's channel count,
/// then bilinear upsampling to the shallow tap's spatial size.
template <typename T>
NodeId align_and_upsample(GradTape<T>& tape, NodeId f2, NodeId align_kernel, NodeId align_bias,
                          int64_t target_h, int64_t target_w) {
    const Tensor<T>& tk = tape.value(align_kernel);
    if (tk.shape.dim(0) != 1 || tk.shape.dim(1) != 1)
        throw ShapeError("align_and_upsample requires a 1x1 kernel");
    NodeId aligned = conv2d(tape, f2, align_kernel, align_bias, /*stride=*/1, Padding::Same);
    return bilinear_resize(tape, aligned, target_h, target_w);
}

template <typename T>
NodeId align_and_upsample(GradTape<T>& tape, NodeId f2, const FusionParams<T>& p, int64_t target_h,
                          int64_t target_w) {
    p.validate();
    NodeId k = tape.leaf(p.align.kernel);
    NodeId b = tape.leaf(p.align.bias);
    return align_and_upsample(tape, f2, k, b, target_h, target_w);
}

/// Residual attention fusion: element-wise addition of the two refined maps.
template <typename T>
NodeId fuse(GradTape<T>& tape, NodeId f1_att, NodeId f2_att) {
    if (tape.value(f1_att).shape != tape.value(f2_att).shape)
        throw ShapeError("fuse: branch shapes differ, " + tape.value(f1_att).shape.str() +
                         " vs " + tape.value(f2_att).shape.str());
    return add(tape, f1_att, f2_att);
}

}  // namespace sefusion
