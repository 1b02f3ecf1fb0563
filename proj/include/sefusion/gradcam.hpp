#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sefusion/image.hpp"
#include "sefusion/model.hpp"
#include "sefusion/ops.hpp"
#include "sefusion/tape.hpp"

namespace sefusion {

enum class CamLayer { F1Att, F2Att, FMerged };

inline CamLayer parse_cam_layer(const std::string& name) {
    if (name == "F1_att") return CamLayer::F1Att;
    if (name == "F2_att") return CamLayer::F2Att;
    if (name == "F_merged") return CamLayer::FMerged;
    throw ConfigError("unknown explanation layer '" + name +
                      "' (expected F1_att, F2_att or F_merged)");
}

inline const char* cam_layer_name(CamLayer l) {
    switch (l) {
        case CamLayer::F1Att: return "F1_att";
        case CamLayer::F2Att: return "F2_att";
        case CamLayer::FMerged: return "F_merged";
    }
    return "?";
}

/// Class-discriminative heatmap: values in [0,1], max-normalized (an
/// identically zero map stays zero).
template <typename T>
struct Heatmap {
    Tensor<T> values;  // [S,S]
    std::string layer;
    int64_t class_id = 0;
    std::vector<T> alphas;  // per-channel weights (spatial mean of d score/d A)
};

/// Grad-CAM over the chosen fused-path layer: alpha_k = spatial mean of
/// d(pre-softmax score)/dA_k; map = relu(sum_k alpha_k A_k), max-normalized
/// and bilinearly resized to the input size.
template <typename T>
Heatmap<T> heatmap(Model<T>& model, const Tensor<T>& image, int64_t class_id,
                   CamLayer layer = CamLayer::FMerged) {
    if (image.shape.rank() != 3 || image.shape.dim(2) != 3)
        throw ShapeError("heatmap expects a single [S,S,3] image");
    if (class_id < 0 || class_id >= model.config.n_classes)
        throw DataError("class id " + std::to_string(class_id) + " out of range for " +
                        std::to_string(model.config.n_classes) + " classes");
    if (!model.config.attention_fusion)
        throw ConfigError("explanation layers require the attention-fusion path");
    for (T v : image.v)
        if (v > T(1) + T(1e-6)) throw DataError("heatmap input is not normalized to [0,1]");

    GradTape<T> tape;
    auto pn = bind_params(tape, model, /*trainable=*/true);
    NodeId x = tape.leaf(image);
    ForwardNodes fn = forward_samples(tape, model, pn, {x}, Mode::Eval, nullptr);

    NodeId target = -1;
    switch (layer) {
        case CamLayer::F1Att: target = fn.f1_att[0]; break;
        case CamLayer::F2Att: target = fn.f2_att[0]; break;
        case CamLayer::FMerged: target = fn.merged[0]; break;
    }

    NodeId score = select(tape, fn.logits, class_id);  // row 0 of [1,n]
    Gradients<T> grads = tape.backward(score);
    const Tensor<T>* da = grads.grad(target);
    const Tensor<T>& a = tape.value(target);
    const int64_t h = a.shape.dim(0), w = a.shape.dim(1), c = a.shape.dim(2);

    Heatmap<T> hm;
    hm.layer = cam_layer_name(layer);
    hm.class_id = class_id;
    hm.alphas.assign(static_cast<size_t>(c), T(0));
    if (da) {
        for (int64_t i = 0; i < h * w; ++i)
            for (int64_t k = 0; k < c; ++k)
                hm.alphas[static_cast<size_t>(k)] += da->v[static_cast<size_t>(i * c + k)];
        for (auto& al : hm.alphas) al /= static_cast<T>(h * w);
    }

    Tensor<T> raw = Tensor<T>::zeros(Shape{h, w});
    T peak = T(0);
    for (int64_t i = 0; i < h * w; ++i) {
        T acc = 0;
        for (int64_t k = 0; k < c; ++k)
            acc += hm.alphas[static_cast<size_t>(k)] * a.v[static_cast<size_t>(i * c + k)];
        const T v = acc > T(0) ? acc : T(0);
        raw.v[static_cast<size_t>(i)] = v;
        peak = std::max(peak, v);
    }
    if (peak > T(0))
        for (auto& v : raw.v) v /= peak;

    const int64_t s = image.shape.dim(0);
    if (h == s && w == s) {
        hm.values = std::move(raw);
        return hm;
    }
    GradTape<T> rt;
    NodeId rn = rt.leaf(Tensor<T>(Shape{h, w, 1}, raw.v));
    const Tensor<T>& resized = rt.value(bilinear_resize(rt, rn, s, image.shape.dim(1)));
    hm.values = Tensor<T>(Shape{s, image.shape.dim(1)}, resized.v);
    return hm;
}

namespace detail {

/// Fixed 4-anchor piecewise-linear colormap: 0 -> blue, midrange ->
/// green/yellow, 1 -> red. Anchors at 0, 0.35, 0.65, 1.
template <typename T>
void heat_color(T t, T rgb[3]) {
    struct Anchor {
        T pos, r, g, b;
    };
    static const Anchor anchors[4] = {
        {T(0.00), T(0), T(0), T(1)},
        {T(0.35), T(0), T(1), T(1)},
        {T(0.65), T(1), T(1), T(0)},
        {T(1.00), T(1), T(0), T(0)},
    };
    t = std::min(std::max(t, T(0)), T(1));
    for (int i = 0; i < 3; ++i) {
        const Anchor &lo = anchors[i], &hi = anchors[i + 1];
        if (t <= hi.pos) {
            const T f = (t - lo.pos) / (hi.pos - lo.pos);
            rgb[0] = lo.r + f * (hi.r - lo.r);
            rgb[1] = lo.g + f * (hi.g - lo.g);
            rgb[2] = lo.b + f * (hi.b - lo.b);
            return;
        }
    }
    rgb[0] = anchors[3].r;
    rgb[1] = anchors[3].g;
    rgb[2] = anchors[3].b;
}

}  // namespace detail

/// Pure colormap rendering of a heatmap (no underlying image).
template <typename T>
Image8 colormap_image(const Heatmap<T>& hm) {
    const int64_t h = hm.values.shape.dim(0), w = hm.values.shape.dim(1);
    Tensor<T> rgb = Tensor<T>::zeros(Shape{h, w, 3});
    for (int64_t i = 0; i < h * w; ++i) {
        T color[3];
        detail::heat_color(hm.values.v[static_cast<size_t>(i)], color);
        for (int64_t k = 0; k < 3; ++k) rgb.v[static_cast<size_t>(i * 3 + k)] = color[k];
    }
    return quantize_u8(rgb);
}

/// (1-alpha) * image + alpha * colormap(heat), quantized round-half-up.
/// The heatmap is resized to the image's extent first when they differ.
template <typename T>
Image8 colormap_overlay(const Tensor<T>& image, const Heatmap<T>& hm, T alpha) {
    if (!(alpha >= T(0) && alpha <= T(1)))
        throw ContractError("overlay alpha must lie in [0,1]");
    if (image.shape.rank() != 3 || image.shape.dim(2) != 3)
        throw ShapeError("overlay image must be [H,W,3]");
    const int64_t h = image.shape.dim(0), w = image.shape.dim(1);

    Tensor<T> heat = hm.values;
    if (heat.shape.dim(0) != h || heat.shape.dim(1) != w) {
        GradTape<T> t;
        NodeId n = t.leaf(Tensor<T>(Shape{heat.shape.dim(0), heat.shape.dim(1), 1}, heat.v));
        const Tensor<T>& r = t.value(bilinear_resize(t, n, h, w));
        heat = Tensor<T>(Shape{h, w}, r.v);
    }

    Tensor<T> out = Tensor<T>::zeros(Shape{h, w, 3});
    for (int64_t i = 0; i < h * w; ++i) {
        T color[3];
        detail::heat_color(heat.v[static_cast<size_t>(i)], color);
        for (int64_t k = 0; k < 3; ++k)
            out.v[static_cast<size_t>(i * 3 + k)] =
                (T(1) - alpha) * image.v[static_cast<size_t>(i * 3 + k)] + alpha * color[k];
    }
    return quantize_u8(out);
}

/// Standards-conformant 8-bit RGB PNG; decode(write(x)) == x.
inline void write_png(const Image8& img, const std::string& path) {
    image::encode_png(img, path);
}

}  // namespace sefusion
