#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sefusion/errors.hpp"
#include "sefusion/image.hpp"
#include "sefusion/layers.hpp"
#include "sefusion/rng.hpp"
#include "sefusion/tensor.hpp"

namespace sefusion {

/// Deterministic listing of `<root>/<class_name>/*.png|*.ppm`. Class ids are
/// dense and follow the lexicographic order of the class directories; sample
/// order is lexicographic by relative path.
struct DatasetIndex {
    std::string root;
    std::vector<std::pair<std::string, int64_t>> samples;  // (relative path, class id)
    std::vector<std::string> class_names;
    int64_t warnings = 0;  // unreadable files skipped during the scan

    int64_t n_classes() const { return static_cast<int64_t>(class_names.size()); }

    std::vector<int64_t> labels() const {
        std::vector<int64_t> out;
        out.reserve(samples.size());
        for (const auto& s : samples) out.push_back(s.second);
        return out;
    }
};

inline DatasetIndex scan_dataset(const std::string& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw IoError(root + " is not a directory");

    DatasetIndex index;
    index.root = root;

    std::vector<std::string> class_dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) throw DataError(root + " has no class subdirectories");

    for (size_t c = 0; c < class_dirs.size(); ++c) {
        std::vector<std::string> files;
        for (const auto& e : fs::directory_iterator(fs::path(root) / class_dirs[c])) {
            if (!e.is_regular_file()) continue;
            const std::string ext = e.path().extension().string();
            if (ext != ".png" && ext != ".ppm") continue;
            std::ifstream probe(e.path(), std::ios::binary);
            if (!probe.good()) {
                ++index.warnings;
                continue;
            }
            files.push_back(class_dirs[c] + "/" + e.path().filename().string());
        }
        std::sort(files.begin(), files.end());
        if (files.empty())
            throw DataError("class directory '" + class_dirs[c] + "' holds no images");
        for (auto& f : files)
            index.samples.emplace_back(std::move(f), static_cast<int64_t>(c));
        index.class_names.push_back(class_dirs[c]);
    }
    return index;
}

/// Bilinear square resize of a normalized [H,W,3] image.
template <typename T>
Tensor<T> resize_to(const Tensor<T>& img, int64_t s) {
    if (img.shape.rank() != 3) throw ShapeError("resize_to expects [H,W,C]");
    if (s < 1) throw ShapeError("resize_to target must be >= 1");
    if (img.shape.dim(0) == s && img.shape.dim(1) == s) return img;
    GradTape<T> tape;
    NodeId x = tape.leaf(img);
    NodeId y = bilinear_resize(tape, x, s, s);
    return tape.value(y);
}

// ---------------------------------------------------------------------------
// Stratified 5-fold 80/10/10 planning

struct FoldPlan {
    struct Fold {
        std::vector<int64_t> train, val, test;
    };
    int64_t k = 5;
    uint64_t seed = 0;
    std::vector<Fold> folds;
};

/// Per class: seed-shuffle the indices, cut them into k contiguous blocks,
/// and give fold f the block's first (smaller) half as test and the second
/// as val; everything outside the block trains. Test sets are therefore
/// disjoint across folds and every subset preserves class proportions to
/// within one sample.
inline FoldPlan stratified_splits(const std::vector<int64_t>& labels, int64_t k, uint64_t seed) {
    if (k < 2) throw ConfigError("fold count must be at least 2, got " + std::to_string(k));
    if (labels.empty()) throw DataError("no samples to split");

    int64_t n_classes = 0;
    for (int64_t l : labels) {
        if (l < 0) throw DataError("negative class id in labels");
        n_classes = std::max(n_classes, l + 1);
    }

    std::vector<std::vector<int64_t>> per_class(static_cast<size_t>(n_classes));
    for (size_t i = 0; i < labels.size(); ++i)
        per_class[static_cast<size_t>(labels[i])].push_back(static_cast<int64_t>(i));

    for (int64_t c = 0; c < n_classes; ++c) {
        const int64_t nc = static_cast<int64_t>(per_class[static_cast<size_t>(c)].size());
        if (nc < 2 * k)
            throw DataError("class " + std::to_string(c) + " has " + std::to_string(nc) +
                            " samples; stratified " + std::to_string(k) + "-fold needs at least " +
                            std::to_string(2 * k));
    }

    auto rng = SeedStream(seed).rng_for("split");
    for (auto& idx : per_class) deterministic_shuffle(idx, rng);

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.folds.resize(static_cast<size_t>(k));

    for (int64_t c = 0; c < n_classes; ++c) {
        const auto& idx = per_class[static_cast<size_t>(c)];
        const int64_t nc = static_cast<int64_t>(idx.size());
        for (int64_t f = 0; f < k; ++f) {
            const int64_t lo = f * nc / k;
            const int64_t hi = (f + 1) * nc / k;
            const int64_t held = hi - lo;
            const int64_t test_len = held / 2;  // test takes the smaller half
            auto& fold = plan.folds[static_cast<size_t>(f)];
            for (int64_t i = lo; i < lo + test_len; ++i) fold.test.push_back(idx[static_cast<size_t>(i)]);
            for (int64_t i = lo + test_len; i < hi; ++i) fold.val.push_back(idx[static_cast<size_t>(i)]);
            for (int64_t i = 0; i < nc; ++i)
                if (i < lo || i >= hi) fold.train.push_back(idx[static_cast<size_t>(i)]);
        }
    }
    for (auto& fold : plan.folds) {
        std::sort(fold.train.begin(), fold.train.end());
        std::sort(fold.val.begin(), fold.val.end());
        std::sort(fold.test.begin(), fold.test.end());
    }
    return plan;
}

/// Text export, one line per sample: `<fold>,<subset>,<index>,<class_id>`.
inline void write_foldplan(const FoldPlan& plan, const std::vector<int64_t>& labels,
                           const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (size_t f = 0; f < plan.folds.size(); ++f) {
        auto dump = [&](const char* subset, const std::vector<int64_t>& idx) {
            for (int64_t i : idx)
                out << f << ',' << subset << ',' << i << ','
                    << labels[static_cast<size_t>(i)] << '\n';
        };
        dump("train", plan.folds[f].train);
        dump("val", plan.folds[f].val);
        dump("test", plan.folds[f].test);
    }
    if (!out) throw IoError("write failed for " + path);
}

inline FoldPlan read_foldplan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    FoldPlan plan;
    plan.k = 0;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string fold_s, subset, index_s, class_s;
        if (!std::getline(ls, fold_s, ',') || !std::getline(ls, subset, ',') ||
            !std::getline(ls, index_s, ',') || !std::getline(ls, class_s, ','))
            throw FormatError(path + ":" + std::to_string(lineno) + ": malformed fold plan line");
        int64_t f, idx;
        try {
            f = std::stoll(fold_s);
            idx = std::stoll(index_s);
        } catch (const std::exception&) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": malformed fold plan line");
        }
        if (f < 0) throw FormatError(path + ": negative fold index");
        if (f >= static_cast<int64_t>(plan.folds.size()))
            plan.folds.resize(static_cast<size_t>(f) + 1);
        auto& fold = plan.folds[static_cast<size_t>(f)];
        if (subset == "train")
            fold.train.push_back(idx);
        else if (subset == "val")
            fold.val.push_back(idx);
        else if (subset == "test")
            fold.test.push_back(idx);
        else
            throw FormatError(path + ":" + std::to_string(lineno) + ": unknown subset '" + subset +
                              "'");
    }
    plan.k = static_cast<int64_t>(plan.folds.size());
    if (plan.k == 0) throw FormatError(path + ": empty fold plan");
    return plan;
}

// ---------------------------------------------------------------------------
// Synthetic texture dataset (desk-scale stand-in for the real corpora)

struct SynthSpec {
    int64_t n_classes = 4;
    int64_t per_class = 100;
    int64_t size = 64;
    std::string texture = "gratings";

    void validate() const {
        if (n_classes < 2 || n_classes > 99) throw ConfigError("synth classes must lie in [2,99]");
        if (per_class < 1) throw ConfigError("synth per_class must be positive");
        if (size < 32 || size % 32 != 0)
            throw ConfigError("synth size must be a positive multiple of 32");
        if (texture != "gratings") throw ConfigError("unknown texture family '" + texture + "'");
    }
};

struct SynthDataset {
    std::vector<Image8> images;
    std::vector<int64_t> labels;
    std::vector<std::string> class_names;
};

namespace detail {

/// Class texture parameters: distinct orientation/frequency per class.
/// Classes >= 1 are full-image oriented gratings. A class-0 image is a
/// random other class's grating with the top-left quadrant replaced by a
/// plaid (two orthogonal gratings, a texture no other class contains).
/// The background therefore carries no net class-0 signal, so the planted
/// plaid patch is the class's only positive evidence -- the property the
/// explainability checks rely on.
struct GratingParams {
    double freq;
    double angle;
};

inline GratingParams grating_for_class(int64_t c, int64_t n_classes) {
    // Orientations avoid the plaid's axes; frequencies stay low enough to
    // survive the stride-32 downsampling without moire aliasing.
    GratingParams g;
    g.angle = 3.141592653589793 * (static_cast<double>(c) + 0.5) / static_cast<double>(n_classes);
    g.freq = 3.0 + 1.5 * static_cast<double>(c);
    return g;
}

}  // namespace detail

inline SynthDataset synth_dataset(const SynthSpec& spec, uint64_t seed) {
    spec.validate();
    auto rng = SeedStream(seed).rng_for("synth");

    SynthDataset ds;
    for (int64_t c = 0; c < spec.n_classes; ++c) {
        char name[16];
        std::snprintf(name, sizeof(name), "class_%02d", static_cast<int>(c));
        ds.class_names.emplace_back(name);
    }

    const int64_t s = spec.size;
    const double two_pi = 6.283185307179586;
    const double plaid_k = two_pi * 3.0 / static_cast<double>(s);  // class-0 plaid frequency
    for (int64_t c = 0; c < spec.n_classes; ++c) {
        for (int64_t i = 0; i < spec.per_class; ++i) {
            const int64_t texture_class =
                c == 0 ? 1 + static_cast<int64_t>(draw_below(rng, spec.n_classes - 1)) : c;
            const auto g = detail::grating_for_class(texture_class, spec.n_classes);
            const double kx = two_pi * g.freq * std::cos(g.angle) / static_cast<double>(s);
            const double ky = two_pi * g.freq * std::sin(g.angle) / static_cast<double>(s);
            const double phase = uniform_in(rng, 0.0, two_pi);
            const double phase2 = uniform_in(rng, 0.0, two_pi);
            Image8 img;
            img.h = s;
            img.w = s;
            img.rgb.resize(static_cast<size_t>(s * s * 3));
            for (int64_t y = 0; y < s; ++y) {
                for (int64_t x = 0; x < s; ++x) {
                    const bool in_patch = c == 0 && y < s / 2 && x < s / 2;
                    double v = 0.5;
                    if (in_patch) {
                        // Windowed bright plaid blob: evidence mass centered
                        // inside the quadrant, fading to its borders.
                        const double wy = std::sin(3.141592653589793 * (y + 0.5) / (s / 2));
                        const double wx = std::sin(3.141592653589793 * (x + 0.5) / (s / 2));
                        v += 0.1 + 0.35 * wy * wx +
                             0.20 * std::sin(plaid_k * static_cast<double>(x) + phase) +
                             0.20 * std::sin(plaid_k * static_cast<double>(y) + phase2);
                    } else {
                        v += 0.35 * std::sin(kx * static_cast<double>(x) +
                                             ky * static_cast<double>(y) + phase);
                    }
                    v += 0.02 * normal01(rng);
                    v = std::min(std::max(v, 0.0), 1.0);
                    const uint8_t q = static_cast<uint8_t>(std::floor(v * 255.0 + 0.5));
                    img.at(y, x, 0) = q;
                    img.at(y, x, 1) = q;
                    img.at(y, x, 2) = q;
                }
            }
            ds.images.push_back(std::move(img));
            ds.labels.push_back(c);
        }
    }
    return ds;
}

/// Materialize a synthetic dataset as a PNG tree in the standard layout.
inline void write_synth_tree(const SynthDataset& ds, const std::string& root) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create " + root + ": " + ec.message());
    std::vector<int64_t> counter(ds.class_names.size(), 0);
    for (const auto& name : ds.class_names) {
        fs::create_directories(fs::path(root) / name, ec);
        if (ec) throw IoError("cannot create class directory under " + root);
    }
    for (size_t i = 0; i < ds.images.size(); ++i) {
        const int64_t c = ds.labels[i];
        char fname[32];
        std::snprintf(fname, sizeof(fname), "img_%04d.png",
                      static_cast<int>(counter[static_cast<size_t>(c)]++));
        const fs::path p = fs::path(root) / ds.class_names[static_cast<size_t>(c)] / fname;
        image::encode_png(ds.images[i], p.string());
    }
}

}  // namespace sefusion
