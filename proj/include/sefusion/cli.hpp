#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sefusion/checks.hpp"
#include "sefusion/config.hpp"
#include "sefusion/data.hpp"
#include "sefusion/gradcam.hpp"
#include "sefusion/metrics.hpp"
#include "sefusion/model.hpp"
#include "sefusion/train.hpp"

namespace sefusion {

// CLI exit codes (0 = success).
enum ExitCode {
    kExitOk = 0,
    kExitGeneric = 1,
    kExitConfig = 2,
    kExitData = 3,
    kExitFormat = 4,
    kExitIo = 5,
    kExitShape = 6,
    kExitContract = 7,
    kExitState = 8,
};

inline int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::Config: return kExitConfig;
        case ErrorKind::Data: return kExitData;
        case ErrorKind::Format: return kExitFormat;
        case ErrorKind::Io: return kExitIo;
        case ErrorKind::Shape: return kExitShape;
        case ErrorKind::Contract: return kExitContract;
        case ErrorKind::State: return kExitState;
    }
    return kExitGeneric;
}

namespace cli_detail {

using Real = float;

/// Flag values start unset; resolution order is flag > config file > default.
struct Flags {
    std::string config_path;
    std::optional<int64_t> seed;
    std::string out_dir;
    bool deterministic = false;  // accepted for interface stability; runs are
                                 // single-threaded and deterministic regardless

    // synth / data
    std::optional<int64_t> classes, per_class, size;
    std::string root;

    // split / train
    std::optional<int64_t> k;
    std::optional<int64_t> epochs, batch_size, patience;
    std::optional<double> learning_rate;
    std::optional<int64_t> c1, c2, r, hidden;
    std::optional<bool> ablation;
    std::string head_order;

    // evaluate / explain
    std::string weights, foldplan, image;
    std::optional<int64_t> fold;
    std::optional<int64_t> class_id;
    std::string layer = "F_merged";

    // gradcheck
    bool inject_fault = false;
};

struct Resolved {
    KvConfig file;
    Flags flags;

    int64_t geti(const std::string& key, const std::optional<int64_t>& flag,
                 int64_t fallback) const {
        if (flag) return *flag;
        return file.get_int(key, fallback);
    }
    double getr(const std::string& key, const std::optional<double>& flag,
                double fallback) const {
        if (flag) return *flag;
        return file.get_real(key, fallback);
    }
    std::string gets(const std::string& key, const std::string& flag,
                     const std::string& fallback) const {
        if (!flag.empty()) return flag;
        return file.get_str(key, fallback);
    }
    bool getb(const std::string& key, const std::optional<bool>& flag, bool fallback) const {
        if (flag) return *flag;
        return file.get_bool(key, fallback);
    }

    uint64_t require_seed() const {
        if (flags.seed) return static_cast<uint64_t>(*flags.seed);
        if (file.has("seed")) return static_cast<uint64_t>(file.get_int("seed", 0));
        throw ConfigError("seed is mandatory: pass --seed or set 'seed' in the config file");
    }

    std::string out_dir(const std::string& fallback) const {
        return gets("out", flags.out_dir, fallback);
    }
};

inline Resolved resolve(const Flags& flags) {
    Resolved r;
    r.flags = flags;
    if (!flags.config_path.empty()) r.file = KvConfig::from_file(flags.config_path);
    return r;
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

inline ModelConfig model_config_from(const Resolved& r, int64_t input_size, int64_t n_classes) {
    ModelConfig mc;
    mc.input_size = input_size;
    mc.c1 = r.geti("model.c1", r.flags.c1, 64);
    mc.c2 = r.geti("model.c2", r.flags.c2, 128);
    mc.r = r.geti("model.r", r.flags.r, 16);
    mc.hidden = r.geti("model.hidden", r.flags.hidden, 512);
    mc.n_classes = n_classes;
    mc.dropout_rate = r.getr("model.dropout", std::nullopt, 0.5);
    const std::string order =
        r.gets("model.head_order", r.flags.head_order, "algorithm");
    if (order == "algorithm")
        mc.head_order = HeadOrder::Algorithm;
    else if (order == "prose")
        mc.head_order = HeadOrder::Prose;
    else
        throw ConfigError("model.head_order must be 'algorithm' or 'prose', got '" + order + "'");
    mc.se_shared = r.getb("model.se_shared", std::nullopt, false);
    mc.se_bias = r.getb("model.se_bias", std::nullopt, true);
    mc.attention_fusion = !r.getb("model.ablation", r.flags.ablation, false);
    return mc;
}

struct LoadedDataset {
    std::vector<Tensor<Real>> images;  // normalized, resized
    std::vector<int64_t> labels;
    std::vector<std::string> class_names;
    int64_t size = 0;  // square extent
};

inline LoadedDataset load_from_tree(const std::string& root, int64_t resize) {
    DatasetIndex index = scan_dataset(root);
    LoadedDataset ds;
    ds.class_names = index.class_names;
    for (const auto& [rel, cls] : index.samples) {
        Image8 img = decode_image((std::filesystem::path(root) / rel).string());
        Tensor<Real> t = normalize<Real>(img);
        const int64_t target = resize > 0 ? resize : img.h;
        if (img.h != img.w && resize == 0)
            throw DataError(rel + " is not square; pass an explicit size to resize");
        t = resize_to(t, target);
        if (ds.size == 0) ds.size = target;
        if (ds.size != target)
            throw DataError("mixed image sizes in dataset; pass an explicit size");
        ds.images.push_back(std::move(t));
        ds.labels.push_back(cls);
    }
    if (ds.size % 32 != 0)
        throw ConfigError("image size " + std::to_string(ds.size) +
                          " must be a multiple of 32 (use data.size to resize)");
    return ds;
}

inline LoadedDataset load_synth(const Resolved& r, uint64_t seed) {
    SynthSpec spec;
    spec.n_classes = r.geti("data.classes", r.flags.classes, 4);
    spec.per_class = r.geti("data.per_class", r.flags.per_class, 100);
    spec.size = r.geti("data.size", r.flags.size, 64);
    SynthDataset synth = synth_dataset(spec, seed);
    LoadedDataset ds;
    ds.class_names = synth.class_names;
    ds.size = spec.size;
    for (size_t i = 0; i < synth.images.size(); ++i) {
        ds.images.push_back(normalize<Real>(synth.images[i]));
        ds.labels.push_back(synth.labels[i]);
    }
    return ds;
}

template <typename T>
LabeledData<T> subset(const LoadedDataset& ds, const std::vector<int64_t>& idx) {
    LabeledData<T> out;
    for (int64_t i : idx) {
        out.images.push_back(ds.images[static_cast<size_t>(i)]);
        out.labels.push_back(ds.labels[static_cast<size_t>(i)]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_synth(const Resolved& r) {
    const uint64_t seed = r.require_seed();
    SynthSpec spec;
    spec.n_classes = r.geti("data.classes", r.flags.classes, 4);
    spec.per_class = r.geti("data.per_class", r.flags.per_class, 100);
    spec.size = r.geti("data.size", r.flags.size, 64);
    spec.validate();

    const std::string out = r.out_dir("synth_data");
    SynthDataset ds = synth_dataset(spec, seed);
    write_synth_tree(ds, out);

    std::cout << "wrote " << ds.images.size() << " images under " << out << "\n";
    for (size_t c = 0; c < ds.class_names.size(); ++c)
        std::cout << "  " << ds.class_names[c] << ": " << spec.per_class << " x " << spec.size
                  << "x" << spec.size << "\n";
    return kExitOk;
}

inline int cmd_split(const Resolved& r) {
    const uint64_t seed = r.require_seed();
    const std::string root = r.gets("data.root", r.flags.root, "");
    if (root.empty()) throw ConfigError("split needs --root (or data.root)");
    const int64_t k = r.geti("split.k", r.flags.k, 5);
    if (k < 2) throw ConfigError("fold count must be at least 2, got " + std::to_string(k));

    DatasetIndex index = scan_dataset(root);
    FoldPlan plan = stratified_splits(index.labels(), k, seed);

    const std::string out = r.out_dir(".");
    ensure_dir(out);
    const std::string path = (std::filesystem::path(out) / "foldplan.txt").string();
    write_foldplan(plan, index.labels(), path);

    std::cout << "fold plan for " << index.samples.size() << " samples, k=" << k << " -> " << path
              << "\n";
    for (size_t f = 0; f < plan.folds.size(); ++f)
        std::cout << "  fold " << f << ": train " << plan.folds[f].train.size() << ", val "
                  << plan.folds[f].val.size() << ", test " << plan.folds[f].test.size() << "\n";
    return kExitOk;
}

inline TrainConfig train_config_from(const Resolved& r, uint64_t seed) {
    TrainConfig tc;
    tc.epochs = r.geti("train.epochs", r.flags.epochs, 15);
    tc.batch_size = r.geti("train.batch_size", r.flags.batch_size, 16);
    tc.learning_rate = r.getr("train.learning_rate", r.flags.learning_rate, 1e-4);
    tc.early_stop_patience = r.geti("train.patience", r.flags.patience, 3);
    if (r.file.has("train.lr_factor") || r.file.has("train.lr_patience")) {
        tc.lr_plateau_factor = r.file.get_real("train.lr_factor", 0.5);
        tc.lr_plateau_patience = r.file.get_int("train.lr_patience", 2);
    }
    tc.seed = seed;
    tc.validate();
    return tc;
}

inline int cmd_train(const Resolved& r) {
    const uint64_t seed = r.require_seed();
    SeedStream seeds(seed);

    const std::string root = r.gets("data.root", r.flags.root, "");
    const bool synth = root.empty() ? true : r.file.get_bool("data.synth", false);
    LoadedDataset ds = synth ? load_synth(r, seed)
                             : load_from_tree(root, r.geti("data.size", r.flags.size, 0));
    const int64_t n_classes = static_cast<int64_t>(ds.class_names.size());

    const int64_t k = r.geti("split.k", r.flags.k, 5);
    FoldPlan plan = stratified_splits(ds.labels, k, seed);

    ModelConfig mc = model_config_from(r, ds.size, n_classes);
    mc.validate();

    const std::string out = r.out_dir("run");
    ensure_dir(out);
    write_foldplan(plan, ds.labels, (std::filesystem::path(out) / "foldplan.txt").string());

    std::ofstream log((std::filesystem::path(out) / "train_log.jsonl").string(),
                      std::ios::trunc | std::ios::binary);
    if (!log) throw IoError("cannot open training log in " + out);

    std::vector<MetricsReport> fold_reports;
    for (int64_t f = 0; f < k; ++f) {
        const uint64_t fold_seed = seeds.derive("fold", static_cast<uint64_t>(f));
        Model<Real> model = build<Real>(mc, fold_seed);

        auto train_set = subset<Real>(ds, plan.folds[static_cast<size_t>(f)].train);
        auto val_set = subset<Real>(ds, plan.folds[static_cast<size_t>(f)].val);
        auto test_set = subset<Real>(ds, plan.folds[static_cast<size_t>(f)].test);

        TrainConfig tc = train_config_from(r, fold_seed);
        TrainResult<Real> res = train_fold(model, train_set, val_set, tc, f);

        for (const auto& e : res.history) {
            nlohmann::json rec{{"fold", f},
                               {"epoch", e.epoch},
                               {"lr", e.lr},
                               {"train_loss", e.train_loss},
                               {"train_acc", e.train_acc},
                               {"val_loss", e.val_loss},
                               {"val_acc", e.val_acc}};
            log << rec.dump() << "\n";
        }

        char wname[32];
        std::snprintf(wname, sizeof(wname), "fold%d.weights", static_cast<int>(f));
        save_weights(model, (std::filesystem::path(out) / wname).string());

        EvalResult<Real> test = evaluate(model, test_set, tc.batch_size);
        fold_reports.push_back(
            make_metrics_report(test_set.labels, test.preds, test.probs, n_classes));

        std::cout << "fold " << f << ": best epoch " << res.best_epoch << ", val loss "
                  << res.best_val_loss << ", test acc " << fold_reports.back().acc << "\n";
    }
    log.flush();
    if (!log) throw IoError("write failed for training log");

    write_text((std::filesystem::path(out) / "metrics.csv").string(),
               render_report_csv(fold_reports, ds.class_names));
    const std::string table = render_report_table(fold_reports, ds.class_names);
    write_text((std::filesystem::path(out) / "metrics.txt").string(), table);
    std::cout << table;
    return kExitOk;
}

inline int cmd_evaluate(const Resolved& r) {
    if (r.flags.weights.empty()) throw ConfigError("evaluate needs --weights");
    if (r.flags.foldplan.empty()) throw ConfigError("evaluate needs --foldplan");
    if (!r.flags.fold) throw ConfigError("evaluate needs --fold");
    const std::string root = r.gets("data.root", r.flags.root, "");
    if (root.empty()) throw ConfigError("evaluate needs --root (or data.root)");

    ModelConfig mc = read_embedded_config(r.flags.weights);
    if (r.flags.c1) mc.c1 = *r.flags.c1;  // explicit overrides force a consistency check
    if (r.flags.c2) mc.c2 = *r.flags.c2;
    Model<Real> model = load_weights<Real>(r.flags.weights, mc);

    LoadedDataset ds = load_from_tree(root, r.geti("data.size", r.flags.size, 0));
    FoldPlan plan = read_foldplan(r.flags.foldplan);
    const int64_t f = *r.flags.fold;
    if (f < 0 || f >= static_cast<int64_t>(plan.folds.size()))
        throw ConfigError("fold " + std::to_string(f) + " not in plan (k=" +
                          std::to_string(plan.folds.size()) + ")");
    for (int64_t i : plan.folds[static_cast<size_t>(f)].test)
        if (i < 0 || i >= static_cast<int64_t>(ds.images.size()))
            throw FormatError("fold plan index " + std::to_string(i) +
                              " out of range for this dataset");

    auto test_set = subset<Real>(ds, plan.folds[static_cast<size_t>(f)].test);
    EvalResult<Real> res = evaluate(model, test_set, 16);
    MetricsReport report = make_metrics_report(test_set.labels, res.preds, res.probs,
                                               model.config.n_classes);

    const std::string out = r.out_dir(".");
    ensure_dir(out);
    write_text((std::filesystem::path(out) / "metrics.csv").string(),
               render_report_csv({report}, ds.class_names));
    write_text((std::filesystem::path(out) / "confusion.csv").string(),
               render_confusion_csv(report.cm, ds.class_names));

    std::cout << render_report_table({report}, ds.class_names);
    std::cout << "test loss " << res.loss << ", test acc " << res.acc << "\n";
    return kExitOk;
}

inline int cmd_explain(const Resolved& r) {
    if (r.flags.weights.empty()) throw ConfigError("explain needs --weights");
    if (r.flags.image.empty()) throw ConfigError("explain needs --image");

    ModelConfig mc = read_embedded_config(r.flags.weights);
    Model<Real> model = load_weights<Real>(r.flags.weights, mc);
    const CamLayer layer = parse_cam_layer(r.flags.layer);

    Image8 raw = decode_image(r.flags.image);
    Tensor<Real> img = resize_to(normalize<Real>(raw), mc.input_size);

    std::string class_tag;
    int64_t target;
    if (r.flags.class_id) {
        target = *r.flags.class_id;
        if (target < 0 || target >= mc.n_classes)
            throw DataError("class id " + std::to_string(target) + " out of range");
        class_tag = "c" + std::to_string(target);
    } else {
        Tensor<Real> batch(Shape{1, mc.input_size, mc.input_size, 3}, img.v);
        auto [probs, cache] = forward(model, batch, Mode::Eval);
        target = 0;
        for (int64_t c = 1; c < mc.n_classes; ++c)
            if (probs.v[static_cast<size_t>(c)] > probs.v[static_cast<size_t>(target)]) target = c;
        class_tag = "argmax-c" + std::to_string(target);
    }

    Heatmap<Real> hm = heatmap(model, img, target, layer);

    const std::string out = r.out_dir(".");
    ensure_dir(out);
    const std::string stem = std::filesystem::path(r.flags.image).stem().string();
    const std::string base = stem + "_" + class_tag + "_" + hm.layer + "_";
    const auto path = [&](const char* kind) {
        return (std::filesystem::path(out) / (base + kind + ".png")).string();
    };

    write_png(quantize_u8(img), path("orig"));
    write_png(colormap_image(hm), path("heat"));
    write_png(colormap_overlay(img, hm, Real(0.5)), path("overlay"));

    std::cout << "wrote " << path("orig") << "\n      " << path("heat") << "\n      "
              << path("overlay") << "\n";
    return kExitOk;
}

inline int cmd_gradcheck(const Resolved& r) {
    const uint64_t seed =
        r.flags.seed ? static_cast<uint64_t>(*r.flags.seed) : 20240810ull;
    std::vector<OpCheckResult> results =
        run_gradient_suite(seed, 5, r.flags.inject_fault);
    int64_t failures = 0;
    for (const auto& res : results) {
        std::printf("%-28s max rel err %.3e (tol %.0e) %s\n", res.op.c_str(), res.max_rel_err,
                    res.tol, res.pass() ? "PASS" : "FAIL");
        failures += res.pass() ? 0 : 1;
    }
    std::printf("%zu ops checked, %lld failure(s)\n", results.size(),
                static_cast<long long>(failures));
    return failures == 0 ? kExitOk : kExitGeneric;
}

}  // namespace cli_detail

/// Entry point behind tools/: verbs synth | split | train | evaluate |
/// explain | gradcheck with the global flags --config/--seed/--out/
/// --deterministic.
inline int cli_main(int argc, const char* const* argv) {
    using namespace cli_detail;
    CLI::App app{"multi-scale squeeze-excitation fusion classifier"};
    app.require_subcommand(1);

    Flags flags;
    app.add_option("--config", flags.config_path, "key = value config file");
    app.add_option("--seed", flags.seed, "master seed (all randomness derives from it)");
    app.add_option("--out", flags.out_dir, "output directory");
    app.add_flag("--deterministic", flags.deterministic,
                 "single-threaded deterministic mode (always on in this build)");

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic PNG dataset tree");
    synth->add_option("--classes", flags.classes, "number of texture classes");
    synth->add_option("--per-class", flags.per_class, "images per class");
    synth->add_option("--size", flags.size, "square image extent (multiple of 32)");

    CLI::App* split = app.add_subcommand("split", "write a stratified fold plan");
    split->add_option("--root", flags.root, "dataset root (class subdirectories)");
    split->add_option("--k", flags.k, "fold count");

    CLI::App* train = app.add_subcommand("train", "train k folds and report metrics");
    train->add_option("--root", flags.root, "dataset root; omit to train on synthetic data");
    train->add_option("--size", flags.size, "resize images to this extent");
    train->add_option("--classes", flags.classes, "synthetic classes");
    train->add_option("--per-class", flags.per_class, "synthetic images per class");
    train->add_option("--k", flags.k, "fold count");
    train->add_option("--epochs", flags.epochs, "max training epochs per fold");
    train->add_option("--batch-size", flags.batch_size, "minibatch size");
    train->add_option("--lr", flags.learning_rate, "Adam learning rate");
    train->add_option("--patience", flags.patience, "early-stop patience (0 disables)");
    train->add_option("--c1", flags.c1, "shallow tap channels");
    train->add_option("--c2", flags.c2, "deep tap channels");
    train->add_option("--r", flags.r, "SE reduction ratio");
    train->add_option("--hidden", flags.hidden, "head dense width");
    train->add_option("--head-order", flags.head_order, "algorithm | prose");
    train->add_flag("--ablation", [&flags](int64_t) { flags.ablation = true; },
                    "disable SE attention and fusion (F1-only head)");

    CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate saved weights on a fold");
    evaluate->add_option("--weights", flags.weights, "weight container")->required();
    evaluate->add_option("--foldplan", flags.foldplan, "fold plan file")->required();
    evaluate->add_option("--fold", flags.fold, "fold index")->required();
    evaluate->add_option("--root", flags.root, "dataset root");
    evaluate->add_option("--size", flags.size, "resize images to this extent");
    evaluate->add_option("--c1", flags.c1, "expected shallow tap channels (consistency check)");
    evaluate->add_option("--c2", flags.c2, "expected deep tap channels (consistency check)");

    CLI::App* explain = app.add_subcommand("explain", "write Grad-CAM triptych PNGs");
    explain->add_option("--weights", flags.weights, "weight container")->required();
    explain->add_option("--image", flags.image, "input image (PNG or P6 PPM)")->required();
    explain->add_option("--class", flags.class_id, "target class (default: argmax)");
    explain->add_option("--layer", flags.layer, "F1_att | F2_att | F_merged");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gradcheck->add_flag("--inject-fault", flags.inject_fault,
                        "also run a deliberately wrong gradient (detection self-test)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        Resolved r = resolve(flags);
        if (synth->parsed()) return cmd_synth(r);
        if (split->parsed()) return cmd_split(r);
        if (train->parsed()) return cmd_train(r);
        if (evaluate->parsed()) return cmd_evaluate(r);
        if (explain->parsed()) return cmd_explain(r);
        if (gradcheck->parsed()) return cmd_gradcheck(r);
        throw ContractError("no subcommand dispatched");
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitGeneric;
    }
}

}  // namespace sefusion
