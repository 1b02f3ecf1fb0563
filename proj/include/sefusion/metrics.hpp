#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sefusion/errors.hpp"
#include "sefusion/tensor.hpp"

namespace sefusion {

/// n x n counts, rows = true class, columns = predicted class.
struct ConfusionMatrix {
    int64_t n = 0;
    std::vector<int64_t> counts;  // row-major

    int64_t& at(int64_t t, int64_t p) { return counts[static_cast<size_t>(t * n + p)]; }
    int64_t at(int64_t t, int64_t p) const { return counts[static_cast<size_t>(t * n + p)]; }

    int64_t total() const { return std::accumulate(counts.begin(), counts.end(), int64_t{0}); }
    int64_t support(int64_t t) const {
        int64_t s = 0;
        for (int64_t p = 0; p < n; ++p) s += at(t, p);
        return s;
    }
};

inline ConfusionMatrix confusion_matrix(const std::vector<int64_t>& y_true,
                                        const std::vector<int64_t>& y_pred, int64_t n) {
    if (y_true.size() != y_pred.size())
        throw ContractError("confusion_matrix: label sequences differ in length");
    if (n < 1) throw ContractError("confusion_matrix: class count must be positive");
    ConfusionMatrix cm;
    cm.n = n;
    cm.counts.assign(static_cast<size_t>(n * n), 0);
    for (size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] < 0 || y_true[i] >= n || y_pred[i] < 0 || y_pred[i] >= n)
            throw DataError("confusion_matrix: class id out of range at sample " +
                            std::to_string(i));
        ++cm.at(y_true[i], y_pred[i]);
    }
    return cm;
}

/// One-vs-rest reduction of a multi-class confusion matrix.
struct BinaryCounts {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline BinaryCounts one_vs_rest(const ConfusionMatrix& cm, int64_t c) {
    if (c < 0 || c >= cm.n) throw ContractError("one_vs_rest: class out of range");
    BinaryCounts b;
    const int64_t total = cm.total();
    b.tp = cm.at(c, c);
    for (int64_t t = 0; t < cm.n; ++t) b.fp += cm.at(t, c);
    b.fp -= b.tp;
    b.fn = cm.support(c) - b.tp;
    b.tn = total - b.tp - b.fp - b.fn;
    return b;
}

struct ClassScores {
    double precision = 0, recall = 0, f1 = 0;
    int64_t support = 0;
    bool precision_degenerate = false;  // no predictions for the class
    bool recall_degenerate = false;     // no true samples of the class
};

struct PrfScores {
    std::vector<ClassScores> per_class;
    double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
    double weighted_precision = 0, weighted_recall = 0, weighted_f1 = 0;
};

/// Per-class precision TP/(TP+FP), recall TP/(TP+FN), F1 harmonic mean;
/// zero denominators score 0 and raise the degenerate flag.
inline PrfScores prf_scores(const ConfusionMatrix& cm) {
    PrfScores out;
    const int64_t total = cm.total();
    for (int64_t c = 0; c < cm.n; ++c) {
        const BinaryCounts b = one_vs_rest(cm, c);
        ClassScores s;
        s.support = b.tp + b.fn;
        if (b.tp + b.fp > 0)
            s.precision = static_cast<double>(b.tp) / static_cast<double>(b.tp + b.fp);
        else
            s.precision_degenerate = true;
        if (b.tp + b.fn > 0)
            s.recall = static_cast<double>(b.tp) / static_cast<double>(b.tp + b.fn);
        else
            s.recall_degenerate = true;
        if (s.precision + s.recall > 0)
            s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
        out.per_class.push_back(s);
    }
    const double nc = static_cast<double>(cm.n);
    for (const auto& s : out.per_class) {
        out.macro_precision += s.precision / nc;
        out.macro_recall += s.recall / nc;
        out.macro_f1 += s.f1 / nc;
        if (total > 0) {
            const double w = static_cast<double>(s.support) / static_cast<double>(total);
            out.weighted_precision += w * s.precision;
            out.weighted_recall += w * s.recall;
            out.weighted_f1 += w * s.f1;
        }
    }
    return out;
}

inline double accuracy(const ConfusionMatrix& cm) {
    const int64_t total = cm.total();
    if (total == 0) throw ContractError("accuracy of an empty confusion matrix");
    int64_t diag = 0;
    for (int64_t c = 0; c < cm.n; ++c) diag += cm.at(c, c);
    return static_cast<double>(diag) / static_cast<double>(total);
}

/// Balanced estimate 1/2 (TP/(TP+FN) + TN/(TN+FP)); zero denominators
/// contribute 0.
inline double eq5_estimate(const BinaryCounts& b) {
    double tpr = 0, tnr = 0;
    if (b.tp + b.fn > 0) tpr = static_cast<double>(b.tp) / static_cast<double>(b.tp + b.fn);
    if (b.tn + b.fp > 0) tnr = static_cast<double>(b.tn) / static_cast<double>(b.tn + b.fp);
    return 0.5 * (tpr + tnr);
}

struct AucScores {
    std::vector<double> per_class;
    std::vector<bool> defined;  // false when the class is absent from y_true
    double macro = 0;
    int64_t defined_count = 0;
};

/// One-vs-rest ROC AUC by the midrank statistic (equivalent to trapezoidal
/// integration of the ROC curve with tie handling).
template <typename T>
AucScores auc_scores(const std::vector<int64_t>& y_true, const Tensor<T>& probs) {
    if (probs.shape.rank() != 2) throw ShapeError("auc_scores expects probs [N,n]");
    const int64_t n_samples = probs.shape.dim(0);
    const int64_t n_classes = probs.shape.dim(1);
    if (static_cast<int64_t>(y_true.size()) != n_samples)
        throw ContractError("auc_scores: label count does not match probs rows");
    for (int64_t i = 0; i < n_samples; ++i) {
        T row = 0;
        for (int64_t c = 0; c < n_classes; ++c)
            row += probs.v[static_cast<size_t>(i * n_classes + c)];
        if (std::abs(static_cast<double>(row) - 1.0) > 1e-5)
            throw DataError("auc_scores: probability row " + std::to_string(i) +
                            " does not sum to 1");
    }

    AucScores out;
    out.per_class.assign(static_cast<size_t>(n_classes), 0.0);
    out.defined.assign(static_cast<size_t>(n_classes), false);

    std::vector<int64_t> order(static_cast<size_t>(n_samples));
    for (int64_t c = 0; c < n_classes; ++c) {
        int64_t n_pos = 0;
        for (int64_t l : y_true) n_pos += (l == c) ? 1 : 0;
        const int64_t n_neg = n_samples - n_pos;
        if (n_pos == 0 || n_neg == 0) continue;  // AUC undefined, excluded from macro

        std::iota(order.begin(), order.end(), 0);
        auto score = [&](int64_t i) {
            return static_cast<double>(probs.v[static_cast<size_t>(i * n_classes + c)]);
        };
        std::sort(order.begin(), order.end(),
                  [&](int64_t a, int64_t b) { return score(a) < score(b); });

        // Midranks over tied scores, then the rank-sum statistic.
        double pos_rank_sum = 0;
        int64_t i = 0;
        while (i < n_samples) {
            int64_t j = i;
            while (j + 1 < n_samples && score(order[static_cast<size_t>(j + 1)]) ==
                                            score(order[static_cast<size_t>(i)]))
                ++j;
            const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
            for (int64_t t = i; t <= j; ++t)
                if (y_true[static_cast<size_t>(order[static_cast<size_t>(t)])] == c)
                    pos_rank_sum += midrank;
            i = j + 1;
        }
        const double auc =
            (pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
            (static_cast<double>(n_pos) * static_cast<double>(n_neg));
        out.per_class[static_cast<size_t>(c)] = auc;
        out.defined[static_cast<size_t>(c)] = true;
        out.macro += auc;
        ++out.defined_count;
    }
    if (out.defined_count > 0) out.macro /= static_cast<double>(out.defined_count);
    return out;
}

/// Everything one evaluated fold reports.
struct MetricsReport {
    ConfusionMatrix cm;
    PrfScores prf;
    double acc = 0;
    AucScores auc;
    std::vector<double> eq5_per_class;
    double eq5_macro = 0;
};

template <typename T>
MetricsReport make_metrics_report(const std::vector<int64_t>& y_true,
                                  const std::vector<int64_t>& y_pred, const Tensor<T>& probs,
                                  int64_t n_classes) {
    MetricsReport r;
    r.cm = confusion_matrix(y_true, y_pred, n_classes);
    r.prf = prf_scores(r.cm);
    r.acc = accuracy(r.cm);
    r.auc = auc_scores(y_true, probs);
    for (int64_t c = 0; c < n_classes; ++c) {
        r.eq5_per_class.push_back(eq5_estimate(one_vs_rest(r.cm, c)));
        r.eq5_macro += r.eq5_per_class.back() / static_cast<double>(n_classes);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Cross-fold reporting

struct MeanSd {
    double mean = 0, sd = 0;  // population SD over folds
};

inline MeanSd mean_sd(const std::vector<double>& xs) {
    MeanSd m;
    if (xs.empty()) return m;
    for (double x : xs) m.mean += x;
    m.mean /= static_cast<double>(xs.size());
    for (double x : xs) m.sd += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(m.sd / static_cast<double>(xs.size()));
    return m;
}

struct FoldSummaries {
    std::vector<double> precision, recall, f1, acc, auc;  // weighted / fold-level values
    MeanSd precision_agg, recall_agg, f1_agg, acc_agg, auc_agg;
};

inline FoldSummaries summarize_folds(const std::vector<MetricsReport>& folds) {
    if (folds.empty()) throw ContractError("report needs at least one fold");
    FoldSummaries s;
    for (const auto& r : folds) {
        s.precision.push_back(r.prf.weighted_precision);
        s.recall.push_back(r.prf.weighted_recall);
        s.f1.push_back(r.prf.weighted_f1);
        s.acc.push_back(r.acc);
        s.auc.push_back(r.auc.macro);
    }
    s.precision_agg = mean_sd(s.precision);
    s.recall_agg = mean_sd(s.recall);
    s.f1_agg = mean_sd(s.f1);
    s.acc_agg = mean_sd(s.acc);
    s.auc_agg = mean_sd(s.auc);
    return s;
}

namespace detail {

inline std::string fmt(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

}  // namespace detail

/// Human-readable per-fold table with a mean +/- population-SD footer.
inline std::string render_report_table(const std::vector<MetricsReport>& folds,
                                       const std::vector<std::string>& class_names) {
    const FoldSummaries s = summarize_folds(folds);
    std::ostringstream os;
    os << "Fold  Class         Precision  Recall  F1-score  Support  Accuracy  Avg. AUC\n";
    for (size_t f = 0; f < folds.size(); ++f) {
        const auto& r = folds[f];
        for (size_t c = 0; c < r.prf.per_class.size(); ++c) {
            const auto& cs = r.prf.per_class[c];
            const std::string name =
                c < class_names.size() ? class_names[c] : "class " + std::to_string(c);
            os << (c == 0 ? detail::fmt(static_cast<double>(f + 1), 0) : " ") << '\t'
               << name << '\t' << detail::fmt(cs.precision, 4) << '\t'
               << detail::fmt(cs.recall, 4) << '\t' << detail::fmt(cs.f1, 4) << '\t'
               << cs.support << '\t' << (c == 0 ? detail::fmt(r.acc, 4) : "") << '\t'
               << (c == 0 ? detail::fmt(r.auc.macro, 4) : "") << '\n';
        }
    }
    os << "Average (u) +/- SD (o)\t" << detail::fmt(s.precision_agg.mean, 4) << " +/- "
       << detail::fmt(s.precision_agg.sd, 4) << '\t' << detail::fmt(s.recall_agg.mean, 4)
       << " +/- " << detail::fmt(s.recall_agg.sd, 4) << '\t' << detail::fmt(s.f1_agg.mean, 4)
       << " +/- " << detail::fmt(s.f1_agg.sd, 4) << "\t-\t" << detail::fmt(s.acc_agg.mean, 4)
       << " +/- " << detail::fmt(s.acc_agg.sd, 4) << '\t' << detail::fmt(s.auc_agg.mean, 4)
       << " +/- " << detail::fmt(s.auc_agg.sd, 4) << '\n';
    return os.str();
}

/// Machine-readable CSV: one row per fold x class with the fold-level
/// accuracy and macro AUC repeated, then aggregate mean/sd rows.
inline std::string render_report_csv(const std::vector<MetricsReport>& folds,
                                     const std::vector<std::string>& class_names) {
    const FoldSummaries s = summarize_folds(folds);
    std::ostringstream os;
    os << "fold,class,precision,recall,f1,support,accuracy,avg_auc\n";
    for (size_t f = 0; f < folds.size(); ++f) {
        const auto& r = folds[f];
        for (size_t c = 0; c < r.prf.per_class.size(); ++c) {
            const auto& cs = r.prf.per_class[c];
            const std::string name =
                c < class_names.size() ? class_names[c] : "class_" + std::to_string(c);
            os << f << ',' << name << ',' << detail::fmt(cs.precision, 6) << ','
               << detail::fmt(cs.recall, 6) << ',' << detail::fmt(cs.f1, 6) << ',' << cs.support
               << ',' << detail::fmt(r.acc, 6) << ',' << detail::fmt(r.auc.macro, 6) << '\n';
        }
    }
    os << "aggregate,mean," << detail::fmt(s.precision_agg.mean, 6) << ','
       << detail::fmt(s.recall_agg.mean, 6) << ',' << detail::fmt(s.f1_agg.mean, 6) << ",,"
       << detail::fmt(s.acc_agg.mean, 6) << ',' << detail::fmt(s.auc_agg.mean, 6) << '\n';
    os << "aggregate,sd," << detail::fmt(s.precision_agg.sd, 6) << ','
       << detail::fmt(s.recall_agg.sd, 6) << ',' << detail::fmt(s.f1_agg.sd, 6) << ",,"
       << detail::fmt(s.acc_agg.sd, 6) << ',' << detail::fmt(s.auc_agg.sd, 6) << '\n';
    return os.str();
}

/// n x n confusion matrix CSV with class-name header and row labels.
inline std::string render_confusion_csv(const ConfusionMatrix& cm,
                                        const std::vector<std::string>& class_names) {
    std::ostringstream os;
    os << "true\\pred";
    for (int64_t c = 0; c < cm.n; ++c)
        os << ',' << (c < static_cast<int64_t>(class_names.size()) ? class_names[static_cast<size_t>(c)]
                                                                   : "class_" + std::to_string(c));
    os << '\n';
    for (int64_t t = 0; t < cm.n; ++t) {
        os << (t < static_cast<int64_t>(class_names.size()) ? class_names[static_cast<size_t>(t)]
                                                            : "class_" + std::to_string(t));
        for (int64_t p = 0; p < cm.n; ++p) os << ',' << cm.at(t, p);
        os << '\n';
    }
    return os.str();
}

}  // namespace sefusion
