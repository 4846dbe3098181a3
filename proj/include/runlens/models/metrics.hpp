#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "../common.hpp"

namespace runlens {

/// Rows are true labels, columns predicted labels.
inline std::vector<std::vector<std::size_t>> confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted,
                                                              std::size_t n_classes) {
    std::vector<std::vector<std::size_t>> m(n_classes, std::vector<std::size_t>(n_classes, 0));
    for (std::size_t i = 0; i < truth.size(); ++i)
        m[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])]++;
    return m;
}

struct ClassScores {
    double precision = 0.0;  // 0 when the class is never predicted
    double recall = 0.0;     // 0 when the class has no support
    std::size_t support = 0;
};

inline std::vector<ClassScores> class_scores(const std::vector<std::vector<std::size_t>>& confusion) {
    const auto k = confusion.size();
    std::vector<ClassScores> out(k);
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t predicted = 0, support = 0;
        for (std::size_t r = 0; r < k; ++r) predicted += confusion[r][c];
        for (std::size_t p = 0; p < k; ++p) support += confusion[c][p];
        const double tp = static_cast<double>(confusion[c][c]);
        out[c].support = support;
        out[c].precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
        out[c].recall = support ? tp / static_cast<double>(support) : 0.0;
    }
    return out;
}

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;
    std::optional<double> auc;  // absent without both positives and negatives
};

/// Threshold sweep from the highest score down; equal scores enter together, so ties
/// contribute a diagonal segment. AUC is the trapezoid area under the curve.
inline RocCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& positive) {
    RocCurve curve;
    const auto pos = static_cast<double>(std::count(positive.begin(), positive.end(), true));
    const auto neg = static_cast<double>(positive.size()) - pos;
    if (pos == 0.0 || neg == 0.0) return curve;
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    double tp = 0.0, fp = 0.0, area = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        const double thr = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == thr; ++i) (positive[order[i]] ? tp : fp) += 1.0;
        RocPoint p{fp / neg, tp / pos, thr};
        const auto& prev = curve.points.back();
        area += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) * 0.5;
        curve.points.push_back(p);
    }
    curve.auc = std::clamp(area, 0.0, 1.0);
    return curve;
}

struct PerformanceReport {
    double train_accuracy = 0.0;
    double validation_accuracy = 0.0;
    std::vector<std::string> class_labels;
    std::vector<std::vector<std::size_t>> confusion;
    std::vector<ClassScores> per_class;
    std::vector<RocCurve> roc;
    std::size_t train_rows = 0;
    std::size_t validation_rows = 0;
    double fit_duration = 0.0;
    double predict_duration = 0.0;
};

/// Validation-split metrics; `proba` has one column per class.
inline PerformanceReport make_report(const std::vector<int>& train_truth, const std::vector<int>& train_pred,
                                     const std::vector<int>& truth, const Matrix& proba,
                                     const std::vector<std::string>& class_labels) {
    PerformanceReport r;
    const auto k = class_labels.size();
    std::vector<int> pred(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < proba.cols(); ++c)
            if (proba(static_cast<Eigen::Index>(i), c) > proba(static_cast<Eigen::Index>(i), best)) best = c;
        pred[i] = static_cast<int>(best);
    }
    auto acc = [](const std::vector<int>& a, const std::vector<int>& b) {
        if (a.empty()) return 0.0;
        std::size_t hit = 0;
        for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
        return static_cast<double>(hit) / static_cast<double>(a.size());
    };
    r.train_accuracy = acc(train_truth, train_pred);
    r.validation_accuracy = acc(truth, pred);
    r.class_labels = class_labels;
    r.confusion = confusion_matrix(truth, pred, k);
    r.per_class = class_scores(r.confusion);
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> s(truth.size());
        std::vector<bool> pos(truth.size());
        for (std::size_t i = 0; i < truth.size(); ++i) {
            s[i] = proba(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
            pos[i] = truth[i] == static_cast<int>(c);
        }
        r.roc.push_back(roc_curve(s, pos));
    }
    r.train_rows = train_truth.size();
    r.validation_rows = truth.size();
    return r;
}

inline json to_json(const RocCurve& c) {
    json pts = json::array();
    for (const auto& p : c.points)
        pts.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}, {"threshold", std::isfinite(p.threshold) ? json(p.threshold) : json(nullptr)}});
    return {{"points", pts}, {"auc", c.auc ? json(*c.auc) : json(nullptr)}};
}

inline json to_json(const PerformanceReport& r) {
    json classes = json::array();
    for (std::size_t c = 0; c < r.class_labels.size(); ++c)
        classes.push_back({{"label", r.class_labels[c]},
                           {"precision", r.per_class[c].precision},
                           {"recall", r.per_class[c].recall},
                           {"support", r.per_class[c].support},
                           {"roc", to_json(r.roc[c])}});
    return {{"train_accuracy", r.train_accuracy},
            {"validation_accuracy", r.validation_accuracy},
            {"train_rows", r.train_rows},
            {"validation_rows", r.validation_rows},
            {"confusion_matrix", r.confusion},
            {"classes", classes},
            {"fit_duration", r.fit_duration},
            {"predict_duration", r.predict_duration}};
}

}  // namespace runlens
