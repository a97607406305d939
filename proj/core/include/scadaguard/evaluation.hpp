#pragma once

#include <string>
#include <vector>

#include "scadaguard/dataio.hpp"
#include "scadaguard/detector.hpp"

namespace scadaguard {

struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::size_t total() const { return tp + fp + fn + tn; }
};

struct PrecisionRecallF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct RocPoint {
    double threshold;  // anomaly-score (= -lrp) cut
    double fpr;
    double tpr;
};

struct RocCurve {
    std::vector<RocPoint> points;  // starts at (0,0), ends at (1,1)
    double auc = 0.0;
};

/// Counts the four outcomes; attack is the positive class. Unlabeled
/// windows must be excluded by the caller (filter_labeled helps).
ConfusionMatrix confusion(const std::vector<bool>& flags, const std::vector<HourLabel>& labels);

/// precision = tp/(tp+fp), recall = tp/(tp+fn), F1 their harmonic
/// aggregate; every 0/0 resolves to 0.
PrecisionRecallF1 precision_recall_f1(const ConfusionMatrix& cm);

/// ROC over anomaly score -lrp, sweeping all distinct scores (ties grouped),
/// AUC by the trapezoid rule. Requires both classes present.
RocCurve roc(const LrpSeries& series, const std::vector<HourLabel>& labels);

struct OptimalThreshold {
    double threshold;  // in LRP units; flag iff lrp < threshold
    double f1;
};

/// Exhaustive F1 maximization over midpoints between consecutive distinct
/// LRP values plus sentinels beyond both ends. Ties prefer the lower
/// (less sensitive) threshold.
OptimalThreshold optimal_threshold_f1(const LrpSeries& series,
                                      const std::vector<HourLabel>& labels);

/// Drops unlabeled windows, keeping lrp/label pairs aligned.
void filter_labeled(const LrpSeries& in, LrpSeries& out_series,
                    std::vector<HourLabel>& out_labels);

std::string confusion_report(const ConfusionMatrix& cm, const PrecisionRecallF1& prf);
std::string roc_csv(const RocCurve& curve, const std::vector<std::string>& provenance = {});

}  // namespace scadaguard
