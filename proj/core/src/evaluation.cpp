#include "scadaguard/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "scadaguard/errors.hpp"

namespace scadaguard {

ConfusionMatrix confusion(const std::vector<bool>& flags, const std::vector<HourLabel>& labels) {
    if (flags.size() != labels.size()) {
        throw DataError("confusion: " + std::to_string(flags.size()) + " flags vs " +
                        std::to_string(labels.size()) + " labels");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (labels[i] == HourLabel::Unlabeled) {
            throw DataError("confusion: unlabeled windows must be excluded before counting");
        }
        const bool attack = labels[i] == HourLabel::Attack;
        if (flags[i] && attack) ++cm.tp;
        else if (flags[i] && !attack) ++cm.fp;
        else if (!flags[i] && attack) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

PrecisionRecallF1 precision_recall_f1(const ConfusionMatrix& cm) {
    PrecisionRecallF1 out;
    out.precision = (cm.tp + cm.fp) ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp) : 0.0;
    out.recall = (cm.tp + cm.fn) ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn) : 0.0;
    const double denom = out.precision + out.recall;
    out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
    return out;
}

namespace {

void count_classes(const std::vector<HourLabel>& labels, std::size_t& pos, std::size_t& neg) {
    pos = neg = 0;
    for (HourLabel l : labels) {
        if (l == HourLabel::Attack) ++pos;
        else if (l == HourLabel::Normal) ++neg;
        else throw DataError("roc: unlabeled windows must be excluded");
    }
    if (pos == 0 || neg == 0) {
        throw DataError("roc: both classes required (got " + std::to_string(pos) +
                        " attack, " + std::to_string(neg) + " normal)");
    }
}

}  // namespace

RocCurve roc(const LrpSeries& series, const std::vector<HourLabel>& labels) {
    if (series.count() != labels.size()) {
        throw DataError("roc: series/label length mismatch");
    }
    std::size_t P, N;
    count_classes(labels, P, N);

    // Anomaly score: higher = more anomalous.
    std::vector<std::pair<double, bool>> scored(series.count());
    for (std::size_t i = 0; i < series.count(); ++i) {
        scored[i] = {-series.lrp[i], labels[i] == HourLabel::Attack};
    }
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    double auc = 0.0;
    double prev_fpr = 0.0, prev_tpr = 0.0;
    while (i < scored.size()) {
        const double s = scored[i].first;
        while (i < scored.size() && scored[i].first == s) {  // ties grouped
            if (scored[i].second) ++tp;
            else ++fp;
            ++i;
        }
        const double fpr = static_cast<double>(fp) / static_cast<double>(N);
        const double tpr = static_cast<double>(tp) / static_cast<double>(P);
        curve.points.push_back({s, fpr, tpr});
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) * 0.5;
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    curve.auc = auc;
    return curve;
}

OptimalThreshold optimal_threshold_f1(const LrpSeries& series,
                                      const std::vector<HourLabel>& labels) {
    if (series.count() != labels.size()) {
        throw DataError("optimal_threshold_f1: series/label length mismatch");
    }
    std::size_t P, N;
    count_classes(labels, P, N);

    std::vector<std::pair<double, bool>> rows(series.count());
    for (std::size_t i = 0; i < series.count(); ++i) {
        rows[i] = {series.lrp[i], labels[i] == HourLabel::Attack};
    }
    std::sort(rows.begin(), rows.end());

    // Candidate thresholds between distinct values plus sentinels. flag iff
    // lrp < t, so candidate after prefix of k rows flags exactly that prefix.
    OptimalThreshold best{rows.front().first - 1.0, -1.0};
    std::size_t tp = 0, fp = 0;
    std::size_t k = 0;
    auto consider = [&](double t) {
        ConfusionMatrix cm;
        cm.tp = tp;
        cm.fp = fp;
        cm.fn = P - tp;
        cm.tn = N - fp;
        const double f1 = precision_recall_f1(cm).f1;
        if (f1 > best.f1) best = {t, f1};  // strict: ties keep the lower threshold
    };
    consider(rows.front().first - 1.0);
    while (k < rows.size()) {
        const double v = rows[k].first;
        while (k < rows.size() && rows[k].first == v) {
            if (rows[k].second) ++tp;
            else ++fp;
            ++k;
        }
        const double t = k < rows.size() ? 0.5 * (v + rows[k].first) : rows.back().first + 1.0;
        consider(t);
    }
    return best;
}

void filter_labeled(const LrpSeries& in, LrpSeries& out_series,
                    std::vector<HourLabel>& out_labels) {
    out_series = LrpSeries{};
    out_series.model_id = in.model_id;
    out_series.sampling = in.sampling;
    out_labels.clear();
    for (std::size_t i = 0; i < in.count(); ++i) {
        if (in.labels[i] == HourLabel::Unlabeled) continue;
        out_series.window_end_timestamps.push_back(in.window_end_timestamps[i]);
        out_series.lrp.push_back(in.lrp[i]);
        out_series.labels.push_back(in.labels[i]);
        out_labels.push_back(in.labels[i]);
    }
}

std::string confusion_report(const ConfusionMatrix& cm, const PrecisionRecallF1& prf) {
    std::ostringstream os;
    os << "confusion matrix (attack = positive):\n";
    os << "  tp=" << cm.tp << " fp=" << cm.fp << " fn=" << cm.fn << " tn=" << cm.tn << "\n";
    char buf[96];
    std::snprintf(buf, sizeof(buf), "  precision=%.6f recall=%.6f f1=%.6f\n", prf.precision,
                  prf.recall, prf.f1);
    os << buf;
    return os.str();
}

std::string roc_csv(const RocCurve& curve, const std::vector<std::string>& provenance) {
    std::ostringstream os;
    for (const auto& line : provenance) os << "# " << line << "\n";
    os << "threshold,fpr,tpr\n";
    char buf[96];
    for (const auto& p : curve.points) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
        os << buf;
    }
    return os.str();
}

}  // namespace scadaguard
