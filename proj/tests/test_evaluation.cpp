#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "scadaguard/errors.hpp"
#include "scadaguard/evaluation.hpp"

using namespace scadaguard;

namespace {

LrpSeries series_of(std::vector<double> lrp) {
    LrpSeries s;
    s.lrp = std::move(lrp);
    for (std::size_t i = 0; i < s.lrp.size(); ++i) {
        s.window_end_timestamps.push_back(static_cast<std::int64_t>(i));
    }
    return s;
}

// Probability that a random attack window outscores a random normal one,
// counting ties as half. Independent of the sweep-based ROC construction.
double concordance_auc(const std::vector<double>& lrp, const std::vector<HourLabel>& labels) {
    double num = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < lrp.size(); ++i) {
        if (labels[i] != HourLabel::Attack) continue;
        for (std::size_t j = 0; j < lrp.size(); ++j) {
            if (labels[j] != HourLabel::Normal) continue;
            const double a = -lrp[i], n = -lrp[j];
            num += a > n ? 1.0 : (a == n ? 0.5 : 0.0);
            ++pairs;
        }
    }
    return num / static_cast<double>(pairs);
}

// Direct F1 maximization by trying every midpoint candidate with plain
// counting, mirroring how one would do it with pencil and paper.
OptimalThreshold naive_optimal(const std::vector<double>& lrp,
                               const std::vector<HourLabel>& labels) {
    std::vector<double> sorted = lrp;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<double> candidates;
    candidates.push_back(sorted.front() - 1.0);
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
    }
    candidates.push_back(sorted.back() + 1.0);

    OptimalThreshold best{candidates.front(), -1.0};
    for (double t : candidates) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < lrp.size(); ++i) {
            const bool flag = lrp[i] < t;
            const bool attack = labels[i] == HourLabel::Attack;
            if (flag && attack) ++tp;
            if (flag && !attack) ++fp;
            if (!flag && attack) ++fn;
        }
        const double p = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
        const double r = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
        const double f1 = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
        if (f1 > best.f1) best = {t, f1};  // strict: ties keep the lower threshold
    }
    return best;
}

}  // namespace

TEST_CASE("confusion matrix counts by hand and against a direct count") {
    std::vector<bool> flags = {true, true, false, false, true};
    std::vector<HourLabel> labels = {HourLabel::Attack, HourLabel::Normal, HourLabel::Attack,
                                     HourLabel::Normal, HourLabel::Attack};
    ConfusionMatrix cm = confusion(flags, labels);
    CHECK(cm.tp == 2);
    CHECK(cm.fp == 1);
    CHECK(cm.fn == 1);
    CHECK(cm.tn == 1);
    CHECK(cm.total() == 5);

    std::mt19937_64 rng(13);
    std::bernoulli_distribution coin(0.4);
    std::vector<bool> f(300);
    std::vector<HourLabel> l(300);
    for (std::size_t i = 0; i < 300; ++i) {
        f[i] = coin(rng);
        l[i] = coin(rng) ? HourLabel::Attack : HourLabel::Normal;
    }
    ConfusionMatrix r = confusion(f, l);
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < 300; ++i) {
        if (f[i] && l[i] == HourLabel::Attack) ++tp;
        if (f[i] && l[i] == HourLabel::Normal) ++fp;
        if (!f[i] && l[i] == HourLabel::Attack) ++fn;
        if (!f[i] && l[i] == HourLabel::Normal) ++tn;
    }
    CHECK(r.tp == tp);
    CHECK(r.fp == fp);
    CHECK(r.fn == fn);
    CHECK(r.tn == tn);
}

TEST_CASE("precision/recall/f1 closed forms and 0/0 conventions") {
    ConfusionMatrix cm;
    cm.tp = 9;
    cm.fp = 6;  // precision 0.6
    cm.fn = 1;  // recall 0.9
    PrecisionRecallF1 prf = precision_recall_f1(cm);
    CHECK(prf.precision == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(prf.recall == doctest::Approx(0.9).epsilon(1e-14));
    CHECK(prf.f1 == doctest::Approx(0.72).epsilon(1e-14));

    ConfusionMatrix empty;  // nothing flagged, nothing attacked
    PrecisionRecallF1 zero = precision_recall_f1(empty);
    CHECK(zero.precision == 0.0);
    CHECK(zero.recall == 0.0);
    CHECK(zero.f1 == 0.0);

    const std::string report = confusion_report(cm, prf);
    CHECK(report.find("precision") != std::string::npos);
    CHECK(report.find("recall") != std::string::npos);
}

TEST_CASE("roc endpoints, perfect and chance-level separations") {
    // Attacks have strictly lower LRP: perfect detector.
    LrpSeries perfect = series_of({-1.0, -2.0, -10.0, -20.0});
    std::vector<HourLabel> labels = {HourLabel::Normal, HourLabel::Normal, HourLabel::Attack,
                                     HourLabel::Attack};
    RocCurve c = roc(perfect, labels);
    CHECK(c.auc == doctest::Approx(1.0).epsilon(1e-14));
    REQUIRE(!c.points.empty());
    CHECK(c.points.front().fpr == 0.0);
    CHECK(c.points.front().tpr == 0.0);
    CHECK(c.points.back().fpr == 1.0);
    CHECK(c.points.back().tpr == 1.0);

    // Identical scores: ties grouped into one diagonal step.
    LrpSeries flat = series_of({-5.0, -5.0, -5.0, -5.0});
    CHECK(roc(flat, labels).auc == doctest::Approx(0.5).epsilon(1e-14));

    // Worked example: anomaly scores 1,3,2,4 with attacks at 2 and 4.
    LrpSeries mixed = series_of({-1.0, -3.0, -2.0, -4.0});
    CHECK(roc(mixed, labels).auc == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(roc(mixed, labels).auc ==
          doctest::Approx(concordance_auc(mixed.lrp, labels)).epsilon(1e-14));
}

TEST_CASE("roc refuses a single-class series") {
    LrpSeries s = series_of({-1.0, -2.0});
    std::vector<HourLabel> all_normal = {HourLabel::Normal, HourLabel::Normal};
    std::vector<HourLabel> all_attack = {HourLabel::Attack, HourLabel::Attack};
    CHECK_THROWS_AS(roc(s, all_normal), DataError);
    CHECK_THROWS_AS(roc(s, all_attack), DataError);
}

TEST_CASE("trapezoid auc equals the concordance probability on random data") {
    std::mt19937_64 rng(29);
    std::uniform_int_distribution<int> score(-20, 0);  // integers force ties
    std::bernoulli_distribution coin(0.3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> lrp(100);
        std::vector<HourLabel> labels(100);
        bool has_attack = false, has_normal = false;
        for (std::size_t i = 0; i < 100; ++i) {
            lrp[i] = static_cast<double>(score(rng));
            labels[i] = coin(rng) ? HourLabel::Attack : HourLabel::Normal;
            (labels[i] == HourLabel::Attack ? has_attack : has_normal) = true;
        }
        if (!has_attack || !has_normal) continue;
        RocCurve c = roc(series_of(lrp), labels);
        CHECK(std::abs(c.auc - concordance_auc(lrp, labels)) <= 1e-12);
    }
}

TEST_CASE("optimal f1 threshold: worked example and exhaustive agreement") {
    // Attacks at -5 and -4; the best cut separates them from -2 and -1 at
    // the midpoint between -4 and -2.
    LrpSeries s = series_of({-1.0, -5.0, -4.0, -2.0});
    std::vector<HourLabel> labels = {HourLabel::Normal, HourLabel::Attack, HourLabel::Attack,
                                     HourLabel::Normal};
    OptimalThreshold best = optimal_threshold_f1(s, labels);
    CHECK(best.threshold == doctest::Approx(-3.0).epsilon(1e-14));
    CHECK(best.f1 == doctest::Approx(1.0).epsilon(1e-14));

    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> score(-12, 0);
    std::bernoulli_distribution coin(0.35);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> lrp(60);
        std::vector<HourLabel> l(60);
        bool has_attack = false, has_normal = false;
        for (std::size_t i = 0; i < 60; ++i) {
            lrp[i] = static_cast<double>(score(rng));
            l[i] = coin(rng) ? HourLabel::Attack : HourLabel::Normal;
            (l[i] == HourLabel::Attack ? has_attack : has_normal) = true;
        }
        if (!has_attack || !has_normal) continue;
        OptimalThreshold got = optimal_threshold_f1(series_of(lrp), l);
        OptimalThreshold want = naive_optimal(lrp, l);
        CHECK(got.f1 == doctest::Approx(want.f1).epsilon(1e-12));
        CHECK(got.threshold == doctest::Approx(want.threshold).epsilon(1e-12));
    }
}

TEST_CASE("filter_labeled drops unlabeled windows and keeps alignment") {
    LrpSeries s = series_of({-1.0, -2.0, -3.0});
    s.labels = {HourLabel::Normal, HourLabel::Unlabeled, HourLabel::Attack};
    LrpSeries kept;
    std::vector<HourLabel> labels;
    filter_labeled(s, kept, labels);
    CHECK(kept.lrp == std::vector<double>{-1.0, -3.0});
    CHECK(kept.window_end_timestamps == std::vector<std::int64_t>{0, 2});
    CHECK(labels == std::vector<HourLabel>{HourLabel::Normal, HourLabel::Attack});
}

TEST_CASE("roc csv layout") {
    LrpSeries s = series_of({-1.0, -2.0, -10.0, -20.0});
    std::vector<HourLabel> labels = {HourLabel::Normal, HourLabel::Normal, HourLabel::Attack,
                                     HourLabel::Attack};
    const std::string csv = roc_csv(roc(s, labels), {"input=x.csv"});
    CHECK(csv.find("# input=x.csv") == 0);
    CHECK(csv.find("threshold,fpr,tpr") != std::string::npos);
    // Endpoints present: the final point is (1,1).
    CHECK(csv.find(",1,1\n") != std::string::npos);
}
