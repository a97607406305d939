#include "scadaguard/detector.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scadaguard/errors.hpp"

namespace scadaguard {

ThresholdSet ThresholdSet::make(std::vector<Entry> entries) {
    if (entries.empty()) throw ConfigError("threshold set must have at least one entry");
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (!(entries[i].lrp_threshold < entries[i - 1].lrp_threshold)) {
            throw ConfigError("thresholds must be strictly decreasing: " +
                              entries[i - 1].name + " then " + entries[i].name);
        }
    }
    ThresholdSet ts;
    ts.entries = std::move(entries);
    return ts;
}

LrpSeries score_series(VaeModel& model, const WindowBatch& batch, const LrpSampling& sampling) {
    if (batch.windows.shape[1] != model.config.channels) {
        throw DataError("score: batch has " + std::to_string(batch.windows.shape[1]) +
                        " channels, model expects " + std::to_string(model.config.channels));
    }
    LrpSeries out;
    out.window_end_timestamps = batch.window_end_timestamps;
    out.labels = batch.window_labels;
    out.sampling = sampling.describe();
    out.lrp.reserve(batch.count());
    for (std::size_t n = 0; n < batch.count(); ++n) {
        out.lrp.push_back(lrp(model, batch.window(n), sampling));
    }
    return out;
}

AlarmSeries apply_thresholds(const LrpSeries& series, const ThresholdSet& thresholds) {
    AlarmSeries alarms;
    for (const auto& e : thresholds.entries) {
        alarms.threshold_names.push_back(e.name);
        std::vector<bool> flags(series.count());
        for (std::size_t i = 0; i < series.count(); ++i) {
            flags[i] = series.lrp[i] < e.lrp_threshold;
        }
        alarms.flags.push_back(std::move(flags));
    }
    return alarms;
}

double quantile_threshold(const LrpSeries& normal_series, double q) {
    if (normal_series.count() == 0) throw DataError("quantile_threshold: empty series");
    if (q <= 0.0 || q >= 1.0) throw ConfigError("quantile_threshold: q must be in (0,1)");
    std::vector<double> sorted = normal_series.lrp;
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::string lrp_series_csv(const LrpSeries& series, const AlarmSeries& alarms,
                           const std::vector<std::string>& provenance) {
    std::ostringstream os;
    for (const auto& line : provenance) os << "# " << line << "\n";
    os << "timestamp,lrp";
    for (const auto& name : alarms.threshold_names) os << "," << name;
    const bool labeled =
        std::any_of(series.labels.begin(), series.labels.end(),
                    [](HourLabel l) { return l != HourLabel::Unlabeled; });
    if (labeled) os << ",label";
    os << "\n";
    char buf[64];
    for (std::size_t i = 0; i < series.count(); ++i) {
        os << format_timestamp(series.window_end_timestamps[i]);
        std::snprintf(buf, sizeof(buf), ",%.17g", series.lrp[i]);
        os << buf;
        for (const auto& flags : alarms.flags) os << "," << (flags[i] ? 1 : 0);
        if (labeled) {
            os << ","
               << (series.labels[i] == HourLabel::Attack ? "1"
                   : series.labels[i] == HourLabel::Normal ? "0"
                                                           : "-999");
        }
        os << "\n";
    }
    return os.str();
}

std::string lrp_series_svg(const LrpSeries& series, const ThresholdSet& thresholds) {
    const double width = 1000.0, height = 320.0, pad = 10.0;
    double lo = series.lrp.empty() ? -1.0 : series.lrp[0];
    double hi = lo;
    for (double v : series.lrp) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (const auto& e : thresholds.entries) {
        lo = std::min(lo, e.lrp_threshold);
        hi = std::max(hi, e.lrp_threshold);
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    const std::size_t n = std::max<std::size_t>(series.count(), 2);
    auto px = [&](std::size_t i) {
        return pad + (width - 2 * pad) * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    auto py = [&](double v) { return pad + (height - 2 * pad) * (hi - v) / (hi - lo); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\">\n";
    // Threshold rules.
    for (const auto& e : thresholds.entries) {
        const double y = py(e.lrp_threshold);
        os << "<polyline class=\"threshold\" data-name=\"" << e.name
           << "\" fill=\"none\" stroke=\"#c0392b\" stroke-dasharray=\"6,4\" points=\""
           << px(0) << "," << y << " " << px(n - 1) << "," << y << "\"/>\n";
    }
    // LRP trace.
    os << "<polyline class=\"lrp\" fill=\"none\" stroke=\"#2c3e50\" points=\"";
    for (std::size_t i = 0; i < series.count(); ++i) {
        if (i) os << " ";
        os << px(i) << "," << py(series.lrp[i]);
    }
    os << "\"/>\n</svg>\n";
    return os.str();
}

}  // namespace scadaguard
