#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scadaguard/dataio.hpp"
#include "scadaguard/vae.hpp"

namespace scadaguard {

/// Per-window LRP values aligned to window-end timestamps.
struct LrpSeries {
    std::vector<std::int64_t> window_end_timestamps;
    std::vector<double> lrp;
    std::vector<HourLabel> labels;  // window labels carried along when known
    std::string model_id;
    std::string sampling;

    std::size_t count() const { return lrp.size(); }
};

struct ThresholdSet {
    struct Entry {
        std::string name;
        double lrp_threshold;
    };
    std::vector<Entry> entries;  // strictly decreasing thresholds

    /// Validates strictly decreasing order and non-emptiness.
    static ThresholdSet make(std::vector<Entry> entries);
};

/// Per window, per threshold: true = attack flag. Flags nest: anything
/// flagged at a stricter (lower) threshold is flagged at every more
/// sensitive (higher) one.
struct AlarmSeries {
    std::vector<std::string> threshold_names;
    std::vector<std::vector<bool>> flags;  // [threshold][window]
};

LrpSeries score_series(VaeModel& model, const WindowBatch& batch,
                       const LrpSampling& sampling = {});

/// flag = attack iff lrp < threshold (strict; ties-at-threshold are safe).
AlarmSeries apply_thresholds(const LrpSeries& series, const ThresholdSet& thresholds);

/// Lower-tail q-quantile of the LRP values with linear interpolation
/// between order statistics. Series must come from attack-free data.
double quantile_threshold(const LrpSeries& normal_series, double q);

/// CSV export: timestamp, lrp, one flag column per threshold name, plus a
/// label column when labels are present. `provenance` lines are embedded
/// as leading '#' comments.
std::string lrp_series_csv(const LrpSeries& series, const AlarmSeries& alarms,
                           const std::vector<std::string>& provenance = {});

/// Minimal SVG line plot: LRP trace plus one horizontal rule per threshold.
std::string lrp_series_svg(const LrpSeries& series, const ThresholdSet& thresholds);

}  // namespace scadaguard
