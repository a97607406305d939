#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scadaguard/tensor.hpp"

namespace scadaguard {

enum class HourLabel : std::uint8_t { Normal = 0, Attack = 1, Unlabeled = 2 };

/// Hourly SCADA table: strictly increasing hourly timestamps, one column per
/// named channel, optional per-hour labels. Immutable after load.
struct ScadaDataset {
    std::vector<std::int64_t> timestamps;  // hours since Unix epoch
    std::vector<std::string> channel_names;
    std::vector<double> values;  // row-major [T, channels]
    std::vector<HourLabel> labels;  // empty when the source had no label column

    std::size_t rows() const { return timestamps.size(); }
    std::size_t channels() const { return channel_names.size(); }
    double at(std::size_t row, std::size_t ch) const { return values[row * channels() + ch]; }
    double& at(std::size_t row, std::size_t ch) { return values[row * channels() + ch]; }
    bool has_labels() const { return !labels.empty(); }
    std::size_t channel_index(const std::string& name) const;  // throws DataError
};

/// Column mapping for load_csv, normally read from a JSON config.
struct ColumnMap {
    std::string timestamp_column = "DATETIME";
    std::vector<std::string> channel_columns;  // empty: all remaining columns in file order
    std::optional<std::string> label_column;
    std::set<std::string> attack_values{"1"};
    std::set<std::string> normal_values{"0"};
    std::set<std::string> unlabeled_values{"-999"};

    static ColumnMap from_json_file(const std::string& path);
    static ColumnMap from_json_text(const std::string& text);
};

ScadaDataset load_csv(const std::string& path, const ColumnMap& mapping);

struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> std;  // floored at 1e-6 for constant channels
};

struct RowRange {
    std::size_t begin = 0;  // inclusive
    std::size_t end = 0;    // exclusive
    std::size_t size() const { return end - begin; }
};

ChannelStats fit_stats(const ScadaDataset& ds, const RowRange& range);
ChannelStats fit_stats(const ScadaDataset& ds);

/// Per-channel z-score; returns a new dataset with transformed values.
ScadaDataset normalize(const ScadaDataset& ds, const ChannelStats& stats);

struct WindowBatch {
    Tensor windows;  // [N, channels, window_hours]
    std::vector<std::int64_t> window_end_timestamps;
    std::vector<HourLabel> window_labels;  // attack iff any hour attack

    std::size_t count() const { return window_end_timestamps.size(); }
    Tensor window(std::size_t n) const;  // [1, channels, window_hours]
};

WindowBatch make_windows(const ScadaDataset& ds, std::size_t window_hours = 24,
                         std::size_t stride = 1);

/// Chronological split; throws DataError when either side would be shorter
/// than window_hours.
std::pair<RowRange, RowRange> split(const ScadaDataset& ds, double fraction,
                                    std::size_t window_hours = 24);

ScadaDataset slice_rows(const ScadaDataset& ds, const RowRange& range);

// Timestamp helpers (hours since Unix epoch <-> "YYYY-MM-DD HH:MM:SS").
std::int64_t parse_timestamp(const std::string& text);  // throws DataError
std::string format_timestamp(std::int64_t hours_since_epoch);

}  // namespace scadaguard
