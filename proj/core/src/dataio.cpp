#include "scadaguard/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nlohmann/json.hpp"
#include "scadaguard/errors.hpp"

namespace scadaguard {

namespace {

using json = nlohmann::json;

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

// Days from civil date, proleptic Gregorian (Hinnant's algorithm).
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

}  // namespace

std::int64_t parse_timestamp(const std::string& raw) {
    const std::string text = trim(raw);
    int y, mo, d, h, mi = 0, s = 0;
    // ISO "YYYY-MM-DD HH[:MM[:SS]]"
    if (std::sscanf(text.c_str(), "%d-%d-%d %d:%d:%d", &y, &mo, &d, &h, &mi, &s) >= 4) {
        return days_from_civil(y, mo, d) * 24 + h;
    }
    // BATADAL-style "DD/MM/YY HH"
    if (std::sscanf(text.c_str(), "%d/%d/%d %d", &d, &mo, &y, &h) == 4) {
        if (y < 100) y += 2000;
        return days_from_civil(y, mo, d) * 24 + h;
    }
    // Bare hour index.
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec == std::errc() && p == text.data() + text.size()) return v;
    throw DataError("unparseable timestamp: '" + text + "'");
}

std::string format_timestamp(std::int64_t hours) {
    const std::int64_t days = hours >= 0 ? hours / 24 : (hours - 23) / 24;
    const int h = static_cast<int>(hours - days * 24);
    int y, m, d;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:00:00", y, m, d, h);
    return buf;
}

std::size_t ScadaDataset::channel_index(const std::string& name) const {
    for (std::size_t i = 0; i < channel_names.size(); ++i) {
        if (channel_names[i] == name) return i;
    }
    throw DataError("channel not found in dataset: " + name);
}

ColumnMap ColumnMap::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("column map: invalid JSON: ") + e.what());
    }
    ColumnMap m;
    if (j.contains("timestamp")) m.timestamp_column = j.at("timestamp").get<std::string>();
    if (j.contains("channels")) m.channel_columns = j.at("channels").get<std::vector<std::string>>();
    if (j.contains("label")) {
        const json& l = j.at("label");
        m.label_column = l.at("column").get<std::string>();
        auto read_set = [&](const char* key, std::set<std::string>& dst) {
            if (l.contains(key)) {
                dst.clear();
                for (const auto& v : l.at(key)) dst.insert(v.get<std::string>());
            }
        };
        read_set("attack", m.attack_values);
        read_set("normal", m.normal_values);
        read_set("unlabeled", m.unlabeled_values);
    }
    return m;
}

ColumnMap ColumnMap::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open column map file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

ScadaDataset load_csv(const std::string& path, const ColumnMap& mapping) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path);

    std::string line;
    std::size_t lineno = 0;
    // Header (skipping provenance comments).
    do {
        if (!std::getline(in, line)) throw DataError("empty dataset file: " + path);
        ++lineno;
    } while (!line.empty() && line[0] == '#');
    const std::vector<std::string> header = split_csv_line(line);

    auto column_of = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw DataError("missing column '" + name + "' in " + path);
    };

    const std::size_t ts_col = column_of(mapping.timestamp_column);
    std::optional<std::size_t> label_col;
    if (mapping.label_column) label_col = column_of(*mapping.label_column);

    ScadaDataset ds;
    std::vector<std::size_t> chan_cols;
    if (!mapping.channel_columns.empty()) {
        for (const auto& name : mapping.channel_columns) chan_cols.push_back(column_of(name));
        ds.channel_names = mapping.channel_columns;
    } else {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i == ts_col || (label_col && i == *label_col)) continue;
            chan_cols.push_back(i);
            ds.channel_names.push_back(header[i]);
        }
    }
    if (chan_cols.empty()) throw DataError("no sensor columns found in " + path);

    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("row " + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()) + " in " + path);
        }
        std::int64_t ts;
        try {
            ts = parse_timestamp(cells[ts_col]);
        } catch (const DataError& e) {
            throw DataError("row " + std::to_string(lineno) + ": " + e.what());
        }
        if (!ds.timestamps.empty()) {
            const std::int64_t prev = ds.timestamps.back();
            if (ts == prev) {
                throw DataError("row " + std::to_string(lineno) + ": duplicate timestamp " +
                                format_timestamp(ts));
            }
            if (ts != prev + 1) {
                throw DataError("row " + std::to_string(lineno) + ": non-hourly gap between " +
                                format_timestamp(prev) + " and " + format_timestamp(ts));
            }
        }
        ds.timestamps.push_back(ts);
        for (std::size_t c : chan_cols) {
            const std::string& cell = cells[c];
            double v;
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || p != cell.data() + cell.size()) {
                throw DataError("row " + std::to_string(lineno) + ": unparseable number '" +
                                cell + "' in column '" + header[c] + "'");
            }
            ds.values.push_back(v);
        }
        if (label_col) {
            const std::string& cell = cells[*label_col];
            if (mapping.attack_values.count(cell)) {
                ds.labels.push_back(HourLabel::Attack);
            } else if (mapping.normal_values.count(cell)) {
                ds.labels.push_back(HourLabel::Normal);
            } else if (mapping.unlabeled_values.count(cell)) {
                ds.labels.push_back(HourLabel::Unlabeled);
            } else {
                throw DataError("row " + std::to_string(lineno) + ": unknown label value '" +
                                cell + "'");
            }
        }
    }
    if (ds.rows() == 0) throw DataError("dataset has no data rows: " + path);
    return ds;
}

ChannelStats fit_stats(const ScadaDataset& ds, const RowRange& range) {
    if (range.begin >= range.end || range.end > ds.rows()) {
        throw DataError("fit_stats: empty or out-of-range row range");
    }
    const std::size_t C = ds.channels();
    const double n = static_cast<double>(range.size());
    ChannelStats st;
    st.mean.assign(C, 0.0);
    st.std.assign(C, 0.0);
    for (std::size_t r = range.begin; r < range.end; ++r)
        for (std::size_t c = 0; c < C; ++c) st.mean[c] += ds.at(r, c);
    for (std::size_t c = 0; c < C; ++c) st.mean[c] /= n;
    for (std::size_t r = range.begin; r < range.end; ++r)
        for (std::size_t c = 0; c < C; ++c) {
            const double d = ds.at(r, c) - st.mean[c];
            st.std[c] += d * d;
        }
    for (std::size_t c = 0; c < C; ++c) {
        st.std[c] = std::max(std::sqrt(st.std[c] / n), 1e-6);
    }
    return st;
}

ChannelStats fit_stats(const ScadaDataset& ds) { return fit_stats(ds, {0, ds.rows()}); }

ScadaDataset normalize(const ScadaDataset& ds, const ChannelStats& stats) {
    if (stats.mean.size() != ds.channels()) {
        throw DataError("normalize: stats for " + std::to_string(stats.mean.size()) +
                        " channels applied to dataset with " + std::to_string(ds.channels()));
    }
    ScadaDataset out = ds;
    const std::size_t C = ds.channels();
    for (std::size_t r = 0; r < ds.rows(); ++r)
        for (std::size_t c = 0; c < C; ++c) {
            out.at(r, c) = (ds.at(r, c) - stats.mean[c]) / stats.std[c];
        }
    return out;
}

Tensor WindowBatch::window(std::size_t n) const {
    const std::size_t C = windows.shape[1], W = windows.shape[2];
    Tensor out = Tensor::zeros({1, C, W});
    std::copy(windows.data.begin() + static_cast<std::ptrdiff_t>(n * C * W),
              windows.data.begin() + static_cast<std::ptrdiff_t>((n + 1) * C * W),
              out.data.begin());
    return out;
}

WindowBatch make_windows(const ScadaDataset& ds, std::size_t window_hours, std::size_t stride) {
    if (window_hours == 0 || stride == 0) {
        throw ConfigError("make_windows: window_hours and stride must be positive");
    }
    if (ds.rows() < window_hours) {
        throw DataError("make_windows: dataset has " + std::to_string(ds.rows()) +
                        " rows, shorter than window of " + std::to_string(window_hours));
    }
    const std::size_t T = ds.rows(), C = ds.channels(), W = window_hours;
    const std::size_t N = (T - W) / stride + 1;
    WindowBatch wb;
    wb.windows = Tensor::zeros({N, C, W});
    wb.window_end_timestamps.resize(N);
    wb.window_labels.assign(N, HourLabel::Normal);
    for (std::size_t n = 0; n < N; ++n) {
        const std::size_t start = n * stride;
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < W; ++t) {
                wb.windows.at(n, c, t) = ds.at(start + t, c);
            }
        wb.window_end_timestamps[n] = ds.timestamps[start + W - 1];
        if (ds.has_labels()) {
            bool any_attack = false, any_unlabeled = false;
            for (std::size_t t = 0; t < W; ++t) {
                if (ds.labels[start + t] == HourLabel::Attack) any_attack = true;
                if (ds.labels[start + t] == HourLabel::Unlabeled) any_unlabeled = true;
            }
            wb.window_labels[n] = any_attack ? HourLabel::Attack
                                 : any_unlabeled ? HourLabel::Unlabeled
                                                 : HourLabel::Normal;
        } else {
            wb.window_labels[n] = HourLabel::Unlabeled;
        }
    }
    return wb;
}

std::pair<RowRange, RowRange> split(const ScadaDataset& ds, double fraction,
                                    std::size_t window_hours) {
    if (fraction <= 0.0 || fraction >= 1.0) {
        throw ConfigError("split: fraction must be in (0,1)");
    }
    const std::size_t cut = static_cast<std::size_t>(
        std::floor(static_cast<double>(ds.rows()) * fraction));
    RowRange train{0, cut};
    RowRange holdout{cut, ds.rows()};
    if (train.size() < window_hours || holdout.size() < window_hours) {
        throw DataError("split: a side would have fewer than " + std::to_string(window_hours) +
                        " rows (train " + std::to_string(train.size()) + ", holdout " +
                        std::to_string(holdout.size()) + ")");
    }
    return {train, holdout};
}

ScadaDataset slice_rows(const ScadaDataset& ds, const RowRange& range) {
    if (range.begin >= range.end || range.end > ds.rows()) {
        throw DataError("slice_rows: invalid range");
    }
    ScadaDataset out;
    out.channel_names = ds.channel_names;
    const std::size_t C = ds.channels();
    out.timestamps.assign(ds.timestamps.begin() + static_cast<std::ptrdiff_t>(range.begin),
                          ds.timestamps.begin() + static_cast<std::ptrdiff_t>(range.end));
    out.values.assign(ds.values.begin() + static_cast<std::ptrdiff_t>(range.begin * C),
                      ds.values.begin() + static_cast<std::ptrdiff_t>(range.end * C));
    if (ds.has_labels()) {
        out.labels.assign(ds.labels.begin() + static_cast<std::ptrdiff_t>(range.begin),
                          ds.labels.begin() + static_cast<std::ptrdiff_t>(range.end));
    }
    return out;
}

}  // namespace scadaguard
