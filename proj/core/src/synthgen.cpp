#include "scadaguard/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "nlohmann/json.hpp"
#include "scadaguard/errors.hpp"

namespace scadaguard {

namespace {

using json = nlohmann::json;

constexpr double kPi = 3.141592653589793;

// Emitted series start at an arbitrary fixed instant.
const std::int64_t kBaseHour = parse_timestamp("2017-01-01 00:00:00");

}  // namespace

std::array<double, 24> diurnal_pattern(double mean, double swing) {
    std::array<double, 24> p{};
    for (std::size_t h = 0; h < 24; ++h) {
        // Morning/evening double peak typical of municipal demand.
        const double phase = 2.0 * kPi * static_cast<double>(h) / 24.0;
        p[h] = std::max(0.0, mean + swing * (0.6 * std::sin(phase - kPi / 2.0) +
                                             0.4 * std::sin(2.0 * phase)));
    }
    return p;
}

void SynthNetworkSpec::validate() const {
    if (units.empty()) throw ConfigError("synth spec: at least one unit required");
    if (steps_per_hour < 1) throw ConfigError("synth spec: steps_per_hour must be >= 1");
    for (const auto& u : units) {
        if (!(u.min_level < u.initial_level && u.initial_level < u.max_level)) {
            throw ConfigError("synth spec: unit " + u.tank_name +
                              " requires min < initial < max level");
        }
        if (!(u.rated_flow > 0.0)) {
            throw ConfigError("synth spec: unit " + u.tank_name + " rated_flow must be > 0");
        }
        if (!(u.overflow_level > u.max_level)) {
            throw ConfigError("synth spec: unit " + u.tank_name +
                              " overflow_level must exceed max_level");
        }
        if (!(u.on_below < u.off_above)) {
            throw ConfigError("synth spec: unit " + u.tank_name +
                              " needs on_below < off_above (hysteresis buffer)");
        }
        for (double d : u.demand_pattern) {
            if (d < 0.0) {
                throw ConfigError("synth spec: unit " + u.tank_name +
                                  " demand pattern values must be >= 0");
            }
        }
    }
}

namespace {

SynthUnit unit_from_json(const json& j) {
    SynthUnit u;
    u.tank_name = j.at("tank_name");
    u.pump_name = j.at("pump_name");
    u.area = j.at("area");
    u.initial_level = j.at("initial_level");
    u.min_level = j.at("min_level");
    u.max_level = j.at("max_level");
    u.overflow_level = j.value("overflow_level", u.max_level + 1.0);
    u.elevation = j.value("elevation", 0.0);
    u.on_below = j.at("on_below");
    u.off_above = j.at("off_above");
    u.rated_flow = j.at("rated_flow");
    u.rated_head_gain = j.at("rated_head_gain");
    u.inlet_head = j.at("inlet_head");
    u.demand_noise = j.value("demand_noise", 0.02);
    const json& dp = j.at("demand_pattern");
    if (dp.is_array()) {
        if (dp.size() != 24) {
            throw ConfigError("synth spec: demand_pattern must have 24 values");
        }
        for (std::size_t h = 0; h < 24; ++h) u.demand_pattern[h] = dp[h];
    } else {
        u.demand_pattern = diurnal_pattern(dp.at("mean"), dp.at("swing"));
    }
    return u;
}

}  // namespace

SynthNetworkSpec SynthNetworkSpec::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth spec: invalid JSON: ") + e.what());
    }
    SynthNetworkSpec spec;
    try {
        spec.seed = j.value("seed", 0ull);
        spec.steps_per_hour = j.value("steps_per_hour", spec.steps_per_hour);
        if (j.contains("sensor_noise")) {
            const json& n = j.at("sensor_noise");
            spec.sensor_noise.level_std = n.value("level", spec.sensor_noise.level_std);
            spec.sensor_noise.head_std = n.value("head", spec.sensor_noise.head_std);
            spec.sensor_noise.flow_rel = n.value("flow_rel", spec.sensor_noise.flow_rel);
        }
        for (const auto& u : j.at("units")) spec.units.push_back(unit_from_json(u));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

SynthNetworkSpec SynthNetworkSpec::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::vector<AttackSpec> attacks_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario: invalid JSON: ") + e.what());
    }
    std::vector<AttackSpec> attacks;
    try {
        for (const auto& a : j.value("attacks", json::array())) {
            AttackSpec at;
            at.start_hour = a.at("start");
            at.duration_hours = a.at("duration");
            at.unit = a.at("unit");
            const std::string target = a.at("target");
            if (target == "off_above") at.target = AttackSpec::Target::OffAbove;
            else if (target == "on_below") at.target = AttackSpec::Target::OnBelow;
            else throw ConfigError("scenario: unknown attack target '" + target + "'");
            at.tampered_value = a.at("value");
            if (a.contains("concealment")) {
                const json& c = a.at("concealment");
                const std::string kind = c.value("kind", "none");
                if (kind == "none") at.concealment = AttackSpec::Concealment::None;
                else if (kind == "replay") at.concealment = AttackSpec::Concealment::Replay;
                else if (kind == "offset") at.concealment = AttackSpec::Concealment::Offset;
                else throw ConfigError("scenario: unknown concealment kind '" + kind + "'");
                at.replay_source_hour = c.value("source_hour", 0ull);
                at.offset_value = c.value("offset", 0.0);
                if (c.contains("channels")) {
                    at.concealed_channels = c.at("channels").get<std::vector<std::string>>();
                }
            }
            attacks.push_back(at);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario attacks: ") + e.what());
    }
    return attacks;
}

namespace {

struct HourThresholds {
    double on_below;
    double off_above;
};

ScadaDataset run_simulation(const SynthNetworkSpec& spec, std::size_t hours,
                            const std::vector<AttackSpec>& attacks, std::uint64_t seed,
                            SimTrace* trace) {
    spec.validate();
    if (hours < 24) throw ConfigError("simulate: hours must be >= 24");

    const std::size_t U = spec.units.size();
    ScadaDataset ds;
    for (const auto& u : spec.units) {
        ds.channel_names.push_back(u.tank_name + "_LEVEL");
        ds.channel_names.push_back(u.pump_name + "_STATUS");
        ds.channel_names.push_back(u.pump_name + "_FLOW");
        ds.channel_names.push_back(u.pump_name + "_INLET");
        ds.channel_names.push_back(u.pump_name + "_OUTLET");
    }
    const std::size_t C = ds.channel_names.size();
    ds.values.assign(hours * C, 0.0);
    ds.timestamps.resize(hours);
    ds.labels.assign(hours, HourLabel::Normal);
    for (std::size_t t = 0; t < hours; ++t) {
        ds.timestamps[t] = kBaseHour + static_cast<std::int64_t>(t);
    }
    if (trace) {
        trace->level.assign(hours, std::vector<double>(U, 0.0));
        trace->demand_volume.assign(hours, std::vector<double>(U, 0.0));
        trace->pumped_volume.assign(hours, std::vector<double>(U, 0.0));
        trace->clamp_events = 0;
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<double> level(U);
    std::vector<bool> status(U);
    for (std::size_t u = 0; u < U; ++u) {
        level[u] = spec.units[u].initial_level;
        status[u] = level[u] <= spec.units[u].on_below;
    }

    const double dt = 1.0 / static_cast<double>(spec.steps_per_hour);
    for (std::size_t t = 0; t < hours; ++t) {
        // Per-hour thresholds, tampered inside attack windows.
        std::vector<HourThresholds> thr(U);
        for (std::size_t u = 0; u < U; ++u) {
            thr[u] = {spec.units[u].on_below, spec.units[u].off_above};
        }
        for (const auto& a : attacks) {
            if (t < a.start_hour || t >= a.start_hour + a.duration_hours) continue;
            ds.labels[t] = HourLabel::Attack;
            for (std::size_t u = 0; u < U; ++u) {
                if (spec.units[u].tank_name != a.unit) continue;
                if (a.target == AttackSpec::Target::OffAbove) thr[u].off_above = a.tampered_value;
                else thr[u].on_below = a.tampered_value;
            }
        }

        for (std::size_t u = 0; u < U; ++u) {
            const SynthUnit& unit = spec.units[u];
            // Fixed draw order per unit per hour keeps the stream identical
            // whether or not attacks are active.
            const double demand_draw = normal(rng);
            const double level_noise = normal(rng) * spec.sensor_noise.level_std;
            const double inlet_noise = normal(rng) * spec.sensor_noise.head_std;
            const double outlet_noise = normal(rng) * spec.sensor_noise.head_std;
            const double flow_noise = normal(rng) * spec.sensor_noise.flow_rel;

            const double point_demand = unit.demand_pattern[t % 24];
            const double demand =
                std::max(0.0, point_demand * (1.0 + demand_draw * unit.demand_noise));

            // Hysteresis control at the hour boundary with this hour's rule.
            if (level[u] >= thr[u].off_above) status[u] = false;
            else if (level[u] <= thr[u].on_below) status[u] = true;

            if (trace) trace->level[t][u] = level[u];

            // Boundary samples.
            ds.at(t, 5 * u + 0) = level[u] + level_noise;
            ds.at(t, 5 * u + 1) = status[u] ? 1.0 : 0.0;
            ds.at(t, 5 * u + 3) = unit.inlet_head + inlet_noise;
            ds.at(t, 5 * u + 4) =
                unit.inlet_head + unit.rated_head_gain * (status[u] ? 1.0 : 0.0) + outlet_noise;

            // Sub-stepped physics over the hour.
            double pumped = 0.0;
            for (std::size_t s = 0; s < spec.steps_per_hour; ++s) {
                const double flow = status[u] ? unit.rated_flow : 0.0;
                pumped += flow * dt;
                double next = level[u] + (flow - demand) * dt / unit.area;
                if (next > unit.overflow_level) {
                    next = unit.overflow_level;
                    if (trace) ++trace->clamp_events;
                } else if (next < 0.0) {
                    next = 0.0;
                    if (trace) ++trace->clamp_events;
                }
                level[u] = next;
                if (level[u] >= thr[u].off_above) status[u] = false;
                else if (level[u] <= thr[u].on_below) status[u] = true;
            }
            ds.at(t, 5 * u + 2) = pumped * (1.0 + flow_noise);  // mean flow over the hour
            if (trace) {
                trace->demand_volume[t][u] = demand;  // m^3 over one hour
                trace->pumped_volume[t][u] = pumped;
            }
        }
    }
    return ds;
}

void apply_concealment(ScadaDataset& ds, const SynthNetworkSpec& spec,
                       const std::vector<AttackSpec>& attacks) {
    for (const auto& a : attacks) {
        if (a.concealment == AttackSpec::Concealment::None) continue;
        std::vector<std::string> channels = a.concealed_channels;
        if (channels.empty()) channels.push_back(a.unit + "_LEVEL");
        (void)spec;
        for (const auto& ch : channels) {
            const std::size_t c = ds.channel_index(ch);
            for (std::size_t i = 0; i < a.duration_hours; ++i) {
                const std::size_t dst = a.start_hour + i;
                if (dst >= ds.rows()) break;
                if (a.concealment == AttackSpec::Concealment::Replay) {
                    const std::size_t src = a.replay_source_hour + i;
                    if (src >= ds.rows()) {
                        throw ConfigError("concealment replay window exceeds the dataset");
                    }
                    ds.at(dst, c) = ds.at(src, c);
                } else {
                    ds.at(dst, c) += a.offset_value;
                }
            }
        }
    }
}

}  // namespace

ScadaDataset simulate(const SynthNetworkSpec& spec, std::size_t hours) {
    return run_simulation(spec, hours, {}, spec.seed, nullptr);
}

ScadaDataset simulate_with_trace(const SynthNetworkSpec& spec, std::size_t hours,
                                 SimTrace& trace) {
    return run_simulation(spec, hours, {}, spec.seed, &trace);
}

ScadaDataset inject_attacks(const SynthNetworkSpec& spec, const std::vector<AttackSpec>& attacks,
                            std::size_t hours, std::uint64_t seed,
                            std::vector<std::string>* warnings) {
    // Validate attack windows and pairwise compatibility.
    for (const auto& a : attacks) {
        if (a.duration_hours < 1 || a.start_hour + a.duration_hours > hours) {
            throw ConfigError("attack on " + a.unit + " does not fit in [0," +
                              std::to_string(hours) + ")");
        }
        bool unit_found = false;
        for (const auto& u : spec.units) unit_found |= u.tank_name == a.unit;
        if (!unit_found) throw ConfigError("attack references unknown unit " + a.unit);
    }
    for (std::size_t i = 0; i < attacks.size(); ++i) {
        for (std::size_t j = i + 1; j < attacks.size(); ++j) {
            const auto& a = attacks[i];
            const auto& b = attacks[j];
            const bool overlap = a.start_hour < b.start_hour + b.duration_hours &&
                                 b.start_hour < a.start_hour + a.duration_hours;
            if (overlap && a.unit == b.unit && a.target == b.target) {
                throw ConfigError("overlapping attacks on the same rule of unit " + a.unit);
            }
            if (warnings) {
                const std::size_t gap =
                    a.start_hour < b.start_hour
                        ? b.start_hour - std::min(b.start_hour, a.start_hour + a.duration_hours)
                        : a.start_hour - std::min(a.start_hour, b.start_hour + b.duration_hours);
                if (!overlap && gap < 72) {
                    warnings->push_back("gap between attacks is under 72 h (" +
                                        std::to_string(gap) + " h); disturbances may overlap");
                }
            }
        }
    }
    ScadaDataset ds = run_simulation(spec, hours, attacks, seed, nullptr);
    apply_concealment(ds, spec, attacks);
    return ds;
}

void emit(const ScadaDataset& ds, const std::string& path,
          const std::vector<std::string>& provenance) {
    if (path.empty()) throw ConfigError("emit: empty output path");
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("emit: cannot open for writing: " + path);
    for (const auto& line : provenance) os << "# " << line << "\n";
    os << "DATETIME";
    for (const auto& name : ds.channel_names) os << "," << name;
    if (ds.has_labels()) os << ",ATT_FLAG";
    os << "\n";
    char buf[64];
    for (std::size_t t = 0; t < ds.rows(); ++t) {
        os << format_timestamp(ds.timestamps[t]);
        for (std::size_t c = 0; c < ds.channels(); ++c) {
            std::snprintf(buf, sizeof(buf), ",%.17g", ds.at(t, c));
            os << buf;
        }
        if (ds.has_labels()) {
            os << ","
               << (ds.labels[t] == HourLabel::Attack ? "1"
                   : ds.labels[t] == HourLabel::Normal ? "0"
                                                       : "-999");
        }
        os << "\n";
    }
    if (!os) throw IoError("emit: write failure: " + path);
}

ColumnMap synth_column_map() {
    ColumnMap m;
    m.timestamp_column = "DATETIME";
    m.label_column = "ATT_FLAG";
    return m;
}

}  // namespace scadaguard
