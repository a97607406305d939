#include "scadaguard/rulecheck.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "nlohmann/json.hpp"
#include "scadaguard/errors.hpp"

namespace scadaguard {

namespace {

using json = nlohmann::json;

constexpr double kPi = 3.141592653589793;

NetworkMeta::Comparison parse_comparison(const std::string& s) {
    if (s == "above") return NetworkMeta::Comparison::Above;
    if (s == "below") return NetworkMeta::Comparison::Below;
    throw ConfigError("network meta: comparison must be 'above' or 'below', got '" + s + "'");
}

}  // namespace

NetworkMeta NetworkMeta::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("network meta: invalid JSON: ") + e.what());
    }
    NetworkMeta m;
    try {
        if (j.contains("pressure_to_head")) m.pressure_to_head = j.at("pressure_to_head");
        for (const auto& t : j.value("tanks", json::array())) {
            Tank tank;
            tank.name = t.at("name");
            tank.diameter = t.at("diameter");
            tank.min_level = t.at("min_level");
            tank.max_level = t.at("max_level");
            tank.elevation = t.value("elevation", 0.0);
            tank.level_channel = t.at("level_channel");
            m.tanks.push_back(tank);
        }
        for (const auto& s : j.value("pump_stations", json::array())) {
            PumpStation st;
            st.name = s.at("name");
            st.inlet_channel = s.at("inlet_channel");
            st.outlet_channel = s.at("outlet_channel");
            st.flow_channel = s.at("flow_channel");
            st.status_channel = s.at("status_channel");
            st.inlet_elevation = s.value("inlet_elevation", 0.0);
            st.outlet_elevation = s.value("outlet_elevation", 0.0);
            if (s.contains("curve")) {
                st.curve.a = s.at("curve").at("a");
                st.curve.b = s.at("curve").value("b", 0.0);
                st.curve.c = s.at("curve").value("c", 2.0);
            }
            m.pump_stations.push_back(st);
        }
        for (const auto& r : j.value("control_rules", json::array())) {
            ControlRule rule;
            rule.actuator_status_channel = r.at("actuator");
            rule.comparison = parse_comparison(r.at("comparison"));
            rule.tank_level_channel = r.at("tank_channel");
            rule.threshold = r.at("threshold");
            rule.expected_status = r.at("expected_status").get<int>() != 0;
            m.control_rules.push_back(rule);
        }
        for (const auto& p : j.value("head_pairs", json::array())) {
            HeadPair hp;
            hp.upstream_channel = p.at("upstream");
            hp.downstream_channel = p.at("downstream");
            hp.upstream_elevation = p.value("upstream_elevation", 0.0);
            hp.downstream_elevation = p.value("downstream_elevation", 0.0);
            m.head_pairs.push_back(hp);
        }
        for (const auto& sm : j.value("station_pump_map", json::array())) {
            StationPumpMap e;
            e.station = sm.at("station");
            e.tanks = sm.at("tanks").get<std::vector<std::string>>();
            m.station_pump_map.push_back(e);
        }
        if (j.contains("tolerances")) {
            const json& t = j.at("tolerances");
            m.tol.mass_balance_rel = t.value("mass_balance_rel", m.tol.mass_balance_rel);
            m.tol.mass_balance_horizon =
                t.value("mass_balance_horizon", m.tol.mass_balance_horizon);
            m.tol.head_m = t.value("head_m", m.tol.head_m);
            m.tol.pump_rel = t.value("pump_rel", m.tol.pump_rel);
            m.tol.pump_abs_m = t.value("pump_abs_m", m.tol.pump_abs_m);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("network meta: ") + e.what());
    }
    return m;
}

NetworkMeta NetworkMeta::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open network meta file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

void NetworkMeta::validate(const ScadaDataset& ds) const {
    auto need = [&](const std::string& ch, const std::string& where) {
        try {
            ds.channel_index(ch);
        } catch (const DataError&) {
            throw ConfigError("network meta: " + where + " references channel '" + ch +
                              "' absent from the dataset");
        }
    };
    for (const auto& t : tanks) {
        if (!(t.diameter > 0.0) || !std::isfinite(t.diameter)) {
            throw ConfigError("network meta: tank " + t.name + " has invalid diameter");
        }
        if (!(t.max_level > t.min_level)) {
            throw ConfigError("network meta: tank " + t.name + " max_level must exceed min_level");
        }
        need(t.level_channel, "tank " + t.name);
    }
    for (const auto& s : pump_stations) {
        need(s.inlet_channel, "station " + s.name);
        need(s.outlet_channel, "station " + s.name);
        need(s.flow_channel, "station " + s.name);
        need(s.status_channel, "station " + s.name);
    }
    for (const auto& r : control_rules) {
        need(r.actuator_status_channel, "control rule");
        need(r.tank_level_channel, "control rule");
    }
    for (const auto& p : head_pairs) {
        need(p.upstream_channel, "head pair");
        need(p.downstream_channel, "head pair");
    }
}

std::vector<bool> check_tank_limits(const ScadaDataset& ds, const NetworkMeta& meta) {
    const std::size_t T = ds.rows();
    std::vector<bool> flags(T, false);
    for (const auto& tank : meta.tanks) {
        const std::size_t c = ds.channel_index(tank.level_channel);
        for (std::size_t h = 0; h < T; ++h) {
            const double level = ds.at(h, c);
            // Strict exceedance: level exactly at a limit is legal.
            if (level < tank.min_level || level > tank.max_level) flags[h] = true;
        }
    }
    return flags;
}

std::vector<bool> check_control_rules(const ScadaDataset& ds, const NetworkMeta& meta) {
    const std::size_t T = ds.rows();
    std::vector<bool> flags(T, false);
    for (const auto& rule : meta.control_rules) {
        const std::size_t lvl = ds.channel_index(rule.tank_level_channel);
        const std::size_t act = ds.channel_index(rule.actuator_status_channel);
        // One-hour actuation latitude: the condition is read at h-1 and the
        // actuator is judged at h.
        for (std::size_t h = 1; h < T; ++h) {
            const double level = ds.at(h - 1, lvl);
            const bool active = rule.comparison == NetworkMeta::Comparison::Above
                                    ? level > rule.threshold
                                    : level < rule.threshold;
            if (!active) continue;
            const bool status = ds.at(h, act) > 0.5;
            if (status != rule.expected_status) flags[h] = true;
        }
    }
    return flags;
}

std::vector<bool> check_mass_balance(const ScadaDataset& ds, const NetworkMeta& meta,
                                     std::size_t horizon_hours) {
    const std::size_t T = ds.rows();
    std::vector<bool> flags(T, false);
    if (meta.tanks.empty() || meta.station_pump_map.empty() || horizon_hours == 0 ||
        T <= horizon_hours) {
        return flags;
    }
    std::vector<std::size_t> level_cols;
    std::vector<double> areas;
    for (const auto& t : meta.tanks) {
        level_cols.push_back(ds.channel_index(t.level_channel));
        areas.push_back(kPi * (t.diameter / 2.0) * (t.diameter / 2.0));
    }
    std::vector<std::size_t> flow_cols;
    for (const auto& e : meta.station_pump_map) {
        for (const auto& s : meta.pump_stations) {
            if (s.name == e.station) flow_cols.push_back(ds.channel_index(s.flow_channel));
        }
    }
    for (std::size_t h = horizon_hours; h < T; ++h) {
        double stored = 0.0;
        for (std::size_t i = 0; i < level_cols.size(); ++i) {
            stored += areas[i] * (ds.at(h, level_cols[i]) - ds.at(h - horizon_hours, level_cols[i]));
        }
        double pumped = 0.0;
        for (std::size_t c : flow_cols) {
            for (std::size_t t = h - horizon_hours; t < h; ++t) pumped += ds.at(t, c);  // flow * 1h
        }
        if (stored > pumped * (1.0 + meta.tol.mass_balance_rel)) flags[h] = true;
    }
    return flags;
}

std::vector<bool> check_head_feasibility(const ScadaDataset& ds, const NetworkMeta& meta) {
    const std::size_t T = ds.rows();
    std::vector<bool> flags(T, false);
    for (const auto& pair : meta.head_pairs) {
        const std::size_t up = ds.channel_index(pair.upstream_channel);
        const std::size_t dn = ds.channel_index(pair.downstream_channel);
        for (std::size_t h = 0; h < T; ++h) {
            const double up_head = pair.upstream_elevation + ds.at(h, up) * meta.pressure_to_head;
            const double dn_head =
                pair.downstream_elevation + ds.at(h, dn) * meta.pressure_to_head;
            if (dn_head > up_head + meta.tol.head_m) flags[h] = true;
        }
    }
    return flags;
}

std::vector<bool> check_pump_curve(const ScadaDataset& ds, const NetworkMeta& meta) {
    const std::size_t T = ds.rows();
    std::vector<bool> flags(T, false);
    for (const auto& st : meta.pump_stations) {
        const std::size_t in = ds.channel_index(st.inlet_channel);
        const std::size_t out = ds.channel_index(st.outlet_channel);
        const std::size_t flow = ds.channel_index(st.flow_channel);
        const std::size_t status = ds.channel_index(st.status_channel);
        for (std::size_t h = 0; h < T; ++h) {
            const double q = ds.at(h, flow);
            if (ds.at(h, status) < 0.5 || q <= 0.0) continue;  // pump not running
            const double expected = st.curve.a - st.curve.b * std::pow(q, st.curve.c);
            const double inlet_head =
                st.inlet_elevation + ds.at(h, in) * meta.pressure_to_head;
            const double outlet_head =
                st.outlet_elevation + ds.at(h, out) * meta.pressure_to_head;
            const double measured = outlet_head - inlet_head;
            const double tolerance =
                std::max(meta.tol.pump_rel * std::abs(expected), meta.tol.pump_abs_m);
            if (std::abs(measured - expected) > tolerance) flags[h] = true;
        }
    }
    return flags;
}

std::vector<bool> smooth_flags(const std::vector<bool>& combined, std::size_t back_hours) {
    const std::size_t T = combined.size();
    std::vector<bool> out(T, false);
    // smoothed[h] iff any raw flag in [h, h + back_hours].
    std::size_t next_flag = T;  // index of the nearest raw flag at or after h
    for (std::size_t h = T; h-- > 0;) {
        if (combined[h]) next_flag = h;
        out[h] = next_flag != T && next_flag - h <= back_hours;
    }
    return out;
}

RuleFlags run_all_rules(const ScadaDataset& ds, const NetworkMeta& meta,
                        std::size_t back_hours) {
    meta.validate(ds);
    RuleFlags f;
    f.tank_limit = check_tank_limits(ds, meta);
    f.control_rule = check_control_rules(ds, meta);
    f.mass_balance = check_mass_balance(ds, meta, meta.tol.mass_balance_horizon);
    f.head_feasibility = check_head_feasibility(ds, meta);
    f.pump_curve = check_pump_curve(ds, meta);
    const std::size_t T = ds.rows();
    f.combined.assign(T, false);
    for (std::size_t h = 0; h < T; ++h) {
        f.combined[h] = f.tank_limit[h] || f.control_rule[h] || f.mass_balance[h] ||
                        f.head_feasibility[h] || f.pump_curve[h];
    }
    f.smoothed = smooth_flags(f.combined, back_hours);
    return f;
}

std::string rule_flags_csv(const ScadaDataset& ds, const RuleFlags& flags,
                           const std::vector<std::string>& provenance) {
    std::ostringstream os;
    for (const auto& line : provenance) os << "# " << line << "\n";
    os << "timestamp,tank_limit,control_rule,mass_balance,head_feasibility,pump_curve,"
          "combined,smoothed";
    if (ds.has_labels()) os << ",label";
    os << "\n";
    for (std::size_t h = 0; h < flags.hours(); ++h) {
        os << format_timestamp(ds.timestamps[h]) << "," << flags.tank_limit[h] << ","
           << flags.control_rule[h] << "," << flags.mass_balance[h] << ","
           << flags.head_feasibility[h] << "," << flags.pump_curve[h] << ","
           << flags.combined[h] << "," << flags.smoothed[h];
        if (ds.has_labels()) {
            os << ","
               << (ds.labels[h] == HourLabel::Attack ? "1"
                   : ds.labels[h] == HourLabel::Normal ? "0"
                                                       : "-999");
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace scadaguard
