#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scadaguard/dataio.hpp"

namespace scadaguard {

/// Physical/operational metadata behind the rule-violation baseline.
/// Hand-authored config; every referenced channel must exist in the
/// dataset being checked.
struct NetworkMeta {
    struct Tank {
        std::string name;
        double diameter = 0.0;  // m
        double min_level = 0.0;
        double max_level = 0.0;
        double elevation = 0.0;
        std::string level_channel;
    };
    struct PumpCurve {
        double a = 0.0;  // head gain = a - b * Q^c
        double b = 0.0;
        double c = 2.0;
    };
    struct PumpStation {
        std::string name;
        std::string inlet_channel;
        std::string outlet_channel;
        std::string flow_channel;
        std::string status_channel;
        double inlet_elevation = 0.0;
        double outlet_elevation = 0.0;
        PumpCurve curve;
    };
    enum class Comparison { Above, Below };
    struct ControlRule {
        std::string actuator_status_channel;
        Comparison comparison = Comparison::Above;
        std::string tank_level_channel;
        double threshold = 0.0;
        bool expected_status = false;  // status the actuator must hold while active
    };
    struct HeadPair {
        std::string upstream_channel;
        std::string downstream_channel;
        double upstream_elevation = 0.0;
        double downstream_elevation = 0.0;
    };
    struct StationPumpMap {
        std::string station;
        std::vector<std::string> tanks;
    };
    struct Tolerances {
        double mass_balance_rel = 0.05;
        std::size_t mass_balance_horizon = 24;
        double head_m = 0.5;
        double pump_rel = 0.10;
        double pump_abs_m = 2.0;
    };

    std::vector<Tank> tanks;
    std::vector<PumpStation> pump_stations;
    std::vector<ControlRule> control_rules;
    std::vector<HeadPair> head_pairs;
    std::vector<StationPumpMap> station_pump_map;
    Tolerances tol;
    double pressure_to_head = 1.0;  // multiply pressure channels to get head in m

    static NetworkMeta from_json_file(const std::string& path);
    static NetworkMeta from_json_text(const std::string& text);
    /// Checks invariants and that every referenced channel exists.
    void validate(const ScadaDataset& ds) const;
};

/// Per-hour violation flags by rule family plus combined and smoothed.
struct RuleFlags {
    std::vector<bool> tank_limit;
    std::vector<bool> control_rule;
    std::vector<bool> mass_balance;
    std::vector<bool> head_feasibility;
    std::vector<bool> pump_curve;
    std::vector<bool> combined;  // OR of the five families
    std::vector<bool> smoothed;  // combined back-flagged 48 hours

    std::size_t hours() const { return combined.size(); }
};

std::vector<bool> check_tank_limits(const ScadaDataset& ds, const NetworkMeta& meta);
std::vector<bool> check_control_rules(const ScadaDataset& ds, const NetworkMeta& meta);
std::vector<bool> check_mass_balance(const ScadaDataset& ds, const NetworkMeta& meta,
                                     std::size_t horizon_hours);
std::vector<bool> check_head_feasibility(const ScadaDataset& ds, const NetworkMeta& meta);
std::vector<bool> check_pump_curve(const ScadaDataset& ds, const NetworkMeta& meta);

/// Runs every family and fills combined + smoothed.
RuleFlags run_all_rules(const ScadaDataset& ds, const NetworkMeta& meta,
                        std::size_t back_hours = 48);

/// Each raw combined flag back-flags the preceding back_hours; idempotent.
std::vector<bool> smooth_flags(const std::vector<bool>& combined, std::size_t back_hours = 48);

std::string rule_flags_csv(const ScadaDataset& ds, const RuleFlags& flags,
                           const std::vector<std::string>& provenance = {});

}  // namespace scadaguard
