#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scadaguard/dataio.hpp"

namespace scadaguard {

/// One feedback-controlled tank + pump unit of the desk-scale surrogate
/// network. Emits five channels: {tank}_LEVEL, {pump}_STATUS, {pump}_FLOW,
/// {pump}_INLET, {pump}_OUTLET.
struct SynthUnit {
    std::string tank_name = "T1";
    std::string pump_name = "PU1";
    double area = 50.0;             // m^2
    double initial_level = 3.0;     // m
    double min_level = 0.5;         // legal floor (rule limit)
    double max_level = 4.5;         // legal ceiling (rule limit)
    double overflow_level = 5.6;    // physical clamp, above the legal ceiling
    double elevation = 0.0;
    double on_below = 2.0;          // pump turns on at or below this level
    double off_above = 4.0;         // pump turns off at or above this level
    double rated_flow = 60.0;       // m^3/h
    double rated_head_gain = 40.0;  // m
    double inlet_head = 50.0;       // m
    std::array<double, 24> demand_pattern{};  // m^3/h, diurnal
    double demand_noise = 0.02;     // std as fraction of point demand
};

struct SensorNoise {
    double level_std = 0.01;  // m
    double head_std = 0.05;   // m
    double flow_rel = 0.01;   // fraction of flow
};

struct SynthNetworkSpec {
    std::vector<SynthUnit> units;
    SensorNoise sensor_noise;
    std::size_t steps_per_hour = 6;  // control/physics sub-steps
    std::uint64_t seed = 0;

    static SynthNetworkSpec from_json_file(const std::string& path);
    static SynthNetworkSpec from_json_text(const std::string& text);
    void validate() const;
};

struct AttackSpec {
    enum class Target { OffAbove, OnBelow };
    enum class Concealment { None, Replay, Offset };

    std::size_t start_hour = 0;
    std::size_t duration_hours = 1;
    std::string unit;  // tank_name of the targeted unit
    Target target = Target::OffAbove;
    double tampered_value = 0.0;

    Concealment concealment = Concealment::None;
    std::size_t replay_source_hour = 0;  // start of the historic window copied over
    double offset_value = 0.0;
    std::vector<std::string> concealed_channels;  // default: the unit's level channel
};

/// Exact (noise-free-sensor) physics per hour, for conservation checks.
struct SimTrace {
    // [hour][unit]
    std::vector<std::vector<double>> level;          // at the hour boundary
    std::vector<std::vector<double>> demand_volume;  // m^3 drawn during the hour
    std::vector<std::vector<double>> pumped_volume;  // m^3 pumped during the hour
    std::size_t clamp_events = 0;                    // overflow/empty saturations
};

ScadaDataset simulate(const SynthNetworkSpec& spec, std::size_t hours);
ScadaDataset simulate_with_trace(const SynthNetworkSpec& spec, std::size_t hours,
                                 SimTrace& trace);

/// Same physics with tampered control thresholds during each attack window;
/// labels attack exactly on [start, start+duration). Returns warnings (e.g.
/// attack gaps under 72 h) via the optional out-parameter.
ScadaDataset inject_attacks(const SynthNetworkSpec& spec, const std::vector<AttackSpec>& attacks,
                            std::size_t hours, std::uint64_t seed,
                            std::vector<std::string>* warnings = nullptr);

/// CSV in the exact format load_csv consumes (DATETIME, channels, ATT_FLAG).
void emit(const ScadaDataset& ds, const std::string& path,
          const std::vector<std::string>& provenance = {});

/// Column map matching emit()'s output.
ColumnMap synth_column_map();

/// A diurnal demand pattern oscillating around `mean` with the given swing.
std::array<double, 24> diurnal_pattern(double mean, double swing);

/// Attack list parsed from the scenario JSON ("attacks" array).
std::vector<AttackSpec> attacks_from_json_file(const std::string& path);

}  // namespace scadaguard
