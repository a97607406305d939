#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "scadaguard/errors.hpp"
#include "scadaguard/synthgen.hpp"

using namespace scadaguard;

namespace {

SynthNetworkSpec small_spec(std::uint64_t seed = 7) {
    SynthNetworkSpec spec;
    SynthUnit u;  // defaults: T1/PU1, area 50, hysteresis 2.0/4.0
    u.demand_pattern = diurnal_pattern(30.0, 15.0);
    spec.units.push_back(u);
    spec.seed = seed;
    return spec;
}

SynthNetworkSpec noiseless(SynthNetworkSpec spec) {
    spec.sensor_noise = {0.0, 0.0, 0.0};
    for (auto& u : spec.units) u.demand_noise = 0.0;
    return spec;
}

}  // namespace

TEST_CASE("spec validation catches impossible units") {
    SynthNetworkSpec spec = small_spec();
    CHECK_NOTHROW(spec.validate());

    SynthNetworkSpec empty;
    CHECK_THROWS_AS(empty.validate(), ConfigError);

    SynthNetworkSpec s2 = small_spec();
    s2.steps_per_hour = 0;
    CHECK_THROWS_AS(s2.validate(), ConfigError);

    SynthNetworkSpec s3 = small_spec();
    s3.units[0].on_below = s3.units[0].off_above;  // no hysteresis buffer
    CHECK_THROWS_AS(s3.validate(), ConfigError);

    SynthNetworkSpec s4 = small_spec();
    s4.units[0].overflow_level = s4.units[0].max_level;  // clamp below legal max
    CHECK_THROWS_AS(s4.validate(), ConfigError);

    SynthNetworkSpec s5 = small_spec();
    s5.units[0].initial_level = s5.units[0].min_level;  // must start strictly inside
    CHECK_THROWS_AS(s5.validate(), ConfigError);

    CHECK_THROWS_AS(simulate(small_spec(), 23), ConfigError);  // under one day
}

TEST_CASE("simulation is deterministic given the seed") {
    ScadaDataset a = simulate(small_spec(3), 96);
    ScadaDataset b = simulate(small_spec(3), 96);
    CHECK(a.values == b.values);  // bitwise
    CHECK(a.timestamps == b.timestamps);
    CHECK(a.labels == b.labels);

    ScadaDataset c = simulate(small_spec(4), 96);
    CHECK(a.values != c.values);

    CHECK(a.channel_names == std::vector<std::string>{"T1_LEVEL", "PU1_STATUS", "PU1_FLOW",
                                                      "PU1_INLET", "PU1_OUTLET"});
    CHECK(a.rows() == 96);
    CHECK(format_timestamp(a.timestamps.front()) == "2017-01-01 00:00:00");
}

TEST_CASE("per-hour volume conservation in the exact trace") {
    SimTrace trace;
    ScadaDataset ds = simulate_with_trace(small_spec(11), 240, trace);
    REQUIRE(trace.level.size() == 240);
    CHECK(trace.clamp_events == 0);
    const double area = 50.0;
    for (std::size_t t = 0; t + 1 < 240; ++t) {
        const double expected =
            trace.level[t][0] + (trace.pumped_volume[t][0] - trace.demand_volume[t][0]) / area;
        CHECK(trace.level[t + 1][0] == doctest::Approx(expected).epsilon(1e-9));
    }
    // The controller keeps the tank inside the physical band throughout.
    for (std::size_t t = 0; t < 240; ++t) {
        CHECK(trace.level[t][0] >= 0.0);
        CHECK(trace.level[t][0] <= 5.6);
    }
}

TEST_CASE("noiseless constant-demand unit follows the exact ramp") {
    SynthNetworkSpec spec = noiseless(small_spec());
    SynthUnit& u = spec.units[0];
    u.area = 1.0;
    u.min_level = 0.1;
    u.initial_level = 0.4;
    u.max_level = 99.0;
    u.overflow_level = 200.0;
    u.on_below = 0.5;
    u.off_above = 50.0;
    u.rated_flow = 2.0;
    u.demand_pattern.fill(1.0);

    ScadaDataset ds = simulate(spec, 24);
    // Pump on from the start (0.4 <= 0.5), net inflow 1 m^3/h into 1 m^2.
    for (std::size_t t = 0; t < 10; ++t) {
        CHECK(ds.at(t, 0) == doctest::Approx(0.4 + static_cast<double>(t)).epsilon(1e-12));
        CHECK(ds.at(t, 1) == 1.0);
        CHECK(ds.at(t, 2) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(ds.at(t, 4) - ds.at(t, 3) == doctest::Approx(40.0).epsilon(1e-12));
    }
}

TEST_CASE("zero demand with a mid-band start leaves everything flat") {
    SynthNetworkSpec spec = noiseless(small_spec());
    spec.units[0].demand_pattern.fill(0.0);
    ScadaDataset ds = simulate(spec, 48);
    for (std::size_t t = 0; t < 48; ++t) {
        CHECK(ds.at(t, 0) == 3.0);  // initial level, untouched
        CHECK(ds.at(t, 1) == 0.0);  // pump never starts
        CHECK(ds.at(t, 2) == 0.0);
    }
}

TEST_CASE("empty attack list reproduces the plain simulation bitwise") {
    SynthNetworkSpec spec = small_spec(19);
    ScadaDataset plain = simulate(spec, 120);
    ScadaDataset injected = inject_attacks(spec, {}, 120, spec.seed);
    CHECK(plain.values == injected.values);
    CHECK(plain.labels == injected.labels);
}

TEST_CASE("attack labels cover exactly the attack window") {
    SynthNetworkSpec spec = small_spec(19);
    AttackSpec a;
    a.start_hour = 40;
    a.duration_hours = 24;
    a.unit = "T1";
    a.target = AttackSpec::Target::OffAbove;
    a.tampered_value = 5.0;
    ScadaDataset ds = inject_attacks(spec, {a}, 120, spec.seed);
    for (std::size_t t = 0; t < 120; ++t) {
        const bool inside = t >= 40 && t < 64;
        CHECK((ds.labels[t] == HourLabel::Attack) == inside);
    }
}

TEST_CASE("raising the off threshold drives the tank past its legal ceiling") {
    SynthNetworkSpec spec = noiseless(small_spec(2));
    AttackSpec a;
    a.start_hour = 48;
    a.duration_hours = 48;
    a.unit = "T1";
    a.target = AttackSpec::Target::OffAbove;
    a.tampered_value = 5.4;  // legal max is 4.5, physical clamp 5.6
    ScadaDataset ds = inject_attacks(spec, {a}, 168, spec.seed);

    double before = 0.0, during = 0.0;
    for (std::size_t t = 0; t < 48; ++t) before = std::max(before, ds.at(t, 0));
    for (std::size_t t = 48; t < 96; ++t) during = std::max(during, ds.at(t, 0));
    CHECK(before <= 4.5);
    CHECK(during > 4.5);
}

TEST_CASE("replay concealment copies history into the level channel only") {
    SynthNetworkSpec spec = small_spec(23);
    AttackSpec a;
    a.start_hour = 72;
    a.duration_hours = 24;
    a.unit = "T1";
    a.target = AttackSpec::Target::OffAbove;
    a.tampered_value = 5.0;

    ScadaDataset bare = inject_attacks(spec, {a}, 168, spec.seed);

    a.concealment = AttackSpec::Concealment::Replay;
    a.replay_source_hour = 24;
    ScadaDataset hidden = inject_attacks(spec, {a}, 168, spec.seed);

    for (std::size_t i = 0; i < 24; ++i) {
        // The emitted level repeats the historic day...
        CHECK(hidden.at(72 + i, 0) == hidden.at(24 + i, 0));
    }
    // ...while the physical channels keep telling the true story.
    bool flow_same = true;
    for (std::size_t t = 0; t < 168; ++t) flow_same = flow_same && bare.at(t, 2) == hidden.at(t, 2);
    CHECK(flow_same);
    CHECK(bare.values != hidden.values);

    SUBCASE("replay window must fit inside the dataset") {
        a.replay_source_hour = 160;  // 160 + 24 > 168
        CHECK_THROWS_AS(inject_attacks(spec, {a}, 168, spec.seed), ConfigError);
    }
}

TEST_CASE("offset concealment shifts the channel by a constant") {
    SynthNetworkSpec spec = small_spec(29);
    AttackSpec a;
    a.start_hour = 48;
    a.duration_hours = 12;
    a.unit = "T1";
    a.target = AttackSpec::Target::OnBelow;
    a.tampered_value = 1.0;
    ScadaDataset bare = inject_attacks(spec, {a}, 120, spec.seed);

    a.concealment = AttackSpec::Concealment::Offset;
    a.offset_value = -0.75;
    ScadaDataset hidden = inject_attacks(spec, {a}, 120, spec.seed);
    for (std::size_t t = 0; t < 120; ++t) {
        const double want = bare.at(t, 0) + (t >= 48 && t < 60 ? -0.75 : 0.0);
        CHECK(hidden.at(t, 0) == doctest::Approx(want).epsilon(1e-15));
    }
}

TEST_CASE("attack list validation") {
    SynthNetworkSpec spec = small_spec();
    AttackSpec a;
    a.start_hour = 30;
    a.duration_hours = 20;
    a.unit = "T1";
    a.tampered_value = 5.0;

    SUBCASE("unknown unit") {
        a.unit = "T9";
        CHECK_THROWS_AS(inject_attacks(spec, {a}, 120, 1), ConfigError);
    }
    SUBCASE("window past the end") {
        a.start_hour = 110;
        CHECK_THROWS_AS(inject_attacks(spec, {a}, 120, 1), ConfigError);
    }
    SUBCASE("same-rule overlap is refused, different rules may overlap") {
        AttackSpec b = a;
        b.start_hour = 40;  // overlaps [30,50) on the same off_above rule
        CHECK_THROWS_AS(inject_attacks(spec, {a, b}, 120, 1), ConfigError);
        b.target = AttackSpec::Target::OnBelow;
        b.tampered_value = 1.0;
        CHECK_NOTHROW(inject_attacks(spec, {a, b}, 120, 1));
    }
    SUBCASE("close spacing only warns") {
        AttackSpec b = a;
        b.start_hour = 60;  // 10 h after the first ends
        b.target = AttackSpec::Target::OnBelow;
        b.tampered_value = 1.0;
        std::vector<std::string> warnings;
        CHECK_NOTHROW(inject_attacks(spec, {a, b}, 240, 1, &warnings));
        CHECK(!warnings.empty());
    }
}

TEST_CASE("emit and load round trip") {
    SynthNetworkSpec spec = small_spec(31);
    AttackSpec a;
    a.start_hour = 50;
    a.duration_hours = 10;
    a.unit = "T1";
    a.tampered_value = 5.0;
    ScadaDataset ds = inject_attacks(spec, {a}, 96, spec.seed);

    const std::string path =
        (std::filesystem::temp_directory_path() / "sg_synth_roundtrip.csv").string();
    emit(ds, path, {"seed=31"});

    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    CHECK(first == "# seed=31");
    in.close();

    ScadaDataset back = load_csv(path, synth_column_map());
    CHECK(back.channel_names == ds.channel_names);
    CHECK(back.timestamps == ds.timestamps);
    CHECK(back.values == ds.values);  // %.17g keeps doubles bit-exact
    CHECK(back.labels == ds.labels);
    std::remove(path.c_str());

    CHECK_THROWS_AS(emit(ds, ""), ConfigError);
    CHECK_THROWS_AS(emit(ds, "/no/such/dir/out.csv"), IoError);
}

TEST_CASE("scenario json parsing") {
    SynthNetworkSpec spec = SynthNetworkSpec::from_json_text(R"({
        "seed": 5,
        "steps_per_hour": 4,
        "sensor_noise": {"level": 0.02, "head": 0.1, "flow_rel": 0.005},
        "units": [{
            "tank_name": "T9", "pump_name": "PU9", "area": 12.0,
            "initial_level": 2.0, "min_level": 0.5, "max_level": 4.0,
            "overflow_level": 5.0, "on_below": 1.5, "off_above": 3.5,
            "rated_flow": 40.0, "rated_head_gain": 30.0, "inlet_head": 45.0,
            "demand_pattern": {"mean": 20.0, "swing": 8.0}
        }]
    })");
    CHECK(spec.seed == 5);
    CHECK(spec.steps_per_hour == 4);
    CHECK(spec.sensor_noise.level_std == 0.02);
    REQUIRE(spec.units.size() == 1);
    CHECK(spec.units[0].tank_name == "T9");
    CHECK(spec.units[0].area == 12.0);

    CHECK_THROWS_AS(SynthNetworkSpec::from_json_text("{broken"), ConfigError);
    CHECK_THROWS_AS(SynthNetworkSpec::from_json_text(R"({"units": []})"), ConfigError);
    CHECK_THROWS_AS(SynthNetworkSpec::from_json_file("/no/such/scenario.json"), ConfigError);
}

TEST_CASE("diurnal pattern has the requested scale") {
    std::array<double, 24> p = diurnal_pattern(30.0, 15.0);
    double mean = 0.0, lo = p[0], hi = p[0];
    for (double v : p) {
        mean += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        CHECK(v >= 0.0);
    }
    mean /= 24.0;
    CHECK(mean == doctest::Approx(30.0).epsilon(0.05));
    CHECK(hi - lo > 10.0);   // a real swing...
    CHECK(hi - lo <= 30.0);  // ...bounded by twice the requested amplitude
}

TEST_CASE("synth column map matches the emitted format") {
    ColumnMap m = synth_column_map();
    CHECK(m.timestamp_column == "DATETIME");
    REQUIRE(m.label_column.has_value());
    CHECK(*m.label_column == "ATT_FLAG");
    CHECK(m.attack_values.count("1") == 1);
    CHECK(m.normal_values.count("0") == 1);
}
