// scadaguard: train a VAE anomaly detector on SCADA time series, score
// windows with log reconstruction probability, and cross-check with a
// rule-violation baseline. Subcommands: gen, train, score, threshold,
// eval, rules.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"

#include "scadaguard/dataio.hpp"
#include "scadaguard/detector.hpp"
#include "scadaguard/errors.hpp"
#include "scadaguard/evaluation.hpp"
#include "scadaguard/rulecheck.hpp"
#include "scadaguard/synthgen.hpp"
#include "scadaguard/training.hpp"
#include "scadaguard/vae.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace scadaguard;

namespace {

constexpr const char* kVersion = SCADAGUARD_VERSION;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << content;
    if (!os) throw IoError("write failure: " + path);
}

std::string fnv1a_digest(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Header comment lines stamped into every output artifact.
std::vector<std::string> provenance(std::uint64_t seed, const std::vector<std::string>& inputs) {
    std::vector<std::string> lines;
    lines.push_back(std::string("scadaguard ") + kVersion);
    lines.push_back("seed: " + std::to_string(seed));
    for (const auto& p : inputs) {
        lines.push_back("input: " + p + " fnv1a=" + fnv1a_digest(read_file(p)));
    }
    return lines;
}

/// Paths inside config files resolve against the config file's directory.
std::string resolve(const std::string& base_file, const std::string& path) {
    fs::path p(path);
    if (p.is_absolute()) return path;
    return (fs::path(base_file).parent_path() / p).string();
}

ColumnMap column_map_from(const std::string& path) {
    if (path.empty()) return ColumnMap{};
    return ColumnMap::from_json_file(path);
}

ThresholdSet thresholds_from_csv_list(const std::string& list) {
    std::vector<ThresholdSet::Entry> entries;
    std::stringstream ss(list);
    std::string cell;
    std::size_t i = 0;
    while (std::getline(ss, cell, ',')) {
        try {
            entries.push_back({"t" + std::to_string(++i), std::stod(cell)});
        } catch (const std::exception&) {
            throw ConfigError("bad threshold value: '" + cell + "'");
        }
    }
    return ThresholdSet::make(std::move(entries));
}

/// Reads back the CSV written by lrp_series_csv: '#' comments, then
/// timestamp,lrp[,flag columns...][,label].
struct LoadedLrp {
    LrpSeries series;
    AlarmSeries alarms;
};

LoadedLrp load_lrp_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) header.push_back(cell);
        break;
    }
    if (header.size() < 2 || header[0] != "timestamp" || header[1] != "lrp") {
        throw DataError(path + ": expected an LRP CSV with columns timestamp,lrp,...");
    }
    const bool labeled = header.back() == "label";
    const std::size_t flag_cols = header.size() - 2 - (labeled ? 1 : 0);

    LoadedLrp out;
    for (std::size_t f = 0; f < flag_cols; ++f) {
        out.alarms.threshold_names.push_back(header[2 + f]);
        out.alarms.flags.emplace_back();
    }
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != header.size()) {
            throw DataError(path + ": row " + std::to_string(row) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(header.size()));
        }
        out.series.window_end_timestamps.push_back(parse_timestamp(cells[0]));
        try {
            out.series.lrp.push_back(std::stod(cells[1]));
        } catch (const std::exception&) {
            throw DataError(path + ": row " + std::to_string(row) + ": bad lrp '" + cells[1] +
                            "'");
        }
        for (std::size_t f = 0; f < flag_cols; ++f) {
            out.alarms.flags[f].push_back(cells[2 + f] == "1");
        }
        if (labeled) {
            const std::string& l = cells.back();
            out.series.labels.push_back(l == "1"   ? HourLabel::Attack
                                        : l == "0" ? HourLabel::Normal
                                                   : HourLabel::Unlabeled);
        } else {
            out.series.labels.push_back(HourLabel::Unlabeled);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
};

int cmd_gen(const GenArgs& a) {
    SynthNetworkSpec spec = SynthNetworkSpec::from_json_file(a.config);
    if (a.seed) spec.seed = *a.seed;

    json j = json::parse(read_file(a.config));
    const std::size_t normal_hours = j.value("normal_hours", std::size_t{2160});
    const std::size_t attack_hours = j.value("attack_hours", std::size_t{1440});
    std::vector<AttackSpec> attacks = attacks_from_json_file(a.config);

    fs::create_directories(a.out);
    const auto prov = provenance(spec.seed, {a.config});

    ScadaDataset train = simulate(spec, normal_hours);
    emit(train, (fs::path(a.out) / "train.csv").string(), prov);

    std::vector<std::string> warnings;
    ScadaDataset attacked = inject_attacks(spec, attacks, attack_hours, spec.seed + 1, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    emit(attacked, (fs::path(a.out) / "attack.csv").string(), prov);

    std::cout << "wrote " << (fs::path(a.out) / "train.csv").string() << " (" << train.rows()
              << " h) and " << (fs::path(a.out) / "attack.csv").string() << " ("
              << attacked.rows() << " h, " << attacks.size() << " attacks)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string config;
    std::string out = ".";
    std::string model;  // for --online; defaults to <out>/model.bin
    bool online = false;
    std::optional<std::uint64_t> seed;
};

VaeConfig vae_config_from(const json& j) {
    VaeConfig cfg;
    cfg.channels = j.value("channels", std::size_t{0});  // 0: take from data
    cfg.window_hours = j.value("window_hours", cfg.window_hours);
    cfg.pool_size = j.value("pool_size", cfg.pool_size);
    cfg.latent_dim = j.value("latent_dim", cfg.latent_dim);
    if (j.contains("conv_specs")) {
        cfg.conv_specs.clear();
        for (const auto& c : j.at("conv_specs")) {
            cfg.conv_specs.push_back({c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>()});
        }
    }
    if (j.contains("dense_units")) {
        cfg.dense_units = j.at("dense_units").get<std::vector<std::size_t>>();
    }
    return cfg;
}

int cmd_train(const TrainArgs& a) {
    json j;
    try {
        j = json::parse(read_file(a.config));
    } catch (const json::exception& e) {
        throw ConfigError(a.config + ": invalid JSON: " + e.what());
    }
    if (!j.contains("data")) throw ConfigError(a.config + ": missing \"data\" path");
    const std::string data_path = resolve(a.config, j.at("data"));

    ColumnMap cmap;
    std::vector<std::string> inputs{a.config, data_path};
    if (j.contains("column_map_file")) {
        const std::string p = resolve(a.config, j.at("column_map_file"));
        cmap = ColumnMap::from_json_file(p);
        inputs.push_back(p);
    } else if (j.contains("column_map")) {
        cmap = ColumnMap::from_json_text(j.at("column_map").dump());
    }

    const std::uint64_t seed = a.seed ? *a.seed : j.value("seed", std::uint64_t{0});
    fs::create_directories(a.out);
    const auto prov = provenance(seed, inputs);

    ScadaDataset ds = load_csv(data_path, cmap);

    if (a.online) {
        const std::string model_path =
            a.model.empty() ? (fs::path(a.out) / "model.bin").string() : a.model;
        VaeModel model = load_model(model_path);
        if (model.config.channels != ds.channels()) {
            throw DataError("online: dataset has " + std::to_string(ds.channels()) +
                            " channels, model expects " + std::to_string(model.config.channels));
        }
        ScadaDataset norm = normalize(ds, {model.norm_stats.mean, model.norm_stats.std});
        WindowBatch batch = make_windows(norm, model.config.window_hours);
        AdamState adam;
        adam.alpha = j.value("learning_rate", adam.alpha);
        const std::size_t steps = j.value("online_steps", std::size_t{100});
        online_update(model, batch, adam, steps, seed);
        save_model(model, model_path);
        std::cout << "updated " << model_path << " with " << steps << " steps on "
                  << batch.count() << " windows\n";
        return 0;
    }

    VaeConfig vcfg = j.contains("vae") ? vae_config_from(j.at("vae")) : VaeConfig{};
    if (vcfg.channels == 0 || !j.contains("vae") || !j.at("vae").contains("channels")) {
        vcfg.channels = ds.channels();
    }
    if (vcfg.channels != ds.channels()) {
        throw ConfigError("config says " + std::to_string(vcfg.channels) +
                          " channels but the dataset has " + std::to_string(ds.channels()));
    }
    vcfg.seed = seed;
    vcfg.validate();

    TrainConfig tcfg;
    if (j.contains("train")) {
        const json& t = j.at("train");
        tcfg.batch_size = t.value("batch_size", tcfg.batch_size);
        tcfg.epochs = t.value("epochs", tcfg.epochs);
        if (t.contains("grad_clip_norm")) {
            if (t.at("grad_clip_norm").is_null()) tcfg.grad_clip_norm.reset();
            else tcfg.grad_clip_norm = t.at("grad_clip_norm").get<double>();
        }
        if (t.contains("early_stop_patience")) {
            tcfg.early_stop_patience = t.at("early_stop_patience").get<std::size_t>();
        }
    }
    tcfg.validate();

    const double train_fraction = j.value("train_fraction", 0.9);
    auto [train_range, valid_range] = split(ds, train_fraction, vcfg.window_hours);

    ChannelStats stats = fit_stats(ds, train_range);
    ScadaDataset norm = normalize(ds, stats);
    WindowBatch train_batch = make_windows(slice_rows(norm, train_range), vcfg.window_hours);
    WindowBatch valid_batch = make_windows(slice_rows(norm, valid_range), vcfg.window_hours);

    VaeModel model = make_vae_model(vcfg);
    model.channel_names = ds.channel_names;
    model.norm_stats = {stats.mean, stats.std};

    TrainReport report = fit(model, train_batch, &valid_batch, tcfg, seed);

    const std::string model_path = (fs::path(a.out) / "model.bin").string();
    save_model(model, model_path);
    std::ostringstream rep;
    for (const auto& line : prov) rep << "# " << line << "\n";
    rep << report.to_csv();
    write_file((fs::path(a.out) / "train_report.csv").string(), rep.str());

    std::cout << report.to_table();
    std::cout << "wrote " << model_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// score

struct ScoreArgs {
    std::string model;
    std::string data;
    std::string column_map;
    std::string thresholds;  // "v1,v2,..."
    std::string out = ".";
    bool svg = false;
    std::size_t mc_draws = 0;  // 0: posterior mode
    std::optional<std::uint64_t> seed;
};

int cmd_score(const ScoreArgs& a) {
    VaeModel model = load_model(a.model);
    ScadaDataset ds = load_csv(a.data, column_map_from(a.column_map));
    ScadaDataset norm = normalize(ds, {model.norm_stats.mean, model.norm_stats.std});
    WindowBatch batch = make_windows(norm, model.config.window_hours);

    const std::uint64_t seed = a.seed.value_or(0);
    const LrpSampling sampling =
        a.mc_draws > 0 ? LrpSampling::mc(a.mc_draws, seed) : LrpSampling::mode();
    LrpSeries series = score_series(model, batch, sampling);
    series.model_id = fnv1a_digest(read_file(a.model));

    AlarmSeries alarms;
    ThresholdSet tset;
    if (!a.thresholds.empty()) {
        tset = thresholds_from_csv_list(a.thresholds);
        alarms = apply_thresholds(series, tset);
    }

    fs::create_directories(a.out);
    std::vector<std::string> inputs{a.model, a.data};
    if (!a.column_map.empty()) inputs.push_back(a.column_map);
    auto prov = provenance(seed, inputs);
    prov.push_back("sampling: " + sampling.describe());

    const std::string csv_path = (fs::path(a.out) / "lrp.csv").string();
    write_file(csv_path, lrp_series_csv(series, alarms, prov));
    std::cout << "wrote " << csv_path << " (" << series.count() << " windows)\n";
    if (a.svg) {
        const std::string svg_path = (fs::path(a.out) / "lrp.svg").string();
        write_file(svg_path, lrp_series_svg(series, tset));
        std::cout << "wrote " << svg_path << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// threshold / eval

struct ThresholdArgs {
    std::string lrp;
    std::optional<double> quantile;
};

int cmd_threshold(const ThresholdArgs& a) {
    LoadedLrp loaded = load_lrp_csv(a.lrp);
    if (a.quantile) {
        const double t = quantile_threshold(loaded.series, *a.quantile);
        std::printf("threshold %.17g (quantile %g of %zu windows)\n", t, *a.quantile,
                    loaded.series.count());
        return 0;
    }
    LrpSeries labeled;
    std::vector<HourLabel> labels;
    filter_labeled(loaded.series, labeled, labels);
    if (labeled.count() == 0) {
        throw DataError(a.lrp + ": no labeled windows; use --quantile for label-free selection");
    }
    OptimalThreshold best = optimal_threshold_f1(labeled, labels);
    std::printf("threshold %.17g (f1 %.6f over %zu labeled windows)\n", best.threshold, best.f1,
                labeled.count());
    return 0;
}

struct EvalArgs {
    std::string lrp;
    std::string out = ".";
};

int cmd_eval(const EvalArgs& a) {
    LoadedLrp loaded = load_lrp_csv(a.lrp);
    LrpSeries labeled;
    std::vector<HourLabel> labels;
    filter_labeled(loaded.series, labeled, labels);
    if (labeled.count() == 0) throw DataError(a.lrp + ": no labeled windows to evaluate");

    RocCurve curve = roc(labeled, labels);  // refuses single-class labels
    OptimalThreshold best = optimal_threshold_f1(labeled, labels);

    std::vector<bool> flags(labeled.count());
    for (std::size_t i = 0; i < labeled.count(); ++i) flags[i] = labeled.lrp[i] < best.threshold;
    ConfusionMatrix cm = confusion(flags, labels);
    std::cout << confusion_report(cm, precision_recall_f1(cm));
    std::printf("auc %.6f\n", curve.auc);
    std::printf("optimal threshold %.17g (f1 %.6f)\n", best.threshold, best.f1);

    fs::create_directories(a.out);
    const std::string roc_path = (fs::path(a.out) / "roc.csv").string();
    write_file(roc_path, roc_csv(curve, provenance(0, {a.lrp})));
    std::cout << "wrote " << roc_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// rules

struct RulesArgs {
    std::string data;
    std::string meta;
    std::string column_map;
    std::string out = ".";
};

int cmd_rules(const RulesArgs& a) {
    NetworkMeta meta = NetworkMeta::from_json_file(a.meta);
    ScadaDataset ds = load_csv(a.data, column_map_from(a.column_map));
    meta.validate(ds);

    RuleFlags flags = run_all_rules(ds, meta);
    fs::create_directories(a.out);
    std::vector<std::string> inputs{a.data, a.meta};
    if (!a.column_map.empty()) inputs.push_back(a.column_map);
    const std::string csv_path = (fs::path(a.out) / "rule_flags.csv").string();
    write_file(csv_path, rule_flags_csv(ds, flags, provenance(0, inputs)));

    std::size_t raw = 0;
    for (bool f : flags.combined) raw += f;
    std::cout << "wrote " << csv_path << " (" << raw << " raw flags over " << flags.hours()
              << " hours)\n";

    if (ds.has_labels()) {
        std::vector<bool> fl;
        std::vector<HourLabel> labels;
        for (std::size_t i = 0; i < ds.rows(); ++i) {
            if (ds.labels[i] == HourLabel::Unlabeled) continue;
            fl.push_back(flags.smoothed[i]);
            labels.push_back(ds.labels[i]);
        }
        if (!fl.empty()) {
            ConfusionMatrix cm = confusion(fl, labels);
            std::cout << "smoothed flags vs labels:\n"
                      << confusion_report(cm, precision_recall_f1(cm));
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string("scadaguard ") + kVersion +
                 " - VAE anomaly detection for SCADA time series"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen", "Generate synthetic train/attack CSVs");
    gen->add_option("--config", gen_args.config, "Scenario JSON")
        ->required()
        ->envname("SCADAGUARD_CONFIG");
    gen->add_option("--out", gen_args.out, "Output directory")->envname("SCADAGUARD_OUT");
    gen->add_option("--seed", gen_args.seed, "Override scenario seed")
        ->envname("SCADAGUARD_SEED");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train (or --online update) a model");
    train->add_option("--config", train_args.config, "Run config JSON")
        ->required()
        ->envname("SCADAGUARD_CONFIG");
    train->add_option("--out", train_args.out, "Output directory")->envname("SCADAGUARD_OUT");
    train->add_option("--seed", train_args.seed, "Override config seed")
        ->envname("SCADAGUARD_SEED");
    train->add_flag("--online", train_args.online, "Update an existing model in place");
    train->add_option("--model", train_args.model, "Model file for --online")
        ->envname("SCADAGUARD_MODEL");

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "Score a dataset with a trained model");
    score->add_option("--model", score_args.model, "Model file")
        ->required()
        ->envname("SCADAGUARD_MODEL");
    score->add_option("--data", score_args.data, "Dataset CSV")
        ->required()
        ->envname("SCADAGUARD_DATA");
    score->add_option("--column-map", score_args.column_map, "Column map JSON")
        ->envname("SCADAGUARD_COLUMN_MAP");
    score->add_option("--thresholds", score_args.thresholds,
                      "Comma-separated LRP thresholds, strictly decreasing")
        ->envname("SCADAGUARD_THRESHOLDS");
    score->add_option("--out", score_args.out, "Output directory")->envname("SCADAGUARD_OUT");
    score->add_flag("--svg", score_args.svg, "Also write an SVG plot");
    score->add_option("--mc", score_args.mc_draws, "Monte-Carlo draws (default: posterior mode)");
    score->add_option("--seed", score_args.seed, "Monte-Carlo noise seed")
        ->envname("SCADAGUARD_SEED");

    ThresholdArgs thr_args;
    auto* thr = app.add_subcommand("threshold", "Pick a threshold from an LRP CSV");
    thr->add_option("--lrp", thr_args.lrp, "LRP CSV from `score`")
        ->required()
        ->envname("SCADAGUARD_LRP");
    thr->add_option("--quantile", thr_args.quantile, "Lower-tail quantile in (0,1); label-free")
        ->envname("SCADAGUARD_QUANTILE");

    EvalArgs eval_args;
    auto* ev = app.add_subcommand("eval", "Evaluate a labeled LRP CSV (confusion, ROC, AUC)");
    ev->add_option("--lrp", eval_args.lrp, "LRP CSV from `score`")
        ->required()
        ->envname("SCADAGUARD_LRP");
    ev->add_option("--out", eval_args.out, "Output directory")->envname("SCADAGUARD_OUT");

    RulesArgs rules_args;
    auto* rules = app.add_subcommand("rules", "Rule-violation baseline over a dataset");
    rules->add_option("--data", rules_args.data, "Dataset CSV")
        ->required()
        ->envname("SCADAGUARD_DATA");
    rules->add_option("--meta", rules_args.meta, "Network metadata JSON")
        ->required()
        ->envname("SCADAGUARD_META");
    rules->add_option("--column-map", rules_args.column_map, "Column map JSON")
        ->envname("SCADAGUARD_COLUMN_MAP");
    rules->add_option("--out", rules_args.out, "Output directory")->envname("SCADAGUARD_OUT");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_args);
        if (train->parsed()) return cmd_train(train_args);
        if (score->parsed()) return cmd_score(score_args);
        if (thr->parsed()) return cmd_threshold(thr_args);
        if (ev->parsed()) return cmd_eval(eval_args);
        if (rules->parsed()) return cmd_rules(rules_args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 5;
    }
    return 2;
}
