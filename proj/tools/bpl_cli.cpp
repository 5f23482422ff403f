#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "bpl/affinity_scores.hpp"
#include "bpl/config.hpp"
#include "bpl/dataset_io.hpp"
#include "bpl/eval.hpp"
#include "bpl/model.hpp"
#include "bpl/split.hpp"
#include "bpl/synthetic.hpp"
#include "bpl/trainer.hpp"
#include "bpl/types.hpp"

namespace fs = std::filesystem;
using bpl::KeyValueConfig;
using bpl::RatingDataset;

namespace {

int verbosity() {
    const char* v = std::getenv("BPL_VERBOSITY");
    return v != nullptr ? std::atoi(v) : 1;
}

void say(const std::string& message) {
    if (verbosity() >= 1) std::cerr << message << "\n";
}

// Seed resolution: an explicit --seed wins, otherwise the config must carry
// one. Runs without a pinned seed are not reproducible, so refuse them.
void resolve_seed(KeyValueConfig& cfg, bool seed_given, std::uint64_t seed) {
    if (seed_given) {
        cfg.set("seed", std::to_string(seed));
    } else if (!cfg.has("seed")) {
        throw std::runtime_error("missing config key: seed");
    }
}

KeyValueConfig read_config(const std::string& path) {
    if (path.empty()) return KeyValueConfig{};
    return KeyValueConfig::from_file(path);
}

// Rating-level count for loading: explicit config key, else the dimension
// header of a TSV written by this tool.
int resolve_levels(const KeyValueConfig& cfg, const fs::path& sample_tsv) {
    if (cfg.has("levels")) return static_cast<int>(cfg.get_int("levels"));
    std::ifstream in(sample_tsv);
    std::string line;
    if (in && std::getline(in, line)) {
        const auto pos = line.find("levels=");
        if (line.rfind("#users=", 0) == 0 && pos != std::string::npos) {
            return std::atoi(line.c_str() + pos + 7);
        }
    }
    throw std::runtime_error("cannot infer rating levels: no header in " + sample_tsv.string() +
                             " and no levels config key");
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

// The only file allowed to differ between reruns: wall-clock metadata.
void write_run_meta(const fs::path& dir, const std::vector<std::string>& lines) {
    std::ofstream out(dir / "run_meta.txt", std::ios::binary);
    out << "timestamp=" << utc_now() << "\n";
    for (const std::string& line : lines) out << line << "\n";
}

RatingDataset load_required(const fs::path& path, int levels) {
    if (!fs::exists(path)) throw std::runtime_error("missing data file: " + path.string());
    return bpl::load_tsv(path, levels).data;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir, bool seed_given,
                 std::uint64_t seed) {
    KeyValueConfig cfg = read_config(config_path);
    resolve_seed(cfg, seed_given, seed);
    const double val_fraction = cfg.get_double("val_fraction", 0.1);
    if (val_fraction <= 0.0 || val_fraction >= 1.0) {
        throw std::runtime_error("val_fraction must lie in (0,1)");
    }
    const bpl::GeneratorConfig gen = bpl::GeneratorConfig::from_config(cfg);

    say("generating synthetic world (" + std::to_string(gen.num_users) + " users x " +
        std::to_string(gen.num_items) + " items)");
    bpl::SyntheticData data = bpl::generate_synthetic(gen);

    // Carve a validation slice off the observed training records.
    const std::size_t n = data.train.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(bpl::mix_seed(gen.seed, bpl::stream::shuffle));
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
    if (n_val == 0 || n_val >= n) {
        throw std::runtime_error("val_fraction leaves an empty split");
    }
    std::vector<bpl::RatingRecord> train_records, val_records;
    for (std::size_t k = 0; k < n; ++k) {
        const bpl::RatingRecord& rec = data.train.records()[order[k]];
        (k < n_val ? val_records : train_records).push_back(rec);
    }
    const RatingDataset train(data.train.num_users(), data.train.num_items(),
                              data.train.num_levels(), std::move(train_records));
    const RatingDataset validation(data.train.num_users(), data.train.num_items(),
                                   data.train.num_levels(), std::move(val_records));

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    data.world.save(dir);
    bpl::save_tsv(train, dir / "train.tsv");
    bpl::save_tsv(validation, dir / "validation.tsv");
    bpl::save_tsv(data.factual_test, dir / "factual_test.tsv");
    bpl::save_tsv(data.counterfactual_test, dir / "counterfactual_test.tsv");
    cfg.write(dir / "config.cfg");
    write_run_meta(dir, {"command=simulate", "out_dir=" + out_dir});
    say("wrote " + out_dir);
    return 0;
}

int cmd_train(const std::string& mode_name, const std::string& config_path,
              const std::string& data_dir, const std::string& run_dir, bool seed_given,
              std::uint64_t seed) {
    KeyValueConfig cfg = read_config(config_path);
    resolve_seed(cfg, seed_given, seed);
    bpl::TrainingConfig config = bpl::TrainingConfig::from_config(cfg);
    config.validate();

    bpl::ModeSpec mode;
    if (mode_name == "standard") {
        mode = bpl::standard_mode();
    } else if (mode_name == "bpl-soft" || mode_name == "bpl-hard") {
        config.combination_mode = mode_name == "bpl-soft" ? bpl::CombinationMode::soft
                                                          : bpl::CombinationMode::hard;
        mode = bpl::bpl_mode(config);
    } else if (mode_name.rfind("ablation:", 0) == 0) {
        mode = bpl::ablation_mode(mode_name.substr(9), config);
    } else {
        throw std::runtime_error("unknown mode: " + mode_name +
                                 " (expected standard, bpl-soft, bpl-hard or ablation:<name>)");
    }

    const fs::path data(data_dir);
    const int levels = resolve_levels(cfg, data / "train.tsv");
    const RatingDataset train = load_required(data / "train.tsv", levels);
    const RatingDataset validation = load_required(data / "validation.tsv", levels);
    const RatingDataset factual = load_required(data / "factual_test.tsv", levels);
    const RatingDataset counterfactual = load_required(data / "counterfactual_test.tsv", levels);

    // A simulated data dir carries the world tables; they enable the
    // filter-quality column of the loss log.
    bpl::SyntheticWorld world;
    const bool has_oracle = fs::exists(data / "true_ratings.tsv");
    if (has_oracle) world = bpl::SyntheticWorld::load(data);
    const bpl::SyntheticWorld* oracle = has_oracle ? &world : nullptr;

    const bpl::SpaceSplit split =
        bpl::SpaceSplit::build(train, config.enumeration_cap, config.s0_multiple, config.seed);

    const bool needs_inputs = mode.use_t2 || mode.use_t3 || mode.affinity_as_propensity;
    bpl::BplInputs inputs;
    bpl::TrainerInputs run_inputs;
    run_inputs.train = &train;
    run_inputs.validation = &validation;
    run_inputs.oracle = oracle;
    if (needs_inputs) {
        say("training affinity estimator and teacher");
        inputs = bpl::prepare_bpl_inputs(train, validation, split, config);
        run_inputs.split = &inputs.split;
        run_inputs.teacher = &inputs.teacher;
        run_inputs.affinity = &inputs.affinity;
    } else {
        run_inputs.split = &split;
    }

    say("training mode " + mode.name);
    const bpl::TrainResult result = bpl::train_loop(run_inputs, config, mode);
    say("best validation MSE " + std::to_string(result.best_val_mse) + " at epoch " +
        std::to_string(result.best_epoch));

    const fs::path dir(run_dir);
    fs::create_directories(dir);
    KeyValueConfig echo = config.to_config();
    echo.set("mode", mode.name);
    echo.set("levels", std::to_string(levels));
    echo.write(dir / "config.cfg");
    result.model.save(dir / "model.ckpt");
    bpl::write_loss_log(dir / "loss.csv", result.log);
    if (needs_inputs) {
        inputs.affinity.save_tsv(dir / "affinity.tsv");
        inputs.teacher.save_tsv(dir / "teacher.tsv");
    }

    bpl::MetricsReport report = bpl::MetricsReport::compute(result.model, factual, counterfactual);
    char fmt[64];
    std::snprintf(fmt, sizeof(fmt), "%.6f", result.best_val_mse);
    report.metadata["mode"] = mode.name;
    report.metadata["seed"] = cfg.get_string("seed");
    report.metadata["best_epoch"] = std::to_string(result.best_epoch);
    report.metadata["epochs_run"] = std::to_string(result.epochs_run);
    report.metadata["best_val_mse"] = fmt;
    report.write_json(dir / "metrics.json");
    write_run_meta(dir, {"command=train", "mode=" + mode.name, "data_dir=" + data_dir,
                         "run_dir=" + run_dir});
    say("wrote " + run_dir);
    return 0;
}

int cmd_evaluate(const std::vector<std::string>& run_dirs, const std::string& data_dir,
                 const std::string& out_dir, int buckets) {
    const fs::path data(data_dir);
    const int levels = resolve_levels(KeyValueConfig{}, data / "factual_test.tsv");
    const RatingDataset factual = load_required(data / "factual_test.tsv", levels);
    const RatingDataset counterfactual = load_required(data / "counterfactual_test.tsv", levels);

    nlohmann::ordered_json all = nlohmann::ordered_json::array();
    std::string csv = "run,factual_mse,factual_mae,counterfactual_mse,counterfactual_mae,"
                      "harmonic_mean_mse,harmonic_mean_mae\n";
    std::string bucket_csv = "run,bucket,mean_squared_error\n";
    for (const std::string& run : run_dirs) {
        const fs::path ckpt = fs::path(run) / "model.ckpt";
        if (!fs::exists(ckpt)) throw std::runtime_error("missing checkpoint: " + ckpt.string());
        const bpl::PreferenceModel model = bpl::PreferenceModel::load(ckpt, levels);
        bpl::MetricsReport report = bpl::MetricsReport::compute(model, factual, counterfactual);
        report.metadata["run"] = run;
        if (buckets > 0) {
            const fs::path scores_path = fs::path(run) / "affinity.tsv";
            if (!fs::exists(scores_path)) {
                throw std::runtime_error("missing affinity scores: " + scores_path.string());
            }
            const bpl::AffinityScores scores = bpl::AffinityScores::load_tsv(scores_path);
            report.bucket_errors =
                bpl::affinity_bucket_errors(model, counterfactual.records(), scores, buckets);
            for (std::size_t b = 0; b < report.bucket_errors.size(); ++b) {
                char row[128];
                std::snprintf(row, sizeof(row), "%s,%zu,%.6f\n", run.c_str(), b,
                              report.bucket_errors[b]);
                bucket_csv += row;
            }
        }
        char row[512];
        std::snprintf(row, sizeof(row), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", run.c_str(),
                      report.factual_mse, report.factual_mae, report.counterfactual_mse,
                      report.counterfactual_mae, report.harmonic_mean_mse,
                      report.harmonic_mean_mae);
        csv += row;
        all.push_back(nlohmann::ordered_json::parse(report.to_json()));
    }

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    std::ofstream(dir / "evaluation.csv", std::ios::binary) << csv;
    std::ofstream(dir / "evaluation.json", std::ios::binary) << all.dump(2) << "\n";
    if (buckets > 0) std::ofstream(dir / "buckets.csv", std::ios::binary) << bucket_csv;
    say("wrote " + (dir / "evaluation.csv").string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"preference-learning laboratory: simulate, train, evaluate"};
    app.require_subcommand(1);

    std::string config_path, data_dir, run_dir = ".", mode = "standard";
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::vector<std::string> run_dirs;
    int buckets = 0;

    CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic world and its splits");
    sim->add_option("--config", config_path, "key=value config file");
    sim->add_option("--run-dir", run_dir, "output directory")->required();
    sim->add_option("--seed", seed, "override the config seed");

    CLI::App* train = app.add_subcommand("train", "train one model and write a run directory");
    train->add_option("--mode", mode, "standard, bpl-soft, bpl-hard or ablation:<name>");
    train->add_option("--config", config_path, "key=value config file");
    train->add_option("--data-dir", data_dir, "directory produced by simulate (or compatible)")
        ->required();
    train->add_option("--run-dir", run_dir, "output directory")->required();
    train->add_option("--seed", seed, "override the config seed");

    CLI::App* eval = app.add_subcommand("evaluate", "consolidate metrics across run directories");
    eval->add_option("runs", run_dirs, "run directories to evaluate")->required();
    eval->add_option("--data-dir", data_dir, "directory holding the test sets")->required();
    eval->add_option("--run-dir", run_dir, "where to write the consolidated report");
    eval->add_option("--buckets", buckets, "also emit an affinity-bucket error table");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            seed_given = sim->count("--seed") > 0;
            return cmd_simulate(config_path, run_dir, seed_given, seed);
        }
        if (train->parsed()) {
            seed_given = train->count("--seed") > 0;
            return cmd_train(mode, config_path, data_dir, run_dir, seed_given, seed);
        }
        return cmd_evaluate(run_dirs, data_dir, run_dir, buckets);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
