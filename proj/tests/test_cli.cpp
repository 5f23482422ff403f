#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

std::string g_cli;

struct RunOutput {
    int exit_code = -1;
    std::string err;
};

RunOutput run_cli(const std::string& args) {
    const fs::path errfile = fs::temp_directory_path() / "bpl_cli_stderr.txt";
    const std::string cmd =
        "BPL_VERBOSITY=0 " + g_cli + " " + args + " 2>" + errfile.string();
    const int raw = std::system(cmd.c_str());
    RunOutput out;
    out.exit_code = raw == -1 ? -1 : WEXITSTATUS(raw);
    std::ifstream in(errfile);
    std::stringstream buf;
    buf << in.rdbuf();
    out.err = buf.str();
    return out;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "bpl_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

constexpr const char* kSimulateConfig =
    "seed = 5\n"
    "users = 30\n"
    "items = 40\n"
    "density = 0.1\n"
    "factual_test_size = 80\n"
    "counterfactual_test_size = 80\n";

constexpr const char* kTrainConfig =
    "seed = 7\n"
    "embedding_dim = 8\n"
    "batch_size = 128\n"
    "epochs = 12\n"
    "patience = 12\n"
    "warmup_epochs = 2\n"
    "affinity_epochs = 10\n";

// One simulated dataset shared by the training and evaluation cases.
const fs::path& simulated_data() {
    static fs::path dir = [] {
        const fs::path d = fresh_dir("shared_data");
        write_file(d / "gen.cfg", kSimulateConfig);
        const RunOutput out = run_cli("simulate --config " + (d / "gen.cfg").string() +
                                      " --run-dir " + d.string());
        REQUIRE_MESSAGE(out.exit_code == 0, out.err);
        return d;
    }();
    return dir;
}

// Everything but run_meta.txt (the one timestamped file) must be
// byte-identical across reruns.
std::map<std::string, std::string> dir_contents(const fs::path& dir) {
    std::map<std::string, std::string> contents;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), dir).string();
        if (rel == "run_meta.txt") continue;
        contents[rel] = read_file(entry.path());
    }
    return contents;
}

}  // namespace

TEST_CASE("simulate writes the full dataset manifest") {
    const fs::path& dir = simulated_data();
    for (const char* name : {"train.tsv", "validation.tsv", "factual_test.tsv",
                             "counterfactual_test.tsv", "true_ratings.tsv", "exposure.tsv",
                             "popularity.tsv", "generator.cfg", "config.cfg", "run_meta.txt"}) {
        CHECK_MESSAGE(fs::exists(dir / name), name);
    }
    const std::string meta = read_file(dir / "run_meta.txt");
    CHECK(meta.rfind("timestamp=", 0) == 0);
}

TEST_CASE("simulate is reproducible byte for byte") {
    const fs::path a = fresh_dir("sim_a");
    const fs::path b = fresh_dir("sim_b");
    write_file(a / "gen.cfg", kSimulateConfig);
    write_file(b / "gen.cfg", kSimulateConfig);
    REQUIRE(run_cli("simulate --config " + (a / "gen.cfg").string() + " --run-dir " + a.string())
                .exit_code == 0);
    REQUIRE(run_cli("simulate --config " + (b / "gen.cfg").string() + " --run-dir " + b.string())
                .exit_code == 0);
    auto ca = dir_contents(a);
    auto cb = dir_contents(b);
    ca.erase("gen.cfg");
    cb.erase("gen.cfg");
    CHECK(ca == cb);
    CHECK_FALSE(ca.empty());
}

TEST_CASE("a config without a seed is refused by name") {
    const fs::path dir = fresh_dir("no_seed");
    write_file(dir / "gen.cfg", "users = 10\nitems = 10\n");
    const RunOutput out = run_cli("simulate --config " + (dir / "gen.cfg").string() +
                                  " --run-dir " + dir.string());
    CHECK(out.exit_code != 0);
    CHECK(out.err.find("seed") != std::string::npos);
}

TEST_CASE("the seed flag substitutes for the config key") {
    const fs::path dir = fresh_dir("seed_flag");
    write_file(dir / "gen.cfg", "users = 10\nitems = 12\nfactual_test_size = 10\n"
                                "counterfactual_test_size = 10\n");
    const RunOutput out = run_cli("simulate --config " + (dir / "gen.cfg").string() +
                                  " --run-dir " + dir.string() + " --seed 11");
    CHECK_MESSAGE(out.exit_code == 0, out.err);
    CHECK(read_file(dir / "config.cfg").find("seed=11") != std::string::npos);
}

TEST_CASE("an unknown training mode is refused") {
    const fs::path dir = fresh_dir("bad_mode");
    write_file(dir / "train.cfg", kTrainConfig);
    const RunOutput out =
        run_cli("train --mode bpl-medium --config " + (dir / "train.cfg").string() +
                " --data-dir " + simulated_data().string() + " --run-dir " + dir.string());
    CHECK(out.exit_code != 0);
    CHECK(out.err.find("unknown mode") != std::string::npos);
}

TEST_CASE("standard training writes its run directory and reruns identically") {
    const fs::path cfg_dir = fresh_dir("train_cfg");
    write_file(cfg_dir / "train.cfg", kTrainConfig);
    const fs::path a = fresh_dir("train_std_a");
    const fs::path b = fresh_dir("train_std_b");
    for (const fs::path& dir : {a, b}) {
        const RunOutput out =
            run_cli("train --mode standard --config " + (cfg_dir / "train.cfg").string() +
                    " --data-dir " + simulated_data().string() + " --run-dir " + dir.string());
        REQUIRE_MESSAGE(out.exit_code == 0, out.err);
    }
    for (const char* name : {"model.ckpt", "loss.csv", "metrics.json", "config.cfg",
                             "run_meta.txt"}) {
        CHECK_MESSAGE(fs::exists(a / name), name);
    }
    CHECK_FALSE(fs::exists(a / "affinity.tsv"));  // standard mode has no estimator
    CHECK(dir_contents(a) == dir_contents(b));
}

TEST_CASE("the full method leaves its affinity and teacher artifacts behind") {
    const fs::path cfg_dir = fresh_dir("bpl_cfg");
    write_file(cfg_dir / "train.cfg", kTrainConfig);
    const fs::path dir = fresh_dir("train_bpl");
    const RunOutput out =
        run_cli("train --mode bpl-hard --config " + (cfg_dir / "train.cfg").string() +
                " --data-dir " + simulated_data().string() + " --run-dir " + dir.string());
    REQUIRE_MESSAGE(out.exit_code == 0, out.err);
    for (const char* name : {"model.ckpt", "loss.csv", "metrics.json", "affinity.tsv",
                             "teacher.tsv"}) {
        CHECK_MESSAGE(fs::exists(dir / name), name);
    }
    const std::string loss = read_file(dir / "loss.csv");
    CHECK(loss.rfind("epoch,t1,t2,t3,", 0) == 0);
}

TEST_CASE("evaluation demands a checkpoint and names the missing file") {
    const fs::path dir = fresh_dir("eval_missing");
    const RunOutput out = run_cli("evaluate --data-dir " + simulated_data().string() +
                                  " --run-dir " + dir.string() + " " + dir.string());
    CHECK(out.exit_code != 0);
    CHECK(out.err.find("missing checkpoint") != std::string::npos);
    CHECK(out.err.find((dir / "model.ckpt").string()) != std::string::npos);
}

TEST_CASE("evaluation reports every run and the bucket profile on request") {
    const fs::path cfg_dir = fresh_dir("eval_cfg");
    write_file(cfg_dir / "train.cfg", kTrainConfig);
    const fs::path run = fresh_dir("eval_run");
    REQUIRE(run_cli("train --mode bpl-hard --config " + (cfg_dir / "train.cfg").string() +
                    " --data-dir " + simulated_data().string() + " --run-dir " + run.string())
                .exit_code == 0);

    const fs::path report = fresh_dir("eval_report");
    const RunOutput out =
        run_cli("evaluate --data-dir " + simulated_data().string() + " --run-dir " +
                report.string() + " --buckets 3 " + run.string());
    REQUIRE_MESSAGE(out.exit_code == 0, out.err);
    CHECK(fs::exists(report / "evaluation.csv"));
    CHECK(fs::exists(report / "evaluation.json"));
    CHECK(fs::exists(report / "buckets.csv"));

    const std::string csv = read_file(report / "evaluation.csv");
    CHECK(csv.rfind("run,factual_mse,", 0) == 0);
    CHECK(csv.find("harmonic_mean_mae") != std::string::npos);
    const std::string buckets = read_file(report / "buckets.csv");
    CHECK(buckets.find("bucket") != std::string::npos);
}

TEST_CASE("a bucket profile without stored affinity scores is an error") {
    const fs::path cfg_dir = fresh_dir("bucket_cfg");
    write_file(cfg_dir / "train.cfg", kTrainConfig);
    const fs::path run = fresh_dir("bucket_run");
    REQUIRE(run_cli("train --mode standard --config " + (cfg_dir / "train.cfg").string() +
                    " --data-dir " + simulated_data().string() + " --run-dir " + run.string())
                .exit_code == 0);
    const RunOutput out =
        run_cli("evaluate --data-dir " + simulated_data().string() + " --run-dir " +
                run.string() + " --buckets 3 " + run.string());
    CHECK(out.exit_code != 0);
    CHECK(out.err.find("missing affinity scores") != std::string::npos);
}

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: test_cli <path to command under test> [doctest args]\n");
        return 64;
    }
    g_cli = argv[1];
    doctest::Context context;
    context.applyCommandLine(argc - 1, argv + 1);
    return context.run();
}
