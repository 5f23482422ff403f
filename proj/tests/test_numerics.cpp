#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "bpl/checkpoint.hpp"
#include "bpl/grad_check.hpp"
#include "bpl/parameters.hpp"

using namespace bpl;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
    return fs::temp_directory_path() / name;
}

ParameterBlock random_block(const char* name, std::size_t n, std::uint64_t seed) {
    ParameterBlock block(name, {n});
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : block.values) v = normal(rng);
    return block;
}

}  // namespace

TEST_CASE("parameter block carries matching value and gradient buffers") {
    ParameterBlock block("demo", {3, 4});
    CHECK(block.size() == 12);
    CHECK(block.values.size() == block.gradient.size());
    block.gradient[5] = 2.5;
    block.zero_gradient();
    for (double g : block.gradient) CHECK(g == 0.0);
}

TEST_CASE("adam leaves values unchanged on zero gradient without weight decay") {
    ParameterBlock block = random_block("p", 8, 11);
    const std::vector<double> before = block.values;
    AdamState state(block.size(), AdamConfig{});
    state.step(block);
    CHECK(block.values == before);
    CHECK(state.step_count() == 1);
}

TEST_CASE("first adam step moves by -lr * sign(gradient) up to epsilon") {
    ParameterBlock block = random_block("p", 6, 12);
    const std::vector<double> before = block.values;
    AdamConfig config;
    config.learning_rate = 0.01;
    AdamState state(block.size(), config);
    const std::vector<double> grads = {1.5, -0.2, 3.0, -4.0, 0.7, -0.01};
    block.gradient = grads;
    state.step(block);
    for (std::size_t i = 0; i < block.size(); ++i) {
        const double delta = block.values[i] - before[i];
        const double expected = -config.learning_rate * (grads[i] > 0 ? 1.0 : -1.0);
        CHECK(delta == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("decoupled weight decay scales values by 1 - lr * decay") {
    ParameterBlock block = random_block("p", 5, 13);
    const std::vector<double> before = block.values;
    AdamConfig config;
    config.learning_rate = 0.05;
    config.weight_decay = 0.2;
    AdamState state(block.size(), config);
    state.step(block);
    for (std::size_t i = 0; i < block.size(); ++i) {
        CHECK(block.values[i] ==
              doctest::Approx(before[i] * (1.0 - 0.05 * 0.2)).epsilon(1e-12));
    }
}

TEST_CASE("adam rejects non-finite gradients naming the block") {
    ParameterBlock block("sick_block", {2});
    block.gradient[1] = std::nan("");
    AdamState state(block.size(), AdamConfig{});
    CHECK_THROWS_WITH(state.step(block), doctest::Contains("sick_block"));
}

TEST_CASE("gradient buffer is cleared after each optimizer step") {
    ParameterBlock block = random_block("p", 4, 14);
    block.gradient = {1.0, 2.0, 3.0, 4.0};
    AdamState state(block.size(), AdamConfig{});
    state.step(block);
    for (double g : block.gradient) CHECK(g == 0.0);
}

TEST_CASE("per-coordinate first-step magnitude respects the adam bound") {
    ParameterBlock block = random_block("p", 64, 15);
    const std::vector<double> before = block.values;
    AdamConfig config;
    AdamState state(block.size(), config);
    std::mt19937_64 rng(16);
    std::normal_distribution<double> normal(0.0, 10.0);
    for (double& g : block.gradient) g = normal(rng);
    state.step(block);
    const double bound =
        config.learning_rate * (1.0 + 1e-3) / std::sqrt(1.0 - config.beta2);
    for (std::size_t i = 0; i < block.size(); ++i) {
        CHECK(std::fabs(block.values[i] - before[i]) <= bound);
    }
}

TEST_CASE("identical seeds and configs produce bitwise-identical trajectories") {
    auto run = [] {
        ParameterBlock block = random_block("p", 16, 99);
        AdamState state(block.size(), AdamConfig{});
        std::mt19937_64 rng(7);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int step = 0; step < 25; ++step) {
            for (double& g : block.gradient) g = normal(rng);
            state.step(block);
        }
        return block.values;
    };
    CHECK(run() == run());
}

TEST_CASE("finite differences confirm the exact gradient of a quadratic") {
    ParameterBlock block = random_block("theta", 10, 21);
    std::vector<ParameterBlock*> blocks = {&block};
    auto loss = [&] {
        double sum = 0.0;
        for (double v : block.values) sum += 0.5 * v * v;
        return sum;
    };
    auto gradients = [&] {
        for (std::size_t i = 0; i < block.size(); ++i) block.gradient[i] = block.values[i];
    };
    const GradCheckReport report = finite_diff_check(blocks, loss, gradients, 1e-4);
    CHECK(report.max_relative_error < 1e-6);
    CHECK(report.passed(1e-6));
}

TEST_CASE("a doubled gradient is reported with relative error near one half") {
    ParameterBlock block = random_block("theta", 10, 22);
    std::vector<ParameterBlock*> blocks = {&block};
    auto loss = [&] {
        double sum = 0.0;
        for (double v : block.values) sum += 0.5 * v * v;
        return sum;
    };
    auto gradients = [&] {
        for (std::size_t i = 0; i < block.size(); ++i) {
            block.gradient[i] = 2.0 * block.values[i];
        }
    };
    const GradCheckReport report = finite_diff_check(blocks, loss, gradients, 1e-4);
    CHECK(report.max_relative_error == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("a non-finite loss fails the check loudly") {
    ParameterBlock block = random_block("theta", 3, 23);
    std::vector<ParameterBlock*> blocks = {&block};
    auto loss = [&] { return std::numeric_limits<double>::infinity(); };
    auto gradients = [&] {};
    CHECK_THROWS(finite_diff_check(blocks, loss, gradients, 1e-4));
}

TEST_CASE("checkpoints round-trip blocks exactly") {
    ParameterBlock a = random_block("alpha", 12, 31);
    a.shape = {3, 4};
    ParameterBlock b = random_block("beta", 5, 32);
    const fs::path path = temp_file("numerics_roundtrip.ckpt");
    save_checkpoint(path, {&a, &b});
    const std::vector<ParameterBlock> loaded = load_checkpoint(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].name == "alpha");
    CHECK(loaded[0].shape == std::vector<std::size_t>{3, 4});
    CHECK(loaded[0].values == a.values);
    CHECK(loaded[1].name == "beta");
    CHECK(loaded[1].values == b.values);
    fs::remove(path);
}

TEST_CASE("checkpoint loader rejects foreign and truncated files") {
    const fs::path bogus = temp_file("numerics_bogus.ckpt");
    std::ofstream(bogus, std::ios::binary) << "definitely not a checkpoint";
    CHECK_THROWS_WITH(load_checkpoint(bogus), doctest::Contains("not a checkpoint"));
    fs::remove(bogus);

    ParameterBlock a = random_block("alpha", 6, 33);
    const fs::path path = temp_file("numerics_trunc.ckpt");
    save_checkpoint(path, {&a});
    const auto full_size = fs::file_size(path);
    fs::resize_file(path, full_size - 9);
    CHECK_THROWS_WITH(load_checkpoint(path), doctest::Contains("truncated"));
    fs::remove(path);
}

TEST_CASE("tsv export writes one commented header per block") {
    ParameterBlock a = random_block("alpha", 4, 34);
    a.shape = {2, 2};
    const fs::path path = temp_file("numerics_export.tsv");
    export_checkpoint_tsv(path, {&a});
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    CHECK(first.find("#block=alpha") != std::string::npos);
    CHECK(first.find("2x2") != std::string::npos);
    fs::remove(path);
}
