#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "bpl/eval.hpp"
#include "bpl/model.hpp"

using namespace bpl;

namespace {

// All-zero embeddings plus a spiked predictor bias: every pair gets the same
// pinned logit vector, so expected ratings are known in closed form.
PreferenceModel model_with_bias(const std::vector<double>& bias) {
    PreferenceModel model(6, 6, 5, 4, 1);
    for (ParameterBlock* block : model.blocks()) {
        for (double& v : block->values) v = 0.0;
    }
    model.blocks()[3]->values = bias;
    return model;
}

void randomize(PreferenceModel& model, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (ParameterBlock* block : model.blocks()) {
        for (double& v : block->values) v = normal(rng);
    }
}

}  // namespace

TEST_CASE("errors vanish for a model that nails the test set") {
    PreferenceModel sharp = model_with_bias({0.0, 0.0, 60.0, 0.0, 0.0});
    const RatingDataset test(6, 6, 5, {{0, 0, 3}, {2, 4, 3}});
    const auto [mse, mae] = mse_mae(sharp, test);
    CHECK(mse == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(mae == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("a constant midpoint predictor has the textbook errors") {
    PreferenceModel uniform(6, 6, 5, 4, 2);  // zero predictor: expectation 3
    const RatingDataset test(6, 6, 5, {{0, 0, 1}, {0, 1, 5}});
    const auto [mse, mae] = mse_mae(uniform, test);
    CHECK(mse == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(mae == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("an empty test set is rejected") {
    PreferenceModel model(6, 6, 5, 4, 2);
    const RatingDataset empty(6, 6, 5, {});
    CHECK_THROWS_WITH(mse_mae(model, empty), doctest::Contains("empty test set"));
}

TEST_CASE("harmonic mean reproduces its pinned examples") {
    CHECK(harmonic_mean(2.0, 2.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(harmonic_mean(1.0, 3.0) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(harmonic_mean(1.469, 0.991) == doctest::Approx(1.184).epsilon(5e-4));
    CHECK(harmonic_mean(1.104, 1.037) == doctest::Approx(1.069).epsilon(5e-4));
}

TEST_CASE("harmonic mean never exceeds the arithmetic mean") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> positive(0.01, 10.0);
    for (int k = 0; k < 200; ++k) {
        const double a = positive(rng), b = positive(rng);
        CHECK(harmonic_mean(a, b) <= 0.5 * (a + b) + 1e-12);
    }
    CHECK_THROWS_WITH(harmonic_mean(0.0, 1.0), doctest::Contains("positive"));
    CHECK_THROWS_WITH(harmonic_mean(1.0, -2.0), doctest::Contains("positive"));
}

TEST_CASE("bucket errors follow the affinity ordering of the pairs") {
    PreferenceModel uniform(6, 6, 5, 4, 2);  // expectation 3 everywhere
    std::vector<RatingRecord> pairs;
    AffinityScores affinity;
    // lowest three scores rate 1, middle three rate 3, top three rate 5
    const int ratings[9] = {1, 1, 1, 3, 3, 3, 5, 5, 5};
    for (std::uint32_t k = 0; k < 9; ++k) {
        const RatingRecord rec{k / 6, k % 6, ratings[k]};
        pairs.push_back(rec);
        affinity.set({rec.user, rec.item}, 0.1 + 0.08 * k);
    }
    const std::vector<double> errors = affinity_bucket_errors(uniform, pairs, affinity, 3);
    REQUIRE(errors.size() == 3);
    CHECK(errors[0] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(errors[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(errors[2] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("bucket profile of a constant-error predictor is flat even off-balance") {
    PreferenceModel uniform(6, 6, 5, 4, 2);
    std::vector<RatingRecord> pairs;
    AffinityScores affinity;
    for (std::uint32_t k = 0; k < 10; ++k) {
        pairs.push_back({k / 6, k % 6, 1});
        affinity.set({k / 6, k % 6}, 0.05 + 0.09 * k);
    }
    const std::vector<double> errors = affinity_bucket_errors(uniform, pairs, affinity, 3);
    REQUIRE(errors.size() == 3);
    for (double e : errors) CHECK(e == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("bucket errors reject more buckets than pairs") {
    PreferenceModel model(6, 6, 5, 4, 2);
    AffinityScores affinity;
    affinity.set({0, 0}, 0.5);
    affinity.set({0, 1}, 0.6);
    CHECK_THROWS_WITH(affinity_bucket_errors(model, {{0, 0, 1}, {0, 1, 2}}, affinity, 3),
                      doctest::Contains("fewer pairs than buckets"));
    CHECK_THROWS_WITH(affinity_bucket_errors(model, {{0, 0, 1}, {0, 1, 2}}, affinity, 0),
                      doctest::Contains("at least one bucket"));
}

TEST_CASE("rank correlation sees through monotone warping") {
    const std::vector<double> a = {1, 2, 3, 4, 5};
    std::vector<double> warped;
    for (double v : a) warped.push_back(std::exp(v));
    CHECK(spearman(a, warped) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> reversed(a.rbegin(), a.rend());
    CHECK(spearman(a, reversed) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("tied values receive average ranks") {
    // ranks {1.5, 1.5, 3} against {1, 2, 3}: correlation sqrt(3)/2
    CHECK(spearman({1, 1, 2}, {1, 2, 3}) ==
          doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("rank correlation rejects degenerate inputs") {
    CHECK_THROWS_WITH(spearman({1, 1, 1}, {1, 2, 3}), doctest::Contains("constant"));
    CHECK_THROWS_WITH(spearman({1, 2}, {1, 2}), doctest::Contains("at least 3"));
    CHECK_THROWS_WITH(spearman({1, 2, 3}, {1, 2}), doctest::Contains("equally sized"));
}

TEST_CASE("factor correlations recover planted monotone structure") {
    // users 0 and 1 rate items 0 and 1; items 2..4 stay unrated
    const RatingDataset dataset(4, 5, 5,
                                {{0, 0, 1}, {1, 0, 5}, {0, 1, 3}, {1, 1, 3}});
    const std::vector<double> popularity = {0.5, 0.4, 0.3, 0.2, 0.1};

    AffinityScores affinity;
    // unrated pairs score exactly their item popularity
    for (std::uint32_t u = 0; u < 2; ++u) {
        for (std::uint32_t i = 2; i < 5; ++i) affinity.set({u, i}, popularity[i]);
    }
    // rated pairs: item 0 has conformity factor -4, item 1 factor 0
    affinity.set({0, 0}, 0.1);
    affinity.set({1, 0}, 0.1);
    affinity.set({0, 1}, 0.9);
    affinity.set({1, 1}, 0.9);

    const FactorCorrelations corr =
        factor_correlations_with_popularity(dataset, affinity, popularity);
    CHECK(corr.popularity == doctest::Approx(1.0).epsilon(1e-12));
    // user mean popularity is 0.45, so -(0.45 - pop_i)^2 increases with pop_i
    CHECK(corr.alignment == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(corr.conformity == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("empirical popularity matches an explicitly supplied table") {
    const RatingDataset dataset(4, 5, 5,
                                {{0, 0, 1}, {1, 0, 5}, {0, 1, 3}, {1, 1, 3}, {2, 0, 2}});
    std::vector<double> empirical(5, 0.0);
    for (const RatingRecord& rec : dataset.records()) empirical[rec.item] += 0.25;

    AffinityScores affinity;
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    for (std::uint32_t u = 0; u < 4; ++u) {
        for (std::uint32_t i = 0; i < 5; ++i) affinity.set({u, i}, unit(rng));
    }
    const FactorCorrelations a = factor_correlations(dataset, affinity);
    const FactorCorrelations b = factor_correlations_with_popularity(dataset, affinity, empirical);
    CHECK(a.popularity == b.popularity);
    CHECK(a.alignment == b.alignment);
    CHECK(a.conformity == b.conformity);
}

TEST_CASE("a conformity factor with no variation is loud, not silent") {
    // every item rated exactly once: each rating equals its item mean
    const RatingDataset dataset(4, 5, 5, {{0, 0, 1}, {1, 1, 3}, {2, 2, 5}});
    AffinityScores affinity;
    affinity.set({0, 0}, 0.2);
    affinity.set({1, 1}, 0.5);
    affinity.set({2, 2}, 0.8);
    // unrated pairs of a user who rated something, so the popularity and
    // alignment factors stay well defined and the conformity factor is the
    // one that trips
    affinity.set({0, 1}, 0.3);
    affinity.set({0, 2}, 0.6);
    affinity.set({0, 3}, 0.9);
    CHECK_THROWS_WITH(factor_correlations(dataset, affinity),
                      doctest::Contains("degenerate factor"));
}

TEST_CASE("the probe separates representations that encode the level") {
    // one-hot user rows and all-ones item rows: z = e_u, level = u + 1
    PreferenceModel model(5, 5, 5, 5, 1);
    for (ParameterBlock* block : model.blocks()) {
        for (double& v : block->values) v = 0.0;
    }
    for (std::uint32_t u = 0; u < 5; ++u) model.blocks()[0]->values[u * 5 + u] = 1.0;
    for (double& v : model.blocks()[1]->values) v = 1.0;

    std::vector<RatingRecord> records;
    for (std::uint32_t u = 0; u < 5; ++u) {
        for (std::uint32_t i = 0; i < 5; ++i) {
            records.push_back({u, i, static_cast<int>(u) + 1});
        }
    }
    const RatingDataset test(5, 5, 5, records);
    const ProbeReport report = representation_probe(model, test, 2, 21);
    for (int level = 0; level < 5; ++level) {
        REQUIRE(report.level_defined[level]);
        CHECK(report.per_level_f1[level] == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(report.macro_f1 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("the probe scores near chance when labels carry no signal") {
    PreferenceModel model(10, 10, 5, 6, 2);
    randomize(model, 22);
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<int> level(1, 5);
    std::vector<RatingRecord> records;
    for (std::uint32_t u = 0; u < 10; ++u) {
        for (std::uint32_t i = 0; i < 10; ++i) {
            if ((u + i) % 2 == 0) records.push_back({u, i, level(rng)});
        }
    }
    const RatingDataset test(10, 10, 5, records);
    const ProbeReport report = representation_probe(model, test, 2, 24);
    CHECK(report.macro_f1 < 0.45);
}

TEST_CASE("the probe reports absent levels as undefined and never touches the model") {
    PreferenceModel model(6, 6, 5, 4, 3);
    randomize(model, 25);
    const double checksum_before = model.parameter_checksum();
    std::vector<RatingRecord> records;
    for (std::uint32_t u = 0; u < 6; ++u) {
        for (std::uint32_t i = 0; i < 6; ++i) {
            records.push_back({u, i, static_cast<int>((u + i) % 3) + 1});  // levels 1..3 only
        }
    }
    const RatingDataset test(6, 6, 5, records);
    const ProbeReport report = representation_probe(model, test, 3, 26);
    CHECK_FALSE(report.level_defined[3]);
    CHECK_FALSE(report.level_defined[4]);
    CHECK(std::isnan(report.per_level_f1[3]));
    CHECK(std::isnan(report.per_level_f1[4]));
    CHECK(model.parameter_checksum() == checksum_before);

    CHECK_THROWS_WITH(representation_probe(model, test, 1, 26), doctest::Contains("2 folds"));
    const RatingDataset two(6, 6, 5, {{0, 0, 1}, {1, 1, 2}});
    CHECK_THROWS_WITH(representation_probe(model, two, 3, 26),
                      doctest::Contains("fewer test records than folds"));
}

TEST_CASE("paired t statistic matches the hand calculation") {
    // differences {1, 2, 3}: mean 2, sd 1, t = 2 * sqrt(3)
    CHECK(paired_t_statistic({2, 4, 6}, {1, 2, 3}) ==
          doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-12));
    CHECK_THROWS_WITH(paired_t_statistic({1, 2}, {1}), doctest::Contains("equally sized"));
    CHECK_THROWS_WITH(paired_t_statistic({1, 2, 3}, {1, 2, 3}),
                      doctest::Contains("identical samples"));
}

TEST_CASE("chi-squared machinery behaves at its anchor points") {
    CHECK(chi_squared_stat_uniform({10, 10, 10, 10}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(chi_squared_stat_uniform({20, 0, 0, 0}) == doctest::Approx(60.0).epsilon(1e-12));
    CHECK(chi_squared_pvalue(0.0, 3.0) > 0.999);
    CHECK(chi_squared_pvalue(60.0, 3.0) < 1e-6);

    // classic critical values, within the tolerance of the approximation
    CHECK(chi_squared_pvalue(3.841, 1.0) == doctest::Approx(0.05).epsilon(0.2));
    CHECK(chi_squared_pvalue(3.0, 3.0) == doctest::Approx(0.3916).epsilon(0.05));

    CHECK(chi_squared_pvalue(1.0, 3.0) > chi_squared_pvalue(5.0, 3.0));
    CHECK(chi_squared_pvalue(5.0, 3.0) > chi_squared_pvalue(15.0, 3.0));

    CHECK_THROWS_WITH(chi_squared_stat_uniform({5}), doctest::Contains("two cells"));
    CHECK_THROWS_WITH(chi_squared_stat_uniform({0, 0}), doctest::Contains("empty sample"));
    CHECK_THROWS_WITH(chi_squared_pvalue(1.0, 0.0), doctest::Contains("dof"));
}

TEST_CASE("the metrics report wires errors and harmonic means together") {
    PreferenceModel uniform(6, 6, 5, 4, 2);
    const RatingDataset factual(6, 6, 5, {{0, 0, 1}});        // squared error 4
    const RatingDataset counterfactual(6, 6, 5, {{0, 1, 5}});  // squared error 4
    const MetricsReport report = MetricsReport::compute(uniform, factual, counterfactual);
    CHECK(report.factual_mse == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(report.counterfactual_mse == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(report.harmonic_mean_mse == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(report.harmonic_mean_mae == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("the JSON report is parseable and six-decimal stable") {
    MetricsReport report;
    report.factual_mse = 1.23456789;
    report.factual_mae = 0.9;
    report.counterfactual_mse = 2.0;
    report.counterfactual_mae = 1.1;
    report.harmonic_mean_mse = harmonic_mean(report.factual_mse, report.counterfactual_mse);
    report.harmonic_mean_mae = harmonic_mean(report.factual_mae, report.counterfactual_mae);
    report.bucket_errors = {0.5, 1.5};
    report.metadata["mode"] = "standard";

    const std::string text = report.to_json();
    CHECK(text.back() == '\n');
    const nlohmann::json parsed = nlohmann::json::parse(text);
    CHECK(parsed["factual_mse"].get<double>() == doctest::Approx(1.234568).epsilon(1e-9));
    CHECK(parsed["bucket_errors"].size() == 2);
    CHECK(parsed["metadata"]["mode"] == "standard");

    const std::filesystem::path path =
        std::filesystem::temp_directory_path() / "bpl_eval_report.json";
    report.write_json(path);
    std::ifstream in(path, std::ios::binary);
    std::string from_file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(from_file == text);
    std::filesystem::remove(path);
}
