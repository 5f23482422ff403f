#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "bpl/affinity.hpp"
#include "bpl/split.hpp"

using namespace bpl;

namespace {

double stable_bce(double logit, double label) {
    const double sp = logit > 0.0 ? logit + std::log1p(std::exp(-logit))
                                  : std::log1p(std::exp(logit));
    return label > 0.5 ? sp - logit : sp;
}

// 20 users, 6 items: items 0..2 rated by everyone, items 3..5 by no one.
// The cleanest possible exposure signal a classifier could be asked to find.
RatingDataset separable_dataset() {
    std::vector<RatingRecord> records;
    for (std::uint32_t u = 0; u < 20; ++u) {
        for (std::uint32_t i = 0; i < 3; ++i) {
            records.push_back({u, i, static_cast<int>((u + i) % 5) + 1});
        }
    }
    return RatingDataset(20, 6, 5, records);
}

// Popularity-skewed observations: the first half of the items is rated an
// order of magnitude more often than the second half.
std::vector<RatingRecord> skewed_records(std::uint32_t users, std::uint32_t items,
                                         std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<RatingRecord> records;
    for (std::uint32_t u = 0; u < users; ++u) {
        for (std::uint32_t i = 0; i < items; ++i) {
            const double p = i < items / 2 ? 0.6 : 0.08;
            if (unit(rng) < p) records.push_back({u, i, static_cast<int>((u + i) % 5) + 1});
        }
    }
    return records;
}

}  // namespace

TEST_CASE("an untrained affinity model is exactly noncommittal") {
    AffinityModel model(8, 9, AffinityConfig{});
    for (std::uint32_t u = 0; u < 8; ++u) {
        for (std::uint32_t i = 0; i < 9; ++i) {
            CHECK(model.logit_of({u, i}) == 0.0);
            CHECK(model.score({u, i}) == 0.5);
        }
    }
}

TEST_CASE("training is deterministic for a fixed seed") {
    const RatingDataset dataset(20, 6, 5, separable_dataset().records());
    const SpaceSplit split = SpaceSplit::build(dataset, 1000, 1.0, 42);
    AffinityConfig config;
    config.seed = 9;
    AffinityModel first = train_affinity(dataset, split, config);
    AffinityModel second = train_affinity(dataset, split, config);
    for (std::uint32_t u = 0; u < 20; ++u) {
        for (std::uint32_t i = 0; i < 6; ++i) {
            CHECK(first.score({u, i}) == second.score({u, i}));
        }
    }
    CHECK(first.epochs_run() == second.epochs_run());
    CHECK(first.epochs_run() >= 1);
}

TEST_CASE("scores stay strictly inside the unit interval") {
    const RatingDataset dataset = separable_dataset();
    const SpaceSplit split = SpaceSplit::build(dataset, 1000, 1.0, 42);
    AffinityConfig config;
    config.seed = 3;
    const AffinityModel model = train_affinity(dataset, split, config);
    for (std::uint32_t u = 0; u < 20; ++u) {
        for (std::uint32_t i = 0; i < 6; ++i) {
            const double s = model.score({u, i});
            CHECK(s > 0.0);
            CHECK(s < 1.0);
        }
    }
}

TEST_CASE("a perfectly separable exposure pattern is learned") {
    const RatingDataset dataset = separable_dataset();
    const SpaceSplit split = SpaceSplit::build(dataset, 1000, 1.0, 42);
    AffinityConfig config;
    config.seed = 11;
    config.epochs = 120;
    config.patience = 15;
    const AffinityModel model = train_affinity(dataset, split, config);

    double rated_mean = 0.0, unrated_mean = 0.0;
    for (std::uint32_t u = 0; u < 20; ++u) {
        for (std::uint32_t i = 0; i < 3; ++i) rated_mean += model.score({u, i}) / 60.0;
        for (std::uint32_t i = 3; i < 6; ++i) unrated_mean += model.score({u, i}) / 60.0;
    }
    CHECK(rated_mean > 0.65);
    CHECK(unrated_mean < 0.35);
}

TEST_CASE("held-out exposure prediction beats chance") {
    std::vector<RatingRecord> all = skewed_records(30, 20, 77);
    std::set<std::pair<std::uint32_t, std::uint32_t>> observed;
    for (const RatingRecord& r : all) observed.insert({r.user, r.item});

    std::mt19937_64 rng(78);
    std::shuffle(all.begin(), all.end(), rng);
    const std::size_t n_hold = all.size() / 5;
    std::vector<RatingRecord> train_records(all.begin() + n_hold, all.end());
    std::vector<RatingRecord> held(all.begin(), all.begin() + n_hold);

    const RatingDataset dataset(30, 20, 5, train_records);
    const SpaceSplit split = SpaceSplit::build(dataset, 100000, 1.0, 5);
    AffinityConfig config;
    config.seed = 12;
    const AffinityModel model = train_affinity(dataset, split, config);

    // held-out positives versus pairs never observed anywhere
    std::uniform_int_distribution<std::uint32_t> pick_user(0, 29);
    std::uniform_int_distribution<std::uint32_t> pick_item(0, 19);
    double bce = 0.0;
    for (const RatingRecord& r : held) {
        bce += stable_bce(model.logit_of({r.user, r.item}), 1.0);
        while (true) {
            Pair p{pick_user(rng), pick_item(rng)};
            if (observed.count({p.user, p.item}) != 0) continue;
            bce += stable_bce(model.logit_of(p), 0.0);
            break;
        }
    }
    bce /= static_cast<double>(2 * held.size());
    CHECK(bce < std::log(2.0));
}

TEST_CASE("frozen scores mirror the model and carry provenance") {
    const RatingDataset dataset = separable_dataset();
    const SpaceSplit split = SpaceSplit::build(dataset, 1000, 1.0, 42);
    AffinityConfig config;
    config.seed = 4;
    const AffinityModel model = train_affinity(dataset, split, config);

    const std::vector<Pair> pairs = {{0, 0}, {5, 3}, {19, 5}};
    const AffinityScores scores = score_pairs(model, pairs);
    CHECK(scores.size() == 3);
    CHECK_FALSE(scores.provenance().empty());
    for (const Pair& p : pairs) {
        CHECK(scores.contains(p));
        CHECK(scores.at(p) == model.score(p));
    }
    CHECK_FALSE(scores.contains({1, 1}));
    CHECK_THROWS(scores.at({1, 1}));
}

TEST_CASE("a split without rated pairs is rejected") {
    const RatingDataset empty(4, 4, 5, {});
    const SpaceSplit split = SpaceSplit::build(empty, 100, 1.0, 1);
    CHECK_THROWS_WITH(train_affinity(empty, split, AffinityConfig{}),
                      doctest::Contains("no rated pairs"));
}

TEST_CASE("a holdout that swallows every positive is rejected") {
    const RatingDataset tiny(4, 4, 5, {{0, 0, 3}});
    const SpaceSplit split = SpaceSplit::build(tiny, 100, 1.0, 1);
    CHECK_THROWS_WITH(train_affinity(tiny, split, AffinityConfig{}),
                      doctest::Contains("no training positives"));
}
