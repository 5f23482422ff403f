#pragma once

#include <filesystem>
#include <vector>

#include "bpl/config.hpp"
#include "bpl/types.hpp"

namespace bpl {

// Knobs of the synthetic missing-not-at-random world. True preferences come
// from latent user/item factors quantile-binned to 1..K; the chance that a
// pair is observed rises with item popularity (popularity_weight) and with
// the level of the true rating (rating_weight), with an intercept calibrated
// so the expected observed count matches density exactly.
struct GeneratorConfig {
    std::uint32_t num_users = 200;
    std::uint32_t num_items = 300;
    int num_levels = 5;
    int latent_dim = 4;
    double density = 0.2;
    double popularity_weight = 1.0;
    double rating_weight = 0.4;
    double conformity = 0.0;         // pull of observed ratings toward the item mean, [0,1)
    double popularity_spread = 1.3;  // stddev of log item popularity
    std::size_t factual_test_size = 1500;
    std::size_t counterfactual_test_size = 1500;
    std::uint64_t seed = 1;

    static GeneratorConfig from_config(const KeyValueConfig& cfg);
    KeyValueConfig to_config() const;
    void validate() const;
};

// Complete ground truth for a generated world: the true rating and exposure
// probability of every pair, plus the latent item popularity weights. This is
// the oracle that counterfactual evaluation and the filter-quality probes
// read from.
class SyntheticWorld {
public:
    SyntheticWorld() = default;
    SyntheticWorld(GeneratorConfig config, std::vector<int> true_ratings,
                   std::vector<double> exposure, std::vector<double> item_popularity);

    std::uint32_t num_users() const { return config_.num_users; }
    std::uint32_t num_items() const { return config_.num_items; }
    int num_levels() const { return config_.num_levels; }
    const GeneratorConfig& config() const { return config_; }

    int true_rating(Pair pair) const { return true_ratings_[index(pair)]; }
    double exposure(Pair pair) const { return exposure_[index(pair)]; }
    double item_popularity(std::uint32_t item) const { return item_popularity_[item]; }

    const std::vector<int>& true_rating_table() const { return true_ratings_; }
    const std::vector<double>& exposure_table() const { return exposure_; }

    // Persists true_ratings.tsv, exposure.tsv, popularity.tsv and
    // generator.cfg into dir; load reads the same four files back.
    void save(const std::filesystem::path& dir) const;
    static SyntheticWorld load(const std::filesystem::path& dir);

private:
    std::size_t index(Pair p) const {
        return static_cast<std::size_t>(p.user) * config_.num_items + p.item;
    }

    GeneratorConfig config_;
    std::vector<int> true_ratings_;
    std::vector<double> exposure_;
    std::vector<double> item_popularity_;
};

struct SyntheticData {
    SyntheticWorld world;
    RatingDataset train;
    RatingDataset counterfactual_test;  // uniform draw over held-out pairs
    RatingDataset factual_test;         // exposure-weighted draw over held-out pairs
};

// Builds the world and samples train/test sets from it. Deterministic given
// the config seed. The counterfactual test is drawn first so it is exactly
// uniform over held-out pairs; the factual test is then drawn from the
// remaining held-out pairs with probability proportional to exposure.
// Conformity perturbation applies to observed training ratings only.
SyntheticData generate_synthetic(const GeneratorConfig& config);

}  // namespace bpl
