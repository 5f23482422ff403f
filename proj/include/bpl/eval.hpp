#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bpl/affinity_scores.hpp"
#include "bpl/model.hpp"
#include "bpl/types.hpp"

namespace bpl {

// Mean squared and mean absolute error of the expected rating. Throws on an
// empty test set.
std::pair<double, double> mse_mae(const PreferenceModel& model, const RatingDataset& test);

// 2ab/(a+b); inputs must be strictly positive.
double harmonic_mean(double a, double b);

// Pairs sorted by affinity and cut into equal-count buckets (sizes differ by
// at most one, low-affinity bucket first); returns mean squared error of the
// expected rating per bucket. Throws when there are fewer pairs than buckets.
std::vector<double> affinity_bucket_errors(const PreferenceModel& model,
                                           const std::vector<RatingRecord>& pairs,
                                           const AffinityScores& affinity, int num_buckets);

// Spearman rank correlation with average ranks on ties. Throws when either
// input is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct FactorCorrelations {
    double popularity = 0.0;  // affinity vs item popularity, unrated pairs
    double alignment = 0.0;   // affinity vs -(pop(u)-pop(i))^2, unrated pairs
    double conformity = 0.0;  // affinity vs -(r_ui - mean_i)^2, rated pairs
};

// Correlations of the scored pairs against the three rating-process factors,
// with item popularity supplied explicitly (one value per item). pop(u) is
// the mean popularity of the user's rated items; pairs whose user rated
// nothing are skipped for the alignment factor.
FactorCorrelations factor_correlations_with_popularity(
    const RatingDataset& dataset, const AffinityScores& affinity,
    const std::vector<double>& item_popularity);

// Same, with popularity estimated from the dataset as the normalized rating
// frequency of each item.
FactorCorrelations factor_correlations(const RatingDataset& dataset,
                                       const AffinityScores& affinity);

struct ProbeReport {
    std::vector<double> per_level_f1;  // indexed by level-1; NaN where undefined
    std::vector<bool> level_defined;
    double macro_f1 = 0.0;  // mean over defined levels
};

// Trains a two-layer softmax classifier (hidden width 2d, tanh) on the frozen
// pair representations of the test records under k-fold cross-validation and
// reports mean per-level F1. Levels absent from the test set come back
// undefined rather than zero. Never mutates the model.
ProbeReport representation_probe(const PreferenceModel& model, const RatingDataset& test,
                                 int folds, std::uint64_t seed, int epochs = 300,
                                 double learning_rate = 0.05);

// t statistic of the per-index differences a[i] - b[i].
double paired_t_statistic(const std::vector<double>& a, const std::vector<double>& b);

// Pearson chi-squared statistic of observed counts against the uniform
// distribution, and an approximate chi-squared upper-tail p-value.
double chi_squared_stat_uniform(const std::vector<std::size_t>& counts);
double chi_squared_pvalue(double stat, double dof);

struct MetricsReport {
    double factual_mse = 0.0;
    double factual_mae = 0.0;
    double counterfactual_mse = 0.0;
    double counterfactual_mae = 0.0;
    double harmonic_mean_mse = 0.0;
    double harmonic_mean_mae = 0.0;
    std::vector<double> bucket_errors;  // optional affinity-bucket profile
    std::map<std::string, std::string> metadata;

    static MetricsReport compute(const PreferenceModel& model, const RatingDataset& factual,
                                 const RatingDataset& counterfactual);

    std::string to_json() const;  // all floats rounded to 6 decimals
    void write_json(const std::filesystem::path& path) const;
};

}  // namespace bpl
