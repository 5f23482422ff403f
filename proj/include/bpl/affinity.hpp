#pragma once

#include <vector>

#include "bpl/affinity_scores.hpp"
#include "bpl/config.hpp"
#include "bpl/model.hpp"
#include "bpl/split.hpp"
#include "bpl/types.hpp"

namespace bpl {

// Binary classifier for "would this pair be rated": dedicated user/item
// embedding tables (independent of any preference model, so no leakage),
// combined elementwise and fed to a small sigmoid head.
class AffinityModel {
public:
    AffinityModel() = default;
    AffinityModel(std::uint32_t num_users, std::uint32_t num_items, const AffinityConfig& config);

    std::uint32_t num_users() const { return num_users_; }
    std::uint32_t num_items() const { return num_items_; }
    const AffinityConfig& config() const { return config_; }
    int epochs_run() const { return epochs_run_; }
    void set_epochs_run(int epochs) { epochs_run_ = epochs; }

    double logit_of(Pair pair) const;
    double score(Pair pair) const;  // sigmoid of the logit, strictly in (0,1)

    // Accumulates d(weight * bce)/d(theta) for one labeled pair given
    // d(loss)/d(logit).
    void accumulate_gradient(Pair pair, double dlogit, double weight);

    std::vector<ParameterBlock*> blocks();
    std::vector<const ParameterBlock*> blocks() const;

private:
    std::vector<double> encode(Pair pair) const;
    void check_pair(Pair pair) const;

    std::uint32_t num_users_ = 0;
    std::uint32_t num_items_ = 0;
    int dim_ = 0;
    AffinityConfig config_;
    int epochs_run_ = 0;
    ParameterBlock user_embeddings_;
    ParameterBlock item_embeddings_;
    BinaryMlp head_;
};

// Positive-versus-sampled-negative training: positives are the rated pairs,
// negatives fresh uniform unrated pairs per batch at config.negative_ratio.
// Early-stops on a held-out BCE and restores the best parameters.
AffinityModel train_affinity(const RatingDataset& dataset, const SpaceSplit& split,
                             const AffinityConfig& config);

// Frozen scores for the given pairs, with provenance describing the model.
AffinityScores score_pairs(const AffinityModel& model, const std::vector<Pair>& pairs);

}  // namespace bpl
