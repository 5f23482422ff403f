#pragma once

#include <vector>

#include "bpl/affinity_scores.hpp"
#include "bpl/config.hpp"
#include "bpl/model.hpp"
#include "bpl/split.hpp"
#include "bpl/types.hpp"

namespace bpl {

// Loss conventions, shared by every function here:
//  - the returned value is the plain (unweighted) batch mean, for logging;
//  - gradients are accumulated into the parameter blocks scaled by `weight`,
//    so the caller passes its loss coefficient (1, alpha, beta) and gets
//    d(weight * loss)/d(theta) without post-scaling;
//  - nothing is zeroed here; the optimizer owns gradient clearing.

// Mean cross-entropy of the predicted distribution against observed levels.
double loss_t1(PreferenceModel& model, const std::vector<RatingRecord>& batch, double weight);

// Adversarial alignment value: mean log fd(z) over the expanded batch
// (rated plus high-affinity unrated) plus mean log(1 - fd(z)) over the
// remaining-unrated batch. The discriminator accumulates gradients that
// ascend this value; the encoder accumulates reversed (descending) gradients
// through z. Per-side means keep batch-size imbalance from reweighting it.
double loss_t2(PreferenceModel& model, BinaryMlp& discriminator,
               const std::vector<Pair>& expanded_batch, const std::vector<Pair>& rest_batch,
               double weight);

struct SelfDistillResult {
    double loss = 0.0;          // mean over the whole batch, gated pairs only
    std::size_t reliable = 0;   // pairs that passed the filter
    std::size_t batch_size = 0;
};

// Reliability-filtered entropy minimization: mean over the batch of
// gate * H(p), where the gate compares argmax with the ensemble shadow
// (temporal consistency) or applies the max-probability threshold. The gate
// is a constant: filtered-out pairs contribute zero value and zero gradient.
SelfDistillResult loss_sd(PreferenceModel& model, const PreferenceModel& ensemble_shadow,
                          const std::vector<Pair>& batch, FilterMode filter, double m_threshold,
                          double weight);

// Confidence-penalized teacher distillation: mean of
// lambda * (expected rating - teacher)^2 - H(p). Teacher values are
// constants. with_penalty=false drops the -H(p) term (ablation).
double loss_pd(PreferenceModel& model, const TeacherPredictions& teacher,
               const std::vector<Pair>& batch, double lambda, bool with_penalty, double weight);

struct DistillOptions {
    CombinationMode combination = CombinationMode::hard;
    FilterMode filter = FilterMode::temporal_consistency;
    double m_threshold = 0.4;
    double lambda = 1.0;
    bool confidence_penalty = true;
    bool include_sd = true;
    bool include_pd = true;
};

struct DualDistillResult {
    double loss = 0.0;
    std::size_t reliable = 0;
    std::size_t batch_size = 0;
};

// Affinity-weighted blend over unrated pairs: a * l_pd + (1 - a) * l_sd with
// a = affinity score (soft) or S01 membership (hard). affinity may be null in
// hard mode. include_sd / include_pd drop one side for the ablations.
DualDistillResult loss_t3(PreferenceModel& model, const PreferenceModel& ensemble_shadow,
                          const TeacherPredictions& teacher, const AffinityScores* affinity,
                          const SpaceSplit& split, const std::vector<Pair>& batch,
                          const DistillOptions& options, double weight);

inline double combine_losses(double t1, double t2, double t3, double alpha, double beta) {
    return t1 + alpha * t2 + beta * t3;
}

struct StepBatches {
    const std::vector<RatingRecord>* rated = nullptr;
    const std::vector<Pair>* expanded = nullptr;  // for the adversarial term
    const std::vector<Pair>* rest = nullptr;      // for the adversarial term
    const std::vector<Pair>* unrated = nullptr;   // for the distillation term
};

struct StepLosses {
    double t1 = 0.0;
    double t2 = 0.0;
    double t3 = 0.0;
    double total = 0.0;
    std::size_t sd_reliable = 0;
    std::size_t sd_batch = 0;
};

// One full objective evaluation with gradient accumulation for every active
// term. Terms with zero coefficient (or missing inputs) are skipped entirely:
// they consume no randomness and touch no state, so alpha = beta = 0
// reproduces plain supervised training bit for bit.
StepLosses loss_total(PreferenceModel& model, BinaryMlp* discriminator,
                      const PreferenceModel* ensemble_shadow, const TeacherPredictions* teacher,
                      const AffinityScores* affinity, const SpaceSplit& split,
                      const StepBatches& batches, double alpha, double beta,
                      const DistillOptions& options);

}  // namespace bpl
