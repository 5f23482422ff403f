#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bpl/affinity.hpp"
#include "bpl/config.hpp"
#include "bpl/model.hpp"
#include "bpl/objectives.hpp"
#include "bpl/split.hpp"
#include "bpl/synthetic.hpp"
#include "bpl/types.hpp"

namespace bpl {

struct EpochLog {
    int epoch = 0;
    double t1 = 0.0;
    double t2 = 0.0;
    double t3 = 0.0;
    double reliable_fraction = 0.0;   // NaN while the distillation term is inactive
    double val_mse = 0.0;
    double filter_error_ratio = 0.0;  // NaN without a world oracle
};

struct TrainResult {
    PreferenceModel model;  // best-validation checkpoint
    double best_val_mse = 0.0;
    int best_epoch = 0;
    int epochs_run = 0;
    std::vector<EpochLog> log;
};

// What the training loop optimizes. The full method keeps everything on;
// ablations switch individual pieces off.
struct ModeSpec {
    std::string name = "standard";
    bool use_t2 = false;
    bool use_t3 = false;
    bool affinity_as_propensity = false;  // inverse-affinity-weighted supervision only
    DistillOptions distill;
};

ModeSpec standard_mode();
ModeSpec bpl_mode(const TrainingConfig& config);
// Accepts: no_T2, no_sd, no_pd, no_T2_T3, no_confidence_penalty,
// affinity_as_propensity. Throws on anything else.
ModeSpec ablation_mode(const std::string& name, const TrainingConfig& config);

struct TrainerInputs {
    const RatingDataset* train = nullptr;
    const RatingDataset* validation = nullptr;
    const SpaceSplit* split = nullptr;            // s01 marked for the full method
    const TeacherPredictions* teacher = nullptr;  // required when use_t3
    const AffinityScores* affinity = nullptr;     // required for soft mode / propensity ablation
    const SyntheticWorld* oracle = nullptr;       // optional: enables the filter-quality log
};

// The one training loop every mode runs through. Mini-batch supervised loss
// plus, when active, the adversarial and distillation terms on auxiliary
// batches drawn from isolated RNG streams; simultaneous Adam updates of model
// and discriminator; EMA shadow update per step; early stopping on validation
// MSE with the best checkpoint restored. Throws on divergence, naming epoch
// and step.
TrainResult train_loop(const TrainerInputs& inputs, const TrainingConfig& config,
                       const ModeSpec& mode);

TrainResult train_standard(const RatingDataset& train, const RatingDataset& validation,
                           const SpaceSplit& split, const TrainingConfig& config,
                           const SyntheticWorld* oracle = nullptr);

// Everything the full method needs beyond the raw split: frozen affinity
// scores over pool and rated pairs, the marked S01, the standard-trained
// teacher and its cached expected ratings over the pool.
struct BplInputs {
    SpaceSplit split;
    AffinityScores affinity;
    TeacherPredictions teacher;
    PreferenceModel teacher_model;
    TrainResult teacher_run;
};

BplInputs prepare_bpl_inputs(const RatingDataset& train, const RatingDataset& validation,
                             const SpaceSplit& split, const TrainingConfig& config);

TrainResult train_bpl(const RatingDataset& train, const RatingDataset& validation,
                      const BplInputs& inputs, const TrainingConfig& config,
                      const SyntheticWorld* oracle = nullptr);

TrainResult run_ablation(const std::string& name, const RatingDataset& train,
                         const RatingDataset& validation, const BplInputs& inputs,
                         const TrainingConfig& config, const SyntheticWorld* oracle = nullptr);

// CSV: epoch,t1,t2,t3,reliable_fraction,val_mse,filter_error_ratio.
void write_loss_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);

}  // namespace bpl
