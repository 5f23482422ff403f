#include "bpl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "bpl/eval.hpp"
#include "bpl/parameters.hpp"

namespace bpl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Inverse-affinity weighted cross-entropy for the propensity ablation:
// weights 1 / clip(a, floor, 1).
double loss_t1_propensity(PreferenceModel& model, const std::vector<RatingRecord>& batch,
                          const AffinityScores& affinity, double floor) {
    if (batch.empty()) throw std::runtime_error("empty supervised batch");
    const int K = model.num_levels();
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    std::vector<double> dlogits(K);
    for (const RatingRecord& rec : batch) {
        const Pair pair{rec.user, rec.item};
        const double a = std::clamp(affinity.at(pair), floor, 1.0);
        const double w = 1.0 / a;
        const std::vector<double> p = model.predict_distribution(pair);
        loss -= w * std::log(p[rec.rating - 1]);
        for (int k = 0; k < K; ++k) {
            dlogits[k] = p[k] - (k == rec.rating - 1 ? 1.0 : 0.0);
        }
        model.accumulate_logit_gradient(pair, dlogits, w * inv_n);
    }
    return loss * inv_n;
}

// Mean absolute error of filtered predictions over all predictions on a
// fixed probe of unrated pairs, against the world's true ratings.
double filter_quality_ratio(const PreferenceModel& model, const PreferenceModel& shadow,
                            const std::vector<Pair>& probe, const SyntheticWorld& world,
                            const DistillOptions& options) {
    double err_all = 0.0, err_gated = 0.0;
    std::size_t gated = 0;
    for (const Pair& pair : probe) {
        const std::vector<double> p = model.predict_distribution(pair);
        const double err =
            std::fabs(expected_rating(p) - static_cast<double>(world.true_rating(pair)));
        err_all += err;
        const bool gate = options.filter == FilterMode::max_probability
                              ? max_prob_filter(p, options.m_threshold)
                              : is_reliable(shadow.predict_distribution(pair), p);
        if (gate) {
            err_gated += err;
            ++gated;
        }
    }
    if (gated == 0 || err_all == 0.0) return kNaN;
    const double mae_all = err_all / static_cast<double>(probe.size());
    const double mae_gated = err_gated / static_cast<double>(gated);
    return mae_gated / mae_all;
}

double validation_mse(const PreferenceModel& model, const RatingDataset& validation) {
    return mse_mae(model, validation).first;
}

}  // namespace

ModeSpec standard_mode() { return ModeSpec{}; }

ModeSpec bpl_mode(const TrainingConfig& config) {
    ModeSpec mode;
    mode.name = config.combination_mode == CombinationMode::soft ? "bpl-soft" : "bpl-hard";
    mode.use_t2 = true;
    mode.use_t3 = true;
    mode.distill.combination = config.combination_mode;
    mode.distill.filter = config.filter_mode;
    mode.distill.m_threshold = config.m_threshold;
    mode.distill.lambda = config.lambda;
    return mode;
}

ModeSpec ablation_mode(const std::string& name, const TrainingConfig& config) {
    ModeSpec mode = bpl_mode(config);
    mode.name = "ablation:" + name;
    if (name == "no_T2") {
        mode.use_t2 = false;
    } else if (name == "no_sd") {
        mode.distill.include_sd = false;
    } else if (name == "no_pd") {
        mode.distill.include_pd = false;
    } else if (name == "no_T2_T3") {
        mode.use_t2 = false;
        mode.use_t3 = false;
    } else if (name == "no_confidence_penalty") {
        mode.distill.confidence_penalty = false;
    } else if (name == "affinity_as_propensity") {
        mode.use_t2 = false;
        mode.use_t3 = false;
        mode.affinity_as_propensity = true;
    } else {
        throw std::runtime_error("unknown ablation name: " + name);
    }
    return mode;
}

TrainResult train_loop(const TrainerInputs& inputs, const TrainingConfig& config,
                       const ModeSpec& mode) {
    config.validate();
    if (inputs.train == nullptr || inputs.validation == nullptr || inputs.split == nullptr) {
        throw std::runtime_error("trainer needs train, validation and split inputs");
    }
    const RatingDataset& train = *inputs.train;
    if (train.size() == 0) throw std::runtime_error("empty training set");
    const bool t2_on = mode.use_t2 && config.alpha > 0.0;
    const bool t3_on = mode.use_t3 && config.beta > 0.0;
    if (t3_on && inputs.teacher == nullptr) {
        throw std::runtime_error("distillation requires teacher predictions");
    }
    if ((t3_on && mode.distill.combination == CombinationMode::soft) ||
        mode.affinity_as_propensity) {
        if (inputs.affinity == nullptr) throw std::runtime_error("mode requires affinity scores");
    }

    PreferenceModel model(train.num_users(), train.num_items(), train.num_levels(),
                          config.embedding_dim, mix_seed(config.seed, stream::model_init));
    Adam model_optimizer(model.blocks(), AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8,
                                                    config.weight_decay});

    BinaryMlp discriminator;
    Adam disc_optimizer;
    if (t2_on) {
        discriminator = BinaryMlp(config.embedding_dim, config.disc_layers, config.embedding_dim,
                                  mix_seed(config.seed, stream::disc_init), "discriminator");
        disc_optimizer = Adam(discriminator.blocks(),
                              AdamConfig{config.disc_learning_rate, 0.9, 0.999, 1e-8, 0.0});
    }

    TemporalEnsemble ensemble(model, config.tau);

    // Sampling bases. The adversarial term contrasts the expanded space
    // (rated plus high-affinity unrated) against the remaining unrated pool.
    std::vector<Pair> expanded_base;
    std::vector<Pair> rest_base;
    if (t2_on) {
        expanded_base = inputs.split->s1();
        expanded_base.insert(expanded_base.end(), inputs.split->s01().begin(),
                             inputs.split->s01().end());
        rest_base = inputs.split->s0_rest();
        if (expanded_base.empty() || rest_base.empty()) {
            throw std::runtime_error("adversarial term needs nonempty spaces on both sides");
        }
    }
    const std::vector<Pair>& pool = inputs.split->s0_pool();
    if (t3_on && pool.empty()) {
        throw std::runtime_error("distillation term needs a nonempty unrated pool");
    }

    // Fixed probe of unrated pairs for the oracle-based filter-quality log.
    std::vector<Pair> probe;
    if (inputs.oracle != nullptr && !pool.empty()) {
        probe = inputs.split->sample_s0(std::min<std::size_t>(2000, pool.size()),
                                        mix_seed(config.seed, stream::oracle_probe));
    }

    std::mt19937_64 rng_shuffle(mix_seed(config.seed, stream::shuffle));
    std::mt19937_64 rng_aux(mix_seed(config.seed, stream::aux_batches));
    auto draw_from = [&](const std::vector<Pair>& base, std::size_t count) {
        std::vector<Pair> out;
        out.reserve(count);
        std::uniform_int_distribution<std::size_t> pick(0, base.size() - 1);
        for (std::size_t k = 0; k < count; ++k) out.push_back(base[pick(rng_aux)]);
        return out;
    };

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    result.best_val_mse = std::numeric_limits<double>::infinity();
    PreferenceModel best_model = model;
    int bad_epochs = 0;

    const std::size_t batch_size = config.batch_size;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        result.epochs_run = epoch;
        std::shuffle(order.begin(), order.end(), rng_shuffle);
        const bool t3_this_epoch = t3_on && epoch > config.warmup_epochs;

        double sum_t1 = 0.0, sum_t2 = 0.0, sum_t3 = 0.0;
        std::size_t reliable = 0, sd_total = 0, steps = 0;
        for (std::size_t start = 0; start < train.size(); start += batch_size) {
            const std::size_t end = std::min(train.size(), start + batch_size);
            std::vector<RatingRecord> rated;
            rated.reserve(end - start);
            for (std::size_t k = start; k < end; ++k) rated.push_back(train.records()[order[k]]);

            StepLosses losses;
            if (mode.affinity_as_propensity) {
                losses.t1 = loss_t1_propensity(model, rated, *inputs.affinity,
                                               config.propensity_floor);
                losses.total = losses.t1;
            } else {
                StepBatches batches;
                batches.rated = &rated;
                std::vector<Pair> expanded, rest, unrated;
                if (t2_on) {
                    expanded = draw_from(expanded_base, rated.size());
                    rest = draw_from(rest_base, rated.size());
                    batches.expanded = &expanded;
                    batches.rest = &rest;
                }
                if (t3_this_epoch) {
                    unrated = draw_from(pool, rated.size());
                    batches.unrated = &unrated;
                }
                losses = loss_total(model, t2_on ? &discriminator : nullptr, &ensemble.shadow(),
                                    inputs.teacher, inputs.affinity, *inputs.split, batches,
                                    t2_on ? config.alpha : 0.0,
                                    t3_this_epoch ? config.beta : 0.0, mode.distill);
            }
            if (!std::isfinite(losses.total)) {
                throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                         " step " + std::to_string(steps + 1));
            }
            model_optimizer.step();
            if (t2_on) disc_optimizer.step();
            ensemble.update(model);

            sum_t1 += losses.t1;
            sum_t2 += losses.t2;
            sum_t3 += losses.t3;
            reliable += losses.sd_reliable;
            sd_total += losses.sd_batch;
            ++steps;
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.t1 = sum_t1 / static_cast<double>(steps);
        entry.t2 = t2_on ? sum_t2 / static_cast<double>(steps) : 0.0;
        entry.t3 = t3_this_epoch ? sum_t3 / static_cast<double>(steps) : 0.0;
        entry.reliable_fraction =
            sd_total > 0 ? static_cast<double>(reliable) / static_cast<double>(sd_total) : kNaN;
        entry.val_mse = validation_mse(model, *inputs.validation);
        entry.filter_error_ratio =
            probe.empty() ? kNaN
                          : filter_quality_ratio(model, ensemble.shadow(), probe,
                                                 *inputs.oracle, mode.distill);
        if (!std::isfinite(entry.val_mse)) {
            throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                     " step " + std::to_string(steps));
        }
        result.log.push_back(entry);

        if (entry.val_mse < result.best_val_mse) {
            result.best_val_mse = entry.val_mse;
            result.best_epoch = epoch;
            best_model = model;
            bad_epochs = 0;
        } else if (++bad_epochs >= config.patience) {
            break;
        }
    }

    result.model = std::move(best_model);
    return result;
}

TrainResult train_standard(const RatingDataset& train, const RatingDataset& validation,
                           const SpaceSplit& split, const TrainingConfig& config,
                           const SyntheticWorld* oracle) {
    TrainerInputs inputs;
    inputs.train = &train;
    inputs.validation = &validation;
    inputs.split = &split;
    inputs.oracle = oracle;
    return train_loop(inputs, config, standard_mode());
}

BplInputs prepare_bpl_inputs(const RatingDataset& train, const RatingDataset& validation,
                             const SpaceSplit& split, const TrainingConfig& config) {
    BplInputs out;

    AffinityModel affinity_model = train_affinity(train, split, config.affinity);
    std::vector<Pair> coverage = split.s0_pool();
    coverage.insert(coverage.end(), split.s1().begin(), split.s1().end());
    out.affinity = score_pairs(affinity_model, coverage);

    out.split = mark_s01(split, out.affinity, config.x_percent);

    TrainingConfig teacher_config = config;
    teacher_config.seed = mix_seed(config.seed, stream::teacher);
    teacher_config.weight_decay = config.teacher_weight_decay;
    out.teacher_run = train_standard(train, validation, out.split, teacher_config);
    out.teacher_model = out.teacher_run.model;
    out.teacher = TeacherPredictions::from_model(out.teacher_model, out.split.s0_pool());
    return out;
}

TrainResult train_bpl(const RatingDataset& train, const RatingDataset& validation,
                      const BplInputs& inputs, const TrainingConfig& config,
                      const SyntheticWorld* oracle) {
    TrainerInputs in;
    in.train = &train;
    in.validation = &validation;
    in.split = &inputs.split;
    in.teacher = &inputs.teacher;
    in.affinity = &inputs.affinity;
    in.oracle = oracle;
    return train_loop(in, config, bpl_mode(config));
}

TrainResult run_ablation(const std::string& name, const RatingDataset& train,
                         const RatingDataset& validation, const BplInputs& inputs,
                         const TrainingConfig& config, const SyntheticWorld* oracle) {
    TrainerInputs in;
    in.train = &train;
    in.validation = &validation;
    in.split = &inputs.split;
    in.teacher = &inputs.teacher;
    in.affinity = &inputs.affinity;
    in.oracle = oracle;
    return train_loop(in, config, ablation_mode(name, config));
}

void write_loss_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write loss log: " + path.string());
    out << "epoch,t1,t2,t3,reliable_fraction,val_mse,filter_error_ratio\n";
    char buf[200];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", e.epoch, e.t1,
                      e.t2, e.t3, e.reliable_fraction, e.val_mse, e.filter_error_ratio);
        out << buf;
    }
}

}  // namespace bpl
