#include "bpl/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "bpl/parameters.hpp"

namespace bpl {

namespace {

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// -[y log p + (1-y) log(1-p)] expressed through the logit, overflow-safe.
double bce(double logit, double label) { return softplus(logit) - label * logit; }

// Substream tags local to affinity training.
constexpr std::uint64_t kInit = 0xA1;
constexpr std::uint64_t kHoldout = 0xA2;
constexpr std::uint64_t kEpochShuffle = 0xA3;
constexpr std::uint64_t kNegatives = 0xA4;

}  // namespace

AffinityModel::AffinityModel(std::uint32_t num_users, std::uint32_t num_items,
                             const AffinityConfig& config)
    : num_users_(num_users),
      num_items_(num_items),
      dim_(config.embedding_dim),
      config_(config),
      user_embeddings_("affinity_user_embeddings",
                       {num_users, static_cast<std::size_t>(config.embedding_dim)}),
      item_embeddings_("affinity_item_embeddings",
                       {num_items, static_cast<std::size_t>(config.embedding_dim)}),
      head_(config.embedding_dim, config.layers, config.hidden_dim,
            mix_seed(config.seed, kInit) ^ 1, "affinity_head") {
    std::mt19937_64 rng(mix_seed(config.seed, kInit));
    std::normal_distribution<double> gauss(0.0, config.init_scale);
    for (double& v : user_embeddings_.values) v = gauss(rng);
    for (double& v : item_embeddings_.values) v = gauss(rng);
}

void AffinityModel::check_pair(Pair pair) const {
    if (pair.user >= num_users_ || pair.item >= num_items_) {
        throw std::runtime_error("pair index out of range (" + std::to_string(pair.user) + "," +
                                 std::to_string(pair.item) + ")");
    }
}

std::vector<double> AffinityModel::encode(Pair pair) const {
    check_pair(pair);
    std::vector<double> z(dim_);
    const double* u = &user_embeddings_.values[static_cast<std::size_t>(pair.user) * dim_];
    const double* v = &item_embeddings_.values[static_cast<std::size_t>(pair.item) * dim_];
    for (int l = 0; l < dim_; ++l) z[l] = u[l] * v[l];
    return z;
}

double AffinityModel::logit_of(Pair pair) const { return head_.logit(encode(pair)); }

double AffinityModel::score(Pair pair) const {
    // Clamp away from the exact endpoints so scores stay in the open unit
    // interval even when the logit saturates a double.
    return std::clamp(sigmoid(logit_of(pair)), 1e-12, 1.0 - 1e-12);
}

void AffinityModel::accumulate_gradient(Pair pair, double dlogit, double weight) {
    const std::vector<double> z = encode(pair);
    const std::vector<double> dz = head_.backward(z, dlogit, weight);
    const double* u = &user_embeddings_.values[static_cast<std::size_t>(pair.user) * dim_];
    const double* v = &item_embeddings_.values[static_cast<std::size_t>(pair.item) * dim_];
    double* gu = &user_embeddings_.gradient[static_cast<std::size_t>(pair.user) * dim_];
    double* gv = &item_embeddings_.gradient[static_cast<std::size_t>(pair.item) * dim_];
    for (int l = 0; l < dim_; ++l) {
        gu[l] += dz[l] * v[l];
        gv[l] += dz[l] * u[l];
    }
}

std::vector<ParameterBlock*> AffinityModel::blocks() {
    std::vector<ParameterBlock*> out{&user_embeddings_, &item_embeddings_};
    for (ParameterBlock* b : head_.blocks()) out.push_back(b);
    return out;
}

std::vector<const ParameterBlock*> AffinityModel::blocks() const {
    std::vector<const ParameterBlock*> out{&user_embeddings_, &item_embeddings_};
    for (const ParameterBlock* b : head_.blocks()) out.push_back(b);
    return out;
}

AffinityModel train_affinity(const RatingDataset& dataset, const SpaceSplit& split,
                             const AffinityConfig& config) {
    if (split.s1().empty()) throw std::runtime_error("degenerate split: no rated pairs");
    AffinityModel model(dataset.num_users(), dataset.num_items(), config);
    Adam optimizer(model.blocks(), AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8,
                                              config.weight_decay});

    // Hold out a slice of positives plus an equal number of sampled negatives
    // for early stopping.
    std::vector<Pair> positives = split.s1();
    std::mt19937_64 rng_hold(mix_seed(config.seed, kHoldout));
    std::shuffle(positives.begin(), positives.end(), rng_hold);
    const auto n_hold = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.holdout_fraction * positives.size())));
    if (n_hold >= positives.size()) {
        throw std::runtime_error("holdout fraction leaves no training positives");
    }
    std::vector<Pair> holdout_pos(positives.begin(), positives.begin() + n_hold);
    std::vector<Pair> train_pos(positives.begin() + n_hold, positives.end());

    std::uniform_int_distribution<std::uint32_t> pick_user(0, dataset.num_users() - 1);
    std::uniform_int_distribution<std::uint32_t> pick_item(0, dataset.num_items() - 1);
    auto draw_negative = [&](std::mt19937_64& rng) {
        while (true) {
            Pair p{pick_user(rng), pick_item(rng)};
            if (!split.is_rated(p)) return p;
        }
    };
    std::vector<Pair> holdout_neg;
    holdout_neg.reserve(n_hold);
    for (std::size_t k = 0; k < n_hold; ++k) holdout_neg.push_back(draw_negative(rng_hold));

    auto holdout_bce = [&]() {
        double total = 0.0;
        for (const Pair& p : holdout_pos) total += bce(model.logit_of(p), 1.0);
        for (const Pair& p : holdout_neg) total += bce(model.logit_of(p), 0.0);
        return total / static_cast<double>(holdout_pos.size() + holdout_neg.size());
    };

    std::mt19937_64 rng_epoch(mix_seed(config.seed, kEpochShuffle));
    std::mt19937_64 rng_neg(mix_seed(config.seed, kNegatives));

    double best = holdout_bce();
    std::vector<std::vector<double>> best_values;
    for (const ParameterBlock* b : model.blocks()) best_values.push_back(b->values);
    int bad_epochs = 0;
    int epochs_run = 0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        epochs_run = epoch;
        std::shuffle(train_pos.begin(), train_pos.end(), rng_epoch);
        for (std::size_t start = 0; start < train_pos.size(); start += config.batch_size) {
            const std::size_t end = std::min(train_pos.size(), start + config.batch_size);
            const std::size_t n_pos = end - start;
            const auto n_neg = static_cast<std::size_t>(
                std::llround(config.negative_ratio * static_cast<double>(n_pos)));
            const double inv_n = 1.0 / static_cast<double>(n_pos + n_neg);
            for (std::size_t k = start; k < end; ++k) {
                const Pair p = train_pos[k];
                model.accumulate_gradient(p, sigmoid(model.logit_of(p)) - 1.0, inv_n);
            }
            for (std::size_t k = 0; k < n_neg; ++k) {
                const Pair p = draw_negative(rng_neg);
                model.accumulate_gradient(p, sigmoid(model.logit_of(p)), inv_n);
            }
            optimizer.step();
        }
        const double current = holdout_bce();
        if (current < best) {
            best = current;
            auto blocks = model.blocks();
            for (std::size_t k = 0; k < blocks.size(); ++k) best_values[k] = blocks[k]->values;
            bad_epochs = 0;
        } else if (++bad_epochs >= config.patience) {
            break;
        }
    }

    auto blocks = model.blocks();
    for (std::size_t k = 0; k < blocks.size(); ++k) blocks[k]->values = best_values[k];
    model.set_epochs_run(epochs_run);
    return model;
}

AffinityScores score_pairs(const AffinityModel& model, const std::vector<Pair>& pairs) {
    std::ostringstream provenance;
    provenance << "affinity-classifier seed=" << model.config().seed
               << " layers=" << model.config().layers << " epochs=" << model.epochs_run();
    AffinityScores scores(provenance.str());
    for (const Pair& p : pairs) scores.set(p, model.score(p));
    return scores;
}

}  // namespace bpl
