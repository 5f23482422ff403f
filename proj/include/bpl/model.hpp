#pragma once

#include <filesystem>
#include <unordered_map>
#include <vector>

#include "bpl/parameters.hpp"
#include "bpl/types.hpp"

namespace bpl {

// Distribution helpers. All distributions are K-vectors over rating levels
// 1..K stored 0-based; probabilities are strictly positive softmax outputs.

// Numerically stabilized softmax (max subtraction).
std::vector<double> softmax(const std::vector<double>& logits);

// Sum_k (k+1) * p[k]; lies in [1, K] for a distribution.
double expected_rating(const std::vector<double>& distribution);

// Shannon entropy in nats; 0 log 0 treated as 0.
double entropy(const std::vector<double>& distribution);

// 1-based argmax level; exact ties resolve to the lower level.
int argmax_level(const std::vector<double>& distribution);

// True iff both distributions argmax-agree (tie-break toward lower level).
bool is_reliable(const std::vector<double>& ensemble_distribution,
                 const std::vector<double>& model_distribution);

// True iff max_k p[k] strictly exceeds the threshold.
bool max_prob_filter(const std::vector<double>& distribution, double threshold);

// ID-based preference model: per-user and per-item embedding rows combined
// elementwise, then an affine map to K rating-level logits. Embeddings start
// at N(0, init_scale^2); the predictor starts at zero so the initial output
// is exactly uniform.
class PreferenceModel {
public:
    PreferenceModel() = default;
    PreferenceModel(std::uint32_t num_users, std::uint32_t num_items, int num_levels,
                    int embedding_dim, std::uint64_t seed, double init_scale = 0.01);

    static PreferenceModel from_blocks(int num_levels, std::vector<ParameterBlock> blocks);

    std::uint32_t num_users() const { return num_users_; }
    std::uint32_t num_items() const { return num_items_; }
    int num_levels() const { return num_levels_; }
    int embedding_dim() const { return dim_; }

    // z = user row ⊙ item row.
    std::vector<double> encode(Pair pair) const;
    std::vector<double> logits(Pair pair) const;
    std::vector<double> predict_distribution(Pair pair) const;
    double predict_expected_rating(Pair pair) const;

    // d(loss)/d(logits) -> gradients of embeddings and predictor, scaled by
    // weight and accumulated in place.
    void accumulate_logit_gradient(Pair pair, const std::vector<double>& dlogits, double weight);

    // d(loss)/dz -> gradients of the two embedding rows only (the adversarial
    // path, which bypasses the predictor).
    void accumulate_encoder_gradient(Pair pair, const std::vector<double>& dz, double weight);

    std::vector<ParameterBlock*> blocks();
    std::vector<const ParameterBlock*> blocks() const;

    // Order-sensitive digest of all parameter values; used to assert that
    // read-only consumers leave the model untouched.
    double parameter_checksum() const;

    void save(const std::filesystem::path& path) const;
    static PreferenceModel load(const std::filesystem::path& path, int num_levels);

private:
    void check_pair(Pair pair) const;

    std::uint32_t num_users_ = 0;
    std::uint32_t num_items_ = 0;
    int num_levels_ = 0;
    int dim_ = 0;
    ParameterBlock user_embeddings_;
    ParameterBlock item_embeddings_;
    ParameterBlock predictor_weights_;  // K x d
    ParameterBlock predictor_bias_;     // K
};

// Small fully connected binary classifier head: `layers - 1` tanh hidden
// layers of hidden_dim units, then an affine map to one logit. Hidden layers
// get random 1/sqrt(fan_in) init; the final layer starts at zero so the
// initial output is exactly 0.5.
class BinaryMlp {
public:
    BinaryMlp() = default;
    BinaryMlp(int input_dim, int layers, int hidden_dim, std::uint64_t seed,
              const std::string& block_prefix);

    int input_dim() const { return input_dim_; }
    int layers() const { return layers_; }

    double logit(const std::vector<double>& input) const;
    double probability(const std::vector<double>& input) const;

    // Backward pass for d(loss)/d(logit) = dlogit, scaled by weight;
    // accumulates parameter gradients and returns d(loss)/d(input).
    std::vector<double> backward(const std::vector<double>& input, double dlogit, double weight);

    std::vector<ParameterBlock*> blocks();
    std::vector<const ParameterBlock*> blocks() const;

private:
    std::vector<std::vector<double>> forward_states(const std::vector<double>& input) const;

    int input_dim_ = 0;
    int layers_ = 0;
    int hidden_dim_ = 0;
    std::vector<ParameterBlock> weights_;  // per layer: out x in
    std::vector<ParameterBlock> biases_;   // per layer: out
};

// Exponential-moving-average shadow of a PreferenceModel, used as the slow
// reference for the consistency filter.
class TemporalEnsemble {
public:
    TemporalEnsemble() = default;
    TemporalEnsemble(const PreferenceModel& model, double tau);

    // shadow = tau * shadow + (1 - tau) * model, every block.
    void update(const PreferenceModel& model);

    const PreferenceModel& shadow() const { return shadow_; }
    double tau() const { return tau_; }

private:
    PreferenceModel shadow_;
    double tau_ = 0.999;
};

// Frozen expected ratings of the teacher, keyed by pair.
class TeacherPredictions {
public:
    void set(Pair pair, double value);
    bool contains(Pair pair) const { return values_.count(pack(pair)) != 0; }
    double at(Pair pair) const;  // throws when the pair was never cached
    std::size_t size() const { return values_.size(); }

    static TeacherPredictions from_model(const PreferenceModel& teacher,
                                         const std::vector<Pair>& pairs);

    // "user<TAB>item<TAB>value" with 6 decimals, sorted by (user, item).
    void save_tsv(const std::filesystem::path& path) const;
    static TeacherPredictions load_tsv(const std::filesystem::path& path);

private:
    std::unordered_map<std::uint64_t, double> values_;
};

}  // namespace bpl
