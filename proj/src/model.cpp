#include "bpl/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

#include "bpl/checkpoint.hpp"

namespace bpl {

std::vector<double> softmax(const std::vector<double>& logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out[k] = std::exp(logits[k] - peak);
        total += out[k];
    }
    for (double& v : out) v /= total;
    return out;
}

double expected_rating(const std::vector<double>& distribution) {
    double e = 0.0;
    for (std::size_t k = 0; k < distribution.size(); ++k) {
        e += static_cast<double>(k + 1) * distribution[k];
    }
    return e;
}

double entropy(const std::vector<double>& distribution) {
    double h = 0.0;
    for (double p : distribution) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

int argmax_level(const std::vector<double>& distribution) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < distribution.size(); ++k) {
        if (distribution[k] > distribution[best]) best = k;
    }
    return static_cast<int>(best) + 1;
}

bool is_reliable(const std::vector<double>& ensemble_distribution,
                 const std::vector<double>& model_distribution) {
    return argmax_level(ensemble_distribution) == argmax_level(model_distribution);
}

bool max_prob_filter(const std::vector<double>& distribution, double threshold) {
    return *std::max_element(distribution.begin(), distribution.end()) > threshold;
}

PreferenceModel::PreferenceModel(std::uint32_t num_users, std::uint32_t num_items,
                                 int num_levels, int embedding_dim, std::uint64_t seed,
                                 double init_scale)
    : num_users_(num_users),
      num_items_(num_items),
      num_levels_(num_levels),
      dim_(embedding_dim),
      user_embeddings_("user_embeddings", {num_users, static_cast<std::size_t>(embedding_dim)}),
      item_embeddings_("item_embeddings", {num_items, static_cast<std::size_t>(embedding_dim)}),
      predictor_weights_("predictor_weights",
                         {static_cast<std::size_t>(num_levels),
                          static_cast<std::size_t>(embedding_dim)}),
      predictor_bias_("predictor_bias", {static_cast<std::size_t>(num_levels)}) {
    if (num_users == 0 || num_items == 0 || num_levels < 2 || embedding_dim < 1) {
        throw std::runtime_error("invalid preference model dimensions");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, init_scale);
    for (double& v : user_embeddings_.values) v = gauss(rng);
    for (double& v : item_embeddings_.values) v = gauss(rng);
    // Predictor stays at zero: uniform initial distribution.
}

PreferenceModel PreferenceModel::from_blocks(int num_levels,
                                             std::vector<ParameterBlock> blocks) {
    if (blocks.size() != 4) throw std::runtime_error("expected 4 parameter blocks");
    PreferenceModel m;
    for (ParameterBlock& b : blocks) {
        if (b.name == "user_embeddings") {
            m.user_embeddings_ = std::move(b);
        } else if (b.name == "item_embeddings") {
            m.item_embeddings_ = std::move(b);
        } else if (b.name == "predictor_weights") {
            m.predictor_weights_ = std::move(b);
        } else if (b.name == "predictor_bias") {
            m.predictor_bias_ = std::move(b);
        } else {
            throw std::runtime_error("unexpected parameter block " + b.name);
        }
    }
    if (m.user_embeddings_.shape.size() != 2 || m.item_embeddings_.shape.size() != 2 ||
        m.predictor_weights_.shape.size() != 2 || m.predictor_bias_.shape.size() != 1) {
        throw std::runtime_error("malformed preference model blocks");
    }
    m.num_users_ = static_cast<std::uint32_t>(m.user_embeddings_.shape[0]);
    m.num_items_ = static_cast<std::uint32_t>(m.item_embeddings_.shape[0]);
    m.dim_ = static_cast<int>(m.user_embeddings_.shape[1]);
    m.num_levels_ = static_cast<int>(m.predictor_bias_.shape[0]);
    if (num_levels != m.num_levels_) {
        throw std::runtime_error("checkpoint levels disagree with requested K");
    }
    return m;
}

void PreferenceModel::check_pair(Pair pair) const {
    if (pair.user >= num_users_ || pair.item >= num_items_) {
        throw std::runtime_error("pair index out of range (" + std::to_string(pair.user) + "," +
                                 std::to_string(pair.item) + ")");
    }
}

std::vector<double> PreferenceModel::encode(Pair pair) const {
    check_pair(pair);
    std::vector<double> z(dim_);
    const double* u = &user_embeddings_.values[static_cast<std::size_t>(pair.user) * dim_];
    const double* v = &item_embeddings_.values[static_cast<std::size_t>(pair.item) * dim_];
    for (int l = 0; l < dim_; ++l) z[l] = u[l] * v[l];
    return z;
}

std::vector<double> PreferenceModel::logits(Pair pair) const {
    const std::vector<double> z = encode(pair);
    std::vector<double> out(num_levels_);
    for (int k = 0; k < num_levels_; ++k) {
        const double* w = &predictor_weights_.values[static_cast<std::size_t>(k) * dim_];
        double acc = predictor_bias_.values[k];
        for (int l = 0; l < dim_; ++l) acc += w[l] * z[l];
        out[k] = acc;
    }
    return out;
}

std::vector<double> PreferenceModel::predict_distribution(Pair pair) const {
    return softmax(logits(pair));
}

double PreferenceModel::predict_expected_rating(Pair pair) const {
    return expected_rating(predict_distribution(pair));
}

void PreferenceModel::accumulate_logit_gradient(Pair pair, const std::vector<double>& dlogits,
                                                double weight) {
    check_pair(pair);
    const std::vector<double> z = encode(pair);
    const double* u = &user_embeddings_.values[static_cast<std::size_t>(pair.user) * dim_];
    const double* v = &item_embeddings_.values[static_cast<std::size_t>(pair.item) * dim_];
    double* gu = &user_embeddings_.gradient[static_cast<std::size_t>(pair.user) * dim_];
    double* gv = &item_embeddings_.gradient[static_cast<std::size_t>(pair.item) * dim_];
    for (int k = 0; k < num_levels_; ++k) {
        const double gk = weight * dlogits[k];
        if (gk == 0.0) continue;
        const double* w = &predictor_weights_.values[static_cast<std::size_t>(k) * dim_];
        double* gw = &predictor_weights_.gradient[static_cast<std::size_t>(k) * dim_];
        predictor_bias_.gradient[k] += gk;
        for (int l = 0; l < dim_; ++l) {
            gw[l] += gk * z[l];
            const double dz = gk * w[l];
            gu[l] += dz * v[l];
            gv[l] += dz * u[l];
        }
    }
}

void PreferenceModel::accumulate_encoder_gradient(Pair pair, const std::vector<double>& dz,
                                                  double weight) {
    check_pair(pair);
    const double* u = &user_embeddings_.values[static_cast<std::size_t>(pair.user) * dim_];
    const double* v = &item_embeddings_.values[static_cast<std::size_t>(pair.item) * dim_];
    double* gu = &user_embeddings_.gradient[static_cast<std::size_t>(pair.user) * dim_];
    double* gv = &item_embeddings_.gradient[static_cast<std::size_t>(pair.item) * dim_];
    for (int l = 0; l < dim_; ++l) {
        gu[l] += weight * dz[l] * v[l];
        gv[l] += weight * dz[l] * u[l];
    }
}

std::vector<ParameterBlock*> PreferenceModel::blocks() {
    return {&user_embeddings_, &item_embeddings_, &predictor_weights_, &predictor_bias_};
}

std::vector<const ParameterBlock*> PreferenceModel::blocks() const {
    return {&user_embeddings_, &item_embeddings_, &predictor_weights_, &predictor_bias_};
}

double PreferenceModel::parameter_checksum() const {
    double acc = 0.0;
    std::size_t pos = 1;
    for (const ParameterBlock* b : blocks()) {
        for (double v : b->values) {
            acc += v * static_cast<double>(pos % 9973);
            ++pos;
        }
    }
    return acc;
}

void PreferenceModel::save(const std::filesystem::path& path) const {
    save_checkpoint(path, blocks());
}

PreferenceModel PreferenceModel::load(const std::filesystem::path& path, int num_levels) {
    return from_blocks(num_levels, load_checkpoint(path));
}

BinaryMlp::BinaryMlp(int input_dim, int layers, int hidden_dim, std::uint64_t seed,
                     const std::string& block_prefix)
    : input_dim_(input_dim), layers_(layers), hidden_dim_(hidden_dim) {
    if (input_dim < 1 || layers < 1 || hidden_dim < 1) {
        throw std::runtime_error("invalid binary classifier dimensions");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int layer = 0; layer < layers; ++layer) {
        const int in = layer == 0 ? input_dim : hidden_dim;
        const int out = layer + 1 == layers ? 1 : hidden_dim;
        weights_.emplace_back(block_prefix + "_w" + std::to_string(layer),
                              std::vector<std::size_t>{static_cast<std::size_t>(out),
                                                       static_cast<std::size_t>(in)});
        biases_.emplace_back(block_prefix + "_b" + std::to_string(layer),
                             std::vector<std::size_t>{static_cast<std::size_t>(out)});
        // Hidden layers break symmetry; the final layer starts at zero so the
        // untrained classifier outputs exactly one half.
        if (layer + 1 < layers) {
            const double scale = 1.0 / std::sqrt(static_cast<double>(in));
            for (double& v : weights_.back().values) v = scale * gauss(rng);
        }
    }
}

std::vector<std::vector<double>> BinaryMlp::forward_states(
    const std::vector<double>& input) const {
    if (static_cast<int>(input.size()) != input_dim_) {
        throw std::runtime_error("classifier input size mismatch");
    }
    std::vector<std::vector<double>> states;
    states.reserve(layers_ + 1);
    states.push_back(input);
    for (int layer = 0; layer < layers_; ++layer) {
        const auto& w = weights_[layer];
        const auto& b = biases_[layer];
        const std::size_t out_dim = b.values.size();
        const std::size_t in_dim = states.back().size();
        std::vector<double> next(out_dim);
        for (std::size_t o = 0; o < out_dim; ++o) {
            double acc = b.values[o];
            const double* row = &w.values[o * in_dim];
            for (std::size_t i = 0; i < in_dim; ++i) acc += row[i] * states.back()[i];
            next[o] = layer + 1 < layers_ ? std::tanh(acc) : acc;
        }
        states.push_back(std::move(next));
    }
    return states;
}

double BinaryMlp::logit(const std::vector<double>& input) const {
    return forward_states(input).back()[0];
}

double BinaryMlp::probability(const std::vector<double>& input) const {
    return 1.0 / (1.0 + std::exp(-logit(input)));
}

std::vector<double> BinaryMlp::backward(const std::vector<double>& input, double dlogit,
                                        double weight) {
    const auto states = forward_states(input);
    std::vector<double> delta{weight * dlogit};  // d(loss)/d(pre-activation), last layer
    for (int layer = layers_ - 1; layer >= 0; --layer) {
        auto& w = weights_[layer];
        auto& b = biases_[layer];
        const std::vector<double>& in = states[layer];
        const std::size_t out_dim = b.values.size();
        const std::size_t in_dim = in.size();
        std::vector<double> din(in_dim, 0.0);
        for (std::size_t o = 0; o < out_dim; ++o) {
            b.gradient[o] += delta[o];
            const double* row = &w.values[o * in_dim];
            double* grow = &w.gradient[o * in_dim];
            for (std::size_t i = 0; i < in_dim; ++i) {
                grow[i] += delta[o] * in[i];
                din[i] += delta[o] * row[i];
            }
        }
        if (layer > 0) {
            // Route through the tanh of the previous layer's output.
            for (std::size_t i = 0; i < in_dim; ++i) din[i] *= 1.0 - in[i] * in[i];
        }
        delta = std::move(din);
    }
    return delta;  // d(loss)/d(input), weight already applied
}

std::vector<ParameterBlock*> BinaryMlp::blocks() {
    std::vector<ParameterBlock*> out;
    for (int layer = 0; layer < layers_; ++layer) {
        out.push_back(&weights_[layer]);
        out.push_back(&biases_[layer]);
    }
    return out;
}

std::vector<const ParameterBlock*> BinaryMlp::blocks() const {
    std::vector<const ParameterBlock*> out;
    for (int layer = 0; layer < layers_; ++layer) {
        out.push_back(&weights_[layer]);
        out.push_back(&biases_[layer]);
    }
    return out;
}

TemporalEnsemble::TemporalEnsemble(const PreferenceModel& model, double tau)
    : shadow_(model), tau_(tau) {
    if (tau < 0.0 || tau > 1.0) throw std::runtime_error("tau must lie in [0,1]");
}

void TemporalEnsemble::update(const PreferenceModel& model) {
    auto shadow_blocks = shadow_.blocks();
    auto model_blocks = model.blocks();
    for (std::size_t k = 0; k < shadow_blocks.size(); ++k) {
        ParameterBlock& s = *shadow_blocks[k];
        const ParameterBlock& m = *model_blocks[k];
        if (s.shape != m.shape) {
            throw std::runtime_error("ensemble shape mismatch for block " + s.name);
        }
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            s.values[i] = tau_ * s.values[i] + (1.0 - tau_) * m.values[i];
        }
    }
}

void TeacherPredictions::set(Pair pair, double value) { values_[pack(pair)] = value; }

double TeacherPredictions::at(Pair pair) const {
    auto it = values_.find(pack(pair));
    if (it == values_.end()) {
        throw std::runtime_error("missing teacher prediction for pair (" +
                                 std::to_string(pair.user) + "," + std::to_string(pair.item) +
                                 ")");
    }
    return it->second;
}

TeacherPredictions TeacherPredictions::from_model(const PreferenceModel& teacher,
                                                  const std::vector<Pair>& pairs) {
    TeacherPredictions out;
    for (const Pair& p : pairs) out.set(p, teacher.predict_expected_rating(p));
    return out;
}

void TeacherPredictions::save_tsv(const std::filesystem::path& path) const {
    std::vector<std::uint64_t> keys;
    keys.reserve(values_.size());
    for (const auto& [k, v] : values_) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write teacher predictions: " + path.string());
    char buf[32];
    for (std::uint64_t k : keys) {
        Pair p = unpack(k);
        std::snprintf(buf, sizeof(buf), "%.6f", values_.at(k));
        out << p.user << '\t' << p.item << '\t' << buf << '\n';
    }
}

TeacherPredictions TeacherPredictions::load_tsv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open teacher predictions: " + path.string());
    TeacherPredictions out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        unsigned long user, item;
        double value;
        if (std::sscanf(line.c_str(), "%lu\t%lu\t%lf", &user, &item, &value) != 3) {
            throw std::runtime_error("malformed teacher line at line " + std::to_string(lineno));
        }
        out.set(Pair{static_cast<std::uint32_t>(user), static_cast<std::uint32_t>(item)}, value);
    }
    return out;
}

}  // namespace bpl
