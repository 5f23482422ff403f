#include "bpl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "bpl/parameters.hpp"

namespace bpl {

std::pair<double, double> mse_mae(const PreferenceModel& model, const RatingDataset& test) {
    if (test.size() == 0) throw std::runtime_error("empty test set");
    double se = 0.0, ae = 0.0;
    for (const RatingRecord& rec : test.records()) {
        const double predicted = model.predict_expected_rating(Pair{rec.user, rec.item});
        const double err = predicted - static_cast<double>(rec.rating);
        se += err * err;
        ae += std::fabs(err);
    }
    const auto n = static_cast<double>(test.size());
    return {se / n, ae / n};
}

double harmonic_mean(double a, double b) {
    if (a <= 0.0 || b <= 0.0) throw std::runtime_error("harmonic mean needs positive inputs");
    return 2.0 * a * b / (a + b);
}

std::vector<double> affinity_bucket_errors(const PreferenceModel& model,
                                           const std::vector<RatingRecord>& pairs,
                                           const AffinityScores& affinity, int num_buckets) {
    if (num_buckets < 1) throw std::runtime_error("need at least one bucket");
    if (pairs.size() < static_cast<std::size_t>(num_buckets)) {
        throw std::runtime_error("fewer pairs than buckets");
    }
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        const double ax = affinity.at(Pair{pairs[x].user, pairs[x].item});
        const double ay = affinity.at(Pair{pairs[y].user, pairs[y].item});
        if (ax != ay) return ax < ay;
        return Pair{pairs[x].user, pairs[x].item} < Pair{pairs[y].user, pairs[y].item};
    });

    std::vector<double> errors(num_buckets, 0.0);
    const std::size_t base = pairs.size() / num_buckets;
    const std::size_t extra = pairs.size() % num_buckets;
    std::size_t cursor = 0;
    for (int b = 0; b < num_buckets; ++b) {
        const std::size_t size = base + (static_cast<std::size_t>(b) < extra ? 1 : 0);
        double se = 0.0;
        for (std::size_t k = 0; k < size; ++k) {
            const RatingRecord& rec = pairs[order[cursor++]];
            const double err =
                model.predict_expected_rating(Pair{rec.user, rec.item}) - rec.rating;
            se += err * err;
        }
        errors[b] = se / static_cast<double>(size);
    }
    return errors;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
    std::vector<double> ranks(n);
    std::size_t k = 0;
    while (k < n) {
        std::size_t j = k;
        while (j + 1 < n && values[order[j + 1]] == values[order[k]]) ++j;
        const double rank = 0.5 * static_cast<double>(k + j) + 1.0;  // average, 1-based
        for (std::size_t t = k; t <= j; ++t) ranks[order[t]] = rank;
        k = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const auto n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0.0 || vb == 0.0) throw std::runtime_error("degenerate factor: constant values");
    return cov / std::sqrt(va * vb);
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 3) {
        throw std::runtime_error("correlation needs two equally sized samples of at least 3");
    }
    return pearson(average_ranks(a), average_ranks(b));
}

FactorCorrelations factor_correlations_with_popularity(
    const RatingDataset& dataset, const AffinityScores& affinity,
    const std::vector<double>& item_popularity) {
    if (item_popularity.size() != dataset.num_items()) {
        throw std::runtime_error("popularity table size disagrees with the item count");
    }
    // Per-user mean popularity of rated items and per-item mean rating.
    std::vector<double> user_pop_sum(dataset.num_users(), 0.0);
    std::vector<std::size_t> user_count(dataset.num_users(), 0);
    std::vector<double> item_rating_sum(dataset.num_items(), 0.0);
    std::vector<std::size_t> item_count(dataset.num_items(), 0);
    std::unordered_map<std::uint64_t, int> rating_of;
    rating_of.reserve(dataset.size());
    for (const RatingRecord& rec : dataset.records()) {
        user_pop_sum[rec.user] += item_popularity[rec.item];
        ++user_count[rec.user];
        item_rating_sum[rec.item] += rec.rating;
        ++item_count[rec.item];
        rating_of[pack(Pair{rec.user, rec.item})] = rec.rating;
    }

    std::vector<std::uint64_t> keys;
    keys.reserve(affinity.size());
    for (const auto& [k, v] : affinity.raw()) keys.push_back(k);
    std::sort(keys.begin(), keys.end());

    std::vector<double> pop_factor, pop_affinity;
    std::vector<double> align_factor, align_affinity;
    std::vector<double> conf_factor, conf_affinity;
    for (std::uint64_t key : keys) {
        const Pair pair = unpack(key);
        const double score = affinity.at(pair);
        auto rated = rating_of.find(key);
        if (rated == rating_of.end()) {
            pop_factor.push_back(item_popularity[pair.item]);
            pop_affinity.push_back(score);
            if (user_count[pair.user] > 0) {
                const double pu =
                    user_pop_sum[pair.user] / static_cast<double>(user_count[pair.user]);
                const double diff = pu - item_popularity[pair.item];
                align_factor.push_back(-diff * diff);
                align_affinity.push_back(score);
            }
        } else {
            const double mean_rating =
                item_rating_sum[pair.item] / static_cast<double>(item_count[pair.item]);
            const double diff = static_cast<double>(rated->second) - mean_rating;
            conf_factor.push_back(-diff * diff);
            conf_affinity.push_back(score);
        }
    }

    FactorCorrelations out;
    out.popularity = spearman(pop_factor, pop_affinity);
    out.alignment = spearman(align_factor, align_affinity);
    out.conformity = spearman(conf_factor, conf_affinity);
    return out;
}

FactorCorrelations factor_correlations(const RatingDataset& dataset,
                                       const AffinityScores& affinity) {
    std::vector<double> popularity(dataset.num_items(), 0.0);
    for (const RatingRecord& rec : dataset.records()) popularity[rec.item] += 1.0;
    for (double& v : popularity) v /= static_cast<double>(dataset.num_users());
    return factor_correlations_with_popularity(dataset, affinity, popularity);
}

namespace {

// Two-layer softmax probe trained on frozen representations.
struct ProbeNet {
    ParameterBlock w1, b1, w2, b2;
    int input_dim, hidden_dim, num_classes;

    ProbeNet(int in, int hidden, int classes, std::uint64_t seed)
        : w1("probe_w1", {static_cast<std::size_t>(hidden), static_cast<std::size_t>(in)}),
          b1("probe_b1", {static_cast<std::size_t>(hidden)}),
          w2("probe_w2", {static_cast<std::size_t>(classes), static_cast<std::size_t>(hidden)}),
          b2("probe_b2", {static_cast<std::size_t>(classes)}),
          input_dim(in),
          hidden_dim(hidden),
          num_classes(classes) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
        for (double& v : w1.values) v = gauss(rng);
    }

    std::vector<double> hidden(const std::vector<double>& x) const {
        std::vector<double> h(hidden_dim);
        for (int o = 0; o < hidden_dim; ++o) {
            double acc = b1.values[o];
            const double* row = &w1.values[static_cast<std::size_t>(o) * input_dim];
            for (int i = 0; i < input_dim; ++i) acc += row[i] * x[i];
            h[o] = std::tanh(acc);
        }
        return h;
    }

    std::vector<double> distribution(const std::vector<double>& x) const {
        const std::vector<double> h = hidden(x);
        std::vector<double> logits(num_classes);
        for (int k = 0; k < num_classes; ++k) {
            double acc = b2.values[k];
            const double* row = &w2.values[static_cast<std::size_t>(k) * hidden_dim];
            for (int o = 0; o < hidden_dim; ++o) acc += row[o] * h[o];
            logits[k] = acc;
        }
        return softmax(logits);
    }

    // Cross-entropy gradient for one example with coefficient scale.
    void accumulate(const std::vector<double>& x, int label_index, double scale) {
        const std::vector<double> h = hidden(x);
        std::vector<double> logits(num_classes);
        for (int k = 0; k < num_classes; ++k) {
            double acc = b2.values[k];
            const double* row = &w2.values[static_cast<std::size_t>(k) * hidden_dim];
            for (int o = 0; o < hidden_dim; ++o) acc += row[o] * h[o];
            logits[k] = acc;
        }
        const std::vector<double> p = softmax(logits);
        std::vector<double> dh(hidden_dim, 0.0);
        for (int k = 0; k < num_classes; ++k) {
            const double d = scale * (p[k] - (k == label_index ? 1.0 : 0.0));
            b2.gradient[k] += d;
            const double* row = &w2.values[static_cast<std::size_t>(k) * hidden_dim];
            double* grow = &w2.gradient[static_cast<std::size_t>(k) * hidden_dim];
            for (int o = 0; o < hidden_dim; ++o) {
                grow[o] += d * h[o];
                dh[o] += d * row[o];
            }
        }
        for (int o = 0; o < hidden_dim; ++o) {
            const double d = dh[o] * (1.0 - h[o] * h[o]);
            b1.gradient[o] += d;
            double* grow = &w1.gradient[static_cast<std::size_t>(o) * input_dim];
            for (int i = 0; i < input_dim; ++i) grow[i] += d * x[i];
        }
    }
};

}  // namespace

ProbeReport representation_probe(const PreferenceModel& model, const RatingDataset& test,
                                 int folds, std::uint64_t seed, int epochs,
                                 double learning_rate) {
    if (folds < 2) throw std::runtime_error("need at least 2 folds");
    if (test.size() < static_cast<std::size_t>(folds)) {
        throw std::runtime_error("fewer test records than folds");
    }
    const int K = test.num_levels();
    const int d = model.embedding_dim();

    // Frozen features.
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    features.reserve(test.size());
    for (const RatingRecord& rec : test.records()) {
        features.push_back(model.encode(Pair{rec.user, rec.item}));
        labels.push_back(rec.rating - 1);
    }

    std::vector<std::size_t> order(test.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(seed, stream::probe_folds));
    std::shuffle(order.begin(), order.end(), rng);

    // Per-level F1 sums across folds where the level appears in the fold.
    std::vector<double> f1_sum(K, 0.0);
    std::vector<int> f1_folds(K, 0);

    for (int fold = 0; fold < folds; ++fold) {
        ProbeNet net(d, 2 * d, K, mix_seed(seed, stream::probe_folds) ^ (fold + 1));
        Adam optimizer({&net.w1, &net.b1, &net.w2, &net.b2},
                       AdamConfig{learning_rate, 0.9, 0.999, 1e-8, 0.0});
        std::vector<std::size_t> train_idx, val_idx;
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            (pos % static_cast<std::size_t>(folds) == static_cast<std::size_t>(fold) ? val_idx
                                                                                     : train_idx)
                .push_back(order[pos]);
        }
        const double scale = 1.0 / static_cast<double>(train_idx.size());
        for (int epoch = 0; epoch < epochs; ++epoch) {
            for (std::size_t idx : train_idx) net.accumulate(features[idx], labels[idx], scale);
            optimizer.step();
        }

        std::vector<std::size_t> tp(K, 0), fp(K, 0), fn(K, 0), truth(K, 0);
        for (std::size_t idx : val_idx) {
            const int predicted = argmax_level(net.distribution(features[idx])) - 1;
            const int actual = labels[idx];
            ++truth[actual];
            if (predicted == actual) {
                ++tp[actual];
            } else {
                ++fp[predicted];
                ++fn[actual];
            }
        }
        for (int k = 0; k < K; ++k) {
            if (truth[k] == 0) continue;  // level absent from this fold: undefined
            const double denom = static_cast<double>(2 * tp[k] + fp[k] + fn[k]);
            f1_sum[k] += denom > 0.0 ? 2.0 * static_cast<double>(tp[k]) / denom : 0.0;
            ++f1_folds[k];
        }
    }

    ProbeReport report;
    report.per_level_f1.assign(K, std::numeric_limits<double>::quiet_NaN());
    report.level_defined.assign(K, false);
    double total = 0.0;
    int defined = 0;
    for (int k = 0; k < K; ++k) {
        if (f1_folds[k] == 0) continue;
        report.per_level_f1[k] = f1_sum[k] / f1_folds[k];
        report.level_defined[k] = true;
        total += report.per_level_f1[k];
        ++defined;
    }
    report.macro_f1 = defined > 0 ? total / defined : std::numeric_limits<double>::quiet_NaN();
    return report;
}

double paired_t_statistic(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw std::runtime_error("paired t needs two equally sized samples of at least 2");
    }
    const auto n = static_cast<double>(a.size());
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / n;
    double var = 0.0;
    for (double d : diff) var += (d - mean) * (d - mean);
    var /= n - 1.0;
    if (var == 0.0) throw std::runtime_error("paired t undefined for identical samples");
    return mean / std::sqrt(var / n);
}

double chi_squared_stat_uniform(const std::vector<std::size_t>& counts) {
    if (counts.size() < 2) throw std::runtime_error("need at least two cells");
    std::size_t total = 0;
    for (std::size_t c : counts) total += c;
    if (total == 0) throw std::runtime_error("empty sample");
    const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
    double stat = 0.0;
    for (std::size_t c : counts) {
        const double diff = static_cast<double>(c) - expected;
        stat += diff * diff / expected;
    }
    return stat;
}

double chi_squared_pvalue(double stat, double dof) {
    // Wilson-Hilferty cube-root normal approximation of the chi-squared tail.
    if (dof <= 0.0) throw std::runtime_error("dof must be positive");
    const double z = (std::cbrt(stat / dof) - (1.0 - 2.0 / (9.0 * dof))) /
                     std::sqrt(2.0 / (9.0 * dof));
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

MetricsReport MetricsReport::compute(const PreferenceModel& model, const RatingDataset& factual,
                                     const RatingDataset& counterfactual) {
    MetricsReport report;
    std::tie(report.factual_mse, report.factual_mae) = mse_mae(model, factual);
    std::tie(report.counterfactual_mse, report.counterfactual_mae) =
        mse_mae(model, counterfactual);
    report.harmonic_mean_mse = harmonic_mean(report.factual_mse, report.counterfactual_mse);
    report.harmonic_mean_mae = harmonic_mean(report.factual_mae, report.counterfactual_mae);
    return report;
}

namespace {

double round6(double v) { return std::round(v * 1e6) / 1e6; }

}  // namespace

std::string MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["factual_mse"] = round6(factual_mse);
    j["factual_mae"] = round6(factual_mae);
    j["counterfactual_mse"] = round6(counterfactual_mse);
    j["counterfactual_mae"] = round6(counterfactual_mae);
    j["harmonic_mean_mse"] = round6(harmonic_mean_mse);
    j["harmonic_mean_mae"] = round6(harmonic_mean_mae);
    if (!bucket_errors.empty()) {
        nlohmann::ordered_json buckets = nlohmann::ordered_json::array();
        for (double e : bucket_errors) buckets.push_back(round6(e));
        j["bucket_errors"] = buckets;
    }
    if (!metadata.empty()) {
        nlohmann::ordered_json meta;
        for (const auto& [k, v] : metadata) meta[k] = v;
        j["metadata"] = meta;
    }
    return j.dump(2) + "\n";
}

void MetricsReport::write_json(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write metrics: " + path.string());
    out << to_json();
}

}  // namespace bpl
