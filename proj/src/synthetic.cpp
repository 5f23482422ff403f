#include "bpl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace bpl {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string fmt(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

}  // namespace

GeneratorConfig GeneratorConfig::from_config(const KeyValueConfig& cfg) {
    GeneratorConfig c;
    c.num_users = static_cast<std::uint32_t>(cfg.get_uint("users", c.num_users));
    c.num_items = static_cast<std::uint32_t>(cfg.get_uint("items", c.num_items));
    c.num_levels = static_cast<int>(cfg.get_int("levels", c.num_levels));
    c.latent_dim = static_cast<int>(cfg.get_int("latent_dim", c.latent_dim));
    c.density = cfg.get_double("density", c.density);
    c.popularity_weight = cfg.get_double("popularity_weight", c.popularity_weight);
    c.rating_weight = cfg.get_double("rating_weight", c.rating_weight);
    c.conformity = cfg.get_double("conformity", c.conformity);
    c.popularity_spread = cfg.get_double("popularity_spread", c.popularity_spread);
    c.factual_test_size =
        static_cast<std::size_t>(cfg.get_uint("factual_test_size", c.factual_test_size));
    c.counterfactual_test_size = static_cast<std::size_t>(
        cfg.get_uint("counterfactual_test_size", c.counterfactual_test_size));
    c.seed = cfg.get_uint("seed", c.seed);
    c.validate();
    return c;
}

KeyValueConfig GeneratorConfig::to_config() const {
    KeyValueConfig cfg;
    cfg.set("users", std::to_string(num_users));
    cfg.set("items", std::to_string(num_items));
    cfg.set("levels", std::to_string(num_levels));
    cfg.set("latent_dim", std::to_string(latent_dim));
    cfg.set("density", fmt(density));
    cfg.set("popularity_weight", fmt(popularity_weight));
    cfg.set("rating_weight", fmt(rating_weight));
    cfg.set("conformity", fmt(conformity));
    cfg.set("popularity_spread", fmt(popularity_spread));
    cfg.set("factual_test_size", std::to_string(factual_test_size));
    cfg.set("counterfactual_test_size", std::to_string(counterfactual_test_size));
    cfg.set("seed", std::to_string(seed));
    return cfg;
}

void GeneratorConfig::validate() const {
    if (num_users == 0 || num_items == 0) throw std::runtime_error("grid must be nonempty");
    if (num_levels < 2) throw std::runtime_error("levels must be at least 2");
    if (latent_dim < 1) throw std::runtime_error("latent_dim must be positive");
    if (density <= 0.0 || density > 0.5) throw std::runtime_error("density must lie in (0,0.5]");
    if (conformity < 0.0 || conformity >= 1.0) {
        throw std::runtime_error("conformity must lie in [0,1)");
    }
    if (popularity_spread < 0.0) throw std::runtime_error("popularity_spread must be >= 0");
    if (factual_test_size == 0 || counterfactual_test_size == 0) {
        throw std::runtime_error("test sizes must be positive");
    }
    const auto total = static_cast<std::uint64_t>(num_users) * num_items;
    if (total > 20'000'000ULL) {
        throw std::runtime_error("grid too large for the synthetic generator");
    }
    if (density * static_cast<double>(total) < 1.0) {
        throw std::runtime_error("density infeasible for grid size");
    }
}

SyntheticWorld::SyntheticWorld(GeneratorConfig config, std::vector<int> true_ratings,
                               std::vector<double> exposure,
                               std::vector<double> item_popularity)
    : config_(config),
      true_ratings_(std::move(true_ratings)),
      exposure_(std::move(exposure)),
      item_popularity_(std::move(item_popularity)) {
    const auto total = static_cast<std::size_t>(config_.num_users) * config_.num_items;
    if (true_ratings_.size() != total || exposure_.size() != total ||
        item_popularity_.size() != config_.num_items) {
        throw std::runtime_error("world table sizes disagree with the configured grid");
    }
}

SyntheticData generate_synthetic(const GeneratorConfig& config) {
    config.validate();
    const std::uint32_t U = config.num_users;
    const std::uint32_t I = config.num_items;
    const int K = config.num_levels;
    const int L = config.latent_dim;
    const auto total = static_cast<std::size_t>(U) * I;

    // Latent preference scores.
    std::mt19937_64 rng_factors(mix_seed(config.seed, stream::factors));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> user_factors(static_cast<std::size_t>(U) * L);
    std::vector<double> item_factors(static_cast<std::size_t>(I) * L);
    for (double& v : user_factors) v = gauss(rng_factors);
    for (double& v : item_factors) v = gauss(rng_factors);

    std::vector<double> score(total);
    const double scale = 1.0 / std::sqrt(static_cast<double>(L));
    for (std::uint32_t u = 0; u < U; ++u) {
        for (std::uint32_t i = 0; i < I; ++i) {
            double dot = 0.0;
            for (int l = 0; l < L; ++l) {
                dot += user_factors[static_cast<std::size_t>(u) * L + l] *
                       item_factors[static_cast<std::size_t>(i) * L + l];
            }
            score[static_cast<std::size_t>(u) * I + i] = dot * scale;
        }
    }

    // Quantile-bin scores into 1..K so true rating levels have equal mass.
    std::vector<double> sorted = score;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> thresholds(K - 1);
    for (int k = 1; k < K; ++k) {
        thresholds[k - 1] = sorted[total * static_cast<std::size_t>(k) / K];
    }
    std::vector<int> true_ratings(total);
    for (std::size_t idx = 0; idx < total; ++idx) {
        auto it = std::upper_bound(thresholds.begin(), thresholds.end(), score[idx]);
        true_ratings[idx] = 1 + static_cast<int>(it - thresholds.begin());
    }

    // Item popularity weights and their standardized logs.
    std::mt19937_64 rng_pop(mix_seed(config.seed, stream::popularity));
    std::vector<double> popularity(I);
    for (double& v : popularity) v = std::exp(config.popularity_spread * gauss(rng_pop));
    std::vector<double> log_pop(I);
    for (std::uint32_t i = 0; i < I; ++i) log_pop[i] = std::log(popularity[i]);
    const double lp_mean = std::accumulate(log_pop.begin(), log_pop.end(), 0.0) / I;
    double lp_var = 0.0;
    for (double v : log_pop) lp_var += (v - lp_mean) * (v - lp_mean);
    const double lp_std = std::sqrt(lp_var / I);
    for (double& v : log_pop) v = lp_std > 0.0 ? (v - lp_mean) / lp_std : 0.0;

    // Exposure logits without intercept; the intercept is then calibrated by
    // bisection so the mean exposure equals the requested density.
    const double mid = (K + 1) / 2.0;
    std::vector<double> logit(total);
    for (std::uint32_t u = 0; u < U; ++u) {
        for (std::uint32_t i = 0; i < I; ++i) {
            std::size_t idx = static_cast<std::size_t>(u) * I + i;
            logit[idx] = config.popularity_weight * log_pop[i] +
                         config.rating_weight * (true_ratings[idx] - mid);
        }
    }
    double lo = -60.0, hi = 60.0;
    for (int iter = 0; iter < 100; ++iter) {
        double c = 0.5 * (lo + hi);
        double mean = 0.0;
        for (double v : logit) mean += sigmoid(v + c);
        mean /= static_cast<double>(total);
        if (mean < config.density) {
            lo = c;
        } else {
            hi = c;
        }
    }
    const double intercept = 0.5 * (lo + hi);
    std::vector<double> exposure(total);
    for (std::size_t idx = 0; idx < total; ++idx) exposure[idx] = sigmoid(logit[idx] + intercept);

    // Observation draws.
    std::mt19937_64 rng_draw(mix_seed(config.seed, stream::exposure_draw));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::uint8_t> observed(total, 0);
    std::size_t observed_count = 0;
    for (std::size_t idx = 0; idx < total; ++idx) {
        if (unif(rng_draw) < exposure[idx]) {
            observed[idx] = 1;
            ++observed_count;
        }
    }
    if (observed_count == 0) throw std::runtime_error("density infeasible for grid size");
    const std::size_t held_out = total - observed_count;
    if (held_out < config.factual_test_size + config.counterfactual_test_size) {
        throw std::runtime_error(
            "density infeasible for grid size: held-out space smaller than the test sets");
    }

    // Observed ratings, optionally pulled toward the item's mean observed rating.
    std::vector<double> item_sum(I, 0.0);
    std::vector<std::size_t> item_cnt(I, 0);
    for (std::uint32_t u = 0; u < U; ++u) {
        for (std::uint32_t i = 0; i < I; ++i) {
            std::size_t idx = static_cast<std::size_t>(u) * I + i;
            if (observed[idx]) {
                item_sum[i] += true_ratings[idx];
                ++item_cnt[i];
            }
        }
    }
    std::vector<RatingRecord> train_records;
    train_records.reserve(observed_count);
    for (std::uint32_t u = 0; u < U; ++u) {
        for (std::uint32_t i = 0; i < I; ++i) {
            std::size_t idx = static_cast<std::size_t>(u) * I + i;
            if (!observed[idx]) continue;
            int r = true_ratings[idx];
            if (config.conformity > 0.0) {
                double mean_i = item_sum[i] / static_cast<double>(item_cnt[i]);
                double blended = (1.0 - config.conformity) * r + config.conformity * mean_i;
                r = std::clamp(static_cast<int>(std::llround(blended)), 1, K);
            }
            train_records.push_back(RatingRecord{u, i, r});
        }
    }

    // Held-out pairs in lexicographic order.
    std::vector<std::size_t> held;
    held.reserve(held_out);
    for (std::size_t idx = 0; idx < total; ++idx) {
        if (!observed[idx]) held.push_back(idx);
    }

    auto to_record = [&](std::size_t idx) {
        return RatingRecord{static_cast<std::uint32_t>(idx / I),
                            static_cast<std::uint32_t>(idx % I), true_ratings[idx]};
    };

    // Counterfactual test: uniform without replacement over held-out pairs.
    std::mt19937_64 rng_cf(mix_seed(config.seed, stream::counterfactual_draw));
    const std::size_t n_cf = config.counterfactual_test_size;
    for (std::size_t k = 0; k < n_cf; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, held.size() - 1);
        std::swap(held[k], held[pick(rng_cf)]);
    }
    std::vector<RatingRecord> cf_records;
    cf_records.reserve(n_cf);
    for (std::size_t k = 0; k < n_cf; ++k) cf_records.push_back(to_record(held[k]));

    // Factual test: exposure-weighted draw without replacement from the rest,
    // via the usual exponential-key trick (larger key = earlier pick).
    std::mt19937_64 rng_fd(mix_seed(config.seed, stream::factual_draw));
    std::vector<std::pair<double, std::size_t>> keyed;
    keyed.reserve(held.size() - n_cf);
    for (std::size_t k = n_cf; k < held.size(); ++k) {
        double u = unif(rng_fd);
        while (u <= 0.0) u = unif(rng_fd);
        keyed.emplace_back(std::log(u) / exposure[held[k]], held[k]);
    }
    const std::size_t n_f = config.factual_test_size;
    std::nth_element(keyed.begin(), keyed.begin() + (n_f - 1), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<RatingRecord> f_records;
    f_records.reserve(n_f);
    for (std::size_t k = 0; k < n_f; ++k) f_records.push_back(to_record(keyed[k].second));

    SyntheticData out;
    out.world = SyntheticWorld(config, std::move(true_ratings), std::move(exposure),
                               std::move(popularity));
    out.train = RatingDataset(U, I, K, std::move(train_records));
    out.counterfactual_test = RatingDataset(U, I, K, std::move(cf_records));
    out.factual_test = RatingDataset(U, I, K, std::move(f_records));
    return out;
}

void SyntheticWorld::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    const std::uint32_t U = config_.num_users;
    const std::uint32_t I = config_.num_items;

    {
        std::ofstream out(dir / "true_ratings.tsv", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write true-rating table");
        out << "#users=" << U << " items=" << I << " levels=" << config_.num_levels << "\n";
        for (std::uint32_t u = 0; u < U; ++u) {
            for (std::uint32_t i = 0; i < I; ++i) {
                out << true_ratings_[static_cast<std::size_t>(u) * I + i]
                    << (i + 1 == I ? '\n' : '\t');
            }
        }
    }
    {
        std::ofstream out(dir / "exposure.tsv", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write exposure table");
        out << "#users=" << U << " items=" << I << "\n";
        char buf[32];
        for (std::uint32_t u = 0; u < U; ++u) {
            for (std::uint32_t i = 0; i < I; ++i) {
                std::snprintf(buf, sizeof(buf), "%.9f",
                              exposure_[static_cast<std::size_t>(u) * I + i]);
                out << buf << (i + 1 == I ? '\n' : '\t');
            }
        }
    }
    {
        std::ofstream out(dir / "popularity.tsv", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write popularity table");
        char buf[32];
        for (std::uint32_t i = 0; i < I; ++i) {
            std::snprintf(buf, sizeof(buf), "%.9f", item_popularity_[i]);
            out << i << '\t' << buf << '\n';
        }
    }
    config_.to_config().write(dir / "generator.cfg");
}

SyntheticWorld SyntheticWorld::load(const std::filesystem::path& dir) {
    GeneratorConfig config =
        GeneratorConfig::from_config(KeyValueConfig::from_file(dir / "generator.cfg"));
    const std::uint32_t U = config.num_users;
    const std::uint32_t I = config.num_items;
    const auto total = static_cast<std::size_t>(U) * I;

    auto read_matrix = [&](const std::filesystem::path& path, auto& table, auto parse) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open world table: " + path.string());
        std::string line;
        std::size_t idx = 0;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream row(line);
            std::string cell;
            while (std::getline(row, cell, '\t')) {
                if (idx >= total) throw std::runtime_error("world table too large: " + path.string());
                table[idx++] = parse(cell);
            }
        }
        if (idx != total) throw std::runtime_error("world table too small: " + path.string());
    };

    std::vector<int> ratings(total);
    read_matrix(dir / "true_ratings.tsv", ratings,
                [](const std::string& s) { return std::stoi(s); });
    std::vector<double> exposure(total);
    read_matrix(dir / "exposure.tsv", exposure,
                [](const std::string& s) { return std::stod(s); });

    std::vector<double> popularity(I);
    {
        std::ifstream in(dir / "popularity.tsv", std::ios::binary);
        if (!in) throw std::runtime_error("cannot open world table: popularity.tsv");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream row(line);
            std::uint32_t item;
            double value;
            row >> item >> value;
            if (!row || item >= I) throw std::runtime_error("malformed popularity table");
            popularity[item] = value;
        }
    }
    return SyntheticWorld(config, std::move(ratings), std::move(exposure), std::move(popularity));
}

}  // namespace bpl
