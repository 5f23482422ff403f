#include "bpl/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace bpl {

FactualSplit split_factual(const RatingDataset& dataset, double test_fraction,
                           double val_fraction, std::uint64_t seed) {
    if (test_fraction <= 0.0 || test_fraction >= 1.0 || val_fraction <= 0.0 ||
        val_fraction >= 1.0 || test_fraction + val_fraction >= 1.0) {
        throw std::runtime_error("split fractions must lie in (0,1) and sum below 1");
    }
    const std::size_t n = dataset.size();
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * n));
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * n));
    if (n_test == 0 || n_val == 0 || n_test + n_val >= n) {
        throw std::runtime_error("dataset too small for nonempty splits");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(seed, stream::shuffle));
    std::shuffle(order.begin(), order.end(), rng);

    const auto& records = dataset.records();
    std::vector<RatingRecord> test_recs, val_recs, train_recs;
    test_recs.reserve(n_test);
    val_recs.reserve(n_val);
    train_recs.reserve(n - n_test - n_val);
    for (std::size_t pos = 0; pos < n; ++pos) {
        const RatingRecord& r = records[order[pos]];
        if (pos < n_test) {
            test_recs.push_back(r);
        } else if (pos < n_test + n_val) {
            val_recs.push_back(r);
        } else {
            train_recs.push_back(r);
        }
    }

    FactualSplit out;
    out.train = RatingDataset(dataset.num_users(), dataset.num_items(), dataset.num_levels(),
                              std::move(train_recs));
    out.validation = RatingDataset(dataset.num_users(), dataset.num_items(),
                                   dataset.num_levels(), std::move(val_recs));
    out.factual_test = RatingDataset(dataset.num_users(), dataset.num_items(),
                                     dataset.num_levels(), std::move(test_recs));
    return out;
}

SpaceSplit SpaceSplit::build(const RatingDataset& dataset, std::uint64_t enumeration_cap,
                             double s0_multiple, std::uint64_t seed) {
    if (s0_multiple <= 0.0) throw std::runtime_error("s0_multiple must be positive");

    SpaceSplit split;
    split.num_users_ = dataset.num_users();
    split.num_items_ = dataset.num_items();
    split.s1_.reserve(dataset.size());
    for (const RatingRecord& r : dataset.records()) {
        split.s1_.push_back(Pair{r.user, r.item});
        split.rated_.insert(pack(Pair{r.user, r.item}));
    }
    std::sort(split.s1_.begin(), split.s1_.end());

    const std::uint64_t total = dataset.total_pairs();
    const std::uint64_t unrated = total - split.s1_.size();
    split.lambda0_ = 1.0 - static_cast<double>(split.s1_.size()) / static_cast<double>(total);

    if (total <= enumeration_cap) {
        split.exhaustive_ = true;
        split.s0_pool_.reserve(unrated);
        for (std::uint32_t u = 0; u < split.num_users_; ++u) {
            for (std::uint32_t i = 0; i < split.num_items_; ++i) {
                Pair p{u, i};
                if (!split.rated_.count(pack(p))) split.s0_pool_.push_back(p);
            }
        }
    } else {
        split.exhaustive_ = false;
        auto target = static_cast<std::uint64_t>(
            std::llround(s0_multiple * static_cast<double>(split.s1_.size())));
        target = std::max<std::uint64_t>(target, 1);
        if (target > unrated) {
            throw std::runtime_error("requested S0 pool exceeds the number of unrated pairs");
        }
        std::mt19937_64 rng(mix_seed(seed, stream::s0_pool));
        std::uniform_int_distribution<std::uint32_t> pick_user(0, split.num_users_ - 1);
        std::uniform_int_distribution<std::uint32_t> pick_item(0, split.num_items_ - 1);
        std::unordered_set<std::uint64_t> chosen;
        chosen.reserve(target);
        while (chosen.size() < target) {
            Pair p{pick_user(rng), pick_item(rng)};
            std::uint64_t key = pack(p);
            if (split.rated_.count(key)) continue;
            chosen.insert(key);
        }
        split.s0_pool_.reserve(target);
        for (std::uint64_t key : chosen) split.s0_pool_.push_back(unpack(key));
        std::sort(split.s0_pool_.begin(), split.s0_pool_.end());
    }
    return split;
}

std::vector<Pair> SpaceSplit::sample_s0(std::size_t count, std::uint64_t seed) const {
    if (count >= s0_pool_.size()) return s0_pool_;
    std::vector<std::size_t> index(s0_pool_.size());
    std::iota(index.begin(), index.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: only the first `count` positions are finalized.
    for (std::size_t k = 0; k < count; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, index.size() - 1);
        std::swap(index[k], index[pick(rng)]);
    }
    std::vector<Pair> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) out.push_back(s0_pool_[index[k]]);
    return out;
}

std::vector<Pair> SpaceSplit::s0_rest() const {
    std::vector<Pair> rest;
    rest.reserve(s0_pool_.size() - s01_.size());
    for (const Pair& p : s0_pool_) {
        if (!in_s01(p)) rest.push_back(p);
    }
    return rest;
}

SpaceSplit mark_s01(const SpaceSplit& split, const AffinityScores& affinity, double x_percent) {
    if (x_percent <= 0.0 || x_percent >= 100.0) {
        throw std::runtime_error("x_percent must lie in (0,100)");
    }
    const std::vector<Pair>& pool = split.s0_pool();
    const auto take = static_cast<std::size_t>(
        std::ceil(x_percent / 100.0 * static_cast<double>(pool.size())));

    // Sort by score descending, then (user, item) ascending for determinism.
    std::vector<std::pair<double, Pair>> ranked;
    ranked.reserve(pool.size());
    for (const Pair& p : pool) ranked.emplace_back(affinity.at(p), p);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    SpaceSplit marked = split;
    marked.s01_.clear();
    marked.s01_set_.clear();
    for (std::size_t k = 0; k < take && k < ranked.size(); ++k) {
        marked.s01_.push_back(ranked[k].second);
        marked.s01_set_.insert(pack(ranked[k].second));
    }
    std::sort(marked.s01_.begin(), marked.s01_.end());
    return marked;
}

}  // namespace bpl
