#pragma once

#include <unordered_set>
#include <vector>

#include "bpl/affinity_scores.hpp"
#include "bpl/types.hpp"

namespace bpl {

struct FactualSplit {
    RatingDataset train;
    RatingDataset validation;
    RatingDataset factual_test;
};

// Random disjoint partition of the records into train / validation / test.
// Fractions apply to the full record count and are rounded to the nearest
// record; the split is a pure function of (dataset order, fractions, seed).
FactualSplit split_factual(const RatingDataset& dataset, double test_fraction,
                           double val_fraction, std::uint64_t seed);

// Partition of the full user-item index space into the rated set S1, a pool
// of unrated pairs standing in for S0, and (after mark_s01) the high-affinity
// subset S01. The pool is the complete unrated space when the grid fits under
// enumeration_cap, otherwise a fixed seeded sample of s0_multiple * |S1|
// distinct unrated pairs, so every downstream consumer sees one stable pool.
class SpaceSplit {
public:
    SpaceSplit() = default;

    static SpaceSplit build(const RatingDataset& dataset, std::uint64_t enumeration_cap,
                            double s0_multiple, std::uint64_t seed);

    std::uint32_t num_users() const { return num_users_; }
    std::uint32_t num_items() const { return num_items_; }

    const std::vector<Pair>& s1() const { return s1_; }
    const std::vector<Pair>& s0_pool() const { return s0_pool_; }
    const std::vector<Pair>& s01() const { return s01_; }

    bool is_rated(Pair pair) const { return rated_.count(pack(pair)) != 0; }
    bool in_s01(Pair pair) const { return s01_set_.count(pack(pair)) != 0; }
    bool exhaustive_s0() const { return exhaustive_; }

    // Fraction of the full space that is unrated.
    double lambda0() const { return lambda0_; }

    // Deterministic draw of `count` distinct pool pairs (the whole pool when
    // count >= pool size). Same seed, same sequence.
    std::vector<Pair> sample_s0(std::size_t count, std::uint64_t seed) const;

    // Pool pairs outside S01, in pool order.
    std::vector<Pair> s0_rest() const;

    friend SpaceSplit mark_s01(const SpaceSplit& split, const AffinityScores& affinity,
                               double x_percent);

private:
    std::uint32_t num_users_ = 0;
    std::uint32_t num_items_ = 0;
    std::vector<Pair> s1_;
    std::vector<Pair> s0_pool_;
    std::vector<Pair> s01_;
    std::unordered_set<std::uint64_t> rated_;
    std::unordered_set<std::uint64_t> s01_set_;
    double lambda0_ = 0.0;
    bool exhaustive_ = true;
};

// Flags the top-ceil(x% of the pool) pairs by affinity as S01; ties broken by
// (user, item) order. Requires a score for every pool pair.
SpaceSplit mark_s01(const SpaceSplit& split, const AffinityScores& affinity, double x_percent);

}  // namespace bpl
