#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace bpl {

// A user-item pair on the dense 0-based index space.
struct Pair {
    std::uint32_t user = 0;
    std::uint32_t item = 0;

    friend bool operator==(const Pair&, const Pair&) = default;
    friend auto operator<=>(const Pair&, const Pair&) = default;
};

inline std::uint64_t pack(Pair p) {
    return (static_cast<std::uint64_t>(p.user) << 32) | p.item;
}

inline Pair unpack(std::uint64_t key) {
    return Pair{static_cast<std::uint32_t>(key >> 32),
                static_cast<std::uint32_t>(key & 0xffffffffULL)};
}

struct RatingRecord {
    std::uint32_t user = 0;
    std::uint32_t item = 0;
    int rating = 0;  // level in 1..K
};

// Explicit-feedback dataset over a dense user/item index space with a
// K-level rating scale. validate() enforces the structural invariants;
// every constructor path in this library goes through it.
class RatingDataset {
public:
    RatingDataset() = default;
    RatingDataset(std::uint32_t num_users, std::uint32_t num_items, int num_levels,
                  std::vector<RatingRecord> records);

    std::uint32_t num_users() const { return num_users_; }
    std::uint32_t num_items() const { return num_items_; }
    int num_levels() const { return num_levels_; }
    const std::vector<RatingRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    std::uint64_t total_pairs() const {
        return static_cast<std::uint64_t>(num_users_) * num_items_;
    }

    // Throws std::runtime_error on an index out of range, a rating level
    // outside 1..K, or a duplicate (user, item) pair.
    void validate() const;

    // Mean rating over records; 0 for an empty dataset.
    double mean_rating() const;

private:
    std::uint32_t num_users_ = 0;
    std::uint32_t num_items_ = 0;
    int num_levels_ = 0;
    std::vector<RatingRecord> records_;
};

// splitmix64 step; used to derive decorrelated substream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Named RNG substreams so independent concerns never share a sequence.
namespace stream {
inline constexpr std::uint64_t model_init = 0x01;
inline constexpr std::uint64_t shuffle = 0x02;
inline constexpr std::uint64_t aux_batches = 0x03;
inline constexpr std::uint64_t disc_init = 0x04;
inline constexpr std::uint64_t teacher = 0x05;
inline constexpr std::uint64_t affinity = 0x06;
inline constexpr std::uint64_t s0_pool = 0x07;
inline constexpr std::uint64_t oracle_probe = 0x08;
inline constexpr std::uint64_t factors = 0x10;
inline constexpr std::uint64_t popularity = 0x11;
inline constexpr std::uint64_t exposure_draw = 0x12;
inline constexpr std::uint64_t factual_draw = 0x13;
inline constexpr std::uint64_t counterfactual_draw = 0x14;
inline constexpr std::uint64_t probe_folds = 0x15;
}  // namespace stream

}  // namespace bpl
