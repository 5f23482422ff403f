#include "bpl/types.hpp"

#include <stdexcept>
#include <unordered_set>

namespace bpl {

RatingDataset::RatingDataset(std::uint32_t num_users, std::uint32_t num_items,
                             int num_levels, std::vector<RatingRecord> records)
    : num_users_(num_users),
      num_items_(num_items),
      num_levels_(num_levels),
      records_(std::move(records)) {
    validate();
}

void RatingDataset::validate() const {
    if (num_levels_ <= 0) {
        throw std::runtime_error("rating scale must have at least one level");
    }
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(records_.size());
    for (std::size_t n = 0; n < records_.size(); ++n) {
        const RatingRecord& r = records_[n];
        if (r.user >= num_users_) {
            throw std::runtime_error("user index out of range at record " +
                                     std::to_string(n));
        }
        if (r.item >= num_items_) {
            throw std::runtime_error("item index out of range at record " +
                                     std::to_string(n));
        }
        if (r.rating < 1 || r.rating > num_levels_) {
            throw std::runtime_error("rating out of range at record " +
                                     std::to_string(n));
        }
        if (!seen.insert(pack(Pair{r.user, r.item})).second) {
            throw std::runtime_error("duplicate pair at record " + std::to_string(n));
        }
    }
}

double RatingDataset::mean_rating() const {
    if (records_.empty()) return 0.0;
    double sum = 0.0;
    for (const RatingRecord& r : records_) sum += r.rating;
    return sum / static_cast<double>(records_.size());
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace bpl
