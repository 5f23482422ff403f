#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>

#include "bpl/types.hpp"

namespace bpl {

// Frozen per-pair probabilities that an unrated pair would eventually be
// rated. Produced once by the affinity estimator (or imported from TSV) and
// treated as constants everywhere downstream.
class AffinityScores {
public:
    AffinityScores() = default;
    explicit AffinityScores(std::string provenance) : provenance_(std::move(provenance)) {}

    void set(Pair pair, double score);
    bool contains(Pair pair) const { return scores_.count(pack(pair)) != 0; }

    // Throws if the pair was never scored.
    double at(Pair pair) const;

    std::size_t size() const { return scores_.size(); }
    const std::string& provenance() const { return provenance_; }
    void set_provenance(std::string p) { provenance_ = std::move(p); }
    const std::unordered_map<std::uint64_t, double>& raw() const { return scores_; }

    // TSV round-trip: "#provenance=<text>" header, then "user<TAB>item<TAB>score"
    // with 6 decimal places, rows sorted by (user, item).
    void save_tsv(const std::filesystem::path& path) const;
    static AffinityScores load_tsv(const std::filesystem::path& path);

private:
    std::unordered_map<std::uint64_t, double> scores_;
    std::string provenance_;
};

}  // namespace bpl
