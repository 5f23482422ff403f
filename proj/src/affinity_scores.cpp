#include "bpl/affinity_scores.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace bpl {

void AffinityScores::set(Pair pair, double score) {
    if (!std::isfinite(score)) {
        throw std::runtime_error("non-finite affinity score for pair (" +
                                 std::to_string(pair.user) + "," + std::to_string(pair.item) +
                                 ")");
    }
    scores_[pack(pair)] = score;
}

double AffinityScores::at(Pair pair) const {
    auto it = scores_.find(pack(pair));
    if (it == scores_.end()) {
        throw std::runtime_error("missing affinity score for pair (" +
                                 std::to_string(pair.user) + "," + std::to_string(pair.item) +
                                 ")");
    }
    return it->second;
}

void AffinityScores::save_tsv(const std::filesystem::path& path) const {
    std::vector<std::uint64_t> keys;
    keys.reserve(scores_.size());
    for (const auto& [k, v] : scores_) keys.push_back(k);
    std::sort(keys.begin(), keys.end());

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write affinity scores: " + path.string());
    out << "#provenance=" << provenance_ << "\n";
    char buf[32];
    for (std::uint64_t k : keys) {
        Pair p = unpack(k);
        std::snprintf(buf, sizeof(buf), "%.6f", scores_.at(k));
        out << p.user << '\t' << p.item << '\t' << buf << '\n';
    }
}

AffinityScores AffinityScores::load_tsv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open affinity scores: " + path.string());
    AffinityScores scores;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("#provenance=", 0) == 0) scores.provenance_ = line.substr(12);
            continue;
        }
        unsigned long user, item;
        double score;
        if (std::sscanf(line.c_str(), "%lu\t%lu\t%lf", &user, &item, &score) != 3) {
            throw std::runtime_error("malformed affinity line at line " + std::to_string(lineno));
        }
        scores.set(Pair{static_cast<std::uint32_t>(user), static_cast<std::uint32_t>(item)},
                   score);
    }
    return scores;
}

}  // namespace bpl
