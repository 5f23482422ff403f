#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bpl/types.hpp"

namespace bpl {

// Result of ingesting a TSV file: the validated dataset plus the raw→dense
// id maps. user_ids[k] / item_ids[k] give the raw id behind dense index k;
// they are identity maps when the file carried a dimension header.
struct LoadedDataset {
    RatingDataset data;
    std::vector<std::int64_t> user_ids;
    std::vector<std::int64_t> item_ids;
    bool reindexed = false;
};

// Reads "user<TAB>item<TAB>rating" triples, one per line, UTF-8.
// An optional first line "#users=<n> items=<m> levels=<k>" fixes the
// dimensions; ids must then already be dense 0-based. Without the header,
// raw ids are reindexed densely in first-appearance order. Malformed lines,
// out-of-range ratings and duplicate pairs fail naming the offending line.
LoadedDataset load_tsv(const std::filesystem::path& path, int num_levels);

// Writes the dataset back in the same TSV format, header line included.
void save_tsv(const RatingDataset& data, const std::filesystem::path& path);

// Persists the raw→dense maps as "<stem>.users.tsv" / "<stem>.items.tsv"
// under dir, each line "dense<TAB>raw".
void write_id_maps(const LoadedDataset& loaded, const std::filesystem::path& dir,
                   const std::string& stem);

}  // namespace bpl
