#pragma once

#include <filesystem>
#include <vector>

#include "bpl/parameters.hpp"

namespace bpl {

// Self-describing binary container: magic, version byte, then per-block
// records of (name, shape, row-major doubles). Blocks round-trip exactly.
void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<const ParameterBlock*>& blocks);
std::vector<ParameterBlock> load_checkpoint(const std::filesystem::path& path);

// Human-readable mirror of a checkpoint for inspection: one commented header
// per block followed by its rows.
void export_checkpoint_tsv(const std::filesystem::path& path,
                           const std::vector<const ParameterBlock*>& blocks);

}  // namespace bpl
