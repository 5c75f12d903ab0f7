#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tofu/dense_array.hpp"

namespace tofu {

// Binary tensor container: magic "TOFU", u32 format version, u64 entry count,
// then per entry a u32-length-prefixed UTF-8 name, u32 rank, u64 extents and
// little-endian f64 data. Optimizer state lives under "adam/" name prefixes.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const DenseArray*>>& entries);

std::map<std::string, DenseArray> load_checkpoint(const std::string& path);

}  // namespace tofu
