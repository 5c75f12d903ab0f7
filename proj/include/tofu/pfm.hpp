#pragma once

#include <string>

#include "tofu/dense_array.hpp"

namespace tofu {

// 3-channel portable float map ("PF", little-endian, bottom row first).
// Arrays are [3,H,W]; values pass through float32 on disk.
void save_pfm(const std::string& path, const DenseArray& image);
DenseArray load_pfm(const std::string& path);

}  // namespace tofu
