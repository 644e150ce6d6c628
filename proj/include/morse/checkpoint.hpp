#pragma once

#include "morse/model.hpp"

#include <filesystem>

namespace morse {

// Binary checkpoint, little-endian, documented in the README:
//   magic "MORSECK1", u32 json length, config JSON (model config + relation
//   labels), u32 entry count, then per entry: u32 name length, name bytes,
//   u32 rank, u64 dims[rank], f64 values (row-major; layer bases are stored
//   stacked as rank-3 [num_bases, d, d]).
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);

ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace morse
