#pragma once

#include "s2no/model/model.hpp"

namespace s2no::model {

/// Binary little-endian checkpoint: magic `S2NOCKPT`, version, config,
/// per-geometry normalisation statistics, then named tensor records (name,
/// dtype tag, rank, dims, raw f32 row-major). Round-trips bit for bit.
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace s2no::model
