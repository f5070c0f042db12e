// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "tubesal/optim.hpp"

namespace tubesal::ckpt {

// Little-endian binary layout:
//   "TSAL" | u32 version | u32 param_count
//   per parameter: u32 name_len | name | u32 rank | u64 extents[rank] | f32 data[numel]
//   u64 adam_step
//   per parameter: f32 m[numel] | f32 v[numel]
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<NamedParam<float>>& params,
                     const AdamState<float>& state);

/// Loads parameter values and optimizer state in place. The checkpoint must
/// carry exactly the given parameters (same order, names and shapes).
void load_checkpoint(const std::filesystem::path& path, std::vector<NamedParam<float>>& params,
                     AdamState<float>* state);

}  // namespace tubesal::ckpt
