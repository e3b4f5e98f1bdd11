#pragma once

// MGN3 checkpoint layout (all integers little-endian):
//
//   "MGN3"                         4 bytes
//   version                        u32 (currently 1)
//   num_grids                      u32
//   input_channels                 u32
//   feature_channels               u32
//   data_channels                  u32
//   num_classes                    u32
//   flags                          u32 (bit 0 use_avg_pool, bit 1 share_smoothers)
//   seed                           u64
//   n_iters                        u32, then n_iters x u32 smoothing_iters
//   n_spatial                      u32 (0 or 3), then n_spatial x u32 input_spatial
//   tensors in MgNetParams::tensors() order, each as
//     rank u32, rank x u32 extents, prod(extents) x f32

#include <filesystem>
#include <iosfwd>

#include "mgnet/model.hpp"

namespace mgnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& os, const MgNetParams& params);
MgNetParams read_checkpoint(std::istream& is, const std::string& source = "checkpoint");

void save_checkpoint(const MgNetParams& params, const std::filesystem::path& path);
/// Throws FormatError on bad magic/version, truncation, or tensors that do
/// not match the embedded configuration.
MgNetParams load_checkpoint(const std::filesystem::path& path);

}  // namespace mgnet
