#pragma once

// VOL3 volume files: "VOL3", version u32 (= 1), channels u32, D u32, H u32,
// W u32, then channels*D*H*W little-endian f32 values in row-major order.

#include <filesystem>
#include <iosfwd>

#include "mgnet/tensor.hpp"

namespace mgnet {

inline constexpr std::uint32_t kVolumeVersion = 1;

void write_volume(std::ostream& os, const Tensor& volume);
Tensor read_volume(std::istream& is, const std::string& source = "volume");

void save_volume(const Tensor& volume, const std::filesystem::path& path);
/// FormatError on bad magic/version/truncation; DataError on non-finite values.
Tensor load_volume(const std::filesystem::path& path);
/// Reads only the header: [channels, D, H, W].
Shape read_volume_shape(const std::filesystem::path& path);

/// Whole-volume z-score. DataError when all voxels are equal.
Tensor normalize(const Tensor& volume);

}  // namespace mgnet
