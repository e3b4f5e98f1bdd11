#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mgnet/tensor.hpp"

namespace mgnet {

/// One scan. label 0 = NC (negative), 1 = AD (positive).
struct VolumeRecord {
  std::string subject_id;
  std::string scan_id;
  int label = 0;
  std::filesystem::path volume_path;
};

struct Manifest {
  std::vector<VolumeRecord> records;
  /// [channels, D, H, W] shared by every referenced volume; empty if unknown.
  Shape geometry;

  /// Throws ArgumentError on an empty subject id, a label outside {0,1}, or
  /// a repeated (subject_id, scan_id) pair, or a subject with two labels.
  void validate() const;
  /// Subject id -> label; ArgumentError when a subject carries two labels.
  std::map<std::string, int> subject_labels() const;
};

/// CSV with header `subject_id,scan_id,label,path`. Relative paths are
/// resolved against the manifest's directory. When probe_geometry is set
/// every volume header is read and must agree.
Manifest read_manifest(const std::filesystem::path& path, bool probe_geometry = true);
/// Paths under the manifest's directory are written relative to it.
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

struct FoldAssignment {
  std::size_t k = 0;
  std::map<std::string, std::size_t> fold_of;  // subject id -> fold in [0, k)

  std::size_t fold(const std::string& subject_id) const;
  /// Indices of manifest records whose subject sits in (or outside) `fold`.
  std::vector<std::size_t> test_indices(const Manifest& m, std::size_t fold) const;
  std::vector<std::size_t> train_indices(const Manifest& m, std::size_t fold) const;
};

/// Assigns whole subjects to folds, balancing each class's subject count
/// across folds to within one. Seeded and independent of record order.
FoldAssignment stratified_group_kfold(const Manifest& manifest, std::size_t k, std::uint64_t seed);

/// CSV with header `subject_id,fold`, one row per subject in id order.
void write_folds(const FoldAssignment& folds, const std::filesystem::path& path);
FoldAssignment read_folds(const std::filesystem::path& path);

struct SynthSpec {
  std::size_t subjects_per_class = 20;
  std::size_t scans_per_subject = 2;
  Shape geometry{1, 16, 16, 16};  // [channels, D, H, W]
  double effect_size = 1.0;
  double noise_std = 0.1;
  std::uint64_t seed = 0;
};

/// Centre and radius (voxels) of the region whose intensity is lowered in
/// class-1 subjects.
struct SynthRegion {
  double cz, cy, cx, radius;
  bool contains(std::size_t z, std::size_t y, std::size_t x) const;
};
SynthRegion synth_region(const Shape& geometry);

/// Writes `out_dir/manifest.csv` and `out_dir/volumes/*.vol`.
Manifest synth_generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace mgnet
