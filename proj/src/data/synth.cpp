#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mgnet/dataset.hpp"
#include "mgnet/errors.hpp"
#include "mgnet/ops.hpp"
#include "mgnet/parallel.hpp"
#include "mgnet/random.hpp"
#include "mgnet/volume_io.hpp"

namespace mgnet {
namespace {

constexpr double kBaseline = 1.0;
constexpr double kFieldStd = 0.25;
constexpr int kBlurPasses = 2;
constexpr std::uint64_t kScanStream = 1ULL << 32;

// Smooth random field with the given spread around kBaseline.
std::vector<float> smooth_field(const Shape& geometry, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(shape_numel(geometry));
  for (float& x : v) x = static_cast<float>(rng.normal());
  std::vector<float> tmp(v.size());
  for (int pass = 0; pass < kBlurPasses; ++pass) {
    ops::avg_pool3d_forward(geometry, v, tmp);
    v.swap(tmp);
  }
  double mean = 0.0;
  for (float x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (float x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(v.size()));
  const double gain = sd > 0.0 ? kFieldStd / sd : 0.0;
  for (float& x : v) x = static_cast<float>(kBaseline + gain * (x - mean));
  return v;
}

}  // namespace

bool SynthRegion::contains(std::size_t z, std::size_t y, std::size_t x) const {
  const double dz = static_cast<double>(z) - cz, dy = static_cast<double>(y) - cy,
               dx = static_cast<double>(x) - cx;
  return dz * dz + dy * dy + dx * dx <= radius * radius;
}

SynthRegion synth_region(const Shape& geometry) {
  const double d = static_cast<double>(geometry.at(1)), h = static_cast<double>(geometry.at(2)),
               w = static_cast<double>(geometry.at(3));
  return SynthRegion{(d - 1) / 2, (h - 1) / 2, (w - 1) / 2, 0.25 * std::min({d, h, w})};
}

Manifest synth_generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  if (spec.subjects_per_class < 1 || spec.scans_per_subject < 1) {
    throw ArgumentError("subjects_per_class and scans_per_subject must be positive");
  }
  if (spec.geometry.size() != 4) throw ArgumentError("geometry must be [channels,D,H,W]");
  for (std::size_t e : spec.geometry) {
    if (e < 1) throw ArgumentError("geometry extents must be positive");
  }
  if (!(spec.effect_size >= 0.0) || !(spec.noise_std >= 0.0) || !std::isfinite(spec.effect_size) ||
      !std::isfinite(spec.noise_std)) {
    throw ArgumentError("effect_size and noise_std must be finite and non-negative");
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "volumes", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "volumes").string() + ": " + ec.message());

  const SynthRegion region = synth_region(spec.geometry);
  const std::size_t n_subjects = 2 * spec.subjects_per_class;
  Manifest m;
  m.geometry = spec.geometry;
  for (std::size_t s = 0; s < n_subjects; ++s) {
    char subject[32];
    std::snprintf(subject, sizeof subject, "sub-%04zu", s);
    for (std::size_t scan = 0; scan < spec.scans_per_subject; ++scan) {
      VolumeRecord r;
      r.subject_id = subject;
      r.scan_id = "scan-" + std::to_string(scan);
      r.label = static_cast<int>(s % 2);
      r.volume_path = out_dir / "volumes" / (r.subject_id + "_" + r.scan_id + ".vol");
      m.records.push_back(std::move(r));
    }
  }

  // Each scan is produced from its own seed stream, so generation order
  // does not affect file contents.
  parallel_for(m.records.size(), [&](std::size_t i) {
    const VolumeRecord& r = m.records[i];
    const std::size_t s = i / spec.scans_per_subject;
    std::vector<float> values = smooth_field(spec.geometry, derive_seed(spec.seed, s));
    if (r.label == 1) {
      const std::size_t d = spec.geometry[1], h = spec.geometry[2], w = spec.geometry[3];
      for (std::size_t c = 0; c < spec.geometry[0]; ++c) {
        for (std::size_t z = 0; z < d; ++z) {
          for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
              if (region.contains(z, y, x)) {
                values[((c * d + z) * h + y) * w + x] -= static_cast<float>(spec.effect_size);
              }
            }
          }
        }
      }
    }
    Rng noise(derive_seed(spec.seed, kScanStream + i));
    for (float& v : values) v += static_cast<float>(spec.noise_std * noise.normal());
    save_volume(Tensor(spec.geometry, std::move(values)), r.volume_path);
  });

  write_manifest(m, out_dir / "manifest.csv");
  return m;
}

}  // namespace mgnet
