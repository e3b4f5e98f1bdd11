#include "mgnet/volume_io.hpp"

#include <cmath>
#include <fstream>

#include "mgnet/binary_io.hpp"
#include "mgnet/errors.hpp"

namespace mgnet {
namespace {

Shape read_header(io::Reader& r, const std::string& source) {
  r.expect_magic("VOL3");
  const std::uint32_t version = r.u32("version");
  if (version != kVolumeVersion) {
    throw FormatError(source + ": unsupported VOL3 version " + std::to_string(version));
  }
  Shape shape(4);
  const char* names[] = {"channels", "depth", "height", "width"};
  for (std::size_t i = 0; i < 4; ++i) {
    shape[i] = r.u32(names[i]);
    if (shape[i] == 0) throw FormatError(source + ": zero " + names[i]);
  }
  return shape;
}

}  // namespace

void write_volume(std::ostream& os, const Tensor& volume) {
  if (volume.rank() != 4) throw ShapeError("VOL3 stores [c,D,H,W] tensors, got " + shape_str(volume.shape()));
  io::write_magic(os, "VOL3");
  io::write_u32(os, kVolumeVersion);
  for (std::size_t e : volume.shape()) {
    if (e > UINT32_MAX) throw ShapeError("volume extent too large for VOL3");
    io::write_u32(os, static_cast<std::uint32_t>(e));
  }
  io::write_f32s(os, volume.data());
}

Tensor read_volume(std::istream& is, const std::string& source) {
  io::Reader r(is, source);
  Shape shape = read_header(r, source);
  Tensor t(shape);
  r.f32s(t.mutable_data(), "voxel payload");
  r.expect_end();
  for (float v : t.data()) {
    if (!std::isfinite(v)) throw DataError(source + ": non-finite voxel value");
  }
  return t;
}

void save_volume(const Tensor& volume, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_volume(os, volume);
  os.flush();
  if (!os) throw IoError("failed writing " + path.string());
}

Tensor load_volume(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_volume(is, path.string());
}

Shape read_volume_shape(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  io::Reader r(is, path.string());
  return read_header(r, path.string());
}

Tensor normalize(const Tensor& volume) {
  const auto v = volume.data();
  double mean = 0.0;
  for (float x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (float x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  if (!(var > 0.0)) throw DataError("cannot normalize a constant volume");
  const double inv_std = 1.0 / std::sqrt(var);
  Tensor out(volume.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < v.size(); ++i) o[i] = static_cast<float>((v[i] - mean) * inv_std);
  return out;
}

}  // namespace mgnet
