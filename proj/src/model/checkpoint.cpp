#include "mgnet/checkpoint.hpp"

#include <cmath>
#include <fstream>

#include "mgnet/binary_io.hpp"
#include "mgnet/errors.hpp"

namespace mgnet {
namespace {

constexpr std::uint32_t kFlagAvgPool = 1u << 0;
constexpr std::uint32_t kFlagShareSmoothers = 1u << 1;
constexpr std::uint32_t kMaxRank = 8;

std::uint32_t narrow(std::size_t v) {
  if (v > UINT32_MAX) throw ArgumentError("value does not fit the checkpoint format");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void write_checkpoint(std::ostream& os, const MgNetParams& params) {
  const MgNetConfig& c = params.config;
  io::write_magic(os, "MGN3");
  io::write_u32(os, kCheckpointVersion);
  io::write_u32(os, narrow(c.num_grids));
  io::write_u32(os, narrow(c.input_channels));
  io::write_u32(os, narrow(c.feature_channels));
  io::write_u32(os, narrow(c.data_channels));
  io::write_u32(os, narrow(c.num_classes));
  io::write_u32(os, (c.use_avg_pool ? kFlagAvgPool : 0u) |
                        (c.share_smoothers ? kFlagShareSmoothers : 0u));
  io::write_u64(os, c.seed);
  io::write_u32(os, narrow(c.smoothing_iters.size()));
  for (std::size_t v : c.smoothing_iters) io::write_u32(os, narrow(v));
  io::write_u32(os, narrow(c.input_spatial.size()));
  for (std::size_t e : c.input_spatial) io::write_u32(os, narrow(e));
  for (const Tensor& t : params.tensors()) {
    io::write_u32(os, narrow(t.rank()));
    for (std::size_t e : t.shape()) io::write_u32(os, narrow(e));
    io::write_f32s(os, t.data());
  }
}

MgNetParams read_checkpoint(std::istream& is, const std::string& source) {
  io::Reader r(is, source);
  r.expect_magic("MGN3");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError(source + ": unsupported checkpoint version " + std::to_string(version));
  }
  MgNetConfig c;
  c.num_grids = r.u32("num_grids");
  c.input_channels = r.u32("input_channels");
  c.feature_channels = r.u32("feature_channels");
  c.data_channels = r.u32("data_channels");
  c.num_classes = r.u32("num_classes");
  const std::uint32_t flags = r.u32("flags");
  if (flags & ~(kFlagAvgPool | kFlagShareSmoothers)) {
    throw FormatError(source + ": unknown flag bits");
  }
  c.use_avg_pool = flags & kFlagAvgPool;
  c.share_smoothers = flags & kFlagShareSmoothers;
  c.seed = r.u64("seed");
  const std::uint32_t n_iters = r.u32("smoothing_iters count");
  if (n_iters > 4096) throw FormatError(source + ": implausible smoothing_iters count");
  c.smoothing_iters.clear();
  for (std::uint32_t i = 0; i < n_iters; ++i) c.smoothing_iters.push_back(r.u32("smoothing_iters"));
  const std::uint32_t n_spatial = r.u32("input_spatial rank");
  if (n_spatial != 0 && n_spatial != 3) throw FormatError(source + ": bad input_spatial rank");
  for (std::uint32_t i = 0; i < n_spatial; ++i) {
    c.input_spatial.push_back(r.u32("input_spatial extent"));
    if (c.input_spatial.back() == 0) throw FormatError(source + ": zero input_spatial extent");
  }

  std::vector<Shape> expected;
  try {
    expected = parameter_shapes(c);
  } catch (const ArgumentError& e) {
    throw FormatError(source + ": embedded configuration is invalid: " + e.what());
  }

  std::vector<Tensor> tensors;
  for (const Shape& want : expected) {
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank == 0 || rank > kMaxRank) throw FormatError(source + ": bad tensor rank");
    Shape shape(rank);
    for (auto& e : shape) e = r.u32("tensor extent");
    if (shape != want) {
      throw FormatError(source + ": tensor shape " + shape_str(shape) +
                        " does not match configuration (expected " + shape_str(want) + ")");
    }
    Tensor t(shape);
    r.f32s(t.mutable_data(), "tensor payload");
    for (float v : t.data()) {
      if (!std::isfinite(v)) throw FormatError(source + ": non-finite parameter value");
    }
    t.set_requires_grad(true);
    tensors.push_back(std::move(t));
  }
  r.expect_end();

  MgNetParams p;
  p.config = c;
  std::size_t next = 0;
  p.f_in = tensors[next++];
  for (std::size_t l = 0; l < c.num_grids; ++l) {
    LevelParams level;
    level.A = tensors[next++];
    const std::size_t b_count = c.share_smoothers ? 1 : c.iters(l);
    for (std::size_t i = 0; i < b_count; ++i) level.B.push_back(tensors[next++]);
    if (l + 1 < c.num_grids) {
      level.Pi = tensors[next++];
      level.R = tensors[next++];
    }
    p.levels.push_back(std::move(level));
  }
  p.head_weight = tensors[next++];
  p.head_bias = tensors[next++];
  return p;
}

void save_checkpoint(const MgNetParams& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(os, params);
  os.flush();
  if (!os) throw IoError("failed writing " + path.string());
}

MgNetParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_checkpoint(is, path.string());
}

}  // namespace mgnet
