#pragma once

// Little-endian primitives shared by the VOL3 and MGN3 file formats.

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

namespace mgnet::io {

void write_magic(std::ostream& os, std::string_view magic);
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f32s(std::ostream& os, std::span<const float> values);

/// Reader over a stream; every short read raises FormatError naming `what`.
class Reader {
 public:
  Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

  void expect_magic(std::string_view magic);
  std::uint32_t u32(const char* what);
  std::uint64_t u64(const char* what);
  void f32s(std::span<float> out, const char* what);
  /// Throws FormatError unless the stream is exhausted.
  void expect_end();

 private:
  void read_bytes(char* dst, std::size_t n, const char* what);

  std::istream& is_;
  std::string source_;
};

}  // namespace mgnet::io
