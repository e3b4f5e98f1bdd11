#include "mgnet/binary_io.hpp"

#include <bit>
#include <cstring>
#include <vector>

#include "mgnet/errors.hpp"

namespace mgnet::io {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&v, bytes, sizeof(T));
  }
  return v;
}

}  // namespace

void write_magic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

void write_u32(std::ostream& os, std::uint32_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_f32s(std::ostream& os, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (float f : values) write_u32(os, std::bit_cast<std::uint32_t>(f));
  }
}

void Reader::read_bytes(char* dst, std::size_t n, const char* what) {
  is_.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is_.gcount()) != n) {
    throw FormatError(source_ + ": truncated while reading " + what);
  }
}

void Reader::expect_magic(std::string_view magic) {
  std::string got(magic.size(), '\0');
  read_bytes(got.data(), got.size(), "magic");
  if (got != magic) {
    throw FormatError(source_ + ": bad magic (expected \"" + std::string(magic) + "\")");
  }
}

std::uint32_t Reader::u32(const char* what) {
  std::uint32_t v;
  read_bytes(reinterpret_cast<char*>(&v), sizeof v, what);
  return to_little(v);
}

std::uint64_t Reader::u64(const char* what) {
  std::uint64_t v;
  read_bytes(reinterpret_cast<char*>(&v), sizeof v, what);
  return to_little(v);
}

void Reader::f32s(std::span<float> out, const char* what) {
  read_bytes(reinterpret_cast<char*>(out.data()), out.size_bytes(), what);
  if constexpr (std::endian::native == std::endian::big) {
    for (float& f : out) f = std::bit_cast<float>(to_little(std::bit_cast<std::uint32_t>(f)));
  }
}

void Reader::expect_end() {
  if (is_.peek() != std::char_traits<char>::eof()) {
    throw FormatError(source_ + ": unexpected trailing bytes");
  }
}

}  // namespace mgnet::io
