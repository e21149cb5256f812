#pragma once

// Little-endian primitive readers/writers for the on-disk formats.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "hhscore/errors.hpp"

namespace hhscore::detail {

template <typename UInt>
void write_le(std::ostream& out, UInt value) {
  char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes, sizeof(UInt));
}

template <typename UInt>
UInt read_le(std::istream& in) {
  unsigned char bytes[sizeof(UInt)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(UInt))) {
    throw FormatError("unexpected end of file");
  }
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) value |= UInt(bytes[i]) << (8 * i);
  return value;
}

inline void write_f64(std::ostream& out, double v) { write_le(out, std::bit_cast<std::uint64_t>(v)); }
inline double read_f64(std::istream& in) { return std::bit_cast<double>(read_le<std::uint64_t>(in)); }
inline void write_f32(std::ostream& out, float v) { write_le(out, std::bit_cast<std::uint32_t>(v)); }
inline float read_f32(std::istream& in) { return std::bit_cast<float>(read_le<std::uint32_t>(in)); }

inline void write_string(std::ostream& out, const std::string& s) {
  write_le(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  const auto len = read_le<std::uint32_t>(in);
  if (len > (1u << 16)) throw FormatError("implausible string length " + std::to_string(len));
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), len)) throw FormatError("truncated string");
  return s;
}

inline void expect_magic(std::istream& in, const char (&magic)[5], const std::string& path) {
  char got[4];
  if (!in.read(got, 4) || std::string(got, 4) != std::string(magic, 4)) {
    throw FormatError(path + ": bad magic, expected " + std::string(magic, 4));
  }
}

}  // namespace hhscore::detail
