#pragma once

// Little-endian fixed-width encoding helpers shared by the binary formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "tdu/error.hpp"

namespace tdu::binary {

template <class UInt>
void put_le(std::ostream& out, UInt value) {
  unsigned char buf[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) buf[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(UInt));
}

inline void put_f32(std::ostream& out, float value) { put_le(out, std::bit_cast<std::uint32_t>(value)); }

template <class UInt>
UInt get_le(std::istream& in, const char* what) {
  unsigned char buf[sizeof(UInt)];
  in.read(reinterpret_cast<char*>(buf), sizeof(UInt));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(UInt))) {
    throw Error(ErrorCode::truncated_payload, std::string("unexpected end of file reading ") + what);
  }
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) value |= static_cast<UInt>(buf[i]) << (8 * i);
  return value;
}

inline float get_f32(std::istream& in, const char* what) { return std::bit_cast<float>(get_le<std::uint32_t>(in, what)); }

/// FNV-1a over little-endian encoded words.
class Fnv1a64 {
 public:
  void add_bytes(const void* data, std::size_t n) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001B3ULL;
    }
  }
  void add_u64(std::uint64_t v) noexcept {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    add_bytes(buf, 8);
  }
  void add_f64(double v) noexcept { add_u64(std::bit_cast<std::uint64_t>(v)); }
  void add_string(std::string_view s) noexcept {
    add_u64(s.size());
    add_bytes(s.data(), s.size());
  }
  std::uint64_t value() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

}  // namespace tdu::binary
