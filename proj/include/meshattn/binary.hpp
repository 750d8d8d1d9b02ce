#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "meshattn/common.hpp"

namespace meshattn::binary {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed endianness is not supported");

template <typename T>
T to_little(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

template <typename T>
void write(std::ostream& out, T value) {
  value = to_little(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read(std::istream& in) {
  T value;
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
    throw ParseError("unexpected end of binary file");
  return to_little(value);
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) {
  out.write(magic, 4);
}

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char buf[4];
  if (!in.read(buf, 4) || std::memcmp(buf, magic, 4) != 0)
    throw ParseError(std::string("bad magic, expected '") + magic + "'");
}

inline void write_string(std::ostream& out, const std::string& s) {
  write<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  const auto len = read<std::uint32_t>(in);
  if (len > (1u << 30)) throw ParseError("string length out of range");
  std::string s(len, '\0');
  if (!in.read(s.data(), len)) throw ParseError("unexpected end of binary file");
  return s;
}

}  // namespace meshattn::binary
