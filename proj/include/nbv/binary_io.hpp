#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "nbv/error.hpp"

namespace nbv::bin {

/// Little-endian scalar I/O for the binary dump formats.
template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_arithmetic_v<T>);
  using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                               std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
  const U bits = std::bit_cast<U>(value);
  char b[sizeof(U)];
  for (std::size_t k = 0; k < sizeof(U); ++k) b[k] = static_cast<char>((bits >> (8 * k)) & 0xff);
  out.write(b, sizeof(U));
}

template <typename T>
T get(std::istream& in) {
  static_assert(std::is_arithmetic_v<T>);
  using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                               std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
  unsigned char b[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(U))) throw FormatError("unexpected end of binary data", 0);
  U bits = 0;
  for (std::size_t k = 0; k < sizeof(U); ++k) bits |= static_cast<U>(static_cast<U>(b[k]) << (8 * k));
  return std::bit_cast<T>(bits);
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, std::size_t max_size = std::size_t{1} << 30) {
  const auto n = get<std::uint64_t>(in);
  if (n > max_size) throw FormatError("binary string too long", 0);
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw FormatError("unexpected end of binary data", 0);
  return s;
}

template <typename T>
void put_vector(std::ostream& out, const T* data, std::size_t n) {
  put<std::uint64_t>(out, n);
  for (std::size_t i = 0; i < n; ++i) put(out, data[i]);
}

template <typename T>
std::vector<T> get_vector(std::istream& in, std::size_t max_size = std::size_t{1} << 32) {
  const auto n = get<std::uint64_t>(in);
  if (n > max_size) throw FormatError("binary vector too long", 0);
  std::vector<T> v(n);
  for (auto& x : v) x = get<T>(in);
  return v;
}

}  // namespace nbv::bin
