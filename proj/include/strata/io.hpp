#pragma once

// Field files and CSV slices.
//
// Field file layout (all integers and doubles little-endian):
//   0  char[8]  magic "LCRFIELD"
//   8  u32      format version (1)
//  12  u32      problem kind (0 helmholtz, 1 maxwell)
//  16  u64      nx
//  24  u64      ny
//  32  u64      nz
//  40  u32      components
//  44  zero padding up to byte 64
// then per component nx*ny*nz interleaved (re, im) f64 values, k fastest.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "strata/config.hpp"

namespace strata {

inline constexpr char kFieldMagic[8] = {'L', 'C', 'R', 'F', 'I', 'E', 'L', 'D'};
inline constexpr std::uint32_t kFieldVersion = 1;
inline constexpr std::size_t kFieldHeaderBytes = 64;

struct FieldFile {
  ProblemKind kind = ProblemKind::helmholtz;
  Dims3 dims;
  std::vector<Field3D> components;
};

namespace detail {

template <class T>
void put_le(std::vector<unsigned char>& out, T v) {
  std::uint64_t bits = 0;
  static_assert(sizeof(T) <= sizeof bits);
  std::memcpy(&bits, &v, sizeof(T));
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<unsigned char>(bits >> (8 * b)));
}

template <class T>
T get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  T v;
  std::memcpy(&v, &bits, sizeof(T));
  return v;
}

}  // namespace detail

inline std::vector<unsigned char> encode_field(const FieldFile& f) {
  std::vector<unsigned char> out(kFieldMagic, kFieldMagic + 8);
  detail::put_le<std::uint32_t>(out, kFieldVersion);
  detail::put_le<std::uint32_t>(out, f.kind == ProblemKind::helmholtz ? 0u : 1u);
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(f.dims.nx));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(f.dims.ny));
  detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(f.dims.nz));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.components.size()));
  out.resize(kFieldHeaderBytes, 0);
  for (const auto& c : f.components) {
    if (!(c.dims() == f.dims)) throw DimensionError("field file: component dims differ from header");
    for (const auto& v : c.values()) {
      detail::put_le<double>(out, v.real());
      detail::put_le<double>(out, v.imag());
    }
  }
  return out;
}

inline FieldFile decode_field(const std::vector<unsigned char>& in) {
  if (in.size() < kFieldHeaderBytes || std::memcmp(in.data(), kFieldMagic, 8) != 0)
    throw Error("field file: bad magic or truncated header");
  const unsigned char* p = in.data();
  if (detail::get_le<std::uint32_t>(p + 8) != kFieldVersion) throw Error("field file: unsupported version");
  FieldFile f;
  const auto kind = detail::get_le<std::uint32_t>(p + 12);
  if (kind > 1) throw Error("field file: unknown problem kind");
  f.kind = kind == 0 ? ProblemKind::helmholtz : ProblemKind::maxwell;
  f.dims = {static_cast<Index>(detail::get_le<std::uint64_t>(p + 16)), static_cast<Index>(detail::get_le<std::uint64_t>(p + 24)),
            static_cast<Index>(detail::get_le<std::uint64_t>(p + 32))};
  const auto comps = detail::get_le<std::uint32_t>(p + 40);
  const std::size_t n = static_cast<std::size_t>(f.dims.size());
  if (in.size() != kFieldHeaderBytes + comps * n * 16) throw Error("field file: size does not match header");
  p += kFieldHeaderBytes;
  for (std::uint32_t c = 0; c < comps; ++c) {
    Field3D x(f.dims);
    for (auto& v : x.values()) {
      v = {detail::get_le<double>(p), detail::get_le<double>(p + 8)};
      p += 16;
    }
    f.components.push_back(std::move(x));
  }
  return f;
}

inline void write_field(const std::string& path, const FieldFile& f) {
  const auto bytes = encode_field(f);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(path + ": write failed");
}

inline FieldFile read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path + ": cannot open field file");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_field(bytes);
}

/// CSV of one z level: i, j, x, y, then (re, im) per component.
inline void write_csv_slice(const std::string& path, const FieldFile& f, Index k, const std::vector<cplx>& x,
                            const std::vector<cplx>& y) {
  std::ofstream out(path);
  if (!out) throw Error(path + ": cannot open for writing");
  out << std::setprecision(17) << "i,j,x,y";
  for (std::size_t c = 0; c < f.components.size(); ++c) out << ",re" << c << ",im" << c;
  out << "\n";
  for (Index i = 0; i < f.dims.nx; ++i)
    for (Index j = 0; j < f.dims.ny; ++j) {
      out << i << "," << j << "," << x[i].real() << "," << y[j].real();
      for (const auto& c : f.components) out << "," << c(i, j, k).real() << "," << c(i, j, k).imag();
      out << "\n";
    }
}

}  // namespace strata
