#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "anchorseg/errors.hpp"
#include "anchorseg/mask.hpp"
#include "anchorseg/tensor.hpp"

namespace anchorseg {

// Binary PPM (P6) / PGM (P5), maxval 255.

namespace detail {

inline std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

inline void write_netpbm(const std::filesystem::path& path, const char* magic, std::size_t w, std::size_t h,
                         const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SpecError("cannot write " + path.string());
  out << magic << '\n' << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw SpecError("short write to " + path.string());
}

struct Raster {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> bytes;
};

inline Raster read_netpbm(const std::filesystem::path& path, const std::string& magic, std::size_t channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError("cannot open " + path.string());
  std::string m;
  in >> m;
  if (m != magic) throw SpecError(path.string() + ": expected " + magic + " header, got '" + m + "'");
  auto next_int = [&]() -> long {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
      in >> std::ws;
    }
    long v = -1;
    in >> v;
    if (!in || v <= 0) throw SpecError(path.string() + ": bad header field");
    return v;
  };
  Raster r;
  r.width = static_cast<std::size_t>(next_int());
  r.height = static_cast<std::size_t>(next_int());
  if (next_int() != 255) throw SpecError(path.string() + ": only maxval 255 is supported");
  in.get();
  r.bytes.resize(r.width * r.height * channels);
  in.read(reinterpret_cast<char*>(r.bytes.data()), static_cast<std::streamsize>(r.bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(r.bytes.size())) throw SpecError(path.string() + ": truncated");
  return r;
}

}  // namespace detail

/// RGB frame [H, W, 3] in [0, 1] -> P6.
inline void write_ppm(const std::filesystem::path& path, const Tensor& frame) {
  require_rank(frame, 3, "write_ppm");
  if (frame.extent(2) != 3) throw DimensionError("write_ppm: frame must have 3 channels");
  std::vector<std::uint8_t> bytes(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) bytes[i] = detail::to_byte(frame[i]);
  detail::write_netpbm(path, "P6", frame.extent(1), frame.extent(0), bytes);
}

inline Tensor read_ppm(const std::filesystem::path& path) {
  const auto r = detail::read_netpbm(path, "P6", 3);
  Tensor t({r.height, r.width, 3});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = r.bytes[i] / 255.0;
  return t;
}

/// Mask -> P5 with values 0/255.
inline void write_pgm(const std::filesystem::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> bytes(mask.bits.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.bits[i] ? 255 : 0;
  detail::write_netpbm(path, "P5", mask.width, mask.height, bytes);
}

/// P5 -> mask; any nonzero gray level counts as foreground.
inline BinaryMask read_pgm(const std::filesystem::path& path) {
  const auto r = detail::read_netpbm(path, "P5", 1);
  BinaryMask m(r.height, r.width);
  for (std::size_t i = 0; i < r.bytes.size(); ++i) m.bits[i] = r.bytes[i] ? 1 : 0;
  return m;
}

inline std::string frame_name(const char* prefix, std::size_t t, const char* ext) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", t);
  return std::string(prefix) + buf + ext;
}

}  // namespace anchorseg
