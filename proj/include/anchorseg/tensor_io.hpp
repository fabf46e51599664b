#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "anchorseg/errors.hpp"
#include "anchorseg/tensor.hpp"

namespace anchorseg {

// Tensor file: one JSON header line {"dtype":"f64","shape":[...]}, '\n', then
// product(shape) little-endian IEEE-754 doubles.

inline void write_tensor(std::ostream& os, const Tensor& t) {
  nlohmann::ordered_json header;
  header["dtype"] = "f64";
  header["shape"] = t.shape();
  os << header.dump() << '\n';
  for (double v : t.data()) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

inline Tensor read_tensor(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw SpecError("tensor file: missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("tensor file: bad header: ") + e.what());
  }
  if (header.value("dtype", "") != "f64") throw SpecError("tensor file: dtype must be f64");
  Shape shape = header.at("shape").get<Shape>();
  const std::size_t n = shape_product(shape);
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char bytes[8];
    if (!is.read(reinterpret_cast<char*>(bytes), 8)) {
      throw SpecError("tensor file: payload shorter than " + std::to_string(n * 8) + " bytes");
    }
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    data[i] = std::bit_cast<double>(bits);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw SpecError("tensor file: trailing bytes");
  return Tensor(std::move(shape), std::move(data));
}

inline void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw SpecError("cannot write " + path.string());
  write_tensor(os, t);
}

inline Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw SpecError("cannot read " + path.string());
  return read_tensor(is);
}

}  // namespace anchorseg
