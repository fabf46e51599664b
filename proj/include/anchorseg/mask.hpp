#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anchorseg/errors.hpp"
#include "anchorseg/tensor.hpp"

namespace anchorseg {

/// Binary mask, row-major, values in {0, 1}.
struct BinaryMask {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), bits(h * w, fill) {}

  std::uint8_t operator()(std::size_t y, std::size_t x) const { return bits[y * width + x]; }
  std::uint8_t& operator()(std::size_t y, std::size_t x) { return bits[y * width + x]; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
  }
  bool any() const { return count() > 0; }

  bool same_extent(const BinaryMask& o) const { return height == o.height && width == o.width; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

/// mask[y,x] = 1 iff logits[y,x] > threshold.
inline BinaryMask binarize(const Tensor& logits, double threshold = 0.0) {
  require_rank(logits, 2, "binarize");
  BinaryMask m(logits.extent(0), logits.extent(1));
  for (std::size_t i = 0; i < logits.size(); ++i) m.bits[i] = logits[i] > threshold ? 1 : 0;
  return m;
}

/// Per-frame masks of one object (or an OR aggregate).
struct MaskSequence {
  std::vector<BinaryMask> masks;
  std::vector<std::size_t> frame_indices;
  std::string tag;

  std::size_t size() const { return masks.size(); }

  void validate() const {
    if (masks.size() != frame_indices.size()) throw DimensionError("MaskSequence: frame index count mismatch");
    for (const auto& m : masks) {
      if (!m.same_extent(masks.front())) throw DimensionError("MaskSequence: inconsistent extents");
    }
  }
};

}  // namespace anchorseg
