#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "anchorseg/losses.hpp"
#include "anchorseg/mask.hpp"

namespace anchorseg {

/// Pixelwise OR of aligned per-object sequences.
inline MaskSequence aggregate_or(const std::vector<MaskSequence>& per_object) {
  if (per_object.empty()) throw DimensionError("aggregate_or: no sequences");
  MaskSequence out = per_object.front();
  out.tag = "or";
  for (std::size_t o = 1; o < per_object.size(); ++o) {
    const auto& s = per_object[o];
    if (s.size() != out.size() || s.frame_indices != out.frame_indices) {
      throw DimensionError("aggregate_or: sequences are not frame-aligned");
    }
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (!s.masks[t].same_extent(out.masks[t])) throw DimensionError("aggregate_or: extent mismatch");
      for (std::size_t i = 0; i < s.masks[t].bits.size(); ++i) out.masks[t].bits[i] |= s.masks[t].bits[i];
    }
  }
  return out;
}

/// Region similarity J (IoU), 1 when both masks are empty.
inline double region_j(const BinaryMask& pred, const BinaryMask& gt) { return mask_iou(pred, gt); }

/// One-pixel boundary: foreground pixels with a 4-neighbor that is background
/// or outside the frame.
inline BinaryMask boundary_of(const BinaryMask& m) {
  BinaryMask b(m.height, m.width);
  for (std::size_t y = 0; y < m.height; ++y)
    for (std::size_t x = 0; x < m.width; ++x) {
      if (!m(y, x)) continue;
      const bool edge = y == 0 || x == 0 || y + 1 == m.height || x + 1 == m.width || !m(y - 1, x) ||
                        !m(y + 1, x) || !m(y, x - 1) || !m(y, x + 1);
      b(y, x) = edge ? 1 : 0;
    }
  return b;
}

/// Matching radius in pixels: ceil(tol_fraction * image diagonal).
inline std::size_t boundary_radius(std::size_t h, std::size_t w, double tol_fraction) {
  const double diag = std::sqrt(static_cast<double>(h * h + w * w));
  return static_cast<std::size_t>(std::ceil(tol_fraction * diag));
}

/// Dilation by a Euclidean disk of radius r.
inline BinaryMask dilate_disk(const BinaryMask& m, std::size_t r) {
  BinaryMask out(m.height, m.width);
  const auto ri = static_cast<std::ptrdiff_t>(r);
  const auto h = static_cast<std::ptrdiff_t>(m.height), w = static_cast<std::ptrdiff_t>(m.width);
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      if (!m(static_cast<std::size_t>(y), static_cast<std::size_t>(x))) continue;
      for (std::ptrdiff_t dy = -ri; dy <= ri; ++dy)
        for (std::ptrdiff_t dx = -ri; dx <= ri; ++dx) {
          if (dy * dy + dx * dx > ri * ri) continue;
          const std::ptrdiff_t yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < h && xx >= 0 && xx < w) out(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) = 1;
        }
    }
  return out;
}

// Frames up to this many pixels are scored with exact one-to-one matching.
inline constexpr std::size_t kExactMatchPixels = 64 * 64;

namespace detail {

inline std::vector<std::size_t> set_pixels(const BinaryMask& m) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.bits.size(); ++i)
    if (m.bits[i]) out.push_back(i);
  return out;
}

// Maximum matching between two boundary pixel sets where a pair may match
// when their Euclidean distance is at most r (augmenting paths).
inline std::size_t max_boundary_matching(const BinaryMask& a, const BinaryMask& b, std::size_t r) {
  const auto pa = set_pixels(a), pb = set_pixels(b);
  const std::size_t w = a.width;
  const auto rr = static_cast<std::ptrdiff_t>(r * r);
  std::vector<std::vector<std::size_t>> adj(pa.size());
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t j = 0; j < pb.size(); ++j) {
      const auto dy = static_cast<std::ptrdiff_t>(pa[i] / w) - static_cast<std::ptrdiff_t>(pb[j] / w);
      const auto dx = static_cast<std::ptrdiff_t>(pa[i] % w) - static_cast<std::ptrdiff_t>(pb[j] % w);
      if (dy * dy + dx * dx <= rr) adj[i].push_back(j);
    }
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(pb.size(), none);
  std::vector<char> seen;
  auto augment = [&](auto&& self, std::size_t i) -> bool {
    for (std::size_t j : adj[i]) {
      if (seen[j]) continue;
      seen[j] = 1;
      if (owner[j] == none || self(self, owner[j])) {
        owner[j] = i;
        return true;
      }
    }
    return false;
  };
  std::size_t matched = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    seen.assign(pb.size(), 0);
    matched += augment(augment, i);
  }
  return matched;
}

}  // namespace detail

/// Boundary F-measure. Boundary pixels are matched to counterpart boundary
/// pixels within the tolerance radius: one-to-one (maximum matching) on frames
/// of at most kExactMatchPixels, dilated overlap on larger ones.
inline double boundary_f(const BinaryMask& pred, const BinaryMask& gt, double tol_fraction = 0.008) {
  if (!pred.same_extent(gt)) throw DimensionError("boundary_f: extent mismatch");
  const BinaryMask pb = boundary_of(pred), gb = boundary_of(gt);
  const std::size_t np = pb.count(), ng = gb.count();
  if (np == 0 && ng == 0) return 1.0;
  if (np == 0 || ng == 0) return 0.0;
  const std::size_t r = boundary_radius(pred.height, pred.width, tol_fraction);
  std::size_t mp = 0, mg = 0;
  if (pred.height * pred.width <= kExactMatchPixels) {
    mp = mg = detail::max_boundary_matching(pb, gb, r);
  } else {
    const BinaryMask gd = dilate_disk(gb, r), pd = dilate_disk(pb, r);
    for (std::size_t i = 0; i < pb.bits.size(); ++i) {
      mp += pb.bits[i] & gd.bits[i];
      mg += gb.bits[i] & pd.bits[i];
    }
  }
  const double precision = static_cast<double>(mp) / static_cast<double>(np);
  const double recall = static_cast<double>(mg) / static_cast<double>(ng);
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

struct FrameScores {
  std::vector<double> j, f;
};

/// Per-frame J and F of one sequence against its ground truth.
inline FrameScores evaluate_sequence(const MaskSequence& pred, const MaskSequence& gt, double tol_fraction = 0.008) {
  if (pred.size() != gt.size()) throw DimensionError("evaluate_sequence: frame count mismatch");
  FrameScores s;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    s.j.push_back(region_j(pred.masks[t], gt.masks[t]));
    s.f.push_back(boundary_f(pred.masks[t], gt.masks[t], tol_fraction));
  }
  return s;
}

struct JFSummary {
  double j = 0.0, f = 0.0, jf = 0.0;  // fractions in [0, 1]
};

inline double percent_1dp(double fraction) { return std::round(fraction * 1000.0) / 10.0; }

/// Frames averaged within each sequence, then sequences averaged;
/// J&F = (J + F) / 2.
inline JFSummary jf_mean(const std::vector<FrameScores>& sequences) {
  if (sequences.empty()) throw DimensionError("jf_mean: no sequences");
  auto mean = [](const std::vector<double>& v) {
    if (v.empty()) throw DimensionError("jf_mean: empty sequence");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  JFSummary s;
  for (const auto& q : sequences) {
    s.j += mean(q.j);
    s.f += mean(q.f);
  }
  s.j /= static_cast<double>(sequences.size());
  s.f /= static_cast<double>(sequences.size());
  s.jf = 0.5 * (s.j + s.f);
  return s;
}

}  // namespace anchorseg
