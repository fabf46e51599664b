#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "anchorseg/errors.hpp"
#include "anchorseg/tensor.hpp"

namespace anchorseg {

/// Rotary position plan.
///
/// Channels [0, head_dim) are split into contiguous per-axis chunks (in axis
/// order) followed by unrotated pass-through channels. Inside the chunk of axis
/// `a`, pair i = (x_{2i}, x_{2i+1}) of token n is rotated by
/// positions[n][a] * base^(-2i / chunk).
struct RotationPlan {
  std::size_t head_dim = 0;
  double base = 10000.0;
  std::vector<std::size_t> chunks;
  std::vector<std::vector<std::int64_t>> positions;  // [token][axis]

  std::size_t axes() const { return chunks.size(); }
  std::size_t tokens() const { return positions.size(); }

  std::size_t chunk_offset(std::size_t axis) const {
    std::size_t off = 0;
    for (std::size_t a = 0; a < axis; ++a) off += chunks[a];
    return off;
  }

  // Rotation frequencies of one axis chunk.
  std::vector<double> thetas(std::size_t axis) const {
    const std::size_t c = chunks.at(axis);
    std::vector<double> th(c / 2);
    for (std::size_t i = 0; i < th.size(); ++i) {
      th[i] = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(c));
    }
    return th;
  }

  void validate() const {
    std::size_t total = 0;
    for (std::size_t c : chunks) {
      if (c == 0 || c % 2 != 0) throw ConfigError("rope: chunk sizes must be positive and even");
      total += c;
    }
    if (total > head_dim) throw ConfigError("rope: chunks exceed head_dim");
    if (!(base > 0.0)) throw ConfigError("rope: base must be positive");
    for (const auto& p : positions) {
      if (p.size() != chunks.size()) throw ConfigError("rope: position arity does not match axis count");
    }
  }
};

namespace detail {

inline void rotate_row(std::span<double> v, const RotationPlan& plan,
                       const std::vector<std::vector<double>>& thetas, std::size_t token) {
  std::size_t off = 0;
  for (std::size_t a = 0; a < plan.axes(); ++a) {
    const std::int64_t p = plan.positions[token][a];
    const std::size_t c = plan.chunks[a];
    if (p != 0) {
      const auto& th = thetas[a];
      for (std::size_t i = 0; i < c / 2; ++i) {
        const double ang = static_cast<double>(p) * th[i];
        const double cs = std::cos(ang), sn = std::sin(ang);
        const double x0 = v[off + 2 * i], x1 = v[off + 2 * i + 1];
        v[off + 2 * i] = x0 * cs - x1 * sn;
        v[off + 2 * i + 1] = x0 * sn + x1 * cs;
      }
    }
    off += c;
  }
}

inline std::vector<std::vector<double>> all_thetas(const RotationPlan& plan) {
  std::vector<std::vector<double>> th;
  for (std::size_t a = 0; a < plan.axes(); ++a) th.push_back(plan.thetas(a));
  return th;
}

}  // namespace detail

/// Rotates every token row of x [tokens, head_dim].
inline Tensor apply_rope(const Tensor& x, const RotationPlan& plan) {
  require_rank(x, 2, "apply_rope");
  plan.validate();
  if (x.extent(1) != plan.head_dim) throw ConfigError("rope: head_dim does not match input width");
  if (x.extent(0) != plan.tokens()) throw ConfigError("rope: position count does not match token count");
  Tensor out = x;
  const auto th = detail::all_thetas(plan);
  for (std::size_t n = 0; n < x.extent(0); ++n) detail::rotate_row(out.row(n), plan, th, n);
  return out;
}

/// Rotates each head slice of x [tokens, heads * head_dim] with the same plan.
inline Tensor apply_rope_heads(const Tensor& x, const RotationPlan& plan, std::size_t heads) {
  require_rank(x, 2, "apply_rope_heads");
  plan.validate();
  if (x.extent(1) != heads * plan.head_dim) throw ConfigError("rope: head_dim does not match head width");
  if (x.extent(0) != plan.tokens()) throw ConfigError("rope: position count does not match token count");
  Tensor out = x;
  const auto th = detail::all_thetas(plan);
  for (std::size_t n = 0; n < x.extent(0); ++n) {
    auto row = out.row(n);
    for (std::size_t h = 0; h < heads; ++h) {
      detail::rotate_row(row.subspan(h * plan.head_dim, plan.head_dim), plan, th, n);
    }
  }
  return out;
}

/// One-axis plan over the whole head width; position = frame index.
inline RotationPlan make_temporal_plan(const std::vector<std::int64_t>& frame_index_per_token,
                                       std::size_t head_dim, double base = 10000.0) {
  if (head_dim == 0 || head_dim % 2 != 0) throw ConfigError("temporal rope: head_dim must be even");
  RotationPlan plan{head_dim, base, {head_dim}, {}};
  plan.positions.reserve(frame_index_per_token.size());
  for (auto t : frame_index_per_token) plan.positions.push_back({t});
  return plan;
}

// Per-axis chunk of the (t,h,w) split: floor(head_dim/3) rounded down to even.
inline std::size_t axis_chunk_3d(std::size_t head_dim) {
  const std::size_t c = (head_dim / 3) & ~std::size_t{1};
  if (c == 0) throw ConfigError("3d rope: head_dim " + std::to_string(head_dim) + " too small for three even chunks");
  return c;
}

/// Three-axis (t,h,w) plan; leftover channels pass through unrotated.
inline RotationPlan make_3d_plan(const std::vector<std::array<std::int64_t, 3>>& thw, std::size_t head_dim,
                                 double base = 10000.0) {
  const std::size_t c = axis_chunk_3d(head_dim);
  RotationPlan plan{head_dim, base, {c, c, c}, {}};
  plan.positions.reserve(thw.size());
  for (const auto& p : thw) plan.positions.push_back({p[0], p[1], p[2]});
  return plan;
}

/// Places a one-axis temporal plan onto the time chunk of the 3-D layout with
/// spatial positions fixed at 0, so query/key logits depend on relative time.
inline RotationPlan align_temporal_to_3d(const RotationPlan& temporal) {
  if (temporal.axes() != 1) throw ConfigError("align_temporal_to_3d: expected a one-axis plan");
  std::vector<std::array<std::int64_t, 3>> thw;
  thw.reserve(temporal.tokens());
  for (const auto& p : temporal.positions) thw.push_back({p[0], 0, 0});
  return make_3d_plan(thw, temporal.head_dim, temporal.base);
}

}  // namespace anchorseg
