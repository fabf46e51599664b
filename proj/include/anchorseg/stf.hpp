#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "anchorseg/attention.hpp"
#include "anchorseg/linear.hpp"
#include "anchorseg/rope.hpp"
#include "anchorseg/tokenizer.hpp"

namespace anchorseg {

/// Learnable [ST] embeddings, [N, D].
struct STTokenSet {
  Tensor embeddings;
  std::uint64_t seed = 0;

  std::size_t count() const { return embeddings.extent(0); }
  std::size_t dim() const { return embeddings.extent(1); }

  static STTokenSet seeded(std::size_t n, std::size_t dim, std::uint64_t seed) {
    if (n == 0) throw ConfigError("stf: need at least one [ST] token");
    SeededUniform rng(seed, "stf.embeddings");
    Tensor e({n, dim});
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& v : e.data()) v = rng.symmetric(bound);
    return {std::move(e), seed};
  }
};

/// Fused spatiotemporal prompts [N, T, D]; slice k is the prompt of frame k.
struct PromptSet {
  Tensor tokens;

  std::size_t count() const { return tokens.extent(0); }
  std::size_t frames() const { return tokens.extent(1); }
  std::size_t dim() const { return tokens.extent(2); }

  Tensor slice_frame(std::size_t k) const {
    if (k >= frames()) {
      throw IndexError("slice_frame: frame " + std::to_string(k) + " outside [0," + std::to_string(frames()) + ")");
    }
    const std::size_t n = count(), d = dim();
    Tensor s({n, 1, d});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) s(i, 0, c) = tokens(i, k, c);
    return s;
  }

  static PromptSet stack(const std::vector<Tensor>& slices) {
    if (slices.empty()) throw DimensionError("PromptSet::stack: no slices");
    const std::size_t n = slices.front().extent(0), d = slices.front().extent(2), t = slices.size();
    PromptSet p{Tensor({n, t, d})};
    for (std::size_t k = 0; k < t; ++k) {
      if (slices[k].shape() != slices.front().shape()) throw DimensionError("PromptSet::stack: slice mismatch");
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) p.tokens(i, k, c) = slices[k](i, 0, c);
    }
    return p;
  }
};

/// F_Init = CrossAttn(E_ST, S_down), no rotary encoding.
inline Tensor initial_fusion(const STTokenSet& e, const TokenSequence& s, const AttentionParams& params) {
  if (s.tokens.rank() != 3 || s.count() == 0) throw EmptyKeysError("initial_fusion: empty token sequence");
  if (e.dim() != s.dim()) throw DimensionError("initial_fusion: [ST] and video token widths differ");
  return cross_attention(e.embeddings, s.merged(), params);
}

// Stand-in for the language model that turns fused [ST] tokens into
// query-aware tokens. All variants map [N, D] -> [N, D].

struct IdentityTransform {
  Tensor operator()(const Tensor& x) const { return x; }
};

/// x + W2 relu(W1 x + b1) + b2 with W1: D -> 4D, W2: 4D -> D.
struct ResidualMlp {
  LinearMap up, down;

  static ResidualMlp seeded(std::size_t dim, std::uint64_t seed) {
    return {LinearMap::seeded(dim, 4 * dim, seed, "stf.mlp.up"), LinearMap::seeded(4 * dim, dim, seed, "stf.mlp.down")};
  }

  Tensor operator()(const Tensor& x) const {
    Tensor h = up.apply(x);
    relu_inplace(h);
    return add(x, down.apply(h));
  }
};

/// Adds gain * exemplar[n] to token n. The exemplar rows carry the appearance
/// of the objects a resolved query refers to.
struct GroundedTransform {
  Tensor exemplars;  // [N, D]
  double gain = 1.0;

  Tensor operator()(const Tensor& x) const {
    if (x.shape() != exemplars.shape()) throw DimensionError("grounded transform: exemplar shape mismatch");
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += gain * exemplars[i];
    return y;
  }
};

using SemanticTransform = std::variant<IdentityTransform, ResidualMlp, GroundedTransform>;

inline Tensor semantic_transform(const SemanticTransform& f, const Tensor& f_init) {
  Tensor out = std::visit([&](const auto& impl) { return impl(f_init); }, f);
  require_finite(out, "semantic_transform");
  return out;
}

/// Broadcast [N, D] tokens over T frame slots plus their temporal plan.
struct ExpandedTokens {
  Tensor tokens;       // [N, T, D]
  RotationPlan plan;   // one axis, token order n-major (n * T + t)
};

inline ExpandedTokens temporal_expand(const Tensor& f_st, std::size_t frames, std::size_t head_dim,
                                      double base = 10000.0) {
  require_rank(f_st, 2, "temporal_expand");
  if (frames == 0) throw ConfigError("temporal_expand: T_seg must be >= 1");
  const std::size_t n = f_st.extent(0), d = f_st.extent(1);
  ExpandedTokens out{Tensor({n, frames, d}), {}};
  std::vector<std::int64_t> pos;
  pos.reserve(n * frames);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t c = 0; c < d; ++c) out.tokens(i, t, c) = f_st(i, c);
      pos.push_back(static_cast<std::int64_t>(t));
    }
  out.plan = make_temporal_plan(pos, head_dim, base);
  return out;
}

/// F~ = CrossAttn(F'_ST, S'_down): queries rotated on the time chunk only,
/// keys rotated on (t, h, w).
inline PromptSet second_fusion(const ExpandedTokens& f_exp, const TokenSequence& s, const AttentionParams& params) {
  const std::size_t n = f_exp.tokens.extent(0), t = f_exp.tokens.extent(1), d = f_exp.tokens.extent(2);
  if (d != s.dim()) throw DimensionError("second_fusion: token widths differ");
  if (f_exp.plan.head_dim != params.head_dim()) throw ConfigError("second_fusion: plan head_dim mismatch");
  if (f_exp.plan.tokens() != n * t) throw ConfigError("second_fusion: temporal plan does not cover all tokens");
  if (s.positions.size() != s.count()) throw ConfigError("second_fusion: missing video token positions");
  const RotationPlan q_plan = align_temporal_to_3d(f_exp.plan);
  const RotationPlan k_plan = make_3d_plan(s.positions, params.head_dim(), f_exp.plan.base);
  Tensor out = cross_attention(f_exp.tokens.reshaped({n * t, d}), s.merged(), params, &q_plan, &k_plan);
  return PromptSet{out.reshaped({n, t, params.o.out_dim()})};
}

/// Whole fusion pipeline with its own parameter bundles per stage.
struct SpatioTemporalFusion {
  STTokenSet st;
  AttentionParams initial, second;
  SemanticTransform transform = IdentityTransform{};
  double rope_base = 10000.0;

  PromptSet run(const TokenSequence& s) const {
    const Tensor f_init = initial_fusion(st, s, initial);
    const Tensor f_st = semantic_transform(transform, f_init);
    const ExpandedTokens f_exp = temporal_expand(f_st, s.frames(), second.head_dim(), rope_base);
    return second_fusion(f_exp, s, second);
  }
};

}  // namespace anchorseg
