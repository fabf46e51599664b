#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "anchorseg/linear.hpp"
#include "anchorseg/rope.hpp"
#include "anchorseg/tensor.hpp"

namespace anchorseg {

class EmptyKeysError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Projection bundle of one cross-attention block.
///
/// q: d_query -> d_model, k/v: d_kv -> d_model, o: d_model -> d_out.
/// No normalization layers, no residual.
struct AttentionParams {
  LinearMap q, k, v, o;
  std::size_t heads = 1;

  std::size_t model_dim() const { return q.out_dim(); }
  std::size_t head_dim() const { return model_dim() / heads; }

  static AttentionParams seeded(std::size_t d_query, std::size_t d_kv, std::size_t d_model, std::size_t d_out,
                                std::size_t heads, std::uint64_t seed, const std::string& name) {
    return AttentionParams{LinearMap::seeded(d_query, d_model, seed, name + ".q", false),
                           LinearMap::seeded(d_kv, d_model, seed, name + ".k", false),
                           LinearMap::seeded(d_kv, d_model, seed, name + ".v", false),
                           LinearMap::seeded(d_model, d_out, seed, name + ".o", false), heads};
  }

  static AttentionParams seeded(std::size_t dim, std::size_t heads, std::uint64_t seed, const std::string& name) {
    return seeded(dim, dim, dim, dim, heads, seed, name);
  }

  void validate() const {
    if (heads == 0 || model_dim() % heads != 0) throw ConfigError("attention: model dim not divisible by heads");
    if (k.out_dim() != model_dim() || v.out_dim() != model_dim() || o.in_dim() != model_dim()) {
      throw ConfigError("attention: projection widths disagree");
    }
    if (k.in_dim() != v.in_dim()) throw ConfigError("attention: key/value input widths disagree");
  }
};

namespace detail {

struct ProjectedQK {
  Tensor q, k;
};

inline ProjectedQK project_and_rotate(const Tensor& q_in, const Tensor& kv_in, const AttentionParams& p,
                                      const RotationPlan* rope_q, const RotationPlan* rope_k) {
  p.validate();
  if (kv_in.rank() != 2 || kv_in.size() == 0) throw EmptyKeysError("cross_attention: no keys");
  require_rank(q_in, 2, "cross_attention queries");
  if ((rope_q || rope_k) && p.head_dim() % 2 != 0) {
    throw ConfigError("cross_attention: rotation plan needs an even head dim, got " +
                      std::to_string(p.head_dim()));
  }
  Tensor q = p.q.apply(q_in);
  Tensor k = p.k.apply(kv_in);
  if (rope_q) {
    if (rope_q->head_dim != p.head_dim()) throw ConfigError("cross_attention: query plan head_dim mismatch");
    q = apply_rope_heads(q, *rope_q, p.heads);
  }
  if (rope_k) {
    if (rope_k->head_dim != p.head_dim()) throw ConfigError("cross_attention: key plan head_dim mismatch");
    k = apply_rope_heads(k, *rope_k, p.heads);
  }
  return {std::move(q), std::move(k)};
}

}  // namespace detail

/// Scaled logits per head, shape [heads, Nq, Nk].
inline Tensor attention_logits(const Tensor& q_in, const Tensor& kv_in, const AttentionParams& p,
                               const RotationPlan* rope_q = nullptr, const RotationPlan* rope_k = nullptr) {
  auto [q, k] = detail::project_and_rotate(q_in, kv_in, p, rope_q, rope_k);
  const std::size_t nq = q.extent(0), nk = k.extent(0), hd = p.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Tensor logits({p.heads, nq, nk});
  for (std::size_t h = 0; h < p.heads; ++h)
    for (std::size_t i = 0; i < nq; ++i)
      for (std::size_t j = 0; j < nk; ++j)
        logits(h, i, j) = dot(q.row(i).subspan(h * hd, hd), k.row(j).subspan(h * hd, hd)) * scale;
  return logits;
}

/// Scaled dot-product cross-attention: project, optionally rotate Q and K,
/// softmax over keys per head, weighted value sum, output projection.
inline Tensor cross_attention(const Tensor& q_in, const Tensor& kv_in, const AttentionParams& p,
                              const RotationPlan* rope_q = nullptr, const RotationPlan* rope_k = nullptr) {
  auto [q, k] = detail::project_and_rotate(q_in, kv_in, p, rope_q, rope_k);
  const Tensor v = p.v.apply(kv_in);
  const std::size_t nq = q.extent(0), nk = k.extent(0), hd = p.head_dim(), dm = p.model_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  // Keys transposed per head so the inner loop streams contiguously.
  Tensor kt({dm, nk});
  for (std::size_t j = 0; j < nk; ++j)
    for (std::size_t c = 0; c < dm; ++c) kt(c, j) = k(j, c);

  // per head, the value channels that are nonzero for some key, stored
  // transposed
  std::vector<std::vector<std::size_t>> live(p.heads);
  Tensor vt({dm, nk});
  for (std::size_t c = 0; c < dm; ++c) {
    bool any = false;
    for (std::size_t j = 0; j < nk; ++j) {
      vt(c, j) = v(j, c);
      any = any || v(j, c) != 0.0;
    }
    if (any) live[c / hd].push_back(c);
  }

  Tensor mixed({nq, dm});
  std::vector<double> w(nk);
  for (std::size_t i = 0; i < nq; ++i) {
    const double* qi = q.data().data() + i * dm;
    double* mi = mixed.data().data() + i * dm;
    for (std::size_t h = 0; h < p.heads; ++h) {
      bool first = true;
      for (std::size_t c = h * hd; c < (h + 1) * hd; ++c) {
        const double qc = qi[c] * scale;
        if (qc == 0.0) continue;
        const double* kc = kt.data().data() + c * nk;
        if (first) {
          for (std::size_t j = 0; j < nk; ++j) w[j] = qc * kc[j];
          first = false;
        } else {
          for (std::size_t j = 0; j < nk; ++j) w[j] += qc * kc[j];
        }
      }
      if (first) std::fill(w.begin(), w.end(), 0.0);
      const double mx = *std::max_element(w.begin(), w.end());
      double sum = 0.0, prev_raw = std::numeric_limits<double>::quiet_NaN(), prev_w = 0.0;
      for (double& x : w) {
        // equal scores (repeated memory tokens) share one exp
        if (x == prev_raw) {
          x = prev_w;
        } else {
          prev_raw = x;
          // weights below e^-64 of the peak are dropped (keeps exp off its slow
          // underflow path)
          const double d = x - mx;
          x = prev_w = d < -64.0 ? 0.0 : std::exp(d);
        }
        sum += x;
      }
      const double inv = 1.0 / sum;
      for (std::size_t c : live[h]) {
        const double* vc = vt.data().data() + c * nk;
        double acc = 0.0;
        for (std::size_t j = 0; j < nk; ++j) acc += w[j] * vc[j];
        mi[c] = acc * inv;
      }
    }
  }
  Tensor out = p.o.apply(mixed);
  require_finite(out, "cross_attention");
  return out;
}

}  // namespace anchorseg
