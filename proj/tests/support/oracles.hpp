#pragma once

// Independent reference implementations used by the tests. None of these call
// into the library code paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "anchorseg/attention.hpp"
#include "anchorseg/mask.hpp"
#include "anchorseg/tensor.hpp"

namespace oracle {

using anchorseg::Tensor;

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      long double s = 0.0L;
      for (std::size_t p = 0; p < k; ++p) s += static_cast<long double>(a(i, p)) * b(p, j);
      c(i, j) = static_cast<double>(s);
    }
  return c;
}

inline double max_rel_diff(const Tensor& a, const Tensor& b) {
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max(scale, std::abs(b[i]));
    diff = std::max(diff, std::abs(a[i] - b[i]));
  }
  return diff / std::max(scale, 1e-300);
}

inline Tensor random_tensor(anchorseg::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

// The documented init rule re-derived from scratch: mt19937_64 seeded with
// splitmix64(seed ^ fnv1a(name)); each draw is ((e() >> 11) * 2^-53 * 2 - 1) * bound,
// weights row-major first, then biases.
class InitStream {
 public:
  InitStream(std::uint64_t seed, const std::string& name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    std::uint64_t z = (seed ^ h) + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    engine_.seed(z ^ (z >> 31));
  }
  double next(double bound) { return (2.0 * static_cast<double>(engine_() >> 11) * 0x1.0p-53 - 1.0) * bound; }

 private:
  std::mt19937_64 engine_;
};

struct DenseLayer {
  std::vector<std::vector<double>> w;  // [out][in]
  std::vector<double> b;

  static DenseLayer init(std::size_t d_in, std::size_t d_out, std::uint64_t seed, const std::string& name) {
    InitStream s(seed, name);
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
    DenseLayer l{std::vector<std::vector<double>>(d_out, std::vector<double>(d_in)), std::vector<double>(d_out)};
    for (auto& row : l.w)
      for (double& v : row) v = s.next(bound);
    for (double& v : l.b) v = s.next(bound);
    return l;
  }

  std::vector<double> operator()(const std::vector<double>& x) const {
    std::vector<double> y = b;
    for (std::size_t o = 0; o < y.size(); ++o)
      for (std::size_t i = 0; i < x.size(); ++i) y[o] += w[o][i] * x[i];
    return y;
  }
};

// Per-token rotation spec: one (chunk_start, chunk_len, position) per axis.
struct AxisRotation {
  std::size_t start, len;
  std::int64_t position;
};

// Full head_dim x head_dim rotation matrix, built pair by pair.
inline std::vector<std::vector<double>> rotation_matrix(std::size_t head_dim, const std::vector<AxisRotation>& axes,
                                                        double base) {
  std::vector<std::vector<double>> r(head_dim, std::vector<double>(head_dim, 0.0));
  for (std::size_t i = 0; i < head_dim; ++i) r[i][i] = 1.0;
  for (const auto& ax : axes) {
    for (std::size_t i = 0; i < ax.len / 2; ++i) {
      const double theta = 1.0 / std::pow(base, static_cast<double>(2 * i) / static_cast<double>(ax.len));
      const double a = static_cast<double>(ax.position) * theta;
      const std::size_t p = ax.start + 2 * i;
      r[p][p] = std::cos(a);
      r[p][p + 1] = -std::sin(a);
      r[p + 1][p] = std::sin(a);
      r[p + 1][p + 1] = std::cos(a);
    }
  }
  return r;
}

inline std::vector<double> mat_vec(const std::vector<std::vector<double>>& m, const std::vector<double>& v) {
  std::vector<double> out(m.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += m[i][j] * v[j];
  return out;
}

// Dense affine map from raw weights (no LinearMap::apply).
inline std::vector<double> affine(const anchorseg::LinearMap& m, const std::vector<double>& x) {
  std::vector<double> y(m.weight.extent(0), 0.0);
  for (std::size_t o = 0; o < y.size(); ++o) {
    double s = m.bias ? (*m.bias)[o] : 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += m.weight(o, i) * x[i];
    y[o] = s;
  }
  return y;
}

using RotationFn = std::function<std::vector<AxisRotation>(std::size_t token)>;

// Materialized multi-head attention. Rotations (if any) are applied per head
// through explicit rotation matrices; softmax over all keys with no cutoff.
inline Tensor attention(const Tensor& q_in, const Tensor& kv_in, const anchorseg::AttentionParams& p,
                        const RotationFn& rot_q = {}, const RotationFn& rot_k = {}, double base = 10000.0) {
  const std::size_t nq = q_in.extent(0), nk = kv_in.extent(0);
  const std::size_t dm = p.q.weight.extent(0), hd = dm / p.heads;
  auto row = [](const Tensor& t, std::size_t i) {
    return std::vector<double>(t.row(i).begin(), t.row(i).end());
  };
  std::vector<std::vector<double>> q(nq), k(nk), v(nk);
  for (std::size_t i = 0; i < nq; ++i) q[i] = affine(p.q, row(q_in, i));
  for (std::size_t j = 0; j < nk; ++j) {
    k[j] = affine(p.k, row(kv_in, j));
    v[j] = affine(p.v, row(kv_in, j));
  }
  auto rotate = [&](std::vector<double>& x, const std::vector<AxisRotation>& axes) {
    const auto r = rotation_matrix(hd, axes, base);
    for (std::size_t h = 0; h < p.heads; ++h) {
      std::vector<double> part(x.begin() + static_cast<std::ptrdiff_t>(h * hd),
                               x.begin() + static_cast<std::ptrdiff_t>((h + 1) * hd));
      const auto rp = mat_vec(r, part);
      std::copy(rp.begin(), rp.end(), x.begin() + static_cast<std::ptrdiff_t>(h * hd));
    }
  };
  if (rot_q)
    for (std::size_t i = 0; i < nq; ++i) rotate(q[i], rot_q(i));
  if (rot_k)
    for (std::size_t j = 0; j < nk; ++j) rotate(k[j], rot_k(j));

  std::vector<double> mixed_row(dm);
  Tensor out({nq, p.o.weight.extent(0)});
  for (std::size_t i = 0; i < nq; ++i) {
    std::fill(mixed_row.begin(), mixed_row.end(), 0.0);
    for (std::size_t h = 0; h < p.heads; ++h) {
      std::vector<double> logits(nk);
      for (std::size_t j = 0; j < nk; ++j) {
        double s = 0.0;
        for (std::size_t c = h * hd; c < (h + 1) * hd; ++c) s += q[i][c] * k[j][c];
        logits[j] = s / std::sqrt(static_cast<double>(hd));
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (double& l : logits) z += (l = std::exp(l - mx));
      for (std::size_t j = 0; j < nk; ++j)
        for (std::size_t c = h * hd; c < (h + 1) * hd; ++c) mixed_row[c] += logits[j] / z * v[j][c];
    }
    const auto o = affine(p.o, mixed_row);
    std::copy(o.begin(), o.end(), out.row(i).begin());
  }
  return out;
}

// Every candidate paired with its distance, sorted by (distance, index).
inline std::vector<std::size_t> nearest(const std::vector<std::size_t>& candidates, std::size_t t, std::size_t alpha) {
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t k : candidates) all.emplace_back(k > t ? k - t : t - k, k);
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(alpha, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

inline std::vector<std::size_t> propagation_targets(const std::vector<std::size_t>& anchors, std::size_t frames,
                                                    std::size_t n_prop) {
  std::set<long> s;
  for (std::size_t a : anchors) {
    const long k = static_cast<long>(a);
    for (long d : {-2L, -1L}) s.insert(k + d);
    for (long d = 1; d <= static_cast<long>(n_prop); ++d) s.insert(k + d);
  }
  std::vector<std::size_t> out;
  for (long v : s) {
    if (v < 0 || v >= static_cast<long>(frames)) continue;
    if (std::find(anchors.begin(), anchors.end(), static_cast<std::size_t>(v)) != anchors.end()) continue;
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

// Boundary pixel coordinates: foreground pixels touching background or the
// frame edge through a 4-neighbour.
inline std::vector<std::pair<long, long>> boundary_pixels(const anchorseg::BinaryMask& m) {
  std::vector<std::pair<long, long>> out;
  const long h = static_cast<long>(m.height), w = static_cast<long>(m.width);
  auto fg = [&](long y, long x) {
    return y >= 0 && x >= 0 && y < h && x < w && m(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  };
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      if (fg(y, x) && (!fg(y - 1, x) || !fg(y + 1, x) || !fg(y, x - 1) || !fg(y, x + 1))) out.emplace_back(y, x);
  return out;
}

// Maximum cardinality matching by BFS augmenting paths over a dense
// distance table (Edmonds-Karp on the unit-capacity flow network).
inline std::size_t max_matching(const std::vector<std::pair<long, long>>& a, const std::vector<std::pair<long, long>>& b,
                                double radius) {
  const std::size_t na = a.size(), nb = b.size();
  std::vector<std::vector<char>> ok(na, std::vector<char>(nb, 0));
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      const double dy = static_cast<double>(a[i].first - b[j].first);
      const double dx = static_cast<double>(a[i].second - b[j].second);
      ok[i][j] = std::sqrt(dy * dy + dx * dx) <= radius + 1e-12;
    }
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> match_a(na, none), match_b(nb, none);
  std::size_t flow = 0;
  while (true) {
    // BFS from every free left vertex over alternating paths.
    std::vector<std::size_t> parent_b(nb, none);
    std::queue<std::size_t> q;
    std::vector<char> seen_a(na, 0);
    for (std::size_t i = 0; i < na; ++i)
      if (match_a[i] == none) {
        q.push(i);
        seen_a[i] = 1;
      }
    std::size_t end_b = none;
    while (!q.empty() && end_b == none) {
      const std::size_t i = q.front();
      q.pop();
      for (std::size_t j = 0; j < nb && end_b == none; ++j) {
        if (!ok[i][j] || parent_b[j] != none) continue;
        parent_b[j] = i;
        if (match_b[j] == none) end_b = j;
        else if (!seen_a[match_b[j]]) {
          seen_a[match_b[j]] = 1;
          q.push(match_b[j]);
        }
      }
    }
    if (end_b == none) break;
    for (std::size_t j = end_b; j != none;) {
      const std::size_t i = parent_b[j];
      const std::size_t prev = match_a[i];
      match_a[i] = j;
      match_b[j] = i;
      j = prev;
    }
    ++flow;
  }
  return flow;
}

inline double boundary_f(const anchorseg::BinaryMask& pred, const anchorseg::BinaryMask& gt, double tol) {
  const auto pb = boundary_pixels(pred), gb = boundary_pixels(gt);
  if (pb.empty() && gb.empty()) return 1.0;
  if (pb.empty() || gb.empty()) return 0.0;
  const double diag = std::sqrt(static_cast<double>(pred.height * pred.height + pred.width * pred.width));
  const double r = std::ceil(tol * diag);
  const double m = static_cast<double>(max_matching(pb, gb, r));
  const double precision = m / static_cast<double>(pb.size()), recall = m / static_cast<double>(gb.size());
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

// Central differences of a scalar function of a tensor.
inline Tensor central_diff(const std::function<double(const Tensor&)>& f, const Tensor& x, double h = 1e-6) {
  Tensor g(x.shape());
  Tensor xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    xp[i] = v + h;
    const double fp = f(xp);
    xp[i] = v - h;
    const double fm = f(xp);
    xp[i] = v;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// max |a - n| / max(max |n|, floor): the error relative to the gradient's scale.
inline double grad_rel_error(const Tensor& analytic, const Tensor& numeric, double floor = 1e-8) {
  double scale = floor, err = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    scale = std::max(scale, std::abs(numeric[i]));
    err = std::max(err, std::abs(analytic[i] - numeric[i]));
  }
  return err / scale;
}

}  // namespace oracle
