#pragma once

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "anchorseg/random.hpp"
#include "anchorseg/tensor.hpp"

namespace anchorseg {

/// Affine map y = W x + b with W of shape [d_out, d_in].
struct LinearMap {
  Tensor weight;                // [d_out, d_in]
  std::optional<Tensor> bias;   // [d_out]

  std::size_t in_dim() const { return weight.extent(1); }
  std::size_t out_dim() const { return weight.extent(0); }

  /// Seeded init: every weight (row-major) then every bias entry is drawn
  /// uniform in +-1/sqrt(d_in) from `SeededUniform(seed, name)`.
  static LinearMap seeded(std::size_t d_in, std::size_t d_out, std::uint64_t seed, std::string_view name,
                          bool with_bias = true) {
    SeededUniform rng(seed, name);
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
    LinearMap m{Tensor({d_out, d_in}), std::nullopt};
    for (double& w : m.weight.data()) w = rng.symmetric(bound);
    if (with_bias) {
      Tensor b({d_out});
      for (double& v : b.data()) v = rng.symmetric(bound);
      m.bias = std::move(b);
    }
    return m;
  }

  static LinearMap identity(std::size_t dim, double gain = 1.0) {
    LinearMap m{Tensor({dim, dim}), std::nullopt};
    for (std::size_t i = 0; i < dim; ++i) m.weight(i, i) = gain;
    return m;
  }

  static LinearMap from_weight(Tensor w) { return LinearMap{std::move(w), std::nullopt}; }

  void zero_bias() {
    if (bias) std::fill(bias->data().begin(), bias->data().end(), 0.0);
  }

  /// Applies the map along the last axis of a 2-D input [rows, d_in].
  Tensor apply(const Tensor& x) const {
    require_rank(x, 2, "LinearMap::apply");
    if (x.extent(1) != in_dim()) {
      throw DimensionError("LinearMap input dim " + std::to_string(x.extent(1)) + " != " +
                           std::to_string(in_dim()));
    }
    const std::size_t rows = x.extent(0), din = in_dim(), dout = out_dim();
    // W^T so the inner loop runs over contiguous outputs
    std::vector<double> wt(din * dout);
    for (std::size_t o = 0; o < dout; ++o)
      for (std::size_t i = 0; i < din; ++i) wt[i * dout + o] = weight(o, i);
    Tensor y({rows, dout});
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = x.data().data() + r * din;
      double* yr = y.data().data() + r * dout;
      if (bias) std::copy(bias->data().begin(), bias->data().end(), yr);
      for (std::size_t i = 0; i < din; ++i) {
        const double xi = xr[i];
        if (xi == 0.0) continue;
        const double* wr = wt.data() + i * dout;
        for (std::size_t o = 0; o < dout; ++o) yr[o] += xi * wr[o];
      }
    }
    return y;
  }

  /// Single vector form.
  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != in_dim()) throw DimensionError("LinearMap input dim mismatch");
    std::vector<double> y(out_dim());
    for (std::size_t o = 0; o < out_dim(); ++o) {
      double s = bias ? (*bias)[o] : 0.0;
      for (std::size_t i = 0; i < in_dim(); ++i) s += weight(o, i) * x[i];
      y[o] = s;
    }
    return y;
  }
};

}  // namespace anchorseg
