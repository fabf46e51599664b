#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "anchorseg/linear.hpp"
#include "anchorseg/random.hpp"
#include "anchorseg/tensor.hpp"

namespace anchorseg {

/// Square-kernel 2-D convolution over a channels-last frame [H, W, C_in].
struct Conv2d {
  Tensor kernel;               // [k, k, C_in, C_out]
  std::optional<Tensor> bias;  // [C_out]
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t size() const { return kernel.extent(0); }
  std::size_t in_channels() const { return kernel.extent(2); }
  std::size_t out_channels() const { return kernel.extent(3); }

  /// Weights uniform in +-1/sqrt(k*k*C_in), drawn kernel-first then bias.
  static Conv2d seeded(std::size_t k, std::size_t c_in, std::size_t c_out, std::size_t stride, std::size_t padding,
                       std::uint64_t seed, const std::string& name, bool with_bias = true) {
    SeededUniform rng(seed, name);
    const double bound = 1.0 / std::sqrt(static_cast<double>(k * k * c_in));
    Conv2d conv{Tensor({k, k, c_in, c_out}), std::nullopt, stride, padding};
    for (double& w : conv.kernel.data()) w = rng.symmetric(bound);
    if (with_bias) {
      Tensor b({c_out});
      for (double& v : b.data()) v = rng.symmetric(bound);
      conv.bias = std::move(b);
    }
    return conv;
  }

  std::size_t out_extent(std::size_t in) const { return (in + 2 * padding - size()) / stride + 1; }

  Tensor apply(const Tensor& x) const {
    require_rank(x, 3, "Conv2d::apply");
    if (x.extent(2) != in_channels()) {
      throw DimensionError("Conv2d: input has " + std::to_string(x.extent(2)) + " channels, kernel expects " +
                           std::to_string(in_channels()));
    }
    const std::size_t h = x.extent(0), w = x.extent(1), k = size(), ci = in_channels(), co = out_channels();
    if (h + 2 * padding < k || w + 2 * padding < k) throw DimensionError("Conv2d: input smaller than kernel");
    const std::size_t ho = out_extent(h), wo = out_extent(w);
    Tensor y({ho, wo, co});
    const double* kd = kernel.data().data();
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double* out = y.data().data() + (oy * wo + ox) * co;
        if (bias) std::copy(bias->data().begin(), bias->data().end(), out);
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const double* in = x.data().data() + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * ci;
            const double* kk = kd + (ky * k + kx) * ci * co;
            for (std::size_t c = 0; c < ci; ++c) {
              const double v = in[c];
              if (v == 0.0) continue;
              const double* kr = kk + c * co;
              for (std::size_t o = 0; o < co; ++o) out[o] += v * kr[o];
            }
          }
        }
      }
    }
    return y;
  }

  // Response at an interior pixel of a spatially constant input.
  std::vector<double> apply_uniform(std::span<const double> v) const {
    std::vector<double> out(out_channels(), 0.0);
    if (bias) std::copy(bias->data().begin(), bias->data().end(), out.begin());
    const std::size_t k = size(), ci = in_channels(), co = out_channels();
    for (std::size_t t = 0; t < k * k; ++t)
      for (std::size_t c = 0; c < ci; ++c)
        for (std::size_t o = 0; o < co; ++o) out[o] += v[c] * kernel[(t * ci + c) * co + o];
    return out;
  }
};

inline void relu_inplace(Tensor& t) {
  for (double& v : t.data()) v = v > 0.0 ? v : 0.0;
}

/// Per-frame segmentation features, [H', W', T, C].
struct FeatureVolume {
  Tensor data;

  std::size_t height() const { return data.extent(0); }
  std::size_t width() const { return data.extent(1); }
  std::size_t frames() const { return data.extent(2); }
  std::size_t channels() const { return data.extent(3); }

  Tensor frame(std::size_t t) const {
    if (t >= frames()) throw IndexError("FeatureVolume::frame out of range");
    const std::size_t h = height(), w = width(), n = frames(), c = channels();
    Tensor f({h, w, c});
    for (std::size_t p = 0; p < h * w; ++p)
      for (std::size_t k = 0; k < c; ++k) f[p * c + k] = data[(p * n + t) * c + k];
    return f;
  }

  static FeatureVolume stack(const std::vector<Tensor>& frames) {
    if (frames.empty()) throw DimensionError("FeatureVolume::stack: no frames");
    const auto& s = frames.front().shape();
    const std::size_t h = s.at(0), w = s.at(1), c = s.at(2), n = frames.size();
    FeatureVolume v{Tensor({h, w, n, c})};
    for (std::size_t t = 0; t < n; ++t) {
      if (frames[t].shape() != s) throw DimensionError("FeatureVolume::stack: frame shape mismatch");
      for (std::size_t p = 0; p < h * w; ++p)
        for (std::size_t k = 0; k < c; ++k) v.data[(p * n + t) * c + k] = frames[t][p * c + k];
    }
    return v;
  }
};

/// Video tokens [T, G, D] with one (t, h, w) triple per token, frame-major and
/// row-major inside the grid.
struct TokenSequence {
  Tensor tokens;
  std::size_t grid_h = 0, grid_w = 0;
  std::vector<std::array<std::int64_t, 3>> positions;

  std::size_t frames() const { return tokens.extent(0); }
  std::size_t per_frame() const { return tokens.extent(1); }
  std::size_t dim() const { return tokens.extent(2); }
  std::size_t count() const { return frames() * per_frame(); }

  // [(T*G), D] view with temporal and spatial axes merged.
  Tensor merged() const { return tokens.reshaped({count(), dim()}); }
};

/// Frame-aware tokenizer: three 3x3 stride-2 convs (padding 1, channel
/// preserving), optional ReLU between stages, then a C -> D projection.
struct Tokenizer {
  std::array<Conv2d, 3> convs;
  LinearMap proj;
  bool activation = false;

  static Tokenizer seeded(std::size_t channels, std::size_t dim, std::uint64_t seed, bool activation = false) {
    return Tokenizer{{Conv2d::seeded(3, channels, channels, 2, 1, seed, "tokenizer.conv0"),
                      Conv2d::seeded(3, channels, channels, 2, 1, seed, "tokenizer.conv1"),
                      Conv2d::seeded(3, channels, channels, 2, 1, seed, "tokenizer.conv2")},
                     LinearMap::seeded(channels, dim, seed, "tokenizer.proj"),
                     activation};
  }

  Tensor downsample_frame(const Tensor& frame) const {
    Tensor x = frame;
    for (std::size_t s = 0; s < convs.size(); ++s) {
      x = convs[s].apply(x);
      if (activation && s + 1 < convs.size()) relu_inplace(x);
    }
    return x;
  }

  /// [H', W', T, C] -> [H'/8, W'/8, T, C].
  FeatureVolume downsample8(const FeatureVolume& v) const {
    require_rank(v.data, 4, "downsample8");
    if (v.height() % 8 != 0 || v.width() % 8 != 0) {
      throw DimensionError("downsample8: spatial extents " + shape_string(v.data.shape()) + " not divisible by 8");
    }
    std::vector<Tensor> out;
    out.reserve(v.frames());
    for (std::size_t t = 0; t < v.frames(); ++t) out.push_back(downsample_frame(v.frame(t)));
    return FeatureVolume::stack(out);
  }

  /// [h, w, T, C] -> tokens [T, h*w, D].
  TokenSequence flatten_project(const FeatureVolume& x) const {
    if (x.channels() != proj.in_dim()) {
      throw DimensionError("flatten_project: projection expects " + std::to_string(proj.in_dim()) +
                           " channels, got " + std::to_string(x.channels()));
    }
    const std::size_t h = x.height(), w = x.width(), n = x.frames(), c = x.channels();
    Tensor flat({n * h * w, c});
    TokenSequence seq;
    seq.grid_h = h;
    seq.grid_w = w;
    seq.positions.reserve(n * h * w);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx) {
          const std::size_t row = (t * h + y) * w + xx;
          for (std::size_t k = 0; k < c; ++k) flat(row, k) = x.data[((y * w + xx) * n + t) * c + k];
          seq.positions.push_back({static_cast<std::int64_t>(t), static_cast<std::int64_t>(y),
                                   static_cast<std::int64_t>(xx)});
        }
    seq.tokens = proj.apply(flat).reshaped({n, h * w, proj.out_dim()});
    return seq;
  }

  TokenSequence tokenize(const FeatureVolume& v) const { return flatten_project(downsample8(v)); }

  // Token of a spatially constant feature map (interior response).
  std::vector<double> tokenize_uniform(std::span<const double> feature) const {
    std::vector<double> x(feature.begin(), feature.end());
    for (std::size_t s = 0; s < convs.size(); ++s) {
      x = convs[s].apply_uniform(x);
      if (activation && s + 1 < convs.size())
        for (double& v : x) v = v > 0.0 ? v : 0.0;
    }
    return proj.apply(std::span<const double>(x));
  }
};

}  // namespace anchorseg
