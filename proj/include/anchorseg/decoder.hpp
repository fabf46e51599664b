#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <string>
#include <vector>

#include "anchorseg/linear.hpp"
#include "anchorseg/mask.hpp"
#include "anchorseg/tokenizer.hpp"

namespace anchorseg {

inline constexpr std::size_t kFeatureGrid = 64;

/// Fixed convolutional pyramid standing in for the segmentation-aware
/// vision encoder: an s x s stride-s conv (s = H / 64) to `hidden` channels,
/// ReLU, then a 1x1 conv to C channels.
struct StubVisionEncoder {
  Conv2d patch;  // [s, s, 3, hidden]
  Conv2d lift;   // [1, 1, hidden, C]

  static StubVisionEncoder seeded(std::size_t frame_size, std::size_t channels, std::uint64_t seed,
                                  std::size_t hidden = 8) {
    if (frame_size == 0 || frame_size % kFeatureGrid != 0) {
      throw DimensionError("stub encoder: frame size " + std::to_string(frame_size) + " not a multiple of 64");
    }
    const std::size_t s = frame_size / kFeatureGrid;
    return {Conv2d::seeded(s, 3, hidden, s, 0, seed, "encoder.patch"),
            Conv2d::seeded(1, hidden, channels, 1, 0, seed, "encoder.lift")};
  }

  std::size_t channels() const { return lift.out_channels(); }

  /// RGB frame [H, W, 3] -> features [64, 64, C].
  Tensor encode(const Tensor& frame) const {
    require_rank(frame, 3, "stub encoder");
    if (frame.extent(2) != 3) throw DimensionError("stub encoder: frame must have 3 channels");
    const std::size_t s = patch.size();
    if (frame.extent(0) != kFeatureGrid * s || frame.extent(1) != kFeatureGrid * s) {
      throw DimensionError("stub encoder: frame " + shape_string(frame.shape()) + " does not tile a 64x64 grid");
    }
    Tensor h = patch.apply(frame);
    relu_inplace(h);
    return lift.apply(h);
  }

  // Feature of an interior pixel of a uniformly colored frame.
  std::vector<double> encode_uniform(std::span<const double> rgb) const {
    auto h = patch.apply_uniform(rgb);
    for (double& v : h) v = v > 0.0 ? v : 0.0;
    return lift.apply_uniform(h);
  }
};

struct DecoderOutput {
  Tensor logits;  // [H, W]
  double occlusion_logit = 0.0;
  double predicted_iou = 0.0;  // logistic-squashed, in [0, 1]
};

/// Bilinear resize with half-pixel centers (align_corners = false).
inline Tensor resize_bilinear(const Tensor& src, std::size_t out_h, std::size_t out_w) {
  require_rank(src, 2, "resize_bilinear");
  const std::size_t ih = src.extent(0), iw = src.extent(1);
  Tensor out({out_h, out_w});
  const double sy = static_cast<double>(ih) / static_cast<double>(out_h);
  const double sx = static_cast<double>(iw) / static_cast<double>(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(ih - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy), y1 = std::min(y0 + 1, ih - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(iw - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx), x1 = std::min(x0 + 1, iw - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = src(y0, x0) * (1.0 - wx) + src(y0, x1) * wx;
      const double bot = src(y1, x0) * (1.0 - wx) + src(y1, x1) * wx;
      out(y, x) = top * (1.0 - wy) + bot * wy;
    }
  }
  return out;
}

inline double logistic(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// Reference mask head.
///
/// Pixel features are projected to D; a prompted logit is the max over prompt
/// tokens of <z(y,x), token> / sqrt(D), and a propagated logit uses a single
/// readout token instead. Logits are bilinearly resized to the frame size.
struct MaskDecoder {
  LinearMap pixel_proj;                 // C -> D
  std::vector<double> propagate_token;  // D
  std::vector<double> occ_readout;      // D
  std::vector<double> iou_readout;      // D
  std::size_t out_height = 128, out_width = 128;

  static MaskDecoder seeded(std::size_t channels, std::size_t dim, std::size_t out_size, std::uint64_t seed) {
    MaskDecoder d{LinearMap::seeded(channels, dim, seed, "decoder.pixel_proj", false), {}, {}, {}, out_size, out_size};
    SeededUniform rng(seed, "decoder.readouts");
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    for (auto* v : {&d.propagate_token, &d.occ_readout, &d.iou_readout}) {
      v->resize(dim);
      for (double& x : *v) x = rng.symmetric(bound);
    }
    return d;
  }

  std::size_t dim() const { return pixel_proj.out_dim(); }

  /// Prompt-conditioned decoding; prompt is [N, 1, D] (or [N, D]).
  DecoderOutput decode_prompted(const Tensor& features, const Tensor& prompt) const {
    const std::size_t n = prompt.extent(0);
    const std::size_t pd = prompt.shape().back();
    if (prompt.size() != n * pd || pd != dim()) {
      throw DimensionError("decode_prompted: prompt " + shape_string(prompt.shape()) + " does not match D=" +
                           std::to_string(dim()));
    }
    return decode(features, prompt.reshaped({n, pd}));
  }

  /// Memory-conditioned decoding with the learned propagate readout.
  DecoderOutput decode_propagated(const Tensor& conditioned) const {
    return decode(conditioned, Tensor({1, dim()}, propagate_token));
  }

 private:
  DecoderOutput decode(const Tensor& features, const Tensor& tokens) const {
    require_rank(features, 3, "decoder features");
    const std::size_t h = features.extent(0), w = features.extent(1), c = features.extent(2);
    if (c != pixel_proj.in_dim()) {
      throw DimensionError("decoder: features have " + std::to_string(c) + " channels, expected " +
                           std::to_string(pixel_proj.in_dim()));
    }
    const Tensor z = pixel_proj.apply(features.reshaped({h * w, c}));
    const std::size_t d = dim();
    const double inv = 1.0 / std::sqrt(static_cast<double>(d));
    Tensor low({h, w});
    std::vector<double> mean(d, 0.0);
    for (std::size_t p = 0; p < h * w; ++p) {
      auto zp = z.row(p);
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < tokens.extent(0); ++t) best = std::max(best, dot(zp, tokens.row(t)) * inv);
      low[p] = best;
      for (std::size_t k = 0; k < d; ++k) mean[k] += zp[k];
    }
    for (double& m : mean) m /= static_cast<double>(h * w);
    DecoderOutput out;
    out.logits = (h == out_height && w == out_width) ? low : resize_bilinear(low, out_height, out_width);
    out.occlusion_logit = dot(mean, occ_readout);
    out.predicted_iou = logistic(dot(mean, iou_readout));
    require_finite(out.logits, "decoder logits");
    return out;
  }
};

template <class D>
concept MaskDecoderLike = requires(const D& d, const Tensor& t) {
  { d.decode_prompted(t, t) } -> std::same_as<DecoderOutput>;
  { d.decode_propagated(t) } -> std::same_as<DecoderOutput>;
};

}  // namespace anchorseg
