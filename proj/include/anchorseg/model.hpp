#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anchorseg/decoder.hpp"
#include "anchorseg/stf.hpp"
#include "anchorseg/synthvid.hpp"
#include "anchorseg/tdau.hpp"
#include "anchorseg/tokenizer.hpp"

namespace anchorseg {

enum class WeightSet { reference, seeded };
enum class TransformKind { grounded, mlp, identity };

struct ModelConfig {
  std::size_t frame_size = 128;
  std::size_t channels = 256;  // C
  std::size_t dim = 64;        // D
  std::size_t st_tokens = 8;   // N
  std::size_t heads = 1;
  std::size_t mem_dim = 16;
  std::size_t memory_tokens = 16;
  std::size_t fifo_capacity = 6;
  double rope_base = 10000.0;
  bool tokenizer_activation = false;
  WeightSet weights = WeightSet::reference;
  TransformKind transform = TransformKind::grounded;
  double grounded_gain = 8.0;
  std::uint64_t seed = 0;
};

/// All stages of the segmentation pipeline.
struct Model {
  ModelConfig config;
  StubVisionEncoder encoder;
  Tokenizer tokenizer;
  SpatioTemporalFusion fusion;
  MemoryParams memory;
  MaskDecoder decoder;
};

namespace reference {

// Hand-set weights under which the untrained pipeline is a color-grounded
// segmenter. Feature pixels carry an 8-slot code
//   [red, green, blue, yellow, magenta, cyan, white, 1]
// (color indicators, occluder indicator, constant) lifted into C channels;
// tokens hold the block average of that code in D dims.

inline constexpr std::size_t kCode = 8;
inline constexpr std::size_t kColors = 6;
inline constexpr std::size_t kWhite = 6;
inline constexpr std::size_t kConst = 7;

// Memory layout: code slots 0..6, background fraction 7, memory value 8,
// recency 9.
inline constexpr std::size_t kBackground = 7;
inline constexpr std::size_t kValue = 8;
inline constexpr std::size_t kRecency = 9;
inline constexpr std::size_t kMemSlots = 10;

struct Gains {
  double prompt_color = 320.0;   // second fusion color-match sharpness
  double prompt_time = 8.0;      // second fusion temporal locality
  double prompt_scale = 32.0;    // prompted mask logit scale
  double prompt_floor = 0.3;     // color fraction a prompt token must exceed
  double memory_match = 150.0;   // memory attention sharpness
  double memory_recency = 4.0;
  double memory_margin = 0.05;   // value offset of unmasked memory
  double propagate_scale = 64.0;
  double initial_scale = 0.01;   // first fusion output, kept small
};

// Patch detectors: slot j responds with w[j] . rgb + b[j] (before ReLU), one
// for each palette color, the white occluder, and a constant.
inline constexpr double kDetector[kCode][4] = {{1, -1, -1, 0}, {-1, 1, -1, 0}, {-1, -1, 1, 0}, {1, 1, -1, -1},
                                               {1, -1, 1, -1}, {-1, 1, 1, -1}, {1, 1, 1, -2},  {0, 0, 0, 1}};

inline StubVisionEncoder encoder(const ModelConfig& cfg) {
  if (cfg.frame_size % kFeatureGrid != 0) throw DimensionError("reference encoder: frame size not a multiple of 64");
  const std::size_t s = cfg.frame_size / kFeatureGrid;
  StubVisionEncoder e{Conv2d{Tensor({s, s, 3, kCode}), Tensor({kCode}), s, 0},
                      Conv2d{Tensor({1, 1, kCode, cfg.channels}), std::nullopt, 1, 0}};
  const double inv = 1.0 / static_cast<double>(s * s);
  for (std::size_t p = 0; p < s * s; ++p)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t j = 0; j < kCode; ++j) e.patch.kernel[(p * 3 + c) * kCode + j] = kDetector[j][c] * inv;
  for (std::size_t j = 0; j < kCode; ++j) (*e.patch.bias)[j] = kDetector[j][3];
  for (std::size_t j = 0; j < kCode; ++j) e.lift.kernel[j * cfg.channels + j] = 1.0;
  return e;
}

// Channel-preserving 2x2 block average as a 3x3 stride-2 pad-1 kernel.
inline Conv2d pooling_conv(std::size_t channels) {
  Conv2d c{Tensor({3, 3, channels, channels}), std::nullopt, 2, 1};
  for (std::size_t ky = 1; ky < 3; ++ky)
    for (std::size_t kx = 1; kx < 3; ++kx)
      for (std::size_t ch = 0; ch < channels; ++ch) c.kernel[((ky * 3 + kx) * channels + ch) * channels + ch] = 0.25;
  return c;
}

inline LinearMap code_projection(std::size_t channels, std::size_t dim) {
  Tensor w({dim, channels});
  for (std::size_t j = 0; j < kCode; ++j) w(j, j) = 1.0;
  return LinearMap::from_weight(std::move(w));
}

// Head-dim slots used for color matching: the last six channels, which are
// pass-through or the slowest-rotating pairs of the width chunk.
inline std::size_t color_slot(std::size_t head_dim, std::size_t c) { return head_dim - kColors + c; }

inline AttentionParams second_fusion(const ModelConfig& cfg, const Gains& g) {
  const std::size_t d = cfg.dim;
  const std::size_t chunk = axis_chunk_3d(d);
  AttentionParams p{LinearMap::from_weight(Tensor({d, d})), LinearMap::from_weight(Tensor({d, d})),
                    LinearMap::from_weight(Tensor({d, d})), LinearMap::from_weight(Tensor({d, d})), 1};
  const double inv_gain = 1.0 / cfg.grounded_gain;
  for (std::size_t c = 0; c < kColors; ++c) {
    p.q.weight(color_slot(d, c), c) = g.prompt_color * inv_gain;
    p.k.weight(color_slot(d, c), c) = 1.0;
  }
  const std::size_t time_pairs = std::min<std::size_t>(5, chunk / 2);
  for (std::size_t i = 0; i < time_pairs; ++i) {
    p.q.weight(2 * i, kConst) = g.prompt_time * inv_gain;
    p.k.weight(2 * i, kConst) = 1.0;
  }
  for (std::size_t j = 0; j < kCode; ++j) p.v.weight(j, j) = 1.0;
  // prompt code: attended colors, minus the occluder, minus a floor
  for (std::size_t c = 0; c < kColors; ++c) p.o.weight(c, c) = g.prompt_scale;
  p.o.weight(kWhite, kConst) = -g.prompt_scale;
  p.o.weight(kConst, kConst) = -g.prompt_scale * g.prompt_floor;
  return p;
}

inline MemoryParams memory(const ModelConfig& cfg, const Gains& g) {
  const std::size_t c = cfg.channels, dm = cfg.mem_dim;
  if (dm < kMemSlots) throw ConfigError("reference weights need tdau.D_mem >= " + std::to_string(kMemSlots));
  MemoryParams m = MemoryParams::seeded(c, dm, cfg.fifo_capacity, cfg.memory_tokens, cfg.seed);
  Tensor enc({dm, c + 1});
  for (std::size_t j = 0; j <= kWhite; ++j) enc(j, j) = 1.0;
  enc(kBackground, kConst) = 1.0;
  for (std::size_t j = 0; j <= kWhite; ++j) enc(kBackground, j) = -1.0;
  enc(kValue, c) = 1.0;  // mask channel
  enc(kValue, kConst) = -g.memory_margin;
  m.encode = LinearMap::from_weight(std::move(enc));

  Tensor q({dm, c}), k({dm, dm}), v({dm, dm}), o({c, dm});
  for (std::size_t j = 0; j <= kWhite; ++j) q(j, j) = g.memory_match;
  q(kBackground, kConst) = g.memory_match;
  for (std::size_t j = 0; j <= kWhite; ++j) q(kBackground, j) = -g.memory_match;
  q(kRecency, kConst) = g.memory_recency;
  for (std::size_t j = 0; j < kMemSlots; ++j)
    if (j != kValue) k(j, j) = 1.0;
  v(0, kValue) = 1.0;
  o(kConst, 0) = 1.0;
  m.attention = AttentionParams{LinearMap::from_weight(std::move(q)), LinearMap::from_weight(std::move(k)),
                                LinearMap::from_weight(std::move(v)), LinearMap::from_weight(std::move(o)), 1};
  m.pe_table = Tensor({cfg.fifo_capacity + 1, dm});
  for (std::size_t tau = 1; tau <= cfg.fifo_capacity; ++tau) {
    m.pe_table(tau, kRecency) = -0.5 * static_cast<double>(tau) / static_cast<double>(cfg.fifo_capacity);
  }
  return m;
}

inline MaskDecoder decoder(const ModelConfig& cfg, const Gains& g) {
  MaskDecoder d = MaskDecoder::seeded(cfg.channels, cfg.dim, cfg.frame_size, cfg.seed);
  d.pixel_proj = code_projection(cfg.channels, cfg.dim);
  std::fill(d.propagate_token.begin(), d.propagate_token.end(), 0.0);
  d.propagate_token[kConst] = g.propagate_scale;
  return d;
}

}  // namespace reference

inline void validate(const ModelConfig& cfg) {
  if (cfg.channels == 0 || cfg.dim == 0 || cfg.st_tokens == 0) throw ConfigError("model: zero-sized dimension");
  if (cfg.heads == 0 || cfg.dim % cfg.heads != 0) throw ConfigError("model: tokenizer.D not divisible by heads");
  if (cfg.weights == WeightSet::reference) {
    if (cfg.heads != 1) throw ConfigError("reference weights need stf.heads = 1");
    if (cfg.channels < reference::kCode) throw ConfigError("reference weights need encoder.C >= 8");
    if (cfg.dim < 48) throw ConfigError("reference weights need tokenizer.D >= 48");
  }
}

inline Model build_model(const ModelConfig& cfg) {
  validate(cfg);
  Model m{cfg,
          StubVisionEncoder::seeded(cfg.frame_size, cfg.channels, cfg.seed),
          Tokenizer::seeded(cfg.channels, cfg.dim, cfg.seed, cfg.tokenizer_activation),
          SpatioTemporalFusion{STTokenSet::seeded(cfg.st_tokens, cfg.dim, cfg.seed),
                               AttentionParams::seeded(cfg.dim, cfg.heads, cfg.seed, "stf.initial"),
                               AttentionParams::seeded(cfg.dim, cfg.heads, cfg.seed, "stf.second"),
                               IdentityTransform{}, cfg.rope_base},
          MemoryParams::seeded(cfg.channels, cfg.mem_dim, cfg.fifo_capacity, cfg.memory_tokens, cfg.seed),
          MaskDecoder::seeded(cfg.channels, cfg.dim, cfg.frame_size, cfg.seed)};
  if (cfg.transform == TransformKind::mlp) m.fusion.transform = ResidualMlp::seeded(cfg.dim, cfg.seed);
  if (cfg.weights == WeightSet::reference) {
    const reference::Gains g;
    m.encoder = reference::encoder(cfg);
    for (auto& c : m.tokenizer.convs) c = reference::pooling_conv(cfg.channels);
    m.tokenizer.proj = reference::code_projection(cfg.channels, cfg.dim);
    for (double& w : m.fusion.initial.o.weight.data()) w *= g.initial_scale;
    m.fusion.second = reference::second_fusion(cfg, g);
    m.memory = reference::memory(cfg, g);
    m.decoder = reference::decoder(cfg, g);
  }
  return m;
}

/// Appearance rows for the grounded transform: token n carries the tokenized
/// uniform-color response of target color n mod |colors|, scaled to unit norm.
inline Tensor grounding_exemplars(const Model& m, const std::vector<std::size_t>& colors) {
  if (colors.empty()) throw ConfigError("grounding: no target colors");
  const std::size_t n = m.config.st_tokens, d = m.config.dim;
  Tensor ex({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rgb8 = synth::kPalette.at(colors[i % colors.size()]);
    const std::vector<double> rgb = {rgb8[0] / 255.0, rgb8[1] / 255.0, rgb8[2] / 255.0};
    const auto tok = m.tokenizer.tokenize_uniform(m.encoder.encode_uniform(rgb));
    const double norm = std::sqrt(dot(tok, tok));
    for (std::size_t c = 0; c < d; ++c) ex(i, c) = norm > 0.0 ? tok[c] / norm : 0.0;
  }
  return ex;
}

/// Per-clip encoder and tokenizer outputs.
struct EncodedClip {
  std::vector<Tensor> features;  // [64, 64, C] per frame
  TokenSequence tokens;
};

inline EncodedClip encode_clip(const Model& m, const std::vector<Tensor>& frames) {
  EncodedClip e;
  e.features.reserve(frames.size());
  for (const auto& f : frames) e.features.push_back(m.encoder.encode(f));
  e.tokens = m.tokenizer.tokenize(FeatureVolume::stack(e.features));
  return e;
}

/// Prompts for one resolved query; `colors` feed the grounded transform.
inline PromptSet fuse(const Model& m, const TokenSequence& tokens, const std::vector<std::size_t>& colors) {
  SpatioTemporalFusion f = m.fusion;
  if (m.config.transform == TransformKind::grounded) {
    f.transform = GroundedTransform{grounding_exemplars(m, colors), m.config.grounded_gain};
  }
  return f.run(tokens);
}

inline std::vector<std::size_t> query_colors(const synth::SceneSpec& spec, const std::vector<std::size_t>& ids) {
  std::vector<std::size_t> colors;
  for (std::size_t id : ids)
    for (const auto& o : spec.objects)
      if (o.id == id) colors.push_back(o.color);
  return colors;
}

}  // namespace anchorseg
