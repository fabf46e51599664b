#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "anchorseg/attention.hpp"
#include "anchorseg/decoder.hpp"
#include "anchorseg/mask.hpp"
#include "anchorseg/random.hpp"
#include "anchorseg/stf.hpp"

namespace anchorseg {

using FrameIndex = std::size_t;
using FrameSet = std::vector<FrameIndex>;  // sorted ascending unless stated otherwise

inline constexpr std::size_t kMaxClipFrames = 32;

// ---------------------------------------------------------------------------
// Anchor candidates and per-frame anchor retrieval

enum class AnchorMode { spaced, random };

inline std::size_t inference_anchor_count(std::size_t frames) { return std::max<std::size_t>(1, frames / 4); }

// k distinct draws from [0, n), sorted. Partial Fisher-Yates.
inline FrameSet sample_distinct(std::size_t n, std::size_t k, std::uint64_t seed, std::string_view stream) {
  SeededUniform rng(seed, stream);
  std::vector<FrameIndex> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  FrameSet out(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(out.begin(), out.end());
  return out;
}

/// K = max(1, floor(T/4)) candidates. `spaced`: k_i = floor(i*T/K); `random`:
/// K distinct seeded draws.
inline FrameSet select_inference_anchors(std::size_t frames, AnchorMode mode = AnchorMode::spaced,
                                         std::uint64_t seed = 0) {
  if (frames < 1) throw ConfigError("select_inference_anchors: T_seg must be >= 1");
  const std::size_t k = inference_anchor_count(frames);
  if (mode == AnchorMode::random) return sample_distinct(frames, k, seed, "tdau.anchor_candidates");
  FrameSet out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = i * frames / k;
  return out;
}

/// First min(alpha, |A|) candidates by increasing |k - t|; ties go to the
/// lower frame index. Result is in distance order.
inline FrameSet nearest_anchors(const FrameSet& candidates, FrameIndex t, std::size_t alpha) {
  if (candidates.empty()) throw ConfigError("nearest_anchors: empty candidate set");
  FrameSet sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  auto dist = [t](FrameIndex k) { return k > t ? k - t : t - k; };
  std::stable_sort(sorted.begin(), sorted.end(), [&](FrameIndex a, FrameIndex b) { return dist(a) < dist(b); });
  sorted.resize(std::min(alpha, sorted.size()));
  return sorted;
}

enum class Strategy { dynamic, first, uniform3, random3, clip_guided };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::dynamic: return "dynamic";
    case Strategy::first: return "first";
    case Strategy::uniform3: return "uniform3";
    case Strategy::random3: return "random3";
    case Strategy::clip_guided: return "clip_guided";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "dynamic") return Strategy::dynamic;
  if (s == "first") return Strategy::first;
  if (s == "uniform3") return Strategy::uniform3;
  if (s == "random3") return Strategy::random3;
  if (s == "clip_guided") return Strategy::clip_guided;
  throw ConfigError("unknown anchor strategy '" + s + "'");
}

/// Candidate set plus the anchor subset each frame conditions on.
struct AnchorPlan {
  FrameSet candidates;
  std::vector<FrameSet> per_frame_nearest;
  std::size_t alpha = 3;
  std::size_t frames = 0;
  Strategy strategy = Strategy::dynamic;

  bool is_anchor(FrameIndex t) const { return std::binary_search(candidates.begin(), candidates.end(), t); }
};

/// Builds the plan for one of the anchor strategies.
///
/// `dynamic` retrieves the alpha nearest candidates per frame. `first` (and
/// `clip_guided`, which has no selection model here and falls back to it)
/// anchors frame 0 only. `uniform3` / `random3` fix three global anchors that
/// every frame uses.
inline AnchorPlan make_anchor_plan(Strategy strategy, std::size_t frames, std::size_t alpha,
                                   AnchorMode mode = AnchorMode::spaced, std::uint64_t seed = 0) {
  if (frames < 1) throw ConfigError("anchor plan: T_seg must be >= 1");
  if (alpha < 1) throw ConfigError("anchor plan: alpha must be >= 1");
  AnchorPlan plan;
  plan.frames = frames;
  plan.strategy = strategy;
  bool fixed = true;
  switch (strategy) {
    case Strategy::dynamic:
      plan.candidates = select_inference_anchors(frames, mode, seed);
      fixed = false;
      break;
    case Strategy::first:
    case Strategy::clip_guided:
      plan.candidates = {0};
      break;
    case Strategy::uniform3: {
      const std::size_t k = std::min<std::size_t>(3, frames);
      for (std::size_t i = 0; i < k; ++i) plan.candidates.push_back(i * frames / k);
      break;
    }
    case Strategy::random3:
      plan.candidates = sample_distinct(frames, 3, seed, "tdau.random3");
      break;
  }
  plan.alpha = fixed ? plan.candidates.size() : alpha;
  for (FrameIndex t = 0; t < frames; ++t) {
    plan.per_frame_nearest.push_back(fixed ? plan.candidates : nearest_anchors(plan.candidates, t, alpha));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Training-time sampling

struct TrainPlan {
  FrameSet anchors;
  FrameSet prop_frames;
  std::size_t n_prop = 5;
  std::uint64_t seed = 0;
  std::size_t frames = 0;

  FrameSet all_frames() const {
    FrameSet all = anchors;
    all.insert(all.end(), prop_frames.begin(), prop_frames.end());
    std::sort(all.begin(), all.end());
    return all;
  }
};

/// Propagation targets around given anchors: {k-2, k-1} and {k+1..k+n_prop}
/// clipped to [0, T), minus the anchors, sorted.
inline FrameSet propagation_frames(const FrameSet& anchors, std::size_t frames, std::size_t n_prop) {
  std::set<FrameIndex> prop;
  for (FrameIndex k : anchors) {
    for (std::size_t back = 1; back <= 2; ++back)
      if (k >= back) prop.insert(k - back);
    for (std::size_t fwd = 1; fwd <= n_prop; ++fwd)
      if (k + fwd < frames) prop.insert(k + fwd);
  }
  for (FrameIndex k : anchors) prop.erase(k);
  return {prop.begin(), prop.end()};
}

inline TrainPlan sample_training_plan(std::size_t frames, std::size_t alpha, std::size_t n_prop, std::uint64_t seed) {
  if (alpha < 1) throw ConfigError("sample_training_plan: alpha must be >= 1");
  if (frames < 1) throw ConfigError("sample_training_plan: T_seg must be >= 1");
  TrainPlan plan;
  plan.n_prop = n_prop;
  plan.seed = seed;
  plan.frames = frames;
  plan.anchors = sample_distinct(frames, std::min(alpha, frames), seed, "tdau.train_anchors");
  plan.prop_frames = propagation_frames(plan.anchors, frames, n_prop);
  return plan;
}

// ---------------------------------------------------------------------------
// Memory

enum class MemoryKind { anchor, fifo };

struct MemoryEntry {
  FrameIndex frame = 0;
  MemoryKind kind = MemoryKind::fifo;
  Tensor h;  // [M_tokens, D_mem]
};

/// Parameters of the memory path.
///
/// encode: 1x1 map over [features ; mask] (C + 1 -> D_mem), then block-average
/// pooling to token_side^2 tokens. attention: queries are current-frame pixel
/// features (C), keys/values memory tokens (D_mem), output back to C.
/// pe_table row 0 is the anchor encoding, row tau the FIFO entry tau frames back.
struct MemoryParams {
  LinearMap encode;
  AttentionParams attention;
  Tensor pe_table;  // [P + 1, D_mem]
  std::size_t token_side = 4;

  std::size_t fifo_capacity() const { return pe_table.extent(0) - 1; }
  std::size_t dim() const { return encode.out_dim(); }

  static MemoryParams seeded(std::size_t channels, std::size_t mem_dim, std::size_t fifo_capacity,
                             std::size_t memory_tokens, std::uint64_t seed) {
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(memory_tokens))));
    if (side * side != memory_tokens || side == 0) throw ConfigError("memory tokens must be a positive square");
    if (fifo_capacity < 1) throw ConfigError("fifo capacity must be >= 1");
    MemoryParams p{LinearMap::seeded(channels + 1, mem_dim, seed, "tdau.memory_encode"),
                   AttentionParams::seeded(channels, mem_dim, mem_dim, channels, 1, seed, "tdau.memory_attention"),
                   Tensor({fifo_capacity + 1, mem_dim}), side};
    SeededUniform rng(seed, "tdau.pe_table");
    const double bound = 1.0 / std::sqrt(static_cast<double>(mem_dim));
    for (double& v : p.pe_table.data()) v = rng.symmetric(bound);
    return p;
  }
};

// Area-mean downsampling of a mask to [h, w]; extents must divide exactly.
inline Tensor downsample_mask(const BinaryMask& mask, std::size_t h, std::size_t w) {
  if (mask.height % h != 0 || mask.width % w != 0) {
    throw DimensionError("mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                         " not reducible to " + std::to_string(h) + "x" + std::to_string(w));
  }
  const std::size_t fy = mask.height / h, fx = mask.width / w;
  Tensor out({h, w});
  const double inv = 1.0 / static_cast<double>(fy * fx);
  for (std::size_t y = 0; y < mask.height; ++y)
    for (std::size_t x = 0; x < mask.width; ++x) out(y / fy, x / fx) += mask(y, x);
  for (double& v : out.data()) v *= inv;
  return out;
}

/// Encodes a predicted mask together with its frame features into memory tokens.
inline MemoryEntry encode_memory(const MemoryParams& params, const Tensor& features, const BinaryMask& mask,
                                 FrameIndex frame, MemoryKind kind = MemoryKind::fifo) {
  require_rank(features, 3, "encode_memory");
  const std::size_t h = features.extent(0), w = features.extent(1), c = features.extent(2);
  if (params.encode.in_dim() != c + 1) throw DimensionError("encode_memory: channel count mismatch");
  const std::size_t side = params.token_side;
  if (h % side != 0 || w % side != 0) throw DimensionError("encode_memory: grid not divisible into memory tokens");
  const Tensor m = downsample_mask(mask, h, w);
  Tensor x({h * w, c + 1});
  for (std::size_t p = 0; p < h * w; ++p) {
    std::copy_n(features.data().data() + p * c, c, x.data().data() + p * (c + 1));
    x(p, c) = m[p];
  }
  const Tensor proj = params.encode.apply(x);
  const std::size_t dm = params.dim(), by = h / side, bx = w / side;
  Tensor pooled({side * side, dm});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx) {
      auto src = proj.row(y * w + xx);
      auto dst = pooled.row((y / by) * side + xx / bx);
      for (std::size_t k = 0; k < dm; ++k) dst[k] += src[k];
    }
  const double inv = 1.0 / static_cast<double>(by * bx);
  for (double& v : pooled.data()) v *= inv;
  require_finite(pooled, "encode_memory");
  return MemoryEntry{frame, kind, std::move(pooled)};
}

/// Anchor store plus a bounded FIFO of recent entries (oldest evicted first).
class MemoryBank {
 public:
  explicit MemoryBank(std::size_t fifo_capacity) : capacity_(fifo_capacity) {
    if (capacity_ < 1) throw ConfigError("MemoryBank: capacity must be >= 1");
  }

  void add_anchor(MemoryEntry e) {
    e.kind = MemoryKind::anchor;
    const FrameIndex k = e.frame;
    anchors_.insert_or_assign(k, std::move(e));
  }

  void push_fifo(MemoryEntry e) {
    if (!fifo_.empty() && e.frame <= fifo_.back().frame) {
      throw InvariantError("MemoryBank: FIFO frames must be strictly increasing");
    }
    e.kind = MemoryKind::fifo;
    fifo_.push_back(std::move(e));
    if (fifo_.size() > capacity_) fifo_.pop_front();
  }

  bool has_anchor(FrameIndex k) const { return anchors_.contains(k); }
  const MemoryEntry& anchor(FrameIndex k) const {
    auto it = anchors_.find(k);
    if (it == anchors_.end()) throw InvariantError("MemoryBank: no anchor entry for frame " + std::to_string(k));
    return it->second;
  }
  const std::deque<MemoryEntry>& fifo() const { return fifo_; }
  std::size_t capacity() const { return capacity_; }

  /// FIFO frames inside the window {t - P, ..., t - 1}, most recent first.
  FrameSet fifo_window(FrameIndex t) const {
    FrameSet out;
    for (auto it = fifo_.rbegin(); it != fifo_.rend(); ++it) {
      if (it->frame < t && it->frame + capacity_ >= t) out.push_back(it->frame);
    }
    return out;
  }

  const MemoryEntry& fifo_entry(FrameIndex k) const {
    for (const auto& e : fifo_)
      if (e.frame == k) return e;
    throw InvariantError("MemoryBank: no FIFO entry for frame " + std::to_string(k));
  }

 private:
  std::size_t capacity_;
  std::map<FrameIndex, MemoryEntry> anchors_;
  std::deque<MemoryEntry> fifo_;
};

struct MemoryTokens {
  Tensor tokens;                                      // [(|anchors| + |fifo|) * M, D_mem]
  std::vector<std::pair<FrameIndex, std::size_t>> tau;  // (frame, tau) in concatenation order
};

/// H_t = [h_k + PE(tau(k))]: anchors first (tau 0, in the given order), then
/// FIFO entries most recent first with tau = clamp(t - k, 1, P).
inline MemoryTokens build_memory_tokens(const MemoryBank& bank, const Tensor& pe_table, FrameIndex t,
                                        const FrameSet& anchors, const FrameSet& fifo) {
  const std::size_t p = pe_table.extent(0) - 1;
  std::vector<Tensor> parts;
  MemoryTokens out;
  auto append = [&](const MemoryEntry& e, std::size_t tau) {
    if (e.h.extent(1) != pe_table.extent(1)) throw DimensionError("memory entry width != pe_table width");
    Tensor h = e.h;
    for (std::size_t r = 0; r < h.extent(0); ++r) {
      auto row = h.row(r);
      auto pe = pe_table.row(tau);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += pe[c];
    }
    parts.push_back(std::move(h));
    out.tau.emplace_back(e.frame, tau);
  };
  for (FrameIndex k : anchors) append(bank.anchor(k), 0);
  FrameSet recent = fifo;
  std::sort(recent.begin(), recent.end(), std::greater<>());
  for (FrameIndex k : recent) {
    if (k >= t) throw InvariantError("FIFO entry " + std::to_string(k) + " is not before frame " + std::to_string(t));
    append(bank.fifo_entry(k), std::clamp<std::size_t>(t - k, 1, p));
  }
  if (parts.empty()) return out;
  out.tokens = concat_rows(parts);
  return out;
}

/// S~_seg(t) = CrossAttn(S_seg(t), H_t) over the pixel tokens of one frame.
inline Tensor memory_attention(const MemoryParams& params, const Tensor& features, const Tensor& memory) {
  require_rank(features, 3, "memory_attention");
  if (memory.rank() != 2 || memory.size() == 0) {
    throw InvariantError("memory_attention: empty memory at a propagated frame");
  }
  const std::size_t h = features.extent(0), w = features.extent(1), c = features.extent(2);
  Tensor out = cross_attention(features.reshaped({h * w, c}), memory, params.attention);
  return out.reshaped({h, w, params.attention.o.out_dim()});
}

// ---------------------------------------------------------------------------
// Schedulers

enum class Branch { anchor, propagated };

struct FrameTrace {
  FrameIndex frame = 0;
  Branch branch = Branch::anchor;
  FrameSet anchors;  // anchor memories used (distance order), empty on anchor frames
  FrameSet fifo;     // FIFO memories used, most recent first
  std::vector<std::pair<FrameIndex, std::size_t>> tau;
};

struct ScheduleOptions {
  std::size_t fifo_capacity = 6;
  bool causal = false;
  double threshold = 0.0;
};

struct ScheduleResult {
  MaskSequence masks;
  std::vector<DecoderOutput> outputs;
  std::vector<FrameTrace> trace;
};

namespace detail {

template <MaskDecoderLike Decoder>
class Propagator {
 public:
  Propagator(const std::vector<Tensor>& features, const PromptSet& prompts, const MemoryParams& memory,
             const Decoder& decoder, const ScheduleOptions& opts)
      : features_(features), prompts_(prompts), memory_(memory), decoder_(decoder), opts_(opts),
        bank_(opts.fifo_capacity) {
    if (memory.fifo_capacity() < opts.fifo_capacity) {
      throw ConfigError("schedule: pe_table has fewer rows than the FIFO capacity needs");
    }
  }

  void decode_anchor(FrameIndex k) {
    DecoderOutput out = decoder_.decode_prompted(features_[k], prompts_.slice_frame(k));
    BinaryMask mask = binarize(out.logits, opts_.threshold);
    bank_.add_anchor(encode_memory(memory_, features_[k], mask, k, MemoryKind::anchor));
    decoded_.insert_or_assign(k, Decoded{std::move(out), std::move(mask)});
  }

  // Emits frame t; anchors must already be decoded.
  void emit_anchor(FrameIndex t, ScheduleResult& r) {
    auto& d = decoded_.at(t);
    bank_.push_fifo(bank_.anchor(t));
    FrameTrace tr;
    tr.frame = t;
    tr.branch = Branch::anchor;
    push(r, t, d.output, d.mask, std::move(tr));
  }

  void emit_propagated(FrameIndex t, const FrameSet& anchors, ScheduleResult& r) {
    FrameTrace tr;
    tr.frame = t;
    tr.branch = Branch::propagated;
    tr.anchors = anchors;
    tr.fifo = bank_.fifo_window(t);
    MemoryTokens mem = build_memory_tokens(bank_, memory_.pe_table, t, tr.anchors, tr.fifo);
    if (mem.tau.empty()) {
      throw InvariantError("schedule: propagated frame " + std::to_string(t) + " has no memory");
    }
    tr.tau = std::move(mem.tau);
    const Tensor conditioned = memory_attention(memory_, features_[t], mem.tokens);
    DecoderOutput out = decoder_.decode_propagated(conditioned);
    BinaryMask mask = binarize(out.logits, opts_.threshold);
    bank_.push_fifo(encode_memory(memory_, features_[t], mask, t));
    push(r, t, std::move(out), std::move(mask), std::move(tr));
  }

  FrameSet decoded_anchors_before(FrameIndex t) const {
    FrameSet out;
    for (const auto& [k, _] : decoded_)
      if (k < t) out.push_back(k);
    return out;
  }

 private:
  struct Decoded {
    DecoderOutput output;
    BinaryMask mask;
  };

  static void push(ScheduleResult& r, FrameIndex t, DecoderOutput out, BinaryMask mask, FrameTrace tr) {
    r.masks.masks.push_back(std::move(mask));
    r.masks.frame_indices.push_back(t);
    r.outputs.push_back(std::move(out));
    r.trace.push_back(std::move(tr));
  }

  const std::vector<Tensor>& features_;
  const PromptSet& prompts_;
  const MemoryParams& memory_;
  const Decoder& decoder_;
  ScheduleOptions opts_;
  MemoryBank bank_;
  std::map<FrameIndex, Decoded> decoded_;
};

}  // namespace detail

/// Inference: anchor frames are decoded from their prompt slice, every other
/// frame from memory of its plan anchors plus the FIFO window. By default all
/// anchors are decoded up front so a frame may condition on later anchors;
/// `causal` restricts retrieval to anchors before t.
template <MaskDecoderLike Decoder>
ScheduleResult schedule_inference(const std::vector<Tensor>& features, const PromptSet& prompts,
                                  const AnchorPlan& plan, const MemoryParams& memory, const Decoder& decoder,
                                  const ScheduleOptions& opts = {}) {
  const std::size_t frames = features.size();
  if (prompts.frames() != frames || plan.frames != frames || plan.per_frame_nearest.size() != frames) {
    throw DimensionError("schedule_inference: plan/prompt length mismatch (features " + std::to_string(frames) +
                         ", prompts " + std::to_string(prompts.frames()) + ", plan " + std::to_string(plan.frames) +
                         ")");
  }
  detail::Propagator<Decoder> run(features, prompts, memory, decoder, opts);
  ScheduleResult r;
  r.masks.tag = "prediction";
  if (!opts.causal)
    for (FrameIndex k : plan.candidates) run.decode_anchor(k);
  for (FrameIndex t = 0; t < frames; ++t) {
    if (plan.is_anchor(t)) {
      if (opts.causal) run.decode_anchor(t);
      run.emit_anchor(t, r);
      continue;
    }
    FrameSet anchors = plan.per_frame_nearest[t];
    if (opts.causal) {
      const FrameSet seen = run.decoded_anchors_before(t);
      if (seen.empty()) throw InvariantError("causal schedule: no anchor decoded before frame " + std::to_string(t));
      anchors = plan.strategy == Strategy::dynamic ? nearest_anchors(seen, t, plan.alpha) : seen;
    }
    run.emit_propagated(t, anchors, r);
  }
  return r;
}

/// Training: anchors from prompts, propagation frames conditioned on every
/// training anchor plus the FIFO window; only plan frames are predicted.
template <MaskDecoderLike Decoder>
ScheduleResult schedule_training(const std::vector<Tensor>& features, const PromptSet& prompts,
                                 const TrainPlan& plan, const MemoryParams& memory, const Decoder& decoder,
                                 const ScheduleOptions& opts = {}) {
  const std::size_t frames = features.size();
  if (prompts.frames() != frames || plan.frames != frames) {
    throw DimensionError("schedule_training: plan/prompt length mismatch");
  }
  detail::Propagator<Decoder> run(features, prompts, memory, decoder, opts);
  ScheduleResult r;
  r.masks.tag = "prediction";
  for (FrameIndex k : plan.anchors) run.decode_anchor(k);
  for (FrameIndex t : plan.all_frames()) {
    if (std::binary_search(plan.anchors.begin(), plan.anchors.end(), t)) {
      run.emit_anchor(t, r);
    } else {
      run.emit_propagated(t, plan.anchors, r);
    }
  }
  return r;
}

}  // namespace anchorseg
