#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anchorseg/config.hpp"
#include "anchorseg/losses.hpp"
#include "anchorseg/metrics.hpp"
#include "anchorseg/model.hpp"
#include "anchorseg/synthvid.hpp"
#include "anchorseg/tdau.hpp"

namespace anchorseg {

inline ModelConfig model_config(const RunConfig& rc, std::size_t frame_size = 128) {
  ModelConfig m;
  m.frame_size = frame_size;
  m.channels = rc.uint("encoder.C");
  m.dim = rc.uint("tokenizer.D");
  m.st_tokens = rc.uint("stf.N");
  m.heads = rc.uint("stf.heads");
  m.mem_dim = rc.uint("tdau.D_mem");
  m.memory_tokens = rc.uint("tdau.memory_tokens");
  m.fifo_capacity = rc.uint("tdau.fifo_capacity");
  m.rope_base = rc.real("rope.base");
  m.tokenizer_activation = rc.flag("tokenizer.activation");
  m.grounded_gain = rc.real("stf.gain");
  m.seed = rc.uint("seed");
  const std::string& w = rc.str("model.weights");
  if (w == "reference") m.weights = WeightSet::reference;
  else if (w == "seeded") m.weights = WeightSet::seeded;
  else throw ConfigError("model.weights must be reference|seeded, got '" + w + "'");
  const std::string& t = rc.str("stf.semantic_transform");
  if (t == "grounded") m.transform = TransformKind::grounded;
  else if (t == "mlp") m.transform = TransformKind::mlp;
  else if (t == "identity") m.transform = TransformKind::identity;
  else throw ConfigError("stf.semantic_transform must be grounded|mlp|identity, got '" + t + "'");
  return m;
}

inline LossWeights loss_weights(const RunConfig& rc) {
  return {rc.real("loss.lambda_bce"), rc.real("loss.lambda_dice"), rc.real("loss.lambda_token"),
          rc.real("loss.lambda_occ"), rc.real("loss.lambda_iou")};
}

inline AnchorMode anchor_mode(const RunConfig& rc) {
  const std::string& s = rc.str("tdau.anchor_mode");
  if (s == "spaced") return AnchorMode::spaced;
  if (s == "random") return AnchorMode::random;
  throw ConfigError("tdau.anchor_mode must be spaced|random, got '" + s + "'");
}

struct InferenceSettings {
  Strategy strategy = Strategy::dynamic;
  std::size_t alpha = 3;
  AnchorMode mode = AnchorMode::spaced;
  std::uint64_t seed = 0;
  ScheduleOptions schedule;
};

inline InferenceSettings inference_settings(const RunConfig& rc) {
  InferenceSettings s;
  s.strategy = parse_strategy(rc.str("tdau.strategy"));
  s.alpha = rc.uint("tdau.alpha");
  s.mode = anchor_mode(rc);
  s.seed = rc.uint("seed");
  s.schedule.fifo_capacity = rc.uint("tdau.fifo_capacity");
  s.schedule.causal = rc.flag("tdau.causal");
  s.schedule.threshold = rc.real("decoder.threshold");
  return s;
}

/// Clip-level work shared by every anchor strategy: encoder, tokenizer,
/// fusion prompts for one query.
struct PreparedClip {
  EncodedClip encoded;
  PromptSet prompts;
};

inline PreparedClip prepare_clip(const Model& m, const synth::Clip& clip, const synth::ResolvedQuery& q) {
  PreparedClip p{encode_clip(m, clip.frames), {}};
  p.prompts = fuse(m, p.encoded.tokens, query_colors(clip.spec, q.ids));
  return p;
}

struct Inference {
  AnchorPlan plan;
  ScheduleResult result;
};

inline Inference infer_prepared(const Model& m, const PreparedClip& p, const InferenceSettings& s) {
  Inference r;
  r.plan = make_anchor_plan(s.strategy, p.encoded.features.size(), s.alpha, s.mode, s.seed);
  r.result = schedule_inference(p.encoded.features, p.prompts, r.plan, m.memory, m.decoder, s.schedule);
  return r;
}

inline const synth::ResolvedQuery& pick_query(const synth::Clip& clip, const std::string& text) {
  if (clip.queries.empty() && text.empty()) throw SpecError("clip has no queries and none was given");
  if (text.empty()) return clip.queries.front();
  for (const auto& q : clip.queries)
    if (q.text == text) return q;
  throw SpecError("query '" + text + "' is not listed in the clip manifest");
}

// ---------------------------------------------------------------------------
// Suites and ablations

inline std::vector<synth::SceneSpec> suite_specs(const RunConfig& rc) {
  const auto presets = rc.list("suite.presets");
  if (presets.empty()) throw ConfigError("suite.presets is empty");
  const std::size_t n = rc.uint("suite.clips"), frames = rc.uint("suite.frames");
  const std::uint64_t seed = rc.uint("suite.seed");
  std::vector<synth::SceneSpec> specs;
  for (std::size_t i = 0; i < n; ++i) {
    specs.push_back(synth::make_preset(presets[i % presets.size()], seed + i, frames, rc.uint("synth.size")));
  }
  return specs;
}

struct AblationCell {
  Strategy strategy = Strategy::dynamic;
  std::size_t alpha = 3;
  std::vector<FrameScores> scores;     // per clip
  std::vector<double> seconds;         // per clip, shared prefix included
  JFSummary summary;
};

struct AblationReport {
  std::vector<std::string> clip_names;
  std::vector<double> prefix_seconds;  // encoder + tokenizer + fusion, per clip
  std::vector<AblationCell> cells;

  const AblationCell& cell(Strategy s, std::size_t alpha) const {
    for (const auto& c : cells)
      if (c.strategy == s && c.alpha == alpha) return c;
    throw InvariantError("ablation: no cell for " + to_string(s) + " alpha " + std::to_string(alpha));
  }
};

/// Every strategy at tdau.alpha plus dynamic at each ablate.alphas value.
inline std::vector<std::pair<Strategy, std::size_t>> ablation_grid(const RunConfig& rc) {
  std::vector<std::pair<Strategy, std::size_t>> grid;
  auto add = [&](Strategy s, std::size_t a) {
    for (const auto& g : grid)
      if (g.first == s && g.second == a) return;
    grid.emplace_back(s, a);
  };
  for (const auto& s : rc.list("ablate.strategies")) add(parse_strategy(s), rc.uint("tdau.alpha"));
  for (auto a : rc.uint_list("ablate.alphas")) add(Strategy::dynamic, a);
  return grid;
}

/// Sees every (clip, cell) inference after it is timed.
using AblationObserver = std::function<void(const synth::Clip&, const synth::ResolvedQuery&,
                                            const InferenceSettings&, const Inference&)>;

inline AblationReport run_ablation(const RunConfig& rc, const std::vector<synth::SceneSpec>& specs,
                                   const AblationObserver& observe = {}) {
  using clock = std::chrono::steady_clock;
  const Model model = build_model(model_config(rc, rc.uint("synth.size")));
  const InferenceSettings base = inference_settings(rc);
  const double tol = rc.real("metrics.tol_fraction");
  AblationReport rep;
  for (const auto& [s, a] : ablation_grid(rc)) rep.cells.push_back({s, a, {}, {}, {}});
  for (const auto& spec : specs) {
    const synth::Clip clip = synth::generate(spec);
    const auto& q = clip.queries.at(0);
    const MaskSequence gt = clip.target_masks(q.ids);
    const auto t0 = clock::now();
    const PreparedClip prepared = prepare_clip(model, clip, q);
    const double prefix = std::chrono::duration<double>(clock::now() - t0).count();
    rep.clip_names.push_back(spec.preset + "_" + std::to_string(spec.seed));
    rep.prefix_seconds.push_back(prefix);
    for (auto& cell : rep.cells) {
      InferenceSettings s = base;
      s.strategy = cell.strategy;
      s.alpha = cell.alpha;
      const auto t1 = clock::now();
      const Inference inf = infer_prepared(model, prepared, s);
      cell.seconds.push_back(prefix + std::chrono::duration<double>(clock::now() - t1).count());
      cell.scores.push_back(evaluate_sequence(inf.result.masks, gt, tol));
      if (observe) observe(clip, q, s, inf);
    }
  }
  for (auto& cell : rep.cells) cell.summary = jf_mean(cell.scores);
  return rep;
}

}  // namespace anchorseg
