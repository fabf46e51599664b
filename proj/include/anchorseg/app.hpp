#pragma once

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "anchorseg/config.hpp"
#include "anchorseg/errors.hpp"
#include "anchorseg/netpbm.hpp"
#include "anchorseg/pipeline.hpp"
#include "anchorseg/synthvid.hpp"

namespace anchorseg::app {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { ok = 0, input_error = 2, ambiguous_query = 3, internal_error = 4 };

/// Maps the exception in flight to the documented exit code.
inline int classify(const std::exception& e) {
  if (dynamic_cast<const AmbiguityError*>(&e)) return ambiguous_query;
  if (dynamic_cast<const InvariantError*>(&e)) return internal_error;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const SpecError*>(&e) ||
      dynamic_cast<const DimensionError*>(&e) || dynamic_cast<const IndexError*>(&e) ||
      dynamic_cast<const json::exception*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) {
    return input_error;
  }
  return internal_error;
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SpecError("cannot write " + path.string());
  out << text;
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot read " + path.string());
  return json::parse(in);
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------

/// Writes a clip from a JSON scene spec file, or from the configured preset.
inline synth::Clip cmd_gen(const RunConfig& rc, const std::optional<fs::path>& spec_file, const fs::path& out) {
  synth::SceneSpec spec;
  if (spec_file) {
    std::ifstream in(*spec_file);
    if (!in) throw SpecError("cannot read scene spec " + spec_file->string());
    std::stringstream ss;
    ss << in.rdbuf();
    spec = synth::parse_spec(ss.str());
  } else {
    spec = synth::make_preset(rc.str("synth.preset"), rc.uint("seed"), rc.uint("synth.frames"), rc.uint("synth.size"));
  }
  synth::Clip clip = synth::generate(spec);
  synth::write_clip(clip, out);
  return clip;
}

inline json trace_json(const synth::ResolvedQuery& q, const InferenceSettings& s, const Inference& inf) {
  json frames = json::array();
  for (const auto& tr : inf.result.trace) {
    json tau = json::array();
    for (const auto& [k, t] : tr.tau) tau.push_back({k, t});
    frames.push_back({{"frame", tr.frame},
                      {"branch", tr.branch == Branch::anchor ? "anchor" : "propagated"},
                      {"anchors", tr.anchors},
                      {"fifo", tr.fifo},
                      {"tau", tau}});
  }
  return {{"query", {{"text", q.text}, {"ids", q.ids}, {"tokens", q.tokens}}},
          {"strategy", to_string(s.strategy)},
          {"alpha", s.alpha},
          {"effective_alpha", inf.plan.alpha},
          {"causal", s.schedule.causal},
          {"fifo_capacity", s.schedule.fifo_capacity},
          {"candidates", inf.plan.candidates},
          {"frames", frames}};
}

/// Segments one clip: pred_%04d.pgm masks, trace.json and infer.json.
inline Inference cmd_infer(const RunConfig& rc, const fs::path& clip_dir, const fs::path& out) {
  const synth::Clip clip = synth::read_clip(clip_dir);
  const std::string& text = rc.str("query");
  const synth::ResolvedQuery q = text.empty() ? pick_query(clip, text) : synth::resolve_query(clip.spec, text);
  const Model model = build_model(model_config(rc, clip.spec.height));
  if (clip.spec.height != clip.spec.width) throw SpecError("infer: frames must be square");
  const InferenceSettings s = inference_settings(rc);
  const PreparedClip prepared = prepare_clip(model, clip, q);
  Inference inf = infer_prepared(model, prepared, s);

  fs::create_directories(out);
  for (std::size_t i = 0; i < inf.result.masks.size(); ++i) {
    write_pgm(out / frame_name("pred_", inf.result.masks.frame_indices[i], ".pgm"), inf.result.masks.masks[i]);
  }
  json trace = trace_json(q, s, inf);
  trace["config"] = rc.echo();
  write_text(out / "trace.json", trace.dump(2) + "\n");

  // Per-frame head outputs and supervised loss terms against the clip's gt.
  // No language head runs at inference, so the token term is reported as 0.
  const MaskSequence gt = clip.target_masks(q.ids);
  const LossWeights w = loss_weights(rc);
  json frames = json::array();
  for (std::size_t i = 0; i < inf.result.outputs.size(); ++i) {
    const auto& o = inf.result.outputs[i];
    const auto& g = gt.masks[inf.result.masks.frame_indices[i]];
    const Tensor gt_t = mask_to_tensor(g);
    LossComponents c;
    c.bce = bce_loss(o.logits, gt_t).value;
    c.dice = dice_loss(o.logits, gt_t, rc.real("loss.dice_eps")).value;
    c.occ = occ_loss(o.occlusion_logit, g.any()).value;
    c.iou = iou_loss(o.predicted_iou, inf.result.masks.masks[i], g).value;
    frames.push_back({{"frame", inf.result.masks.frame_indices[i]},
                      {"occlusion_logit", o.occlusion_logit},
                      {"predicted_iou", o.predicted_iou},
                      {"loss", {{"bce", c.bce}, {"dice", c.dice}, {"token", c.token}, {"occ", c.occ}, {"iou", c.iou},
                                {"total", total_loss(c, w)}}}});
  }
  json report = {{"config", rc.echo()}, {"clip", clip_dir.filename().string()}, {"query", q.text}, {"frames", frames}};
  write_text(out / "infer.json", report.dump(2) + "\n");
  return inf;
}

struct EvalResult {
  FrameScores scores;
  JFSummary summary;
};

inline MaskSequence read_predictions(const fs::path& pred_dir, std::size_t frames) {
  MaskSequence seq;
  seq.tag = "prediction";
  for (std::size_t t = 0; t < frames; ++t) {
    seq.masks.push_back(read_pgm(pred_dir / frame_name("pred_", t, ".pgm")));
    seq.frame_indices.push_back(t);
  }
  seq.validate();
  return seq;
}

/// J / F / J&F of a prediction directory against a clip. The target is the
/// query recorded in pred_dir/trace.json, else `query`, else the first one.
inline EvalResult cmd_eval(const RunConfig& rc, const fs::path& pred_dir, const fs::path& clip_dir,
                           const fs::path& report) {
  const synth::Clip clip = synth::read_clip(clip_dir);
  std::string text = rc.str("query");
  if (fs::exists(pred_dir / "trace.json")) text = read_json(pred_dir / "trace.json").at("query").at("text");
  const synth::ResolvedQuery q = text.empty() ? pick_query(clip, text) : synth::resolve_query(clip.spec, text);
  const MaskSequence gt = clip.target_masks(q.ids);
  const MaskSequence pred = read_predictions(pred_dir, clip.spec.frames);
  EvalResult r;
  r.scores = evaluate_sequence(pred, gt, rc.real("metrics.tol_fraction"));
  r.summary = jf_mean({r.scores});

  const std::string name = clip_dir.filename().empty() ? clip_dir.parent_path().filename().string()
                                                       : clip_dir.filename().string();
  const auto& s = r.summary;
  std::string csv = "sequence,J,F,JF\n";
  csv += name + "," + fixed(percent_1dp(s.j), 1) + "," + fixed(percent_1dp(s.f), 1) + "," +
         fixed(percent_1dp(s.jf), 1) + "\n";
  fs::path csv_path = report;
  csv_path.replace_extension(".csv");
  write_text(csv_path, csv);
  json j = {{"config", rc.echo()},
            {"query", q.text},
            {"sequences", {{name, {{"J", percent_1dp(s.j)}, {"F", percent_1dp(s.f)}, {"JF", percent_1dp(s.jf)},
                                   {"frames", {{"J", r.scores.j}, {"F", r.scores.f}}}}}}},
            {"dataset", {{"J", percent_1dp(s.j)}, {"F", percent_1dp(s.f)}, {"JF", percent_1dp(s.jf)}}}};
  fs::path json_path = report;
  json_path.replace_extension(".json");
  write_text(json_path, j.dump(2) + "\n");
  return r;
}

/// Strategy / alpha comparison over the configured synthetic suite:
/// ablate.csv (one row per cell) and ablate.json (per strategy, per alpha).
inline AblationReport cmd_ablate(const RunConfig& rc, const fs::path& out) {
  const AblationReport rep = run_ablation(rc, suite_specs(rc));
  std::string csv = "strategy,alpha,J,F,JF,seconds_per_clip\n";
  json strategies = json::object();
  for (const auto& c : rep.cells) {
    double secs = 0.0;
    for (double v : c.seconds) secs += v;
    secs /= static_cast<double>(c.seconds.size());
    const auto& s = c.summary;
    csv += to_string(c.strategy) + "," + std::to_string(c.alpha) + "," + fixed(percent_1dp(s.j), 1) + "," +
           fixed(percent_1dp(s.f), 1) + "," + fixed(percent_1dp(s.jf), 1) + "," + fixed(secs, 4) + "\n";
    json per_clip = json::array();
    for (std::size_t i = 0; i < c.scores.size(); ++i) {
      const JFSummary one = jf_mean({c.scores[i]});
      per_clip.push_back({{"sequence", rep.clip_names[i]}, {"JF", percent_1dp(one.jf)}});
    }
    strategies[to_string(c.strategy)][std::to_string(c.alpha)] = {
        {"J", percent_1dp(s.j)}, {"F", percent_1dp(s.f)}, {"JF", percent_1dp(s.jf)},
        {"seconds_per_clip", secs}, {"clips", per_clip}};
  }
  fs::create_directories(out);
  write_text(out / "ablate.csv", csv);
  write_text(out / "ablate.json", json{{"config", rc.echo()}, {"strategies", strategies}}.dump(2) + "\n");
  return rep;
}

inline constexpr std::array<double, 3> kOverlayTint = {1.0, 0.5, 0.0};

/// frame where the mask is 0, 0.5 * frame + 0.5 * tint where it is 1.
inline Tensor overlay(const Tensor& frame, const BinaryMask& mask) {
  if (frame.extent(0) != mask.height || frame.extent(1) != mask.width) {
    throw DimensionError("overlay: mask extent differs from frame");
  }
  Tensor out = frame;
  for (std::size_t p = 0; p < mask.bits.size(); ++p)
    if (mask.bits[p])
      for (std::size_t c = 0; c < 3; ++c) out[p * 3 + c] = 0.5 * frame[p * 3 + c] + 0.5 * kOverlayTint[c];
  return out;
}

inline void cmd_render(const fs::path& clip_dir, const fs::path& pred_dir, const fs::path& out) {
  const synth::Clip clip = synth::read_clip(clip_dir);
  const MaskSequence pred = read_predictions(pred_dir, clip.spec.frames);
  fs::create_directories(out);
  for (std::size_t t = 0; t < clip.frames.size(); ++t) {
    write_ppm(out / frame_name("overlay_", t, ".ppm"), overlay(clip.frames[t], pred.masks[t]));
  }
}

}  // namespace anchorseg::app
