// Acceptance gate: runs every criterion and prints one PASS/FAIL line each.
// Exit status is nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "anchorseg/app.hpp"
#include "support/oracles.hpp"
#include "support/trace_validator.hpp"

using namespace anchorseg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome algorithm_oracles() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    for (std::size_t frames = 1; frames <= 32; ++frames) {
      // a fresh seeded candidate set per (seed, T), plus the spaced one
      const FrameSet sets[2] = {select_inference_anchors(frames, AnchorMode::random, seed),
                                select_inference_anchors(frames)};
      for (const auto& cands : sets)
        for (std::size_t alpha = 1; alpha <= 8; ++alpha)
          for (std::size_t t = 0; t < frames; ++t) {
            ++checked;
            o.require(nearest_anchors(cands, t, alpha) == oracle::nearest(cands, t, alpha),
                      "nearest_anchors differs at T=" + std::to_string(frames) + " alpha=" + std::to_string(alpha));
          }
    }

  std::vector<std::size_t> sizes;
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> t_dist(1, 32), a_dist(1, 8), n_dist(0, 8);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const bool canonical = seed % 2 == 0;
    const std::size_t frames = canonical ? 32 : t_dist(rng), alpha = canonical ? 3 : a_dist(rng);
    const std::size_t n_prop = canonical ? 5 : n_dist(rng);
    const TrainPlan p = sample_training_plan(frames, alpha, n_prop, seed);
    const std::string at = " (seed " + std::to_string(seed) + ")";
    o.require(p.anchors.size() == std::min(alpha, frames), "anchor count" + at);
    o.require(std::is_sorted(p.anchors.begin(), p.anchors.end()) &&
                  std::adjacent_find(p.anchors.begin(), p.anchors.end()) == p.anchors.end(),
              "anchors not sorted/distinct" + at);
    o.require(p.anchors.empty() || p.anchors.back() < frames, "anchor out of range" + at);
    o.require(p.prop_frames == oracle::propagation_targets(p.anchors, frames, n_prop), "propagation set" + at);
    for (FrameIndex f : p.prop_frames)
      o.require(!std::binary_search(p.anchors.begin(), p.anchors.end(), f), "anchor in propagation set" + at);
    o.require(sample_training_plan(frames, alpha, n_prop, seed).anchors == p.anchors, "not deterministic" + at);
    if (canonical) sizes.push_back(p.prop_frames.size());
  }
  std::sort(sizes.begin(), sizes.end());
  const double median = 0.5 * static_cast<double>(sizes[sizes.size() / 2 - 1] + sizes[sizes.size() / 2]);
  o.require(median >= 10 && median <= 20, "median |I_prop| " + fmt("%.1f", median) + " outside [10, 20]");
  const double secs = seconds_since(t0);
  o.require(secs < 10.0, "runtime " + fmt("%.1f", secs) + " s");
  if (o.pass)
    o.detail = std::to_string(checked) + " nearest queries, 1000 plans, median |I_prop| = " + fmt("%.1f", median) +
               ", " + fmt("%.2f", secs) + " s";
  return o;
}

Outcome anchor_count_contract() {
  Outcome o;
  for (std::size_t frames = 1; frames <= 32; ++frames) {
    const FrameSet a = select_inference_anchors(frames);
    o.require(a.size() == std::max<std::size_t>(1, frames / 4), "K wrong at T=" + std::to_string(frames));
    o.require(select_inference_anchors(frames, AnchorMode::random, frames).size() == a.size(),
              "random-mode K wrong at T=" + std::to_string(frames));
  }
  const FrameSet a32 = select_inference_anchors(32);
  o.require(a32.size() == 8, "K at T=32");
  for (std::size_t i = 0; i < a32.size(); ++i) o.require(a32[i] == 4 * i, "stride at T=32 is not 4");
  if (o.pass) o.detail = "K = max(1, T/4) for T in 1..32; T=32 gives {0,4,...,28}";
  return o;
}

Outcome gradient_suite() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::bernoulli_distribution coin(0.4);
  auto gt = [&](Shape s) {
    Tensor g(std::move(s));
    for (double& v : g.data()) v = coin(rng) ? 1.0 : 0.0;
    return g;
  };
  const double h = 1e-6;
  double worst[5] = {0, 0, 0, 0, 0};
  for (int rep = 0; rep < 100; ++rep) {
    const Tensor z = oracle::random_tensor({3, 3}, rng, -4, 4), g = gt({3, 3});
    worst[0] = std::max(worst[0], oracle::grad_rel_error(
                                      bce_loss(z, g).grad,
                                      oracle::central_diff([&](const Tensor& x) { return bce_loss(x, g).value; }, z, h)));
    const Tensor zd = oracle::random_tensor({4, 4}, rng, -4, 4), gd = gt({4, 4});
    worst[1] = std::max(worst[1],
                        oracle::grad_rel_error(
                            dice_loss(zd, gd).grad,
                            oracle::central_diff([&](const Tensor& x) { return dice_loss(x, gd).value; }, zd, h)));
    const Tensor zt = oracle::random_tensor({2, 3}, rng, -3, 3);
    const std::vector<std::size_t> targets = {static_cast<std::size_t>(rng() % 3), static_cast<std::size_t>(rng() % 3)};
    worst[2] = std::max(worst[2],
                        oracle::grad_rel_error(
                            token_ce(zt, targets).grad,
                            oracle::central_diff([&](const Tensor& x) { return token_ce(x, targets).value; }, zt, h)));
    const double zo = oracle::random_tensor({1}, rng, -6, 6)[0];
    const bool vis = coin(rng);
    const double num_o = (occ_loss(zo + h, vis).value - occ_loss(zo - h, vis).value) / (2 * h);
    worst[3] = std::max(worst[3], std::abs(occ_loss(zo, vis).grad - num_o) / std::max(std::abs(num_o), 1e-8));
    // predicted IoU drawn away from the kink at the realized IoU
    BinaryMask p(3, 3), q(3, 3);
    for (auto& b : p.bits) b = coin(rng);
    for (auto& b : q.bits) b = coin(rng);
    const double actual = mask_iou(p, q);
    double pi = oracle::random_tensor({1}, rng, 0, 1)[0];
    if (std::abs(pi - actual) < 1e-3) pi = actual < 0.5 ? actual + 0.25 : actual - 0.25;
    const double num_i = (iou_loss(pi + h, p, q).value - iou_loss(pi - h, p, q).value) / (2 * h);
    worst[4] = std::max(worst[4], std::abs(iou_loss(pi, p, q).grad - num_i) / std::abs(num_i));
  }
  const char* names[5] = {"bce", "dice", "token", "occ", "iou"};
  std::string detail = "max rel err";
  for (int i = 0; i < 5; ++i) {
    o.require(worst[i] < 1e-4, std::string(names[i]) + " rel err " + fmt("%.2e", worst[i]));
    detail += std::string(" ") + names[i] + "=" + fmt("%.1e", worst[i]);
  }
  const double total = total_loss({1, 1, 1, 1, 1});
  o.require(std::abs(total - 3.10) < 1e-12, "default-weight total " + fmt("%.6f", total));
  const double secs = seconds_since(t0);
  o.require(secs < 30.0, "runtime " + fmt("%.1f", secs) + " s");
  if (o.pass) o.detail = detail + ", total(1,...,1) = " + fmt("%.2f", total) + ", " + fmt("%.2f", secs) + " s";
  return o;
}

Outcome rope_attention_numerics() {
  Outcome o;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pos(-64, 64);
  double worst_norm = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t hd = 2 * (3 + static_cast<std::size_t>(rng() % 30));
    const Tensor x = oracle::random_tensor({5, hd}, rng, -3, 3);
    std::vector<std::array<std::int64_t, 3>> thw;
    std::vector<std::int64_t> tpos;
    for (int i = 0; i < 5; ++i) {
      thw.push_back({pos(rng), pos(rng), pos(rng)});
      tpos.push_back(pos(rng));
    }
    for (const Tensor& y : {apply_rope(x, make_3d_plan(thw, hd)), apply_rope(x, make_temporal_plan(tpos, hd))})
      for (std::size_t i = 0; i < 5; ++i) {
        double a = 0, b = 0;
        for (double v : x.row(i)) a += v * v;
        for (double v : y.row(i)) b += v * v;
        worst_norm = std::max(worst_norm, std::abs(std::sqrt(a) - std::sqrt(b)));
      }
  }
  o.require(worst_norm <= 1e-12, "norm drift " + fmt("%.2e", worst_norm));

  // second-fusion logits under a global frame shift of both sides
  double worst_shift = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t d = 6 * (2 + rng() % 11), n = 1 + rng() % 4, frames = 1 + rng() % 6;
    const std::size_t gh = 1 + rng() % 3, gw = 1 + rng() % 3;
    const std::int64_t shift = pos(rng);
    const auto params = AttentionParams::seeded(d, 1, static_cast<std::uint64_t>(rep), "accept.second");
    const Tensor f = oracle::random_tensor({n, d}, rng);
    const Tensor video = oracle::random_tensor({frames * gh * gw, d}, rng);
    std::vector<std::array<std::int64_t, 3>> k0, k1;
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t y = 0; y < gh; ++y)
        for (std::size_t x = 0; x < gw; ++x) {
          k0.push_back({static_cast<std::int64_t>(t), static_cast<std::int64_t>(y), static_cast<std::int64_t>(x)});
          k1.push_back({static_cast<std::int64_t>(t) + shift, static_cast<std::int64_t>(y), static_cast<std::int64_t>(x)});
        }
    const ExpandedTokens e0 = temporal_expand(f, frames, d);
    ExpandedTokens e1 = e0;
    for (auto& p : e1.plan.positions) p[0] += shift;
    const RotationPlan q0 = align_temporal_to_3d(e0.plan), q1 = align_temporal_to_3d(e1.plan);
    const RotationPlan kp0 = make_3d_plan(k0, d), kp1 = make_3d_plan(k1, d);
    const Tensor q = e0.tokens.reshaped({n * frames, d});
    const Tensor l0 = attention_logits(q, video, params, &q0, &kp0);
    const Tensor l1 = attention_logits(q, video, params, &q1, &kp1);
    worst_shift = std::max(worst_shift, max_abs_diff(l0, l1));
  }
  o.require(worst_shift <= 1e-9, "shift drift " + fmt("%.2e", worst_shift));

  double worst_sum = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const Tensor s = softmax_rows(oracle::random_tensor({8, 8}, rng, -60, 60));
    for (std::size_t i = 0; i < 8; ++i) {
      double sum = 0.0;
      for (double v : s.row(i)) sum += v;
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    }
  }
  o.require(worst_sum <= 1e-12, "softmax row sum off by " + fmt("%.2e", worst_sum));

  double worst_attn = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t heads = 1 + rep % 2;
    const auto p = AttentionParams::seeded(8, heads, static_cast<std::uint64_t>(rep), "accept.attn");
    const Tensor q = oracle::random_tensor({8, 8}, rng), kv = oracle::random_tensor({8, 8}, rng);
    worst_attn = std::max(worst_attn, oracle::max_rel_diff(cross_attention(q, kv, p), oracle::attention(q, kv, p)));
  }
  o.require(worst_attn <= 1e-12, "attention vs oracle " + fmt("%.2e", worst_attn));
  if (o.pass)
    o.detail = "norm " + fmt("%.1e", worst_norm) + ", shift " + fmt("%.1e", worst_shift) + ", row sum " +
               fmt("%.1e", worst_sum) + ", attention " + fmt("%.1e", worst_attn);
  return o;
}

Outcome metric_oracle() {
  Outcome o;
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<std::size_t> side(1, 6);
  std::uniform_real_distribution<double> tol(0.0, 0.45), density(0.05, 0.95);
  auto random_mask = [&](std::size_t h, std::size_t w, double p) {
    BinaryMask m(h, w);
    std::bernoulli_distribution b(p);
    for (auto& v : m.bits) v = b(rng);
    return m;
  };
  std::size_t mismatches = 0;
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t h = side(rng), w = side(rng);
    const double d = density(rng);
    const double t = rep % 5 == 0 ? 0.008 : tol(rng);
    const BinaryMask a = random_mask(h, w, d), b = random_mask(h, w, d);
    mismatches += boundary_f(a, b, t) != oracle::boundary_f(a, b, t);

    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
      inter += a.bits[i] && b.bits[i];
      uni += a.bits[i] || b.bits[i];
    }
    const double j = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    o.require(region_j(a, b) == j, "region_j differs from direct count");

    auto seq = [](BinaryMask m) {
      MaskSequence s;
      s.masks = {std::move(m)};
      s.frame_indices = {0};
      return s;
    };
    const MaskSequence x = seq(a), y = seq(b), z = seq(random_mask(h, w, 0.5));
    o.require(aggregate_or({x, y}).masks == aggregate_or({y, x}).masks, "OR not commutative");
    o.require(aggregate_or({aggregate_or({x, y}), z}).masks == aggregate_or({x, aggregate_or({y, z})}).masks,
              "OR not associative");
    o.require(aggregate_or({x, x}).masks == x.masks, "OR not idempotent");
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " boundary_f mismatches vs exhaustive matcher");
  if (o.pass) o.detail = "500 pairs on grids <= 6x6: boundary_f, region_j and OR properties exact";
  return o;
}

// Criteria 6-8 and 10 share one run over the suite.
struct SuiteRun {
  AblationReport report;
  double seconds = 0.0;
  std::size_t clips = 0, absent_at_start = 0;
  std::size_t traces = 0;
  std::vector<std::string> violations;
};

SuiteRun run_suite() {
  RunConfig rc;
  rc.set("encoder.C", "32");
  const auto specs = suite_specs(rc);
  SuiteRun run;
  run.clips = specs.size();
  for (const auto& spec : specs) {
    const synth::Clip clip = synth::generate(spec);
    bool visible = false;
    for (std::size_t id : clip.queries.at(0).ids) visible = visible || clip.visibility.at(id)[0];
    run.absent_at_start += !visible;
  }
  const std::size_t p = rc.uint("tdau.fifo_capacity");
  const bool spaced = rc.str("tdau.anchor_mode") == "spaced";
  const auto observe = [&](const synth::Clip& clip, const synth::ResolvedQuery& q, const InferenceSettings& s,
                           const Inference& inf) {
    const auto trace = nlohmann::json::parse(app::trace_json(q, s, inf).dump());
    const trace_check::Expectation e{clip.spec.frames, p, s.alpha, to_string(s.strategy), spaced};
    for (const auto& v : trace_check::validate(trace, e))
      run.violations.push_back(clip.spec.preset + "_" + std::to_string(clip.spec.seed) + " " + to_string(s.strategy) +
                               " a=" + std::to_string(s.alpha) + ": " + v);
    ++run.traces;
  };
  const auto t0 = std::chrono::steady_clock::now();
  run.report = run_ablation(rc, specs, observe);
  run.seconds = seconds_since(t0);
  return run;
}

double jf_points(const AblationReport& r, Strategy s, std::size_t alpha) { return 100.0 * r.cell(s, alpha).summary.jf; }

Outcome strategy_ordering(const SuiteRun& run) {
  Outcome o;
  const double dyn = jf_points(run.report, Strategy::dynamic, 3);
  const double first = jf_points(run.report, Strategy::first, 3);
  const double uni = jf_points(run.report, Strategy::uniform3, 3);
  const double rnd = jf_points(run.report, Strategy::random3, 3);
  const double share = static_cast<double>(run.absent_at_start) / static_cast<double>(run.clips);
  o.require(run.clips == 50, "suite has " + std::to_string(run.clips) + " clips");
  o.require(share >= 0.4, "target absent at frame 0 in only " + fmt("%.0f", 100 * share) + "% of clips");
  o.require(dyn - first >= 5.0, "dynamic - first = " + fmt("%.2f", dyn - first));
  o.require(dyn >= uni - 0.5, "dynamic " + fmt("%.2f", dyn) + " < uniform3 " + fmt("%.2f", uni) + " - 0.5");
  o.require(run.seconds < 300.0, "suite runtime " + fmt("%.0f", run.seconds) + " s");
  o.detail = "J&F dynamic " + fmt("%.1f", dyn) + ", first " + fmt("%.1f", first) + ", uniform3 " + fmt("%.1f", uni) +
             ", random3 " + fmt("%.1f", rnd) + "; absent at frame 0: " + fmt("%.0f", 100 * share) + "%; " +
             fmt("%.0f", run.seconds) + " s" + (o.pass ? "" : " -- " + o.detail);
  return o;
}

const std::size_t kAlphas[] = {2, 3, 4, 6, 8};

Outcome alpha_scaling(const SuiteRun& run) {
  Outcome o;
  std::string detail = "J&F by alpha:";
  double prev = -1.0;
  for (std::size_t a : kAlphas) {
    const double jf = jf_points(run.report, Strategy::dynamic, a);
    if (prev >= 0.0) o.require(jf >= prev - 0.5, "drop of " + fmt("%.2f", prev - jf) + " at alpha " + std::to_string(a));
    prev = jf;
    detail += " " + std::to_string(a) + "=" + fmt("%.2f", jf);
  }
  o.require(run.seconds < 600.0, "suite runtime " + fmt("%.0f", run.seconds) + " s");
  o.detail = detail + (o.pass ? "" : " -- " + o.detail);
  return o;
}

Outcome efficiency_direction(const SuiteRun& run) {
  Outcome o;
  auto per_clip = [&](std::size_t a) {
    const auto& s = run.report.cell(Strategy::dynamic, a).seconds;
    double sum = 0.0;
    for (double v : s) sum += v;
    return sum / static_cast<double>(s.size());
  };
  std::string detail = "s/clip by alpha:";
  double prev = 0.0;
  for (std::size_t a : kAlphas) {
    const double s = per_clip(a);
    o.require(s >= prev, "time decreases at alpha " + std::to_string(a));
    prev = s;
    detail += " " + std::to_string(a) + "=" + fmt("%.3f", s);
  }
  const double growth = per_clip(6) / per_clip(2) - 1.0;
  o.require(growth < 0.25, "alpha 2 -> 6 increase " + fmt("%.1f", 100 * growth) + "%");
  o.detail = detail + "; alpha 2 -> 6 +" + fmt("%.1f", 100 * growth) + "%" + (o.pass ? "" : " -- " + o.detail);
  return o;
}

std::map<std::string, std::string> dir_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    out[e.path().filename().string()] = {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  return out;
}

Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "anchorseg_acceptance";
  fs::remove_all(root);
  std::size_t files = 0;
  for (const std::string preset : {"reappear", "occlusion", "distractor"}) {
    RunConfig rc;
    rc.set("encoder.C", "32");
    rc.set("synth.preset", preset);
    rc.set("synth.frames", "16");
    rc.set("seed", "17");
    app::cmd_gen(rc, std::nullopt, root / preset / "clip");
    app::cmd_infer(rc, root / preset / "clip", root / preset / "a");
    app::cmd_infer(rc, root / preset / "clip", root / preset / "b");
    const auto a = dir_bytes(root / preset / "a"), b = dir_bytes(root / preset / "b");
    o.require(a == b, preset + ": outputs differ between runs");
    o.require(a.count("trace.json") && a.count("infer.json") && a.count("pred_0015.pgm"), preset + ": missing outputs");
    files += a.size();
  }
  fs::remove_all(root);
  if (o.pass) o.detail = "3 clips x 2 runs, " + std::to_string(files) + " files byte-identical";
  return o;
}

Outcome schedule_conformance(const SuiteRun& run) {
  Outcome o;
  o.require(run.traces == run.clips * run.report.cells.size(), "missing traces");
  o.require(run.violations.empty(),
            std::to_string(run.violations.size()) + " violations, first: " +
                (run.violations.empty() ? std::string() : run.violations.front()));
  if (o.pass)
    o.detail = std::to_string(run.traces) + " traces (" + std::to_string(run.clips) + " clips x " +
               std::to_string(run.report.cells.size()) + " settings) conform";
  return o;
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<Outcome()>>> early = {
      {"algorithm oracles", algorithm_oracles},
      {"anchor-count contract", anchor_count_contract},
      {"gradient suite", gradient_suite},
      {"rope/attention numerics", rope_attention_numerics},
      {"metric oracle", metric_oracle},
  };
  int failed = 0;
  int index = 0;
  auto report = [&](const std::string& name, const Outcome& o) {
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", ++index, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };
  for (const auto& [name, f] : early) report(name, guarded(f));

  SuiteRun run;
  std::string suite_error;
  try {
    run = run_suite();
  } catch (const std::exception& e) {
    suite_error = e.what();
  }
  auto with_suite = [&](const std::function<Outcome(const SuiteRun&)>& f) {
    if (!suite_error.empty()) return Outcome{false, "suite run failed: " + suite_error};
    return guarded([&] { return f(run); });
  };
  report("strategy ordering", with_suite(strategy_ordering));
  report("alpha scaling", with_suite(alpha_scaling));
  report("efficiency direction", with_suite(efficiency_direction));
  report("end-to-end determinism", guarded(determinism));
  report("schedule conformance", with_suite(schedule_conformance));
  std::printf("%d of %d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
