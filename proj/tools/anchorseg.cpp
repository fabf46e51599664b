#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "anchorseg/app.hpp"

namespace fs = std::filesystem;
using namespace anchorseg;

int main(int argc, char** argv) {
  CLI::App cli{"anchorseg: anchor-based video object segmentation on synthetic clips"};
  cli.require_subcommand(1);

  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  auto common = [&](CLI::App* sub, bool out_required) {
    sub->add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override, key=value (repeatable)");
    sub->add_option("--seed", seed, "global seed");
    auto* o = sub->add_option("--out", out, "output path");
    if (out_required) o->required();
  };

  std::string spec_file, preset, clip_dir, pred_dir, query, suite_file;

  auto* gen = cli.add_subcommand("gen", "generate a synthetic clip directory");
  gen->add_option("spec", spec_file, "JSON scene spec (default: preset)");
  gen->add_option("--preset", preset, "easy|occlusion|reappear|distractor");
  common(gen, true);

  auto* infer = cli.add_subcommand("infer", "segment a clip for a query");
  infer->add_option("clip", clip_dir, "clip directory")->required();
  infer->add_option("query", query, "query text (default: first manifest query)");
  common(infer, true);

  auto* eval = cli.add_subcommand("eval", "score predictions against a clip");
  eval->add_option("pred", pred_dir, "prediction directory")->required();
  eval->add_option("clip", clip_dir, "clip directory")->required();
  common(eval, true);

  auto* ablate = cli.add_subcommand("ablate", "strategy and alpha ablation over a synthetic suite");
  ablate->add_option("suite", suite_file, "suite config file")->check(CLI::ExistingFile);
  common(ablate, true);

  auto* render = cli.add_subcommand("render", "overlay predicted masks on clip frames");
  render->add_option("clip", clip_dir, "clip directory")->required();
  render->add_option("pred", pred_dir, "prediction directory")->required();
  common(render, true);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : app::input_error;
  }

  try {
    RunConfig rc;
    if (!config_file.empty()) rc.load_file(config_file);
    if (!suite_file.empty()) rc.load_file(suite_file);
    if (!preset.empty()) rc.set("synth.preset", preset);
    if (!query.empty()) rc.set("query", query);
    for (const auto& o : overrides) rc.apply_override(o);
    if (seed) rc.set("seed", std::to_string(*seed));

    if (gen->parsed()) {
      const auto clip = app::cmd_gen(rc, spec_file.empty() ? std::nullopt : std::optional<fs::path>(spec_file), out);
      std::printf("wrote %zu frames to %s\n", clip.frames.size(), out.c_str());
    } else if (infer->parsed()) {
      const auto inf = app::cmd_infer(rc, clip_dir, out);
      std::size_t anchors = 0;
      for (const auto& t : inf.result.trace) anchors += t.branch == Branch::anchor;
      std::printf("segmented %zu frames (%zu anchor, %zu propagated) into %s\n", inf.result.trace.size(), anchors,
                  inf.result.trace.size() - anchors, out.c_str());
    } else if (eval->parsed()) {
      const auto r = app::cmd_eval(rc, pred_dir, clip_dir, out);
      std::printf("J %.1f  F %.1f  J&F %.1f\n", percent_1dp(r.summary.j), percent_1dp(r.summary.f),
                  percent_1dp(r.summary.jf));
    } else if (ablate->parsed()) {
      const auto rep = app::cmd_ablate(rc, out);
      for (const auto& c : rep.cells) {
        std::printf("%-10s alpha=%zu  J&F %.1f\n", to_string(c.strategy).c_str(), c.alpha,
                    percent_1dp(c.summary.jf));
      }
    } else if (render->parsed()) {
      app::cmd_render(clip_dir, pred_dir, out);
      std::printf("wrote overlays to %s\n", out.c_str());
    }
  } catch (const std::exception& e) {
    const int code = app::classify(e);
    std::fprintf(stderr, "anchorseg: %s\n", e.what());
    return code;
  }
  return app::ok;
}
