#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anchorseg/errors.hpp"
#include "anchorseg/mask.hpp"
#include "anchorseg/netpbm.hpp"
#include "anchorseg/random.hpp"
#include "anchorseg/tensor.hpp"

namespace anchorseg::synth {

enum class ShapeKind { circle, square, triangle };
enum class MotionKind { linear, sinusoidal };

inline constexpr std::array<const char*, 3> kShapeNames = {"circle", "square", "triangle"};
inline constexpr std::array<const char*, 6> kColorNames = {"red", "green", "blue", "yellow", "magenta", "cyan"};
inline constexpr std::array<std::array<std::uint8_t, 3>, 6> kPalette = {
    {{255, 0, 0}, {0, 255, 0}, {0, 0, 255}, {255, 255, 0}, {255, 0, 255}, {0, 255, 255}}};
inline constexpr std::array<std::uint8_t, 3> kBackground = {24, 24, 24};
inline constexpr std::array<std::uint8_t, 3> kOccluderColor = {255, 255, 255};

inline std::string shape_name(ShapeKind s) { return kShapeNames[static_cast<std::size_t>(s)]; }

inline ShapeKind parse_shape(const std::string& s) {
  for (std::size_t i = 0; i < kShapeNames.size(); ++i)
    if (s == kShapeNames[i]) return static_cast<ShapeKind>(i);
  throw SpecError("unknown shape '" + s + "'");
}

inline std::size_t parse_color(const std::string& s) {
  for (std::size_t i = 0; i < kColorNames.size(); ++i)
    if (s == kColorNames[i]) return i;
  throw SpecError("unknown color '" + s + "'");
}

/// linear: center moves by (vx, vy) per frame. sinusoidal: the same drift plus
/// amplitude * sin(2 pi t / period) added to y.
struct Motion {
  MotionKind kind = MotionKind::linear;
  double vx = 0.0, vy = 0.0;
  double amplitude = 0.0, period = 8.0;
};

struct ObjectSpec {
  std::size_t id = 0;
  ShapeKind shape = ShapeKind::circle;
  std::size_t color = 0;  // index into kPalette
  double size = 16.0;     // diameter / side, px
  double x = 64.0, y = 64.0;
  Motion motion;
  std::size_t spawn = 0;
  std::optional<std::size_t> despawn;  // first frame it is gone

  bool alive(std::size_t t) const { return t >= spawn && (!despawn || t < *despawn); }

  std::array<double, 2> center(std::size_t t) const {
    const double ft = static_cast<double>(t);
    double cx = x + motion.vx * ft, cy = y + motion.vy * ft;
    if (motion.kind == MotionKind::sinusoidal) cy += motion.amplitude * std::sin(2.0 * std::numbers::pi * ft / motion.period);
    return {cx, cy};
  }
};

/// Static white bar drawn on top of everything for frames [first, last].
struct Occluder {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open pixel rect
  std::size_t first = 0, last = 0;

  bool active(std::size_t t) const { return t >= first && t <= last; }
  bool covers(std::size_t y, std::size_t x) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

struct SceneSpec {
  std::size_t height = 128, width = 128;
  std::size_t frames = 16;
  std::vector<ObjectSpec> objects;
  std::vector<Occluder> occluders;
  std::vector<std::string> queries;
  std::uint64_t seed = 0;
  std::string preset;

  void validate() const {
    if (height == 0 || width == 0) throw SpecError("scene: empty extents");
    if (frames < 1 || frames > 32) throw SpecError("scene: T_seg must be in [1, 32], got " + std::to_string(frames));
    std::map<std::size_t, int> ids;
    for (const auto& o : objects) {
      if (++ids[o.id] > 1) throw SpecError("scene: duplicate object id " + std::to_string(o.id));
      if (!(o.size > 0.0)) throw SpecError("scene: object " + std::to_string(o.id) + " has non-positive size");
      if (o.size > static_cast<double>(std::min(height, width))) {
        throw SpecError("scene: object " + std::to_string(o.id) + " larger than the frame");
      }
      if (o.color >= kPalette.size()) throw SpecError("scene: bad color index");
      if (o.spawn >= frames) throw SpecError("scene: object " + std::to_string(o.id) + " spawns after the clip");
      if (o.despawn && *o.despawn <= o.spawn) throw SpecError("scene: despawn must follow spawn");
      if (o.motion.kind == MotionKind::sinusoidal && !(o.motion.period > 0.0)) {
        throw SpecError("scene: sinusoidal period must be positive");
      }
    }
    for (const auto& b : occluders) {
      if (b.x0 >= b.x1 || b.y0 >= b.y1 || b.x1 > width || b.y1 > height) throw SpecError("scene: bad occluder rect");
      if (b.first > b.last) throw SpecError("scene: occluder frame range reversed");
    }
  }
};

// ---------------------------------------------------------------------------
// Query grammar

inline const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> v = {"<pad>",  "the",     "all",       "moving",  "circle", "square",
                                             "triangle", "circles", "squares", "triangles", "red",  "green",
                                             "blue",   "yellow",  "magenta",   "cyan",    "left",   "right",
                                             "up",     "down"};
  return v;
}

inline std::size_t token_id(const std::string& word) {
  const auto& v = vocabulary();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] == word) return i;
  throw SpecError("query word '" + word + "' is not in the vocabulary");
}

struct ResolvedQuery {
  std::string text;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> tokens;
};

// "left" / "right" / "up" / "down" along the dominant axis of the net
// displacement between the first and last frame; empty when stationary.
inline std::string motion_direction(const ObjectSpec& o, std::size_t frames) {
  const auto a = o.center(0), b = o.center(frames - 1);
  const double dx = b[0] - a[0], dy = b[1] - a[1];
  if (dx == 0.0 && dy == 0.0) return {};
  if (std::abs(dx) >= std::abs(dy)) return dx < 0.0 ? "left" : "right";
  return dy < 0.0 ? "up" : "down";
}

inline ResolvedQuery resolve_query(const SceneSpec& spec, const std::string& text) {
  std::vector<std::string> words;
  std::istringstream ss(text);
  for (std::string w; ss >> w;) words.push_back(w);
  ResolvedQuery q{text, {}, {}};
  auto bad = [&]() { return SpecError("unsupported query '" + text + "'"); };
  if (words.empty()) throw bad();
  for (const auto& w : words) q.tokens.push_back(token_id(w));

  auto match = [&](auto pred) {
    for (const auto& o : spec.objects)
      if (pred(o)) q.ids.push_back(o.id);
  };
  bool singular = true;
  if (words[0] == "all" && words.size() == 2) {
    singular = false;
    const std::string& plural = words[1];
    if (plural.size() < 2 || plural.back() != 's') throw bad();
    const ShapeKind s = parse_shape(plural.substr(0, plural.size() - 1));
    match([&](const ObjectSpec& o) { return o.shape == s; });
  } else if (words[0] == "the" && words.size() == 2) {
    const ShapeKind s = parse_shape(words[1]);
    match([&](const ObjectSpec& o) { return o.shape == s; });
  } else if (words[0] == "the" && words.size() == 3) {
    const std::size_t c = parse_color(words[1]);
    const ShapeKind s = parse_shape(words[2]);
    match([&](const ObjectSpec& o) { return o.shape == s && o.color == c; });
  } else if (words[0] == "the" && words.size() == 4 && words[2] == "moving") {
    const ShapeKind s = parse_shape(words[1]);
    const std::string& dir = words[3];
    if (dir != "left" && dir != "right" && dir != "up" && dir != "down") throw bad();
    match([&](const ObjectSpec& o) { return o.shape == s && motion_direction(o, spec.frames) == dir; });
  } else {
    throw bad();
  }
  if (singular && q.ids.size() != 1) {
    throw AmbiguityError("query '" + text + "' matches " + std::to_string(q.ids.size()) + " objects, expected 1");
  }
  if (q.ids.empty()) throw AmbiguityError("query '" + text + "' matches no object");
  return q;
}

// ---------------------------------------------------------------------------
// Rasterization

struct Clip {
  SceneSpec spec;
  std::vector<Tensor> frames;                      // [H, W, 3] each, values k / 255
  std::map<std::size_t, MaskSequence> gt;          // by object id
  std::map<std::size_t, std::vector<bool>> visibility;
  std::vector<ResolvedQuery> queries;

  /// OR of the ground truth of a set of objects.
  MaskSequence target_masks(const std::vector<std::size_t>& ids) const;
};

inline bool shape_covers(const ObjectSpec& o, double cx, double cy, double px, double py) {
  const double r = o.size / 2.0;
  switch (o.shape) {
    case ShapeKind::circle:
      return (px - cx) * (px - cx) + (py - cy) * (py - cy) <= r * r;
    case ShapeKind::square:
      return std::abs(px - cx) <= r && std::abs(py - cy) <= r;
    case ShapeKind::triangle: {
      // apex up, base along cy + r
      if (py > cy + r || py < cy - r) return false;
      const double half = r * (py - (cy - r)) / (2.0 * r);
      return std::abs(px - cx) <= half;
    }
  }
  return false;
}

inline BinaryMask rasterize(const ObjectSpec& o, std::size_t t, std::size_t h, std::size_t w) {
  BinaryMask m(h, w);
  if (!o.alive(t)) return m;
  const auto [cx, cy] = o.center(t);
  const double r = o.size / 2.0;
  const auto lo = [](double v) { return static_cast<std::ptrdiff_t>(std::floor(v)) - 1; };
  const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, lo(cy - r)), x0 = std::max<std::ptrdiff_t>(0, lo(cx - r));
  const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(h), lo(cy + r) + 3);
  const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w), lo(cx + r) + 3);
  for (std::ptrdiff_t y = y0; y < y1; ++y)
    for (std::ptrdiff_t x = x0; x < x1; ++x) {
      if (shape_covers(o, cx, cy, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) {
        m(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = 1;
      }
    }
  return m;
}

/// Objects are painted back to front in list order, occluders last. Each gt
/// mask keeps only the pixels where its object is the visible surface.
inline Clip generate(const SceneSpec& spec) {
  spec.validate();
  const std::size_t h = spec.height, w = spec.width;
  Clip clip;
  clip.spec = spec;
  for (const auto& o : spec.objects) {
    clip.gt[o.id].tag = "object " + std::to_string(o.id);
    clip.visibility[o.id] = {};
  }
  for (std::size_t t = 0; t < spec.frames; ++t) {
    std::vector<std::ptrdiff_t> owner(h * w, -1);
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      const BinaryMask m = rasterize(spec.objects[i], t, h, w);
      for (std::size_t p = 0; p < m.bits.size(); ++p)
        if (m.bits[p]) owner[p] = static_cast<std::ptrdiff_t>(i);
    }
    Tensor frame({h, w, 3});
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t p = y * w + x;
        for (const auto& b : spec.occluders)
          if (b.active(t) && b.covers(y, x)) owner[p] = -2;
        const auto& rgb = owner[p] == -2   ? kOccluderColor
                          : owner[p] == -1 ? kBackground
                                           : kPalette[spec.objects[static_cast<std::size_t>(owner[p])].color];
        for (std::size_t c = 0; c < 3; ++c) frame(y, x, c) = rgb[c] / 255.0;
      }
    clip.frames.push_back(std::move(frame));
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      BinaryMask m(h, w);
      for (std::size_t p = 0; p < m.bits.size(); ++p) m.bits[p] = owner[p] == static_cast<std::ptrdiff_t>(i);
      const std::size_t id = spec.objects[i].id;
      clip.visibility[id].push_back(m.any());
      clip.gt[id].masks.push_back(std::move(m));
      clip.gt[id].frame_indices.push_back(t);
    }
  }
  for (const auto& q : spec.queries) clip.queries.push_back(resolve_query(spec, q));
  return clip;
}

inline MaskSequence Clip::target_masks(const std::vector<std::size_t>& ids) const {
  if (ids.empty()) throw SpecError("target_masks: no object ids");
  MaskSequence out = gt.at(ids.front());
  out.tag = "target";
  for (std::size_t k = 1; k < ids.size(); ++k) {
    const auto& s = gt.at(ids[k]);
    for (std::size_t t = 0; t < out.size(); ++t)
      for (std::size_t p = 0; p < out.masks[t].bits.size(); ++p) out.masks[t].bits[p] |= s.masks[t].bits[p];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Presets

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"easy", "occlusion", "reappear", "distractor"};
  return names;
}

namespace detail {

inline double uniform(SeededUniform& rng, double lo, double hi) { return lo + (hi - lo) * rng.unit(); }

// Random object whose whole trajectory stays inside the frame.
inline ObjectSpec random_object(SeededUniform& rng, std::size_t id, std::size_t color, std::size_t frames,
                                std::size_t h, std::size_t w) {
  ObjectSpec o;
  o.id = id;
  o.color = color;
  o.shape = static_cast<ShapeKind>(rng.below(3));
  o.size = std::round(uniform(rng, 16.0, 26.0));
  const double margin = o.size / 2.0 + 2.0;
  const bool wavy = rng.unit() < 0.3;
  const double amp = wavy ? std::round(uniform(rng, 4.0, 10.0)) : 0.0;
  const double ymargin = margin + amp;
  const double sx = uniform(rng, margin, static_cast<double>(w) - margin);
  const double sy = uniform(rng, ymargin, static_cast<double>(h) - ymargin);
  const double ex = uniform(rng, margin, static_cast<double>(w) - margin);
  const double ey = uniform(rng, ymargin, static_cast<double>(h) - ymargin);
  const double steps = static_cast<double>(std::max<std::size_t>(frames, 2) - 1);
  o.x = std::round(sx);
  o.y = std::round(sy);
  o.motion.vx = std::round(4.0 * (ex - sx) / steps) / 4.0;
  o.motion.vy = std::round(4.0 * (ey - sy) / steps) / 4.0;
  if (wavy) {
    o.motion.kind = MotionKind::sinusoidal;
    o.motion.amplitude = amp;
    o.motion.period = std::round(uniform(rng, 8.0, 16.0));
  }
  return o;
}

inline std::vector<std::size_t> shuffled_colors(SeededUniform& rng) {
  std::vector<std::size_t> c = {0, 1, 2, 3, 4, 5};
  for (std::size_t i = c.size(); i > 1; --i) std::swap(c[i - 1], c[static_cast<std::size_t>(rng.below(i))]);
  return c;
}

// Bar covering the object's full extent on frames [first, last].
inline Occluder covering_bar(const ObjectSpec& o, std::size_t first, std::size_t last, std::size_t h, std::size_t w) {
  double x0 = 1e9, y0 = 1e9, x1 = -1e9, y1 = -1e9;
  for (std::size_t t = first; t <= last; ++t) {
    const auto [cx, cy] = o.center(t);
    x0 = std::min(x0, cx - o.size / 2.0 - 2.0);
    y0 = std::min(y0, cy - o.size / 2.0 - 2.0);
    x1 = std::max(x1, cx + o.size / 2.0 + 2.0);
    y1 = std::max(y1, cy + o.size / 2.0 + 2.0);
  }
  auto clampi = [](double v, std::size_t hi) {
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(hi)));
  };
  return Occluder{clampi(std::floor(x0), w), clampi(std::floor(y0), h), clampi(std::ceil(x1), w),
                  clampi(std::ceil(y1), h), first, last};
}

}  // namespace detail

/// Seeded scene for a named preset. The target is the last-listed object
/// (painted on top) and every object has its own color; queries[0] names the
/// target by color and shape.
inline SceneSpec make_preset(const std::string& name, std::uint64_t seed, std::size_t frames = 16,
                             std::size_t size = 128) {
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) throw SpecError("unknown preset '" + name + "'");
  SceneSpec spec;
  spec.height = spec.width = size;
  spec.frames = frames;
  spec.seed = seed;
  spec.preset = name;
  spec.validate();
  SeededUniform rng(seed, "synthvid." + name);
  const auto colors = detail::shuffled_colors(rng);
  std::size_t distractors = 1;
  if (name == "distractor") distractors = 3;
  if (name == "reappear") distractors = 1 + rng.below(2);
  for (std::size_t i = 0; i < distractors; ++i) {
    spec.objects.push_back(detail::random_object(rng, i, colors[i + 1], frames, size, size));
  }
  ObjectSpec target = detail::random_object(rng, distractors, colors[0], frames, size, size);
  if (name == "reappear" && frames >= 4) {
    target.spawn = 1 + rng.below(std::max<std::size_t>(1, frames / 3));
    if (rng.unit() < 0.5) {
      const std::size_t lo = std::max(target.spawn + 2, 2 * frames / 3);
      if (lo < frames - 1) target.despawn = lo + rng.below(frames - 1 - lo);
    }
  }
  spec.objects.push_back(target);
  if (name == "occlusion" && frames >= 4) {
    const bool at_start = rng.unit() < 0.5;
    const std::size_t len = 3 + rng.below(std::max<std::size_t>(1, frames / 4));
    const std::size_t first = at_start ? 0 : frames / 4 + rng.below(std::max<std::size_t>(1, frames / 4));
    const std::size_t last = std::min(frames - 1, first + len - 1);
    spec.occluders.push_back(detail::covering_bar(target, first, last, size, size));
  }
  spec.queries.push_back("the " + std::string(kColorNames[target.color]) + " " + shape_name(target.shape));
  std::size_t same_shape = 0;
  for (const auto& o : spec.objects) same_shape += o.shape == target.shape;
  if (same_shape == 1) spec.queries.push_back("the " + shape_name(target.shape));
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// JSON / on-disk format

inline void to_json(nlohmann::json& j, const ObjectSpec& o) {
  j = {{"id", o.id},
       {"shape", shape_name(o.shape)},
       {"color", kColorNames[o.color]},
       {"size", o.size},
       {"x", o.x},
       {"y", o.y},
       {"motion",
        {{"kind", o.motion.kind == MotionKind::linear ? "linear" : "sinusoidal"},
         {"vx", o.motion.vx},
         {"vy", o.motion.vy},
         {"amplitude", o.motion.amplitude},
         {"period", o.motion.period}}},
       {"spawn", o.spawn},
       {"despawn", o.despawn ? nlohmann::json(*o.despawn) : nlohmann::json(nullptr)}};
}

inline void from_json(const nlohmann::json& j, ObjectSpec& o) {
  o.id = j.at("id").get<std::size_t>();
  o.shape = parse_shape(j.at("shape").get<std::string>());
  o.color = parse_color(j.at("color").get<std::string>());
  o.size = j.at("size").get<double>();
  o.x = j.at("x").get<double>();
  o.y = j.at("y").get<double>();
  const auto& m = j.at("motion");
  const auto kind = m.value("kind", std::string("linear"));
  if (kind != "linear" && kind != "sinusoidal") throw SpecError("unknown motion kind '" + kind + "'");
  o.motion.kind = kind == "linear" ? MotionKind::linear : MotionKind::sinusoidal;
  o.motion.vx = m.value("vx", 0.0);
  o.motion.vy = m.value("vy", 0.0);
  o.motion.amplitude = m.value("amplitude", 0.0);
  o.motion.period = m.value("period", 8.0);
  o.spawn = j.value("spawn", std::size_t{0});
  if (j.contains("despawn") && !j["despawn"].is_null()) o.despawn = j["despawn"].get<std::size_t>();
}

inline void to_json(nlohmann::json& j, const Occluder& b) {
  j = {{"rect", {b.x0, b.y0, b.x1, b.y1}}, {"frames", {b.first, b.last}}};
}

inline void from_json(const nlohmann::json& j, Occluder& b) {
  const auto r = j.at("rect").get<std::vector<std::size_t>>();
  const auto f = j.at("frames").get<std::vector<std::size_t>>();
  if (r.size() != 4 || f.size() != 2) throw SpecError("occluder needs rect[4] and frames[2]");
  b = Occluder{r[0], r[1], r[2], r[3], f[0], f[1]};
}

inline void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = {{"height", s.height}, {"width", s.width},   {"frames", s.frames}, {"objects", s.objects},
       {"occluders", s.occluders}, {"queries", s.queries}, {"seed", s.seed}, {"preset", s.preset}};
}

inline void from_json(const nlohmann::json& j, SceneSpec& s) {
  s.height = j.value("height", std::size_t{128});
  s.width = j.value("width", std::size_t{128});
  s.frames = j.at("frames").get<std::size_t>();
  s.objects = j.at("objects").get<std::vector<ObjectSpec>>();
  s.occluders = j.value("occluders", std::vector<Occluder>{});
  s.queries = j.value("queries", std::vector<std::string>{});
  s.seed = j.value("seed", std::uint64_t{0});
  s.preset = j.value("preset", std::string{});
}

inline SceneSpec parse_spec(const std::string& text) {
  try {
    SceneSpec s = nlohmann::json::parse(text).get<SceneSpec>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("scene spec: ") + e.what());
  }
}

inline nlohmann::json manifest(const Clip& clip) {
  nlohmann::json q = nlohmann::json::array();
  for (const auto& r : clip.queries) q.push_back({{"text", r.text}, {"ids", r.ids}, {"tokens", r.tokens}});
  nlohmann::json vis = nlohmann::json::object();
  for (const auto& [id, v] : clip.visibility) vis[std::to_string(id)] = v;
  return {{"spec", clip.spec}, {"queries", q}, {"visibility", vis}};
}

inline void write_clip(const Clip& clip, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t t = 0; t < clip.frames.size(); ++t) write_ppm(dir / frame_name("frame_", t, ".ppm"), clip.frames[t]);
  for (const auto& [id, seq] : clip.gt) {
    const std::string prefix = "gt_" + std::to_string(id) + "_";
    for (std::size_t t = 0; t < seq.size(); ++t) write_pgm(dir / frame_name(prefix.c_str(), t, ".pgm"), seq.masks[t]);
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw SpecError("cannot write manifest in " + dir.string());
  out << manifest(clip).dump(2) << '\n';
}

/// Loads a clip directory; frames and gt come from the image files, the spec
/// and queries from the manifest.
inline Clip read_clip(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw SpecError("no manifest.json in " + dir.string());
  nlohmann::json m;
  try {
    in >> m;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError("manifest.json: " + std::string(e.what()));
  }
  Clip clip;
  try {
    clip.spec = m.at("spec").get<SceneSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw SpecError("manifest spec: " + std::string(e.what()));
  }
  clip.spec.validate();
  for (std::size_t t = 0; t < clip.spec.frames; ++t) {
    Tensor f = read_ppm(dir / frame_name("frame_", t, ".ppm"));
    if (f.extent(0) != clip.spec.height || f.extent(1) != clip.spec.width) {
      throw SpecError("frame " + std::to_string(t) + " extent differs from manifest");
    }
    clip.frames.push_back(std::move(f));
  }
  for (const auto& o : clip.spec.objects) {
    auto& seq = clip.gt[o.id];
    seq.tag = "object " + std::to_string(o.id);
    const std::string prefix = "gt_" + std::to_string(o.id) + "_";
    for (std::size_t t = 0; t < clip.spec.frames; ++t) {
      seq.masks.push_back(read_pgm(dir / frame_name(prefix.c_str(), t, ".pgm")));
      seq.frame_indices.push_back(t);
      clip.visibility[o.id].push_back(seq.masks.back().any());
    }
  }
  for (const auto& q : clip.spec.queries) clip.queries.push_back(resolve_query(clip.spec, q));
  return clip;
}

}  // namespace anchorseg::synth
