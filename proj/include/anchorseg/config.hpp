#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anchorseg/errors.hpp"

namespace anchorseg {

/// Flat key/value run configuration. Every key has a default; files and
/// overrides may only set known keys.
class RunConfig {
 public:
  RunConfig() : values_(defaults()) {}

  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"seed", "0"},
        {"model.weights", "reference"},
        {"encoder.C", "256"},
        {"tokenizer.D", "64"},
        {"tokenizer.activation", "false"},
        {"stf.N", "8"},
        {"stf.semantic_transform", "grounded"},
        {"stf.gain", "8"},
        {"stf.heads", "1"},
        {"rope.base", "10000"},
        {"tdau.alpha", "3"},
        {"tdau.strategy", "dynamic"},
        {"tdau.fifo_capacity", "6"},
        {"tdau.anchor_mode", "spaced"},
        {"tdau.causal", "false"},
        {"tdau.n_prop", "5"},
        {"tdau.D_mem", "16"},
        {"tdau.memory_tokens", "16"},
        {"decoder.threshold", "0"},
        {"loss.lambda_bce", "1"},
        {"loss.lambda_dice", "1"},
        {"loss.lambda_token", "1"},
        {"loss.lambda_occ", "0.05"},
        {"loss.lambda_iou", "0.05"},
        {"loss.dice_eps", "1"},
        {"metrics.tol_fraction", "0.008"},
        {"synth.preset", "easy"},
        {"synth.frames", "16"},
        {"synth.size", "128"},
        {"query", ""},
        {"suite.clips", "50"},
        {"suite.presets", "reappear,occlusion"},
        {"suite.frames", "32"},
        {"suite.seed", "1000"},
        {"ablate.strategies", "dynamic,first,uniform3,random3"},
        {"ablate.alphas", "2,3,4,6,8"},
    };
    return d;
  }

  void set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second = value;
  }

  /// "key=value" (whitespace around either side is trimmed).
  void apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  /// Lines of `key = value`; '#' starts a comment.
  void load_text(const std::string& text, const std::string& origin = "config") {
    std::istringstream in(text);
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      try {
        apply_override(line);
      } catch (const ConfigError& e) {
        throw ConfigError(origin + ":" + std::to_string(n) + ": " + e.what());
      }
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    load_text(ss.str(), path);
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  double real(const std::string& key) const {
    const std::string& s = str(key);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError(key + ": '" + s + "' is not a number");
    return v;
  }

  std::uint64_t uint(const std::string& key) const { return parse_uint(key, str(key)); }

  bool flag(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError(key + ": '" + s + "' is not a boolean");
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(str(key));
    for (std::string item; std::getline(ss, item, ',');)
      if (auto t = trim(item); !t.empty()) out.push_back(t);
    return out;
  }

  std::vector<std::uint64_t> uint_list(const std::string& key) const {
    std::vector<std::uint64_t> out;
    for (const auto& s : list(key)) out.push_back(parse_uint(key, s));
    return out;
  }

  /// Effective configuration, every key, for embedding in reports.
  nlohmann::json echo() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
  }

  std::string text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
  }

  static std::uint64_t parse_uint(const std::string& key, const std::string& s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
      throw ConfigError(key + ": '" + s + "' is not a non-negative integer");
    }
    return v;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace anchorseg
