// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: JSON file with strict key checking. Recognised keys:
//
//   dit.{n_blocks, n_heads, head_dim, n_steps, seed}
//   retro.{w_edge ("auto" or integer), s_edge, s_mid}
//   kab.{beta_min, beta_max, layer_lo, layer_hi, step_fraction, epsilon}
//   probe.{n_seeds, window, frames, grid_h, grid_w, repetitions}
//   video.{grid_h, grid_w, latent_dim, ctx_dim, image_tokens, text_tokens}
//   metrics.{stride, threshold}
//
// Any other key is rejected with its dotted path.

#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>

#include "json.hpp"
#include "tgi/dit_core.hpp"
#include "tgi/errors.hpp"

namespace tgi::bench {

using nlohmann::json;

struct VideoSettings {
  int grid_h = 4;
  int grid_w = 4;
  int latent_dim = 16;
  int ctx_dim = 32;
  int image_tokens = 4;
  int text_tokens = 8;
};

struct ProbeConfig {
  int n_seeds = 200;
  int window = 2;
  int frames = 21;
  int grid_h = 2;
  int grid_w = 2;
  int repetitions = 1;
};

struct MetricsConfig {
  int stride = 1;          // frame subsampling stride for the pace track
  double threshold = 0.1;  // centroid intensity threshold
};

struct RunConfig {
  DitConfig dit;
  VideoSettings video;
  ProbeConfig probe;
  MetricsConfig metrics;

  void validate() const {
    dit.validate();
    detail::require<ConfigError>(video.grid_h >= 1 && video.grid_w >= 1, "video.grid_h/grid_w must be >= 1");
    detail::require<ConfigError>(video.latent_dim >= 1, "video.latent_dim must be >= 1");
    detail::require<ConfigError>(video.ctx_dim >= 1, "video.ctx_dim must be >= 1");
    detail::require<ConfigError>(video.image_tokens >= 1, "video.image_tokens must be >= 1");
    detail::require<ConfigError>(video.text_tokens >= 1, "video.text_tokens must be >= 1");
    detail::require<ConfigError>(probe.n_seeds >= 1, "probe.n_seeds must be >= 1");
    detail::require<ConfigError>(probe.window >= 0, "probe.window must be >= 0");
    detail::require<ConfigError>(probe.frames >= 2, "probe.frames must be >= 2");
    detail::require<ConfigError>(probe.grid_h >= 1 && probe.grid_w >= 1, "probe.grid_h/grid_w must be >= 1");
    detail::require<ConfigError>(probe.repetitions >= 1, "probe.repetitions must be >= 1");
    detail::require<ConfigError>(metrics.stride >= 1, "metrics.stride must be >= 1");
    detail::require<ConfigError>(metrics.threshold >= 0.0 && metrics.threshold < 1.0,
                                 "metrics.threshold must lie in [0, 1)");
  }
};

// Command-line switches layered over the file configuration.
struct Overrides {
  std::optional<std::uint64_t> seed;
  bool no_kab = false;  // bias off and baseline (asymmetric) fusion
  bool no_retro = false;
  bool baseline_fusion = false;  // asymmetric fusion, bias left as configured
};

inline void apply_overrides(RunConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.dit.seed = *o.seed;
  if (o.no_kab) {
    cfg.dit.kab_enabled = false;
    cfg.dit.fusion = FusionMode::baseline;
  }
  if (o.no_retro) cfg.dit.retro_enabled = false;
  if (o.baseline_fusion) cfg.dit.fusion = FusionMode::baseline;
}

namespace config_detail {

inline void reject_unknown(const json& obj, const std::string& section, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError("config: '" + section + "' must be an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key)) throw ConfigError("config: unknown key '" + section + "." + key + "'");
}

template <typename T>
void read_number(const json& obj, const std::string& section, const char* key, T& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  const std::string path = section + "." + key;
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError("config: '" + path + "' must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_unsigned()) out = v.get<T>();
      else if (v.get<std::int64_t>() < 0) throw ConfigError("config: '" + path + "' must be non-negative");
      else out = static_cast<T>(v.get<std::int64_t>());
    } else {
      out = static_cast<T>(v.get<std::int64_t>());
    }
  } else {
    if (!v.is_number()) throw ConfigError("config: '" + path + "' must be a number");
    out = v.get<T>();
  }
}

}  // namespace config_detail

inline RunConfig parse_config(const json& root) {
  RunConfig cfg;
  config_detail::reject_unknown(root, "<root>", {"dit", "retro", "kab", "probe", "video", "metrics"});
  if (root.contains("dit")) {
    const json& s = root.at("dit");
    config_detail::reject_unknown(s, "dit", {"n_blocks", "n_heads", "head_dim", "n_steps", "seed"});
    config_detail::read_number(s, "dit", "n_blocks", cfg.dit.n_blocks);
    config_detail::read_number(s, "dit", "n_heads", cfg.dit.n_heads);
    config_detail::read_number(s, "dit", "head_dim", cfg.dit.head_dim);
    config_detail::read_number(s, "dit", "n_steps", cfg.dit.n_steps);
    config_detail::read_number(s, "dit", "seed", cfg.dit.seed);
  }
  if (root.contains("retro")) {
    const json& s = root.at("retro");
    config_detail::reject_unknown(s, "retro", {"w_edge", "s_edge", "s_mid"});
    if (s.contains("w_edge")) {
      const json& w = s.at("w_edge");
      if (w.is_string()) {
        if (w.get<std::string>() != "auto") throw ConfigError("config: 'retro.w_edge' must be \"auto\" or an integer");
        cfg.dit.retro.w_edge.reset();
      } else if (w.is_number_integer()) {
        cfg.dit.retro.w_edge = w.get<int>();
      } else {
        throw ConfigError("config: 'retro.w_edge' must be \"auto\" or an integer");
      }
    }
    config_detail::read_number(s, "retro", "s_edge", cfg.dit.retro.s_edge);
    config_detail::read_number(s, "retro", "s_mid", cfg.dit.retro.s_mid);
  }
  if (root.contains("kab")) {
    const json& s = root.at("kab");
    config_detail::reject_unknown(s, "kab", {"beta_min", "beta_max", "layer_lo", "layer_hi", "step_fraction", "epsilon"});
    auto& g = cfg.dit.guidance;
    config_detail::read_number(s, "kab", "beta_min", g.beta_min);
    config_detail::read_number(s, "kab", "beta_max", g.beta_max);
    config_detail::read_number(s, "kab", "layer_lo", g.layer_lo);
    config_detail::read_number(s, "kab", "layer_hi", g.layer_hi);
    config_detail::read_number(s, "kab", "step_fraction", g.step_fraction);
    config_detail::read_number(s, "kab", "epsilon", g.epsilon);
  }
  if (root.contains("probe")) {
    const json& s = root.at("probe");
    config_detail::reject_unknown(s, "probe", {"n_seeds", "window", "frames", "grid_h", "grid_w", "repetitions"});
    config_detail::read_number(s, "probe", "n_seeds", cfg.probe.n_seeds);
    config_detail::read_number(s, "probe", "window", cfg.probe.window);
    config_detail::read_number(s, "probe", "frames", cfg.probe.frames);
    config_detail::read_number(s, "probe", "grid_h", cfg.probe.grid_h);
    config_detail::read_number(s, "probe", "grid_w", cfg.probe.grid_w);
    config_detail::read_number(s, "probe", "repetitions", cfg.probe.repetitions);
  }
  if (root.contains("video")) {
    const json& s = root.at("video");
    config_detail::reject_unknown(s, "video", {"grid_h", "grid_w", "latent_dim", "ctx_dim", "image_tokens", "text_tokens"});
    config_detail::read_number(s, "video", "grid_h", cfg.video.grid_h);
    config_detail::read_number(s, "video", "grid_w", cfg.video.grid_w);
    config_detail::read_number(s, "video", "latent_dim", cfg.video.latent_dim);
    config_detail::read_number(s, "video", "ctx_dim", cfg.video.ctx_dim);
    config_detail::read_number(s, "video", "image_tokens", cfg.video.image_tokens);
    config_detail::read_number(s, "video", "text_tokens", cfg.video.text_tokens);
  }
  if (root.contains("metrics")) {
    const json& s = root.at("metrics");
    config_detail::reject_unknown(s, "metrics", {"stride", "threshold"});
    config_detail::read_number(s, "metrics", "stride", cfg.metrics.stride);
    config_detail::read_number(s, "metrics", "threshold", cfg.metrics.threshold);
  }
  cfg.validate();
  return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(root);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

// Full configuration echo, including the effective switches.
inline json config_to_json(const RunConfig& cfg) {
  const auto& d = cfg.dit;
  json retro_w = d.retro.w_edge ? json(*d.retro.w_edge) : json("auto");
  return {
      {"dit",
       {{"n_blocks", d.n_blocks},
        {"n_heads", d.n_heads},
        {"head_dim", d.head_dim},
        {"n_steps", d.n_steps},
        {"seed", d.seed}}},
      {"retro", {{"w_edge", retro_w}, {"s_edge", d.retro.s_edge}, {"s_mid", d.retro.s_mid}}},
      {"kab",
       {{"beta_min", d.guidance.beta_min},
        {"beta_max", d.guidance.beta_max},
        {"layer_lo", d.guidance.layer_lo},
        {"layer_hi", d.guidance.layer_hi},
        {"step_fraction", d.guidance.step_fraction},
        {"epsilon", d.guidance.epsilon}}},
      {"probe",
       {{"n_seeds", cfg.probe.n_seeds},
        {"window", cfg.probe.window},
        {"frames", cfg.probe.frames},
        {"grid_h", cfg.probe.grid_h},
        {"grid_w", cfg.probe.grid_w},
        {"repetitions", cfg.probe.repetitions}}},
      {"video",
       {{"grid_h", cfg.video.grid_h},
        {"grid_w", cfg.video.grid_w},
        {"latent_dim", cfg.video.latent_dim},
        {"ctx_dim", cfg.video.ctx_dim},
        {"image_tokens", cfg.video.image_tokens},
        {"text_tokens", cfg.video.text_tokens}}},
      {"metrics", {{"stride", cfg.metrics.stride}, {"threshold", cfg.metrics.threshold}}},
      {"switches",
       {{"kab", d.kab_enabled},
        {"retro", d.retro_enabled},
        {"fusion", d.fusion == FusionMode::baseline ? "baseline" : "triple_isolated"}}},
  };
}

}  // namespace tgi::bench
