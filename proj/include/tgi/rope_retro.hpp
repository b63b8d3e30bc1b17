// SPDX-License-Identifier: Apache-2.0
//
// Three-axis rotary position embedding with per-frame temporal rescaling.
//
// Channel pairs are assigned axis-major: the first `split.t` pairs carry the
// temporal angles, the next `split.h` the row angles, the last `split.w` the
// column angles. Pair (2j, 2j+1) is rotated counter-clockwise:
//   (x, y) -> (x cos(phi) - y sin(phi), x sin(phi) + y cos(phi)).

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tgi/errors.hpp"
#include "tgi/latent_pipeline.hpp"
#include "tgi/tensor.hpp"

namespace tgi {

inline constexpr double kDefaultRopeBase = 10000.0;

struct AxisSplit {
  int t = 0;
  int h = 0;
  int w = 0;
  int pairs() const { return t + h + w; }
  bool operator==(const AxisSplit&) const = default;
};

// (2:1:1) split of head_dim/2 pairs; the temporal axis absorbs the remainder.
inline AxisSplit default_axis_split(int head_dim) {
  detail::require(head_dim >= 2 && head_dim % 2 == 0, "default_axis_split: head_dim must be even and >= 2");
  const int pairs = head_dim / 2;
  const int spatial = pairs / 4;
  return {pairs - 2 * spatial, spatial, spatial};
}

struct AxisExtent {
  int frames = 1;
  int height = 1;
  int width = 1;
};

struct RopeFrequencyTable {
  AxisSplit split;
  double base = kDefaultRopeBase;
  std::vector<double> theta_t, theta_h, theta_w;
  // Angle rows: omega_t(t, j) = t * theta_t[j] before rescaling, and likewise
  // for the spatial axes.
  Matrix omega_t;  // frames x split.t
  Matrix omega_h;  // height x split.h
  Matrix omega_w;  // width  x split.w

  int head_dim() const { return 2 * split.pairs(); }
  int frames() const { return static_cast<int>(omega_t.rows()); }
  int height() const { return static_cast<int>(omega_h.rows()); }
  int width() const { return static_cast<int>(omega_w.rows()); }

  bool operator==(const RopeFrequencyTable&) const = default;
};

namespace detail {

inline std::vector<double> axis_thetas(int pairs, double base) {
  std::vector<double> out(static_cast<std::size_t>(pairs));
  for (int j = 0; j < pairs; ++j)
    out[static_cast<std::size_t>(j)] = std::pow(base, -2.0 * j / (2.0 * pairs));
  return out;
}

inline Matrix axis_angles(int positions, const std::vector<double>& thetas) {
  Matrix out(static_cast<std::size_t>(positions), thetas.size());
  for (int p = 0; p < positions; ++p)
    for (std::size_t j = 0; j < thetas.size(); ++j) out(static_cast<std::size_t>(p), j) = p * thetas[j];
  return out;
}

}  // namespace detail

inline RopeFrequencyTable build_frequency_rows(int head_dim, AxisSplit split, double base, AxisExtent extent) {
  detail::require(head_dim >= 2 && head_dim % 2 == 0,
                  "build_frequency_rows: head_dim must be even, got " + std::to_string(head_dim));
  detail::require(split.t >= 0 && split.h >= 0 && split.w >= 0 && split.pairs() == head_dim / 2,
                  "build_frequency_rows: axis split must sum to head_dim/2");
  detail::require(base > 1.0, "build_frequency_rows: base must exceed 1");
  detail::require(extent.frames >= 1 && extent.height >= 1 && extent.width >= 1,
                  "build_frequency_rows: axis extents must be positive");
  RopeFrequencyTable table;
  table.split = split;
  table.base = base;
  table.theta_t = detail::axis_thetas(split.t, base);
  table.theta_h = detail::axis_thetas(split.h, base);
  table.theta_w = detail::axis_thetas(split.w, base);
  table.omega_t = detail::axis_angles(extent.frames, table.theta_t);
  table.omega_h = detail::axis_angles(extent.height, table.theta_h);
  table.omega_w = detail::axis_angles(extent.width, table.theta_w);
  return table;
}

inline RopeFrequencyTable build_frequency_rows(int head_dim, AxisExtent extent) {
  return build_frequency_rows(head_dim, default_axis_split(head_dim), kDefaultRopeBase, extent);
}

// Closest integer to 0.1 f, ties away from zero, clamped to [0, floor(f/2)].
inline int compute_w_edge(int f) {
  detail::require(f >= 2, "compute_w_edge: f must be >= 2");
  const int rounded = (f + 5) / 10;
  return std::clamp(rounded, 0, f / 2);
}

struct RetroConfig {
  std::optional<int> w_edge;  // nullopt: compute_w_edge(f)
  double s_edge = 1.06;
  double s_mid = 0.94;

  static RetroConfig vanilla() { return {std::nullopt, 1.0, 1.0}; }

  bool is_identity() const { return s_edge == 1.0 && s_mid == 1.0; }

  void validate() const {
    if (w_edge) detail::require<ConfigError>(*w_edge >= 0, "retro.w_edge must be >= 0");
    if (is_identity()) return;
    detail::require<ConfigError>(std::isfinite(s_edge) && s_edge > 1.0,
                                 "retro.s_edge must be > 1 when ReTRo is active, got " + std::to_string(s_edge));
    detail::require<ConfigError>(std::isfinite(s_mid) && s_mid > 0.0 && s_mid < 1.0,
                                 "retro.s_mid must lie in (0, 1) when ReTRo is active, got " + std::to_string(s_mid));
  }

  int resolve_w_edge(int f) const {
    const int w = w_edge ? *w_edge : compute_w_edge(f);
    detail::require<ConfigError>(w >= 0 && w <= f / 2,
                                 "retro.w_edge = " + std::to_string(w) + " outside [0, " + std::to_string(f / 2) + "]");
    return w;
  }
};

struct EdgeMidSets {
  std::vector<int> edge;
  std::vector<int> mid;
};

inline EdgeMidSets edge_mid_sets(int f, int w_edge) {
  detail::require(f >= 1, "edge_mid_sets: f must be positive");
  detail::require(w_edge >= 0 && w_edge <= f / 2,
                  "edge_mid_sets: w_edge = " + std::to_string(w_edge) + " outside [0, floor(f/2)]");
  EdgeMidSets sets;
  for (int t = 0; t < w_edge; ++t) sets.edge.push_back(t);
  for (int t = f - w_edge; t < f; ++t) sets.edge.push_back(t);
  for (int t = w_edge; t < f - w_edge; ++t) sets.mid.push_back(t);
  return sets;
}

// s(t) for every latent frame.
inline std::vector<double> frame_scales(int f, const RetroConfig& cfg) {
  const int w = cfg.resolve_w_edge(f);
  std::vector<double> scales(static_cast<std::size_t>(f), cfg.s_mid);
  for (int t : edge_mid_sets(f, w).edge) scales[static_cast<std::size_t>(t)] = cfg.s_edge;
  return scales;
}

// Scales the temporal angle row of each frame by s(t); spatial rows are
// carried over unchanged.
inline RopeFrequencyTable retro_scale(const RopeFrequencyTable& table, const RetroConfig& cfg, int f) {
  cfg.validate();
  detail::require(f >= 2 && table.frames() >= f, "retro_scale: table does not cover frames 0..f-1");
  const auto scales = frame_scales(f, cfg);
  RopeFrequencyTable out = table;
  for (int t = 0; t < f; ++t)
    for (auto& angle : out.omega_t.row(static_cast<std::size_t>(t))) angle *= scales[static_cast<std::size_t>(t)];
  return out;
}

// Concatenated angle vector [omega_t[t]; omega_h[h]; omega_w[w]] (one angle
// per channel pair).
inline void position_angles(const RopeFrequencyTable& table, const TokenPosition& pos, std::span<double> out) {
  detail::require(out.size() == static_cast<std::size_t>(table.split.pairs()), "position_angles: output size mismatch");
  detail::require(pos.t >= 0 && pos.t < table.frames() && pos.h >= 0 && pos.h < table.height() && pos.w >= 0 &&
                      pos.w < table.width(),
                  "position_angles: position outside the frequency table");
  std::size_t k = 0;
  for (double a : table.omega_t.row(static_cast<std::size_t>(pos.t))) out[k++] = a;
  for (double a : table.omega_h.row(static_cast<std::size_t>(pos.h))) out[k++] = a;
  for (double a : table.omega_w.row(static_cast<std::size_t>(pos.w))) out[k++] = a;
}

// x: tokens x head_dim, one position per token.
inline Matrix apply_rope(const Matrix& x, const RopeFrequencyTable& table, std::span<const TokenPosition> positions) {
  detail::require(x.cols() == static_cast<std::size_t>(table.head_dim()),
                  "apply_rope: last dimension " + std::to_string(x.cols()) + " != head_dim " +
                      std::to_string(table.head_dim()));
  detail::require(positions.size() == x.rows(), "apply_rope: need exactly one position per token");
  Matrix out(x.rows(), x.cols());
  std::vector<double> angles(static_cast<std::size_t>(table.split.pairs()));
  for (std::size_t r = 0; r < x.rows(); ++r) {
    position_angles(table, positions[r], angles);
    auto src = x.row(r);
    auto dst = out.row(r);
    for (std::size_t j = 0; j < angles.size(); ++j) {
      const double c = std::cos(angles[j]);
      const double s = std::sin(angles[j]);
      const double a = src[2 * j];
      const double b = src[2 * j + 1];
      dst[2 * j] = a * c - b * s;
      dst[2 * j + 1] = a * s + b * c;
    }
  }
  return out;
}

}  // namespace tgi
