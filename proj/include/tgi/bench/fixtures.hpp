// SPDX-License-Identifier: Apache-2.0
//
// Synthetic moving-shape videos, one generator per challenge category. Each
// video is a single Gaussian blob on a dim background:
//
//   linear_motion   constant-velocity diagonal drift
//   dynamic_motion  revolution about the centre with a sinusoidal angular rate
//   occlusion       linear drift behind a vertical bar covering the middle frames
//   near_static     fixed position with seeded sub-pixel jitter

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "tgi/bench/manifest.hpp"
#include "tgi/bench/raw_tensor.hpp"
#include "tgi/metrics.hpp"
#include "tgi/tensor.hpp"

namespace tgi::bench {

struct FixtureStyle {
  int height = 16;
  int width = 16;
  double background = 0.05;
  double amplitude = 0.9;
  double sigma = 1.6;
};

namespace fixture_detail {

inline void draw_blob(VideoArray& v, int f, double cx, double cy, const FixtureStyle& s) {
  for (int y = 0; y < v.height; ++y)
    for (int x = 0; x < v.width; ++x) {
      const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      v.at(f, y, x) = s.background + s.amplitude * std::exp(-r2 / (2.0 * s.sigma * s.sigma));
    }
}

}  // namespace fixture_detail

// Blob centre (x = column, y = row) for frame i of F.
inline Point2 fixture_center(Challenge c, int i, int F, const FixtureStyle& s, std::uint64_t seed) {
  const double u = F > 1 ? static_cast<double>(i) / (F - 1) : 0.0;
  const double cx = (s.width - 1) / 2.0;
  const double cy = (s.height - 1) / 2.0;
  switch (c) {
    case Challenge::linear_motion:
    case Challenge::occlusion:
      return {0.2 * s.width + u * 0.6 * s.width, 0.25 * s.height + u * 0.5 * s.height};
    case Challenge::dynamic_motion: {
      const double angle = 2.0 * std::numbers::pi * (u + 0.12 * std::sin(2.0 * std::numbers::pi * u));
      const double radius = 0.3 * std::min(s.width, s.height);
      return {cx + radius * std::cos(angle), cy + radius * std::sin(angle)};
    }
    case Challenge::near_static: {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
      return {cx + rng.uniform(-0.3, 0.3), cy + rng.uniform(-0.3, 0.3)};
    }
  }
  return {cx, cy};
}

inline VideoArray make_fixture_video(Challenge c, int F, const FixtureStyle& s = {}, std::uint64_t seed = 0) {
  detail::require(F >= 2, "make_fixture_video: F must be >= 2");
  VideoArray v(F, s.height, s.width, 1, s.background);
  for (int i = 0; i < F; ++i) {
    const Point2 p = fixture_center(c, i, F, s, seed);
    fixture_detail::draw_blob(v, i, p.x, p.y, s);
  }
  if (c == Challenge::occlusion) {
    // Bar over the central columns, present for the middle third of the clip.
    const int x0 = s.width / 2 - 1;
    const int x1 = s.width / 2 + 1;
    for (int i = F / 3; i < F - F / 3; ++i)
      for (int y = 0; y < s.height; ++y)
        for (int x = x0; x < x1; ++x) v.at(i, y, x) = 0.0;
  }
  return v;
}

inline std::string default_prompt(Challenge c) {
  switch (c) {
    case Challenge::linear_motion: return "a bright ball drifts steadily across a dark room";
    case Challenge::dynamic_motion: return "a glowing orb swings around the centre speeding up and slowing down";
    case Challenge::occlusion: return "a ball rolls behind a black pillar and reappears";
    case Challenge::near_static: return "a lamp glows almost perfectly still";
  }
  return "";
}

// Writes <dir>/manifest.jsonl and <dir>/videos/<id>.tgiv for every
// challenge x length combination; returns the manifest.
inline BenchManifest write_fixture_set(const std::filesystem::path& dir, const std::vector<int>& lengths,
                                       std::uint64_t seed = 0, const FixtureStyle& style = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "videos");
  BenchManifest m;
  for (Challenge c : kAllChallenges) {
    for (int F : lengths) {
      ManifestEntry e;
      e.id = std::string(challenge_name(c)) + "_F" + std::to_string(F);
      e.frames_path = "videos/" + e.id + ".tgiv";
      e.prompt = default_prompt(c);
      e.challenge = c;
      e.F = F;
      write_video((dir / e.frames_path).string(), make_fixture_video(c, F, style, derive_seed(seed, fnv1a(e.id))));
      m.entries.push_back(std::move(e));
    }
  }
  std::ofstream out(dir / "manifest.jsonl");
  if (!out) throw std::runtime_error("cannot write manifest in '" + dir.string() + "'");
  out << serialize_manifest(m);
  return m;
}

}  // namespace tgi::bench
