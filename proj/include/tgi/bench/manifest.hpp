// SPDX-License-Identifier: Apache-2.0
//
// Benchmark manifest: JSON Lines, one entry per line:
//   {"id": "...", "frames_path": "...", "prompt": "...",
//    "challenge": "dynamic_motion|linear_motion|occlusion|near_static", "F": 25}
// Blank lines are ignored. `frames_path` is resolved relative to the manifest.

#pragma once

#include <array>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tgi/errors.hpp"

namespace tgi::bench {

enum class Challenge { dynamic_motion, linear_motion, occlusion, near_static };

inline constexpr std::array<Challenge, 4> kAllChallenges = {Challenge::dynamic_motion, Challenge::linear_motion,
                                                           Challenge::occlusion, Challenge::near_static};

// Standard sequence-length variants.
inline constexpr std::array<int, 4> kStandardLengths = {25, 33, 65, 81};

inline std::string_view challenge_name(Challenge c) {
  switch (c) {
    case Challenge::dynamic_motion: return "dynamic_motion";
    case Challenge::linear_motion: return "linear_motion";
    case Challenge::occlusion: return "occlusion";
    case Challenge::near_static: return "near_static";
  }
  return "unknown";
}

inline Challenge parse_challenge(std::string_view name) {
  for (Challenge c : kAllChallenges)
    if (challenge_name(c) == name) return c;
  throw ManifestError("manifest: unknown challenge '" + std::string(name) + "'");
}

struct ManifestEntry {
  std::string id;
  std::string frames_path;
  std::string prompt;
  Challenge challenge = Challenge::linear_motion;
  int F = 25;

  bool operator==(const ManifestEntry&) const = default;
};

struct BenchManifest {
  std::vector<ManifestEntry> entries;
  bool operator==(const BenchManifest&) const = default;
};

inline nlohmann::json entry_to_json(const ManifestEntry& e) {
  nlohmann::json j;
  j["id"] = e.id;
  j["frames_path"] = e.frames_path;
  j["prompt"] = e.prompt;
  j["challenge"] = std::string(challenge_name(e.challenge));
  j["F"] = e.F;
  return j;
}

inline ManifestEntry entry_from_json(const nlohmann::json& j, std::size_t line) {
  const std::string where = "manifest line " + std::to_string(line) + ": ";
  if (!j.is_object()) throw ManifestError(where + "entry must be a JSON object");
  static const std::set<std::string> kKeys = {"id", "frames_path", "prompt", "challenge", "F"};
  for (const auto& [key, _] : j.items())
    if (!kKeys.contains(key)) throw ManifestError(where + "unknown key '" + key + "'");
  for (const char* key : {"id", "frames_path", "prompt", "challenge"})
    if (!j.contains(key) || !j.at(key).is_string()) throw ManifestError(where + "'" + key + "' must be a string");
  if (!j.contains("F") || !j.at("F").is_number_integer()) throw ManifestError(where + "'F' must be an integer");

  ManifestEntry e;
  e.id = j.at("id").get<std::string>();
  e.frames_path = j.at("frames_path").get<std::string>();
  e.prompt = j.at("prompt").get<std::string>();
  e.F = j.at("F").get<int>();
  try {
    e.challenge = parse_challenge(j.at("challenge").get<std::string>());
  } catch (const ManifestError& err) {
    throw ManifestError(where + err.what());
  }
  if (e.id.empty()) throw ManifestError(where + "'id' must be non-empty");
  if (e.F < 2) throw ManifestError(where + "'F' must be >= 2");
  return e;
}

inline void validate_manifest(const BenchManifest& m) {
  std::set<std::string> seen;
  for (const auto& e : m.entries)
    if (!seen.insert(e.id).second) throw ManifestError("manifest: duplicate id '" + e.id + "'");
}

inline BenchManifest parse_manifest(std::istream& in) {
  BenchManifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ManifestError("manifest line " + std::to_string(lineno) + ": invalid JSON: " + e.what());
    }
    m.entries.push_back(entry_from_json(j, lineno));
  }
  validate_manifest(m);
  return m;
}

inline BenchManifest parse_manifest_text(const std::string& text) {
  std::istringstream in(text);
  return parse_manifest(in);
}

inline std::string serialize_manifest(const BenchManifest& m) {
  std::string out;
  for (const auto& e : m.entries) {
    out += entry_to_json(e).dump();
    out += '\n';
  }
  return out;
}

inline BenchManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("manifest: cannot open '" + path + "'");
  return parse_manifest(in);
}

// Frame indices {0, stride, 2*stride, ...} plus F-1, sorted and deduplicated.
inline std::vector<int> subsample_indices(int F, int stride) {
  if (F < 2) throw std::invalid_argument("subsample_indices: F must be >= 2");
  if (stride < 1) throw std::invalid_argument("subsample_indices: stride must be >= 1");
  std::vector<int> out;
  for (int i = 0; i < F; i += stride) out.push_back(i);
  if (out.back() != F - 1) out.push_back(F - 1);
  return out;
}

}  // namespace tgi::bench
