// SPDX-License-Identifier: Apache-2.0
//
// Run orchestration and report emission.
//
// Report layout (schema_version 1):
//   generate  {schema_version, command, config, entries[], totals, wall_time_seconds}
//   ablate    {schema_version, command, config, cells[4], wall_time_seconds}
//   probe     {schema_version, command, config, probe, wall_time_seconds}
// Entries are ordered by id. Non-finite numbers are written as the strings
// "inf" / "-inf"; undefined values are null. Only `wall_time_seconds` varies
// between identical runs.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tgi/attention_probe.hpp"
#include "tgi/bench/config.hpp"
#include "tgi/bench/manifest.hpp"
#include "tgi/bench/raw_tensor.hpp"
#include "tgi/dit_core.hpp"
#include "tgi/latent_pipeline.hpp"
#include "tgi/metrics.hpp"

namespace tgi::bench {

inline constexpr int kReportSchemaVersion = 1;

inline json number_or_sentinel(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline json numbers_or_sentinels(const std::vector<double>& values) {
  json out = json::array();
  for (double v : values) out.push_back(number_or_sentinel(v));
  return out;
}

// ---------------------------------------------------------------------------
// Pixel <-> token layout

struct PatchLayout {
  int grid_h = 1;
  int grid_w = 1;
  int patch_h = 1;
  int patch_w = 1;
  int channels = 1;

  int l_q() const { return grid_h * grid_w; }
  int patch_values() const { return patch_h * patch_w * channels; }
};

inline PatchLayout patch_layout(const VideoArray& v, int grid_h, int grid_w) {
  detail::require(grid_h >= 1 && grid_w >= 1, "patch_layout: grid must be >= 1");
  detail::require(v.height % grid_h == 0 && v.width % grid_w == 0,
                  "patch_layout: frame " + std::to_string(v.height) + "x" + std::to_string(v.width) +
                      " is not divisible by the token grid " + std::to_string(grid_h) + "x" + std::to_string(grid_w));
  return {grid_h, grid_w, v.height / grid_h, v.width / grid_w, v.channels};
}

// Frame -> (l_q x patch_values), tokens row-major over the grid.
inline Matrix patchify(const VideoArray& v, int frame, const PatchLayout& p) {
  Matrix out(static_cast<std::size_t>(p.l_q()), static_cast<std::size_t>(p.patch_values()));
  for (int gy = 0; gy < p.grid_h; ++gy)
    for (int gx = 0; gx < p.grid_w; ++gx) {
      const auto r = static_cast<std::size_t>(gy * p.grid_w + gx);
      std::size_t c = 0;
      for (int y = 0; y < p.patch_h; ++y)
        for (int x = 0; x < p.patch_w; ++x)
          for (int ch = 0; ch < p.channels; ++ch) out(r, c++) = v.at(frame, gy * p.patch_h + y, gx * p.patch_w + x, ch);
    }
  return out;
}

// Inverse of patchify; values are clamped into [0, 1].
inline void unpatchify(const Matrix& tokens, const PatchLayout& p, VideoArray& v, int frame) {
  for (int gy = 0; gy < p.grid_h; ++gy)
    for (int gx = 0; gx < p.grid_w; ++gx) {
      const auto r = static_cast<std::size_t>(gy * p.grid_w + gx);
      std::size_t c = 0;
      for (int y = 0; y < p.patch_h; ++y)
        for (int x = 0; x < p.patch_w; ++x)
          for (int ch = 0; ch < p.channels; ++ch)
            v.at(frame, gy * p.patch_h + y, gx * p.patch_w + x, ch) = std::clamp(tokens(r, c++), 0.0, 1.0);
    }
}

// ---------------------------------------------------------------------------
// Context tokens

// Seeded linear pooling of keyframe patches into `tokens` context rows.
inline Matrix image_context(const Matrix& patches, int tokens, int ctx_dim, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix pool = rng.normal_matrix(static_cast<std::size_t>(tokens), patches.rows(),
                                        1.0 / std::sqrt(static_cast<double>(patches.rows())));
  const Matrix proj = rng.normal_matrix(patches.cols(), static_cast<std::size_t>(ctx_dim),
                                        1.0 / std::sqrt(static_cast<double>(patches.cols())));
  return matmul(matmul(pool, patches), proj);
}

inline std::vector<std::string> prompt_words(const std::string& prompt) {
  std::vector<std::string> words;
  std::istringstream in(prompt);
  for (std::string w; in >> w;) {
    std::string clean;
    for (unsigned char ch : w)
      if (std::isalnum(ch)) clean.push_back(static_cast<char>(std::tolower(ch)));
    if (!clean.empty()) words.push_back(std::move(clean));
  }
  return words;
}

// One hashed embedding per word, truncated or padded to `tokens` rows.
inline Matrix text_context(const std::string& prompt, int tokens, int ctx_dim) {
  const auto words = prompt_words(prompt);
  Matrix out(static_cast<std::size_t>(tokens), static_cast<std::size_t>(ctx_dim));
  const double scale = 1.0 / std::sqrt(static_cast<double>(ctx_dim));
  for (int r = 0; r < tokens; ++r) {
    const std::string& key = static_cast<std::size_t>(r) < words.size() ? words[static_cast<std::size_t>(r)] : "<pad>";
    Rng rng(fnv1a(key));
    for (int c = 0; c < ctx_dim; ++c) out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = scale * rng.normal();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generation

struct EntryRun {
  ManifestEntry entry;
  VideoArray ground_truth;  // F frames
  VideoArray generated;     // f latent-rate frames, decoded
  std::vector<int> generated_pixel_index;
  Instrumentation counters;
  json report;
};

inline std::filesystem::path resolve_frames_path(const ManifestEntry& e, const std::filesystem::path& manifest_dir) {
  const std::filesystem::path p(e.frames_path);
  return p.is_absolute() ? p : manifest_dir / p;
}

inline VideoArray load_entry_video(const ManifestEntry& e, const std::filesystem::path& manifest_dir) {
  VideoArray v = read_video(resolve_frames_path(e, manifest_dir).string());
  if (v.frames != e.F)
    throw ManifestError("entry '" + e.id + "': video has " + std::to_string(v.frames) + " frames, manifest says F = " +
                        std::to_string(e.F));
  try {
    v.validate();
  } catch (const NumericError& err) {
    throw ManifestError("entry '" + e.id + "': " + err.what());
  }
  return v;
}

namespace runner_detail {

inline VideoArray select_frames(const VideoArray& v, const std::vector<int>& idx) {
  VideoArray out(static_cast<int>(idx.size()), v.height, v.width, v.channels);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = v.frame(idx[i]);
    std::copy(src.begin(), src.end(), out.frame(static_cast<int>(i)).begin());
  }
  return out;
}

inline json consistency_json(const VideoArray& v) {
  const AdjacentConsistency ac = adjacent_consistency(v);
  json cos = json::array();
  for (const auto& c : ac.cosine) cos.push_back(c ? json(*c) : json(nullptr));
  return {{"adjacent_cosine", cos},
          {"adjacent_cosine_mean", number_or_sentinel(ac.mean_cosine)},
          {"adjacent_mse", numbers_or_sentinels(ac.mse)},
          {"adjacent_mse_mean", number_or_sentinel(ac.mean_mse)},
          {"undefined_pairs", ac.undefined_pairs}};
}

// Pace over the frames at `idx`; null when the track is too short or a frame is empty.
inline json pace_json(const VideoArray& v, const std::vector<int>& idx, double threshold) {
  if (idx.size() < 3) return nullptr;
  std::vector<Point2> track;
  try {
    track = centroid_track(select_frames(v, idx), threshold);
  } catch (const ShapeError&) {
    return nullptr;
  }
  const PaceReport pace = pace_stability(track);
  return {{"indices", idx},
          {"displacements", numbers_or_sentinels(pace.displacements)},
          {"pace_mean", number_or_sentinel(pace.mean)},
          {"pace_std", number_or_sentinel(pace.pace_std)},
          {"pace_cv", number_or_sentinel(pace.pace_cv)}};
}

// PSNR / SSIM of the generated interior frames against the ground truth frames they represent.
inline json fidelity_json(const VideoArray& generated, const VideoArray& truth, const std::vector<int>& pixel_index) {
  if (generated.frames <= 2) return nullptr;
  std::vector<int> gen_idx, truth_idx;
  for (int t = 1; t + 1 < generated.frames; ++t) {
    gen_idx.push_back(t);
    truth_idx.push_back(pixel_index[static_cast<std::size_t>(t)]);
  }
  const VideoArray a = select_frames(generated, gen_idx);
  const VideoArray b = select_frames(truth, truth_idx);
  const PsnrResult p = psnr(a, b);
  SsimParams sp;
  sp.window = std::min({sp.window, a.height, a.width});
  const SsimResult s = ssim(a, b, sp);
  return {{"ground_truth_indices", truth_idx},
          {"psnr", numbers_or_sentinels(p.per_frame)},
          {"psnr_mean", number_or_sentinel(p.mean)},
          {"psnr_identical_frames", p.identical_frames},
          {"ssim", numbers_or_sentinels(s.per_frame)},
          {"ssim_mean", number_or_sentinel(s.mean)}};
}

inline json counters_json(const Instrumentation& c) {
  return {{"denoiser_calls", c.denoiser_calls},
          {"self_attention_calls", c.self_attention_calls},
          {"cross_attention_calls", c.cross_attention_calls},
          {"biased_cross_attention_calls", c.biased_cross_attention_calls},
          {"guided_steps", c.guided_steps}};
}

inline void accumulate(Instrumentation& total, const Instrumentation& c) {
  total.denoiser_calls += c.denoiser_calls;
  total.self_attention_calls += c.self_attention_calls;
  total.cross_attention_calls += c.cross_attention_calls;
  total.biased_cross_attention_calls += c.biased_cross_attention_calls;
  total.guided_steps += c.guided_steps;
}

}  // namespace runner_detail

// Samples one manifest entry under `cfg` and evaluates it.
inline EntryRun run_entry(const ManifestEntry& e, const VideoArray& truth, const RunConfig& cfg) {
  const auto& vs = cfg.video;
  const PatchLayout layout = patch_layout(truth, vs.grid_h, vs.grid_w);
  if (vs.latent_dim < layout.patch_values())
    throw ConfigError("video.latent_dim = " + std::to_string(vs.latent_dim) + " is smaller than the " +
                      std::to_string(layout.patch_values()) + " values per patch");
  const int f = [&] {
    try {
      return latent_frame_count(e.F);
    } catch (const ShapeError& err) {
      throw ManifestError("entry '" + e.id + "': " + err.what());
    }
  }();

  const std::uint64_t entry_seed = derive_seed(cfg.dit.seed, fnv1a(e.id));
  const KeyframeEncoder encoder(layout.patch_values(), vs.latent_dim, entry_seed);
  const Matrix first_px = patchify(truth, 0, layout);
  const Matrix last_px = patchify(truth, e.F - 1, layout);

  ConditionSet cond;
  cond.first_img = image_context(first_px, vs.image_tokens, vs.ctx_dim, derive_seed(entry_seed, 1));
  cond.last_img = image_context(last_px, vs.image_tokens, vs.ctx_dim, derive_seed(entry_seed, 2));
  cond.text = text_context(e.prompt, vs.text_tokens, vs.ctx_dim);

  DitConfig dit = cfg.dit;
  dit.seed = entry_seed;
  const SampleResult res = sample(encoder.encode(first_px), encoder.encode(last_px), e.F, vs.grid_h, vs.grid_w, cond, dit);

  EntryRun run;
  run.entry = e;
  run.ground_truth = truth;
  run.counters = res.counters;
  run.generated = VideoArray(f, truth.height, truth.width, truth.channels);
  for (int t = 0; t < f; ++t) {
    unpatchify(encoder.decode(res.video.frame(t)), layout, run.generated, t);
    run.generated_pixel_index.push_back(pixel_index_of_latent(t, e.F));
  }

  const std::vector<int> track_idx = subsample_indices(f, cfg.metrics.stride);
  const std::vector<int> truth_idx = subsample_indices(e.F, cfg.metrics.stride);
  run.report = {
      {"id", e.id},
      {"challenge", std::string(challenge_name(e.challenge))},
      {"F", e.F},
      {"latent_frames", f},
      {"generated_pixel_index", run.generated_pixel_index},
      {"fidelity", runner_detail::fidelity_json(run.generated, truth, run.generated_pixel_index)},
      {"consistency", runner_detail::consistency_json(run.generated)},
      {"pace", runner_detail::pace_json(run.generated, track_idx, cfg.metrics.threshold)},
      {"ground_truth_pace", runner_detail::pace_json(truth, truth_idx, cfg.metrics.threshold)},
      {"counters", runner_detail::counters_json(res.counters)},
      {"expected_biased_cross_attention_calls", expected_biased_calls(dit)},
  };
  return run;
}

struct GenerateOutput {
  json report;  // without wall time
  std::vector<EntryRun> runs;
};

inline GenerateOutput generate_report(const BenchManifest& manifest, const std::filesystem::path& manifest_dir,
                                      const RunConfig& cfg) {
  cfg.validate();
  validate_manifest(manifest);
  std::vector<ManifestEntry> entries = manifest.entries;
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  GenerateOutput out;
  Instrumentation total;
  json rows = json::array();
  for (const auto& e : entries) {
    EntryRun run = run_entry(e, load_entry_video(e, manifest_dir), cfg);
    runner_detail::accumulate(total, run.counters);
    rows.push_back(run.report);
    out.runs.push_back(std::move(run));
  }
  out.report = {{"schema_version", kReportSchemaVersion},
                {"command", "generate"},
                {"config", config_to_json(cfg)},
                {"entries", rows},
                {"totals", {{"entries", entries.size()}, {"counters", runner_detail::counters_json(total)}}}};
  return out;
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationCell {
  const char* name;
  bool kab;
  bool retro;
};

inline constexpr std::array<AblationCell, 4> kAblationCells = {{
    {"baseline", false, false},
    {"kab", true, false},
    {"retro", false, true},
    {"kab_retro", true, true},
}};

// Switching KAB off also selects the asymmetric fusion, as `--no-kab` does.
inline RunConfig ablation_config(const RunConfig& base, const AblationCell& cell) {
  RunConfig cfg = base;
  Overrides o;
  o.no_kab = !cell.kab;
  o.no_retro = !cell.retro;
  cfg.dit.kab_enabled = true;
  cfg.dit.retro_enabled = true;
  apply_overrides(cfg, o);
  return cfg;
}

inline json ablate_report(const BenchManifest& manifest, const std::filesystem::path& manifest_dir,
                          const RunConfig& cfg) {
  json cells = json::array();
  for (const auto& cell : kAblationCells) {
    const RunConfig cell_cfg = ablation_config(cfg, cell);
    cells.push_back({{"name", cell.name},
                     {"kab", cell.kab},
                     {"retro", cell.retro},
                     {"report", generate_report(manifest, manifest_dir, cell_cfg).report}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"command", "ablate"},
          {"config", config_to_json(cfg)},
          {"cells", cells}};
}

// ---------------------------------------------------------------------------
// Probe

inline RopeFrequencyTable probe_table(const RunConfig& cfg) {
  return build_frequency_rows(cfg.dit.head_dim, default_axis_split(cfg.dit.head_dim), cfg.dit.rope_base,
                              {cfg.probe.frames, cfg.probe.grid_h, cfg.probe.grid_w});
}

inline ProbeResult run_probe_once(const RunConfig& cfg, int repetition) {
  ProbeSettings s;
  s.n_seeds = cfg.probe.n_seeds;
  s.window = cfg.probe.window;
  s.seed = derive_seed(cfg.dit.seed, 0x9000u + static_cast<std::uint64_t>(repetition));
  return attention_probe(cfg.probe.frames, cfg.probe.grid_h * cfg.probe.grid_w, probe_table(cfg), cfg.dit.retro, s);
}

inline json profile_json(const AttentionProfile& p) {
  return {{"local_mass", numbers_or_sentinels(p.local_mass)}, {"entropy", numbers_or_sentinels(p.entropy)}};
}

inline std::vector<double> difference(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline json probe_report(const RunConfig& cfg) {
  cfg.validate();
  json reps = json::array();
  bool edge_up = true, mid_up = true, edge_down = true, mid_down = true;
  for (int r = 0; r < cfg.probe.repetitions; ++r) {
    const ProbeResult p = run_probe_once(cfg, r);
    const double de = p.edge_local_mass_delta();
    const double dm = p.mid_entropy_delta();
    edge_up = edge_up && de > 0.0;
    edge_down = edge_down && de < 0.0;
    mid_up = mid_up && dm > 0.0;
    mid_down = mid_down && dm < 0.0;
    reps.push_back({{"repetition", r},
                    {"vanilla", profile_json(p.vanilla)},
                    {"retro", profile_json(p.retro)},
                    {"difference",
                     {{"local_mass", numbers_or_sentinels(difference(p.retro.local_mass, p.vanilla.local_mass))},
                      {"entropy", numbers_or_sentinels(difference(p.retro.entropy, p.vanilla.entropy))}}},
                    {"edge_local_mass", {{"vanilla", number_or_sentinel(p.edge_local_mass_vanilla)},
                                         {"retro", number_or_sentinel(p.edge_local_mass_retro)},
                                         {"delta", number_or_sentinel(de)}}},
                    {"mid_entropy", {{"vanilla", number_or_sentinel(p.mid_entropy_vanilla)},
                                     {"retro", number_or_sentinel(p.mid_entropy_retro)},
                                     {"delta", number_or_sentinel(dm)}}}});
  }
  const auto sign = [](bool up, bool down) { return up ? "positive" : down ? "negative" : "mixed"; };
  const int f = cfg.probe.frames;
  const int w = cfg.dit.retro.resolve_w_edge(f);
  const EdgeMidSets sets = edge_mid_sets(f, w);
  return {{"schema_version", kReportSchemaVersion},
          {"command", "probe"},
          {"config", config_to_json(cfg)},
          {"probe",
           {{"f", f},
            {"l_q", cfg.probe.grid_h * cfg.probe.grid_w},
            {"n_seeds", cfg.probe.n_seeds},
            {"window", cfg.probe.window},
            {"repetitions", cfg.probe.repetitions},
            {"w_edge", w},
            {"edge_frames", sets.edge},
            {"mid_frames", sets.mid},
            {"runs", reps},
            {"sign_summary",
             {{"edge_local_mass_delta", sign(edge_up, edge_down)}, {"mid_entropy_delta", sign(mid_up, mid_down)}}}}}};
}

// ---------------------------------------------------------------------------
// Standalone metrics over manifest videos, optionally against predictions
// stored as <pred_dir>/<id>.tgiv (either F frames or latent-rate frames).

inline json metrics_report(const BenchManifest& manifest, const std::filesystem::path& manifest_dir,
                           const RunConfig& cfg, const std::optional<std::filesystem::path>& pred_dir) {
  cfg.validate();
  validate_manifest(manifest);
  std::vector<ManifestEntry> entries = manifest.entries;
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  json rows = json::array();
  for (const auto& e : entries) {
    const VideoArray truth = load_entry_video(e, manifest_dir);
    json row = {{"id", e.id},
                {"challenge", std::string(challenge_name(e.challenge))},
                {"F", e.F},
                {"consistency", runner_detail::consistency_json(truth)},
                {"pace", runner_detail::pace_json(truth, subsample_indices(e.F, cfg.metrics.stride),
                                                  cfg.metrics.threshold)}};
    if (pred_dir) {
      const VideoArray pred = read_video((*pred_dir / (e.id + ".tgiv")).string());
      pred.validate();
      if (pred.height != truth.height || pred.width != truth.width || pred.channels != truth.channels)
        throw ManifestError("prediction for '" + e.id + "' has a different frame shape");
      std::vector<int> idx;
      if (pred.frames == e.F) {
        for (int i = 0; i < e.F; ++i) idx.push_back(i);
      } else if (e.F >= 2 && (e.F == 2 || (e.F - 1) % kTemporalStride == 0) && pred.frames == latent_frame_count(e.F)) {
        for (int t = 0; t < pred.frames; ++t) idx.push_back(pixel_index_of_latent(t, e.F));
      } else {
        throw ManifestError("prediction for '" + e.id + "' has " + std::to_string(pred.frames) + " frames");
      }
      row["fidelity"] = runner_detail::fidelity_json(pred, truth, idx);
    }
    rows.push_back(row);
  }
  return {{"schema_version", kReportSchemaVersion},
          {"command", "metrics"},
          {"config", config_to_json(cfg)},
          {"entries", rows}};
}

// Times `fn` and stores the elapsed seconds in the returned report.
template <typename Fn>
json timed(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  json report = fn();
  report["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace tgi::bench
