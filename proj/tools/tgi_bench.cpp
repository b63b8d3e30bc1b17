// SPDX-License-Identifier: Apache-2.0
//
// tgi_bench: fixtures, generation, ablation, attention probe and metrics.
//
// Exit codes: 0 success, 1 usage or I/O error, 2 config error,
// 3 manifest error, 4 numeric failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tgi/bench/config.hpp"
#include "tgi/bench/fixtures.hpp"
#include "tgi/bench/manifest.hpp"
#include "tgi/bench/raw_tensor.hpp"
#include "tgi/bench/runner.hpp"

namespace fs = std::filesystem;
using namespace tgi;
using namespace tgi::bench;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool no_kab = false;
  bool no_retro = false;
  bool baseline_fusion = false;
  std::string out_dir = "out";
};

void add_common(CLI::App* cmd, CommonOptions& o, bool switches) {
  cmd->add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "override dit.seed");
  cmd->add_option("--out", o.out_dir, "output directory")->capture_default_str();
  if (switches) {
    cmd->add_flag("--no-kab", o.no_kab, "disable the keyframe attention bias (implies --baseline-fusion)");
    cmd->add_flag("--no-retro", o.no_retro, "disable temporal RoPE rescaling");
  }
  cmd->add_flag("--baseline-fusion", o.baseline_fusion, "fuse last-frame and text context in one attention call");
}

RunConfig resolve_config(const CommonOptions& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  apply_overrides(cfg, {o.seed, o.no_kab, o.no_retro, o.baseline_fusion});
  cfg.validate();
  return cfg;
}

void write_report(const fs::path& dir, const std::string& name, const json& report) {
  fs::create_directories(dir);
  const fs::path path = dir / name;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << report.dump(2) << '\n';
  std::cout << path.string() << '\n';
}

fs::path manifest_dir(const std::string& manifest_path) {
  const fs::path parent = fs::path(manifest_path).parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keyframe-guided video inbetweening bench"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string manifest_path;
  std::string pred_dir;
  std::vector<int> lengths{25};
  bool save_videos = false;
  std::optional<int> stride;

  auto* fixtures = app.add_subcommand("fixtures", "write synthetic fixture videos and a manifest");
  fixtures->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
  fixtures->add_option("--seed", opts.seed, "jitter seed");
  fixtures->add_option("--lengths", lengths, "pixel frame counts per challenge")->delimiter(',')->capture_default_str();

  auto* generate = app.add_subcommand("generate", "sample every manifest entry and report metrics");
  add_common(generate, opts, true);
  generate->add_option("--manifest", manifest_path, "JSONL manifest")->required();
  generate->add_flag("--save-videos", save_videos, "write decoded outputs to <out>/videos/<id>.tgiv");

  auto* ablate = app.add_subcommand("ablate", "run the four KAB x ReTRo cells");
  add_common(ablate, opts, false);
  ablate->add_option("--manifest", manifest_path, "JSONL manifest")->required();

  auto* probe = app.add_subcommand("probe", "compare vanilla and rescaled rotary attention profiles");
  add_common(probe, opts, false);

  auto* metrics = app.add_subcommand("metrics", "evaluate manifest videos, optionally against predictions");
  add_common(metrics, opts, false);
  metrics->add_option("--manifest", manifest_path, "JSONL manifest")->required();
  metrics->add_option("--pred", pred_dir, "directory of <id>.tgiv predictions");
  metrics->add_option("--stride", stride, "frame subsampling stride for the pace track");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fixtures) {
      const BenchManifest m = write_fixture_set(opts.out_dir, lengths, opts.seed.value_or(0));
      std::cout << (fs::path(opts.out_dir) / "manifest.jsonl").string() << " (" << m.entries.size() << " entries)\n";
      return 0;
    }

    RunConfig cfg = resolve_config(opts);
    const fs::path out(opts.out_dir);

    if (*generate) {
      const BenchManifest m = load_manifest(manifest_path);
      GenerateOutput result;
      const json report = timed([&] {
        result = generate_report(m, manifest_dir(manifest_path), cfg);
        return result.report;
      });
      write_report(out, "report.json", report);
      if (save_videos) {
        fs::create_directories(out / "videos");
        for (const auto& run : result.runs) write_video((out / "videos" / (run.entry.id + ".tgiv")).string(), run.generated);
      }
    } else if (*ablate) {
      const BenchManifest m = load_manifest(manifest_path);
      write_report(out, "ablation.json", timed([&] { return ablate_report(m, manifest_dir(manifest_path), cfg); }));
    } else if (*probe) {
      write_report(out, "probe.json", timed([&] { return probe_report(cfg); }));
    } else if (*metrics) {
      if (stride) cfg.metrics.stride = *stride;
      cfg.validate();
      const BenchManifest m = load_manifest(manifest_path);
      std::optional<fs::path> pred;
      if (!pred_dir.empty()) pred = fs::path(pred_dir);
      write_report(out, "metrics.json",
                   timed([&] { return metrics_report(m, manifest_dir(manifest_path), cfg, pred); }));
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ManifestError& e) {
    std::cerr << "manifest error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
