// SPDX-License-Identifier: Apache-2.0
//
// Content-free self-attention probe. Each seed draws one random content
// vector that every token uses as both query and key, so the logits between
// two tokens depend only on their rotary phase difference and the content's
// per-pair energy. Comparing the vanilla table with the rescaled table shows
// how temporal rescaling redistributes attention across frames.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "tgi/kab_attention.hpp"
#include "tgi/latent_pipeline.hpp"
#include "tgi/rope_retro.hpp"
#include "tgi/tensor.hpp"

namespace tgi {

struct AttentionProfile {
  std::vector<double> local_mass;  // per frame: attention within +-window frames
  std::vector<double> entropy;     // per frame: mean row entropy in nats
};

struct ProbeSettings {
  int n_seeds = 200;
  int window = 2;
  std::uint64_t seed = 0;
  double content_norm = 1.0;
};

struct ProbeResult {
  int f = 0;
  int l_q = 0;
  int n_seeds = 0;
  int window = 0;
  int w_edge = 0;
  EdgeMidSets sets;
  AttentionProfile vanilla;
  AttentionProfile retro;

  // Means over the edge / middle frame sets; NaN when the set is empty.
  double edge_local_mass_vanilla = 0.0;
  double edge_local_mass_retro = 0.0;
  double mid_entropy_vanilla = 0.0;
  double mid_entropy_retro = 0.0;

  double edge_local_mass_delta() const { return edge_local_mass_retro - edge_local_mass_vanilla; }
  double mid_entropy_delta() const { return mid_entropy_retro - mid_entropy_vanilla; }
};

namespace detail {

inline double mean_over(const std::vector<double>& values, const std::vector<int>& frames) {
  if (frames.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (int t : frames) acc += values[static_cast<std::size_t>(t)];
  return acc / static_cast<double>(frames.size());
}

// Adds this content vector's per-frame statistics into `acc`.
inline void accumulate_profile(const std::vector<double>& content, const RopeFrequencyTable& table,
                               const std::vector<TokenPosition>& positions, int l_q, int window,
                               AttentionProfile& acc) {
  const std::size_t n = positions.size();
  const std::size_t head_dim = content.size();
  Matrix x(n, head_dim);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < head_dim; ++c) x(r, c) = content[c];
  const Matrix rotated = apply_rope(x, table, positions);
  Matrix logits = matmul_transposed(rotated, rotated);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (double& v : logits.flat()) v *= scale;
  const Matrix attn = softmax_rows(logits);

  const double per_row = 1.0 / static_cast<double>(l_q);
  for (std::size_t i = 0; i < n; ++i) {
    const int ti = positions[i].t;
    double local = 0.0;
    double entropy = 0.0;
    auto row = attn.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double p = row[j];
      if (std::abs(positions[j].t - ti) <= window) local += p;
      if (p > 0.0) entropy -= p * std::log(p);
    }
    acc.local_mass[static_cast<std::size_t>(ti)] += local * per_row;
    acc.entropy[static_cast<std::size_t>(ti)] += entropy * per_row;
  }
}

}  // namespace detail

// `table` is the unscaled table; its spatial extent defines the l_q tokens of
// each frame and must satisfy height * width == l_q.
inline ProbeResult attention_probe(int f, int l_q, const RopeFrequencyTable& table, const RetroConfig& retro_cfg,
                                   const ProbeSettings& settings) {
  detail::require(f >= 2, "attention_probe: f must be >= 2");
  detail::require(settings.n_seeds >= 1, "attention_probe: n_seeds must be >= 1");
  detail::require(settings.window >= 0, "attention_probe: window must be >= 0");
  detail::require(table.frames() >= f, "attention_probe: table does not cover f frames");
  detail::require(table.height() * table.width() == l_q, "attention_probe: table spatial extent must equal l_q");

  const FrameGrid grid{f, table.height(), table.width(), table.head_dim()};
  const auto positions = grid_positions(grid);
  const RopeFrequencyTable scaled = retro_scale(table, retro_cfg, f);

  ProbeResult result;
  result.f = f;
  result.l_q = l_q;
  result.n_seeds = settings.n_seeds;
  result.window = settings.window;
  result.w_edge = retro_cfg.resolve_w_edge(f);
  result.sets = edge_mid_sets(f, result.w_edge);
  for (AttentionProfile* p : {&result.vanilla, &result.retro}) {
    p->local_mass.assign(static_cast<std::size_t>(f), 0.0);
    p->entropy.assign(static_cast<std::size_t>(f), 0.0);
  }

  const auto head_dim = static_cast<std::size_t>(table.head_dim());
  for (int s = 0; s < settings.n_seeds; ++s) {
    Rng rng(derive_seed(settings.seed, static_cast<std::uint64_t>(s)));
    std::vector<double> content(head_dim);
    double norm = 0.0;
    for (double& v : content) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : content) v *= settings.content_norm / norm;
    detail::accumulate_profile(content, table, positions, l_q, settings.window, result.vanilla);
    detail::accumulate_profile(content, scaled, positions, l_q, settings.window, result.retro);
  }
  for (AttentionProfile* p : {&result.vanilla, &result.retro}) {
    for (double& v : p->local_mass) v /= settings.n_seeds;
    for (double& v : p->entropy) v /= settings.n_seeds;
  }

  result.edge_local_mass_vanilla = detail::mean_over(result.vanilla.local_mass, result.sets.edge);
  result.edge_local_mass_retro = detail::mean_over(result.retro.local_mass, result.sets.edge);
  result.mid_entropy_vanilla = detail::mean_over(result.vanilla.entropy, result.sets.mid);
  result.mid_entropy_retro = detail::mean_over(result.retro.entropy, result.sets.mid);
  return result;
}

}  // namespace tgi
