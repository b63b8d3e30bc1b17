// SPDX-License-Identifier: Apache-2.0
//
// Miniature video diffusion transformer: each block is
//   h += SelfAttn(rms(h))      rotary Q/K over all f*l_q video tokens
//   h += CrossAttn(rms(h))     first image / last image / text conditions
//   h += MLP(rms(h))
// with seeded random weights (no training) and a deterministic DDIM sampler
// on a linear alpha-bar schedule. Keyframe latents are re-imposed after every
// sampler step.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tgi/errors.hpp"
#include "tgi/kab_attention.hpp"
#include "tgi/latent_pipeline.hpp"
#include "tgi/rope_retro.hpp"
#include "tgi/tensor.hpp"

namespace tgi {

struct DitConfig {
  int n_blocks = 8;
  int n_heads = 4;
  int head_dim = 16;
  int n_steps = 50;
  std::uint64_t seed = 0;
  int mlp_ratio = 2;
  double rope_base = kDefaultRopeBase;

  bool retro_enabled = true;
  RetroConfig retro;

  bool kab_enabled = true;
  GuidanceSchedule guidance;
  FusionMode fusion = FusionMode::triple_isolated;

  int hidden_dim() const { return n_heads * head_dim; }

  void validate() const {
    detail::require<ConfigError>(n_blocks >= 1, "dit.n_blocks must be >= 1");
    detail::require<ConfigError>(n_heads >= 1, "dit.n_heads must be >= 1");
    detail::require<ConfigError>(head_dim >= 2 && head_dim % 2 == 0, "dit.head_dim must be even and >= 2");
    detail::require<ConfigError>(n_steps >= 1, "dit.n_steps must be >= 1");
    detail::require<ConfigError>(mlp_ratio >= 1, "dit.mlp_ratio must be >= 1");
    detail::require<ConfigError>(rope_base > 1.0, "dit.rope_base must exceed 1");
    retro.validate();
    guidance.validate();
  }
};

// Counters accumulated over one sampler run.
struct Instrumentation {
  long denoiser_calls = 0;
  long self_attention_calls = 0;
  long cross_attention_calls = 0;
  long biased_cross_attention_calls = 0;
  long guided_steps = 0;  // steps with guidance active in at least one block

  bool operator==(const Instrumentation&) const = default;
};

struct SelfAttentionWeights {
  Matrix q, k, v, o;  // hidden x hidden
};

namespace detail {

inline void gelu_inplace(Matrix& m) {
  constexpr double kAlpha = 0.7978845608028654;  // sqrt(2/pi)
  for (double& x : m.flat()) x = 0.5 * x * (1.0 + std::tanh(kAlpha * (x + 0.044715 * x * x * x)));
}

}  // namespace detail

// Multi-head self-attention with rotary queries and keys; values unrotated.
// `hidden` is (tokens x n_heads*head_dim), already normalised by the caller.
inline Matrix self_attention(const Matrix& hidden, const SelfAttentionWeights& w, const RopeFrequencyTable& table,
                             std::span<const TokenPosition> positions, int n_heads) {
  detail::require(n_heads >= 1 && hidden.cols() % static_cast<std::size_t>(n_heads) == 0,
                  "self_attention: hidden width not divisible by head count");
  const std::size_t head_dim = hidden.cols() / static_cast<std::size_t>(n_heads);
  detail::require(head_dim == static_cast<std::size_t>(table.head_dim()),
                  "self_attention: frequency table head_dim mismatch");
  detail::require(positions.size() == hidden.rows(), "self_attention: one position per token required");

  const Matrix q = matmul(hidden, w.q);
  const Matrix k = matmul(hidden, w.k);
  const Matrix v = matmul(hidden, w.v);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Matrix mixed(hidden.rows(), hidden.cols());
  for (int h = 0; h < n_heads; ++h) {
    const std::size_t off = static_cast<std::size_t>(h) * head_dim;
    const Matrix qh = apply_rope(slice_cols(q, off, head_dim), table, positions);
    const Matrix kh = apply_rope(slice_cols(k, off, head_dim), table, positions);
    Matrix attn = matmul_transposed(qh, kh);
    for (double& x : attn.flat()) x *= scale;
    attn = softmax_rows(attn);
    assign_cols(mixed, off, matmul(attn, slice_cols(v, off, head_dim)));
  }
  return matmul(mixed, w.o);
}

inline RopeFrequencyTable make_rope_table(const DitConfig& cfg, const FrameGrid& grid) {
  RopeFrequencyTable table = build_frequency_rows(cfg.head_dim, default_axis_split(cfg.head_dim), cfg.rope_base,
                                                  {grid.f, grid.grid_h, grid.grid_w});
  if (cfg.retro_enabled) table = retro_scale(table, cfg.retro, grid.f);
  return table;
}

class DitModel {
 public:
  DitModel(const DitConfig& cfg, int latent_dim, int ctx_dim) : cfg_(cfg), latent_dim_(latent_dim), ctx_dim_(ctx_dim) {
    cfg_.validate();
    detail::require(latent_dim >= 1 && ctx_dim >= 1, "DitModel: latent and context dims must be positive");
    Rng rng(derive_seed(cfg_.seed, 0xD17));
    const auto d = static_cast<std::size_t>(cfg_.hidden_dim());
    const auto ld = static_cast<std::size_t>(latent_dim);
    const auto cd = static_cast<std::size_t>(ctx_dim);
    const auto md = d * static_cast<std::size_t>(cfg_.mlp_ratio);
    const double residual = 1.0 / std::sqrt(2.0 * cfg_.n_blocks);
    auto init = [&rng](std::size_t rows, std::size_t cols, double gain = 1.0) {
      return rng.normal_matrix(rows, cols, gain / std::sqrt(static_cast<double>(rows)));
    };

    in_noisy_ = init(ld, d);
    in_cond_ = init(ld, d);
    mask_embedding_ = rng.normal_matrix(1, d, 1.0);
    blocks_.reserve(static_cast<std::size_t>(cfg_.n_blocks));
    for (int b = 0; b < cfg_.n_blocks; ++b) {
      Block blk;
      blk.self = {init(d, d), init(d, d), init(d, d), init(d, d, residual)};
      blk.cross_q = init(d, d);
      blk.cross_o = init(d, d, residual);
      blk.k_img = init(cd, d);
      blk.v_img = init(cd, d);
      blk.k_txt = init(cd, d);
      blk.v_txt = init(cd, d);
      blk.mlp_in = init(d, md);
      blk.mlp_out = init(md, d, residual);
      blocks_.push_back(std::move(blk));
    }
    out_ = init(d, ld);
  }

  const DitConfig& config() const { return cfg_; }
  int latent_dim() const { return latent_dim_; }
  int ctx_dim() const { return ctx_dim_; }

  // Clean-latent prediction for `noisy` at sampler step `step_idx` (1-based).
  Matrix forward(const Matrix& noisy, const TokenSequence& conditional, const ConditionSet& cond,
                 const RopeFrequencyTable& table, int step_idx, double noise_level,
                 Instrumentation* counters = nullptr) const {
    const FrameGrid& grid = conditional.grid;
    detail::require(noisy.rows() == grid.token_count() && noisy.cols() == static_cast<std::size_t>(latent_dim_),
                    "dit_forward: noisy latent shape mismatch");
    detail::require(conditional.values.cols() == static_cast<std::size_t>(latent_dim_),
                    "dit_forward: conditional latent channel mismatch");
    detail::require(cond.ctx_dim() == static_cast<std::size_t>(ctx_dim_), "dit_forward: context dim mismatch");
    cond.validate();

    const auto positions = grid_positions(grid);
    Matrix h = matmul(noisy, in_noisy_);
    add_inplace(h, matmul(conditional.values, in_cond_));
    add_frame_embeddings(h, conditional, noise_level);

    CrossAttentionCounters cross;
    bool any_gate = false;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const Block& blk = blocks_[b];
      add_inplace(h, self_attention(rms_norm_rows(h), blk.self, table, positions, cfg_.n_heads));

      const Matrix q = matmul(rms_norm_rows(h), blk.cross_q);
      const ConditionKV first{matmul(cond.first_img, blk.k_img), matmul(cond.first_img, blk.v_img)};
      const ConditionKV last{matmul(cond.last_img, blk.k_img), matmul(cond.last_img, blk.v_img)};
      const ConditionKV text{matmul(cond.text, blk.k_txt), matmul(cond.text, blk.v_txt)};
      const bool gate =
          cfg_.kab_enabled && gate_active(static_cast<int>(b) + 1, step_idx, cfg_.n_steps, cfg_.guidance);
      any_gate = any_gate || gate;
      const Matrix fused =
          fused_cross_attention(cfg_.fusion, q, first, last, text, cfg_.n_heads, grid.l_q(), cfg_.guidance, gate, &cross);
      add_inplace(h, matmul(fused, blk.cross_o));

      Matrix mid = matmul(rms_norm_rows(h), blk.mlp_in);
      detail::gelu_inplace(mid);
      add_inplace(h, matmul(mid, blk.mlp_out));
    }
    Matrix out = matmul(rms_norm_rows(h), out_);
    detail::require<NumericError>(all_finite(out.flat()), "dit_forward: non-finite prediction");

    if (counters) {
      ++counters->denoiser_calls;
      counters->self_attention_calls += static_cast<long>(blocks_.size());
      counters->cross_attention_calls += cross.attention_calls;
      counters->biased_cross_attention_calls += cross.biased_calls;
      if (any_gate) ++counters->guided_steps;
    }
    return out;
  }

 private:
  struct Block {
    SelfAttentionWeights self;
    Matrix cross_q, cross_o;
    Matrix k_img, v_img, k_txt, v_txt;
    Matrix mlp_in, mlp_out;
  };

  // Keyframe-mask embedding plus a sinusoidal noise-level embedding.
  void add_frame_embeddings(Matrix& h, const TokenSequence& conditional, double noise_level) const {
    const std::size_t d = h.cols();
    std::vector<double> level(d);
    const std::size_t half = d / 2;
    for (std::size_t i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
      level[2 * i] = std::sin(1000.0 * noise_level * freq);
      level[2 * i + 1] = std::cos(1000.0 * noise_level * freq);
    }
    const auto l_q = static_cast<std::size_t>(conditional.grid.l_q());
    for (std::size_t r = 0; r < h.rows(); ++r) {
      const bool key = conditional.mask[r / l_q] != 0;
      auto row = h.row(r);
      for (std::size_t c = 0; c < d; ++c) row[c] += level[c] + (key ? mask_embedding_(0, c) : 0.0);
    }
  }

  DitConfig cfg_;
  int latent_dim_;
  int ctx_dim_;
  Matrix in_noisy_, in_cond_, mask_embedding_, out_;
  std::vector<Block> blocks_;
};

// alpha_bar at schedule index k in [0, n_steps]; k = 0 is pure noise.
inline double alpha_bar(int k, int n_steps) { return static_cast<double>(k) / static_cast<double>(n_steps); }

struct SampleResult {
  TokenSequence video;
  Instrumentation counters;
};

inline void reimpose_keyframes(Matrix& x, const TokenSequence& conditional) {
  const auto l_q = static_cast<std::size_t>(conditional.grid.l_q());
  for (int t = 0; t < conditional.grid.f; ++t) {
    if (!conditional.mask[static_cast<std::size_t>(t)]) continue;
    const std::size_t base = static_cast<std::size_t>(t) * l_q;
    for (std::size_t r = base; r < base + l_q; ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) = conditional.values(r, c);
  }
}

inline SampleResult sample(const TokenSequence& conditional, const ConditionSet& cond, const DitConfig& cfg) {
  cfg.validate();
  conditional.grid.validate();
  detail::require(conditional.mask.size() == static_cast<std::size_t>(conditional.grid.f) &&
                      conditional.mask.front() == 1 && conditional.mask.back() == 1,
                  "sample: conditional sequence must mark frames 0 and f-1 as keyframes");
  const DitModel model(cfg, static_cast<int>(conditional.values.cols()), static_cast<int>(cond.ctx_dim()));
  const RopeFrequencyTable table = make_rope_table(cfg, conditional.grid);

  Rng noise_rng(derive_seed(cfg.seed, 0x5A3));
  Matrix x = noise_rng.normal_matrix(conditional.values.rows(), conditional.values.cols());
  reimpose_keyframes(x, conditional);

  SampleResult result;
  for (int step = 1; step <= cfg.n_steps; ++step) {
    const double ab = alpha_bar(step - 1, cfg.n_steps);
    const double ab_next = alpha_bar(step, cfg.n_steps);
    const Matrix x0 = model.forward(x, conditional, cond, table, step, 1.0 - ab, &result.counters);
    const double sa = std::sqrt(ab);
    const double sb = std::sqrt(1.0 - ab);
    const double sa_next = std::sqrt(ab_next);
    const double sb_next = std::sqrt(1.0 - ab_next);
    auto xs = x.flat();
    auto x0s = x0.flat();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double eps = (xs[i] - sa * x0s[i]) / sb;
      xs[i] = sa_next * x0s[i] + sb_next * eps;
    }
    reimpose_keyframes(x, conditional);
  }
  detail::require<NumericError>(all_finite(x.flat()), "sample: non-finite latent");
  result.video = conditional;
  result.video.values = std::move(x);
  return result;
}

// Assembles the conditional sequence from encoded keyframes, then samples.
inline SampleResult sample(const Matrix& first_latent, const Matrix& last_latent, int pixel_frames, int grid_h,
                           int grid_w, const ConditionSet& cond, const DitConfig& cfg) {
  return sample(assemble_latent_sequence(first_latent, last_latent, pixel_frames, grid_h, grid_w), cond, cfg);
}

// Expected biased cross-attention calls for one sampler run.
inline long expected_biased_calls(const DitConfig& cfg) {
  if (!cfg.kab_enabled) return 0;
  const int lo = std::max(cfg.guidance.layer_lo, 1);
  const int hi = std::min(cfg.guidance.layer_hi, cfg.n_blocks);
  const long layers = hi >= lo ? hi - lo + 1 : 0;
  const long per_call = cfg.fusion == FusionMode::triple_isolated ? 3 : 2;
  return layers * active_step_count(cfg.n_steps, cfg.guidance) * per_call;
}

}  // namespace tgi
