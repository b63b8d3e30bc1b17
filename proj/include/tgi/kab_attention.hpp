// SPDX-License-Identifier: Apache-2.0
//
// Cross-attention with keyframe-anchored logit bias.
//
// For one condition and one attention instance:
//   A_h        = softmax(L_h)                                 (per head)
//   Abar(t)    = mean over heads and the l_q query rows of frame t of A_h
//   M(t)       = (1 - t/(f-1)) Abar(0) + t/(f-1) Abar(f-1)
//   B(t)       = log(M(t) + eps) - log(Abar(t) + eps)
//   A~_h       = softmax(L_h + beta(t) B(t))                  (B broadcast over heads and rows of frame t)
// Anchors are always measured from the same attention instance they bias.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tgi/errors.hpp"
#include "tgi/tensor.hpp"

namespace tgi {

// Per-head logits, each (f*l_q x l_k), already scaled by 1/sqrt(d_h).
struct AttentionLogits {
  std::vector<Matrix> heads;
  int l_q = 1;

  std::size_t rows() const { return heads.empty() ? 0 : heads.front().rows(); }
  std::size_t keys() const { return heads.empty() ? 0 : heads.front().cols(); }
  int frames() const { return static_cast<int>(rows() / static_cast<std::size_t>(l_q)); }

  void validate() const {
    detail::require(!heads.empty(), "AttentionLogits: no heads");
    detail::require(l_q >= 1, "AttentionLogits: l_q must be >= 1");
    for (const auto& h : heads) {
      detail::require(h.rows() == rows() && h.cols() == keys(), "AttentionLogits: heads differ in shape");
      detail::require<NumericError>(all_finite(h.flat()), "AttentionLogits: non-finite logit");
    }
    detail::require(keys() >= 1, "AttentionLogits: no keys");
    detail::require(rows() % static_cast<std::size_t>(l_q) == 0, "AttentionLogits: row count not divisible by l_q");
  }
};

// Per-head row-stochastic maps with the same layout as AttentionLogits.
using AttentionMap = std::vector<Matrix>;

inline void softmax_row_inplace(std::span<double> row) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : row) peak = std::max(peak, v);
  double total = 0.0;
  for (double& v : row) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : row) v /= total;
}

inline Matrix softmax_rows(const Matrix& logits) {
  detail::require<NumericError>(all_finite(logits.flat()), "softmax_rows: non-finite logit");
  Matrix out = logits;
  for (std::size_t r = 0; r < out.rows(); ++r) softmax_row_inplace(out.row(r));
  return out;
}

inline AttentionMap softmax_rows(const AttentionLogits& logits) {
  logits.validate();
  AttentionMap out;
  out.reserve(logits.heads.size());
  for (const auto& h : logits.heads) out.push_back(softmax_rows(h));
  return out;
}

struct FrameAnchor {
  std::vector<double> probs;
  int frame = 0;
};

inline FrameAnchor frame_mean_attention(const AttentionMap& attention, int t, int l_q) {
  detail::require(!attention.empty() && l_q >= 1, "frame_mean_attention: empty attention map");
  const std::size_t rows = attention.front().rows();
  const int f = static_cast<int>(rows / static_cast<std::size_t>(l_q));
  detail::require(t >= 0 && t < f, "frame_mean_attention: frame " + std::to_string(t) + " out of range");
  const std::size_t keys = attention.front().cols();
  FrameAnchor anchor{std::vector<double>(keys, 0.0), t};
  const std::size_t begin = static_cast<std::size_t>(t) * static_cast<std::size_t>(l_q);
  for (const auto& head : attention) {
    for (std::size_t r = begin; r < begin + static_cast<std::size_t>(l_q); ++r) {
      auto row = head.row(r);
      for (std::size_t k = 0; k < keys; ++k) anchor.probs[k] += row[k];
    }
  }
  const double count = static_cast<double>(attention.size()) * static_cast<double>(l_q);
  for (double& p : anchor.probs) p /= count;
  return anchor;
}

inline FrameAnchor interpolate_anchor(const FrameAnchor& a0, const FrameAnchor& a_last, int t, int f) {
  detail::require(f >= 2, "interpolate_anchor: f must be >= 2");
  detail::require(t >= 0 && t <= f - 1, "interpolate_anchor: frame " + std::to_string(t) + " out of range");
  detail::require(a0.probs.size() == a_last.probs.size(), "interpolate_anchor: anchor length mismatch");
  if (t == 0) return {a0.probs, 0};
  if (t == f - 1) return {a_last.probs, f - 1};
  const double tau = static_cast<double>(t) / static_cast<double>(f - 1);
  FrameAnchor out{std::vector<double>(a0.probs.size()), t};
  for (std::size_t k = 0; k < out.probs.size(); ++k) out.probs[k] = (1.0 - tau) * a0.probs[k] + tau * a_last.probs[k];
  return out;
}

struct GuidanceSchedule {
  double beta_min = 0.3;
  double beta_max = 0.7;
  int layer_lo = 5;  // 1-based, inclusive
  int layer_hi = 12;
  double step_fraction = 0.4;
  double epsilon = 1e-6;

  void validate() const {
    detail::require<ConfigError>(std::isfinite(beta_min) && beta_min >= 0.0, "kab.beta_min must be >= 0");
    detail::require<ConfigError>(std::isfinite(beta_max) && beta_min <= beta_max,
                                 "kab.beta_min must not exceed kab.beta_max");
    detail::require<ConfigError>(layer_lo >= 1 && layer_lo <= layer_hi,
                                 "kab.layer_lo must be >= 1 and <= kab.layer_hi");
    detail::require<ConfigError>(step_fraction > 0.0 && step_fraction <= 1.0, "kab.step_fraction must lie in (0, 1]");
    detail::require<ConfigError>(std::isfinite(epsilon) && epsilon > 0.0, "kab.epsilon must be > 0");
  }
};

// Cosine taper: beta_max at both keyframes, beta_min at the midpoint.
inline double beta_at(int t, int f, const GuidanceSchedule& schedule) {
  detail::require(f >= 2, "beta_at: f must be >= 2");
  detail::require(t >= 0 && t <= f - 1, "beta_at: frame out of range");
  const double tau = static_cast<double>(t) / static_cast<double>(f - 1);
  return schedule.beta_min +
         (schedule.beta_max - schedule.beta_min) * (1.0 + std::cos(2.0 * std::numbers::pi * tau)) / 2.0;
}

inline std::vector<double> logit_bias(const FrameAnchor& target, const FrameAnchor& measured, double epsilon) {
  detail::require(target.probs.size() == measured.probs.size(), "logit_bias: anchor length mismatch");
  detail::require(epsilon > 0.0, "logit_bias: epsilon must be > 0");
  std::vector<double> bias(target.probs.size());
  for (std::size_t k = 0; k < bias.size(); ++k) {
    detail::require(target.probs[k] >= 0.0 && measured.probs[k] >= 0.0, "logit_bias: negative anchor entry");
    bias[k] = std::log(target.probs[k] + epsilon) - std::log(measured.probs[k] + epsilon);
  }
  return bias;
}

// Number of leading sampler steps with guidance: ceil(step_fraction * N).
inline int active_step_count(int total_steps, const GuidanceSchedule& schedule) {
  detail::require(total_steps >= 1, "active_step_count: total_steps must be >= 1");
  const double raw = schedule.step_fraction * static_cast<double>(total_steps);
  // Absorb representation error such as 0.4 * 50 = 20.000000000000004.
  const int count = static_cast<int>(std::ceil(raw - 1e-9 * static_cast<double>(total_steps)));
  return std::clamp(count, 0, total_steps);
}

inline bool gate_active(int layer_idx, int step_idx, int total_steps, const GuidanceSchedule& schedule) {
  return layer_idx >= schedule.layer_lo && layer_idx <= schedule.layer_hi && step_idx >= 1 &&
         step_idx <= active_step_count(total_steps, schedule);
}

// Biased attention with explicitly supplied keyframe anchors. Frame anchors
// Abar(t) are still measured from `logits` itself.
inline AttentionMap apply_kab(const AttentionLogits& logits, const FrameAnchor& a0, const FrameAnchor& a_last,
                              const GuidanceSchedule& schedule, bool active) {
  AttentionMap plain = softmax_rows(logits);
  if (!active) return plain;
  detail::require(a0.probs.size() == logits.keys() && a_last.probs.size() == logits.keys(),
                  "apply_kab: anchor length does not match key count");
  const int f = logits.frames();
  const int l_q = logits.l_q;
  detail::require(f >= 2, "apply_kab: logits must cover at least two frames");

  AttentionMap biased;
  biased.reserve(logits.heads.size());
  for (const auto& h : logits.heads) biased.push_back(h);

  for (int t = 0; t < f; ++t) {
    const FrameAnchor measured = frame_mean_attention(plain, t, l_q);
    const FrameAnchor target = interpolate_anchor(a0, a_last, t, f);
    const auto bias = logit_bias(target, measured, schedule.epsilon);
    const double beta = beta_at(t, f, schedule);
    const std::size_t begin = static_cast<std::size_t>(t) * static_cast<std::size_t>(l_q);
    for (auto& head : biased) {
      for (std::size_t r = begin; r < begin + static_cast<std::size_t>(l_q); ++r) {
        auto row = head.row(r);
        for (std::size_t k = 0; k < row.size(); ++k) row[k] += beta * bias[k];
        softmax_row_inplace(row);
      }
    }
  }
  return biased;
}

// Anchors taken from the first and last frame of this instance's own map.
inline AttentionMap apply_kab(const AttentionLogits& logits, const GuidanceSchedule& schedule, bool active) {
  if (!active) return softmax_rows(logits);
  const AttentionMap plain = softmax_rows(logits);
  const int f = logits.frames();
  return apply_kab(logits, frame_mean_attention(plain, 0, logits.l_q), frame_mean_attention(plain, f - 1, logits.l_q),
                   schedule, true);
}

// ---------------------------------------------------------------------------
// Multi-head cross-attention over one or three condition groups.

// Projected keys and values of one condition, each (l_k x n_heads*head_dim).
struct ConditionKV {
  Matrix keys;
  Matrix values;
};

enum class FusionMode {
  triple_isolated,  // (O_first + O_last + O_text) / 3, each optionally biased
  baseline,         // O_first + O_[last ; text]
};

struct CrossAttentionCounters {
  long attention_calls = 0;
  long biased_calls = 0;
};

inline AttentionLogits cross_attention_logits(const Matrix& queries, const Matrix& keys, int n_heads, int l_q) {
  detail::require(n_heads >= 1 && queries.cols() % static_cast<std::size_t>(n_heads) == 0,
                  "cross_attention_logits: width not divisible by head count");
  detail::require(keys.cols() == queries.cols(), "cross_attention_logits: query/key width mismatch");
  detail::require(keys.rows() >= 1, "cross_attention_logits: empty key group");
  const std::size_t head_dim = queries.cols() / static_cast<std::size_t>(n_heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  AttentionLogits logits;
  logits.l_q = l_q;
  for (int h = 0; h < n_heads; ++h) {
    const std::size_t off = static_cast<std::size_t>(h) * head_dim;
    Matrix l(queries.rows(), keys.rows());
    for (std::size_t i = 0; i < queries.rows(); ++i) {
      auto q = queries.row(i);
      for (std::size_t j = 0; j < keys.rows(); ++j) {
        auto k = keys.row(j);
        double acc = 0.0;
        for (std::size_t c = 0; c < head_dim; ++c) acc += q[off + c] * k[off + c];
        l(i, j) = acc * scale;
      }
    }
    logits.heads.push_back(std::move(l));
  }
  return logits;
}

// Concatenates per-head A_h V_h into (rows x n_heads*head_dim).
inline Matrix attend_values(const AttentionMap& attention, const Matrix& values) {
  detail::require(!attention.empty(), "attend_values: empty attention map");
  const std::size_t n_heads = attention.size();
  detail::require(values.cols() % n_heads == 0, "attend_values: width not divisible by head count");
  detail::require(values.rows() == attention.front().cols(), "attend_values: value count != key count");
  const std::size_t head_dim = values.cols() / n_heads;
  Matrix out(attention.front().rows(), values.cols());
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t off = h * head_dim;
    const Matrix& a = attention[h];
    for (std::size_t i = 0; i < a.rows(); ++i) {
      auto dst = out.row(i);
      for (std::size_t j = 0; j < a.cols(); ++j) {
        const double w = a(i, j);
        auto v = values.row(j);
        for (std::size_t c = 0; c < head_dim; ++c) dst[off + c] += w * v[off + c];
      }
    }
  }
  return out;
}

// Attention of the video queries against a single condition group.
inline Matrix condition_attention(const Matrix& queries, const ConditionKV& cond, int n_heads, int l_q,
                                  const GuidanceSchedule& schedule, bool biased, CrossAttentionCounters* counters) {
  detail::require(cond.keys.rows() == cond.values.rows() && cond.keys.rows() >= 1,
                  "condition_attention: keys and values must be non-empty and equal in count");
  const AttentionLogits logits = cross_attention_logits(queries, cond.keys, n_heads, l_q);
  const AttentionMap attention = apply_kab(logits, schedule, biased);
  if (counters) {
    ++counters->attention_calls;
    if (biased) ++counters->biased_calls;
  }
  return attend_values(attention, cond.values);
}

inline Matrix triple_isolated_cross_attention(const Matrix& queries, const ConditionKV& first, const ConditionKV& last,
                                              const ConditionKV& text, int n_heads, int l_q,
                                              const GuidanceSchedule& schedule, bool gate,
                                              CrossAttentionCounters* counters = nullptr) {
  Matrix out = condition_attention(queries, first, n_heads, l_q, schedule, gate, counters);
  add_inplace(out, condition_attention(queries, last, n_heads, l_q, schedule, gate, counters));
  add_inplace(out, condition_attention(queries, text, n_heads, l_q, schedule, gate, counters));
  for (double& v : out.flat()) v /= 3.0;
  return out;
}

inline Matrix baseline_fusion_cross_attention(const Matrix& queries, const ConditionKV& first,
                                              const ConditionKV& last, const ConditionKV& text, int n_heads,
                                              int l_q, const GuidanceSchedule& schedule, bool gate,
                                              CrossAttentionCounters* counters = nullptr) {
  const ConditionKV joint{vstack(last.keys, text.keys), vstack(last.values, text.values)};
  Matrix out = condition_attention(queries, first, n_heads, l_q, schedule, gate, counters);
  add_inplace(out, condition_attention(queries, joint, n_heads, l_q, schedule, gate, counters));
  return out;
}

inline Matrix fused_cross_attention(FusionMode mode, const Matrix& queries, const ConditionKV& first,
                                    const ConditionKV& last, const ConditionKV& text, int n_heads, int l_q,
                                    const GuidanceSchedule& schedule, bool gate,
                                    CrossAttentionCounters* counters = nullptr) {
  if (mode == FusionMode::baseline)
    return baseline_fusion_cross_attention(queries, first, last, text, n_heads, l_q, schedule, gate, counters);
  return triple_isolated_cross_attention(queries, first, last, text, n_heads, l_q, schedule, gate, counters);
}

}  // namespace tgi
