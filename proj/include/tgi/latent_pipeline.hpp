// SPDX-License-Identifier: Apache-2.0
//
// Conditional latent sequence construction. Tokens are laid out frame-major:
// token (t, h, w) lives at row t*l_q + h*grid_w + w, so the rows of a latent
// frame form one contiguous slice of any flattened attention tensor.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tgi/errors.hpp"
#include "tgi/tensor.hpp"

namespace tgi {

// Latent frames per pixel frame stride (Wan-VAE style causal compression).
inline constexpr int kTemporalStride = 4;

struct FrameGrid {
  int f = 2;
  int grid_h = 1;
  int grid_w = 1;
  int d = 1;

  int l_q() const { return grid_h * grid_w; }
  std::size_t token_count() const { return static_cast<std::size_t>(f) * static_cast<std::size_t>(l_q()); }

  void validate() const {
    detail::require(f >= 2, "FrameGrid: f must be >= 2, got " + std::to_string(f));
    detail::require(grid_h >= 1 && grid_w >= 1, "FrameGrid: spatial grid must be at least 1x1");
    detail::require(d >= 1, "FrameGrid: channel dimension must be >= 1");
  }

  bool operator==(const FrameGrid&) const = default;
};

struct TokenPosition {
  int t = 0;
  int h = 0;
  int w = 0;
  bool operator==(const TokenPosition&) const = default;
};

struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const RowRange&) const = default;
};

struct TokenSequence {
  FrameGrid grid;
  Matrix values;                    // (f * l_q) x d
  std::vector<std::uint8_t> mask;   // per latent frame: 1 = keyframe

  // Rows [t*l_q, (t+1)*l_q) as a standalone (l_q x d) matrix.
  Matrix frame(int t) const {
    Matrix out(static_cast<std::size_t>(grid.l_q()), values.cols());
    const std::size_t base = static_cast<std::size_t>(t) * static_cast<std::size_t>(grid.l_q());
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = values(base + r, c);
    return out;
  }

  void set_frame(int t, const Matrix& content) {
    const std::size_t base = static_cast<std::size_t>(t) * static_cast<std::size_t>(grid.l_q());
    for (std::size_t r = 0; r < content.rows(); ++r)
      for (std::size_t c = 0; c < content.cols(); ++c) values(base + r, c) = content(r, c);
  }
};

// Context tokens for the three conditions, each (l_k_c x d_ctx).
struct ConditionSet {
  Matrix first_img;
  Matrix last_img;
  Matrix text;

  std::size_t ctx_dim() const { return text.cols(); }

  void validate() const {
    detail::require(!first_img.empty() && !last_img.empty() && !text.empty(),
                    "ConditionSet: every condition group must be non-empty");
    detail::require(first_img.cols() == last_img.cols() && last_img.cols() == text.cols(),
                    "ConditionSet: condition groups must share the context dimension");
    detail::require<NumericError>(all_finite(first_img.flat()) && all_finite(last_img.flat()) &&
                                      all_finite(text.flat()),
                                  "ConditionSet: non-finite context value");
  }
};

// Pixel frame count F -> latent frame count f. F = 2 (keyframes only) maps to
// two latent frames; otherwise F - 1 must be a multiple of the stride.
inline int latent_frame_count(int pixel_frames) {
  detail::require(pixel_frames >= 2, "latent_frame_count: F must be >= 2, got " + std::to_string(pixel_frames));
  if (pixel_frames == 2) return 2;
  detail::require((pixel_frames - 1) % kTemporalStride == 0,
                  "latent_frame_count: F - 1 must be divisible by " + std::to_string(kTemporalStride) +
                      ", got F = " + std::to_string(pixel_frames));
  return (pixel_frames - 1) / kTemporalStride + 1;
}

// Pixel frame index that latent frame t represents.
inline int pixel_index_of_latent(int t, int pixel_frames) {
  const int f = latent_frame_count(pixel_frames);
  if (t == f - 1) return pixel_frames - 1;
  return pixel_frames == 2 ? t : t * kTemporalStride;
}

// Fixture stand-in for the frame encoder: a seeded linear map with
// orthonormal rows, so decode() inverts encode() exactly up to rounding.
class KeyframeEncoder {
 public:
  KeyframeEncoder(int in_channels, int latent_dim, std::uint64_t seed) {
    detail::require(in_channels >= 1 && latent_dim >= in_channels,
                    "KeyframeEncoder: latent_dim must be >= in_channels >= 1");
    Rng rng(derive_seed(seed, 0xE4C0DE));
    projection_ = orthonormal_rows(static_cast<std::size_t>(in_channels), static_cast<std::size_t>(latent_dim), rng);
  }

  int in_channels() const { return static_cast<int>(projection_.rows()); }
  int latent_dim() const { return static_cast<int>(projection_.cols()); }

  // (l_q x in_channels) -> (l_q x latent_dim)
  Matrix encode(const Matrix& frame) const {
    detail::require(frame.cols() == projection_.rows(), "KeyframeEncoder::encode: channel mismatch");
    return matmul(frame, projection_);
  }

  Matrix decode(const Matrix& latent) const {
    detail::require(latent.cols() == projection_.cols(), "KeyframeEncoder::decode: channel mismatch");
    return matmul_transposed(latent, projection_);
  }

 private:
  Matrix projection_;
};

inline std::size_t token_index(int t, int h, int w, const FrameGrid& grid) {
  detail::require(t >= 0 && t < grid.f && h >= 0 && h < grid.grid_h && w >= 0 && w < grid.grid_w,
                  "token_index: position (" + std::to_string(t) + "," + std::to_string(h) + "," +
                      std::to_string(w) + ") outside grid");
  return static_cast<std::size_t>(t) * static_cast<std::size_t>(grid.l_q()) +
         static_cast<std::size_t>(h) * static_cast<std::size_t>(grid.grid_w) + static_cast<std::size_t>(w);
}

inline TokenPosition token_position(std::size_t index, const FrameGrid& grid) {
  detail::require(index < grid.token_count(), "token_position: index out of range");
  const auto l_q = static_cast<std::size_t>(grid.l_q());
  const auto within = index % l_q;
  return {static_cast<int>(index / l_q), static_cast<int>(within / static_cast<std::size_t>(grid.grid_w)),
          static_cast<int>(within % static_cast<std::size_t>(grid.grid_w))};
}

inline std::vector<TokenPosition> grid_positions(const FrameGrid& grid) {
  std::vector<TokenPosition> out;
  out.reserve(grid.token_count());
  for (int t = 0; t < grid.f; ++t)
    for (int h = 0; h < grid.grid_h; ++h)
      for (int w = 0; w < grid.grid_w; ++w) out.push_back({t, h, w});
  return out;
}

inline RowRange frame_row_slice(int t, const FrameGrid& grid) {
  detail::require(t >= 0 && t < grid.f, "frame_row_slice: frame " + std::to_string(t) + " out of range");
  const auto l_q = static_cast<std::size_t>(grid.l_q());
  return {static_cast<std::size_t>(t) * l_q, static_cast<std::size_t>(t + 1) * l_q};
}

// `first` and `last` are already-encoded keyframes of shape (grid_h*grid_w x d).
inline TokenSequence assemble_latent_sequence(const Matrix& first, const Matrix& last, int pixel_frames, int grid_h,
                                              int grid_w) {
  detail::require(first.rows() == last.rows() && first.cols() == last.cols(),
                  "assemble_latent_sequence: first and last keyframes differ in shape");
  detail::require(grid_h >= 1 && grid_w >= 1 && first.rows() == static_cast<std::size_t>(grid_h * grid_w),
                  "assemble_latent_sequence: keyframe rows do not match the spatial grid");
  detail::require(first.cols() >= 1, "assemble_latent_sequence: keyframes have no channels");
  detail::require<NumericError>(all_finite(first.flat()) && all_finite(last.flat()),
                                "assemble_latent_sequence: non-finite keyframe value");

  TokenSequence seq;
  seq.grid = {latent_frame_count(pixel_frames), grid_h, grid_w, static_cast<int>(first.cols())};
  seq.grid.validate();
  seq.values = Matrix(seq.grid.token_count(), first.cols(), 0.0);
  seq.mask.assign(static_cast<std::size_t>(seq.grid.f), 0);
  seq.set_frame(0, first);
  seq.set_frame(seq.grid.f - 1, last);
  seq.mask.front() = 1;
  seq.mask.back() = 1;
  return seq;
}

inline TokenSequence assemble_latent_sequence(const Matrix& first, const Matrix& last, int pixel_frames, int grid_h,
                                              int grid_w, const KeyframeEncoder& encoder) {
  detail::require(first.rows() == last.rows() && first.cols() == last.cols(),
                  "assemble_latent_sequence: first and last keyframes differ in shape");
  return assemble_latent_sequence(encoder.encode(first), encoder.encode(last), pixel_frames, grid_h, grid_w);
}

}  // namespace tgi
