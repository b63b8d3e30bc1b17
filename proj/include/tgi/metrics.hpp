// SPDX-License-Identifier: Apache-2.0
//
// Pixel-space evaluation metrics for generated inbetween sequences. None of
// these stand in for the network-based perceptual metrics; the report names
// them for what they compute (psnr, ssim, adjacent_cosine, pace_std, ...).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tgi/errors.hpp"

namespace tgi {

struct VideoArray {
  int frames = 0;
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;  // frame-major, then row, column, channel

  VideoArray() = default;
  VideoArray(int f, int h, int w, int c = 1, double fill = 0.0)
      : frames(f), height(h), width(w), channels(c), data(static_cast<std::size_t>(f) * h * w * c, fill) {}

  std::size_t frame_size() const { return static_cast<std::size_t>(height) * width * channels; }

  double& at(int f, int y, int x, int c = 0) { return data[offset(f, y, x, c)]; }
  double at(int f, int y, int x, int c = 0) const { return data[offset(f, y, x, c)]; }

  std::span<const double> frame(int f) const {
    return {data.data() + static_cast<std::size_t>(f) * frame_size(), frame_size()};
  }
  std::span<double> frame(int f) { return {data.data() + static_cast<std::size_t>(f) * frame_size(), frame_size()}; }

  bool same_shape(const VideoArray& o) const {
    return frames == o.frames && height == o.height && width == o.width && channels == o.channels;
  }

  void validate() const {
    detail::require(frames >= 1 && height >= 1 && width >= 1 && channels >= 1, "VideoArray: empty shape");
    detail::require(data.size() == static_cast<std::size_t>(frames) * frame_size(), "VideoArray: data size mismatch");
    for (double v : data)
      detail::require<NumericError>(std::isfinite(v) && v >= 0.0 && v <= 1.0, "VideoArray: value outside [0, 1]");
  }

  bool operator==(const VideoArray&) const = default;

 private:
  std::size_t offset(int f, int y, int x, int c) const {
    return ((static_cast<std::size_t>(f) * height + y) * width + x) * channels + c;
  }
};

// ---------------------------------------------------------------------------
// PSNR

struct PsnrResult {
  std::vector<double> per_frame;  // +inf for identical frames
  double mean = 0.0;              // mean of finite frames; +inf if all frames identical
  int identical_frames = 0;
};

inline double frame_mse(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

inline PsnrResult psnr(const VideoArray& a, const VideoArray& b) {
  detail::require(a.same_shape(b), "psnr: shape mismatch");
  a.validate();
  b.validate();
  PsnrResult out;
  double finite_sum = 0.0;
  int finite = 0;
  for (int f = 0; f < a.frames; ++f) {
    const double mse = frame_mse(a.frame(f), b.frame(f));
    if (mse == 0.0) {
      out.per_frame.push_back(std::numeric_limits<double>::infinity());
      ++out.identical_frames;
    } else {
      const double db = 10.0 * std::log10(1.0 / mse);
      out.per_frame.push_back(db);
      finite_sum += db;
      ++finite;
    }
  }
  out.mean = finite ? finite_sum / finite : std::numeric_limits<double>::infinity();
  return out;
}

// ---------------------------------------------------------------------------
// SSIM (Gaussian window, valid positions only)

struct SsimParams {
  int window = 7;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

struct SsimResult {
  std::vector<double> per_frame;
  double mean = 0.0;
};

inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size) * size);
  const double c = (size - 1) / 2.0;
  double total = 0.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double v = std::exp(-((y - c) * (y - c) + (x - c) * (x - c)) / (2.0 * sigma * sigma));
      w[static_cast<std::size_t>(y) * size + x] = v;
      total += v;
    }
  for (double& v : w) v /= total;
  return w;
}

inline SsimResult ssim(const VideoArray& a, const VideoArray& b, const SsimParams& params = {}) {
  detail::require(a.same_shape(b), "ssim: shape mismatch");
  detail::require(params.window >= 1 && params.window <= std::min(a.height, a.width),
                  "ssim: window larger than the frame");
  a.validate();
  b.validate();
  const double c1 = (params.k1 * params.data_range) * (params.k1 * params.data_range);
  const double c2 = (params.k2 * params.data_range) * (params.k2 * params.data_range);
  const auto weights = gaussian_window(params.window, params.sigma);
  const int n = params.window;

  SsimResult out;
  double total = 0.0;
  for (int f = 0; f < a.frames; ++f) {
    double frame_sum = 0.0;
    long count = 0;
    for (int ch = 0; ch < a.channels; ++ch) {
      for (int y0 = 0; y0 + n <= a.height; ++y0) {
        for (int x0 = 0; x0 + n <= a.width; ++x0) {
          double mu_a = 0.0, mu_b = 0.0;
          for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
              const double w = weights[static_cast<std::size_t>(y) * n + x];
              mu_a += w * a.at(f, y0 + y, x0 + x, ch);
              mu_b += w * b.at(f, y0 + y, x0 + x, ch);
            }
          double var_a = 0.0, var_b = 0.0, cov = 0.0;
          for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
              const double w = weights[static_cast<std::size_t>(y) * n + x];
              const double da = a.at(f, y0 + y, x0 + x, ch) - mu_a;
              const double db = b.at(f, y0 + y, x0 + x, ch) - mu_b;
              var_a += w * da * da;
              var_b += w * db * db;
              cov += w * da * db;
            }
          const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
          const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
          frame_sum += num / den;
          ++count;
        }
      }
    }
    out.per_frame.push_back(frame_sum / static_cast<double>(count));
    total += out.per_frame.back();
  }
  out.mean = total / a.frames;
  return out;
}

// ---------------------------------------------------------------------------
// Adjacent-frame consistency

struct AdjacentConsistency {
  std::vector<std::optional<double>> cosine;  // nullopt where a frame has zero norm
  std::vector<double> mse;
  double mean_cosine = std::numeric_limits<double>::quiet_NaN();  // over defined pairs
  double mean_mse = 0.0;
  int undefined_pairs = 0;
};

inline AdjacentConsistency adjacent_consistency(const VideoArray& v) {
  detail::require(v.frames >= 2, "adjacent_consistency: need at least two frames");
  v.validate();
  AdjacentConsistency out;
  double cos_sum = 0.0;
  int defined = 0;
  double mse_sum = 0.0;
  for (int t = 0; t + 1 < v.frames; ++t) {
    const auto a = v.frame(t);
    const auto b = v.frame(t + 1);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
      out.cosine.emplace_back(std::nullopt);
      ++out.undefined_pairs;
    } else {
      // sqrt(na * na) == na exactly, so identical frames give exactly 1.
      const double c = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
      out.cosine.emplace_back(c);
      cos_sum += c;
      ++defined;
    }
    out.mse.push_back(frame_mse(a, b));
    mse_sum += out.mse.back();
  }
  if (defined) out.mean_cosine = cos_sum / defined;
  out.mean_mse = mse_sum / static_cast<double>(out.mse.size());
  return out;
}

// ---------------------------------------------------------------------------
// Centroid tracking and pacing

struct Point2 {
  double x = 0.0;  // column
  double y = 0.0;  // row
  bool operator==(const Point2&) const = default;
};

// Intensity-weighted centroid of pixels brighter than `threshold` (channels averaged).
inline std::vector<Point2> centroid_track(const VideoArray& v, double threshold) {
  v.validate();
  std::vector<Point2> track;
  track.reserve(static_cast<std::size_t>(v.frames));
  for (int f = 0; f < v.frames; ++f) {
    double mass = 0.0, sx = 0.0, sy = 0.0;
    for (int y = 0; y < v.height; ++y)
      for (int x = 0; x < v.width; ++x) {
        double intensity = 0.0;
        for (int c = 0; c < v.channels; ++c) intensity += v.at(f, y, x, c);
        intensity /= v.channels;
        if (intensity <= threshold) continue;
        mass += intensity;
        sx += intensity * x;
        sy += intensity * y;
      }
    detail::require(mass > 0.0, "centroid_track: frame " + std::to_string(f) + " has no mass above threshold");
    track.push_back({sx / mass, sy / mass});
  }
  return track;
}

struct PaceReport {
  std::vector<double> displacements;
  double mean = 0.0;
  double pace_std = 0.0;  // population standard deviation
  double pace_cv = 0.0;   // pace_std / mean; 0 when the track does not move
};

inline PaceReport pace_stability(std::span<const Point2> track) {
  detail::require(track.size() >= 3, "pace_stability: need at least three track points");
  PaceReport out;
  for (std::size_t i = 0; i + 1 < track.size(); ++i)
    out.displacements.push_back(std::hypot(track[i + 1].x - track[i].x, track[i + 1].y - track[i].y));
  const double n = static_cast<double>(out.displacements.size());
  double sum = 0.0;
  for (double d : out.displacements) sum += d;
  out.mean = sum / n;
  double var = 0.0;
  for (double d : out.displacements) var += (d - out.mean) * (d - out.mean);
  out.pace_std = std::sqrt(var / n);
  out.pace_cv = out.mean > 0.0 ? out.pace_std / out.mean : 0.0;
  return out;
}

}  // namespace tgi
