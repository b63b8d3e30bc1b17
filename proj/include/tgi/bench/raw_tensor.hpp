// SPDX-License-Identifier: Apache-2.0
//
// Raw video container (.tgiv), all fields little-endian:
//
//   offset  size  field
//   0       4     magic "TGIV"
//   4       4     uint32 version (1)
//   8       4     uint32 frames
//   12      4     uint32 height
//   16      4     uint32 width
//   20      4     uint32 channels
//   24      4*N   float32 samples, frame-major then row, column, channel
//
// Samples are expected in [0, 1].

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "tgi/errors.hpp"
#include "tgi/metrics.hpp"

namespace tgi::bench {

inline constexpr std::array<char, 4> kVideoMagic = {'T', 'G', 'I', 'V'};
inline constexpr std::uint32_t kVideoVersion = 1;

namespace io {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace io

inline std::string encode_video(const VideoArray& v) {
  std::string out(kVideoMagic.begin(), kVideoMagic.end());
  io::put_u32(out, kVideoVersion);
  io::put_u32(out, static_cast<std::uint32_t>(v.frames));
  io::put_u32(out, static_cast<std::uint32_t>(v.height));
  io::put_u32(out, static_cast<std::uint32_t>(v.width));
  io::put_u32(out, static_cast<std::uint32_t>(v.channels));
  out.reserve(out.size() + 4 * v.data.size());
  for (double x : v.data) io::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  return out;
}

inline VideoArray decode_video(const std::string& bytes, const std::string& source = "<memory>") {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 24 || std::memcmp(p, kVideoMagic.data(), 4) != 0)
    throw ManifestError("video '" + source + "': missing TGIV header");
  if (io::get_u32(p + 4) != kVideoVersion) throw ManifestError("video '" + source + "': unsupported version");
  VideoArray v;
  v.frames = static_cast<int>(io::get_u32(p + 8));
  v.height = static_cast<int>(io::get_u32(p + 12));
  v.width = static_cast<int>(io::get_u32(p + 16));
  v.channels = static_cast<int>(io::get_u32(p + 20));
  if (v.frames < 1 || v.height < 1 || v.width < 1 || v.channels < 1)
    throw ManifestError("video '" + source + "': empty shape");
  const std::size_t n = static_cast<std::size_t>(v.frames) * v.frame_size();
  if (bytes.size() != 24 + 4 * n) throw ManifestError("video '" + source + "': payload size does not match header");
  v.data.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    v.data[i] = static_cast<double>(std::bit_cast<float>(io::get_u32(p + 24 + 4 * i)));
  return v;
}

inline void write_video(const std::string& path, const VideoArray& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write video '" + path + "'");
  const std::string bytes = encode_video(v);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline VideoArray read_video(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError("cannot open video '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_video(bytes, path);
}

}  // namespace tgi::bench
