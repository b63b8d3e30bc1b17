// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <numbers>

#include "oracle.hpp"
#include "tgi/rope_retro.hpp"

using namespace tgi;

TEST(AxisSplit, TwoOneOne) {
  EXPECT_EQ(default_axis_split(16), (AxisSplit{4, 2, 2}));
  EXPECT_EQ(default_axis_split(64), (AxisSplit{16, 8, 8}));
  EXPECT_EQ(default_axis_split(10), (AxisSplit{3, 1, 1}));
}

TEST(FrequencyRows, FirstThetaIsOne) {
  const auto t = build_frequency_rows(16, {5, 3, 3});
  EXPECT_EQ(t.theta_t[0], 1.0);
  EXPECT_EQ(t.theta_h[0], 1.0);
  EXPECT_EQ(t.theta_w[0], 1.0);
  for (int p = 0; p < 5; ++p) EXPECT_EQ(t.omega_t(static_cast<std::size_t>(p), 0), static_cast<double>(p));
}

TEST(FrequencyRows, FourPairAxisSecondTheta) {
  const auto t = build_frequency_rows(16, AxisExtent{3, 2, 2});
  ASSERT_EQ(t.theta_t.size(), 4u);
  EXPECT_NEAR(t.theta_t[1], 0.1, 1e-15);
}

TEST(FrequencyRows, RejectsBadSplit) {
  EXPECT_THROW(build_frequency_rows(16, {3, 2, 2}, 10000.0, {2, 1, 1}), ShapeError);
  EXPECT_THROW(build_frequency_rows(15, {2, 1, 1}), ShapeError);
}

TEST(WEdge, ClosestIntegerToTenthOfF) {
  EXPECT_EQ(compute_w_edge(21), 2);
  EXPECT_EQ(compute_w_edge(25), 3);
  EXPECT_EQ(compute_w_edge(2), 0);
  EXPECT_EQ(compute_w_edge(14), 1);
  EXPECT_EQ(compute_w_edge(15), 2);
  EXPECT_EQ(compute_w_edge(5), 1);
}

TEST(EdgeMidSets, Examples) {
  auto s = edge_mid_sets(10, 0);
  EXPECT_TRUE(s.edge.empty());
  EXPECT_EQ(s.mid.size(), 10u);
  s = edge_mid_sets(21, 2);
  EXPECT_EQ(s.edge, (std::vector<int>{0, 1, 19, 20}));
  EXPECT_EQ(s.mid.front(), 2);
  EXPECT_EQ(s.mid.back(), 18);
  EXPECT_EQ(s.mid.size(), 17u);
  s = edge_mid_sets(4, 2);
  EXPECT_EQ(s.edge, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_TRUE(s.mid.empty());
  EXPECT_THROW(edge_mid_sets(4, 3), ShapeError);
}

TEST(RetroConfig, Validation) {
  EXPECT_NO_THROW(RetroConfig{}.validate());
  EXPECT_NO_THROW(RetroConfig::vanilla().validate());
  EXPECT_THROW((RetroConfig{std::nullopt, 1.06, 1.0}).validate(), ConfigError);
  EXPECT_THROW((RetroConfig{std::nullopt, 0.9, 0.94}).validate(), ConfigError);
  EXPECT_THROW((RetroConfig{std::nullopt, 1.06, 0.0}).validate(), ConfigError);
  EXPECT_THROW((RetroConfig{-1, 1.06, 0.94}).validate(), ConfigError);
  EXPECT_THROW((RetroConfig{5, 1.06, 0.94}).resolve_w_edge(8), ConfigError);
  EXPECT_EQ((RetroConfig{3, 1.06, 0.94}).resolve_w_edge(21), 3);
}

TEST(RetroScale, IdentityIsBitwise) {
  const auto t = build_frequency_rows(16, {21, 4, 4});
  EXPECT_EQ(retro_scale(t, RetroConfig::vanilla(), 21), t);
}

TEST(RetroScale, EdgeAndMidRatios) {
  const auto vanilla = build_frequency_rows(16, {21, 4, 4});
  const auto scaled = retro_scale(vanilla, RetroConfig{}, 21);
  for (int t = 1; t < 21; ++t) {
    const double s = (t < 2 || t > 18) ? 1.06 : 0.94;
    for (std::size_t j = 0; j < 4; ++j) {
      const double v = vanilla.omega_t(static_cast<std::size_t>(t), j);
      EXPECT_EQ(scaled.omega_t(static_cast<std::size_t>(t), j), v * s);
      EXPECT_DOUBLE_EQ(scaled.omega_t(static_cast<std::size_t>(t), j) / v, s);
    }
  }
  EXPECT_EQ(scaled.omega_h, vanilla.omega_h);
  EXPECT_EQ(scaled.omega_w, vanilla.omega_w);
}

TEST(ApplyRope, OriginLeavesInputUnchanged) {
  const auto t = build_frequency_rows(8, {2, 2, 2});
  Rng rng(5);
  const Matrix x = rng.normal_matrix(1, 8);
  const std::vector<TokenPosition> pos{{0, 0, 0}};
  EXPECT_EQ(apply_rope(x, t, pos), x);
}

TEST(ApplyRope, QuarterTurnIsCounterclockwise) {
  RopeFrequencyTable t = build_frequency_rows(2, {1, 0, 0}, 10000.0, {2, 1, 1});
  t.omega_t(1, 0) = std::numbers::pi / 2;
  const Matrix x = Matrix::from_rows({{1.0, 0.0}});
  const std::vector<TokenPosition> pos{{1, 0, 0}};
  const Matrix r = apply_rope(x, t, pos);
  EXPECT_NEAR(r(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(r(0, 1), 1.0, 1e-15);
}

TEST(ApplyRope, MatchesScalarOracle) {
  const auto vanilla = build_frequency_rows(16, {7, 3, 3});
  const RetroConfig cfg{};
  const auto scaled = retro_scale(vanilla, cfg, 7);
  const auto scales = frame_scales(7, cfg);
  Rng rng(11);
  std::vector<TokenPosition> pos;
  for (int t = 0; t < 7; ++t)
    for (int h = 0; h < 3; ++h)
      for (int w = 0; w < 3; ++w) pos.push_back({t, h, w});
  const Matrix x = rng.normal_matrix(pos.size(), 16);
  const Matrix r = apply_rope(x, scaled, pos);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const oracle::Vec in(x.row(i).begin(), x.row(i).end());
    const auto want = oracle::rope(in, pos[i].t, pos[i].h, pos[i].w, 4, 2, 2, 10000.0,
                                   scales[static_cast<std::size_t>(pos[i].t)]);
    for (std::size_t c = 0; c < 16; ++c) EXPECT_NEAR(r(i, c), want[c], 1e-12);
  }
}

TEST(ApplyRope, RejectsBadShapes) {
  const auto t = build_frequency_rows(8, {2, 2, 2});
  const std::vector<TokenPosition> pos{{0, 0, 0}};
  EXPECT_THROW(apply_rope(Matrix(1, 6), t, pos), ShapeError);
  EXPECT_THROW(apply_rope(Matrix(2, 8), t, pos), ShapeError);
  const std::vector<TokenPosition> outside{{2, 0, 0}};
  EXPECT_THROW(apply_rope(Matrix(1, 8), t, outside), ShapeError);
}
