// SPDX-License-Identifier: Apache-2.0
//
// Randomised sweeps over the library's invariants.

#include <gtest/gtest.h>

#include <cmath>

#include "tgi/bench/manifest.hpp"
#include "tgi/dit_core.hpp"
#include "tgi/metrics.hpp"

using namespace tgi;

namespace {

int valid_pixel_frames(Rng& rng) {
  const int k = static_cast<int>(rng.uniform() * 12);
  return k == 0 ? 2 : 4 * k + 1;
}

}  // namespace

TEST(LatentProperties, MaskAndZeroMiddle) {
  Rng rng(100);
  for (int trial = 0; trial < 40; ++trial) {
    const int F = valid_pixel_frames(rng);
    const int gh = 1 + trial % 3, gw = 1 + trial % 2;
    const auto l_q = static_cast<std::size_t>(gh * gw);
    const auto seq = assemble_latent_sequence(rng.normal_matrix(l_q, 3), rng.normal_matrix(l_q, 3), F, gh, gw);
    int set = 0;
    for (auto m : seq.mask) set += m;
    EXPECT_EQ(set, 2);
    EXPECT_EQ(seq.mask.front(), 1);
    EXPECT_EQ(seq.mask.back(), 1);
    for (int t = 1; t + 1 < seq.grid.f; ++t) {
      const Matrix middle = seq.frame(t);
      for (double v : middle.flat()) ASSERT_EQ(v, 0.0);
    }
  }
}

TEST(LatentProperties, TokenIndexBijection) {
  for (int f = 1; f <= 4; ++f)
    for (int gh = 1; gh <= 3; ++gh)
      for (int gw = 1; gw <= 3; ++gw) {
        const FrameGrid g{f, gh, gw, 1};
        for (std::size_t i = 0; i < g.token_count(); ++i) {
          const auto p = token_position(i, g);
          ASSERT_EQ(token_index(p.t, p.h, p.w, g), i);
        }
      }
}

TEST(RopeProperties, PairNormsPreserved) {
  Rng rng(101);
  const auto table = retro_scale(build_frequency_rows(16, {13, 3, 4}), RetroConfig{}, 13);
  std::vector<TokenPosition> pos;
  for (int i = 0; i < 60; ++i)
    pos.push_back({static_cast<int>(rng.uniform() * 13), static_cast<int>(rng.uniform() * 3),
                   static_cast<int>(rng.uniform() * 4)});
  const Matrix x = rng.normal_matrix(pos.size(), 16, 3.0);
  const Matrix r = apply_rope(x, table, pos);
  for (std::size_t i = 0; i < pos.size(); ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      const double a = std::hypot(x(i, 2 * j), x(i, 2 * j + 1));
      const double b = std::hypot(r(i, 2 * j), r(i, 2 * j + 1));
      ASSERT_LE(std::abs(a - b), 1e-6 * a);
    }
}

TEST(RopeProperties, EdgeMidPartitionAndSymmetry) {
  for (int f = 1; f <= 40; ++f)
    for (int w = 0; w <= f / 2; ++w) {
      const auto s = edge_mid_sets(f, w);
      std::vector<int> seen(static_cast<std::size_t>(f), 0);
      for (int t : s.edge) ++seen[static_cast<std::size_t>(t)];
      for (int t : s.mid) ++seen[static_cast<std::size_t>(t)];
      for (int c : seen) ASSERT_EQ(c, 1);
      std::vector<bool> edge(static_cast<std::size_t>(f), false);
      for (int t : s.edge) edge[static_cast<std::size_t>(t)] = true;
      for (int t = 0; t < f; ++t) ASSERT_EQ(edge[static_cast<std::size_t>(t)], edge[static_cast<std::size_t>(f - 1 - t)]);
    }
}

TEST(RopeProperties, MidFrameScalingCompressesTemporalDistance) {
  // Dot products between mid frames equal vanilla RoPE evaluated at s_mid * t.
  Rng rng(102);
  const int f = 21;
  const RetroConfig cfg{};
  const auto vanilla = build_frequency_rows(16, {f, 2, 2});
  const auto scaled = retro_scale(vanilla, cfg, f);
  const auto temporal_only = [](const Matrix& x, const std::vector<double>& thetas, double pos) {
    Matrix out = x;
    for (std::size_t j = 0; j < thetas.size(); ++j) {
      const double phi = pos * thetas[j];
      out(0, 2 * j) = x(0, 2 * j) * std::cos(phi) - x(0, 2 * j + 1) * std::sin(phi);
      out(0, 2 * j + 1) = x(0, 2 * j) * std::sin(phi) + x(0, 2 * j + 1) * std::cos(phi);
    }
    return out;
  };
  for (int trial = 0; trial < 30; ++trial) {
    const int t1 = 2 + static_cast<int>(rng.uniform() * 17);
    const int t2 = 2 + static_cast<int>(rng.uniform() * 17);
    const Matrix a = rng.normal_matrix(1, 16);
    const Matrix b = rng.normal_matrix(1, 16);
    const std::vector<TokenPosition> p1{{t1, 1, 0}}, p2{{t2, 1, 0}};
    const double got = matmul_transposed(apply_rope(a, scaled, p1), apply_rope(b, scaled, p2))(0, 0);
    // Spatial positions coincide, so only temporal pairs carry relative phase.
    const Matrix ra = temporal_only(a, vanilla.theta_t, cfg.s_mid * t1);
    const Matrix rb = temporal_only(b, vanilla.theta_t, cfg.s_mid * t2);
    double want = 0.0;
    for (std::size_t c = 0; c < 8; ++c) want += ra(0, c) * rb(0, c);
    for (std::size_t c = 8; c < 16; ++c) want += a(0, c) * b(0, c);
    ASSERT_NEAR(got, want, 1e-6);
  }
}

TEST(KabProperties, RowsAndAnchorsSumToOne) {
  Rng rng(103);
  for (int trial = 0; trial < 200; ++trial) {
    AttentionLogits L;
    L.l_q = 1 + trial % 3;
    const int f = 2 + trial % 4;
    const int heads = 1 + trial % 2;
    for (int h = 0; h < heads; ++h)
      L.heads.push_back(rng.normal_matrix(static_cast<std::size_t>(f * L.l_q), 1 + trial % 5, 4.0));
    const auto A = apply_kab(L, GuidanceSchedule{}, true);
    for (const auto& h : A)
      for (std::size_t r = 0; r < h.rows(); ++r) {
        double s = 0.0;
        for (double v : h.row(r)) s += v;
        ASSERT_NEAR(s, 1.0, 1e-12);
      }
    for (int t = 0; t < f; ++t) {
      double s = 0.0;
      for (double v : frame_mean_attention(A, t, L.l_q).probs) s += v;
      ASSERT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(KabProperties, BiasBroadcastAcrossRowsAndHeads) {
  // Biased logit minus raw logit is the same vector for every row and head of
  // a frame, up to the per-row softmax normaliser.
  Rng rng(104);
  AttentionLogits L;
  L.l_q = 3;
  for (int h = 0; h < 2; ++h) L.heads.push_back(rng.normal_matrix(12, 4));
  const auto A = apply_kab(L, GuidanceSchedule{}, true);
  for (int t = 0; t < 4; ++t) {
    std::vector<double> ref;
    for (std::size_t h = 0; h < 2; ++h)
      for (int i = 0; i < 3; ++i) {
        const std::size_t r = static_cast<std::size_t>(t * 3 + i);
        std::vector<double> shift(4);
        for (std::size_t k = 0; k < 4; ++k) shift[k] = std::log(A[h](r, k)) - L.heads[h](r, k);
        const double base = shift[0];
        for (double& v : shift) v -= base;
        if (ref.empty()) ref = shift;
        for (std::size_t k = 0; k < 4; ++k) ASSERT_NEAR(shift[k], ref[k], 1e-10);
      }
  }
}

TEST(KabProperties, LargerBetaPullsTowardTarget) {
  AttentionLogits L;
  L.l_q = 1;
  L.heads.push_back(Matrix::from_rows({{2.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}}));
  // Target for the middle frame favours key 0 relative to its uniform measurement.
  double previous = -1.0;
  for (double beta : {0.0, 0.2, 0.4, 0.8, 1.6, 3.2}) {
    GuidanceSchedule s;
    s.beta_min = beta;
    s.beta_max = beta;
    const double mass = apply_kab(L, s, true)[0](1, 0);
    EXPECT_GT(mass, previous);
    previous = mass;
  }
}

TEST(DitProperties, ForwardFiniteAcrossSeeds) {
  DitConfig cfg;
  cfg.n_heads = 2;
  cfg.head_dim = 4;
  cfg.n_steps = 4;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    cfg.seed = seed;
    Rng rng(seed + 1000);
    const auto seq = assemble_latent_sequence(rng.normal_matrix(2, 3), rng.normal_matrix(2, 3), 9, 1, 2);
    ConditionSet cond{rng.normal_matrix(1, 4), rng.normal_matrix(1, 4), rng.normal_matrix(2, 4)};
    const DitModel model(cfg, 3, 4);
    const Matrix out = model.forward(rng.normal_matrix(seq.values.rows(), 3), seq, cond, make_rope_table(cfg, seq.grid),
                                     1, 1.0);
    ASSERT_TRUE(all_finite(out.flat()));
  }
}

TEST(DitProperties, KeyframesPreservedForEverySwitchCombination) {
  Rng rng(105);
  const auto seq = assemble_latent_sequence(rng.normal_matrix(4, 5), rng.normal_matrix(4, 5), 13, 2, 2);
  ConditionSet cond{rng.normal_matrix(2, 6), rng.normal_matrix(2, 6), rng.normal_matrix(3, 6)};
  for (bool kab : {false, true})
    for (bool retro : {false, true})
      for (FusionMode fusion : {FusionMode::baseline, FusionMode::triple_isolated}) {
        DitConfig cfg;
        cfg.n_heads = 2;
        cfg.head_dim = 8;
        cfg.n_steps = 3;
        cfg.kab_enabled = kab;
        cfg.retro_enabled = retro;
        cfg.fusion = fusion;
        const auto res = sample(seq, cond, cfg);
        ASSERT_EQ(res.video.frame(0), seq.frame(0));
        ASSERT_EQ(res.video.frame(seq.grid.f - 1), seq.frame(seq.grid.f - 1));
      }
}

TEST(MetricProperties, SymmetryAndPurity) {
  Rng rng(106);
  for (int trial = 0; trial < 10; ++trial) {
    VideoArray a(3, 8, 8), b(3, 8, 8);
    for (double& v : a.data) v = rng.uniform();
    for (double& v : b.data) v = rng.uniform();
    EXPECT_EQ(psnr(a, b).per_frame, psnr(b, a).per_frame);
    const auto s1 = ssim(a, b).per_frame;
    const auto s2 = ssim(b, a).per_frame;
    for (std::size_t i = 0; i < s1.size(); ++i) EXPECT_NEAR(s1[i], s2[i], 1e-15);
    EXPECT_EQ(ssim(a, b).per_frame, s1);
  }
}

TEST(MetricProperties, PaceCvInvariantUnderScaleAndTranslation) {
  Rng rng(107);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Point2> track, moved;
    const double c = 0.5 + 3 * rng.uniform();
    const double dx = rng.normal() * 5, dy = rng.normal() * 5;
    for (int i = 0; i < 8; ++i) {
      track.push_back({rng.normal(), rng.normal()});
      moved.push_back({c * track.back().x + dx, c * track.back().y + dy});
    }
    const auto a = pace_stability(track);
    const auto b = pace_stability(moved);
    ASSERT_NEAR(b.pace_cv, a.pace_cv, 1e-12);
    ASSERT_NEAR(b.pace_std, c * a.pace_std, 1e-12);
    ASSERT_GE(a.pace_std, 0.0);
    ASSERT_EQ(a.displacements.size(), 7u);
  }
}

TEST(MetricProperties, RepeatedFrameConsistency) {
  Rng rng(108);
  for (int trial = 0; trial < 10; ++trial) {
    VideoArray v(2 + trial, 5, 6);
    std::vector<double> frame(30);
    for (double& x : frame) x = 0.01 + 0.99 * rng.uniform();
    for (int f = 0; f < v.frames; ++f) std::copy(frame.begin(), frame.end(), v.frame(f).begin());
    const auto r = adjacent_consistency(v);
    ASSERT_EQ(r.mean_cosine, 1.0);
    ASSERT_EQ(r.mean_mse, 0.0);
  }
}

TEST(ManifestProperties, RandomRoundTrip) {
  Rng rng(109);
  for (int trial = 0; trial < 20; ++trial) {
    bench::BenchManifest m;
    const int n = static_cast<int>(rng.uniform() * 6);
    for (int i = 0; i < n; ++i) {
      bench::ManifestEntry e;
      e.id = "clip-" + std::to_string(trial) + "-" + std::to_string(i);
      e.frames_path = "videos/\"quoted\" " + std::to_string(i) + ".tgiv";
      e.prompt = "prompt with unicode é and tab\t" + std::to_string(rng.uniform());
      e.challenge = bench::kAllChallenges[static_cast<std::size_t>(rng.uniform() * 4)];
      e.F = 2 + static_cast<int>(rng.uniform() * 100);
      m.entries.push_back(e);
    }
    ASSERT_EQ(bench::parse_manifest_text(bench::serialize_manifest(m)), m);
  }
}
