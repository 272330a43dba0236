#include <gtest/gtest.h>

#include <cmath>

#include "gbtrack/baseline.hpp"
#include "gbtrack/errors.hpp"
#include "gbtrack/simulator.hpp"

namespace gbtrack {
namespace {

SimConfig small_config() {
  SimConfig cfg;
  cfg.n_depth = 200;
  cfg.n_channels = 6;
  cfg.n_scans = 80;
  cfg.surface_base = 100.0;
  return cfg;
}

TEST(Template, WaveletHasUnitPeakAtCentre) {
  const auto& w = default_wavelet();
  ASSERT_EQ(w.size(), 19u);
  EXPECT_EQ(w[9], 1.0);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_LE(w[i], 1.0);
  // Table agrees with its defining formula to the printed precision.
  double peak = 0.0;
  std::vector<double> f(19);
  for (int i = 0; i < 19; ++i) {
    const double u = i - 9;
    f[i] = std::exp(-u * u / 3.0) - 0.75 * std::exp(-(u - 3.0) * (u - 3.0) / 5.0);
    peak = std::max(peak, f[i]);
  }
  for (int i = 0; i < 19; ++i) EXPECT_NEAR(w[i], f[i] / peak, 5e-7);
}

TEST(Template, SpikeAndRescaledWavelet) {
  const auto s = make_template(TemplateShape::kSpike, 4);
  ASSERT_EQ(s.size(), 9u);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(s[i], i == 4 ? 1.0 : 0.0);
  const auto w = make_template(TemplateShape::kWavelet, 5);
  ASSERT_EQ(w.size(), 11u);
  EXPECT_DOUBLE_EQ(*std::max_element(w.begin(), w.end()), 1.0);
}

TEST(SimConfig, RejectsInvalidFields) {
  auto cfg = small_config();
  cfg.surface_sigma = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.surface_base = 5.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.surface_reversion = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.snow = SnowLayer{.offset_samples = 30, .amplitude_ratio = 0.0, .first_scan = 0, .last_scan = 10};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.snow->amplitude_ratio = 1.5;
  cfg.snow->last_scan = 80;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.snow->last_scan = 79;
  cfg.snow->coverage = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.mines.push_back({.ch = 6, .dt = 0});
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.interference.push_back({.first_scan = 5, .last_scan = 4});
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Surface, ZeroSigmaIsFlatAtBase) {
  auto cfg = small_config();
  cfg.surface_sigma = 0.0;
  const auto s = generate_surface(cfg);
  EXPECT_EQ(s.clamped, 0u);
  for (double v : s.surface.values()) EXPECT_EQ(v, 100.0);
}

TEST(Surface, IncrementStdMatchesSigma) {
  for (double phi : {0.95, 1.0}) {
    SimConfig cfg;
    cfg.n_depth = 2000;
    cfg.n_channels = 4;
    cfg.n_scans = 10000;
    cfg.surface_sigma = 1.5;
    cfg.surface_base = 1000.0;
    cfg.surface_reversion = phi;
    const auto s = generate_surface(cfg);
    ASSERT_EQ(s.clamped, 0u);
    for (std::size_t ch = 0; ch < cfg.n_channels; ++ch) {
      double sum = 0.0, ss = 0.0;
      const auto track = s.surface.channel(ch);
      for (std::size_t dt = 1; dt < track.size(); ++dt) {
        const double d = track[dt] - track[dt - 1];
        sum += d;
        ss += d * d;
      }
      const double n = static_cast<double>(track.size() - 1);
      const double sd = std::sqrt(ss / n - (sum / n) * (sum / n));
      EXPECT_NEAR(sd, 1.5, 0.05 * 1.5) << "phi " << phi << " ch " << ch;
    }
  }
}

TEST(Surface, CrossTrackDifferencesAreBounded) {
  SimConfig cfg;
  cfg.n_channels = 24;
  cfg.n_scans = 2000;
  cfg.surface_base = 200.0;
  const auto s = generate_surface(cfg).surface;
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t dt = 0; dt < cfg.n_scans; ++dt) {
    for (std::size_t ch = 1; ch < cfg.n_channels; ++ch, ++n) {
      const double d = s(ch, dt) - s(ch - 1, dt);
      ss += d * d;
    }
  }
  // Adjacent channels share two of three smoothing taps, so they move together.
  EXPECT_LT(std::sqrt(ss / static_cast<double>(n)), 3.0 * cfg.surface_sigma);
}

TEST(Simulate, SameSeedIsBitIdentical) {
  auto cfg = small_config();
  cfg.noise_sigma = 0.1;
  cfg.snow = SnowLayer{.offset_samples = 20, .first_scan = 10, .last_scan = 60, .coverage = 0.4, .patch_scans = 3};
  cfg.interference.push_back({.first_scan = 5, .last_scan = 8, .amplitude = 0.5, .extent = 40});
  cfg.mines.push_back({.ch = 3, .dt = 40});
  const auto a = simulate(cfg);
  const auto b = simulate(cfg);
  EXPECT_EQ(a.volume, b.volume);
  EXPECT_EQ(a.truth, b.truth);
  cfg.seed += 1;
  EXPECT_FALSE(simulate(cfg).volume == a.volume);
}

TEST(Simulate, NoiselessArgmaxEqualsTruth) {
  SimConfig cfg;
  cfg.n_scans = 200;
  const auto sim = simulate(cfg);
  for (std::size_t ch = 0; ch < cfg.n_channels; ++ch) {
    for (std::size_t dt = 0; dt < cfg.n_scans; ++dt) {
      ASSERT_EQ(static_cast<double>(argmax(sim.volume.ascan(ch, dt))), sim.truth(ch, dt));
    }
  }
  EXPECT_EQ(track_global_max(sim.volume), sim.truth);
}

TEST(Simulate, TruthIsIntegral) {
  const auto sim = simulate(small_config());
  for (double v : sim.truth.values()) EXPECT_EQ(v, std::round(v));
}

TEST(Simulate, SnowArgmaxSitsAboveTruth) {
  auto cfg = small_config();
  cfg.snow = SnowLayer{.offset_samples = 30, .amplitude_ratio = 1.5, .first_scan = 20, .last_scan = 49};
  const auto sim = simulate(cfg);
  for (std::size_t ch = 0; ch < cfg.n_channels; ++ch) {
    for (std::size_t dt = 0; dt < cfg.n_scans; ++dt) {
      const double expected = dt >= 20 && dt <= 49 ? sim.truth(ch, dt) - 30.0 : sim.truth(ch, dt);
      ASSERT_EQ(static_cast<double>(argmax(sim.volume.ascan(ch, dt))), expected) << ch << "," << dt;
    }
  }
}

TEST(Simulate, SnowMaskCoverage) {
  SimConfig cfg;
  cfg.snow = SnowLayer{.first_scan = 20, .last_scan = 499, .coverage = 0.3, .patch_scans = 2};
  const auto mask = snow_mask(cfg);
  double covered = 0.0;
  for (std::size_t ch = 0; ch < cfg.n_channels; ++ch) {
    for (std::size_t dt = 0; dt < cfg.n_scans; ++dt) {
      const double m = mask(ch, dt);
      if (dt < 20) {
        EXPECT_EQ(m, 0.0);
      }
      covered += m;
      // Full-width patches: every channel agrees.
      ASSERT_EQ(m, mask(0, dt));
    }
  }
  const double frac = covered / (24.0 * 480.0);
  EXPECT_GE(frac, 0.3);
  EXPECT_LT(frac, 0.31);
}

TEST(Simulate, AlignedAverageReproducesTemplate) {
  SimConfig cfg;
  cfg.n_scans = 1000;
  cfg.noise_sigma = 0.05;
  const auto sim = simulate(cfg);
  const auto& tpl = default_wavelet();
  // Averaging 1000 scans over all 24 channels shrinks the noise std to
  // 0.05 / sqrt(24000), well inside the 0.05 / sqrt(1000) tolerance.
  std::vector<double> mean(tpl.size(), 0.0);
  double n = 0.0;
  for (std::size_t ch = 0; ch < cfg.n_channels; ++ch) {
    for (std::size_t dt = 0; dt < cfg.n_scans; ++dt, n += 1.0) {
      const auto g = static_cast<std::size_t>(sim.truth(ch, dt));
      for (std::size_t i = 0; i < tpl.size(); ++i) mean[i] += sim.volume.at(g - 9 + i, ch, dt);
    }
  }
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    EXPECT_NEAR(mean[i] / n, tpl[i], 0.05 / std::sqrt(1000.0)) << i;
  }
}

TEST(Simulate, NoiselessEnergyEqualsTemplateEnergy) {
  SimConfig cfg;
  cfg.n_scans = 100;
  const auto sim = simulate(cfg);
  double tpl_energy = 0.0;
  for (double v : default_wavelet()) {
    const double f = static_cast<float>(v);
    tpl_energy += f * f;
  }
  for (std::size_t ch = 0; ch < cfg.n_channels; ++ch) {
    for (std::size_t dt = 0; dt < cfg.n_scans; ++dt) {
      double e = 0.0;
      for (float v : sim.volume.ascan(ch, dt)) e += static_cast<double>(v) * v;
      ASSERT_NEAR(e, tpl_energy, 1e-12);
    }
  }
}

TEST(Simulate, InterferenceStaysInsideItsStreak) {
  auto cfg = small_config();
  cfg.surface_sigma = 0.0;
  cfg.interference.push_back({.first_scan = 10, .last_scan = 12, .amplitude = 1.0, .extent = 30});
  const auto sim = simulate(cfg);
  for (std::size_t dt = 0; dt < cfg.n_scans; ++dt) {
    double shallow = 0.0;
    for (std::size_t d = 0; d < 30; ++d) shallow += std::abs(sim.volume.at(d, 2, dt));
    if (dt >= 10 && dt <= 12) {
      EXPECT_GT(shallow, 0.0);
    } else {
      EXPECT_EQ(shallow, 0.0);
    }
    for (std::size_t d = 30; d < 80; ++d) ASSERT_EQ(sim.volume.at(d, 2, dt), 0.0f);
  }
}

TEST(Simulate, MineEchoBelowGround) {
  auto cfg = small_config();
  cfg.surface_sigma = 0.0;
  cfg.mines.push_back({.ch = 3, .dt = 40, .depth_offset = 40.0, .amplitude = 0.5});
  const auto sim = simulate(cfg);
  EXPECT_FLOAT_EQ(sim.volume.at(140, 3, 40), 0.5f);
  // Off-centre the echo is deeper and weaker.
  EXPECT_GT(sim.volume.at(141, 3, 41), 0.0f);
  EXPECT_LT(sim.volume.at(141, 3, 41), 0.5f);
  EXPECT_EQ(sim.volume.at(140, 3, 60), 0.0f);
}

}  // namespace
}  // namespace gbtrack
