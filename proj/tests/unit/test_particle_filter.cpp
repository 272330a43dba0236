#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "gbtrack/baseline.hpp"
#include "gbtrack/errors.hpp"
#include "gbtrack/evaluation.hpp"
#include "gbtrack/particle_filter.hpp"
#include "gbtrack/scenarios.hpp"
#include "gbtrack/simulator.hpp"

namespace gbtrack {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ParticleSet set_of(std::initializer_list<std::pair<double, double>> pw) {
  ParticleSet s;
  for (auto [x, w] : pw) s.particles.push_back({x, w});
  return s;
}

TEST(ExtractTemplate, DirectSlice) {
  const std::vector<float> z{0, 1, 9, 1, 0};
  bool clamped = true;
  EXPECT_EQ(extract_template(AScanView(z), 2.0, 1, &clamped), (std::vector<double>{1, 9, 1}));
  EXPECT_FALSE(clamped);
  EXPECT_EQ(extract_template(AScanView(z), 2.4, 1), (std::vector<double>{1, 9, 1}));
}

TEST(ExtractTemplate, EdgeExtends) {
  const std::vector<float> z{7, 1, 9, 1, 3};
  bool clamped = false;
  EXPECT_EQ(extract_template(AScanView(z), 0.0, 1, &clamped), (std::vector<double>{7, 7, 1}));
  EXPECT_TRUE(clamped);
  EXPECT_EQ(extract_template(AScanView(z), 4.0, 2), (std::vector<double>{9, 1, 3, 3, 3}));
  EXPECT_THROW(extract_template(AScanView(z), 20.0, 1), ConfigError);
}

TEST(UpdateTemplate, RunningMean) {
  const GbTemplate ones{std::vector<double>(5, 1.0), 4.0};
  const auto out = update_template(ones, std::vector<double>(5, 0.0));
  EXPECT_EQ(out.alpha_conf, 5.0);
  for (double v : out.t) EXPECT_DOUBLE_EQ(v, 0.8);
}

TEST(UpdateTemplate, FirstCandidateIsAdopted) {
  const GbTemplate empty{std::vector<double>(3, 42.0), 0.0};
  const std::vector<double> tc{1, 2, 3};
  const auto out = update_template(empty, tc);
  EXPECT_EQ(out.t, tc);
  EXPECT_EQ(out.alpha_conf, 1.0);
}

TEST(UpdateTemplate, ConstantCandidateIsFixedPoint) {
  const std::vector<double> tc{0.1, -0.3, 0.9};
  GbTemplate tpl{tc, 0.0};
  for (int i = 0; i < 1000; ++i) tpl = update_template(tpl, tc);
  EXPECT_EQ(tpl.alpha_conf, 1000.0);
  for (std::size_t i = 0; i < tc.size(); ++i) EXPECT_NEAR(tpl.t[i], tc[i], 1e-12);
}

TEST(UpdateTemplate, LengthMismatchRejected) {
  EXPECT_THROW(update_template(GbTemplate{{1, 2, 3}, 1}, std::vector<double>{1, 2}), ConfigError);
}

TEST(NormalizeMinMax, RescalesAndFlattens) {
  EXPECT_EQ(normalize_min_max(std::vector<double>{2, 4, 3}), (std::vector<double>{0, 1, 0.5}));
  EXPECT_EQ(normalize_min_max(std::vector<double>{5, 5}), (std::vector<double>{0, 0}));
}

TEST(Likelihood, PerfectMatchIsTheMaximum) {
  const auto& w = default_wavelet();
  std::vector<float> z(60, 0.0f);
  for (std::size_t i = 0; i < w.size(); ++i) z[20 + i] = static_cast<float>(2.5 * w[i] + 1.0);
  const GbTemplate tpl{w, 1.0};
  const double sn = 0.7;
  EXPECT_NEAR(similarity(AScanView(z), 29.0, tpl, sn), 0.0, 1e-12);
  const double peak = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sn);
  EXPECT_NEAR(likelihood(AScanView(z), 29.0, tpl, sn), peak, 1e-9);
  for (double x = 5; x < 55; x += 1.0) EXPECT_LE(likelihood(AScanView(z), x, tpl, sn), peak + 1e-12);
}

TEST(Likelihood, FlatWindowComparesAgainstZeros) {
  const std::vector<float> z(40, 3.0f);
  const GbTemplate tpl{{0, 1, 0.5}, 1.0};
  // Normalised template [0, 1, 0.5]: sum of squares 1.25.
  EXPECT_NEAR(similarity(AScanView(z), 20.0, tpl, 0.5), -1.25 / (2.0 * 0.25), 1e-12);
}

TEST(Likelihood, OnTargetBeatsOffTarget) {
  SimConfig cfg;
  cfg.n_scans = 30;
  const auto sim = simulate(cfg);
  const GbTemplate tpl{default_wavelet(), 1.0};
  for (std::size_t ch = 0; ch < cfg.n_channels; ++ch) {
    const AScanView z(sim.volume, ch, 10);
    const double g = sim.truth(ch, 10);
    EXPECT_GT(likelihood(z, g, tpl, 1.0), likelihood(z, g + 10, tpl, 1.0));
    EXPECT_GT(likelihood(z, g, tpl, 1.0), likelihood(z, g - 10, tpl, 1.0));
  }
}

TEST(Likelihood, LogMatchesLinear) {
  for (double r : {0.0, 0.3, 2.0, 7.5}) {
    for (double sn : {0.2, 1.0, 3.0}) {
      const double lin = std::exp(-r / (2 * sn * sn)) / (std::sqrt(2 * std::numbers::pi) * sn);
      EXPECT_NEAR(std::exp(log_likelihood(r, sn)), lin, 1e-12 * std::max(1.0, lin));
    }
  }
}

TEST(Calibration, ClosedForm) {
  const std::vector<double> r(10, 2.4);
  const double sn = calibrate_sigma_n(r, -0.3);
  EXPECT_NEAR(sn, std::sqrt(2.4 / 0.6), 1e-15);
  EXPECT_NEAR(-2.4 / (2 * sn * sn), -0.3, 1e-15);
  const std::vector<double> mixed{5.0, 1.2, 3.0};
  EXPECT_NEAR(calibrate_sigma_n(mixed, -0.3), std::sqrt(1.2 / 0.6), 1e-15);
}

TEST(Calibration, ZeroResidualHitsFloor) {
  const std::vector<double> r{0.0, 1.0};
  EXPECT_EQ(calibrate_sigma_n(r, -0.3), 1e-6);
  EXPECT_THROW(calibrate_sigma_n(std::vector<double>{}, -0.3), ConfigError);
}

TEST(ProposeTwoWay, DegenerateNeighboursStayPut) {
  Rng rng(1);
  const std::vector<double> g(50, 140.0);
  const auto a = ParticleSet::uniform(g);
  const auto b = ParticleSet::uniform(g);
  const auto prior = propose_two_way(a, &b, 1e-9, rng);
  ASSERT_EQ(prior.size(), 50u);
  for (const auto& p : prior.particles) {
    EXPECT_NEAR(p.state, 140.0, 1e-6);
    EXPECT_DOUBLE_EQ(p.weight, 1.0 / 50.0);
  }
}

TEST(ProposeTwoWay, DistinctNeighboursGiveBimodalPrior) {
  Rng rng(2);
  const auto a = ParticleSet::uniform(std::vector<double>(1000, 100.0));
  const auto b = ParticleSet::uniform(std::vector<double>(1000, 160.0));
  const auto prior = propose_two_way(a, &b, 1.0, rng);
  ASSERT_EQ(prior.size(), 1000u);
  std::size_t low = 0, high = 0, between = 0;
  for (const auto& p : prior.particles) {
    if (std::abs(p.state - 100.0) < 6.0) {
      ++low;
    } else if (std::abs(p.state - 160.0) < 6.0) {
      ++high;
    } else {
      ++between;
    }
  }
  EXPECT_EQ(between, 0u);
  EXPECT_NEAR(static_cast<double>(low) / 1000.0, 0.5, 0.06);
  EXPECT_NEAR(static_cast<double>(high) / 1000.0, 0.5, 0.06);
}

TEST(ProposeTwoWay, SingleNeighbourDiffuses) {
  Rng rng(3);
  const auto a = ParticleSet::uniform(std::vector<double>(4000, 50.0));
  const auto prior = propose_two_way(a, nullptr, 2.0, rng);
  double sum = 0.0, ss = 0.0;
  for (const auto& p : prior.particles) {
    sum += p.state;
    ss += p.state * p.state;
  }
  const double mean = sum / 4000.0;
  EXPECT_NEAR(mean, 50.0, 0.2);
  EXPECT_NEAR(std::sqrt(ss / 4000.0 - mean * mean), 2.0, 0.15);
}

TEST(ApplyLogLikelihoods, EqualLikelihoodsKeepWeights) {
  auto s = set_of({{1, 0.1}, {2, 0.3}, {3, 0.6}});
  const std::vector<double> l(3, -4.0);
  EXPECT_FALSE(apply_log_likelihoods(s, l));
  EXPECT_NEAR(s.particles[0].weight, 0.1, 1e-15);
  EXPECT_NEAR(s.particles[1].weight, 0.3, 1e-15);
  EXPECT_NEAR(s.particles[2].weight, 0.6, 1e-15);
}

TEST(ApplyLogLikelihoods, SingleSurvivorTakesAllWeight) {
  auto s = set_of({{1, 0.25}, {2, 0.25}, {3, 0.25}, {4, 0.25}});
  const std::vector<double> l{-kInf, -2.0, -kInf, -kInf};
  EXPECT_FALSE(apply_log_likelihoods(s, l));
  EXPECT_EQ(s.particles[1].weight, 1.0);
  EXPECT_EQ(s.particles[0].weight, 0.0);
}

TEST(ApplyLogLikelihoods, AllZeroFallsBackToUniform) {
  auto s = set_of({{1, 0.5}, {2, 0.5}});
  const std::vector<double> l(2, -kInf);
  EXPECT_TRUE(apply_log_likelihoods(s, l));
  EXPECT_EQ(s.particles[0].weight, 0.5);
  EXPECT_EQ(s.particles[1].weight, 0.5);
}

TEST(ApplyLogLikelihoods, LinearUnderflowIsReportedButWeightsSurvive) {
  auto s = set_of({{1, 0.5}, {2, 0.5}});
  const std::vector<double> l{-2000.0, -2001.0};
  EXPECT_TRUE(apply_log_likelihoods(s, l));
  EXPECT_NEAR(s.particles[0].weight, 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(ApplyLogLikelihoods, SizeMismatchRejected) {
  auto s = set_of({{1, 1.0}});
  EXPECT_THROW(apply_log_likelihoods(s, std::vector<double>{0, 0}), std::invalid_argument);
}

TEST(Resample, DegenerateSetCopiesSurvivor) {
  Rng rng(4);
  auto s = set_of({{1, 0}, {7, 1}, {3, 0}});
  const auto out = resample(s, rng);
  ASSERT_EQ(out.size(), 3u);
  for (const auto& p : out.particles) {
    EXPECT_EQ(p.state, 7.0);
    EXPECT_DOUBLE_EQ(p.weight, 1.0 / 3.0);
  }
}

TEST(Resample, SelectionFrequencyMatchesWeights) {
  Rng rng(5);
  const std::vector<double> w{0.05, 0.15, 0.3, 0.1, 0.4};
  ParticleSet s;
  for (std::size_t i = 0; i < w.size(); ++i) s.particles.push_back({static_cast<double>(i), w[i]});
  constexpr int kTrials = 10000;
  const double n = static_cast<double>(w.size());
  std::vector<double> sum(w.size(), 0.0), ss(w.size(), 0.0);
  for (int t = 0; t < kTrials; ++t) {
    std::vector<double> count(w.size(), 0.0);
    for (const auto& p : resample(s, rng).particles) count[static_cast<std::size_t>(p.state)] += 1.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      sum[i] += count[i];
      ss[i] += count[i] * count[i];
    }
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double mean = sum[i] / kTrials;
    const double sd = std::sqrt(std::max(0.0, ss[i] / kTrials - mean * mean));
    EXPECT_LE(std::abs(mean - n * w[i]), 3.0 * sd / std::sqrt(kTrials) + 1e-12) << i;
  }
}

TEST(Resample, UniformWeightsKeepEveryParticle) {
  Rng rng(6);
  std::vector<double> states(50);
  std::iota(states.begin(), states.end(), 0.0);
  for (int t = 0; t < 10000; ++t) {
    const auto out = resample(ParticleSet::uniform(states), rng);
    for (std::size_t i = 0; i < states.size(); ++i) ASSERT_EQ(out.particles[i].state, states[i]);
  }
}

TEST(EstimateState, WeightedMean) {
  EXPECT_DOUBLE_EQ(estimate_state(set_of({{10, 0.5}, {20, 0.5}})), 15.0);
  EXPECT_DOUBLE_EQ(estimate_state(set_of({{42, 1.0}})), 42.0);
  EXPECT_DOUBLE_EQ(estimate_state(set_of({{10, 0.25}, {20, 0.75}})), 17.5);
}

TEST(RefinePeak, LocalArgmax) {
  std::vector<float> z(100, 0.0f);
  z[40] = 1.0f;
  EXPECT_EQ(refine_peak(AScanView(z), 40.0, 19), 40u);
  z[40] = 0.0f;
  z[43] = 1.0f;
  EXPECT_EQ(refine_peak(AScanView(z), 40.2, 19), 43u);
  z[60] = 5.0f;  // outside the window
  EXPECT_EQ(refine_peak(AScanView(z), 40.0, 19), 43u);
  z[1] = 9.0f;
  EXPECT_EQ(refine_peak(AScanView(z), 3.0, 19), 1u);  // window truncated at depth 0
}

SimConfig clean_config() {
  SimConfig cfg;
  cfg.n_scans = 200;
  cfg.surface_sigma = 0.5;
  return cfg;
}

TEST(Train, ConfidenceEqualsCellCount) {
  const auto sim = simulate(clean_config());
  Rng rng(1);
  PfConfig cfg;
  const auto t = train(sim.volume, cfg, rng);
  EXPECT_EQ(t.tpl.alpha_conf, 24.0 * 20.0);
  ASSERT_EQ(t.initial_sets.size(), 24u);
  for (const auto& s : t.initial_sets) EXPECT_EQ(s.size(), 50u);
}

TEST(Train, NoiselessTemplateRecoversSimulatorTemplate) {
  const auto sim = simulate(clean_config());
  Rng rng(1);
  const auto t = train(sim.volume, PfConfig{}, rng);
  const auto& w = default_wavelet();
  ASSERT_EQ(t.tpl.t.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(t.tpl.t[i], w[i], 1e-6);
}

TEST(Train, OutputIsGlobalMaxOverTrainingScans) {
  auto sc = clean_config();
  sc.noise_sigma = 0.2;
  const auto sim = simulate(sc);
  Rng rng(1);
  const auto t = train(sim.volume, PfConfig{}, rng);
  const auto gm = track_global_max(sim.volume);
  ASSERT_EQ(t.output.n_scans(), 20u);
  for (std::size_t ch = 0; ch < 24; ++ch)
    for (std::size_t dt = 0; dt < 20; ++dt) ASSERT_EQ(t.output(ch, dt), gm(ch, dt));
}

TEST(Train, CalibrationHitsTarget) {
  auto sc = clean_config();
  sc.noise_sigma = 0.05;
  const auto sim = simulate(sc);
  Rng rng(1);
  const auto t = train(sim.volume, PfConfig{}, rng);
  EXPECT_NEAR(t.max_good_similarity, -0.3, 1e-6);
  EXPECT_GE(t.sigma_v, 0.5);
  EXPECT_LE(t.sigma_v, 3.0);
}

TEST(Train, RejectsTooFewScans) {
  SimConfig sc;
  sc.n_scans = 20;
  const auto sim = simulate(sc);
  Rng rng(1);
  EXPECT_THROW(train(sim.volume, PfConfig{}, rng), ConfigError);
}

TEST(TrackPf, NoiselessFlatVolumeIsExact) {
  auto sc = clean_config();
  sc.surface_sigma = 0.0;
  const auto sim = simulate(sc);
  const auto out = track_pf(sim.volume, PfConfig{});
  EXPECT_EQ(out, sim.truth);
}

TEST(TrackPf, SameSeedIsIdentical) {
  auto sc = clean_config();
  sc.noise_sigma = 0.1;
  const auto sim = simulate(sc);
  PfConfig cfg;
  cfg.seed = 3;
  const auto a = run_pf(sim.volume, cfg);
  const auto b = run_pf(sim.volume, cfg);
  EXPECT_EQ(a.surface, b.surface);
  EXPECT_EQ(a.mmse, b.mmse);
}

TEST(TrackPf, OutputIsSmooth) {
  SimConfig sc;
  sc.n_scans = 300;
  sc.surface_sigma = 1.0;
  sc.surface_base = 200.0;
  sc.noise_sigma = 0.05;
  const auto sim = simulate(sc);
  PfConfig cfg;
  cfg.sigma_v = 1.0;
  const auto out = track_pf(sim.volume, cfg);
  for (std::size_t ch = 0; ch < sc.n_channels; ++ch)
    for (std::size_t dt = 1; dt < sc.n_scans; ++dt) ASSERT_LE(std::abs(out(ch, dt) - out(ch, dt - 1)), 6.0);
}

TEST(TrackPf, SnowVarianceWellBelowGlobalMax) {
  const auto sim = simulate(snow_scenario(1));
  const auto pf = track_pf(sim.volume, PfConfig{});
  const auto gm = track_global_max(sim.volume);
  const double v_pf = bias_variance(pf, sim.truth, 20).variance;
  const double v_gm = bias_variance(gm, sim.truth, 20).variance;
  EXPECT_LT(v_pf, 0.25 * v_gm);
}

TEST(TrackPf, DiagnosticsAreReported) {
  auto sc = clean_config();
  sc.noise_sigma = 0.05;
  const auto sim = simulate(sc);
  const auto run = run_pf(sim.volume, PfConfig{});
  EXPECT_GT(run.diagnostics.template_updates, 0u);
  EXPECT_EQ(run.diagnostics.template_confidence, 480.0 + static_cast<double>(run.diagnostics.template_updates));
  EXPECT_GT(run.diagnostics.sigma_n, 0.0);
}

}  // namespace
}  // namespace gbtrack
