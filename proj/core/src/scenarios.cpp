#include "gbtrack/scenarios.hpp"

#include <random>

#include "gbtrack/errors.hpp"

namespace gbtrack {

SimConfig snow_scenario(std::uint64_t seed) {
  SimConfig cfg;
  cfg.seed = seed;
  cfg.noise_sigma = 0.05;
  SnowLayer snow;
  snow.offset_samples = 30.0;
  snow.amplitude_ratio = 1.5;
  snow.first_scan = 20;
  snow.last_scan = cfg.n_scans - 1;
  snow.coverage = 0.3;
  snow.patch_scans = 2;
  cfg.snow = snow;
  return cfg;
}

SimConfig stress_lane(std::uint64_t seed, std::size_t lane) {
  SimConfig cfg;
  cfg.n_depth = 256;
  cfg.n_scans = 2500;
  cfg.seed = seed * 1000 + lane;
  cfg.surface_base = 100.0;
  cfg.surface_sigma = 0.5;
  cfg.surface_reversion = 0.995;
  cfg.noise_sigma = 0.05;

  SnowLayer snow;
  snow.offset_samples = 14.0;
  snow.amplitude_ratio = 1.5;
  snow.first_scan = 20;
  snow.last_scan = cfg.n_scans - 1;
  snow.coverage = 0.02;
  snow.patch_scans = 2;
  cfg.snow = snow;

  std::seed_seq sseq{seed, static_cast<std::uint64_t>(lane), std::uint64_t{0x5eed}};
  std::mt19937_64 rng(sseq);
  std::uniform_int_distribution<std::size_t> streak_start(50, cfg.n_scans - 50);
  for (int k = 0; k < 2; ++k) {
    Interference in;
    in.first_scan = streak_start(rng);
    in.last_scan = in.first_scan + 4;
    in.amplitude = 0.6;
    in.extent = 60;
    cfg.interference.push_back(in);
  }
  std::uniform_int_distribution<std::size_t> mine_ch(3, cfg.n_channels - 4);
  std::uniform_int_distribution<std::size_t> mine_jitter(0, 400);
  std::uniform_real_distribution<double> mine_depth(20.0, 35.0);
  std::uniform_real_distribution<double> mine_amp(0.3, 2.0);
  for (std::size_t m = 0; m < 4; ++m) {
    Mine mine;
    mine.ch = mine_ch(rng);
    mine.dt = 100 + 600 * m + mine_jitter(rng);
    mine.depth_offset = mine_depth(rng);
    mine.amplitude = mine_amp(rng);
    cfg.mines.push_back(mine);
  }
  return cfg;
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"default", "snow", "stress"};
  return names;
}

SimConfig scenario_config(const std::string& name, std::uint64_t seed, std::size_t lane) {
  if (name == "default") {
    SimConfig cfg;
    cfg.seed = seed;
    return cfg;
  }
  if (name == "snow") return snow_scenario(seed);
  if (name == "stress") return stress_lane(seed, lane);
  throw ConfigError("unknown scenario '" + name + "'");
}

}  // namespace gbtrack
