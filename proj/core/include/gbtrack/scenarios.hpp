#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gbtrack/simulator.hpp"

namespace gbtrack {

/// Patchy full-width snow (1 to 3 scan patches, 30% of the scans after the
/// training window) over a 415x24x500 volume with noise 0.05.
SimConfig snow_scenario(std::uint64_t seed);

/// Stress lane: 256x24x2500 cells (150 m^2) of slowly wandering ground with
/// thin patchy snow, two shallow interference streaks and four mines.
SimConfig stress_lane(std::uint64_t seed, std::size_t lane);

inline constexpr std::size_t kStressLanes = 10;

/// Names accepted by scenario_config.
const std::vector<std::string>& scenario_names();

/// Looks a scenario up by name ("default", "snow", "stress"); lane applies to
/// "stress" only. Throws ConfigError for unknown names.
SimConfig scenario_config(const std::string& name, std::uint64_t seed, std::size_t lane = 0);

}  // namespace gbtrack
