#pragma once

#include <cstddef>
#include <span>

#include "gbtrack/types.hpp"

namespace gbtrack {

/// Index of the largest sample in [lo, hi] (inclusive); ties go to the
/// smallest index.
std::size_t argmax(std::span<const float> z, std::size_t lo, std::size_t hi);
inline std::size_t argmax(std::span<const float> z) { return argmax(z, 0, z.size() - 1); }

/// Per-cell depth of the strongest response.
GroundBounceSurface track_global_max(const GprVolume& volume);

struct ConstrainedMaxConfig {
  double w_max = 20.0;    // samples
  double alpha_cm = 3.0;  // window gain on the history STD
  double w_min = 2.0;     // samples; keeps a constant history from freezing the search

  void validate() const;
};

/// Search half-width clamp(alpha * stddev, w_min, w_max).
double search_half_width(double history_stddev, const ConstrainedMaxConfig& cfg);

/// Per channel, down-track: the first scan takes the global maximum, every
/// later scan the maximum within +/- W of the previous estimate, where W
/// follows the standard deviation of that channel's estimates so far.
GroundBounceSurface track_constrained_max(const GprVolume& volume, const ConstrainedMaxConfig& cfg);

}  // namespace gbtrack
