#include "gbtrack/baseline.hpp"

#include <algorithm>
#include <cmath>

#include "gbtrack/errors.hpp"

namespace gbtrack {

std::size_t argmax(std::span<const float> z, std::size_t lo, std::size_t hi) {
  std::size_t best = lo;
  for (std::size_t d = lo + 1; d <= hi; ++d) {
    if (z[d] > z[best]) best = d;
  }
  return best;
}

GroundBounceSurface track_global_max(const GprVolume& volume) {
  if (volume.empty()) throw ConfigError("empty volume");
  GroundBounceSurface out(volume.n_channels(), volume.n_scans());
  for (std::size_t ch = 0; ch < volume.n_channels(); ++ch) {
    for (std::size_t dt = 0; dt < volume.n_scans(); ++dt) {
      out(ch, dt) = static_cast<double>(argmax(volume.ascan(ch, dt)));
    }
  }
  return out;
}

void ConstrainedMaxConfig::validate() const {
  if (!(w_min >= 1.0)) throw ConfigError("w_min must be >= 1");
  if (!(w_max >= w_min)) throw ConfigError("w_max must be >= w_min");
  if (!(alpha_cm > 0.0)) throw ConfigError("alpha_cm must be > 0");
}

double search_half_width(double history_stddev, const ConstrainedMaxConfig& cfg) {
  return std::clamp(cfg.alpha_cm * history_stddev, cfg.w_min, cfg.w_max);
}

GroundBounceSurface track_constrained_max(const GprVolume& volume, const ConstrainedMaxConfig& cfg) {
  if (volume.empty()) throw ConfigError("empty volume");
  cfg.validate();
  const double last = static_cast<double>(volume.n_depth() - 1);
  GroundBounceSurface out(volume.n_channels(), volume.n_scans());
  for (std::size_t ch = 0; ch < volume.n_channels(); ++ch) {
    // Welford accumulator over this channel's estimates.
    double mean = 0.0, m2 = 0.0;
    std::size_t count = 0;
    double prev = 0.0;
    for (std::size_t dt = 0; dt < volume.n_scans(); ++dt) {
      const auto z = volume.ascan(ch, dt);
      double est;
      if (dt == 0) {
        est = static_cast<double>(argmax(z));
      } else {
        const double w = search_half_width(std::sqrt(m2 / static_cast<double>(count)), cfg);
        const auto lo = static_cast<std::size_t>(std::clamp(std::ceil(prev - w), 0.0, last));
        const auto hi = static_cast<std::size_t>(std::clamp(std::floor(prev + w), 0.0, last));
        est = static_cast<double>(argmax(z, lo, hi));
      }
      out(ch, dt) = est;
      prev = est;
      ++count;
      const double delta = est - mean;
      mean += delta / static_cast<double>(count);
      m2 += delta * (est - mean);
    }
  }
  return out;
}

}  // namespace gbtrack
