#include "gbtrack/types.hpp"

#include <cmath>
#include <string>

#include "gbtrack/errors.hpp"

namespace gbtrack {

CellIndex CellIndex::from_one_based(std::size_t ch1, std::size_t dt1) {
  if (ch1 == 0 || dt1 == 0) throw ConfigError("cell indices are 1-based");
  return {ch1 - 1, dt1 - 1};
}

CellIndex CellIndex::from_step(std::size_t k, std::size_t n_channels) {
  if (k == 0 || n_channels == 0) throw ConfigError("step index is 1-based");
  return {(k - 1) % n_channels, (k - 1) / n_channels};
}

GprVolume::GprVolume(std::size_t n_depth, std::size_t n_channels, std::size_t n_scans)
    : GprVolume(n_depth, n_channels, n_scans,
                std::vector<float>(n_depth * n_channels * n_scans, 0.0f)) {}

GprVolume::GprVolume(std::size_t n_depth, std::size_t n_channels, std::size_t n_scans,
                     std::vector<float> samples)
    : n_depth_(n_depth), n_channels_(n_channels), n_scans_(n_scans), samples_(std::move(samples)) {
  if (n_depth == 0 || n_channels == 0 || n_scans == 0) {
    throw ConfigError("volume dimensions must be positive");
  }
  if (samples_.size() != n_depth * n_channels * n_scans) {
    throw ConfigError("sample count " + std::to_string(samples_.size()) +
                      " does not match dimensions");
  }
}

std::span<const float> GprVolume::ascan(std::size_t ch, std::size_t dt) const {
  return {samples_.data() + offset(ch, dt), n_depth_};
}

std::span<float> GprVolume::ascan(std::size_t ch, std::size_t dt) {
  return {samples_.data() + offset(ch, dt), n_depth_};
}

AScanView::AScanView(const GprVolume& volume, std::size_t ch, std::size_t dt) {
  if (ch >= volume.n_channels() || dt >= volume.n_scans()) {
    throw ConfigError("A-scan index out of range");
  }
  samples_ = volume.ascan(ch, dt);
}

GroundBounceSurface::GroundBounceSurface(std::size_t n_channels, std::size_t n_scans, double fill)
    : n_channels_(n_channels), n_scans_(n_scans), gb_(n_channels * n_scans, fill) {}

void GroundBounceSurface::check_range(std::size_t n_depth) const {
  const double hi = static_cast<double>(n_depth) - 1.0;
  for (std::size_t ch = 0; ch < n_channels_; ++ch) {
    for (std::size_t dt = 0; dt < n_scans_; ++dt) {
      const double v = (*this)(ch, dt);
      if (!std::isfinite(v) || v < 0.0 || v > hi) {
        throw ConfigError("ground bounce " + std::to_string(v) + " at ch " +
                          std::to_string(ch + 1) + ", dt " + std::to_string(dt + 1) +
                          " outside [0, " + std::to_string(n_depth - 1) + "]");
      }
    }
  }
}

}  // namespace gbtrack
