#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gbtrack {

/// Position of one A-scan in the volume. Stored 0-based; the 1-based
/// convention used in documentation and file formats converts here only.
struct CellIndex {
  std::size_t ch = 0;
  std::size_t dt = 0;

  static CellIndex from_one_based(std::size_t ch1, std::size_t dt1);
  std::size_t ch_one_based() const { return ch + 1; }
  std::size_t dt_one_based() const { return dt + 1; }

  /// Processing step k = (dt-1)*n_channels + ch in 1-based terms.
  std::size_t step(std::size_t n_channels) const { return dt * n_channels + ch + 1; }
  static CellIndex from_step(std::size_t k, std::size_t n_channels);

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Radar volume of n_depth x n_channels x n_scans amplitudes. Samples of one
/// A-scan are contiguous (depth-inner, channel-middle, scan-outer).
class GprVolume {
 public:
  GprVolume() = default;
  GprVolume(std::size_t n_depth, std::size_t n_channels, std::size_t n_scans);
  GprVolume(std::size_t n_depth, std::size_t n_channels, std::size_t n_scans,
            std::vector<float> samples);

  std::size_t n_depth() const { return n_depth_; }
  std::size_t n_channels() const { return n_channels_; }
  std::size_t n_scans() const { return n_scans_; }
  bool empty() const { return samples_.empty(); }

  std::span<const float> ascan(std::size_t ch, std::size_t dt) const;
  std::span<float> ascan(std::size_t ch, std::size_t dt);

  float at(std::size_t depth, std::size_t ch, std::size_t dt) const {
    return samples_[offset(ch, dt) + depth];
  }
  float& at(std::size_t depth, std::size_t ch, std::size_t dt) {
    return samples_[offset(ch, dt) + depth];
  }

  const std::vector<float>& samples() const { return samples_; }

  friend bool operator==(const GprVolume&, const GprVolume&) = default;

 private:
  std::size_t offset(std::size_t ch, std::size_t dt) const {
    return (dt * n_channels_ + ch) * n_depth_;
  }

  std::size_t n_depth_ = 0;
  std::size_t n_channels_ = 0;
  std::size_t n_scans_ = 0;
  std::vector<float> samples_;
};

/// Read-only depth vector z_k of one cell.
class AScanView {
 public:
  AScanView(const GprVolume& volume, std::size_t ch, std::size_t dt);
  explicit AScanView(std::span<const float> samples) : samples_(samples) {}

  std::size_t size() const { return samples_.size(); }
  float operator[](std::size_t depth) const { return samples_[depth]; }
  std::span<const float> samples() const { return samples_; }

 private:
  std::span<const float> samples_;
};

/// Ground-bounce depth (in samples) per (channel, scan). Values may be
/// fractional for MMSE output; integer trackers store integral values.
class GroundBounceSurface {
 public:
  GroundBounceSurface() = default;
  GroundBounceSurface(std::size_t n_channels, std::size_t n_scans, double fill = 0.0);

  std::size_t n_channels() const { return n_channels_; }
  std::size_t n_scans() const { return n_scans_; }
  std::size_t size() const { return gb_.size(); }

  double operator()(std::size_t ch, std::size_t dt) const { return gb_[ch * n_scans_ + dt]; }
  double& operator()(std::size_t ch, std::size_t dt) { return gb_[ch * n_scans_ + dt]; }

  /// One channel's track along down-track.
  std::span<const double> channel(std::size_t ch) const {
    return {gb_.data() + ch * n_scans_, n_scans_};
  }

  const std::vector<double>& values() const { return gb_; }

  bool same_shape(const GroundBounceSurface& other) const {
    return n_channels_ == other.n_channels_ && n_scans_ == other.n_scans_;
  }

  /// Throws ConfigError unless every entry is finite and inside [0, n_depth-1].
  void check_range(std::size_t n_depth) const;

  friend bool operator==(const GroundBounceSurface&, const GroundBounceSurface&) = default;

 private:
  std::size_t n_channels_ = 0;
  std::size_t n_scans_ = 0;
  std::vector<double> gb_;
};

}  // namespace gbtrack
