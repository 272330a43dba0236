#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gbtrack/types.hpp"

namespace gbtrack {

using KfVector = Eigen::Matrix<double, 6, 1>;
using KfMatrix = Eigen::Matrix<double, 6, 6>;
using KfObservation = Eigen::Vector3d;
using KfObsCovariance = Eigen::Matrix3d;

/// State layout: [GB_ch, GB_ch-1, GB_ch+1, GB'_ch, GB'_ch-1, GB'_ch+1].
struct KfState {
  KfVector x = KfVector::Zero();
  KfMatrix P = KfMatrix::Identity();
};

struct KfConfig {
  double q_scale = 0.01;              // Q = q_scale * I, samples^2
  double r_base = 1.0;                // floor on the adaptive R, samples^2
  std::size_t r_smooth_window = 5;    // scans in the moving average of R
  double p0 = 25.0;                   // P0 = p0 * I

  void validate() const;
};

struct KfDiagnostics {
  std::size_t regularized = 0;  // updates whose innovation covariance needed a ridge
};

/// Transition: each position row averages the three positions and the three
/// derivatives; derivatives persist.
const KfMatrix& kf_transition();

/// Observation: selects the three positions.
const Eigen::Matrix<double, 3, 6>& kf_observation();

KfState kf_predict(const KfState& s, const KfConfig& cfg);

KfState kf_update(const KfState& s, const KfObservation& z, const KfObsCovariance& r,
                  KfDiagnostics* diag = nullptr);

/// Per-channel observation variance. `recent_scans` holds the global-maximum
/// depths of every channel for the most recent scans (oldest first); only the
/// last r_smooth_window are used. For each channel the population variance of
/// the GB_max values over the channel and its in-range neighbours is averaged
/// across those scans and floored at r_base.
std::vector<double> adapt_obs_noise(std::span<const std::vector<double>> recent_scans,
                                    const KfConfig& cfg);

/// One filter per channel, fed by the global-maximum track. Edge channels use
/// themselves in place of the missing neighbour.
GroundBounceSurface track_kalman(const GprVolume& volume, const KfConfig& cfg,
                                 KfDiagnostics* diag = nullptr);

/// Same filter bank driven directly by a global-maximum surface.
GroundBounceSurface filter_gb_max(const GroundBounceSurface& gb_max, const KfConfig& cfg,
                                  KfDiagnostics* diag = nullptr);

}  // namespace gbtrack
