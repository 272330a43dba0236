#pragma once

#include <cstddef>
#include <vector>

#include "gbtrack/types.hpp"

namespace gbtrack {

/// Area of one cell: 5 cm down-track by 5 cm cross-track.
inline constexpr double kCellAreaM2 = 0.05 * 0.05;

struct TrackError {
  double bias = 0.0;      // mean signed error, samples
  double variance = 0.0;  // population variance, samples^2
  double rmse = 0.0;      // samples
  std::size_t n_cells = 0;
};

/// Errors est - truth over scans [first_scan, n_scans).
TrackError bias_variance(const GroundBounceSurface& est, const GroundBounceSurface& truth,
                         std::size_t first_scan = 0);

struct PrescreenConfig {
  std::size_t guard = 10;          // samples zeroed on each side of the ground bounce
  std::size_t depth_window = 40;   // samples scored below the guard
  double percentile = 0.9;         // score quantile an alarm must exceed
};

struct Alarm {
  std::size_t ch = 0;
  std::size_t dt = 0;
  double score = 0.0;
};

/// RMS energy below the removed ground bounce, per cell, laid out like a
/// GroundBounceSurface.
GroundBounceSurface prescreen_scores(const GprVolume& volume, const GroundBounceSurface& gb,
                                     const PrescreenConfig& cfg);

/// Local maxima (8-neighbourhood) of the score map above the configured
/// percentile, sorted by descending score.
std::vector<Alarm> prescreen(const GprVolume& volume, const GroundBounceSurface& gb,
                             const PrescreenConfig& cfg);
std::vector<Alarm> alarms_from_scores(const GroundBounceSurface& scores, double percentile);

struct RocPoint {
  double far = 0.0;  // false alarms per m^2
  double pd = 0.0;
};

struct RocConfig {
  std::size_t halo = 5;       // cells (Chebyshev distance) around a mine
  double area_m2 = 1.0;
  double far_max = 0.02;      // upper end of the AUC window
};

struct RocCurve {
  std::vector<RocPoint> points;  // one per distinct FAR, sorted ascending
  double auc_window = 0.0;       // trapezoidal integral of PD over [0, far_max]
  bool degenerate = false;       // no mines: PD undefined, reported as 0
};

/// Sweeps the alarm threshold from the top score down. The first alarm inside
/// a mine's halo detects it; further alarms inside a detected halo are
/// ignored; all other alarms are false alarms.
RocCurve roc(std::vector<Alarm> alarms, const std::vector<CellIndex>& mines, const RocConfig& cfg);

/// Trapezoidal area under PD(FAR) over [0, far_max]. PD at FAR 0 is taken from
/// the curve (0 when no point sits there); beyond the last point it is held.
double auc_window(const std::vector<RocPoint>& points, double far_max);

}  // namespace gbtrack
