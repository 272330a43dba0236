#include "gbtrack/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "gbtrack/errors.hpp"

namespace gbtrack {

TrackError bias_variance(const GroundBounceSurface& est, const GroundBounceSurface& truth,
                         std::size_t first_scan) {
  if (!est.same_shape(truth)) {
    throw ConfigError("estimate is " + std::to_string(est.n_channels()) + "x" +
                      std::to_string(est.n_scans()) + " but truth is " +
                      std::to_string(truth.n_channels()) + "x" + std::to_string(truth.n_scans()));
  }
  if (first_scan >= est.n_scans()) throw ConfigError("first_scan beyond the surface");
  TrackError out;
  double sum = 0.0;
  for (std::size_t ch = 0; ch < est.n_channels(); ++ch) {
    for (std::size_t dt = first_scan; dt < est.n_scans(); ++dt) {
      sum += est(ch, dt) - truth(ch, dt);
      ++out.n_cells;
    }
  }
  out.bias = sum / static_cast<double>(out.n_cells);
  double ss = 0.0, sq = 0.0;
  for (std::size_t ch = 0; ch < est.n_channels(); ++ch) {
    for (std::size_t dt = first_scan; dt < est.n_scans(); ++dt) {
      const double e = est(ch, dt) - truth(ch, dt);
      ss += (e - out.bias) * (e - out.bias);
      sq += e * e;
    }
  }
  out.variance = ss / static_cast<double>(out.n_cells);
  out.rmse = std::sqrt(sq / static_cast<double>(out.n_cells));
  return out;
}

GroundBounceSurface prescreen_scores(const GprVolume& volume, const GroundBounceSurface& gb,
                                     const PrescreenConfig& cfg) {
  if (gb.n_channels() != volume.n_channels() || gb.n_scans() != volume.n_scans()) {
    throw ConfigError("ground-bounce surface does not match the volume");
  }
  const std::size_t n_depth = volume.n_depth();
  GroundBounceSurface scores(volume.n_channels(), volume.n_scans());
  for (std::size_t ch = 0; ch < volume.n_channels(); ++ch) {
    for (std::size_t dt = 0; dt < volume.n_scans(); ++dt) {
      const auto z = volume.ascan(ch, dt);
      const long g = std::lround(gb(ch, dt));
      const long begin = std::max(0L, g + static_cast<long>(cfg.guard) + 1);
      const long end = std::min(static_cast<long>(n_depth),
                                g + static_cast<long>(cfg.guard + cfg.depth_window) + 1);
      double ss = 0.0;
      long n = 0;
      for (long d = begin; d < end; ++d, ++n) ss += static_cast<double>(z[d]) * z[d];
      scores(ch, dt) = n > 0 ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
    }
  }
  return scores;
}

std::vector<Alarm> alarms_from_scores(const GroundBounceSurface& scores, double percentile) {
  const std::size_t n_ch = scores.n_channels();
  const std::size_t n_dt = scores.n_scans();
  if (scores.size() == 0) return {};
  std::vector<double> sorted = scores.values();
  const auto rank = static_cast<std::size_t>(
      std::clamp(percentile, 0.0, 1.0) * static_cast<double>(sorted.size() - 1));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(rank), sorted.end());
  const double threshold = sorted[rank];

  std::vector<Alarm> alarms;
  for (std::size_t ch = 0; ch < n_ch; ++ch) {
    for (std::size_t dt = 0; dt < n_dt; ++dt) {
      const double s = scores(ch, dt);
      if (!(s > threshold)) continue;
      bool peak = true;
      for (long dc = -1; dc <= 1 && peak; ++dc) {
        for (long dd = -1; dd <= 1 && peak; ++dd) {
          if (dc == 0 && dd == 0) continue;
          const long c = static_cast<long>(ch) + dc;
          const long d = static_cast<long>(dt) + dd;
          if (c < 0 || d < 0 || c >= static_cast<long>(n_ch) || d >= static_cast<long>(n_dt)) continue;
          const double o = scores(static_cast<std::size_t>(c), static_cast<std::size_t>(d));
          // Plateaus keep only their first cell in (ch, dt) order.
          if (o > s || (o == s && (dc < 0 || (dc == 0 && dd < 0)))) peak = false;
        }
      }
      if (peak) alarms.push_back({ch, dt, s});
    }
  }
  std::stable_sort(alarms.begin(), alarms.end(),
                   [](const Alarm& a, const Alarm& b) { return a.score > b.score; });
  return alarms;
}

std::vector<Alarm> prescreen(const GprVolume& volume, const GroundBounceSurface& gb,
                             const PrescreenConfig& cfg) {
  return alarms_from_scores(prescreen_scores(volume, gb, cfg), cfg.percentile);
}

double auc_window(const std::vector<RocPoint>& points, double far_max) {
  double pd0 = 0.0;
  std::size_t i = 0;
  while (i < points.size() && points[i].far <= 0.0) pd0 = std::max(pd0, points[i++].pd);
  double area = 0.0;
  double f_prev = 0.0, p_prev = pd0;
  for (; i < points.size() && f_prev < far_max; ++i) {
    const double f = points[i].far, p = points[i].pd;
    if (f > far_max) {
      const double p_cut = p_prev + (p - p_prev) * (far_max - f_prev) / (f - f_prev);
      area += 0.5 * (p_prev + p_cut) * (far_max - f_prev);
      return area;
    }
    area += 0.5 * (p_prev + p) * (f - f_prev);
    f_prev = f;
    p_prev = p;
  }
  if (f_prev < far_max) area += p_prev * (far_max - f_prev);
  return area;
}

RocCurve roc(std::vector<Alarm> alarms, const std::vector<CellIndex>& mines, const RocConfig& cfg) {
  if (!(cfg.area_m2 > 0.0)) throw ConfigError("area_m2 must be > 0");
  std::stable_sort(alarms.begin(), alarms.end(),
                   [](const Alarm& a, const Alarm& b) { return a.score > b.score; });

  RocCurve curve;
  curve.degenerate = mines.empty();
  const auto halo = static_cast<long>(cfg.halo);
  auto distance = [](const Alarm& a, const CellIndex& m) {
    return std::max(std::labs(static_cast<long>(a.ch) - static_cast<long>(m.ch)),
                    std::labs(static_cast<long>(a.dt) - static_cast<long>(m.dt)));
  };

  std::vector<bool> detected(mines.size(), false);
  std::size_t hits = 0, false_alarms = 0;
  auto push_point = [&] {
    const double far = static_cast<double>(false_alarms) / cfg.area_m2;
    const double pd = mines.empty() ? 0.0 : static_cast<double>(hits) / mines.size();
    if (!curve.points.empty() && curve.points.back().far == far) {
      curve.points.back().pd = pd;
    } else {
      curve.points.push_back({far, pd});
    }
  };

  for (std::size_t i = 0; i < alarms.size(); ++i) {
    const Alarm& a = alarms[i];
    long best = -1, best_d = 0;
    bool in_detected_halo = false;
    for (std::size_t m = 0; m < mines.size(); ++m) {
      const long d = distance(a, mines[m]);
      if (d > halo) continue;
      if (detected[m]) {
        in_detected_halo = true;
      } else if (best < 0 || d < best_d) {
        best = static_cast<long>(m);
        best_d = d;
      }
    }
    if (best >= 0) {
      detected[static_cast<std::size_t>(best)] = true;
      ++hits;
    } else if (!in_detected_halo) {
      ++false_alarms;
    }
    // Emit a point once every alarm sharing this score has been counted.
    if (i + 1 == alarms.size() || alarms[i + 1].score != a.score) push_point();
  }
  if (curve.points.empty()) curve.points.push_back({0.0, 0.0});
  curve.auc_window = auc_window(curve.points, cfg.far_max);
  return curve;
}

}  // namespace gbtrack
