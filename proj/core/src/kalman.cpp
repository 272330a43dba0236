#include "gbtrack/kalman.hpp"

#include <algorithm>
#include <deque>

#include "gbtrack/baseline.hpp"
#include "gbtrack/errors.hpp"

namespace gbtrack {

void KfConfig::validate() const {
  if (!(q_scale > 0.0)) throw ConfigError("q_scale must be > 0");
  if (!(r_base > 0.0)) throw ConfigError("r_base must be > 0");
  if (r_smooth_window < 1) throw ConfigError("r_smooth_window must be >= 1");
  if (!(p0 > 0.0)) throw ConfigError("p0 must be > 0");
}

const KfMatrix& kf_transition() {
  static const KfMatrix kF = [] {
    KfMatrix f = KfMatrix::Zero();
    f.topRows<3>().setConstant(1.0 / 3.0);
    f.bottomRightCorner<3, 3>().setIdentity();
    return f;
  }();
  return kF;
}

const Eigen::Matrix<double, 3, 6>& kf_observation() {
  static const Eigen::Matrix<double, 3, 6> kH = [] {
    Eigen::Matrix<double, 3, 6> h = Eigen::Matrix<double, 3, 6>::Zero();
    h.leftCols<3>().setIdentity();
    return h;
  }();
  return kH;
}

KfState kf_predict(const KfState& s, const KfConfig& cfg) {
  const auto& f = kf_transition();
  KfState out;
  out.x = f * s.x;
  out.P = f * s.P * f.transpose() + cfg.q_scale * KfMatrix::Identity();
  return out;
}

KfState kf_update(const KfState& s, const KfObservation& z, const KfObsCovariance& r,
                  KfDiagnostics* diag) {
  const auto& h = kf_observation();
  const Eigen::Vector3d innovation = z - h * s.x;
  Eigen::Matrix3d cov = h * s.P * h.transpose() + r;
  Eigen::LLT<Eigen::Matrix3d> llt(cov);
  if (llt.info() != Eigen::Success) {
    cov += 1e-9 * Eigen::Matrix3d::Identity();
    llt.compute(cov);
    if (diag) ++diag->regularized;
  }
  // K = P H^T S^-1, solved as S K^T = H P.
  const Eigen::Matrix<double, 6, 3> gain = llt.solve(h * s.P).transpose();

  KfState out;
  out.x = s.x + gain * innovation;
  // Joseph form keeps P symmetric positive semi-definite.
  const KfMatrix ikh = KfMatrix::Identity() - gain * h;
  out.P = ikh * s.P * ikh.transpose() + gain * r * gain.transpose();
  out.P = 0.5 * (out.P + out.P.transpose()).eval();
  return out;
}

std::vector<double> adapt_obs_noise(std::span<const std::vector<double>> recent_scans,
                                    const KfConfig& cfg) {
  if (recent_scans.empty()) throw ConfigError("adapt_obs_noise needs at least one scan");
  const std::size_t n_ch = recent_scans.back().size();
  const std::size_t used = std::min(recent_scans.size(), cfg.r_smooth_window);
  std::vector<double> r(n_ch, 0.0);
  for (std::size_t s = recent_scans.size() - used; s < recent_scans.size(); ++s) {
    const auto& gb = recent_scans[s];
    if (gb.size() != n_ch) throw ConfigError("inconsistent channel count in GB_max history");
    for (std::size_t ch = 0; ch < n_ch; ++ch) {
      const std::size_t lo = ch == 0 ? 0 : ch - 1;
      const std::size_t hi = std::min(ch + 1, n_ch - 1);
      const double n = static_cast<double>(hi - lo + 1);
      double mean = 0.0;
      for (std::size_t c = lo; c <= hi; ++c) mean += gb[c];
      mean /= n;
      double var = 0.0;
      for (std::size_t c = lo; c <= hi; ++c) var += (gb[c] - mean) * (gb[c] - mean);
      r[ch] += var / n;
    }
  }
  for (auto& v : r) v = std::max(v / static_cast<double>(used), cfg.r_base);
  return r;
}

GroundBounceSurface filter_gb_max(const GroundBounceSurface& gb_max, const KfConfig& cfg,
                                  KfDiagnostics* diag) {
  cfg.validate();
  const std::size_t n_ch = gb_max.n_channels();
  const std::size_t n_scans = gb_max.n_scans();
  if (n_ch == 0 || n_scans == 0) throw ConfigError("empty GB_max surface");

  auto neighbours = [n_ch](std::size_t ch) {
    return std::pair{ch == 0 ? ch : ch - 1, ch + 1 == n_ch ? ch : ch + 1};
  };
  auto observation = [&](std::size_t ch, std::size_t dt) {
    const auto [lo, hi] = neighbours(ch);
    return KfObservation(gb_max(ch, dt), gb_max(lo, dt), gb_max(hi, dt));
  };

  GroundBounceSurface out(n_ch, n_scans);
  std::vector<KfState> filters(n_ch);
  for (std::size_t ch = 0; ch < n_ch; ++ch) {
    filters[ch].x.head<3>() = observation(ch, 0);
    filters[ch].x.tail<3>().setZero();
    filters[ch].P = cfg.p0 * KfMatrix::Identity();
    out(ch, 0) = filters[ch].x(0);
  }

  std::deque<std::vector<double>> history;
  for (std::size_t dt = 0; dt < n_scans; ++dt) {
    std::vector<double> scan(n_ch);
    for (std::size_t ch = 0; ch < n_ch; ++ch) scan[ch] = gb_max(ch, dt);
    history.push_back(std::move(scan));
    if (history.size() > cfg.r_smooth_window) history.pop_front();
    if (dt == 0) continue;

    const std::vector<std::vector<double>> window(history.begin(), history.end());
    const auto r = adapt_obs_noise(window, cfg);
    for (std::size_t ch = 0; ch < n_ch; ++ch) {
      const KfObsCovariance cov = r[ch] * KfObsCovariance::Identity();
      filters[ch] = kf_update(kf_predict(filters[ch], cfg), observation(ch, dt), cov, diag);
      out(ch, dt) = filters[ch].x(0);
    }
  }
  return out;
}

GroundBounceSurface track_kalman(const GprVolume& volume, const KfConfig& cfg, KfDiagnostics* diag) {
  return filter_gb_max(track_global_max(volume), cfg, diag);
}

}  // namespace gbtrack
