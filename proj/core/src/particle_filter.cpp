#include "gbtrack/particle_filter.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "gbtrack/baseline.hpp"
#include "gbtrack/errors.hpp"

namespace gbtrack {
namespace {

constexpr double kSigmaNFloor = 1e-6;
constexpr double kSigmaVMin = 0.5;
constexpr double kSigmaVMax = 3.0;
constexpr std::size_t kStackWindow = 128;

// Scratch buffer for comparison windows; avoids a heap allocation per particle.
class Window {
 public:
  explicit Window(std::size_t n) : n_(n) {
    if (n_ > kStackWindow) heap_.resize(n_);
  }
  double* data() { return n_ > kStackWindow ? heap_.data() : stack_.data(); }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  std::array<double, kStackWindow> stack_{};
  std::vector<double> heap_;
};

void normalize_in_place(double* v, std::size_t n) {
  const auto [lo, hi] = std::minmax_element(v, v + n);
  const double min = *lo, range = *hi - *lo;
  if (range > 0.0) {
    for (std::size_t i = 0; i < n; ++i) v[i] = (v[i] - min) / range;
  } else {
    std::fill(v, v + n, 0.0);
  }
}

}  // namespace

double ParticleSet::weight_sum() const {
  double s = 0.0;
  for (const auto& p : particles) s += p.weight;
  return s;
}

ParticleSet ParticleSet::uniform(std::span<const double> states) {
  ParticleSet set;
  set.particles.reserve(states.size());
  const double w = 1.0 / static_cast<double>(states.size());
  for (double s : states) set.particles.push_back({s, w});
  return set;
}

void PfConfig::validate() const {
  if (n_particles < 1) throw ConfigError("n_particles must be >= 1");
  if (n_train < 1) throw ConfigError("n_train must be >= 1");
  if (!(agree_tol >= 0.0)) throw ConfigError("agree_tol must be >= 0");
  if (!(s_target < 0.0)) throw ConfigError("s_target must be < 0");
  if (!(w_target > 0.0 && w_target <= 1.0)) throw ConfigError("w_target must be in (0, 1]");
  if (!std::isfinite(sigma_v) || !std::isfinite(sigma_n)) {
    throw ConfigError("sigma_v and sigma_n must be finite");
  }
}

std::size_t clamp_index(double value, std::size_t n) {
  const double r = std::round(value);
  if (!(r > 0.0)) return 0;
  if (r >= static_cast<double>(n - 1)) return n - 1;
  return static_cast<std::size_t>(r);
}

std::vector<double> extract_template(const AScanView& z, double gb_hat, std::size_t half_length,
                                     bool* clamped) {
  const long n = static_cast<long>(z.size());
  const long centre = std::lround(gb_hat);
  const long half = static_cast<long>(half_length);
  if (centre + half < 0 || centre - half > n - 1) {
    throw ConfigError("template window at depth " + std::to_string(centre) +
                      " lies entirely outside the A-scan");
  }
  std::vector<double> out(2 * half_length + 1);
  bool any = false;
  for (long i = -half; i <= half; ++i) {
    long d = centre + i;
    if (d < 0 || d >= n) {
      any = true;
      d = std::clamp(d, 0L, n - 1);
    }
    out[static_cast<std::size_t>(i + half)] = z[static_cast<std::size_t>(d)];
  }
  if (clamped) *clamped = any;
  return out;
}

GbTemplate update_template(const GbTemplate& tpl, std::span<const double> candidate) {
  if (candidate.size() != tpl.t.size()) {
    throw ConfigError("template length " + std::to_string(tpl.t.size()) +
                      " does not match candidate length " + std::to_string(candidate.size()));
  }
  GbTemplate out;
  out.alpha_conf = tpl.alpha_conf + 1.0;
  out.t.resize(tpl.t.size());
  for (std::size_t i = 0; i < tpl.t.size(); ++i) {
    out.t[i] = (tpl.alpha_conf * tpl.t[i] + candidate[i]) / out.alpha_conf;
  }
  return out;
}

std::vector<double> normalize_min_max(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  if (!out.empty()) normalize_in_place(out.data(), out.size());
  return out;
}

double match_residual(const AScanView& z, double x, std::span<const double> normalized_template) {
  const std::size_t len = normalized_template.size();
  const long half = static_cast<long>(len / 2);
  const long n = static_cast<long>(z.size());
  const long centre = std::lround(x);
  Window w(len);
  double* buf = w.data();
  for (long i = 0; i < static_cast<long>(len); ++i) {
    buf[i] = z[static_cast<std::size_t>(std::clamp(centre - half + i, 0L, n - 1))];
  }
  normalize_in_place(buf, len);
  double r = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double d = buf[i] - normalized_template[i];
    r += d * d;
  }
  return r;
}

double similarity(const AScanView& z, double x, const GbTemplate& tpl, double sigma_n) {
  const auto nt = normalize_min_max(tpl.t);
  return -match_residual(z, x, nt) / (2.0 * sigma_n * sigma_n);
}

double log_likelihood(double residual, double sigma_n) {
  return -residual / (2.0 * sigma_n * sigma_n) -
         std::log(std::sqrt(2.0 * std::numbers::pi) * sigma_n);
}

double likelihood(const AScanView& z, double x, const GbTemplate& tpl, double sigma_n) {
  if (tpl.t.empty()) throw ConfigError("empty template");
  return std::exp(similarity(z, x, tpl, sigma_n)) / (std::sqrt(2.0 * std::numbers::pi) * sigma_n);
}

double calibrate_sigma_n(std::span<const double> good_residuals, double s_target) {
  if (good_residuals.empty()) throw ConfigError("no good particles to calibrate sigma_n");
  const double min_r = *std::min_element(good_residuals.begin(), good_residuals.end());
  return std::max(std::sqrt(min_r / (2.0 * std::abs(s_target))), kSigmaNFloor);
}

ParticleSet propose_two_way(const ParticleSet& prev_scan, const ParticleSet* prev_channel,
                            double sigma_v, Rng& rng) {
  if (prev_scan.particles.empty()) throw ConfigError("empty neighbour particle set");
  std::normal_distribution<double> noise(0.0, 1.0);
  ParticleSet pooled;
  const double share = prev_channel ? 0.5 : 1.0;
  auto propagate = [&](const ParticleSet& src) {
    const double total = src.weight_sum();
    for (const auto& p : src.particles) {
      pooled.particles.push_back({p.state + sigma_v * noise(rng), share * p.weight / total});
    }
  };
  propagate(prev_scan);
  if (prev_channel) propagate(*prev_channel);

  // Downsample the pool to the neighbour set size with systematic selection.
  const std::size_t n = prev_scan.size();
  ParticleSet out;
  out.particles.reserve(n);
  const double step = 1.0 / static_cast<double>(n);
  std::uniform_real_distribution<double> start(0.0, step);
  double u = start(rng);
  double cumulative = pooled.particles.front().weight;
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i, u += step) {
    while (u > cumulative && j + 1 < pooled.size()) cumulative += pooled.particles[++j].weight;
    out.particles.push_back({pooled.particles[j].state, step});
  }
  return out;
}

bool apply_log_likelihoods(ParticleSet& set, std::span<const double> log_l) {
  const std::size_t n = set.size();
  if (log_l.size() != n) throw std::invalid_argument("one log-likelihood per particle required");
  std::vector<double> log_w(n);
  double max_log_l = -std::numeric_limits<double>::infinity();
  double max_log_w = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    max_log_l = std::max(max_log_l, log_l[i]);
    log_w[i] = std::log(set.particles[i].weight) + log_l[i];
    max_log_w = std::max(max_log_w, log_w[i]);
  }
  if (!std::isfinite(max_log_w)) {
    for (auto& p : set.particles) p.weight = 1.0 / static_cast<double>(n);
    return true;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    set.particles[i].weight = std::exp(log_w[i] - max_log_w);
    total += set.particles[i].weight;
  }
  for (auto& p : set.particles) p.weight /= total;
  return max_log_l < std::log(std::numeric_limits<double>::min());
}

bool update_weights(ParticleSet& set, const AScanView& z, std::span<const double> normalized_template,
                    double sigma_n) {
  std::vector<double> log_l(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    log_l[i] = log_likelihood(match_residual(z, set.particles[i].state, normalized_template), sigma_n);
  }
  return apply_log_likelihoods(set, log_l);
}

bool update_weights(ParticleSet& set, const AScanView& z, const GbTemplate& tpl, double sigma_n) {
  if (tpl.t.empty()) throw ConfigError("empty template");
  return update_weights(set, z, normalize_min_max(tpl.t), sigma_n);
}

ParticleSet resample(const ParticleSet& set, Rng& rng) {
  const std::size_t n = set.size();
  if (n == 0) return {};
  const double total = set.weight_sum();
  const double step = 1.0 / static_cast<double>(n);
  std::uniform_real_distribution<double> start(0.0, step);
  double u = start(rng);
  double cumulative = set.particles.front().weight / total;
  std::size_t j = 0;
  ParticleSet out;
  out.particles.reserve(n);
  for (std::size_t i = 0; i < n; ++i, u += step) {
    while (u > cumulative && j + 1 < n) cumulative += set.particles[++j].weight / total;
    out.particles.push_back({set.particles[j].state, step});
  }
  return out;
}

double estimate_state(const ParticleSet& set) {
  double num = 0.0, den = 0.0;
  for (const auto& p : set.particles) {
    num += p.weight * p.state;
    den += p.weight;
  }
  const double est = num / den;
  // Guard against rounding pushing the mean past the hull.
  const auto [lo, hi] = std::minmax_element(
      set.particles.begin(), set.particles.end(),
      [](const Particle& a, const Particle& b) { return a.state < b.state; });
  return std::clamp(est, lo->state, hi->state);
}

std::size_t refine_peak(const AScanView& z, double x_hat, std::size_t window) {
  const std::size_t centre = clamp_index(x_hat, z.size());
  const std::size_t half = window / 2;
  const std::size_t lo = centre > half ? centre - half : 0;
  const std::size_t hi = std::min(centre + half, z.size() - 1);
  return argmax(z.samples(), lo, hi);
}

TrainingResult train(const GprVolume& volume, const PfConfig& cfg, Rng& rng) {
  cfg.validate();
  if (volume.empty()) throw ConfigError("empty volume");
  const std::size_t n_train = cfg.n_train;
  const std::size_t n_ch = volume.n_channels();
  if (n_train >= volume.n_scans()) {
    throw ConfigError("n_train (" + std::to_string(n_train) + ") must be smaller than n_scans (" +
                      std::to_string(volume.n_scans()) + ")");
  }
  const std::size_t len = 2 * cfg.half_length + 1;

  TrainingResult out;
  out.output = GroundBounceSurface(n_ch, n_train);
  for (std::size_t ch = 0; ch < n_ch; ++ch) {
    for (std::size_t dt = 0; dt < n_train; ++dt) {
      out.output(ch, dt) = static_cast<double>(argmax(volume.ascan(ch, dt)));
    }
  }

  // Initial template: mean of every candidate extracted at the global maximum.
  out.tpl.t.assign(len, 0.0);
  for (std::size_t dt = 0; dt < n_train; ++dt) {
    for (std::size_t ch = 0; ch < n_ch; ++ch) {
      bool clamped = false;
      const auto tc = extract_template(AScanView(volume, ch, dt), out.output(ch, dt), cfg.half_length,
                                       &clamped);
      if (clamped) ++out.clamped;
      for (std::size_t i = 0; i < len; ++i) out.tpl.t[i] += tc[i];
    }
  }
  out.tpl.alpha_conf = static_cast<double>(n_ch * n_train);
  for (auto& v : out.tpl.t) v /= out.tpl.alpha_conf;

  if (cfg.sigma_v > 0.0) {
    out.sigma_v = cfg.sigma_v;
  } else {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t count = 0;
    for (std::size_t ch = 0; ch < n_ch; ++ch) {
      for (std::size_t dt = 1; dt < n_train; ++dt) {
        const double d = out.output(ch, dt) - out.output(ch, dt - 1);
        sum += d;
        sum_sq += d * d;
        ++count;
      }
    }
    double sd = 0.0;
    if (count > 1) {
      const double mean = sum / static_cast<double>(count);
      sd = std::sqrt(std::max(0.0, (sum_sq - count * mean * mean) / static_cast<double>(count - 1)));
    }
    out.sigma_v = std::clamp(sd, kSigmaVMin, kSigmaVMax);
  }

  // Good particles sit on the global maximum of every training cell.
  const auto norm_tpl = normalize_min_max(out.tpl.t);
  std::vector<double> residuals;
  residuals.reserve(n_ch * n_train);
  for (std::size_t dt = 0; dt < n_train; ++dt) {
    for (std::size_t ch = 0; ch < n_ch; ++ch) {
      residuals.push_back(match_residual(AScanView(volume, ch, dt), out.output(ch, dt), norm_tpl));
    }
  }
  out.sigma_n = cfg.sigma_n > 0.0 ? cfg.sigma_n : calibrate_sigma_n(residuals, cfg.s_target);
  const double min_r = *std::min_element(residuals.begin(), residuals.end());
  out.max_good_similarity = -min_r / (2.0 * out.sigma_n * out.sigma_n);

  std::normal_distribution<double> noise(0.0, out.sigma_v);
  std::vector<double> states(cfg.n_particles);
  const double last = static_cast<double>(volume.n_depth() - 1);
  auto draw_around = [&](double centre) {
    for (auto& s : states) s = std::clamp(centre + noise(rng), 0.0, last);
    return ParticleSet::uniform(states);
  };

  double weight_sum = 0.0;
  for (std::size_t dt = 0; dt < n_train; ++dt) {
    for (std::size_t ch = 0; ch < n_ch; ++ch) {
      auto set = draw_around(out.output(ch, dt));
      update_weights(set, AScanView(volume, ch, dt), norm_tpl, out.sigma_n);
      double w = 0.0;
      for (const auto& p : set.particles) w = std::max(w, p.weight);
      out.max_training_weight = std::max(out.max_training_weight, w);
      weight_sum += w;
    }
  }
  out.mean_training_weight = weight_sum / static_cast<double>(n_ch * n_train);

  out.initial_sets.reserve(n_ch);
  for (std::size_t ch = 0; ch < n_ch; ++ch) {
    out.initial_sets.push_back(draw_around(out.output(ch, n_train - 1)));
  }
  return out;
}

PfRun run_pf(const GprVolume& volume, const PfConfig& cfg) {
  Rng rng(cfg.seed);
  auto training = train(volume, cfg, rng);

  const std::size_t n_ch = volume.n_channels();
  const std::size_t n_scans = volume.n_scans();
  const std::size_t n_train = cfg.n_train;
  const std::size_t len = 2 * cfg.half_length + 1;
  const double last = static_cast<double>(volume.n_depth() - 1);

  PfRun run;
  run.surface = GroundBounceSurface(n_ch, n_scans);
  run.mmse = GroundBounceSurface(n_ch, n_scans);
  for (std::size_t ch = 0; ch < n_ch; ++ch) {
    for (std::size_t dt = 0; dt < n_train; ++dt) {
      run.surface(ch, dt) = training.output(ch, dt);
      run.mmse(ch, dt) = training.output(ch, dt);
    }
  }

  auto& diag = run.diagnostics;
  diag.clamped = training.clamped;
  diag.sigma_v = training.sigma_v;
  diag.max_training_weight = training.max_training_weight;
  diag.mean_training_weight = training.mean_training_weight;

  GbTemplate tpl = std::move(training.tpl);
  auto norm_tpl = normalize_min_max(tpl.t);
  double sigma_n = training.sigma_n;
  std::vector<ParticleSet> prev_row = std::move(training.initial_sets);
  std::vector<ParticleSet> row(n_ch);
  std::vector<double> scan_residuals;

  for (std::size_t dt = n_train; dt < n_scans; ++dt) {
    scan_residuals.clear();
    for (std::size_t ch = 0; ch < n_ch; ++ch) {
      const AScanView z(volume, ch, dt);
      const ParticleSet* prev_channel = (dt > n_train && ch > 0) ? &row[ch - 1] : nullptr;
      ParticleSet set = propose_two_way(prev_row[ch], prev_channel, training.sigma_v, rng);
      for (auto& p : set.particles) {
        const double c = std::clamp(p.state, 0.0, last);
        if (c != p.state) {
          ++diag.clamped;
          p.state = c;
        }
      }

      if (update_weights(set, z, norm_tpl, sigma_n)) ++diag.underflow;
      const double x_hat = estimate_state(set);
      run.mmse(ch, dt) = x_hat;
      const double output = cfg.refine ? static_cast<double>(refine_peak(z, x_hat, len)) : x_hat;
      run.surface(ch, dt) = output;
      row[ch] = resample(set, rng);

      const auto gb_max = static_cast<double>(argmax(z.samples()));
      if (cfg.adapt_template && std::abs(output - gb_max) <= cfg.agree_tol) {
        bool clamped = false;
        const auto tc = extract_template(z, output, cfg.half_length, &clamped);
        if (clamped) ++diag.clamped;
        if (cfg.recalibrate_per_scan) scan_residuals.push_back(match_residual(z, output, norm_tpl));
        tpl = update_template(tpl, tc);
        norm_tpl = normalize_min_max(tpl.t);
        ++diag.template_updates;
      }
    }
    if (cfg.recalibrate_per_scan && !scan_residuals.empty()) {
      sigma_n = calibrate_sigma_n(scan_residuals, cfg.s_target);
    }
    std::swap(prev_row, row);
  }

  diag.template_confidence = tpl.alpha_conf;
  diag.sigma_n = sigma_n;
  run.final_template = std::move(tpl);
  return run;
}

}  // namespace gbtrack
