#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "gbtrack/types.hpp"

namespace gbtrack {

using Rng = std::mt19937_64;

struct Particle {
  double state = 0.0;   // ground-bounce depth, samples
  double weight = 0.0;
};

struct ParticleSet {
  std::vector<Particle> particles;

  std::size_t size() const { return particles.size(); }
  double weight_sum() const;
  static ParticleSet uniform(std::span<const double> states);
};

/// Accumulated ground-bounce signature and the number of reliable
/// extractions averaged into it.
struct GbTemplate {
  std::vector<double> t;
  double alpha_conf = 0.0;

  std::size_t half_length() const { return t.size() / 2; }
};

struct PfConfig {
  std::size_t n_particles = 50;
  std::size_t half_length = 9;      // template length 2*half_length+1
  double sigma_v = 0.0;             // process noise std; <= 0 estimates it in training
  double sigma_n = 0.0;             // observation noise scale; <= 0 calibrates it in training
  std::size_t n_train = 20;         // training scans
  double agree_tol = 2.0;           // |refined - GB_max| gate for template updates
  double s_target = -0.3;           // calibrated max exponent over good particles
  double w_target = 0.2;            // expected ceiling of the max training weight
  std::uint64_t seed = 2014;
  bool refine = true;               // snap the MMSE estimate to the local maximum
  bool adapt_template = true;       // update the template after training
  bool recalibrate_per_scan = false;

  void validate() const;
};

/// Clamps of `value` into [0, n-1] after rounding.
std::size_t clamp_index(double value, std::size_t n);

/// Samples of z in [round(gb_hat) - n_t, round(gb_hat) + n_t]. Indices outside
/// the A-scan repeat the edge sample; `clamped` reports whether that happened.
std::vector<double> extract_template(const AScanView& z, double gb_hat, std::size_t half_length,
                                     bool* clamped = nullptr);

/// Running mean: t_k = (alpha t_{k-1} + t_c) / (alpha + 1).
GbTemplate update_template(const GbTemplate& tpl, std::span<const double> candidate);

/// Rescales to [0, 1]; a flat input maps to zeros.
std::vector<double> normalize_min_max(std::span<const double> v);

/// Sum of squared differences between the min-max normalised window of z
/// centred at round(x) and an already normalised template.
double match_residual(const AScanView& z, double x, std::span<const double> normalized_template);

/// Similarity exponent s = -residual / (2 sigma_n^2).
double similarity(const AScanView& z, double x, const GbTemplate& tpl, double sigma_n);

/// Gaussian likelihood exp(s) / (sqrt(2 pi) sigma_n).
double likelihood(const AScanView& z, double x, const GbTemplate& tpl, double sigma_n);
double log_likelihood(double residual, double sigma_n);

/// sigma_n placing the best good particle exactly at s_target:
/// sqrt(min residual / (2 |s_target|)), floored at 1e-6.
double calibrate_sigma_n(std::span<const double> good_residuals, double s_target);

/// Prior for one cell: both neighbour sets (previous scan, previous channel)
/// are moved through the Gaussian transition, pooled, and downsampled to the
/// size of `prev_scan` in proportion to weight. Output weights are uniform.
ParticleSet propose_two_way(const ParticleSet& prev_scan, const ParticleSet* prev_channel,
                            double sigma_v, Rng& rng);

/// w_i <- w_i exp(log_l[i]), renormalised in the log domain. When every
/// product is zero the weights fall back to uniform. Returns true when the
/// largest likelihood is below the smallest normal double.
bool apply_log_likelihoods(ParticleSet& set, std::span<const double> log_l);

/// w_i <- w_i p(z | x_i), renormalised in the log domain. Returns true when
/// every likelihood underflows in linear terms.
bool update_weights(ParticleSet& set, const AScanView& z, std::span<const double> normalized_template,
                    double sigma_n);
bool update_weights(ParticleSet& set, const AScanView& z, const GbTemplate& tpl, double sigma_n);

/// Systematic resampling; output weights are exactly 1/N.
ParticleSet resample(const ParticleSet& set, Rng& rng);

/// MMSE estimate sum w_i x_i.
double estimate_state(const ParticleSet& set);

/// Argmax of z over the window of `window` samples centred at round(x_hat),
/// truncated at the A-scan bounds.
std::size_t refine_peak(const AScanView& z, double x_hat, std::size_t window);

struct TrainingResult {
  GbTemplate tpl;
  double sigma_n = 0.0;
  double sigma_v = 0.0;
  double max_good_similarity = 0.0;   // max s over good particles after calibration
  double max_training_weight = 0.0;   // largest particle weight seen on training cells
  double mean_training_weight = 0.0;  // mean over training cells of the max weight
  std::vector<ParticleSet> initial_sets;  // per channel, at scan n_train - 1
  GroundBounceSurface output;             // global maximum for scans [0, n_train)
  std::size_t clamped = 0;
};

TrainingResult train(const GprVolume& volume, const PfConfig& cfg, Rng& rng);

struct PfDiagnostics {
  std::size_t underflow = 0;
  std::size_t clamped = 0;
  std::size_t template_updates = 0;
  double template_confidence = 0.0;
  double sigma_n = 0.0;
  double sigma_v = 0.0;
  double max_training_weight = 0.0;
  double mean_training_weight = 0.0;
};

struct PfRun {
  GroundBounceSurface surface;  // training output, then refined (or MMSE) estimates
  GroundBounceSurface mmse;     // MMSE estimates before refinement
  GbTemplate final_template;
  PfDiagnostics diagnostics;
};

/// Training stage followed by scan-by-scan, channel-by-channel tracking.
PfRun run_pf(const GprVolume& volume, const PfConfig& cfg);

inline GroundBounceSurface track_pf(const GprVolume& volume, const PfConfig& cfg) {
  return run_pf(volume, cfg).surface;
}

}  // namespace gbtrack
