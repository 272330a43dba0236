#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "gbtrack/types.hpp"

namespace gbtrack {

enum class TemplateShape {
  kWavelet,  // positive lobe at the centre followed by a negative lobe
  kSpike,    // unit sample at the centre, zeros elsewhere
};

/// Built-in 19-sample ground-bounce signature (half-length 9), peak 1.0 at
/// index 9. Values of exp(-u^2/3) - 0.75 exp(-(u-3)^2/5), u = -9..9, scaled
/// to a unit peak and rounded to 6 digits.
const std::vector<double>& default_wavelet();

/// Template of length 2*half_length+1. The wavelet is tabulated for
/// half_length 9 and evaluated from the same formula (u rescaled) otherwise.
std::vector<double> make_template(TemplateShape shape, std::size_t half_length);

/// Snow/air interface: a scaled copy of the template `offset_samples` above
/// the ground bounce inside the rectangle [first_scan, last_scan] x
/// [first_channel, last_channel]. With coverage < 1 the snow lies in random
/// rectangular patches (about patch_scans long, up to patch_channels wide)
/// until that fraction of the rectangle is covered.
struct SnowLayer {
  double offset_samples = 30.0;
  double amplitude_ratio = 1.5;
  std::size_t first_scan = 0;
  std::size_t last_scan = 0;
  std::size_t first_channel = 0;
  std::size_t last_channel = static_cast<std::size_t>(-1);
  double coverage = 1.0;
  std::size_t patch_scans = 8;
  std::size_t patch_channels = 0;  // 0: patches span the whole channel range
};

/// Broad-band vertical streak: white noise of std `amplitude` over depths
/// [0, extent) in every channel of scans [first_scan, last_scan].
struct Interference {
  std::size_t first_scan = 0;
  std::size_t last_scan = 0;
  double amplitude = 1.0;
  std::size_t extent = static_cast<std::size_t>(-1);
};

/// Buried object at cell (ch, dt), 0-based. Echo depth below the ground bounce
/// grows as depth_offset + hyperbola_spread * d^2 with cell distance d.
struct Mine {
  std::size_t ch = 0;
  std::size_t dt = 0;
  double depth_offset = 40.0;
  double amplitude = 0.5;
  double hyperbola_spread = 1.0;
};

struct SimConfig {
  std::size_t n_depth = 415;
  std::size_t n_channels = 24;
  std::size_t n_scans = 500;
  std::uint64_t seed = 7;
  double surface_sigma = 1.0;
  double surface_base = 120.0;
  // AR(1) coefficient of the deviation from surface_base; 1 gives a random walk.
  double surface_reversion = 0.95;
  TemplateShape template_shape = TemplateShape::kWavelet;
  std::size_t template_half_length = 9;
  double noise_sigma = 0.0;
  std::optional<SnowLayer> snow;
  std::vector<Interference> interference;
  std::vector<Mine> mines;

  /// Throws ConfigError on violated invariants.
  void validate() const;
};

struct SurfaceResult {
  GroundBounceSurface surface;  // fractional depths
  std::size_t clamped = 0;      // cells pulled back inside the depth bounds
};

/// Mean-reverting Gaussian surface: every down-track increment is N(0, sigma^2)
/// and innovations are smoothed across channels with a 3-tap mean.
SurfaceResult generate_surface(const SimConfig& cfg);

/// Rounds every depth to the sample where the signature is rendered.
GroundBounceSurface render_truth(const GroundBounceSurface& surface);

/// Forward observation model: template at the truth plus Gaussian noise and
/// the optional snow, interference and mine phenomena.
GprVolume synthesize_volume(const SimConfig& cfg, const GroundBounceSurface& truth);

/// Cells (laid out like a surface, 1 = snow) where the snow layer is rendered.
GroundBounceSurface snow_mask(const SimConfig& cfg);

struct Simulation {
  GprVolume volume;
  GroundBounceSurface truth;  // integer depths actually rendered
  std::size_t clamped = 0;
};

Simulation simulate(const SimConfig& cfg);

}  // namespace gbtrack
