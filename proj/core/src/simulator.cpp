#include "gbtrack/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "gbtrack/errors.hpp"

namespace gbtrack {
namespace {

// Cross-track/down-track footprint (cells) of a mine echo and its cut-off.
constexpr double kMineFootprint = 2.0;
constexpr double kMineCutoff = 0.1;

enum class Stream : std::uint64_t { kSurface = 1, kNoise = 2, kInterference = 3, kSnow = 4 };

std::mt19937_64 make_engine(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

double wavelet(double u) {
  return std::exp(-u * u / 3.0) - 0.75 * std::exp(-(u - 3.0) * (u - 3.0) / 5.0);
}

void add_template(std::span<float> ascan, std::span<const double> tpl, long centre, double gain) {
  const long half = static_cast<long>(tpl.size() / 2);
  const long n = static_cast<long>(ascan.size());
  for (long i = 0; i < static_cast<long>(tpl.size()); ++i) {
    const long d = centre - half + i;
    if (d >= 0 && d < n) ascan[d] += static_cast<float>(gain * tpl[i]);
  }
}

}  // namespace

const std::vector<double>& default_wavelet() {
  static const std::vector<double> kTable{
      0.000000, 0.000000, 0.000000,  0.000007,  0.000272,  0.005464,  0.056194,
      0.295132, 0.783036, 1.000000,  0.433246,  -0.400046, -0.799306, -0.695436,
      -0.384414, -0.141512, -0.034898, -0.005769, -0.000639};
  return kTable;
}

std::vector<double> make_template(TemplateShape shape, std::size_t half_length) {
  const std::size_t len = 2 * half_length + 1;
  std::vector<double> tpl(len, 0.0);
  if (shape == TemplateShape::kSpike) {
    tpl[half_length] = 1.0;
    return tpl;
  }
  if (half_length == 9) return default_wavelet();
  if (half_length == 0) return {1.0};
  const double scale = 9.0 / static_cast<double>(half_length);
  double peak = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    tpl[i] = wavelet((static_cast<double>(i) - static_cast<double>(half_length)) * scale);
    peak = std::max(peak, tpl[i]);
  }
  for (auto& v : tpl) v /= peak;
  return tpl;
}

void SimConfig::validate() const {
  if (n_depth == 0 || n_channels == 0 || n_scans == 0) {
    throw ConfigError("simulation dimensions must be positive");
  }
  if (!(surface_sigma >= 0.0) || !std::isfinite(surface_sigma)) {
    throw ConfigError("surface_sigma must be finite and >= 0");
  }
  if (!(surface_reversion >= 0.0 && surface_reversion <= 1.0)) {
    throw ConfigError("surface_reversion must be in [0, 1]");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("noise_sigma must be finite and >= 0");
  }
  const double lo = static_cast<double>(template_half_length);
  const double hi = static_cast<double>(n_depth) - 1.0 - lo;
  if (surface_base - 5.0 * surface_sigma < lo || surface_base + 5.0 * surface_sigma > hi) {
    throw ConfigError("surface_base +/- 5*surface_sigma must stay inside [" + std::to_string(lo) +
                      ", " + std::to_string(hi) + "]");
  }
  if (snow) {
    if (!(snow->amplitude_ratio > 0.0)) throw ConfigError("snow amplitude_ratio must be > 0");
    if (snow->first_scan > snow->last_scan || snow->last_scan >= n_scans) {
      throw ConfigError("snow scan range outside the volume");
    }
    if (snow->first_channel > snow->last_channel || snow->first_channel >= n_channels) {
      throw ConfigError("snow channel range outside the volume");
    }
    if (!(snow->coverage > 0.0 && snow->coverage <= 1.0)) {
      throw ConfigError("snow coverage must be in (0, 1]");
    }
    if (snow->coverage < 1.0 && snow->patch_scans < 1) {
      throw ConfigError("snow patch_scans must be >= 1");
    }
  }
  for (const auto& in : interference) {
    if (in.first_scan > in.last_scan || in.last_scan >= n_scans) {
      throw ConfigError("interference scan range outside the volume");
    }
    if (!(in.amplitude >= 0.0)) throw ConfigError("interference amplitude must be >= 0");
  }
  for (const auto& m : mines) {
    if (m.ch >= n_channels || m.dt >= n_scans) throw ConfigError("mine location outside the volume");
    if (!(m.amplitude >= 0.0) || !(m.hyperbola_spread >= 0.0)) {
      throw ConfigError("mine amplitude and spread must be >= 0");
    }
  }
}

SurfaceResult generate_surface(const SimConfig& cfg) {
  cfg.validate();
  const std::size_t n_ch = cfg.n_channels;
  SurfaceResult out{GroundBounceSurface(n_ch, cfg.n_scans, cfg.surface_base), 0};
  if (cfg.surface_sigma == 0.0) return out;

  auto engine = make_engine(cfg.seed, Stream::kSurface);
  std::normal_distribution<double> normal(0.0, 1.0);

  // 3-tap mean across channels with replicated edges; gain restores unit variance.
  std::vector<double> gain(n_ch);
  for (std::size_t ch = 0; ch < n_ch; ++ch) {
    std::vector<double> w(n_ch, 0.0);
    for (long d = -1; d <= 1; ++d) {
      const long c = std::clamp(static_cast<long>(ch) + d, 0L, static_cast<long>(n_ch) - 1);
      w[c] += 1.0 / 3.0;
    }
    double ss = 0.0;
    for (double v : w) ss += v * v;
    gain[ch] = 1.0 / std::sqrt(ss);
  }
  std::vector<double> raw(n_ch), smooth(n_ch);
  auto draw_smoothed = [&] {
    for (auto& r : raw) r = normal(engine);
    for (std::size_t ch = 0; ch < n_ch; ++ch) {
      const std::size_t lo = ch == 0 ? 0 : ch - 1;
      const std::size_t hi = std::min(ch + 1, n_ch - 1);
      smooth[ch] = gain[ch] * (raw[lo] + raw[ch] + raw[hi]) / 3.0;
    }
  };

  // Increment variance of a stationary AR(1) with innovation std s is
  // 2 s^2 / (1 + phi). A random walk (phi = 1) starts at surface_base.
  const double phi = cfg.surface_reversion;
  const bool walk = phi >= 1.0;
  const double innovation = walk ? cfg.surface_sigma : cfg.surface_sigma * std::sqrt((1.0 + phi) / 2.0);
  const double stationary = walk ? 0.0 : innovation / std::sqrt(1.0 - phi * phi);
  const double lo = static_cast<double>(cfg.template_half_length);
  const double hi = static_cast<double>(cfg.n_depth) - 1.0 - lo;

  std::vector<double> dev(n_ch);
  draw_smoothed();
  for (std::size_t ch = 0; ch < n_ch; ++ch) dev[ch] = stationary * smooth[ch];
  for (std::size_t dt = 0; dt < cfg.n_scans; ++dt) {
    if (dt > 0) {
      draw_smoothed();
      for (std::size_t ch = 0; ch < n_ch; ++ch) dev[ch] = phi * dev[ch] + innovation * smooth[ch];
    }
    for (std::size_t ch = 0; ch < n_ch; ++ch) {
      const double x = cfg.surface_base + dev[ch];
      const double c = std::clamp(x, lo, hi);
      if (c != x) ++out.clamped;
      out.surface(ch, dt) = c;
    }
  }
  return out;
}

GroundBounceSurface render_truth(const GroundBounceSurface& surface) {
  GroundBounceSurface out(surface.n_channels(), surface.n_scans());
  for (std::size_t ch = 0; ch < surface.n_channels(); ++ch) {
    for (std::size_t dt = 0; dt < surface.n_scans(); ++dt) {
      out(ch, dt) = std::round(surface(ch, dt));
    }
  }
  return out;
}

GprVolume synthesize_volume(const SimConfig& cfg, const GroundBounceSurface& truth) {
  cfg.validate();
  if (truth.n_channels() != cfg.n_channels || truth.n_scans() != cfg.n_scans) {
    throw ConfigError("truth dimensions do not match the simulation config");
  }
  const auto tpl = make_template(cfg.template_shape, cfg.template_half_length);
  GprVolume volume(cfg.n_depth, cfg.n_channels, cfg.n_scans);

  for (std::size_t dt = 0; dt < cfg.n_scans; ++dt) {
    for (std::size_t ch = 0; ch < cfg.n_channels; ++ch) {
      add_template(volume.ascan(ch, dt), tpl, std::lround(truth(ch, dt)), 1.0);
    }
  }

  if (cfg.snow) {
    const auto mask = snow_mask(cfg);
    for (std::size_t dt = 0; dt < cfg.n_scans; ++dt) {
      for (std::size_t ch = 0; ch < cfg.n_channels; ++ch) {
        if (mask(ch, dt) == 0.0) continue;
        const long centre = std::lround(truth(ch, dt) - cfg.snow->offset_samples);
        add_template(volume.ascan(ch, dt), tpl, centre, cfg.snow->amplitude_ratio);
      }
    }
  }

  for (const auto& m : cfg.mines) {
    const double cutoff_sq = 2.0 * kMineFootprint * kMineFootprint * std::log(1.0 / kMineCutoff);
    const long reach = static_cast<long>(std::floor(std::sqrt(cutoff_sq)));
    for (long dc = -reach; dc <= reach; ++dc) {
      for (long dd = -reach; dd <= reach; ++dd) {
        const long ch = static_cast<long>(m.ch) + dc;
        const long dt = static_cast<long>(m.dt) + dd;
        if (ch < 0 || dt < 0 || ch >= static_cast<long>(cfg.n_channels) ||
            dt >= static_cast<long>(cfg.n_scans)) {
          continue;
        }
        const double d2 = static_cast<double>(dc * dc + dd * dd);
        const double amp = m.amplitude * std::exp(-d2 / (2.0 * kMineFootprint * kMineFootprint));
        if (amp < kMineCutoff * m.amplitude) continue;
        const double depth = truth(ch, dt) + m.depth_offset + m.hyperbola_spread * d2;
        add_template(volume.ascan(ch, dt), tpl, std::lround(depth), amp);
      }
    }
  }

  if (!cfg.interference.empty()) {
    auto engine = make_engine(cfg.seed, Stream::kInterference);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto& in : cfg.interference) {
      const std::size_t depth_end = std::min(in.extent, cfg.n_depth);
      for (std::size_t dt = in.first_scan; dt <= in.last_scan; ++dt) {
        for (std::size_t ch = 0; ch < cfg.n_channels; ++ch) {
          auto a = volume.ascan(ch, dt);
          for (std::size_t d = 0; d < depth_end; ++d) {
            a[d] += static_cast<float>(in.amplitude * normal(engine));
          }
        }
      }
    }
  }

  if (cfg.noise_sigma > 0.0) {
    auto engine = make_engine(cfg.seed, Stream::kNoise);
    std::normal_distribution<double> normal(0.0, cfg.noise_sigma);
    for (std::size_t dt = 0; dt < cfg.n_scans; ++dt) {
      for (std::size_t ch = 0; ch < cfg.n_channels; ++ch) {
        for (auto& v : volume.ascan(ch, dt)) v += static_cast<float>(normal(engine));
      }
    }
  }
  return volume;
}

GroundBounceSurface snow_mask(const SimConfig& cfg) {
  cfg.validate();
  GroundBounceSurface mask(cfg.n_channels, cfg.n_scans);
  if (!cfg.snow) return mask;
  const auto& s = *cfg.snow;
  const std::size_t ch0 = s.first_channel;
  const std::size_t ch1 = std::min(s.last_channel, cfg.n_channels - 1);
  const std::size_t n_ch = ch1 - ch0 + 1;
  const std::size_t n_dt = s.last_scan - s.first_scan + 1;
  if (s.coverage >= 1.0) {
    for (std::size_t ch = ch0; ch <= ch1; ++ch) {
      for (std::size_t dt = s.first_scan; dt <= s.last_scan; ++dt) mask(ch, dt) = 1.0;
    }
    return mask;
  }

  auto engine = make_engine(cfg.seed, Stream::kSnow);
  const std::size_t width_max = s.patch_channels == 0 ? n_ch : std::min(s.patch_channels, n_ch);
  const std::size_t width_min = s.patch_channels == 0 ? n_ch : std::max<std::size_t>(1, width_max / 2);
  const std::size_t len_min = std::max<std::size_t>(1, s.patch_scans / 2);
  const std::size_t len_max = std::max(len_min, s.patch_scans + s.patch_scans / 2);
  std::uniform_int_distribution<std::size_t> length(len_min, len_max);
  std::uniform_int_distribution<std::size_t> width(width_min, width_max);

  const auto target = static_cast<std::size_t>(std::ceil(s.coverage * static_cast<double>(n_ch * n_dt)));
  std::size_t covered = 0;
  while (covered < target) {
    const std::size_t len = std::min(length(engine), n_dt);
    const std::size_t wid = width(engine);
    const std::size_t dt_start =
        s.first_scan + std::uniform_int_distribution<std::size_t>(0, n_dt - len)(engine);
    const std::size_t ch_start = ch0 + std::uniform_int_distribution<std::size_t>(0, n_ch - wid)(engine);
    for (std::size_t ch = ch_start; ch < ch_start + wid; ++ch) {
      for (std::size_t dt = dt_start; dt < dt_start + len; ++dt) {
        if (mask(ch, dt) == 0.0) {
          mask(ch, dt) = 1.0;
          ++covered;
        }
      }
    }
  }
  return mask;
}

Simulation simulate(const SimConfig& cfg) {
  auto surface = generate_surface(cfg);
  auto truth = render_truth(surface.surface);
  auto volume = synthesize_volume(cfg, truth);
  return {std::move(volume), std::move(truth), surface.clamped};
}

}  // namespace gbtrack
