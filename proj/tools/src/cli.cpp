#include "gbtrack/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gbtrack/baseline.hpp"
#include "gbtrack/errors.hpp"
#include "gbtrack/evaluation.hpp"
#include "gbtrack/io.hpp"
#include "gbtrack/kalman.hpp"
#include "gbtrack/particle_filter.hpp"
#include "gbtrack/scenarios.hpp"
#include "gbtrack/simulator.hpp"

#ifndef GBTRACK_VERSION
#define GBTRACK_VERSION "0.0.0"
#endif

namespace gbtrack::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------------------
// Option plumbing: every long flag is also a key of the JSON config file.

enum class Kind { Int, Real, Str, Flag, List };

struct OptSpec {
  std::string name;
  Kind kind;
  std::string help;
};

class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& description)
      : app_(parent.add_subcommand(name, description)) {
    app_->add_option("--config", config_path_, "JSON config file or manifest to replay");
  }

  CLI::App* app() { return app_; }

  void add(const std::string& name, Kind kind, const std::string& help) {
    specs_.push_back({name, kind, help});
    const std::string flag = "--" + name;
    switch (kind) {
      case Kind::Flag:
        app_->add_flag(flag, flags_[name], help);
        break;
      case Kind::List:
        app_->add_option(flag, lists_[name], help);
        break;
      default:
        app_->add_option(flag, scalars_[name], help);
        break;
    }
  }

  void add_positional_list(const std::string& name, const std::string& help) {
    app_->add_option(name + "s", positional_, help);
    positional_name_ = name;
  }

  /// File config (if any) overlaid with every flag given on the command line.
  json merged() const {
    json cfg = json::object();
    if (!config_path_.empty()) cfg = read_config(config_path_);
    for (const auto& s : specs_) {
      const auto* opt = app_->get_option("--" + s.name);
      if (opt->count() == 0) continue;
      switch (s.kind) {
        case Kind::Int: cfg[s.name] = parse_int(s.name, scalars_.at(s.name)); break;
        case Kind::Real: cfg[s.name] = parse_real(s.name, scalars_.at(s.name)); break;
        case Kind::Str: cfg[s.name] = scalars_.at(s.name); break;
        case Kind::Flag: cfg[s.name] = flags_.at(s.name); break;
        case Kind::List: cfg[s.name] = lists_.at(s.name); break;
      }
    }
    if (!positional_.empty()) {
      json& list = cfg[positional_name_];
      if (!list.is_array()) list = json::array();
      for (const auto& p : positional_) list.push_back(p);
    }
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
      const bool known = std::any_of(specs_.begin(), specs_.end(),
                                     [&](const OptSpec& s) { return s.name == it.key(); });
      if (!known && it.key() != positional_name_) {
        throw ConfigError("unknown config key '" + it.key() + "' for " + app_->get_name());
      }
    }
    return cfg;
  }

  static json read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config " + path + " must hold a JSON object");
    // A manifest replays through its config snapshot.
    if (j.contains("manifest_version") && j.contains("config")) return j["config"];
    return j;
  }

 private:
  static long long parse_int(const std::string& name, const std::string& v) {
    std::size_t pos = 0;
    long long out = 0;
    try {
      out = std::stoll(v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != v.size()) throw ConfigError("--" + name + ": '" + v + "' is not an integer");
    return out;
  }
  static double parse_real(const std::string& name, const std::string& v) {
    std::size_t pos = 0;
    double out = 0.0;
    try {
      out = std::stod(v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != v.size() || !std::isfinite(out)) {
      throw ConfigError("--" + name + ": '" + v + "' is not a finite number");
    }
    return out;
  }

  CLI::App* app_;
  std::string config_path_;
  std::vector<OptSpec> specs_;
  std::map<std::string, std::string> scalars_;
  std::map<std::string, std::vector<std::string>> lists_;
  std::map<std::string, bool> flags_;
  std::vector<std::string> positional_;
  std::string positional_name_;
};

// Typed access into a merged config.
bool has(const json& c, const std::string& k) { return c.contains(k) && !c[k].is_null(); }

double get_real(const json& c, const std::string& k, double def) {
  if (!has(c, k)) return def;
  if (!c[k].is_number()) throw ConfigError("config key '" + k + "' must be a number");
  return c[k].get<double>();
}

long long get_int(const json& c, const std::string& k, long long def) {
  if (!has(c, k)) return def;
  if (!c[k].is_number_integer()) throw ConfigError("config key '" + k + "' must be an integer");
  return c[k].get<long long>();
}

std::size_t get_count(const json& c, const std::string& k, std::size_t def) {
  const long long v = get_int(c, k, static_cast<long long>(def));
  if (v < 0) throw ConfigError("config key '" + k + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

std::string get_str(const json& c, const std::string& k, const std::string& def = {}) {
  if (!has(c, k)) return def;
  if (!c[k].is_string()) throw ConfigError("config key '" + k + "' must be a string");
  return c[k].get<std::string>();
}

bool get_flag(const json& c, const std::string& k) {
  if (!has(c, k)) return false;
  if (!c[k].is_boolean()) throw ConfigError("config key '" + k + "' must be true or false");
  return c[k].get<bool>();
}

std::vector<std::string> get_list(const json& c, const std::string& k) {
  if (!has(c, k)) return {};
  if (c[k].is_string()) return {c[k].get<std::string>()};
  if (!c[k].is_array()) throw ConfigError("config key '" + k + "' must be a list of strings");
  std::vector<std::string> out;
  for (const auto& v : c[k]) {
    if (!v.is_string()) throw ConfigError("config key '" + k + "' must be a list of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_real(const std::string& what, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size() || !std::isfinite(out)) {
    throw ConfigError(what + ": '" + v + "' is not a finite number");
  }
  return out;
}

std::size_t to_index(const std::string& what, const std::string& v) {
  std::size_t pos = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size() || out < 1) {
    throw ConfigError(what + ": '" + v + "' is not a 1-based index");
  }
  return static_cast<std::size_t>(out - 1);
}

// "FIRST-LAST", 1-based inclusive, returned 0-based.
std::pair<std::size_t, std::size_t> to_range(const std::string& what, const std::string& v) {
  const auto parts = split(v, '-');
  if (parts.size() != 2) throw ConfigError(what + ": expected FIRST-LAST, got '" + v + "'");
  const auto a = to_index(what, parts[0]);
  const auto b = to_index(what, parts[1]);
  if (a > b) throw ConfigError(what + ": range '" + v + "' is reversed");
  return {a, b};
}

// ---------------------------------------------------------------------------
// Output helpers.

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string with_suffix(const std::string& prefix, const std::string& suffix) { return prefix + suffix; }

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json config;
  json resolved;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  Clock::time_point start = Clock::now();

  void write(const fs::path& path) const {
    json m;
    m["manifest_version"] = 1;
    m["tool"] = "gbtrack";
    m["version"] = GBTRACK_VERSION;
    m["command"] = command;
    m["argv"] = argv;
    m["config"] = config;
    m["resolved"] = resolved;
    m["seed"] = seed;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["duration_s"] = std::chrono::duration<double>(Clock::now() - start).count();
    write_json(path, m);
  }
};

// Mines CSV: ch,dt 1-based plus the echo parameters.
void save_mines(const std::vector<Mine>& mines, const fs::path& path) {
  std::string text = "ch,dt,depth_offset,amplitude,spread\n";
  char buf[160];
  for (const auto& m : mines) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.6f,%.6f,%.6f\n", m.ch + 1, m.dt + 1, m.depth_offset,
                  m.amplitude, m.hyperbola_spread);
    text += buf;
  }
  write_text(path, text);
}

std::vector<CellIndex> load_mines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("ch,dt", 0) != 0) {
    throw FormatError(path.string() + ":1: expected header starting with 'ch,dt'");
  }
  std::vector<CellIndex> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    try {
      if (fields.size() < 2) throw ConfigError("too few fields");
      out.push_back({to_index("ch", fields[0]), to_index("dt", fields[1])});
    } catch (const ConfigError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// simulate

void add_simulate_options(Command& c) {
  c.add("out", Kind::Str, "output prefix (writes PREFIX.gprv, .truth.csv, .mines.csv, .manifest.json)");
  c.add("scenario", Kind::Str, "base scenario: default, snow or stress");
  c.add("lane", Kind::Int, "lane index for the stress scenario");
  c.add("dims", Kind::Str, "DEPTHxCHANNELSxSCANS");
  c.add("seed", Kind::Int, "random seed");
  c.add("surface-sigma", Kind::Real, "std of down-track GB increments, samples");
  c.add("surface-base", Kind::Real, "mean GB depth, samples");
  c.add("surface-reversion", Kind::Real, "AR(1) coefficient of the surface, 1 = random walk");
  c.add("noise", Kind::Real, "additive Gaussian noise std");
  c.add("template", Kind::Str, "wavelet or spike");
  c.add("half-length", Kind::Int, "template half length n_t");
  c.add("snow", Kind::Str, "OFFSET:RATIO[:FIRST-LAST] snow layer (1-based scans)");
  c.add("snow-channels", Kind::Str, "FIRST-LAST channels covered by snow (1-based)");
  c.add("snow-coverage", Kind::Real, "fraction of the snow rectangle covered by patches");
  c.add("snow-patch-scans", Kind::Int, "mean patch length in scans");
  c.add("snow-patch-channels", Kind::Int, "maximum patch width in channels, 0 = all");
  c.add("interference", Kind::List, "FIRST-LAST:AMPLITUDE[:EXTENT] streak (repeatable)");
  c.add("mine", Kind::List, "CH:DT[:OFFSET[:AMPLITUDE[:SPREAD]]] buried object (repeatable)");
}

SimConfig resolve_sim(const json& c) {
  const auto seed = static_cast<std::uint64_t>(get_int(c, "seed", 7));
  SimConfig cfg;
  if (has(c, "scenario")) {
    cfg = scenario_config(get_str(c, "scenario"), seed, get_count(c, "lane", 0));
  } else {
    if (has(c, "lane")) throw ConfigError("--lane requires --scenario stress");
    cfg.seed = seed;
  }
  if (has(c, "dims")) {
    const auto d = split(get_str(c, "dims"), 'x');
    if (d.size() != 3) throw ConfigError("--dims: expected DEPTHxCHANNELSxSCANS");
    cfg.n_depth = static_cast<std::size_t>(to_real("--dims", d[0]));
    cfg.n_channels = static_cast<std::size_t>(to_real("--dims", d[1]));
    cfg.n_scans = static_cast<std::size_t>(to_real("--dims", d[2]));
  }
  cfg.surface_sigma = get_real(c, "surface-sigma", cfg.surface_sigma);
  cfg.surface_base = get_real(c, "surface-base", cfg.surface_base);
  cfg.surface_reversion = get_real(c, "surface-reversion", cfg.surface_reversion);
  cfg.noise_sigma = get_real(c, "noise", cfg.noise_sigma);
  cfg.template_half_length = get_count(c, "half-length", cfg.template_half_length);
  if (has(c, "template")) {
    const auto t = get_str(c, "template");
    if (t == "wavelet") cfg.template_shape = TemplateShape::kWavelet;
    else if (t == "spike") cfg.template_shape = TemplateShape::kSpike;
    else throw ConfigError("--template: expected wavelet or spike, got '" + t + "'");
  }

  if (has(c, "snow")) {
    const auto parts = split(get_str(c, "snow"), ':');
    if (parts.size() < 2 || parts.size() > 3) throw ConfigError("--snow: expected OFFSET:RATIO[:FIRST-LAST]");
    SnowLayer s;
    s.offset_samples = to_real("--snow offset", parts[0]);
    s.amplitude_ratio = to_real("--snow ratio", parts[1]);
    if (parts.size() == 3) {
      std::tie(s.first_scan, s.last_scan) = to_range("--snow scans", parts[2]);
    } else {
      const std::size_t span = std::max<std::size_t>(1, (3 * cfg.n_scans + 9) / 10);
      s.first_scan = (cfg.n_scans - std::min(span, cfg.n_scans)) / 2;
      s.last_scan = s.first_scan + std::min(span, cfg.n_scans) - 1;
    }
    cfg.snow = s;
  }
  const bool snow_detail = has(c, "snow-channels") || has(c, "snow-coverage") ||
                           has(c, "snow-patch-scans") || has(c, "snow-patch-channels");
  if (snow_detail && !cfg.snow) throw ConfigError("snow patch options require --snow");
  if (cfg.snow) {
    if (has(c, "snow-channels")) {
      std::tie(cfg.snow->first_channel, cfg.snow->last_channel) =
          to_range("--snow-channels", get_str(c, "snow-channels"));
    }
    cfg.snow->coverage = get_real(c, "snow-coverage", cfg.snow->coverage);
    cfg.snow->patch_scans = get_count(c, "snow-patch-scans", cfg.snow->patch_scans);
    cfg.snow->patch_channels = get_count(c, "snow-patch-channels", cfg.snow->patch_channels);
  }

  if (has(c, "interference")) {
    cfg.interference.clear();
    for (const auto& spec : get_list(c, "interference")) {
      const auto parts = split(spec, ':');
      if (parts.size() < 2 || parts.size() > 3) {
        throw ConfigError("--interference: expected FIRST-LAST:AMPLITUDE[:EXTENT], got '" + spec + "'");
      }
      Interference in;
      std::tie(in.first_scan, in.last_scan) = to_range("--interference scans", parts[0]);
      in.amplitude = to_real("--interference amplitude", parts[1]);
      if (parts.size() == 3) {
        const double e = to_real("--interference extent", parts[2]);
        if (e < 0) throw ConfigError("--interference extent must be >= 0");
        in.extent = static_cast<std::size_t>(e);
      }
      cfg.interference.push_back(in);
    }
  }
  if (has(c, "mine")) {
    cfg.mines.clear();
    for (const auto& spec : get_list(c, "mine")) {
      const auto parts = split(spec, ':');
      if (parts.size() < 2 || parts.size() > 5) {
        throw ConfigError("--mine: expected CH:DT[:OFFSET[:AMPLITUDE[:SPREAD]]], got '" + spec + "'");
      }
      Mine m;
      m.ch = to_index("--mine channel", parts[0]);
      m.dt = to_index("--mine scan", parts[1]);
      if (parts.size() > 2) m.depth_offset = to_real("--mine offset", parts[2]);
      if (parts.size() > 3) m.amplitude = to_real("--mine amplitude", parts[3]);
      if (parts.size() > 4) m.hyperbola_spread = to_real("--mine spread", parts[4]);
      cfg.mines.push_back(m);
    }
  }
  cfg.validate();
  return cfg;
}

json sim_to_json(const SimConfig& cfg) {
  json j;
  j["n_depth"] = cfg.n_depth;
  j["n_channels"] = cfg.n_channels;
  j["n_scans"] = cfg.n_scans;
  j["seed"] = cfg.seed;
  j["surface_sigma"] = cfg.surface_sigma;
  j["surface_base"] = cfg.surface_base;
  j["surface_reversion"] = cfg.surface_reversion;
  j["noise_sigma"] = cfg.noise_sigma;
  j["template"] = cfg.template_shape == TemplateShape::kWavelet ? "wavelet" : "spike";
  j["template_half_length"] = cfg.template_half_length;
  if (cfg.snow) {
    const auto& s = *cfg.snow;
    j["snow"] = {{"offset_samples", s.offset_samples},
                 {"amplitude_ratio", s.amplitude_ratio},
                 {"first_scan", s.first_scan + 1},
                 {"last_scan", s.last_scan + 1},
                 {"first_channel", s.first_channel + 1},
                 {"last_channel", std::min(s.last_channel, cfg.n_channels - 1) + 1},
                 {"coverage", s.coverage},
                 {"patch_scans", s.patch_scans},
                 {"patch_channels", s.patch_channels}};
  }
  j["interference"] = json::array();
  for (const auto& in : cfg.interference) {
    j["interference"].push_back({{"first_scan", in.first_scan + 1},
                                 {"last_scan", in.last_scan + 1},
                                 {"amplitude", in.amplitude},
                                 {"extent", std::min(in.extent, cfg.n_depth)}});
  }
  j["mines"] = json::array();
  for (const auto& m : cfg.mines) {
    j["mines"].push_back({{"ch", m.ch + 1},
                          {"dt", m.dt + 1},
                          {"depth_offset", m.depth_offset},
                          {"amplitude", m.amplitude},
                          {"spread", m.hyperbola_spread}});
  }
  return j;
}

int cmd_simulate(const Command& cmd, const std::vector<std::string>& argv) {
  Manifest man;
  man.command = "simulate";
  man.argv = argv;
  man.config = cmd.merged();
  const auto prefix = get_str(man.config, "out");
  if (prefix.empty()) throw ConfigError("simulate: --out PREFIX is required");
  const SimConfig cfg = resolve_sim(man.config);
  man.resolved = sim_to_json(cfg);
  man.seed = cfg.seed;

  const auto sim = simulate(cfg);
  const auto vol_path = with_suffix(prefix, ".gprv");
  const auto truth_path = with_suffix(prefix, ".truth.csv");
  const auto mines_path = with_suffix(prefix, ".mines.csv");
  save_volume(sim.volume, vol_path);
  save_truth(sim.truth, truth_path);
  save_mines(cfg.mines, mines_path);
  man.outputs = {vol_path, truth_path, mines_path};
  man.resolved["clamped_cells"] = sim.clamped;
  man.write(with_suffix(prefix, ".manifest.json"));
  if (sim.clamped > 0) {
    std::cerr << "warning: " << sim.clamped << " surface cells clamped to the depth range\n";
  }
  std::cout << "wrote " << vol_path << ", " << truth_path << ", " << mines_path << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// track

void add_track_options(Command& c) {
  c.add_positional_list("input", "input volume(s)");
  c.add("input", Kind::List, "input volume (repeatable)");
  c.add("tracker", Kind::Str, "gm, cm, kf or pf");
  c.add("out", Kind::Str, "output prefix (single input only; default: input stem + '.' + tracker)");
  c.add("jobs", Kind::Int, "volumes processed in parallel");
  c.add("seed", Kind::Int, "particle filter seed");
  c.add("particles", Kind::Int, "particle count N_p");
  c.add("n-train", Kind::Int, "training scans N");
  c.add("half-length", Kind::Int, "template half length n_t");
  c.add("sigma-v", Kind::Real, "process noise std (0 = estimate in training)");
  c.add("sigma-n", Kind::Real, "likelihood scale (0 = calibrate in training)");
  c.add("agree-tol", Kind::Real, "template update gate, samples");
  c.add("s-target", Kind::Real, "calibrated similarity of the best training particle");
  c.add("no-refine", Kind::Flag, "report the MMSE estimate without peak refinement");
  c.add("no-template-update", Kind::Flag, "freeze the template after training");
  c.add("recalibrate", Kind::Flag, "recalibrate sigma_n every scan");
  c.add("w-max", Kind::Real, "constrained max: window upper bound");
  c.add("w-min", Kind::Real, "constrained max: window lower bound");
  c.add("alpha-cm", Kind::Real, "constrained max: window gain");
  c.add("q-scale", Kind::Real, "Kalman: process noise scale");
  c.add("r-base", Kind::Real, "Kalman: observation noise floor");
  c.add("r-window", Kind::Int, "Kalman: smoothing window of R, scans");
  c.add("p0", Kind::Real, "Kalman: initial covariance scale");
}

struct TrackSettings {
  std::string tracker;
  PfConfig pf;
  ConstrainedMaxConfig cm;
  KfConfig kf;
};

TrackSettings resolve_track(const json& c) {
  TrackSettings t;
  t.tracker = get_str(c, "tracker");
  if (t.tracker != "gm" && t.tracker != "cm" && t.tracker != "kf" && t.tracker != "pf") {
    throw ConfigError("--tracker: expected gm, cm, kf or pf, got '" + t.tracker + "'");
  }
  t.pf.seed = static_cast<std::uint64_t>(get_int(c, "seed", static_cast<long long>(t.pf.seed)));
  t.pf.n_particles = get_count(c, "particles", t.pf.n_particles);
  t.pf.n_train = get_count(c, "n-train", t.pf.n_train);
  t.pf.half_length = get_count(c, "half-length", t.pf.half_length);
  t.pf.sigma_v = get_real(c, "sigma-v", t.pf.sigma_v);
  t.pf.sigma_n = get_real(c, "sigma-n", t.pf.sigma_n);
  t.pf.agree_tol = get_real(c, "agree-tol", t.pf.agree_tol);
  t.pf.s_target = get_real(c, "s-target", t.pf.s_target);
  t.pf.refine = !get_flag(c, "no-refine");
  t.pf.adapt_template = !get_flag(c, "no-template-update");
  t.pf.recalibrate_per_scan = get_flag(c, "recalibrate");
  t.cm.w_max = get_real(c, "w-max", t.cm.w_max);
  t.cm.w_min = get_real(c, "w-min", t.cm.w_min);
  t.cm.alpha_cm = get_real(c, "alpha-cm", t.cm.alpha_cm);
  t.kf.q_scale = get_real(c, "q-scale", t.kf.q_scale);
  t.kf.r_base = get_real(c, "r-base", t.kf.r_base);
  t.kf.r_smooth_window = get_count(c, "r-window", t.kf.r_smooth_window);
  t.kf.p0 = get_real(c, "p0", t.kf.p0);
  t.pf.validate();
  t.cm.validate();
  t.kf.validate();
  return t;
}

json track_settings_json(const TrackSettings& t) {
  json j;
  j["tracker"] = t.tracker;
  if (t.tracker == "cm") {
    j["w_max"] = t.cm.w_max;
    j["w_min"] = t.cm.w_min;
    j["alpha_cm"] = t.cm.alpha_cm;
  } else if (t.tracker == "kf") {
    j["q_scale"] = t.kf.q_scale;
    j["r_base"] = t.kf.r_base;
    j["r_smooth_window"] = t.kf.r_smooth_window;
    j["p0"] = t.kf.p0;
  } else if (t.tracker == "pf") {
    j["seed"] = t.pf.seed;
    j["n_particles"] = t.pf.n_particles;
    j["n_train"] = t.pf.n_train;
    j["half_length"] = t.pf.half_length;
    j["sigma_v"] = t.pf.sigma_v;
    j["sigma_n"] = t.pf.sigma_n;
    j["agree_tol"] = t.pf.agree_tol;
    j["s_target"] = t.pf.s_target;
    j["refine"] = t.pf.refine;
    j["adapt_template"] = t.pf.adapt_template;
    j["recalibrate_per_scan"] = t.pf.recalibrate_per_scan;
  }
  return j;
}

void track_one(const TrackSettings& t, const json& config, const std::string& input,
               const std::string& prefix, const std::vector<std::string>& argv) {
  Manifest man;
  man.command = "track";
  man.argv = argv;
  man.config = config;
  man.config["input"] = json::array({input});
  man.config["out"] = prefix;
  man.config.erase("jobs");
  man.resolved = track_settings_json(t);
  man.seed = t.tracker == "pf" ? t.pf.seed : 0;
  man.inputs = {input};

  const auto volume = load_volume(input);
  json diag;
  diag["tracker"] = t.tracker;
  diag["n_channels"] = volume.n_channels();
  diag["n_scans"] = volume.n_scans();
  GroundBounceSurface est;
  if (t.tracker == "gm") {
    est = track_global_max(volume);
  } else if (t.tracker == "cm") {
    est = track_constrained_max(volume, t.cm);
  } else if (t.tracker == "kf") {
    KfDiagnostics kd;
    est = track_kalman(volume, t.kf, &kd);
    diag["regularized_updates"] = kd.regularized;
  } else {
    auto run = run_pf(volume, t.pf);
    est = std::move(run.surface);
    const auto& d = run.diagnostics;
    diag["sigma_v"] = d.sigma_v;
    diag["sigma_n"] = d.sigma_n;
    diag["underflow_cells"] = d.underflow;
    diag["clamped_extractions"] = d.clamped;
    diag["template_updates"] = d.template_updates;
    diag["template_confidence"] = d.template_confidence;
    diag["max_training_weight"] = d.max_training_weight;
    diag["mean_training_weight"] = d.mean_training_weight;
    diag["final_template"] = run.final_template.t;
  }
  diag["settings"] = man.resolved;

  const auto est_path = with_suffix(prefix, ".csv");
  const auto diag_path = with_suffix(prefix, ".diag.json");
  save_truth(est, est_path);
  write_json(diag_path, diag);
  man.outputs = {est_path, diag_path};
  man.write(with_suffix(prefix, ".manifest.json"));
}

int code_for(const std::exception_ptr& e);

int cmd_track(const Command& cmd, const std::vector<std::string>& argv) {
  const json config = cmd.merged();
  const auto inputs = get_list(config, "input");
  if (inputs.empty()) throw ConfigError("track: at least one input volume is required");
  const TrackSettings t = resolve_track(config);
  const auto out = get_str(config, "out");
  if (!out.empty() && inputs.size() > 1) throw ConfigError("track: --out needs exactly one input");
  const long long jobs_arg = get_int(config, "jobs", 1);
  if (jobs_arg < 1) throw ConfigError("--jobs must be >= 1");
  const std::size_t jobs = std::min<std::size_t>(static_cast<std::size_t>(jobs_arg), inputs.size());

  std::vector<std::string> prefixes;
  for (const auto& in : inputs) {
    if (!out.empty()) {
      prefixes.push_back(out);
    } else {
      fs::path p(in);
      p.replace_extension();
      prefixes.push_back(p.string() + "." + t.tracker);
    }
  }

  std::vector<std::exception_ptr> errors(inputs.size());
  std::mutex log_mutex;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(log_mutex);
        if (next >= inputs.size()) return;
        i = next++;
      }
      try {
        track_one(t, config, inputs[i], prefixes[i], argv);
        std::lock_guard lock(log_mutex);
        std::cout << "wrote " << prefixes[i] << ".csv\n";
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < jobs; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  int code = kOk;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      std::cerr << "error: " << inputs[i] << ": " << e.what() << "\n";
    }
    code = std::max(code, code_for(errors[i]));
  }
  return code;
}

// ---------------------------------------------------------------------------
// eval

void add_eval_options(Command& c) {
  c.add("estimate", Kind::Str, "estimated surface CSV");
  c.add("truth", Kind::Str, "ground-truth surface CSV");
  c.add("skip-scans", Kind::Int, "leading scans excluded (e.g. the training window)");
  c.add("out", Kind::Str, "write the JSON result (and a manifest) here");
}

int cmd_eval(const Command& cmd, const std::vector<std::string>& argv) {
  Manifest man;
  man.command = "eval";
  man.argv = argv;
  man.config = cmd.merged();
  const auto est_path = get_str(man.config, "estimate");
  const auto truth_path = get_str(man.config, "truth");
  if (est_path.empty() || truth_path.empty()) throw ConfigError("eval: --estimate and --truth are required");
  const auto skip = get_count(man.config, "skip-scans", 0);
  man.inputs = {est_path, truth_path};

  const auto truth = load_truth(truth_path);
  const auto est = load_truth(est_path);
  if (!est.same_shape(truth)) {
    throw ConfigError("eval: estimate is " + std::to_string(est.n_channels()) + "x" +
                      std::to_string(est.n_scans()) + " but truth is " +
                      std::to_string(truth.n_channels()) + "x" + std::to_string(truth.n_scans()));
  }
  if (skip >= truth.n_scans()) throw ConfigError("eval: --skip-scans leaves no scans");
  const auto err = bias_variance(est, truth, skip);
  json r;
  r["bias"] = err.bias;
  r["variance"] = err.variance;
  r["rmse"] = err.rmse;
  r["n_cells"] = err.n_cells;
  r["skip_scans"] = skip;
  std::cout << r.dump(2) << "\n";

  const auto out = get_str(man.config, "out");
  if (!out.empty()) {
    write_json(out, r);
    man.outputs = {out};
    fs::path mp(out);
    mp.replace_extension(".manifest.json");
    man.resolved = r;
    man.write(mp);
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// roc

void add_roc_options(Command& c) {
  c.add("volume", Kind::List, "volume (repeatable; one per lane)");
  c.add("estimate", Kind::List, "GB estimate CSV for each volume");
  c.add("mines", Kind::List, "mines CSV for each volume");
  c.add("out", Kind::Str, "output prefix (writes PREFIX.roc.csv, .roc.json, .roc.manifest.json)");
  c.add("halo", Kind::Int, "detection halo, cells");
  c.add("area", Kind::Real, "scored area in m^2 (default: cell count x 0.0025)");
  c.add("far-max", Kind::Real, "upper FAR of the AUC window");
  c.add("guard", Kind::Int, "prescreener guard samples around the GB");
  c.add("depth-window", Kind::Int, "prescreener scoring window, samples");
  c.add("percentile", Kind::Real, "prescreener alarm percentile");
}

int cmd_roc(const Command& cmd, const std::vector<std::string>& argv) {
  Manifest man;
  man.command = "roc";
  man.argv = argv;
  man.config = cmd.merged();
  const auto volumes = get_list(man.config, "volume");
  const auto estimates = get_list(man.config, "estimate");
  const auto mine_files = get_list(man.config, "mines");
  const auto prefix = get_str(man.config, "out");
  if (volumes.empty()) throw ConfigError("roc: at least one --volume is required");
  if (estimates.size() != volumes.size() || mine_files.size() != volumes.size()) {
    throw ConfigError("roc: need one --estimate and one --mines per --volume");
  }
  if (prefix.empty()) throw ConfigError("roc: --out PREFIX is required");

  PrescreenConfig pc;
  pc.guard = get_count(man.config, "guard", pc.guard);
  pc.depth_window = get_count(man.config, "depth-window", pc.depth_window);
  pc.percentile = get_real(man.config, "percentile", pc.percentile);
  RocConfig rc;
  rc.halo = get_count(man.config, "halo", rc.halo);
  rc.far_max = get_real(man.config, "far-max", rc.far_max);

  std::vector<Alarm> alarms;
  std::vector<CellIndex> mines;
  std::size_t dt_offset = 0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    const auto volume = load_volume(volumes[i]);
    const auto est = load_truth(estimates[i], volume.n_depth());
    if (est.n_channels() != volume.n_channels() || est.n_scans() != volume.n_scans()) {
      throw ConfigError("roc: " + estimates[i] + " does not match the dimensions of " + volumes[i]);
    }
    for (auto m : load_mines(mine_files[i])) {
      if (m.ch >= volume.n_channels() || m.dt >= volume.n_scans()) {
        throw ConfigError("roc: mine outside " + volumes[i]);
      }
      m.dt += dt_offset;
      mines.push_back(m);
    }
    for (auto a : prescreen(volume, est, pc)) {
      a.dt += dt_offset;
      alarms.push_back(a);
    }
    cells += volume.n_channels() * volume.n_scans();
    // Lanes are laid end to end with a gap wider than the halo.
    dt_offset += volume.n_scans() + rc.halo + 1;
    man.inputs.insert(man.inputs.end(), {volumes[i], estimates[i], mine_files[i]});
  }
  rc.area_m2 = get_real(man.config, "area", static_cast<double>(cells) * kCellAreaM2);
  if (!(rc.area_m2 > 0.0)) throw ConfigError("roc: --area must be > 0");

  const auto n_alarms = alarms.size();
  const auto curve = roc(std::move(alarms), mines, rc);
  std::string csv = "far,pd\n";
  char buf[96];
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g\n", p.far, p.pd);
    csv += buf;
  }
  const auto csv_path = with_suffix(prefix, ".roc.csv");
  const auto json_path = with_suffix(prefix, ".roc.json");
  write_text(csv_path, csv);
  json r;
  r["auc_window"] = curve.auc_window;
  r["far_max"] = rc.far_max;
  r["degenerate"] = curve.degenerate;
  r["area_m2"] = rc.area_m2;
  r["n_alarms"] = n_alarms;
  r["n_mines"] = mines.size();
  r["n_points"] = curve.points.size();
  write_json(json_path, r);
  man.resolved = r;
  man.outputs = {csv_path, json_path};
  man.write(with_suffix(prefix, ".roc.manifest.json"));
  std::cout << "auc_window " << curve.auc_window << "\n";
  return kOk;
}

int code_for(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError&) {
    return kValidation;
  } catch (const json::exception&) {
    return kValidation;
  } catch (const std::invalid_argument&) {
    return kValidation;
  } catch (const IoError&) {
    return kIo;
  } catch (const FormatError&) {
    return kIo;
  } catch (...) {
    return kInternal;
  }
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Ground-bounce tracking for GPR volumes"};
  app.require_subcommand(1);
  app.name(args.empty() ? "gbtrack" : fs::path(args[0]).filename().string());

  Command simulate_cmd(app, "simulate", "generate a synthetic volume with ground truth");
  add_simulate_options(simulate_cmd);
  Command track_cmd(app, "track", "track the ground bounce of one or more volumes");
  add_track_options(track_cmd);
  Command eval_cmd(app, "eval", "bias and variance of an estimate against truth");
  add_eval_options(eval_cmd);
  Command roc_cmd(app, "roc", "prescreen with an estimate and score against mines");
  add_roc_options(roc_cmd);
  auto* version_cmd = app.add_subcommand("version", "print the tool version");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    if (version_cmd->parsed()) {
      std::cout << "gbtrack " << GBTRACK_VERSION << "\n";
      return kOk;
    }
    if (simulate_cmd.app()->parsed()) return cmd_simulate(simulate_cmd, args);
    if (track_cmd.app()->parsed()) return cmd_track(track_cmd, args);
    if (eval_cmd.app()->parsed()) return cmd_eval(eval_cmd, args);
    if (roc_cmd.app()->parsed()) return cmd_roc(roc_cmd, args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return code_for(std::current_exception());
  }
  return kInternal;
}

}  // namespace gbtrack::cli
