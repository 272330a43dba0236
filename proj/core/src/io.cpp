#include "gbtrack/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gbtrack/errors.hpp"

namespace gbtrack {
namespace {

static_assert(std::endian::native == std::endian::little,
              "GPRV I/O assumes a little-endian host");

constexpr std::array<char, 4> kMagic{'G', 'P', 'R', 'V'};
constexpr std::size_t kHeaderBytes = 20;

std::uint32_t read_u32(const unsigned char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

void append_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, sizeof v);
  out.append(buf, 4);
}

void write_atomically(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace

GprVolume load_volume(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kHeaderBytes) {
    throw FormatError(path.string() + ": truncated header at byte offset " +
                      std::to_string(bytes.size()));
  }
  if (std::memcmp(data, kMagic.data(), kMagic.size()) != 0) {
    throw FormatError(path.string() + ": bad magic at byte offset 0");
  }
  if (const auto version = read_u32(data + 4); version != kGprvVersion) {
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version) +
                      " at byte offset 4");
  }
  const std::size_t n_depth = read_u32(data + 8);
  const std::size_t n_channels = read_u32(data + 12);
  const std::size_t n_scans = read_u32(data + 16);
  if (n_depth == 0 || n_channels == 0 || n_scans == 0) {
    throw FormatError(path.string() + ": zero dimension at byte offset 8");
  }
  const std::size_t count = n_depth * n_channels * n_scans;
  const std::size_t expected = kHeaderBytes + count * sizeof(float);
  if (bytes.size() < expected) {
    throw FormatError(path.string() + ": truncated payload at byte offset " +
                      std::to_string(bytes.size()) + " (expected " + std::to_string(expected) +
                      " bytes)");
  }
  if (bytes.size() > expected) {
    throw FormatError(path.string() + ": trailing data at byte offset " +
                      std::to_string(expected));
  }
  std::vector<float> samples(count);
  std::memcpy(samples.data(), data + kHeaderBytes, count * sizeof(float));
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::isfinite(samples[i])) {
      throw FormatError(path.string() + ": non-finite sample at byte offset " +
                        std::to_string(kHeaderBytes + i * sizeof(float)));
    }
  }
  return {n_depth, n_channels, n_scans, std::move(samples)};
}

void save_volume(const GprVolume& volume, const std::filesystem::path& path) {
  if (volume.empty()) throw ConfigError("refusing to write a volume with empty dimensions");
  std::string bytes;
  bytes.reserve(kHeaderBytes + volume.samples().size() * sizeof(float));
  bytes.append(kMagic.data(), kMagic.size());
  append_u32(bytes, kGprvVersion);
  append_u32(bytes, static_cast<std::uint32_t>(volume.n_depth()));
  append_u32(bytes, static_cast<std::uint32_t>(volume.n_channels()));
  append_u32(bytes, static_cast<std::uint32_t>(volume.n_scans()));
  bytes.append(reinterpret_cast<const char*>(volume.samples().data()),
               volume.samples().size() * sizeof(float));
  write_atomically(path, bytes);
}

GroundBounceSurface load_truth(const std::filesystem::path& path,
                               std::optional<std::size_t> n_depth) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  struct Row {
    std::size_t ch, dt;
    double gb;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_ch = 0, max_dt = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line == "ch,dt,gb") continue;
    long long ch = 0, dt = 0;
    double gb = 0.0;
    char c1 = 0, c2 = 0;
    std::istringstream ss(line);
    if (!(ss >> ch >> c1 >> dt >> c2 >> gb) || c1 != ',' || c2 != ',' || ch < 1 || dt < 1) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": malformed row '" +
                        line + "'");
    }
    if (!std::isfinite(gb)) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": non-finite value");
    }
    rows.push_back({static_cast<std::size_t>(ch), static_cast<std::size_t>(dt), gb});
    max_ch = std::max(max_ch, rows.back().ch);
    max_dt = std::max(max_dt, rows.back().dt);
  }
  if (rows.empty()) throw FormatError(path.string() + ": no rows");
  if (rows.size() != max_ch * max_dt) {
    throw FormatError(path.string() + ": " + std::to_string(rows.size()) + " rows but " +
                      std::to_string(max_ch) + " channels x " + std::to_string(max_dt) +
                      " scans");
  }
  GroundBounceSurface surface(max_ch, max_dt);
  std::vector<bool> seen(rows.size(), false);
  for (const auto& r : rows) {
    const std::size_t idx = (r.ch - 1) * max_dt + (r.dt - 1);
    if (seen[idx]) {
      throw FormatError(path.string() + ": duplicate row for ch " + std::to_string(r.ch) +
                        ", dt " + std::to_string(r.dt));
    }
    seen[idx] = true;
    surface(r.ch - 1, r.dt - 1) = r.gb;
  }
  if (n_depth) surface.check_range(*n_depth);
  return surface;
}

void save_truth(const GroundBounceSurface& surface, const std::filesystem::path& path) {
  if (surface.size() == 0) throw ConfigError("refusing to write an empty surface");
  std::string out = "ch,dt,gb\n";
  out.reserve(out.size() + surface.size() * 20);
  char buf[64];
  for (std::size_t dt = 0; dt < surface.n_scans(); ++dt) {
    for (std::size_t ch = 0; ch < surface.n_channels(); ++ch) {
      const int n = std::snprintf(buf, sizeof buf, "%zu,%zu,%.6f\n", ch + 1, dt + 1, surface(ch, dt));
      out.append(buf, static_cast<std::size_t>(n));
    }
  }
  write_atomically(path, out);
}

}  // namespace gbtrack
