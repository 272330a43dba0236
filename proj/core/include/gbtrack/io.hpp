#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "gbtrack/types.hpp"

namespace gbtrack {

// GPRV layout: "GPRV", u32 version (1), u32 n_depth, u32 n_channels,
// u32 n_scans, then f32 samples; everything little-endian, A-scans contiguous.
inline constexpr std::uint32_t kGprvVersion = 1;

GprVolume load_volume(const std::filesystem::path& path);

/// Writes through a temporary file and renames it over `path`.
void save_volume(const GprVolume& volume, const std::filesystem::path& path);

/// Reads a "ch,dt,gb" CSV. When `n_depth` is given every value is range-checked.
GroundBounceSurface load_truth(const std::filesystem::path& path,
                               std::optional<std::size_t> n_depth = std::nullopt);

void save_truth(const GroundBounceSurface& surface, const std::filesystem::path& path);

}  // namespace gbtrack
