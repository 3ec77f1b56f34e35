#pragma once

#include <filesystem>

#include "foresight/imagecore.hpp"

namespace foresight
{

// 16-bit binary PGM (P5, big-endian). A pixel value v < 65535 decodes to
// v / 65535 * z_range; 65535 marks an invalid pixel. The sidecar
// "<file>.json" records {resolution_m, z_range_m, valid_sentinel}.
inline constexpr uint16_t kInvalidSentinel = 65535;

void write_depth_pgm(const std::filesystem::path& path, const DepthImage& image, double z_range_m);
DepthImage read_depth_pgm(const std::filesystem::path& path);

/// Variance images use the same encoding; z_range is then in m^2.
void write_variance_pgm(const std::filesystem::path& path, const UncertaintyImage& image, double range_m2);

std::filesystem::path sidecar_path(const std::filesystem::path& pgm_path);

}  // namespace foresight
