#pragma once

#include <filesystem>

#include "dng/domain.hpp"

namespace dng {

/// Writes an 8-bit PNG (gray for 1 channel, RGB for 3). Values are clamped to [0,1]
/// and rounded to the nearest 1/255 step.
void write_png(const std::filesystem::path& path, const Image& image);

/// Reads an 8-bit gray or RGB PNG into [0,1] floats. Gray images load as kMask.
Image read_png(const std::filesystem::path& path);

/// Quantizes to the 8-bit grid so in-memory images compare equal to their saved form.
Image quantize_8bit(const Image& image);

}  // namespace dng
