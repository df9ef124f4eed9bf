#pragma once

#include <filesystem>

#include "xdv/raster.hpp"

namespace xdv {

// Decodes any PNG into 8-bit RGB (palette, gray, alpha and 16-bit inputs are
// converted). Throws Error{Io} on missing or undecodable files.
RgbImage read_png(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RgbImage& image);

}  // namespace xdv
