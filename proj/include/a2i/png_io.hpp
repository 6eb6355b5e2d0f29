#pragma once

#include <filesystem>

#include "a2i/types.hpp"

namespace a2i {

// Reads an 8-bit RGB or RGBA (alpha dropped), non-interlaced PNG.
Image read_png(const std::filesystem::path& path);

// Writes 8-bit RGB. Uses stored deflate blocks, so output bytes depend only
// on the pixel data (no zlib version or timestamp effects).
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace a2i
