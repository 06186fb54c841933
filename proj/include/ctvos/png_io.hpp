// PNG reading/writing via libpng. Frames are 8-bit RGB; segmentation masks
// are palette PNGs whose raw indices are the object ids (0 = background),
// matching the usual video-segmentation annotation layout.
#pragma once

#include <string>

#include "ctvos/image.hpp"

namespace ctvos {

void write_rgb_png(const std::string& path, const Image& img);
Image read_rgb_png(const std::string& path);

void write_indexed_png(const std::string& path, const IndexMask& mask);
IndexMask read_indexed_png(const std::string& path);

}  // namespace ctvos
