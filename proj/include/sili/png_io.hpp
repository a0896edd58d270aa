#pragma once

#include <string>

#include "sili/image.hpp"

namespace sili::png_io {

/// Reads an 8-bit PNG as RGB, mapping values to [0,1] by /255. Grayscale
/// and paletted files are expanded to RGB; an alpha channel is dropped.
ImageTensor read_image(const std::string& path);

/// Reads an 8-bit PNG as a binary mask: pixels >= 128 (first channel) are 1.
Mask read_mask(const std::string& path);

/// Writes an RGB image, quantizing by round(v * 255).
void write_image(const std::string& path, const ImageTensor& img);

/// Writes a mask as 8-bit grayscale with values {0, 255}.
void write_mask(const std::string& path, const Mask& mask);

}  // namespace sili::png_io
