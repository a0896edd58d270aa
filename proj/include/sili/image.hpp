#pragma once

#include <cstdint>
#include <vector>

#include "sili/tensor.hpp"

namespace sili {

/// H x W x C raster with interleaved channels and values in [0, 1].
/// The carrier for all pre/post imagery.
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;  // size height*width*channels, HWC order

  ImageTensor() = default;
  ImageTensor(int h, int w, int c)
      : height(h), width(w), channels(c),
        values(static_cast<size_t>(h) * w * c, 0.0) {
    detail::require(h > 0 && w > 0 && c > 0, "ImageTensor: dimensions must be positive");
  }

  static ImageTensor constant(int h, int w, int c, double v) {
    ImageTensor img(h, w, c);
    std::fill(img.values.begin(), img.values.end(), v);
    return img;
  }

  double& at(int y, int x, int c) {
    return values[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return values[(static_cast<size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const ImageTensor& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

  /// [C, H, W] copy for feeding the network.
  Tensor to_chw() const;
};

/// Binary per-pixel mask, values in {0, 1}.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> values;

  Mask() = default;
  Mask(int h, int w) : height(h), width(w), values(static_cast<size_t>(h) * w, 0) {}

  uint8_t& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
};

/// Keys bicubic kernel (a = -0.5) evaluated at distance |x|.
double bicubic_weight(double x);

/// Bicubic resampling with half-pixel-center alignment: output pixel i reads
/// source position (i + 0.5) * (in / out) - 0.5. Border handling clamps
/// source indices. Result is clamped to [0, 1]. Resampling to the input size
/// reproduces the input exactly.
ImageTensor resample_bicubic(const ImageTensor& img, int out_h, int out_w);

/// Separable Gaussian blur with kernel radius ceil(3 * sigma) and replicate
/// borders. sigma <= 0 is the identity.
ImageTensor gaussian_blur(const ImageTensor& img, double sigma);

ImageTensor flip_horizontal(const ImageTensor& img);
ImageTensor flip_vertical(const ImageTensor& img);
Mask flip_horizontal(const Mask& m);
Mask flip_vertical(const Mask& m);

}  // namespace sili
