#pragma once

#include "sili/image.hpp"
#include "sili/tensor.hpp"

namespace sili::edges {

struct CannyConfig {
  enum class ThresholdMode { percentile, fixed };

  double gaussian_sigma = 1.0;
  ThresholdMode mode = ThresholdMode::percentile;
  // percentile mode: percentiles (in [0,1]) of the nonzero gradient
  // magnitudes per channel
  double low_percentile = 0.70;
  double high_percentile = 0.90;
  // fixed mode: fractions of the maximum gradient magnitude
  double fixed_low = 0.1;
  double fixed_high = 0.2;
};

/// Canny edges of one channel: Gaussian smoothing, Sobel gradients,
/// non-maximum suppression, double-threshold hysteresis. Input values in
/// [0,1]; output is a {0,1} map of the same H x W shape.
Tensor canny(const Tensor& channel, const CannyConfig& cfg = {});

/// Low-level edge clues: per-channel Canny of both temporal images summed
/// pixelwise. Output is [C, H, W] with values in {0, 1, 2}.
Tensor edge_clues(const ImageTensor& hr_s, const ImageTensor& lr_u, const CannyConfig& cfg = {});

}  // namespace sili::edges
