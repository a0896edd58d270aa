#include "sili/image.hpp"

#include <algorithm>
#include <cmath>

namespace sili {

Tensor ImageTensor::to_chw() const {
  Tensor t({channels, height, width});
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) t.at(c, y, x) = at(y, x, c);
  return t;
}

double bicubic_weight(double x) {
  constexpr double a = -0.5;
  x = std::fabs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return a * (((x - 5.0) * x + 8.0) * x - 4.0);
  return 0.0;
}

namespace {

inline int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

// One separable pass along the height axis; width pass is the same with the
// image transposed by the caller's loop order.
ImageTensor resample_rows(const ImageTensor& img, int out_h) {
  ImageTensor out(out_h, img.width, img.channels);
  const double scale = static_cast<double>(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double src = (y + 0.5) * scale - 0.5;
    const int base = static_cast<int>(std::floor(src));
    const double t = src - base;
    double w[4];
    for (int k = 0; k < 4; ++k) w[k] = bicubic_weight(t - (k - 1));
    int rows[4];
    for (int k = 0; k < 4; ++k) rows[k] = clamp_index(base + k - 1, img.height);
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double v = 0.0;
        for (int k = 0; k < 4; ++k) v += w[k] * img.at(rows[k], x, c);
        out.at(y, x, c) = v;
      }
  }
  return out;
}

ImageTensor resample_cols(const ImageTensor& img, int out_w) {
  ImageTensor out(img.height, out_w, img.channels);
  const double scale = static_cast<double>(img.width) / out_w;
  for (int x = 0; x < out_w; ++x) {
    const double src = (x + 0.5) * scale - 0.5;
    const int base = static_cast<int>(std::floor(src));
    const double t = src - base;
    double w[4];
    for (int k = 0; k < 4; ++k) w[k] = bicubic_weight(t - (k - 1));
    int cols[4];
    for (int k = 0; k < 4; ++k) cols[k] = clamp_index(base + k - 1, img.width);
    for (int y = 0; y < img.height; ++y)
      for (int c = 0; c < img.channels; ++c) {
        double v = 0.0;
        for (int k = 0; k < 4; ++k) v += w[k] * img.at(y, cols[k], c);
        out.at(y, x, c) = v;
      }
  }
  return out;
}

}  // namespace

ImageTensor resample_bicubic(const ImageTensor& img, int out_h, int out_w) {
  detail::require(out_h >= 1 && out_w >= 1, "resample_bicubic: target size must be positive");
  ImageTensor out = resample_cols(resample_rows(img, out_h), out_w);
  for (double& v : out.values) v = std::clamp(v, 0.0, 1.0);
  return out;
}

ImageTensor gaussian_blur(const ImageTensor& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[static_cast<size_t>(k + radius)] = std::exp(-0.5 * (k / sigma) * (k / sigma));
    sum += kernel[static_cast<size_t>(k + radius)];
  }
  for (double& w : kernel) w /= sum;

  ImageTensor tmp(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double v = 0.0;
        for (int k = -radius; k <= radius; ++k)
          v += kernel[static_cast<size_t>(k + radius)] *
               img.at(clamp_index(y + k, img.height), x, c);
        tmp.at(y, x, c) = v;
      }
  ImageTensor out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double v = 0.0;
        for (int k = -radius; k <= radius; ++k)
          v += kernel[static_cast<size_t>(k + radius)] *
               tmp.at(y, clamp_index(x + k, img.width), c);
        out.at(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
  return out;
}

ImageTensor flip_horizontal(const ImageTensor& img) {
  ImageTensor out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

ImageTensor flip_vertical(const ImageTensor& img) {
  ImageTensor out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
  return out;
}

Mask flip_horizontal(const Mask& m) {
  Mask out(m.height, m.width);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) out.at(y, x) = m.at(y, m.width - 1 - x);
  return out;
}

Mask flip_vertical(const Mask& m) {
  Mask out(m.height, m.width);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) out.at(y, x) = m.at(m.height - 1 - y, x);
  return out;
}

}  // namespace sili
