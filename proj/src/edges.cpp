#include "sili/edges.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sili::edges {

namespace {

inline int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

Tensor smooth(const Tensor& in, double sigma) {
  if (sigma <= 0.0) return in;
  const int h = static_cast<int>(in.dim(0)), w = static_cast<int>(in.dim(1));
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[static_cast<size_t>(k + radius)] = std::exp(-0.5 * (k / sigma) * (k / sigma));
    sum += kernel[static_cast<size_t>(k + radius)];
  }
  for (double& v : kernel) v /= sum;
  Tensor tmp({h, w}), out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      for (int k = -radius; k <= radius; ++k)
        v += kernel[static_cast<size_t>(k + radius)] * in.at(clamp_index(y + k, h), x);
      tmp.at(y, x) = v;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      for (int k = -radius; k <= radius; ++k)
        v += kernel[static_cast<size_t>(k + radius)] * tmp.at(y, clamp_index(x + k, w));
      out.at(y, x) = v;
    }
  return out;
}

// Nearest-rank percentile of a sorted ascending vector, p in [0,1].
double percentile(const std::vector<double>& sorted, double p) {
  const size_t n = sorted.size();
  const size_t rank = static_cast<size_t>(std::ceil(p * static_cast<double>(n)));
  return sorted[std::clamp<size_t>(rank, 1, n) - 1];
}

}  // namespace

Tensor canny(const Tensor& channel, const CannyConfig& cfg) {
  detail::require(channel.ndim() == 2, "canny: expects a 2-d channel");
  const int h = static_cast<int>(channel.dim(0)), w = static_cast<int>(channel.dim(1));
  const Tensor sm = smooth(channel, cfg.gaussian_sigma);

  // Sobel gradients with replicated borders.
  Tensor gx({h, w}), gy({h, w}), mag({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto v = [&](int yy, int xx) { return sm.at(clamp_index(yy, h), clamp_index(xx, w)); };
      const double dx = (v(y - 1, x + 1) + 2 * v(y, x + 1) + v(y + 1, x + 1)) -
                        (v(y - 1, x - 1) + 2 * v(y, x - 1) + v(y + 1, x - 1));
      const double dy = (v(y + 1, x - 1) + 2 * v(y + 1, x) + v(y + 1, x + 1)) -
                        (v(y - 1, x - 1) + 2 * v(y - 1, x) + v(y - 1, x + 1));
      gx.at(y, x) = dx;
      gy.at(y, x) = dy;
      mag.at(y, x) = std::sqrt(dx * dx + dy * dy);
    }

  std::vector<double> nonzero;
  for (int64_t i = 0; i < mag.numel(); ++i)
    if (mag[i] > 0.0) nonzero.push_back(mag[i]);
  Tensor out({h, w});
  if (nonzero.empty()) return out;  // flat image, no edges

  double low, high;
  if (cfg.mode == CannyConfig::ThresholdMode::percentile) {
    std::sort(nonzero.begin(), nonzero.end());
    low = percentile(nonzero, cfg.low_percentile);
    high = percentile(nonzero, cfg.high_percentile);
  } else {
    const double mx = *std::max_element(nonzero.begin(), nonzero.end());
    low = cfg.fixed_low * mx;
    high = cfg.fixed_high * mx;
  }

  // Non-maximum suppression along the quantized gradient direction. Of a
  // tied pair the scan-earlier pixel survives: strict > against the earlier
  // neighbor, >= against the later one.
  Tensor nms({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double m = mag.at(y, x);
      if (m <= 0.0) continue;
      double angle = std::atan2(gy.at(y, x), gx.at(y, x)) * 180.0 / 3.14159265358979323846;
      if (angle < 0.0) angle += 180.0;
      int dy1, dx1;  // later neighbor offset; the earlier one is its mirror
      if (angle < 22.5 || angle >= 157.5) {
        dy1 = 0;
        dx1 = 1;
      } else if (angle < 67.5) {
        dy1 = 1;
        dx1 = 1;
      } else if (angle < 112.5) {
        dy1 = 1;
        dx1 = 0;
      } else {
        dy1 = 1;
        dx1 = -1;
      }
      auto m_at = [&](int yy, int xx) {
        return (yy >= 0 && yy < h && xx >= 0 && xx < w) ? mag.at(yy, xx) : 0.0;
      };
      // later neighbor = larger (y, x) in scan order, earlier = the mirror
      const double later = m_at(y + dy1, x + dx1);
      const double earlier = m_at(y - dy1, x - dx1);
      if (m > earlier && m >= later) nms.at(y, x) = m;
    }

  // Hysteresis: grow from strong pixels through weak ones, 8-connected.
  std::vector<int> stack;
  std::vector<uint8_t> state(static_cast<size_t>(h) * w, 0);  // 1 weak, 2 edge
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double m = nms.at(y, x);
      if (m >= high) {
        state[static_cast<size_t>(y) * w + x] = 2;
        stack.push_back(y * w + x);
      } else if (m >= low) {
        state[static_cast<size_t>(y) * w + x] = 1;
      }
    }
  while (!stack.empty()) {
    const int p = stack.back();
    stack.pop_back();
    const int y = p / w, x = p % w;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int yy = y + dy, xx = x + dx;
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
        uint8_t& s = state[static_cast<size_t>(yy) * w + xx];
        if (s == 1) {
          s = 2;
          stack.push_back(yy * w + xx);
        }
      }
  }
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = state[static_cast<size_t>(i)] == 2 ? 1.0 : 0.0;
  return out;
}

Tensor edge_clues(const ImageTensor& hr_s, const ImageTensor& lr_u, const CannyConfig& cfg) {
  detail::require(hr_s.same_shape(lr_u), "edge_clues: images must have the same shape");
  const int h = hr_s.height, w = hr_s.width, c = hr_s.channels;
  Tensor out({c, h, w});
  Tensor chan({h, w});
  for (int ci = 0; ci < c; ++ci) {
    for (const ImageTensor* img : {&hr_s, &lr_u}) {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) chan.at(y, x) = img->at(y, x, ci);
      Tensor e = canny(chan, cfg);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(ci, y, x) += e.at(y, x);
    }
  }
  return out;
}

}  // namespace sili::edges
