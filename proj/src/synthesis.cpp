#include "sili/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sili::synthesis {

ImageTensor resample(const ImageTensor& img, int out_h, int out_w) {
  return resample_bicubic(img, out_h, out_w);
}

ImageTensor upsample_lr(const ImageTensor& lr, double r_d) {
  detail::require(r_d >= 1.0, "upsample_lr: ratio must be >= 1");
  const int out_h = static_cast<int>(std::llround(lr.height * r_d));
  const int out_w = static_cast<int>(std::llround(lr.width * r_d));
  if (out_h == lr.height && out_w == lr.width) return lr;
  return resample(lr, out_h, out_w);
}

ReconstructResult random_downsample_reconstruct(const ImageTensor& hr, double r_d,
                                                SplitRng& rng) {
  detail::require(r_d >= 1.0, "random_downsample_reconstruct: ratio must be >= 1");
  const double r = rng.uniform(1.0, r_d);
  const int dh = std::max(1, static_cast<int>(std::llround(hr.height / r)));
  const int dw = std::max(1, static_cast<int>(std::llround(hr.width / r)));
  if (dh == hr.height && dw == hr.width) return {hr, r};
  return {resample(resample(hr, dh, dw), hr.height, hr.width), r};
}

void swap_region(ImageTensor& a, ImageTensor& b, const SwapRegion& region) {
  detail::require(a.same_shape(b), "swap_region: images must have the same shape");
  detail::require(region.crop_size >= 1 && region.u >= 0 && region.v >= 0 &&
                      region.u + region.crop_size <= a.width &&
                      region.v + region.crop_size <= a.height,
                  "swap_region: region does not fit the images");
  for (int y = region.v; y < region.v + region.crop_size; ++y)
    for (int x = region.u; x < region.u + region.crop_size; ++x)
      for (int c = 0; c < a.channels; ++c) std::swap(a.at(y, x, c), b.at(y, x, c));
}

SwapResult random_region_swap(const ImageTensor& a, const ImageTensor& b, int crop_size,
                              SplitRng& rng) {
  detail::require(a.same_shape(b), "random_region_swap: images must have the same shape");
  detail::require(crop_size >= 1 && crop_size <= a.width && crop_size <= a.height,
                  "random_region_swap: crop_size does not fit the images");
  SwapResult out{a, b, {}};
  out.region.crop_size = crop_size;
  out.region.u = static_cast<int>(rng.uniform_int(0, a.width - crop_size));
  out.region.v = static_cast<int>(rng.uniform_int(0, a.height - crop_size));
  swap_region(out.a, out.b, out.region);
  return out;
}

SynthesisOutcome synthesize_training_pair(const BitemporalSample& sample,
                                          const SynthesisConfig& cfg, SplitRng& rng) {
  const bool post_is_lr = cfg.degraded_slot == Slot::post;
  const ImageTensor& lr = post_is_lr ? sample.post : sample.pre;
  const ImageTensor& hr = post_is_lr ? sample.pre : sample.post;

  ImageTensor lr_u;
  if (lr.height == hr.height && lr.width == hr.width) {
    lr_u = lr;
  } else {
    const double realized = static_cast<double>(hr.height) / lr.height;
    lr_u = upsample_lr(lr, realized);
    if (lr_u.height != hr.height || lr_u.width != hr.width)
      throw std::runtime_error("synthesize_training_pair: LR/HR sizes are not related by r_d");
  }

  SynthesisOutcome out;
  out.lr_u = lr_u;

  ImageTensor hr_d = hr;
  if (cfg.rrs_enabled && cfg.r_d > 1.0) {
    ReconstructResult rec = random_downsample_reconstruct(hr, cfg.r_d, rng);
    hr_d = std::move(rec.image);
    out.drawn_ratio = rec.r;
  }

  ImageTensor hr_s = std::move(hr_d);
  ImageTensor lr_s = std::move(lr_u);
  if (cfg.swap_enabled && cfg.crop_size >= 1) {
    detail::require(cfg.crop_size <= hr.width && cfg.crop_size <= hr.height,
                    "synthesize_training_pair: crop_size exceeds the image");
    SwapResult sw = random_region_swap(hr_s, lr_s, cfg.crop_size, rng);
    hr_s = std::move(sw.a);
    lr_s = std::move(sw.b);
    out.swap = sw.region;
    out.swapped = true;
  }

  out.sample.pre = post_is_lr ? std::move(hr_s) : std::move(lr_s);
  out.sample.post = post_is_lr ? std::move(lr_s) : std::move(hr_s);
  out.sample.label = sample.label;
  out.sample.ratio = sample.ratio;
  return out;
}

BitemporalSample prepare_inference_pair(const BitemporalSample& sample) {
  BitemporalSample out = sample;
  if (sample.pre.height == sample.post.height && sample.pre.width == sample.post.width)
    return out;
  const bool post_is_lr = sample.post.height < sample.pre.height;
  const ImageTensor& lr = post_is_lr ? sample.post : sample.pre;
  const ImageTensor& hr = post_is_lr ? sample.pre : sample.post;
  ImageTensor up = resample(lr, hr.height, hr.width);
  if (post_is_lr)
    out.post = std::move(up);
  else
    out.pre = std::move(up);
  return out;
}

BitemporalSample augment(const BitemporalSample& sample, const SynthesisConfig& cfg,
                         SplitRng& rng) {
  BitemporalSample out = sample;
  if (rng.bernoulli(cfg.flip_prob)) {
    out.pre = flip_horizontal(out.pre);
    out.post = flip_horizontal(out.post);
    out.label = flip_horizontal(out.label);
  }
  if (rng.bernoulli(cfg.flip_prob)) {
    out.pre = flip_vertical(out.pre);
    out.post = flip_vertical(out.post);
    out.label = flip_vertical(out.label);
  }
  if (rng.bernoulli(cfg.blur_prob)) {
    const double sigma = rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max);
    out.pre = gaussian_blur(out.pre, sigma);
    out.post = gaussian_blur(out.post, sigma);
  }
  return out;
}

}  // namespace sili::synthesis
