#pragma once

#include <cstdint>

#include "sili/image.hpp"
#include "sili/rng.hpp"

namespace sili::synthesis {

/// Which temporal slot carries the lower-resolution image.
enum class Slot { pre, post };

/// A co-registered pre/post pair with its change mask. `ratio` is the
/// resolution-difference ratio r_d >= 1 between the two slots.
struct BitemporalSample {
  ImageTensor pre;
  ImageTensor post;
  Mask label;
  double ratio = 1.0;
};

struct SynthesisConfig {
  double r_d = 1.0;           // resolution difference ratio of the dataset
  int crop_size = 128;        // swapped square block side; 0 disables the swap
  bool rrs_enabled = true;    // random downsampled reconstruction
  bool swap_enabled = true;
  double flip_prob = 0.5;
  double blur_prob = 0.5;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 1.5;
  uint64_t seed = 0;
  Slot degraded_slot = Slot::post;
};

/// Square block exchanged between the temporal images; (u, v) is the
/// upper-left corner in (col, row) order.
struct SwapRegion {
  int u = 0;
  int v = 0;
  int crop_size = 0;
};

/// Everything synthesize_training_pair produced, including the pre-swap
/// upsampled LR image that the edge clues consume.
struct SynthesisOutcome {
  BitemporalSample sample;  // synthesized pair at HR size
  ImageTensor lr_u;         // upsampled LR image before the region swap
  double drawn_ratio = 1.0;
  SwapRegion swap;
  bool swapped = false;
};

/// Bicubic resampling to an explicit size (half-pixel-center alignment,
/// output clamped to [0,1]).
ImageTensor resample(const ImageTensor& img, int out_h, int out_w);

/// Upsamples the LR image by r_d; output size is round(H * r_d) x
/// round(W * r_d).
ImageTensor upsample_lr(const ImageTensor& lr, double r_d);

struct ReconstructResult {
  ImageTensor image;
  double r = 1.0;
};

/// Draws r ~ U[1, r_d], downsamples to max(1, round(size / r)) and restores
/// the original size. r = 1 (and any draw whose rounded intermediate size
/// equals the input) is the exact identity.
ReconstructResult random_downsample_reconstruct(const ImageTensor& hr, double r_d, SplitRng& rng);

/// Exchanges the region between two same-shape images. Involution: applying
/// it twice with the same region restores both inputs exactly.
void swap_region(ImageTensor& a, ImageTensor& b, const SwapRegion& region);

struct SwapResult {
  ImageTensor a;
  ImageTensor b;
  SwapRegion region;
};

/// Draws u ~ U[0, W - crop], v ~ U[0, H - crop] (integers, inclusive) and
/// exchanges the crop_size x crop_size block between the two images.
SwapResult random_region_swap(const ImageTensor& a, const ImageTensor& b, int crop_size,
                              SplitRng& rng);

/// The full training-time pipeline: upsample the LR slot to HR size, random
/// downsampled reconstruction of the HR slot, then the random region swap.
/// The label passes through unchanged.
SynthesisOutcome synthesize_training_pair(const BitemporalSample& sample,
                                          const SynthesisConfig& cfg, SplitRng& rng);

/// Inference-time preparation: only the LR upsampling step, no randomness.
BitemporalSample prepare_inference_pair(const BitemporalSample& sample);

/// Geometric flips applied identically to both images and the label, and a
/// photometric Gaussian blur applied to the images only.
BitemporalSample augment(const BitemporalSample& sample, const SynthesisConfig& cfg,
                         SplitRng& rng);

}  // namespace sili::synthesis
