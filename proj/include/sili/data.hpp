#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sili/synthesis.hpp"

namespace sili::data {

/// On-disk dataset: root/A (pre), root/B (post), root/label, plus
/// train.txt / val.txt / test.txt listing tile stems.
struct DatasetLayout {
  std::filesystem::path root;
  std::vector<std::string> train, val, test;

  /// Scans and validates: every listed stem must exist in A/, B/ and label/.
  static DatasetLayout scan(const std::filesystem::path& root);

  const std::vector<std::string>& split(const std::string& name) const;
  synthesis::BitemporalSample load(const std::string& stem) const;
};

/// Row-major non-overlapping tiles; trailing remainders are dropped.
std::vector<ImageTensor> tile_image(const ImageTensor& img, int tile_size);
std::vector<Mask> tile_mask(const Mask& mask, int tile_size);

struct TileReport {
  int tiles_written = 0;
  int sources_skipped = 0;
};

/// Tiles a source dataset (same layout, full-size images) into tile_size
/// patches named <source>_<row>_<col>. Undersized sources are skipped with
/// a warning on stderr.
TileReport tile_dataset(const std::filesystem::path& src_root,
                        const std::filesystem::path& dst_root, int tile_size = 256);

/// Evaluation sweep: ratios must be >= 1 and strictly increasing.
struct SweepSpec {
  std::vector<double> ratios{1.0, 1.3, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0};
  synthesis::Slot degraded_slot = synthesis::Slot::post;
};

struct SweepSample {
  synthesis::BitemporalSample sample;
  double ratio = 1.0;
  int realized_h = 0;  // intermediate degraded size actually used
  int realized_w = 0;
};

/// Degrades one sample at a fixed ratio: bicubic downsample of the
/// configured slot to size/ratio (rounded to nearest, min 1), restored to
/// the original size. Ratio 1 returns the sample unchanged.
SweepSample degrade_at_ratio(const synthesis::BitemporalSample& sample, double ratio,
                             synthesis::Slot slot);

/// One degraded copy per ratio; the label object is shared untouched.
std::vector<SweepSample> make_sweep(const synthesis::BitemporalSample& sample,
                                    const SweepSpec& spec);

/// Epoch-seeded shuffled batch index stream; the final partial batch is
/// retained.
std::vector<std::vector<int64_t>> batches(int64_t n_samples, int64_t batch_size, uint64_t seed,
                                          int64_t epoch);

/// Procedural bitemporal fixture: textured background shared by both
/// temporals, persistent shapes in both, and appearing/disappearing shapes
/// that define the change mask. Runs every test without external downloads.
struct FixtureConfig {
  int tiles = 8;
  int size = 64;
  uint64_t seed = 7;
  int min_shape = 18;
  int max_shape = 26;
  int persistent_shapes = 1;
  int appearing_shapes = 2;
  int disappearing_shapes = 1;
};

synthesis::BitemporalSample make_fixture_sample(const FixtureConfig& cfg, int index);

/// Writes the fixture as a full dataset (PNGs + split lists, all tiles in
/// every split).
void write_fixture_dataset(const std::filesystem::path& root, const FixtureConfig& cfg);

}  // namespace sili::data
