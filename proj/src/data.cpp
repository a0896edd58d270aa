#include "sili/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sili/png_io.hpp"
#include "sili/rng.hpp"

namespace sili::data {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_stem_list(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("dataset: missing split list " + file.string());
  std::vector<std::string> stems;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) stems.push_back(line);
  }
  return stems;
}

void write_stem_list(const fs::path& file, const std::vector<std::string>& stems) {
  std::ofstream out(file);
  for (const auto& s : stems) out << s << "\n";
}

}  // namespace

DatasetLayout DatasetLayout::scan(const fs::path& root) {
  DatasetLayout layout;
  layout.root = root;
  layout.train = read_stem_list(root / "train.txt");
  layout.val = read_stem_list(root / "val.txt");
  layout.test = read_stem_list(root / "test.txt");
  for (const auto* split : {&layout.train, &layout.val, &layout.test})
    for (const auto& stem : *split)
      for (const char* sub : {"A", "B", "label"}) {
        const fs::path p = root / sub / (stem + ".png");
        if (!fs::exists(p))
          throw std::runtime_error("dataset: stem '" + stem + "' missing file " + p.string());
      }
  return layout;
}

const std::vector<std::string>& DatasetLayout::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw std::invalid_argument("dataset: unknown split " + name);
}

synthesis::BitemporalSample DatasetLayout::load(const std::string& stem) const {
  synthesis::BitemporalSample s;
  s.pre = png_io::read_image((root / "A" / (stem + ".png")).string());
  s.post = png_io::read_image((root / "B" / (stem + ".png")).string());
  s.label = png_io::read_mask((root / "label" / (stem + ".png")).string());
  const int hr = std::max(s.pre.height, s.post.height);
  const int lr = std::min(s.pre.height, s.post.height);
  s.ratio = lr > 0 ? static_cast<double>(hr) / lr : 1.0;
  detail::require(s.label.height == hr, "dataset: label must be at HR size for " + stem);
  return s;
}

std::vector<ImageTensor> tile_image(const ImageTensor& img, int tile_size) {
  detail::require(tile_size >= 1, "tile_image: bad tile size");
  std::vector<ImageTensor> tiles;
  for (int ty = 0; ty + tile_size <= img.height; ty += tile_size)
    for (int tx = 0; tx + tile_size <= img.width; tx += tile_size) {
      ImageTensor t(tile_size, tile_size, img.channels);
      for (int y = 0; y < tile_size; ++y)
        for (int x = 0; x < tile_size; ++x)
          for (int c = 0; c < img.channels; ++c) t.at(y, x, c) = img.at(ty + y, tx + x, c);
      tiles.push_back(std::move(t));
    }
  return tiles;
}

std::vector<Mask> tile_mask(const Mask& mask, int tile_size) {
  std::vector<Mask> tiles;
  for (int ty = 0; ty + tile_size <= mask.height; ty += tile_size)
    for (int tx = 0; tx + tile_size <= mask.width; tx += tile_size) {
      Mask t(tile_size, tile_size);
      for (int y = 0; y < tile_size; ++y)
        for (int x = 0; x < tile_size; ++x) t.at(y, x) = mask.at(ty + y, tx + x);
      tiles.push_back(std::move(t));
    }
  return tiles;
}

TileReport tile_dataset(const fs::path& src_root, const fs::path& dst_root, int tile_size) {
  DatasetLayout src = DatasetLayout::scan(src_root);
  for (const char* sub : {"A", "B", "label"}) fs::create_directories(dst_root / sub);

  TileReport report;
  auto process_split = [&](const std::vector<std::string>& stems, const char* list_name) {
    std::vector<std::string> out_stems;
    for (const auto& stem : stems) {
      synthesis::BitemporalSample s = src.load(stem);
      if (s.pre.height < tile_size || s.pre.width < tile_size) {
        std::fprintf(stderr, "tile: skipping undersized source '%s' (%dx%d)\n", stem.c_str(),
                     s.pre.height, s.pre.width);
        ++report.sources_skipped;
        continue;
      }
      const auto a = tile_image(s.pre, tile_size);
      const auto b = tile_image(s.post, tile_size);
      const auto m = tile_mask(s.label, tile_size);
      const int cols = s.pre.width / tile_size;
      for (size_t i = 0; i < a.size(); ++i) {
        const int row = static_cast<int>(i) / cols, col = static_cast<int>(i) % cols;
        const std::string tile_stem =
            stem + "_" + std::to_string(row) + "_" + std::to_string(col);
        png_io::write_image((dst_root / "A" / (tile_stem + ".png")).string(), a[i]);
        png_io::write_image((dst_root / "B" / (tile_stem + ".png")).string(), b[i]);
        png_io::write_mask((dst_root / "label" / (tile_stem + ".png")).string(), m[i]);
        out_stems.push_back(tile_stem);
        ++report.tiles_written;
      }
    }
    write_stem_list(dst_root / list_name, out_stems);
  };
  process_split(src.train, "train.txt");
  process_split(src.val, "val.txt");
  process_split(src.test, "test.txt");
  return report;
}

SweepSample degrade_at_ratio(const synthesis::BitemporalSample& sample, double ratio,
                             synthesis::Slot slot) {
  detail::require(ratio >= 1.0, "degrade_at_ratio: ratio must be >= 1");
  SweepSample out{sample, ratio, 0, 0};
  const ImageTensor& target =
      slot == synthesis::Slot::post ? sample.post : sample.pre;
  out.realized_h = std::max(1, static_cast<int>(std::llround(target.height / ratio)));
  out.realized_w = std::max(1, static_cast<int>(std::llround(target.width / ratio)));
  if (out.realized_h == target.height && out.realized_w == target.width) return out;
  ImageTensor degraded = synthesis::resample(
      synthesis::resample(target, out.realized_h, out.realized_w), target.height, target.width);
  if (slot == synthesis::Slot::post)
    out.sample.post = std::move(degraded);
  else
    out.sample.pre = std::move(degraded);
  return out;
}

std::vector<SweepSample> make_sweep(const synthesis::BitemporalSample& sample,
                                    const SweepSpec& spec) {
  detail::require(!spec.ratios.empty(), "make_sweep: empty ratio list");
  for (size_t i = 0; i < spec.ratios.size(); ++i) {
    detail::require(spec.ratios[i] >= 1.0, "make_sweep: ratios must be >= 1");
    if (i) detail::require(spec.ratios[i] > spec.ratios[i - 1],
                           "make_sweep: ratios must be strictly increasing");
  }
  std::vector<SweepSample> out;
  out.reserve(spec.ratios.size());
  for (double r : spec.ratios) out.push_back(degrade_at_ratio(sample, r, spec.degraded_slot));
  return out;
}

std::vector<std::vector<int64_t>> batches(int64_t n_samples, int64_t batch_size, uint64_t seed,
                                          int64_t epoch) {
  detail::require(n_samples >= 1 && batch_size >= 1, "batches: empty dataset or batch");
  std::vector<int64_t> order(static_cast<size_t>(n_samples));
  for (int64_t i = 0; i < n_samples; ++i) order[static_cast<size_t>(i)] = i;
  SplitRng rng(seed, 0x5A0FFu, static_cast<uint64_t>(epoch));
  for (int64_t i = n_samples - 1; i > 0; --i)
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(rng.uniform_int(0, i))]);
  std::vector<std::vector<int64_t>> out;
  for (int64_t at = 0; at < n_samples; at += batch_size) {
    const int64_t take = std::min(batch_size, n_samples - at);
    out.emplace_back(order.begin() + at, order.begin() + at + take);
  }
  return out;
}

namespace {

// Smooth low-frequency texture in [0.15, 0.65], slightly tinted per channel.
ImageTensor fixture_background(int size, SplitRng& rng) {
  ImageTensor img(size, size, 3);
  const double fx1 = rng.uniform(0.05, 0.20), fy1 = rng.uniform(0.05, 0.20);
  const double fx2 = rng.uniform(0.20, 0.45), fy2 = rng.uniform(0.20, 0.45);
  const double p1 = rng.uniform(0.0, 6.28), p2 = rng.uniform(0.0, 6.28);
  double tint[3];
  for (double& t : tint) t = rng.uniform(-0.05, 0.05);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double v = 0.40 + 0.12 * std::sin(fx1 * x + fy1 * y + p1) +
                       0.08 * std::sin(fx2 * x - fy2 * y + p2);
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = std::clamp(v + tint[c], 0.0, 1.0);
    }
  return img;
}

struct Shape {
  bool disc = false;
  int cy = 0, cx = 0, half = 0;
  double color[3] = {0, 0, 0};

  bool contains(int y, int x) const {
    if (disc) {
      const double dy = y - cy, dx = x - cx;
      return dy * dy + dx * dx <= static_cast<double>(half) * half;
    }
    return std::abs(y - cy) <= half && std::abs(x - cx) <= half;
  }
  bool overlaps(const Shape& o) const {
    const int d = half + o.half + 2;
    return std::abs(cy - o.cy) <= d && std::abs(cx - o.cx) <= d;
  }
};

Shape draw_shape(const FixtureConfig& cfg, SplitRng& rng, const std::vector<Shape>& placed,
                 int min_side, int max_side) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    Shape s;
    s.disc = rng.bernoulli(0.5);
    s.half = static_cast<int>(rng.uniform_int(min_side / 2, max_side / 2));
    s.cy = static_cast<int>(rng.uniform_int(s.half, cfg.size - 1 - s.half));
    s.cx = static_cast<int>(rng.uniform_int(s.half, cfg.size - 1 - s.half));
    const bool bright = rng.bernoulli(0.5);
    for (double& c : s.color) c = bright ? rng.uniform(0.82, 1.0) : rng.uniform(0.0, 0.14);
    bool clear = true;
    for (const Shape& o : placed) clear = clear && !s.overlaps(o);
    if (clear) return s;
  }
  // crowded tile: give up on separation and place it anyway
  Shape s;
  s.disc = false;
  s.half = min_side / 2;
  s.cy = s.cx = cfg.size / 2;
  for (double& c : s.color) c = 0.95;
  return s;
}

void paint(ImageTensor& img, const Shape& s) {
  for (int y = std::max(0, s.cy - s.half); y <= std::min(img.height - 1, s.cy + s.half); ++y)
    for (int x = std::max(0, s.cx - s.half); x <= std::min(img.width - 1, s.cx + s.half); ++x)
      if (s.contains(y, x))
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = s.color[c];
}

void paint_mask(Mask& mask, const Shape& s) {
  for (int y = std::max(0, s.cy - s.half); y <= std::min(mask.height - 1, s.cy + s.half); ++y)
    for (int x = std::max(0, s.cx - s.half); x <= std::min(mask.width - 1, s.cx + s.half); ++x)
      if (s.contains(y, x)) mask.at(y, x) = 1;
}

}  // namespace

synthesis::BitemporalSample make_fixture_sample(const FixtureConfig& cfg, int index) {
  SplitRng rng(cfg.seed, 0xF1C7u, static_cast<uint64_t>(index));
  synthesis::BitemporalSample s;
  s.pre = fixture_background(cfg.size, rng);
  s.post = s.pre;
  s.label = Mask(cfg.size, cfg.size);
  s.ratio = 1.0;

  std::vector<Shape> placed;
  for (int i = 0; i < cfg.persistent_shapes; ++i) {
    Shape sh = draw_shape(cfg, rng, placed, cfg.min_shape, cfg.max_shape);
    placed.push_back(sh);
    paint(s.pre, sh);
    paint(s.post, sh);
  }
  for (int i = 0; i < cfg.disappearing_shapes; ++i) {
    Shape sh = draw_shape(cfg, rng, placed, cfg.min_shape, cfg.max_shape);
    placed.push_back(sh);
    paint(s.pre, sh);
    paint_mask(s.label, sh);
  }
  for (int i = 0; i < cfg.appearing_shapes; ++i) {
    Shape sh = draw_shape(cfg, rng, placed, cfg.min_shape, cfg.max_shape);
    placed.push_back(sh);
    paint(s.post, sh);
    paint_mask(s.label, sh);
  }
  return s;
}

void write_fixture_dataset(const fs::path& root, const FixtureConfig& cfg) {
  for (const char* sub : {"A", "B", "label"}) fs::create_directories(root / sub);
  std::vector<std::string> stems;
  for (int i = 0; i < cfg.tiles; ++i) {
    synthesis::BitemporalSample s = make_fixture_sample(cfg, i);
    char buf[32];
    std::snprintf(buf, sizeof buf, "synth_%03d", i);
    const std::string stem = buf;
    png_io::write_image((root / "A" / (stem + ".png")).string(), s.pre);
    png_io::write_image((root / "B" / (stem + ".png")).string(), s.post);
    png_io::write_mask((root / "label" / (stem + ".png")).string(), s.label);
    stems.push_back(stem);
  }
  for (const char* list : {"train.txt", "val.txt", "test.txt"})
    write_stem_list(root / list, stems);
}

}  // namespace sili::data
