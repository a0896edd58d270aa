#include <cmath>

#include "doctest.h"
#include "sili/checkpoint.hpp"
#include "sili/encoder.hpp"
#include "sili/rng.hpp"

using namespace sili;
using namespace sili::encoder;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, uint64_t seed, double scale = 1.0) {
  SplitRng rng(seed);
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
  return t;
}

bool all_finite(const Tensor& t) {
  for (int64_t i = 0; i < t.numel(); ++i)
    if (!std::isfinite(t[i])) return false;
  return true;
}

bool tensors_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (int64_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

Encoder make_tiny_encoder(nn::ParamStore& store, const InteractionConfig& cfg,
                          bool interaction = true, bool edges = true, uint64_t seed = 3) {
  SplitRng rng(seed);
  return Encoder(store, BackboneKind::tiny, cfg, interaction, edges, rng);
}

}  // namespace

TEST_CASE("tiny backbone level shapes on 64x64 input") {
  nn::ParamStore store;
  InteractionConfig icfg;
  icfg.window_size = 4;
  icfg.levels = {1, 2};
  Encoder enc = make_tiny_encoder(store, icfg);
  ad::NoGradGuard guard;
  ad::Var img(random_tensor({1, 3, 64, 64}, 1, 0.2), false);
  FeaturePyramid p = enc.extract_features(img, false);
  const int64_t sizes[4] = {16, 8, 4, 2};
  const int64_t widths[4] = {8, 16, 32, 64};
  for (int j = 0; j < 4; ++j) {
    CHECK(p.levels[static_cast<size_t>(j)].dim(1) == widths[j]);
    CHECK(p.levels[static_cast<size_t>(j)].dim(2) == sizes[j]);
    CHECK(p.levels[static_cast<size_t>(j)].dim(3) == sizes[j]);
    CHECK(all_finite(p.levels[static_cast<size_t>(j)].value()));
  }
}

TEST_CASE("reference backbone level shapes on 256x256 input") {
  nn::ParamStore store;
  SplitRng rng(5);
  Encoder enc(store, BackboneKind::reference, InteractionConfig{}, false, false, rng);
  ad::NoGradGuard guard;
  ad::Var img(random_tensor({1, 3, 256, 256}, 2, 0.2), false);
  FeaturePyramid p = enc.extract_features(img, false);
  const int64_t sizes[4] = {64, 32, 16, 8};
  const int64_t widths[4] = {64, 128, 256, 512};
  for (int j = 0; j < 4; ++j) {
    CHECK(p.levels[static_cast<size_t>(j)].dim(1) == widths[j]);
    CHECK(p.levels[static_cast<size_t>(j)].dim(2) == sizes[j]);
  }
}

TEST_CASE("feature extraction is Siamese and deterministic") {
  nn::ParamStore store;
  InteractionConfig icfg;
  icfg.window_size = 4;
  Encoder enc = make_tiny_encoder(store, icfg, false, false);
  ad::NoGradGuard guard;
  ad::Var img(random_tensor({1, 3, 64, 64}, 7, 0.2), false);
  FeaturePyramid a = enc.extract_features(img, false);
  FeaturePyramid b = enc.extract_features(img, false);
  for (int j = 0; j < 4; ++j)
    CHECK(tensors_equal(a.levels[static_cast<size_t>(j)].value(),
                        b.levels[static_cast<size_t>(j)].value()));
  // exactly one parameter set serves both temporal calls
  int backbone_params = 0;
  for (const auto& [name, v] : store.params())
    if (name.rfind("backbone.", 0) == 0) ++backbone_params;
  CHECK(backbone_params > 0);
  for (const auto& [name, v] : store.params()) CHECK(name.rfind("backbone2", 0) != 0);
}

TEST_CASE("indivisible input sizes are rejected") {
  nn::ParamStore store;
  Encoder enc = make_tiny_encoder(store, InteractionConfig{}, false, false);
  ad::NoGradGuard guard;
  ad::Var img(random_tensor({1, 3, 48, 48}, 8), false);
  CHECK_THROWS_AS(enc.extract_features(img, false), std::invalid_argument);
}

TEST_CASE("merge inverts partition on random shapes") {
  SplitRng rng(11);
  ad::NoGradGuard guard;
  for (int trial = 0; trial < 50; ++trial) {
    const int ws = static_cast<int>(rng.uniform_int(1, 4));
    const int64_t n = rng.uniform_int(1, 2);
    const int64_t c = rng.uniform_int(1, 6);
    const int64_t h = ws * rng.uniform_int(1, 5);
    const int64_t w = ws * rng.uniform_int(1, 5);
    ad::Var x(random_tensor({n, c, h, w}, 100 + static_cast<uint64_t>(trial)), false);
    ad::Var round = merge_windows(partition_windows(x, ws), n, c, h, w, ws);
    CHECK(tensors_equal(round.value(), x.value()));
  }
}

TEST_CASE("window count and layout contract") {
  ad::NoGradGuard guard;
  ad::Var x(random_tensor({1, 1, 64, 64}, 12), false);
  ad::Var windows = partition_windows(x, 8);
  CHECK(windows.dim(0) == 64);  // (64/8)^2 windows
  CHECK(windows.dim(1) == 64);  // 8*8 tokens
  // window (0,0) of a coordinate ramp holds exactly rows 0-7, cols 0-7
  Tensor ramp({1, 1, 64, 64});
  for (int64_t y = 0; y < 64; ++y)
    for (int64_t x2 = 0; x2 < 64; ++x2) ramp.at(0, 0, y, x2) = static_cast<double>(y * 64 + x2);
  ad::Var w0 = partition_windows(ad::Var(ramp, false), 8);
  for (int64_t ty = 0; ty < 8; ++ty)
    for (int64_t tx = 0; tx < 8; ++tx)
      CHECK(w0.value().at(0, ty * 8 + tx, 0) == static_cast<double>(ty * 64 + tx));
  CHECK_THROWS_AS(partition_windows(ad::Var(Tensor({1, 1, 6, 6}), false), 4),
                  std::invalid_argument);
}

TEST_CASE("interaction preserves shapes and stays finite") {
  nn::ParamStore store;
  SplitRng rng(13);
  InteractionConfig cfg;
  cfg.window_size = 4;
  cfg.heads = 2;
  InteractionStage stage(store, "bli", 8, cfg, 1, rng);
  ad::NoGradGuard guard;
  ad::Var f1(random_tensor({2, 8, 16, 16}, 14, 0.3), false);
  ad::Var f2(random_tensor({2, 8, 16, 16}, 15, 0.3), false);
  auto [o1, o2] = stage.forward(f1, f2, false);
  CHECK(o1.value().same_shape(f1.value()));
  CHECK(o2.value().same_shape(f2.value()));
  CHECK(all_finite(o1.value()));
  CHECK(all_finite(o2.value()));
  CHECK_THROWS_AS(stage.forward(f1, ad::Var(Tensor({2, 8, 8, 8}), false), false),
                  std::invalid_argument);
}

TEST_CASE("zeroed output projections make the interaction an identity") {
  nn::ParamStore store;
  SplitRng rng(16);
  InteractionConfig cfg;
  cfg.window_size = 4;
  cfg.heads = 2;
  cfg.n_layers = 2;
  InteractionStage stage(store, "bli", 8, cfg, 1, rng);
  for (auto& [name, v] : store.params()) {
    const bool residual_out = name.find(".attn.out.") != std::string::npos ||
                              name.find(".ff_out.") != std::string::npos;
    if (residual_out) const_cast<ad::Var&>(v).mutable_value().fill(0.0);
  }
  ad::NoGradGuard guard;
  ad::Var f1(random_tensor({1, 8, 8, 8}, 17, 0.3), false);
  ad::Var f2(random_tensor({1, 8, 8, 8}, 18, 0.3), false);
  auto [o1, o2] = stage.forward(f1, f2, false);
  CHECK(tensors_equal(o1.value(), f1.value()));
  CHECK(tensors_equal(o2.value(), f2.value()));
}

TEST_CASE("interaction is windowed: perturbations stay inside their window") {
  nn::ParamStore store;
  SplitRng rng(19);
  InteractionConfig cfg;
  cfg.window_size = 4;
  cfg.heads = 2;
  InteractionStage stage(store, "bli", 8, cfg, 1, rng);
  ad::NoGradGuard guard;
  Tensor base = random_tensor({1, 8, 16, 16}, 20, 0.3);
  Tensor f2 = random_tensor({1, 8, 16, 16}, 21, 0.3);
  auto [o1a, o2a] = stage.forward(ad::Var(base, false), ad::Var(f2, false), false);

  Tensor poked = base;
  poked.at(0, 3, 5, 6) += 1.0;  // inside window (1,1) for ws=4
  auto [o1b, o2b] = stage.forward(ad::Var(poked, false), ad::Var(f2, false), false);

  for (int64_t c = 0; c < 8; ++c)
    for (int64_t y = 0; y < 16; ++y)
      for (int64_t x = 0; x < 16; ++x) {
        const bool same_window = (y / 4 == 1) && (x / 4 == 1);
        const bool changed1 = o1a.value().at(0, c, y, x) != o1b.value().at(0, c, y, x);
        const bool changed2 = o2a.value().at(0, c, y, x) != o2b.value().at(0, c, y, x);
        if (!same_window) {
          CHECK_FALSE(changed1);
          CHECK_FALSE(changed2);
        }
      }
}

TEST_CASE("window order permutation commutes with interaction") {
  nn::ParamStore store;
  SplitRng rng(22);
  InteractionConfig cfg;
  cfg.window_size = 4;
  cfg.heads = 2;
  InteractionStage stage(store, "bli", 8, cfg, 1, rng);
  ad::NoGradGuard guard;
  // swapping two windows of the input swaps the corresponding outputs
  Tensor f1 = random_tensor({1, 8, 8, 16}, 23, 0.3);
  Tensor f2 = random_tensor({1, 8, 8, 16}, 24, 0.3);
  auto swap_windows = [](const Tensor& t) {
    Tensor s = t;  // swap window (0,0) with window (0,1), ws=4
    for (int64_t c = 0; c < t.dim(1); ++c)
      for (int64_t y = 0; y < 4; ++y)
        for (int64_t x = 0; x < 4; ++x)
          std::swap(s.at(0, c, y, x), s.at(0, c, y, x + 4));
    return s;
  };
  auto [a1, a2] = stage.forward(ad::Var(f1, false), ad::Var(f2, false), false);
  auto [b1, b2] = stage.forward(ad::Var(swap_windows(f1), false),
                                ad::Var(swap_windows(f2), false), false);
  CHECK(tensors_equal(swap_windows(a1.value()), b1.value()));
  CHECK(tensors_equal(swap_windows(a2.value()), b2.value()));
}

TEST_CASE("projection fuses to 128 channels with temporal 1 first") {
  nn::ParamStore store;
  InteractionConfig icfg;
  icfg.window_size = 4;
  Encoder enc = make_tiny_encoder(store, icfg, false, false);
  ad::NoGradGuard guard;
  ad::Var img1(random_tensor({1, 3, 64, 64}, 25, 0.2), false);
  ad::Var img2(random_tensor({1, 3, 64, 64}, 26, 0.2), false);
  FeaturePyramid p1 = enc.extract_features(img1, false);
  FeaturePyramid p2 = enc.extract_features(img2, false);
  FusedFeatures fused = enc.project_and_fuse(p1, p2, false);
  for (int j = 0; j < 4; ++j) {
    CHECK(fused.z[static_cast<size_t>(j)].dim(1) == 128);
    CHECK(fused.z[static_cast<size_t>(j)].dim(2) ==
          p1.levels[static_cast<size_t>(j)].dim(2));  // spatial size unchanged
  }
  // zero the temporal-2 stream: last 64 channels must become bias-only
  FeaturePyramid zeroed = p2;
  for (int j = 0; j < 4; ++j) {
    Tensor z(p2.levels[static_cast<size_t>(j)].value().shape());
    zeroed.levels[static_cast<size_t>(j)] = ad::Var(z, false);
  }
  FusedFeatures fz = enc.project_and_fuse(p1, zeroed, false);
  for (int j = 0; j < 4; ++j) {
    const Tensor& a = fused.z[static_cast<size_t>(j)].value();
    const Tensor& b = fz.z[static_cast<size_t>(j)].value();
    for (int64_t c = 0; c < 64; ++c)
      for (int64_t y = 0; y < a.dim(2); ++y)
        for (int64_t x = 0; x < a.dim(3); ++x) CHECK(a.at(0, c, y, x) == b.at(0, c, y, x));
    // bias-only constant per channel on the zeroed half
    for (int64_t c = 64; c < 128; ++c) {
      const double v0 = b.at(0, c, 0, 0);
      for (int64_t y = 0; y < b.dim(2); ++y)
        for (int64_t x = 0; x < b.dim(3); ++x) CHECK(b.at(0, c, y, x) == v0);
    }
  }
}

TEST_CASE("edge feature convolution") {
  nn::ParamStore store;
  InteractionConfig icfg;
  icfg.window_size = 4;
  Encoder enc = make_tiny_encoder(store, icfg, false, true);
  ad::NoGradGuard guard;

  SUBCASE("shape is preserved") {
    ad::Var x0(random_tensor({1, 3, 64, 64}, 27), false);
    ad::Var z0 = enc.learn_edge_features(x0);
    CHECK(z0.dim(1) == 3);
    CHECK(z0.dim(2) == 64);
    CHECK(z0.dim(3) == 64);
  }

  SUBCASE("zero input gives a bias-only constant output") {
    ad::Var x0(Tensor({1, 3, 16, 16}), false);
    Tensor z0 = enc.learn_edge_features(x0).value();
    for (int64_t c = 0; c < 3; ++c) {
      const double v = z0.at(0, c, 0, 0);
      for (int64_t i = 0; i < 256; ++i) CHECK(z0.data()[c * 256 + i] == v);
    }
  }

  SUBCASE("identity-initialized kernel reproduces the input") {
    ad::Var* w = store.find_param("edge.conv.weight");
    ad::Var* b = store.find_param("edge.conv.bias");
    REQUIRE(w != nullptr);
    w->mutable_value().fill(0.0);
    b->mutable_value().fill(0.0);
    for (int64_t c = 0; c < 3; ++c) w->mutable_value().at(c, c, 3, 3) = 1.0;  // center tap
    Tensor in = random_tensor({1, 3, 16, 16}, 28);
    Tensor out = enc.learn_edge_features(ad::Var(in, false)).value();
    CHECK(tensors_equal(in, out));
  }
}

TEST_CASE("non-local interaction ablation hook") {
  nn::ParamStore store;
  SplitRng rng(60);
  InteractionConfig cfg;
  cfg.non_local = true;
  cfg.input_size = 64;
  cfg.heads = 2;
  InteractionStage stage(store, "bli", 8, cfg, 1, rng);  // level 1 of 64 px -> 16x16 tokens
  ad::NoGradGuard guard;
  Tensor f1({1, 8, 16, 16}), f2({1, 8, 16, 16});
  SplitRng vals(61);
  for (int64_t i = 0; i < f1.numel(); ++i) {
    f1[i] = vals.normal();
    f2[i] = vals.normal();
  }
  auto [o1, o2] = stage.forward(ad::Var(f1, false), ad::Var(f2, false), false);
  CHECK(o1.value().same_shape(f1));
  CHECK(o2.value().same_shape(f2));
  // global attention couples distant positions: a far-corner perturbation
  // must be able to reach the opposite corner
  Tensor poked = f1;
  poked.at(0, 0, 0, 0) += 1.0;
  auto [p1, p2] = stage.forward(ad::Var(poked, false), ad::Var(f2, false), false);
  bool far_changed = false;
  for (int64_t c = 0; c < 8; ++c)
    far_changed = far_changed || p1.value().at(0, c, 15, 15) != o1.value().at(0, c, 15, 15);
  CHECK(far_changed);
}

TEST_CASE("externally supplied backbone weights load by prefix") {
  // train-free wiring test: copy backbone.* of one model into another
  nn::ParamStore donor_store;
  SplitRng donor_rng(70);
  Encoder donor(donor_store, BackboneKind::tiny, InteractionConfig{}, false, false, donor_rng);
  checkpoint::Manifest manifest;
  const auto path = std::filesystem::temp_directory_path() / "sili_backbone_donor.ckpt";
  checkpoint::save(path, donor_store, nullptr, manifest);

  nn::ParamStore store;
  SplitRng rng(71);
  Encoder enc(store, BackboneKind::tiny, InteractionConfig{}, false, false, rng);
  const int applied = checkpoint::load_prefix(path, store, "backbone.");
  CHECK(applied > 0);
  for (const auto& [name, v] : store.params())
    if (name.rfind("backbone.", 0) == 0) {
      const ad::Var* d = donor_store.find_param(name);
      REQUIRE(d != nullptr);
      bool equal = true;
      for (int64_t i = 0; i < v.value().numel(); ++i)
        equal = equal && v.value()[i] == d->value()[i];
      CHECK(equal);
    }
  std::filesystem::remove(path);
}
