#include "sili/encoder.hpp"

#include <cmath>

namespace sili::encoder {

BasicBlock::BasicBlock(nn::ParamStore& store, const std::string& prefix, int in_c, int out_c,
                       int stride, SplitRng& rng) {
  conv1 = nn::Conv2d(store, prefix + ".conv1", in_c, out_c, 3, stride, 1, false, rng);
  bn1 = nn::BatchNorm(store, prefix + ".bn1", out_c);
  conv2 = nn::Conv2d(store, prefix + ".conv2", out_c, out_c, 3, 1, 1, false, rng);
  bn2 = nn::BatchNorm(store, prefix + ".bn2", out_c);
  projected_shortcut = stride != 1 || in_c != out_c;
  if (projected_shortcut) {
    short_conv = nn::Conv2d(store, prefix + ".short_conv", in_c, out_c, 1, stride, 0, false, rng);
    short_bn = nn::BatchNorm(store, prefix + ".short_bn", out_c);
  }
}

ad::Var BasicBlock::forward(const ad::Var& x, bool training) const {
  ad::Var y = ad::relu(bn1.forward(conv1.forward(x), training));
  y = bn2.forward(conv2.forward(y), training);
  ad::Var skip = projected_shortcut ? short_bn.forward(short_conv.forward(x), training) : x;
  return ad::relu(ad::add(y, skip));
}

Backbone::Backbone(nn::ParamStore& store, const std::string& prefix, BackboneKind kind,
                   SplitRng& rng)
    : kind_(kind) {
  if (kind == BackboneKind::reference) {
    widths_ = {64, 128, 256, 512};
    stem_conv_ = nn::Conv2d(store, prefix + ".stem.conv", 3, 64, 7, 2, 3, false, rng);
    stem_bn_ = nn::BatchNorm(store, prefix + ".stem.bn", 64);
    stem_pool_ = true;
    const int blocks = 2;
    int in_c = 64;
    for (int level = 1; level <= 4; ++level) {
      const int out_c = widths_[static_cast<size_t>(level - 1)];
      const int stride0 = level == 1 ? 1 : 2;
      for (int b = 0; b < blocks; ++b) {
        stages_[static_cast<size_t>(level - 1)].emplace_back(
            store, prefix + ".stage" + std::to_string(level) + ".block" + std::to_string(b),
            b == 0 ? in_c : out_c, out_c, b == 0 ? stride0 : 1, rng);
      }
      in_c = out_c;
    }
  } else {
    widths_ = {8, 16, 32, 64};
    stem_conv_ = nn::Conv2d(store, prefix + ".stem.conv", 3, 8, 3, 2, 1, false, rng);
    stem_bn_ = nn::BatchNorm(store, prefix + ".stem.bn", 8);
    stem_pool_ = false;
    int in_c = 8;
    for (int level = 1; level <= 4; ++level) {
      const int out_c = widths_[static_cast<size_t>(level - 1)];
      stages_[static_cast<size_t>(level - 1)].emplace_back(
          store, prefix + ".stage" + std::to_string(level) + ".block0", in_c, out_c, 2, rng);
      in_c = out_c;
    }
  }
}

ad::Var Backbone::stem(const ad::Var& x, bool training) const {
  detail::require(x.value().ndim() == 4 && x.dim(1) == 3, "backbone: expects [N,3,H,W] input");
  detail::require(x.dim(2) % 32 == 0 && x.dim(3) % 32 == 0,
                  "backbone: input size must divide by 32");
  ad::Var y = ad::relu(stem_bn_.forward(stem_conv_.forward(x), training));
  if (stem_pool_) y = ad::maxpool2d(y, 3, 2, 1);
  return y;
}

ad::Var Backbone::stage(int level, const ad::Var& x, bool training) const {
  detail::require(level >= 1 && level <= 4, "backbone: level out of range");
  ad::Var y = x;
  for (const BasicBlock& block : stages_[static_cast<size_t>(level - 1)])
    y = block.forward(y, training);
  return y;
}

ad::Var partition_windows(const ad::Var& feat, int ws) {
  detail::require(feat.value().ndim() == 4, "partition_windows: expects [N,C,H,W]");
  detail::require(ws >= 1, "partition_windows: window size must be >= 1");
  const int64_t n = feat.dim(0), c = feat.dim(1), h = feat.dim(2), w = feat.dim(3);
  detail::require(h % ws == 0 && w % ws == 0,
                  "partition_windows: feature size must divide by the window size");
  const int64_t nh = h / ws, nw = w / ws;
  ad::Var y = ad::reshape(feat, {n, c, nh, ws, nw, ws});
  y = ad::permute(y, {0, 2, 4, 3, 5, 1});  // [N, nh, nw, wsy, wsx, C]
  return ad::reshape(y, {n * nh * nw, static_cast<int64_t>(ws) * ws, c});
}

ad::Var merge_windows(const ad::Var& windows, int64_t n, int64_t c, int64_t h, int64_t w,
                      int ws) {
  const int64_t nh = h / ws, nw = w / ws;
  detail::require(windows.value().ndim() == 3 && windows.dim(0) == n * nh * nw &&
                      windows.dim(1) == static_cast<int64_t>(ws) * ws && windows.dim(2) == c,
                  "merge_windows: window stack does not match the target geometry");
  ad::Var y = ad::reshape(windows, {n, nh, nw, ws, ws, c});
  y = ad::permute(y, {0, 5, 1, 3, 2, 4});  // [N, C, nh, wsy, nw, wsx]
  return ad::reshape(y, {n, c, h, w});
}

InteractionStage::InteractionStage(nn::ParamStore& store, const std::string& prefix,
                                   int channels, const InteractionConfig& cfg, int level,
                                   SplitRng& rng)
    : window_size_(cfg.window_size), embed_dropout_(cfg.embed_dropout),
      non_local_(cfg.non_local) {
  int64_t tokens;
  if (non_local_) {
    detail::require(cfg.input_size > 0, "non-local interaction needs input_size to size the PE");
    const int64_t side = cfg.input_size >> (level + 1);
    tokens = 2 * side * side;
  } else {
    tokens = 2LL * window_size_ * window_size_;
  }
  pos_embed_ = store.param(prefix + ".pos_embed", nn::normal_init({tokens, channels}, 0.02, rng));
  const int64_t ff_dim = 2LL * channels;
  for (int l = 0; l < cfg.n_layers; ++l)
    layers_.emplace_back(store, prefix + ".layer" + std::to_string(l), channels, cfg.heads,
                         ff_dim, rng);
}

std::pair<ad::Var, ad::Var> InteractionStage::forward(const ad::Var& f1, const ad::Var& f2,
                                                      bool training,
                                                      SplitRng* dropout_rng) const {
  detail::require(f1.value().same_shape(f2.value()),
                  "bitemporal interaction: temporal shapes must match");
  const int64_t n = f1.dim(0), c = f1.dim(1), h = f1.dim(2), w = f1.dim(3);

  ad::Var w1, w2;
  if (non_local_) {
    w1 = ad::reshape(ad::permute(f1, {0, 2, 3, 1}), {n, h * w, c});
    w2 = ad::reshape(ad::permute(f2, {0, 2, 3, 1}), {n, h * w, c});
  } else {
    w1 = partition_windows(f1, window_size_);
    w2 = partition_windows(f2, window_size_);
  }
  ad::Var tokens = ad::concat({w1, w2}, 1);  // [B, 2T, C]
  if (embed_dropout_ > 0.0 && training && dropout_rng)
    tokens = ad::dropout(tokens, embed_dropout_, *dropout_rng, training);
  for (const nn::TransformerLayer& layer : layers_) tokens = layer.forward(tokens, pos_embed_);
  const int64_t t = w1.dim(1);
  ad::Var o1 = ad::slice(tokens, 1, 0, t);
  ad::Var o2 = ad::slice(tokens, 1, t, t);
  if (non_local_) {
    o1 = ad::permute(ad::reshape(o1, {n, h, w, c}), {0, 3, 1, 2});
    o2 = ad::permute(ad::reshape(o2, {n, h, w, c}), {0, 3, 1, 2});
  } else {
    o1 = merge_windows(o1, n, c, h, w, window_size_);
    o2 = merge_windows(o2, n, c, h, w, window_size_);
  }
  return {o1, o2};
}

Encoder::Encoder(nn::ParamStore& store, BackboneKind kind, const InteractionConfig& interaction,
                 bool interaction_enabled, bool edge_clues_enabled, SplitRng& rng)
    : interaction_(interaction),
      interaction_enabled_(interaction_enabled),
      edge_clues_enabled_(edge_clues_enabled) {
  backbone_ = Backbone(store, "backbone", kind, rng);
  if (interaction_enabled_) {
    for (int level : interaction_.levels) {
      detail::require(level >= 1 && level <= 4, "interaction level out of range");
      stages_[static_cast<size_t>(level - 1)] = std::make_unique<InteractionStage>(
          store, "bli.level" + std::to_string(level),
          backbone_.widths()[static_cast<size_t>(level - 1)], interaction_, level, rng);
    }
  }
  for (int level = 1; level <= 4; ++level) {
    const int c = backbone_.widths()[static_cast<size_t>(level - 1)];
    proj_t1_[static_cast<size_t>(level - 1)] = nn::Conv2d(
        store, "proj.level" + std::to_string(level) + ".t1", c, kFusedPerTemporal, 1, 1, 0, true, rng);
    proj_t2_[static_cast<size_t>(level - 1)] = nn::Conv2d(
        store, "proj.level" + std::to_string(level) + ".t2", c, kFusedPerTemporal, 1, 1, 0, true, rng);
  }
  if (edge_clues_enabled_) edge_conv_ = nn::Conv2d(store, "edge.conv", 3, 3, 7, 1, 3, true, rng);
}

bool Encoder::has_interaction_at(int level) const {
  return interaction_enabled_ && stages_[static_cast<size_t>(level - 1)] != nullptr;
}

FeaturePyramid Encoder::extract_features(const ad::Var& img, bool training) const {
  FeaturePyramid p;
  ad::Var y = backbone_.stem(img, training);
  for (int level = 1; level <= 4; ++level) {
    y = backbone_.stage(level, y, training);
    p.levels[static_cast<size_t>(level - 1)] = y;
  }
  return p;
}

std::pair<FeaturePyramid, FeaturePyramid> Encoder::extract_interactive(
    const ad::Var& img1, const ad::Var& img2, bool training, SplitRng* dropout_rng) const {
  FeaturePyramid p1, p2;
  ad::Var y1 = backbone_.stem(img1, training);
  ad::Var y2 = backbone_.stem(img2, training);
  for (int level = 1; level <= 4; ++level) {
    y1 = backbone_.stage(level, y1, training);
    y2 = backbone_.stage(level, y2, training);
    if (has_interaction_at(level)) {
      auto [r1, r2] =
          stages_[static_cast<size_t>(level - 1)]->forward(y1, y2, training, dropout_rng);
      y1 = r1;
      y2 = r2;
    }
    p1.levels[static_cast<size_t>(level - 1)] = y1;
    p2.levels[static_cast<size_t>(level - 1)] = y2;
  }
  return {p1, p2};
}

FusedFeatures Encoder::project_and_fuse(const FeaturePyramid& p1, const FeaturePyramid& p2,
                                        bool training) const {
  (void)training;
  FusedFeatures fused;
  for (int level = 0; level < 4; ++level) {
    const ad::Var& f1 = p1.levels[static_cast<size_t>(level)];
    const ad::Var& f2 = p2.levels[static_cast<size_t>(level)];
    detail::require(f1.value().same_shape(f2.value()),
                    "project_and_fuse: temporal shapes must match");
    ad::Var z1 = proj_t1_[static_cast<size_t>(level)].forward(f1);
    ad::Var z2 = proj_t2_[static_cast<size_t>(level)].forward(f2);
    fused.z[static_cast<size_t>(level)] = ad::concat({z1, z2}, 1);
  }
  return fused;
}

ad::Var Encoder::learn_edge_features(const ad::Var& x0) const {
  detail::require(edge_clues_enabled_, "edge clues are disabled in this configuration");
  return edge_conv_.forward(x0);
}

}  // namespace sili::encoder
