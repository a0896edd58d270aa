#pragma once

#include <array>
#include <memory>
#include <vector>

#include "sili/nn.hpp"

namespace sili::encoder {

/// Multi-level features of one temporal image: level j (1-based) has shape
/// [N, C_j, H/2^(j+1), W/2^(j+1)].
struct FeaturePyramid {
  std::array<ad::Var, 4> levels;
};

enum class BackboneKind { reference, tiny };

/// Levels are 1-based. When `non_local` is set the windowed attention is
/// replaced by one global window per level (ablation hook); that mode needs
/// `input_size` to size the positional tables.
struct InteractionConfig {
  int window_size = 8;
  std::vector<int> levels = {1, 2, 3};
  int n_layers = 1;  // transformer layers per interaction stage
  int heads = 4;
  double embed_dropout = 0.0;
  bool non_local = false;
  int input_size = 0;
};

/// Two-conv residual block with an optional projection shortcut.
struct BasicBlock {
  nn::Conv2d conv1, conv2;
  nn::BatchNorm bn1, bn2;
  nn::Conv2d short_conv;
  nn::BatchNorm short_bn;
  bool projected_shortcut = false;

  BasicBlock() = default;
  BasicBlock(nn::ParamStore& store, const std::string& prefix, int in_c, int out_c, int stride,
             SplitRng& rng);
  ad::Var forward(const ad::Var& x, bool training) const;
};

/// Four-stage residual backbone applied stage by stage so bitemporal
/// interaction can refine each level before the next stage consumes it.
class Backbone {
 public:
  Backbone() = default;
  Backbone(nn::ParamStore& store, const std::string& prefix, BackboneKind kind, SplitRng& rng);

  ad::Var stem(const ad::Var& x, bool training) const;
  ad::Var stage(int level, const ad::Var& x, bool training) const;  // level in 1..4
  const std::array<int, 4>& widths() const { return widths_; }
  BackboneKind kind() const { return kind_; }

 private:
  BackboneKind kind_ = BackboneKind::tiny;
  std::array<int, 4> widths_{};
  nn::Conv2d stem_conv_;
  nn::BatchNorm stem_bn_;
  bool stem_pool_ = false;
  std::array<std::vector<BasicBlock>, 4> stages_;
};

/// [N,C,H,W] -> [N*nh*nw, ws*ws, C] with windows in row-major order and
/// tokens in row-major order inside each window. H and W must divide by ws.
ad::Var partition_windows(const ad::Var& feat, int ws);

/// Exact inverse of partition_windows for the given original geometry.
ad::Var merge_windows(const ad::Var& windows, int64_t n, int64_t c, int64_t h, int64_t w, int ws);

/// One bitemporal interaction stage: window-partitions both temporal maps,
/// stacks the 2*ws^2 window tokens, adds the shared learnable positional
/// embedding (temporal slot + within-window position) on the attention q/k
/// path, and runs the transformer layers jointly.
class InteractionStage {
 public:
  InteractionStage() = default;
  InteractionStage(nn::ParamStore& store, const std::string& prefix, int channels,
                   const InteractionConfig& cfg, int level, SplitRng& rng);

  std::pair<ad::Var, ad::Var> forward(const ad::Var& f1, const ad::Var& f2, bool training,
                                      SplitRng* dropout_rng = nullptr) const;

 private:
  ad::Var pos_embed_;
  std::vector<nn::TransformerLayer> layers_;
  int window_size_ = 8;
  double embed_dropout_ = 0.0;
  bool non_local_ = false;
};

/// Fused bitemporal features: per level [N, 2C, Hj, Wj] with C = 64, plus
/// the learned edge features Z0 [N, 3, H, W] when edge clues are enabled.
struct FusedFeatures {
  std::array<ad::Var, 4> z;
  ad::Var z0;
};

class Encoder {
 public:
  Encoder(nn::ParamStore& store, BackboneKind kind, const InteractionConfig& interaction,
          bool interaction_enabled, bool edge_clues_enabled, SplitRng& rng);

  /// Siamese feature extraction for one temporal image, no interaction.
  FeaturePyramid extract_features(const ad::Var& img, bool training) const;

  /// Stage-interleaved extraction of both temporals with bitemporal local
  /// interaction at the configured levels. dropout_rng drives the optional
  /// embedding dropout and may be null when it is disabled.
  std::pair<FeaturePyramid, FeaturePyramid> extract_interactive(
      const ad::Var& img1, const ad::Var& img2, bool training,
      SplitRng* dropout_rng = nullptr) const;

  /// Per-level per-temporal 1x1 projection to 64 channels, then channel
  /// concatenation (temporal 1 first).
  FusedFeatures project_and_fuse(const FeaturePyramid& p1, const FeaturePyramid& p2,
                                 bool training) const;

  /// 7x7 size-preserving convolution over the handcrafted edge map.
  ad::Var learn_edge_features(const ad::Var& x0) const;

  const Backbone& backbone() const { return backbone_; }
  bool has_interaction_at(int level) const;
  static constexpr int kFusedPerTemporal = 64;

 private:
  Backbone backbone_;
  InteractionConfig interaction_;
  bool interaction_enabled_ = false;
  bool edge_clues_enabled_ = false;
  std::array<std::unique_ptr<InteractionStage>, 4> stages_;
  std::array<nn::Conv2d, 4> proj_t1_, proj_t2_;
  nn::Conv2d edge_conv_;
};

}  // namespace sili::encoder
