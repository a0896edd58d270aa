#pragma once

#include <map>
#include <memory>

#include "sili/decoder.hpp"
#include "sili/edges.hpp"
#include "sili/encoder.hpp"
#include "sili/synthesis.hpp"

namespace sili::model {

enum class Variant { sili, base };

struct ModelConfig {
  Variant variant = Variant::sili;
  encoder::BackboneKind backbone = encoder::BackboneKind::reference;
  encoder::InteractionConfig interaction;
  bool interaction_enabled = true;  // only meaningful for the sili variant
  int ds = 2;
  bool edge_clues = true;
  bool edges_see_swapped = false;  // edge clues read the pre-swap LR image by default
  edges::CannyConfig canny;
  uint64_t init_seed = 1;
  std::string backbone_weights;  // optional checkpoint to seed backbone.* from
};

/// The end-to-end change network. The sili variant runs edges -> encoder
/// (+interaction) -> fusion -> coordinate-query decoding; the base variant
/// runs the plain Siamese encoder into a convolutional head over
/// concatenated levels.
class ChangeModel {
 public:
  explicit ChangeModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  encoder::Encoder& encoder() { return *encoder_; }

  void set_training(bool t) { training_ = t; }
  bool training() const { return training_; }

  /// Unnormalized HR change scores [N, 2, H, W] from prepared batched
  /// inputs. x0 is the handcrafted edge batch [N, 3, H, W]; pass an
  /// undefined Var when edge clues are disabled or for the base variant.
  ad::Var forward_logits_hr(const ad::Var& pre, const ad::Var& post, const ad::Var& x0);

  /// Change logits at decoder-native resolution (query grid for sili,
  /// level-1 grid for base).
  ad::Var forward_logits_native(const ad::Var& pre, const ad::Var& post, const ad::Var& x0);

  /// Eval path for one prepared pair: normalized score map [2, H, W]
  /// (softmax at native resolution, bilinear upsampling, renormalization).
  Tensor forward_scores(const ImageTensor& pre, const ImageTensor& post);

  /// Handcrafted edge input for one prepared pair (sum of per-channel Canny
  /// maps of both images).
  Tensor edge_input(const ImageTensor& a, const ImageTensor& b) const;

  int64_t parameter_count() const { return store_.total_parameters(); }

 private:
  const decoder::GatherPlan& plan_for(int64_t h, int64_t w);

  struct BaseHead {
    nn::Conv2d conv1, conv2, conv3;
    nn::BatchNorm bn1, bn2;
    BaseHead() = default;
    BaseHead(nn::ParamStore& store, const std::string& prefix, int in_c, SplitRng& rng);
    ad::Var forward(const ad::Var& x, bool training) const;
  };

  ModelConfig cfg_;
  nn::ParamStore store_;
  std::unique_ptr<encoder::Encoder> encoder_;
  std::unique_ptr<decoder::InrDecoder> inr_;
  std::unique_ptr<BaseHead> base_;
  std::map<std::pair<int64_t, int64_t>, decoder::GatherPlan> plans_;
  SplitRng dropout_rng_{0};
  bool training_ = true;
};

/// Stacks prepared images into a batched [N, 3, H, W] input tensor.
Tensor batch_images(const std::vector<const ImageTensor*>& images);

}  // namespace sili::model
