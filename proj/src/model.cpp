#include "sili/model.hpp"

namespace sili::model {

ChangeModel::BaseHead::BaseHead(nn::ParamStore& store, const std::string& prefix, int in_c,
                                SplitRng& rng) {
  conv1 = nn::Conv2d(store, prefix + ".conv1", in_c, 64, 3, 1, 1, true, rng);
  bn1 = nn::BatchNorm(store, prefix + ".bn1", 64);
  conv2 = nn::Conv2d(store, prefix + ".conv2", 64, 64, 3, 1, 1, true, rng);
  bn2 = nn::BatchNorm(store, prefix + ".bn2", 64);
  conv3 = nn::Conv2d(store, prefix + ".conv3", 64, 2, 3, 1, 1, true, rng);
}

ad::Var ChangeModel::BaseHead::forward(const ad::Var& x, bool training) const {
  ad::Var y = ad::relu(bn1.forward(conv1.forward(x), training));
  y = ad::relu(bn2.forward(conv2.forward(y), training));
  return conv3.forward(y);
}

ChangeModel::ChangeModel(const ModelConfig& cfg) : cfg_(cfg), dropout_rng_(cfg.init_seed, 0xD0) {
  SplitRng rng(cfg.init_seed, 0xB0DE);
  const bool is_sili = cfg_.variant == Variant::sili;
  const bool interaction = is_sili && cfg_.interaction_enabled;
  const bool edge_clues = is_sili && cfg_.edge_clues;
  encoder_ = std::make_unique<encoder::Encoder>(store_, cfg_.backbone, cfg_.interaction,
                                                interaction, edge_clues, rng);
  if (is_sili) {
    inr_ = std::make_unique<decoder::InrDecoder>(store_, edge_clues, rng);
  } else {
    base_ = std::make_unique<BaseHead>(store_, "base",
                                       8 * encoder::Encoder::kFusedPerTemporal, rng);
  }
}

const decoder::GatherPlan& ChangeModel::plan_for(int64_t h, int64_t w) {
  auto key = std::make_pair(h, w);
  auto it = plans_.find(key);
  if (it != plans_.end()) return it->second;
  coordspace::GridSpec hr(h, w);
  std::array<coordspace::GridSpec, 4> level_grids{
      coordspace::GridSpec(h / 4, w / 4), coordspace::GridSpec(h / 8, w / 8),
      coordspace::GridSpec(h / 16, w / 16), coordspace::GridSpec(h / 32, w / 32)};
  decoder::QueryGrid queries = decoder::build_query_grid(hr, cfg_.ds);
  return plans_.emplace(key, decoder::make_gather_plan(queries, level_grids, hr)).first->second;
}

ad::Var ChangeModel::forward_logits_native(const ad::Var& pre, const ad::Var& post,
                                           const ad::Var& x0) {
  detail::require(pre.value().same_shape(post.value()),
                  "forward: temporal inputs must have the same shape");
  const bool is_sili = cfg_.variant == Variant::sili;
  if (is_sili) {
    auto [p1, p2] = cfg_.interaction_enabled
                        ? encoder_->extract_interactive(pre, post, training_, &dropout_rng_)
                        : std::pair{encoder_->extract_features(pre, training_),
                                    encoder_->extract_features(post, training_)};
    encoder::FusedFeatures fused = encoder_->project_and_fuse(p1, p2, training_);
    if (cfg_.edge_clues) {
      detail::require(x0.defined(), "forward: edge input required by this configuration");
      fused.z0 = encoder_->learn_edge_features(x0);
    }
    const auto& plan = plan_for(pre.dim(2), pre.dim(3));
    return inr_->decode_logits(fused, plan, training_);
  }
  encoder::FeaturePyramid p1 = encoder_->extract_features(pre, training_);
  encoder::FeaturePyramid p2 = encoder_->extract_features(post, training_);
  encoder::FusedFeatures fused = encoder_->project_and_fuse(p1, p2, training_);
  const int64_t h1 = fused.z[0].dim(2), w1 = fused.z[0].dim(3);
  std::vector<ad::Var> parts{fused.z[0]};
  for (int level = 1; level < 4; ++level)
    parts.push_back(ad::upsample_nearest(fused.z[static_cast<size_t>(level)],
                                         static_cast<int>(h1), static_cast<int>(w1)));
  return base_->forward(ad::concat(parts, 1), training_);
}

ad::Var ChangeModel::forward_logits_hr(const ad::Var& pre, const ad::Var& post,
                                       const ad::Var& x0) {
  ad::Var native = forward_logits_native(pre, post, x0);
  const int64_t h = pre.dim(2), w = pre.dim(3);
  if (native.dim(2) == h && native.dim(3) == w) return native;
  return ad::upsample_bilinear(native, static_cast<int>(h), static_cast<int>(w));
}

Tensor ChangeModel::forward_scores(const ImageTensor& pre, const ImageTensor& post) {
  ad::NoGradGuard guard;
  const bool was_training = training_;
  training_ = false;
  ad::Var pre_v(batch_images({&pre}), false);
  ad::Var post_v(batch_images({&post}), false);
  ad::Var x0;
  if (cfg_.variant == Variant::sili && cfg_.edge_clues)
    x0 = ad::Var(edge_input(pre, post).reshaped({1, 3, pre.height, pre.width}), false);
  ad::Var native = forward_logits_native(pre_v, post_v, x0);
  training_ = was_training;

  Tensor probs = ad::softmax_channels_tensor(native.value());
  Tensor scores = probs.reshaped({2, native.dim(2), native.dim(3)});
  return decoder::upsample_scores(scores, pre.height, pre.width);
}

Tensor ChangeModel::edge_input(const ImageTensor& a, const ImageTensor& b) const {
  return edges::edge_clues(a, b, cfg_.canny);
}

Tensor batch_images(const std::vector<const ImageTensor*>& images) {
  detail::require(!images.empty(), "batch_images: empty batch");
  const int h = images[0]->height, w = images[0]->width, c = images[0]->channels;
  Tensor out({static_cast<int64_t>(images.size()), c, h, w});
  for (size_t i = 0; i < images.size(); ++i) {
    detail::require(images[i]->height == h && images[i]->width == w && images[i]->channels == c,
                    "batch_images: mixed shapes in one batch");
    Tensor chw = images[i]->to_chw();
    std::copy(chw.data(), chw.data() + chw.numel(),
              out.data() + static_cast<int64_t>(i) * chw.numel());
  }
  return out;
}

}  // namespace sili::model
