#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sili/autodiff.hpp"
#include "sili/rng.hpp"
#include "sili/tensor.hpp"

namespace sili::nn {

/// Owns every learnable parameter and persistent buffer (normalization
/// statistics) of a model, keyed by a stable dotted name. Checkpointing and
/// the optimizer iterate this store; layers keep handles into it.
class ParamStore {
 public:
  ad::Var param(const std::string& name, Tensor init);
  Tensor& buffer(const std::string& name, Tensor init);

  const std::vector<std::pair<std::string, ad::Var>>& params() const { return params_; }
  std::map<std::string, Tensor>& buffers() { return buffers_; }
  const std::map<std::string, Tensor>& buffers() const { return buffers_; }

  ad::Var* find_param(const std::string& name);
  void zero_grad();
  int64_t total_parameters() const;

 private:
  std::vector<std::pair<std::string, ad::Var>> params_;
  std::map<std::string, Tensor> buffers_;
};

Tensor normal_init(std::vector<int64_t> shape, double stddev, SplitRng& rng);
Tensor kaiming_init(std::vector<int64_t> shape, int64_t fan_in, SplitRng& rng);

struct Conv2d {
  ad::Var w, b;
  int stride = 1, pad = 0;

  Conv2d() = default;
  Conv2d(ParamStore& store, const std::string& prefix, int in_c, int out_c, int kernel,
         int stride, int pad, bool bias, SplitRng& rng);
  ad::Var forward(const ad::Var& x) const { return ad::conv2d(x, w, b, stride, pad); }
};

struct BatchNorm {
  ad::Var gamma, beta;
  Tensor* running_mean = nullptr;
  Tensor* running_var = nullptr;
  double momentum = 0.1;
  double eps = 1e-5;

  BatchNorm() = default;
  BatchNorm(ParamStore& store, const std::string& prefix, int64_t channels);
  ad::Var forward(const ad::Var& x, bool training) const {
    return ad::batch_norm(x, gamma, beta, *running_mean, *running_var, training, momentum, eps);
  }
};

struct Linear {
  ad::Var w;  // [in, out]
  ad::Var b;  // [out]

  Linear() = default;
  Linear(ParamStore& store, const std::string& prefix, int64_t in, int64_t out, SplitRng& rng);
  /// x: [M, in] -> [M, out]
  ad::Var forward(const ad::Var& x) const { return ad::add_bias_cols(ad::matmul(x, w), b); }
};

struct LayerNorm {
  ad::Var gamma, beta;
  double eps = 1e-5;

  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& prefix, int64_t dim);
  ad::Var forward(const ad::Var& x) const { return ad::layer_norm(x, gamma, beta, eps); }
};

/// Multi-head self-attention over [B, T, C] token batches. The query/key
/// input may differ from the value input so positional terms can be applied
/// to q/k only.
struct MultiheadSelfAttention {
  Linear proj_q, proj_k, proj_v, proj_out;
  int heads = 1;

  MultiheadSelfAttention() = default;
  MultiheadSelfAttention(ParamStore& store, const std::string& prefix, int64_t dim, int heads,
                         SplitRng& rng);
  ad::Var forward(const ad::Var& qk_in, const ad::Var& v_in) const;
};

/// Pre-normalization transformer layer: attention and feed-forward branches
/// are residual, so zeroed output projections make the layer an exact
/// identity. The positional term enters the attention q/k path only.
struct TransformerLayer {
  LayerNorm ln_attn, ln_ff;
  MultiheadSelfAttention attn;
  Linear ff_in, ff_out;

  TransformerLayer() = default;
  TransformerLayer(ParamStore& store, const std::string& prefix, int64_t dim, int heads,
                   int64_t ff_dim, SplitRng& rng);
  ad::Var forward(const ad::Var& x, const ad::Var& pos_embed) const;
};

/// SGD with classical momentum: v <- mu*v + (g + wd*w); w <- w - lr*v.
struct Sgd {
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::map<std::string, Tensor> velocity;

  void step(ParamStore& store, double lr);
};

}  // namespace sili::nn
