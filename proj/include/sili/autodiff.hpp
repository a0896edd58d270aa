#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "sili/rng.hpp"
#include "sili/tensor.hpp"

namespace sili::ad {

/// One vertex of the backward tape. Values and gradients are double
/// precision throughout; the tape is a DAG ordered by creation id.
struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  int64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Tensor& grad_out)> backward_fn;

  void ensure_grad() {
    if (grad.numel() != value.numel()) grad = Tensor(value.shape());
  }
};

/// Handle to a tape node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void zero_grad() {
    if (node_) {
      node_->ensure_grad();
      node_->grad.fill(0.0);
    }
  }
  std::shared_ptr<Node> node() const { return node_; }

  const std::vector<int64_t>& shape() const { return node_->value.shape(); }
  int64_t dim(int i) const { return node_->value.dim(i); }

 private:
  friend Var make_op(Tensor value, std::vector<Var> parents,
                     std::function<void(const Tensor&)> backward_fn);
  std::shared_ptr<Node> node_;
};

/// While a guard is alive, ops record no tape (pure forward evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

/// Runs the tape backward from a scalar root, accumulating into the grad of
/// every node that requires it.
void backward(const Var& root);

// ---- elementwise / scalar ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var relu(const Var& a);

// ---- shape ----
Var reshape(const Var& a, std::vector<int64_t> shape);
Var permute(const Var& a, const std::vector<int>& perm);
Var concat(const std::vector<Var>& parts, int axis);
Var slice(const Var& a, int axis, int64_t start, int64_t len);

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);            // [M,K] x [K,N]
Var bmm(const Var& a, const Var& b);               // [B,M,K] x [B,K,N]
Var add_bias_cols(const Var& a, const Var& bias);  // [M,N] + [N]
Var broadcast_add(const Var& a, const Var& b);     // [B,T,C] + [T,C]

// ---- convolution / pooling / resampling ----
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var maxpool2d(const Var& x, int kernel, int stride, int pad);
Var upsample_bilinear(const Var& x, int out_h, int out_w);
Var upsample_nearest(const Var& x, int out_h, int out_w);

/// out[n,c,i,j] = x[n,c,rows[i],cols[j]]; backward scatter-adds.
Var gather_spatial(const Var& x, const std::vector<int64_t>& rows,
                   const std::vector<int64_t>& cols);

// ---- normalization / activation over structured axes ----
/// Normalizes channel axis 1 of [N,C,...] over all remaining axes. In
/// training mode uses batch statistics and updates the running tensors in
/// place; in eval mode uses the running statistics.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
               Tensor& running_var, bool training, double momentum, double eps);

/// Normalizes the last axis.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps);

Var softmax_lastdim(const Var& a);

Var dropout(const Var& a, double p, SplitRng& rng, bool training);

// ---- reductions / losses ----
Var mean_all(const Var& a);

/// Mean two-class (or K-class) cross entropy from unnormalized scores.
/// logits: [N,K,H,W]; targets: [N,H,W] with integer class values.
Var cross_entropy_logits(const Var& logits, const Tensor& targets);

/// Plain-tensor softmax over axis 1 of [N,K,H,W] (no tape).
Tensor softmax_channels_tensor(const Tensor& logits);

}  // namespace sili::ad
