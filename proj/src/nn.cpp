#include "sili/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace sili::nn {

ad::Var ParamStore::param(const std::string& name, Tensor init) {
  for (const auto& [n, v] : params_)
    detail::require(n != name, "ParamStore: duplicate parameter name " + name);
  ad::Var v(std::move(init), /*requires_grad=*/true);
  params_.emplace_back(name, v);
  return v;
}

Tensor& ParamStore::buffer(const std::string& name, Tensor init) {
  auto [it, inserted] = buffers_.emplace(name, std::move(init));
  detail::require(inserted, "ParamStore: duplicate buffer name " + name);
  return it->second;
}

ad::Var* ParamStore::find_param(const std::string& name) {
  for (auto& [n, v] : params_)
    if (n == name) return &v;
  return nullptr;
}

void ParamStore::zero_grad() {
  for (auto& [n, v] : params_) v.zero_grad();
}

int64_t ParamStore::total_parameters() const {
  int64_t total = 0;
  for (const auto& [n, v] : params_) total += v.value().numel();
  return total;
}

Tensor normal_init(std::vector<int64_t> shape, double stddev, SplitRng& rng) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = stddev * rng.normal();
  return t;
}

Tensor kaiming_init(std::vector<int64_t> shape, int64_t fan_in, SplitRng& rng) {
  return normal_init(std::move(shape), std::sqrt(2.0 / static_cast<double>(fan_in)), rng);
}

Conv2d::Conv2d(ParamStore& store, const std::string& prefix, int in_c, int out_c, int kernel,
               int stride_, int pad_, bool bias, SplitRng& rng)
    : stride(stride_), pad(pad_) {
  w = store.param(prefix + ".weight",
                  kaiming_init({out_c, in_c, kernel, kernel},
                               static_cast<int64_t>(in_c) * kernel * kernel, rng));
  if (bias) b = store.param(prefix + ".bias", Tensor({out_c}));
}

BatchNorm::BatchNorm(ParamStore& store, const std::string& prefix, int64_t channels) {
  gamma = store.param(prefix + ".gamma", Tensor::full({channels}, 1.0));
  beta = store.param(prefix + ".beta", Tensor({channels}));
  running_mean = &store.buffer(prefix + ".running_mean", Tensor({channels}));
  running_var = &store.buffer(prefix + ".running_var", Tensor::full({channels}, 1.0));
}

Linear::Linear(ParamStore& store, const std::string& prefix, int64_t in, int64_t out,
               SplitRng& rng) {
  w = store.param(prefix + ".weight", kaiming_init({in, out}, in, rng));
  b = store.param(prefix + ".bias", Tensor({out}));
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& prefix, int64_t dim) {
  gamma = store.param(prefix + ".gamma", Tensor::full({dim}, 1.0));
  beta = store.param(prefix + ".beta", Tensor({dim}));
}

MultiheadSelfAttention::MultiheadSelfAttention(ParamStore& store, const std::string& prefix,
                                               int64_t dim, int heads_, SplitRng& rng)
    : heads(heads_) {
  detail::require(dim % heads_ == 0, "attention dim must divide by heads");
  proj_q = Linear(store, prefix + ".q", dim, dim, rng);
  proj_k = Linear(store, prefix + ".k", dim, dim, rng);
  proj_v = Linear(store, prefix + ".v", dim, dim, rng);
  proj_out = Linear(store, prefix + ".out", dim, dim, rng);
}

ad::Var MultiheadSelfAttention::forward(const ad::Var& qk_in, const ad::Var& v_in) const {
  const int64_t b = qk_in.dim(0), t = qk_in.dim(1), c = qk_in.dim(2);
  const int64_t dh = c / heads;
  auto project = [&](const Linear& lin, const ad::Var& x) {
    ad::Var flat = ad::reshape(x, {b * t, c});
    ad::Var y = lin.forward(flat);
    // [B,T,h,dh] -> [B,h,T,dh] -> [B*h, T, dh]
    y = ad::reshape(y, {b, t, heads, dh});
    y = ad::permute(y, {0, 2, 1, 3});
    return ad::reshape(y, {b * heads, t, dh});
  };
  ad::Var q = project(proj_q, qk_in);
  ad::Var k = project(proj_k, qk_in);
  ad::Var v = project(proj_v, v_in);

  ad::Var scores = ad::scale(ad::bmm(q, ad::permute(k, {0, 2, 1})),
                             1.0 / std::sqrt(static_cast<double>(dh)));
  ad::Var attn = ad::softmax_lastdim(scores);
  ad::Var ctx = ad::bmm(attn, v);  // [B*h, T, dh]
  ctx = ad::reshape(ctx, {b, heads, t, dh});
  ctx = ad::permute(ctx, {0, 2, 1, 3});
  ctx = ad::reshape(ctx, {b * t, c});
  return ad::reshape(proj_out.forward(ctx), {b, t, c});
}

TransformerLayer::TransformerLayer(ParamStore& store, const std::string& prefix, int64_t dim,
                                   int heads, int64_t ff_dim, SplitRng& rng) {
  ln_attn = LayerNorm(store, prefix + ".ln_attn", dim);
  ln_ff = LayerNorm(store, prefix + ".ln_ff", dim);
  attn = MultiheadSelfAttention(store, prefix + ".attn", dim, heads, rng);
  ff_in = Linear(store, prefix + ".ff_in", dim, ff_dim, rng);
  ff_out = Linear(store, prefix + ".ff_out", ff_dim, dim, rng);
}

ad::Var TransformerLayer::forward(const ad::Var& x, const ad::Var& pos_embed) const {
  const int64_t b = x.dim(0), t = x.dim(1), c = x.dim(2);
  ad::Var h = ln_attn.forward(x);
  ad::Var qk = ad::broadcast_add(h, pos_embed);
  ad::Var y = ad::add(x, attn.forward(qk, h));

  ad::Var h2 = ad::reshape(ln_ff.forward(y), {b * t, c});
  ad::Var f = ff_out.forward(ad::relu(ff_in.forward(h2)));
  return ad::add(y, ad::reshape(f, {b, t, c}));
}

void Sgd::step(ParamStore& store, double lr) {
  for (auto& [name, var] : store.params()) {
    if (!var.requires_grad()) continue;
    auto node = var.node();
    node->ensure_grad();
    auto [it, inserted] = velocity.try_emplace(name, Tensor(node->value.shape()));
    Tensor& vel = it->second;
    const int64_t n = node->value.numel();
    for (int64_t i = 0; i < n; ++i) {
      vel[i] = momentum * vel[i] + (node->grad[i] + weight_decay * node->value[i]);
      node->value[i] -= lr * vel[i];
    }
  }
}

}  // namespace sili::nn
