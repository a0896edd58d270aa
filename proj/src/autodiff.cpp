#include "sili/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace sili::ad {

namespace {

thread_local bool g_grad_enabled = true;
int64_t g_next_id = 0;

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;

int64_t prod(const std::vector<int64_t>& dims, size_t from, size_t to) {
  int64_t p = 1;
  for (size_t i = from; i < to; ++i) p *= dims[i];
  return p;
}

}  // namespace

Var::Var(Tensor value, bool requires_grad) {
  node_ = std::make_shared<Node>();
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  node_->id = ++g_next_id;
}

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(const Tensor&)> backward_fn);

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(const Tensor&)> backward_fn) {
  Var v;
  v.node_ = std::make_shared<Node>();
  v.node_->value = std::move(value);
  v.node_->id = ++g_next_id;
  bool req = false;
  if (g_grad_enabled)
    for (const Var& p : parents) req = req || p.requires_grad();
  v.node_->requires_grad = req;
  if (req) {
    for (const Var& p : parents) v.node_->parents.push_back(p.node());
    v.node_->backward_fn = std::move(backward_fn);
  }
  return v;
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& root) {
  detail::require(root.defined() && root.value().numel() == 1,
                  "backward: root must be a defined scalar");
  if (!root.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.node().get()};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents)
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
  }
  // Creation order is a topological order of the DAG; run newest first.
  std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });
  for (Node* n : order) {
    n->ensure_grad();
    if (n->backward_fn) n->grad.fill(0.0);  // interior nodes start clean; leaves accumulate
  }
  root.node()->grad[0] += 1.0;
  for (Node* n : order)
    if (n->backward_fn) n->backward_fn(n->grad);
}

// ---------------------------------------------------------------------------
// elementwise

Var add(const Var& a, const Var& b) {
  detail::require(a.value().same_shape(b.value()), "add: shape mismatch");
  Tensor out(a.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a.value()[i] + b.value()[i];
  auto an = a.node(), bn = b.node();
  return make_op(std::move(out), {a, b}, [an, bn, n](const Tensor& g) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (int64_t i = 0; i < n; ++i) an->grad[i] += g[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int64_t i = 0; i < n; ++i) bn->grad[i] += g[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  detail::require(a.value().same_shape(b.value()), "sub: shape mismatch");
  Tensor out(a.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a.value()[i] - b.value()[i];
  auto an = a.node(), bn = b.node();
  return make_op(std::move(out), {a, b}, [an, bn, n](const Tensor& g) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (int64_t i = 0; i < n; ++i) an->grad[i] += g[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int64_t i = 0; i < n; ++i) bn->grad[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  detail::require(a.value().same_shape(b.value()), "mul: shape mismatch");
  Tensor out(a.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a.value()[i] * b.value()[i];
  auto an = a.node(), bn = b.node();
  return make_op(std::move(out), {a, b}, [an, bn, n](const Tensor& g) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (int64_t i = 0; i < n; ++i) an->grad[i] += g[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int64_t i = 0; i < n; ++i) bn->grad[i] += g[i] * an->value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out(a.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a.value()[i] * s;
  auto an = a.node();
  return make_op(std::move(out), {a}, [an, s, n](const Tensor& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int64_t i = 0; i < n; ++i) an->grad[i] += g[i] * s;
  });
}

Var relu(const Var& a) {
  Tensor out(a.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a.value()[i] > 0.0 ? a.value()[i] : 0.0;
  auto an = a.node();
  return make_op(std::move(out), {a}, [an, n](const Tensor& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int64_t i = 0; i < n; ++i)
      if (an->value[i] > 0.0) an->grad[i] += g[i];
  });
}

// ---------------------------------------------------------------------------
// shape

Var reshape(const Var& a, std::vector<int64_t> shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  auto an = a.node();
  const int64_t n = out.numel();
  return make_op(std::move(out), {a}, [an, n](const Tensor& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int64_t i = 0; i < n; ++i) an->grad[i] += g[i];
  });
}

namespace {

// Copies src into dst with axes permuted: dst index p(i) = src index i.
void permute_copy(const Tensor& src, Tensor& dst, const std::vector<int>& perm) {
  const auto& ishape = src.shape();
  const int nd = src.ndim();
  std::vector<int64_t> istrides(static_cast<size_t>(nd), 1);
  for (int d = nd - 2; d >= 0; --d)
    istrides[static_cast<size_t>(d)] = istrides[static_cast<size_t>(d + 1)] * ishape[static_cast<size_t>(d + 1)];
  std::vector<int64_t> ostrides(static_cast<size_t>(nd), 1);
  const auto& oshape = dst.shape();
  for (int d = nd - 2; d >= 0; --d)
    ostrides[static_cast<size_t>(d)] = ostrides[static_cast<size_t>(d + 1)] * oshape[static_cast<size_t>(d + 1)];
  // stride of output along the source axis order
  std::vector<int64_t> omap(static_cast<size_t>(nd));
  for (int d = 0; d < nd; ++d) omap[static_cast<size_t>(perm[static_cast<size_t>(d)])] = ostrides[static_cast<size_t>(d)];

  std::vector<int64_t> idx(static_cast<size_t>(nd), 0);
  const int64_t n = src.numel();
  int64_t opos = 0;
  for (int64_t i = 0; i < n; ++i) {
    dst[opos] = src[i];
    for (int d = nd - 1; d >= 0; --d) {
      idx[static_cast<size_t>(d)]++;
      opos += omap[static_cast<size_t>(d)];
      if (idx[static_cast<size_t>(d)] < ishape[static_cast<size_t>(d)]) break;
      opos -= omap[static_cast<size_t>(d)] * ishape[static_cast<size_t>(d)];
      idx[static_cast<size_t>(d)] = 0;
    }
  }
}

}  // namespace

Var permute(const Var& a, const std::vector<int>& perm) {
  const int nd = a.value().ndim();
  detail::require(static_cast<int>(perm.size()) == nd, "permute: rank mismatch");
  std::vector<int64_t> oshape(static_cast<size_t>(nd));
  for (int d = 0; d < nd; ++d) oshape[static_cast<size_t>(d)] = a.dim(perm[static_cast<size_t>(d)]);
  Tensor out(oshape);
  permute_copy(a.value(), out, perm);
  auto an = a.node();
  std::vector<int> inv(static_cast<size_t>(nd));
  for (int d = 0; d < nd; ++d) inv[static_cast<size_t>(perm[static_cast<size_t>(d)])] = d;
  return make_op(std::move(out), {a}, [an, inv](const Tensor& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    Tensor gin(an->value.shape());
    permute_copy(g, gin, inv);
    const int64_t n = gin.numel();
    for (int64_t i = 0; i < n; ++i) an->grad[i] += gin[i];
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  detail::require(!parts.empty(), "concat: no inputs");
  const auto& s0 = parts[0].shape();
  const int nd = static_cast<int>(s0.size());
  std::vector<int64_t> oshape = s0;
  int64_t total_axis = 0;
  for (const Var& p : parts) {
    detail::require(p.value().ndim() == nd, "concat: rank mismatch");
    for (int d = 0; d < nd; ++d)
      if (d != axis)
        detail::require(p.dim(d) == s0[static_cast<size_t>(d)], "concat: shape mismatch off-axis");
    total_axis += p.dim(axis);
  }
  oshape[static_cast<size_t>(axis)] = total_axis;
  Tensor out(oshape);

  const int64_t outer = prod(s0, 0, static_cast<size_t>(axis));
  const int64_t inner = prod(s0, static_cast<size_t>(axis) + 1, s0.size());
  int64_t offset = 0;
  for (const Var& p : parts) {
    const int64_t ax = p.dim(axis);
    for (int64_t o = 0; o < outer; ++o) {
      const double* src = p.value().data() + o * ax * inner;
      double* dst = out.data() + (o * total_axis + offset) * inner;
      std::copy(src, src + ax * inner, dst);
    }
    offset += ax;
  }

  std::vector<std::shared_ptr<Node>> nodes;
  std::vector<int64_t> axes;
  for (const Var& p : parts) {
    nodes.push_back(p.node());
    axes.push_back(p.dim(axis));
  }
  return make_op(std::move(out), parts,
                 [nodes, axes, outer, inner, total_axis](const Tensor& g) {
                   int64_t off = 0;
                   for (size_t k = 0; k < nodes.size(); ++k) {
                     const int64_t ax = axes[k];
                     if (nodes[k]->requires_grad) {
                       nodes[k]->ensure_grad();
                       for (int64_t o = 0; o < outer; ++o) {
                         const double* src = g.data() + (o * total_axis + off) * inner;
                         double* dst = nodes[k]->grad.data() + o * ax * inner;
                         for (int64_t i = 0; i < ax * inner; ++i) dst[i] += src[i];
                       }
                     }
                     off += ax;
                   }
                 });
}

Var slice(const Var& a, int axis, int64_t start, int64_t len) {
  const auto& s = a.shape();
  detail::require(axis >= 0 && axis < a.value().ndim(), "slice: bad axis");
  detail::require(start >= 0 && len >= 1 && start + len <= s[static_cast<size_t>(axis)],
                  "slice: range out of bounds");
  std::vector<int64_t> oshape = s;
  oshape[static_cast<size_t>(axis)] = len;
  Tensor out(oshape);
  const int64_t outer = prod(s, 0, static_cast<size_t>(axis));
  const int64_t inner = prod(s, static_cast<size_t>(axis) + 1, s.size());
  const int64_t ax = s[static_cast<size_t>(axis)];
  for (int64_t o = 0; o < outer; ++o) {
    const double* src = a.value().data() + (o * ax + start) * inner;
    std::copy(src, src + len * inner, out.data() + o * len * inner);
  }
  auto an = a.node();
  return make_op(std::move(out), {a}, [an, outer, inner, ax, start, len](const Tensor& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int64_t o = 0; o < outer; ++o) {
      const double* src = g.data() + o * len * inner;
      double* dst = an->grad.data() + (o * ax + start) * inner;
      for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
    }
  });
}

// ---------------------------------------------------------------------------
// linear algebra

Var matmul(const Var& a, const Var& b) {
  detail::require(a.value().ndim() == 2 && b.value().ndim() == 2 && a.dim(1) == b.dim(0),
                  "matmul: incompatible shapes");
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  MapM(out.data(), m, n).noalias() =
      CMapM(a.value().data(), m, k) * CMapM(b.value().data(), k, n);
  auto an = a.node(), bn = b.node();
  return make_op(std::move(out), {a, b}, [an, bn, m, k, n](const Tensor& g) {
    CMapM gm(g.data(), m, n);
    if (an->requires_grad) {
      an->ensure_grad();
      MapM(an->grad.data(), m, k).noalias() += gm * CMapM(bn->value.data(), k, n).transpose();
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      MapM(bn->grad.data(), k, n).noalias() += CMapM(an->value.data(), m, k).transpose() * gm;
    }
  });
}

Var bmm(const Var& a, const Var& b) {
  detail::require(a.value().ndim() == 3 && b.value().ndim() == 3 && a.dim(0) == b.dim(0) &&
                      a.dim(2) == b.dim(1),
                  "bmm: incompatible shapes");
  const int64_t bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  Tensor out({bs, m, n});
  for (int64_t i = 0; i < bs; ++i)
    MapM(out.data() + i * m * n, m, n).noalias() =
        CMapM(a.value().data() + i * m * k, m, k) * CMapM(b.value().data() + i * k * n, k, n);
  auto an = a.node(), bn = b.node();
  return make_op(std::move(out), {a, b}, [an, bn, bs, m, k, n](const Tensor& g) {
    for (int64_t i = 0; i < bs; ++i) {
      CMapM gm(g.data() + i * m * n, m, n);
      if (an->requires_grad) {
        an->ensure_grad();
        MapM(an->grad.data() + i * m * k, m, k).noalias() +=
            gm * CMapM(bn->value.data() + i * k * n, k, n).transpose();
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        MapM(bn->grad.data() + i * k * n, k, n).noalias() +=
            CMapM(an->value.data() + i * m * k, m, k).transpose() * gm;
      }
    }
  });
}

Var add_bias_cols(const Var& a, const Var& bias) {
  detail::require(a.value().ndim() == 2 && bias.value().ndim() == 1 && a.dim(1) == bias.dim(0),
                  "add_bias_cols: incompatible shapes");
  const int64_t m = a.dim(0), n = a.dim(1);
  Tensor out({m, n});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out.at(i, j) = a.value().at(i, j) + bias.value()[j];
  auto an = a.node(), bn = bias.node();
  return make_op(std::move(out), {a, bias}, [an, bn, m, n](const Tensor& g) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (int64_t i = 0; i < m * n; ++i) an->grad[i] += g[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) bn->grad[j] += g.at(i, j);
    }
  });
}

Var broadcast_add(const Var& a, const Var& b) {
  detail::require(a.value().ndim() == 3 && b.value().ndim() == 2 && a.dim(1) == b.dim(0) &&
                      a.dim(2) == b.dim(1),
                  "broadcast_add: incompatible shapes");
  const int64_t bs = a.dim(0), t = a.dim(1), c = a.dim(2);
  Tensor out({bs, t, c});
  for (int64_t i = 0; i < bs; ++i)
    for (int64_t j = 0; j < t * c; ++j)
      out[i * t * c + j] = a.value()[i * t * c + j] + b.value()[j];
  auto an = a.node(), bn = b.node();
  return make_op(std::move(out), {a, b}, [an, bn, bs, t, c](const Tensor& g) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (int64_t i = 0; i < bs * t * c; ++i) an->grad[i] += g[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int64_t i = 0; i < bs; ++i)
        for (int64_t j = 0; j < t * c; ++j) bn->grad[j] += g[i * t * c + j];
    }
  });
}

// ---------------------------------------------------------------------------
// convolution / pooling / resampling

namespace {

void im2col(const double* x, int64_t c_in, int64_t h, int64_t w, int kh, int kw, int stride,
            int pad, int64_t oh, int64_t ow, double* col) {
  for (int64_t c = 0; c < c_in; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        double* row = col + (((c * kh + ky) * kw + kx) * oh * ow);
        for (int64_t oy = 0; oy < oh; ++oy) {
          const int64_t iy = oy * stride - pad + ky;
          for (int64_t ox = 0; ox < ow; ++ox) {
            const int64_t ix = ox * stride - pad + kx;
            row[oy * ow + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                    ? x[(c * h + iy) * w + ix]
                                    : 0.0;
          }
        }
      }
}

void col2im_accum(const double* col, int64_t c_in, int64_t h, int64_t w, int kh, int kw,
                  int stride, int pad, int64_t oh, int64_t ow, double* x) {
  for (int64_t c = 0; c < c_in; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const double* row = col + (((c * kh + ky) * kw + kx) * oh * ow);
        for (int64_t oy = 0; oy < oh; ++oy) {
          const int64_t iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int64_t ox = 0; ox < ow; ++ox) {
            const int64_t ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            x[(c * h + iy) * w + ix] += row[oy * ow + ox];
          }
        }
      }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  detail::require(x.value().ndim() == 4 && w.value().ndim() == 4, "conv2d: expects 4-d tensors");
  detail::require(x.dim(1) == w.dim(1), "conv2d: channel mismatch");
  detail::require(stride >= 1 && pad >= 0, "conv2d: bad stride/pad");
  const int64_t n = x.dim(0), c_in = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int64_t c_out = w.dim(0);
  const int kh = static_cast<int>(w.dim(2)), kw = static_cast<int>(w.dim(3));
  const int64_t oh = (h + 2 * pad - kh) / stride + 1;
  const int64_t ow = (wd + 2 * pad - kw) / stride + 1;
  detail::require(oh >= 1 && ow >= 1, "conv2d: output would be empty");

  const int64_t ck = c_in * kh * kw;
  const bool pointwise = kh == 1 && kw == 1 && stride == 1 && pad == 0;
  const bool has_bias = b.defined();
  Tensor out({n, c_out, oh, ow});
  Tensor col(pointwise ? std::vector<int64_t>{1} : std::vector<int64_t>{ck, oh * ow});
  for (int64_t i = 0; i < n; ++i) {
    const double* cols = x.value().data() + i * c_in * h * wd;
    if (!pointwise) {
      im2col(cols, c_in, h, wd, kh, kw, stride, pad, oh, ow, col.data());
      cols = col.data();
    }
    MapM o(out.data() + i * c_out * oh * ow, c_out, oh * ow);
    o.noalias() = CMapM(w.value().data(), c_out, ck) * CMapM(cols, ck, oh * ow);
    if (has_bias)
      for (int64_t co = 0; co < c_out; ++co) o.row(co).array() += b.value()[co];
  }

  auto xn = x.node(), wn = w.node();
  auto bn = has_bias ? b.node() : nullptr;
  std::vector<Var> parents = {x, w};
  if (has_bias) parents.push_back(b);
  return make_op(std::move(out), std::move(parents),
                 [xn, wn, bn, n, c_in, h, wd, c_out, kh, kw, stride, pad, oh, ow, ck,
                  pointwise](const Tensor& g) {
                   Tensor col(pointwise ? std::vector<int64_t>{1}
                                        : std::vector<int64_t>{ck, oh * ow});
                   Tensor dcol(pointwise ? std::vector<int64_t>{1}
                                         : std::vector<int64_t>{ck, oh * ow});
                   for (int64_t i = 0; i < n; ++i) {
                     CMapM gm(g.data() + i * c_out * oh * ow, c_out, oh * ow);
                     const double* cols = xn->value.data() + i * c_in * h * wd;
                     if (!pointwise && (wn->requires_grad || xn->requires_grad)) {
                       im2col(cols, c_in, h, wd, kh, kw, stride, pad, oh, ow, col.data());
                       cols = col.data();
                     }
                     if (wn->requires_grad) {
                       wn->ensure_grad();
                       MapM(wn->grad.data(), c_out, ck).noalias() +=
                           gm * CMapM(cols, ck, oh * ow).transpose();
                     }
                     if (bn && bn->requires_grad) {
                       bn->ensure_grad();
                       for (int64_t co = 0; co < c_out; ++co) bn->grad[co] += gm.row(co).sum();
                     }
                     if (xn->requires_grad) {
                       xn->ensure_grad();
                       if (pointwise) {
                         MapM(xn->grad.data() + i * c_in * h * wd, ck, oh * ow).noalias() +=
                             CMapM(wn->value.data(), c_out, ck).transpose() * gm;
                       } else {
                         MapM(dcol.data(), ck, oh * ow).noalias() =
                             CMapM(wn->value.data(), c_out, ck).transpose() * gm;
                         col2im_accum(dcol.data(), c_in, h, wd, kh, kw, stride, pad, oh, ow,
                                      xn->grad.data() + i * c_in * h * wd);
                       }
                     }
                   }
                 });
}

Var maxpool2d(const Var& x, int kernel, int stride, int pad) {
  detail::require(x.value().ndim() == 4, "maxpool2d: expects 4-d tensor");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t oh = (h + 2 * pad - kernel) / stride + 1;
  const int64_t ow = (w + 2 * pad - kernel) / stride + 1;
  Tensor out({n, c, oh, ow});
  std::vector<int64_t> argmax(static_cast<size_t>(n * c * oh * ow));
  int64_t idx = 0;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ci = 0; ci < c; ++ci) {
      const double* plane = x.value().data() + (i * c + ci) * h * w;
      for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          int64_t best_at = -1;
          for (int ky = 0; ky < kernel; ++ky) {
            const int64_t iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int64_t ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= w) continue;
              const double v = plane[iy * w + ix];
              if (v > best) {
                best = v;
                best_at = iy * w + ix;
              }
            }
          }
          out[idx] = best;
          argmax[static_cast<size_t>(idx)] = best_at;
          ++idx;
        }
    }
  auto xn = x.node();
  return make_op(std::move(out), {x}, [xn, argmax, n, c, h, w, oh, ow](const Tensor& g) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    int64_t idx = 0;
    for (int64_t i = 0; i < n * c; ++i) {
      double* plane = xn->grad.data() + i * h * w;
      for (int64_t o = 0; o < oh * ow; ++o, ++idx)
        if (argmax[static_cast<size_t>(idx)] >= 0) plane[argmax[static_cast<size_t>(idx)]] += g[idx];
    }
  });
}

namespace {

struct LinearTap {
  int64_t i0, i1;
  double t;  // weight of i1
};

std::vector<LinearTap> bilinear_taps(int64_t in, int64_t out) {
  std::vector<LinearTap> taps(static_cast<size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int64_t o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int64_t i0 = static_cast<int64_t>(std::floor(src));
    const int64_t i1 = std::min(i0 + 1, in - 1);
    taps[static_cast<size_t>(o)] = {i0, i1, src - i0};
  }
  return taps;
}

}  // namespace

Var upsample_bilinear(const Var& x, int out_h, int out_w) {
  detail::require(x.value().ndim() == 4, "upsample_bilinear: expects 4-d tensor");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto ty = bilinear_taps(h, out_h);
  const auto tx = bilinear_taps(w, out_w);
  Tensor out({n, c, out_h, out_w});
  for (int64_t i = 0; i < n * c; ++i) {
    const double* plane = x.value().data() + i * h * w;
    double* oplane = out.data() + i * out_h * out_w;
    for (int64_t oy = 0; oy < out_h; ++oy) {
      const auto& ry = ty[static_cast<size_t>(oy)];
      for (int64_t ox = 0; ox < out_w; ++ox) {
        const auto& rx = tx[static_cast<size_t>(ox)];
        const double v00 = plane[ry.i0 * w + rx.i0], v01 = plane[ry.i0 * w + rx.i1];
        const double v10 = plane[ry.i1 * w + rx.i0], v11 = plane[ry.i1 * w + rx.i1];
        oplane[oy * out_w + ox] = (1 - ry.t) * ((1 - rx.t) * v00 + rx.t * v01) +
                                  ry.t * ((1 - rx.t) * v10 + rx.t * v11);
      }
    }
  }
  auto xn = x.node();
  return make_op(std::move(out), {x}, [xn, ty, tx, n, c, h, w, out_h, out_w](const Tensor& g) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int64_t i = 0; i < n * c; ++i) {
      double* plane = xn->grad.data() + i * h * w;
      const double* gplane = g.data() + i * out_h * out_w;
      for (int64_t oy = 0; oy < out_h; ++oy) {
        const auto& ry = ty[static_cast<size_t>(oy)];
        for (int64_t ox = 0; ox < out_w; ++ox) {
          const auto& rx = tx[static_cast<size_t>(ox)];
          const double gv = gplane[oy * out_w + ox];
          plane[ry.i0 * w + rx.i0] += (1 - ry.t) * (1 - rx.t) * gv;
          plane[ry.i0 * w + rx.i1] += (1 - ry.t) * rx.t * gv;
          plane[ry.i1 * w + rx.i0] += ry.t * (1 - rx.t) * gv;
          plane[ry.i1 * w + rx.i1] += ry.t * rx.t * gv;
        }
      }
    }
  });
}

Var upsample_nearest(const Var& x, int out_h, int out_w) {
  detail::require(x.value().ndim() == 4, "upsample_nearest: expects 4-d tensor");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  std::vector<int64_t> my(static_cast<size_t>(out_h)), mx(static_cast<size_t>(out_w));
  for (int64_t o = 0; o < out_h; ++o)
    my[static_cast<size_t>(o)] =
        std::min<int64_t>(h - 1, static_cast<int64_t>(std::floor((o + 0.5) * h / out_h)));
  for (int64_t o = 0; o < out_w; ++o)
    mx[static_cast<size_t>(o)] =
        std::min<int64_t>(w - 1, static_cast<int64_t>(std::floor((o + 0.5) * w / out_w)));
  Tensor out({n, c, out_h, out_w});
  for (int64_t i = 0; i < n * c; ++i) {
    const double* plane = x.value().data() + i * h * w;
    double* oplane = out.data() + i * out_h * out_w;
    for (int64_t oy = 0; oy < out_h; ++oy)
      for (int64_t ox = 0; ox < out_w; ++ox)
        oplane[oy * out_w + ox] = plane[my[static_cast<size_t>(oy)] * w + mx[static_cast<size_t>(ox)]];
  }
  auto xn = x.node();
  return make_op(std::move(out), {x}, [xn, my, mx, n, c, h, w, out_h, out_w](const Tensor& g) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int64_t i = 0; i < n * c; ++i) {
      double* plane = xn->grad.data() + i * h * w;
      const double* gplane = g.data() + i * out_h * out_w;
      for (int64_t oy = 0; oy < out_h; ++oy)
        for (int64_t ox = 0; ox < out_w; ++ox)
          plane[my[static_cast<size_t>(oy)] * w + mx[static_cast<size_t>(ox)]] += gplane[oy * out_w + ox];
    }
  });
}

Var gather_spatial(const Var& x, const std::vector<int64_t>& rows,
                   const std::vector<int64_t>& cols) {
  detail::require(x.value().ndim() == 4, "gather_spatial: expects 4-d tensor");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t qh = static_cast<int64_t>(rows.size()), qw = static_cast<int64_t>(cols.size());
  for (int64_t r : rows) detail::require(r >= 0 && r < h, "gather_spatial: row out of range");
  for (int64_t cc : cols) detail::require(cc >= 0 && cc < w, "gather_spatial: col out of range");
  Tensor out({n, c, qh, qw});
  for (int64_t i = 0; i < n * c; ++i) {
    const double* plane = x.value().data() + i * h * w;
    double* oplane = out.data() + i * qh * qw;
    for (int64_t qy = 0; qy < qh; ++qy)
      for (int64_t qx = 0; qx < qw; ++qx)
        oplane[qy * qw + qx] = plane[rows[static_cast<size_t>(qy)] * w + cols[static_cast<size_t>(qx)]];
  }
  auto xn = x.node();
  return make_op(std::move(out), {x}, [xn, rows, cols, n, c, h, w, qh, qw](const Tensor& g) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int64_t i = 0; i < n * c; ++i) {
      double* plane = xn->grad.data() + i * h * w;
      const double* gplane = g.data() + i * qh * qw;
      for (int64_t qy = 0; qy < qh; ++qy)
        for (int64_t qx = 0; qx < qw; ++qx)
          plane[rows[static_cast<size_t>(qy)] * w + cols[static_cast<size_t>(qx)]] += gplane[qy * qw + qx];
    }
  });
}

// ---------------------------------------------------------------------------
// normalization

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
               Tensor& running_var, bool training, double momentum, double eps) {
  detail::require(x.value().ndim() >= 2, "batch_norm: needs a channel axis");
  const int64_t c = x.dim(1);
  detail::require(gamma.value().numel() == c && beta.value().numel() == c &&
                      running_mean.numel() == c && running_var.numel() == c,
                  "batch_norm: parameter size mismatch");
  const int64_t n = x.dim(0);
  const int64_t inner = x.value().numel() / (n * c);
  const int64_t count = n * inner;

  Tensor mean({c}), var({c});
  if (training) {
    for (int64_t i = 0; i < n; ++i)
      for (int64_t ci = 0; ci < c; ++ci) {
        const double* p = x.value().data() + (i * c + ci) * inner;
        double s = 0.0;
        for (int64_t k = 0; k < inner; ++k) s += p[k];
        mean[ci] += s;
      }
    for (int64_t ci = 0; ci < c; ++ci) mean[ci] /= static_cast<double>(count);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t ci = 0; ci < c; ++ci) {
        const double* p = x.value().data() + (i * c + ci) * inner;
        double s = 0.0;
        for (int64_t k = 0; k < inner; ++k) {
          const double d = p[k] - mean[ci];
          s += d * d;
        }
        var[ci] += s;
      }
    for (int64_t ci = 0; ci < c; ++ci) var[ci] /= static_cast<double>(count);
    // Running statistics use the unbiased variance, standard semantics.
    const double unbias = count > 1 ? static_cast<double>(count) / (count - 1) : 1.0;
    for (int64_t ci = 0; ci < c; ++ci) {
      running_mean[ci] = (1.0 - momentum) * running_mean[ci] + momentum * mean[ci];
      running_var[ci] = (1.0 - momentum) * running_var[ci] + momentum * var[ci] * unbias;
    }
  } else {
    for (int64_t ci = 0; ci < c; ++ci) {
      mean[ci] = running_mean[ci];
      var[ci] = running_var[ci];
    }
  }

  Tensor inv_std({c});
  for (int64_t ci = 0; ci < c; ++ci) inv_std[ci] = 1.0 / std::sqrt(var[ci] + eps);

  Tensor xhat(x.shape());
  Tensor out(x.shape());
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ci = 0; ci < c; ++ci) {
      const double* p = x.value().data() + (i * c + ci) * inner;
      double* ph = xhat.data() + (i * c + ci) * inner;
      double* po = out.data() + (i * c + ci) * inner;
      const double mu = mean[ci], is = inv_std[ci];
      const double gm = gamma.value()[ci], bt = beta.value()[ci];
      for (int64_t k = 0; k < inner; ++k) {
        ph[k] = (p[k] - mu) * is;
        po[k] = gm * ph[k] + bt;
      }
    }

  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return make_op(
      std::move(out), {x, gamma, beta},
      [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), n, c, inner, count,
       training](const Tensor& g) {
        Tensor gsum({c}), gxsum({c});
        for (int64_t i = 0; i < n; ++i)
          for (int64_t ci = 0; ci < c; ++ci) {
            const double* pg = g.data() + (i * c + ci) * inner;
            const double* ph = xhat.data() + (i * c + ci) * inner;
            double s = 0.0, sx = 0.0;
            for (int64_t k = 0; k < inner; ++k) {
              s += pg[k];
              sx += pg[k] * ph[k];
            }
            gsum[ci] += s;
            gxsum[ci] += sx;
          }
        if (gn->requires_grad) {
          gn->ensure_grad();
          for (int64_t ci = 0; ci < c; ++ci) gn->grad[ci] += gxsum[ci];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (int64_t ci = 0; ci < c; ++ci) bn->grad[ci] += gsum[ci];
        }
        if (xn->requires_grad) {
          xn->ensure_grad();
          for (int64_t i = 0; i < n; ++i)
            for (int64_t ci = 0; ci < c; ++ci) {
              const double* pg = g.data() + (i * c + ci) * inner;
              const double* ph = xhat.data() + (i * c + ci) * inner;
              double* px = xn->grad.data() + (i * c + ci) * inner;
              const double a = gn->value[ci] * inv_std[ci];
              if (training) {
                const double mg = gsum[ci] / static_cast<double>(count);
                const double mgx = gxsum[ci] / static_cast<double>(count);
                for (int64_t k = 0; k < inner; ++k)
                  px[k] += a * (pg[k] - mg - ph[k] * mgx);
              } else {
                for (int64_t k = 0; k < inner; ++k) px[k] += a * pg[k];
              }
            }
        }
      });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const int nd = x.value().ndim();
  detail::require(nd >= 1, "layer_norm: empty tensor");
  const int64_t d = x.dim(nd - 1);
  detail::require(gamma.value().numel() == d && beta.value().numel() == d,
                  "layer_norm: parameter size mismatch");
  const int64_t rows = x.value().numel() / d;

  Tensor xhat(x.shape());
  Tensor out(x.shape());
  Tensor inv_std({rows});
  for (int64_t r = 0; r < rows; ++r) {
    const double* p = x.value().data() + r * d;
    double mu = 0.0;
    for (int64_t k = 0; k < d; ++k) mu += p[k];
    mu /= static_cast<double>(d);
    double v = 0.0;
    for (int64_t k = 0; k < d; ++k) v += (p[k] - mu) * (p[k] - mu);
    v /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(v + eps);
    inv_std[r] = is;
    double* ph = xhat.data() + r * d;
    double* po = out.data() + r * d;
    for (int64_t k = 0; k < d; ++k) {
      ph[k] = (p[k] - mu) * is;
      po[k] = gamma.value()[k] * ph[k] + beta.value()[k];
    }
  }

  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return make_op(std::move(out), {x, gamma, beta},
                 [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), rows,
                  d](const Tensor& g) {
                   if (gn->requires_grad) gn->ensure_grad();
                   if (bn->requires_grad) bn->ensure_grad();
                   if (xn->requires_grad) xn->ensure_grad();
                   for (int64_t r = 0; r < rows; ++r) {
                     const double* pg = g.data() + r * d;
                     const double* ph = xhat.data() + r * d;
                     if (gn->requires_grad)
                       for (int64_t k = 0; k < d; ++k) gn->grad[k] += pg[k] * ph[k];
                     if (bn->requires_grad)
                       for (int64_t k = 0; k < d; ++k) bn->grad[k] += pg[k];
                     if (xn->requires_grad) {
                       double mg = 0.0, mgx = 0.0;
                       for (int64_t k = 0; k < d; ++k) {
                         const double dxh = pg[k] * gn->value[k];
                         mg += dxh;
                         mgx += dxh * ph[k];
                       }
                       mg /= static_cast<double>(d);
                       mgx /= static_cast<double>(d);
                       double* px = xn->grad.data() + r * d;
                       for (int64_t k = 0; k < d; ++k)
                         px[k] += inv_std[r] * (pg[k] * gn->value[k] - mg - ph[k] * mgx);
                     }
                   }
                 });
}

Var softmax_lastdim(const Var& a) {
  const int nd = a.value().ndim();
  const int64_t d = a.dim(nd - 1);
  const int64_t rows = a.value().numel() / d;
  Tensor out(a.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double* p = a.value().data() + r * d;
    double* po = out.data() + r * d;
    double mx = p[0];
    for (int64_t k = 1; k < d; ++k) mx = std::max(mx, p[k]);
    double s = 0.0;
    for (int64_t k = 0; k < d; ++k) {
      po[k] = std::exp(p[k] - mx);
      s += po[k];
    }
    for (int64_t k = 0; k < d; ++k) po[k] /= s;
  }
  auto an = a.node();
  Tensor kept = out;  // softmax output needed by backward
  return make_op(std::move(out), {a}, [an, kept = std::move(kept), rows, d](const Tensor& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      const double* pg = g.data() + r * d;
      const double* py = kept.data() + r * d;
      double dot = 0.0;
      for (int64_t k = 0; k < d; ++k) dot += pg[k] * py[k];
      double* px = an->grad.data() + r * d;
      for (int64_t k = 0; k < d; ++k) px[k] += py[k] * (pg[k] - dot);
    }
  });
}

Var dropout(const Var& a, double p, SplitRng& rng, bool training) {
  if (!training || p <= 0.0) return a;
  detail::require(p < 1.0, "dropout: p must be < 1");
  const int64_t n = a.value().numel();
  const double scale = 1.0 / (1.0 - p);
  std::vector<double> mask(static_cast<size_t>(n));
  Tensor out(a.shape());
  for (int64_t i = 0; i < n; ++i) {
    mask[static_cast<size_t>(i)] = rng.bernoulli(p) ? 0.0 : scale;
    out[i] = a.value()[i] * mask[static_cast<size_t>(i)];
  }
  auto an = a.node();
  return make_op(std::move(out), {a}, [an, mask = std::move(mask), n](const Tensor& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (int64_t i = 0; i < n; ++i) an->grad[i] += g[i] * mask[static_cast<size_t>(i)];
  });
}

// ---------------------------------------------------------------------------
// reductions / losses

Var mean_all(const Var& a) {
  const int64_t n = a.value().numel();
  Tensor out({1});
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += a.value()[i];
  out[0] = s / static_cast<double>(n);
  auto an = a.node();
  return make_op(std::move(out), {a}, [an, n](const Tensor& g) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    const double gv = g[0] / static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i) an->grad[i] += gv;
  });
}

Var cross_entropy_logits(const Var& logits, const Tensor& targets) {
  detail::require(logits.value().ndim() == 4, "cross_entropy_logits: expects [N,K,H,W]");
  const int64_t n = logits.dim(0), k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  detail::require(targets.ndim() == 3 && targets.dim(0) == n && targets.dim(1) == h &&
                      targets.dim(2) == w,
                  "cross_entropy_logits: target shape mismatch");
  const int64_t hw = h * w;
  const int64_t count = n * hw;
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double* base = logits.value().data() + i * k * hw;
    const double* tgt = targets.data() + i * hw;
    for (int64_t px = 0; px < hw; ++px) {
      double mx = base[px];
      for (int64_t ci = 1; ci < k; ++ci) mx = std::max(mx, base[ci * hw + px]);
      double s = 0.0;
      for (int64_t ci = 0; ci < k; ++ci) s += std::exp(base[ci * hw + px] - mx);
      const int64_t t = static_cast<int64_t>(tgt[px]);
      detail::require(t >= 0 && t < k, "cross_entropy_logits: target class out of range");
      loss += mx + std::log(s) - base[t * hw + px];
    }
  }
  Tensor out({1});
  out[0] = loss / static_cast<double>(count);
  auto ln = logits.node();
  Tensor tcopy = targets;
  return make_op(std::move(out), {logits},
                 [ln, tcopy = std::move(tcopy), n, k, hw, count](const Tensor& g) {
                   if (!ln->requires_grad) return;
                   ln->ensure_grad();
                   const double gv = g[0] / static_cast<double>(count);
                   for (int64_t i = 0; i < n; ++i) {
                     const double* base = ln->value.data() + i * k * hw;
                     double* gbase = ln->grad.data() + i * k * hw;
                     const double* tgt = tcopy.data() + i * hw;
                     for (int64_t px = 0; px < hw; ++px) {
                       double mx = base[px];
                       for (int64_t ci = 1; ci < k; ++ci) mx = std::max(mx, base[ci * hw + px]);
                       double s = 0.0;
                       for (int64_t ci = 0; ci < k; ++ci) s += std::exp(base[ci * hw + px] - mx);
                       const int64_t t = static_cast<int64_t>(tgt[px]);
                       for (int64_t ci = 0; ci < k; ++ci) {
                         const double soft = std::exp(base[ci * hw + px] - mx) / s;
                         gbase[ci * hw + px] += gv * (soft - (ci == t ? 1.0 : 0.0));
                       }
                     }
                   }
                 });
}

Tensor softmax_channels_tensor(const Tensor& logits) {
  detail::require(logits.ndim() == 4, "softmax_channels_tensor: expects [N,K,H,W]");
  const int64_t n = logits.dim(0), k = logits.dim(1), hw = logits.dim(2) * logits.dim(3);
  Tensor out(logits.shape());
  for (int64_t i = 0; i < n; ++i) {
    const double* base = logits.data() + i * k * hw;
    double* obase = out.data() + i * k * hw;
    for (int64_t px = 0; px < hw; ++px) {
      double mx = base[px];
      for (int64_t ci = 1; ci < k; ++ci) mx = std::max(mx, base[ci * hw + px]);
      double s = 0.0;
      for (int64_t ci = 0; ci < k; ++ci) s += std::exp(base[ci * hw + px] - mx);
      for (int64_t ci = 0; ci < k; ++ci) obase[ci * hw + px] = std::exp(base[ci * hw + px] - mx) / s;
    }
  }
  return out;
}

}  // namespace sili::ad
