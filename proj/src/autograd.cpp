#include "intent/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "intent/kernels.hpp"

namespace intent {

namespace {
std::atomic<std::uint64_t> g_seq{0};

detail::NodePtr make_node(Tensor value, std::vector<detail::NodePtr> parents,
                          std::function<void(const Tensor&)> backprop) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  n->seq = ++g_seq;
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->needs_grad) n->needs_grad = true;
  if (n->needs_grad) n->backprop = std::move(backprop);
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!(a.value().shape() == b.value().shape()))
    throw ShapeError(msg(op, ": shape mismatch ", shape_str(a.shape()), " vs ", shape_str(b.shape())));
}

void check_rank2(const Var& a, const char* op) {
  if (a.value().rank() != 2) throw ShapeError(msg(op, ": expected rank-2, got ", shape_str(a.shape())));
}
}  // namespace

namespace detail {
void Node::accumulate(const Tensor& g) {
  if (!needs_grad) return;
  if (grad.empty()) grad = Tensor::zeros(value.shape());
  Scalar* dst = grad.data();
  const Scalar* src = g.data();
  const std::int64_t n = grad.numel();
  for (std::int64_t i = 0; i < n; ++i) dst[i] += src[i];
}
}  // namespace detail

Var::Var(Tensor value, bool requires_grad) {
  node_ = std::make_shared<detail::Node>();
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  node_->needs_grad = requires_grad;
  node_->seq = ++g_seq;
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

void Var::backward() const {
  if (!node_) throw Error("backward() on undefined var");
  if (node_->value.numel() != 1)
    throw ShapeError(msg("backward() needs a scalar, got ", shape_str(node_->value.shape())));

  // reachable subgraph, then reverse creation order (valid topological order)
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{node_.get()};
  seen.insert(node_.get());
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents)
      if (seen.insert(p.get()).second) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->seq > b->seq; });

  node_->accumulate(Tensor::full(node_->value.shape(), 1.0));
  for (detail::Node* n : order) {
    if (!n->backprop || n->grad.empty()) continue;
    n->backprop(n->grad);
  }
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a.value();
  const Scalar* bp = b.value().data();
  Scalar* op = out.data();
  for (std::int64_t i = 0; i < out.numel(); ++i) op[i] += bp[i];
  auto an = a.node(), bn = b.node();
  return Var(make_node(std::move(out), {an, bn}, [an, bn](const Tensor& g) {
    an->accumulate(g);
    bn->accumulate(g);
  }));
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a.value();
  const Scalar* bp = b.value().data();
  Scalar* op = out.data();
  for (std::int64_t i = 0; i < out.numel(); ++i) op[i] -= bp[i];
  auto an = a.node(), bn = b.node();
  return Var(make_node(std::move(out), {an, bn}, [an, bn](const Tensor& g) {
    an->accumulate(g);
    if (bn->needs_grad) {
      Tensor neg = g;
      for (auto& v : neg.vec()) v = -v;
      bn->accumulate(neg);
    }
  }));
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a.value();
  const Scalar* bp = b.value().data();
  Scalar* op = out.data();
  for (std::int64_t i = 0; i < out.numel(); ++i) op[i] *= bp[i];
  auto an = a.node(), bn = b.node();
  Tensor av = a.value(), bv = b.value();
  return Var(make_node(std::move(out), {an, bn}, [an, bn, av, bv](const Tensor& g) {
    if (an->needs_grad) {
      Tensor ga = g;
      for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] *= bv[i];
      an->accumulate(ga);
    }
    if (bn->needs_grad) {
      Tensor gb = g;
      for (std::int64_t i = 0; i < gb.numel(); ++i) gb[i] *= av[i];
      bn->accumulate(gb);
    }
  }));
}

Var scale(const Var& a, Scalar c) {
  Tensor out = a.value();
  for (auto& v : out.vec()) v *= c;
  auto an = a.node();
  return Var(make_node(std::move(out), {an}, [an, c](const Tensor& g) {
    Tensor ga = g;
    for (auto& v : ga.vec()) v *= c;
    an->accumulate(ga);
  }));
}

Var scale_by(const Var& x, const Var& s) {
  if (s.value().numel() != 1) throw ShapeError("scale_by: scale must be a single element");
  const Scalar sv = s.value()[0];
  Tensor out = x.value();
  for (auto& v : out.vec()) v *= sv;
  auto xn = x.node(), sn = s.node();
  Tensor xv = x.value();
  return Var(make_node(std::move(out), {xn, sn}, [xn, sn, sv, xv](const Tensor& g) {
    if (xn->needs_grad) {
      Tensor gx = g;
      for (auto& v : gx.vec()) v *= sv;
      xn->accumulate(gx);
    }
    if (sn->needs_grad) {
      Scalar acc = 0.0;
      for (std::int64_t i = 0; i < g.numel(); ++i) acc += g[i] * xv[i];
      sn->accumulate(Tensor::scalar(acc));
    }
  }));
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.vec())
    if (v < 0.0) v = 0.0;
  auto an = a.node();
  Tensor av = a.value();
  return Var(make_node(std::move(out), {an}, [an, av](const Tensor& g) {
    Tensor ga = g;
    for (std::int64_t i = 0; i < ga.numel(); ++i)
      if (av[i] <= 0.0) ga[i] = 0.0;
    an->accumulate(ga);
  }));
}

Var matmul(const Var& a, const Var& b) {
  check_rank2(a, "matmul");
  check_rank2(b, "matmul");
  const std::int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k)
    throw ShapeError(msg("matmul: ", shape_str(a.shape()), " x ", shape_str(b.shape())));
  Tensor out({m, n});
  kernels::matmul_nn(a.value().data(), b.value().data(), out.data(), m, k, n);
  auto an = a.node(), bn = b.node();
  Tensor av = a.value(), bv = b.value();
  return Var(make_node(std::move(out), {an, bn}, [an, bn, av, bv, m, k, n](const Tensor& g) {
    if (an->needs_grad) {
      Tensor ga({m, k});
      kernels::matmul_nt(g.data(), bv.data(), ga.data(), m, n, k);
      an->accumulate(ga);
    }
    if (bn->needs_grad) {
      Tensor gb({k, n});
      kernels::matmul_tn(av.data(), g.data(), gb.data(), k, m, n);
      bn->accumulate(gb);
    }
  }));
}

Var matmul_nt(const Var& a, const Var& b) {
  check_rank2(a, "matmul_nt");
  check_rank2(b, "matmul_nt");
  const std::int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  if (b.shape()[1] != k)
    throw ShapeError(msg("matmul_nt: ", shape_str(a.shape()), " x ", shape_str(b.shape()), "^T"));
  Tensor out({m, n});
  kernels::matmul_nt(a.value().data(), b.value().data(), out.data(), m, k, n);
  auto an = a.node(), bn = b.node();
  Tensor av = a.value(), bv = b.value();
  return Var(make_node(std::move(out), {an, bn}, [an, bn, av, bv, m, k, n](const Tensor& g) {
    if (an->needs_grad) {
      Tensor ga({m, k});
      kernels::matmul_nn(g.data(), bv.data(), ga.data(), m, n, k);
      an->accumulate(ga);
    }
    if (bn->needs_grad) {
      Tensor gb({n, k});
      kernels::matmul_tn(g.data(), av.data(), gb.data(), n, m, k);
      bn->accumulate(gb);
    }
  }));
}

Var linear(const Var& x, const Var& w, const Var& b) {
  check_rank2(x, "linear");
  check_rank2(w, "linear");
  const std::int64_t n = x.shape()[0], in = x.shape()[1], out_dim = w.shape()[0];
  if (w.shape()[1] != in || b.value().numel() != out_dim)
    throw ShapeError(msg("linear: x", shape_str(x.shape()), " w", shape_str(w.shape()), " b",
                         shape_str(b.shape())));
  Tensor out({n, out_dim});
  kernels::matmul_nt(x.value().data(), w.value().data(), out.data(), n, in, out_dim);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < out_dim; ++j) out.at(i, j) += b.value()[j];
  auto xn = x.node(), wn = w.node(), bn = b.node();
  Tensor xv = x.value(), wv = w.value();
  return Var(make_node(std::move(out), {xn, wn, bn}, [=](const Tensor& g) {
    if (xn->needs_grad) {
      Tensor gx({n, in});
      kernels::matmul_nn(g.data(), wv.data(), gx.data(), n, out_dim, in);
      xn->accumulate(gx);
    }
    if (wn->needs_grad) {
      Tensor gw({out_dim, in});
      kernels::matmul_tn(g.data(), xv.data(), gw.data(), out_dim, n, in);
      wn->accumulate(gw);
    }
    if (bn->needs_grad) {
      Tensor gb(Shape{out_dim});
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < out_dim; ++j) gb[j] += g.at(i, j);
      bn->accumulate(gb);
    }
  }));
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::int64_t n = parts[0].shape()[0];
  std::int64_t total = 0;
  for (const auto& p : parts) {
    check_rank2(p, "concat_cols");
    if (p.shape()[0] != n) throw ShapeError("concat_cols: row count mismatch");
    total += p.shape()[1];
  }
  Tensor out({n, total});
  std::int64_t col = 0;
  for (const auto& p : parts) {
    const std::int64_t d = p.shape()[1];
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < d; ++j) out.at(i, col + j) = p.value().at(i, j);
    col += d;
  }
  std::vector<detail::NodePtr> nodes;
  std::vector<std::int64_t> widths;
  for (const auto& p : parts) {
    nodes.push_back(p.node());
    widths.push_back(p.shape()[1]);
  }
  return Var(make_node(std::move(out), nodes, [nodes, widths, n](const Tensor& g) {
    std::int64_t col = 0;
    for (std::size_t idx = 0; idx < nodes.size(); ++idx) {
      const std::int64_t d = widths[idx];
      if (nodes[idx]->needs_grad) {
        Tensor gp({n, d});
        for (std::int64_t i = 0; i < n; ++i)
          for (std::int64_t j = 0; j < d; ++j) gp.at(i, j) = g.at(i, col + j);
        nodes[idx]->accumulate(gp);
      }
      col += d;
    }
  }));
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::int64_t d = parts[0].shape()[1];
  std::int64_t total = 0;
  for (const auto& p : parts) {
    check_rank2(p, "concat_rows");
    if (p.shape()[1] != d) throw ShapeError("concat_rows: column count mismatch");
    total += p.shape()[0];
  }
  Tensor out({total, d});
  std::int64_t row = 0;
  for (const auto& p : parts) {
    const std::int64_t r = p.shape()[0];
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < d; ++j) out.at(row + i, j) = p.value().at(i, j);
    row += r;
  }
  std::vector<detail::NodePtr> nodes;
  std::vector<std::int64_t> heights;
  for (const auto& p : parts) {
    nodes.push_back(p.node());
    heights.push_back(p.shape()[0]);
  }
  return Var(make_node(std::move(out), nodes, [nodes, heights, d](const Tensor& g) {
    std::int64_t row = 0;
    for (std::size_t idx = 0; idx < nodes.size(); ++idx) {
      const std::int64_t r = heights[idx];
      if (nodes[idx]->needs_grad) {
        Tensor gp({r, d});
        for (std::int64_t i = 0; i < r; ++i)
          for (std::int64_t j = 0; j < d; ++j) gp.at(i, j) = g.at(row + i, j);
        nodes[idx]->accumulate(gp);
      }
      row += r;
    }
  }));
}

Var slice_cols(const Var& x, std::int64_t c0, std::int64_t c1) {
  check_rank2(x, "slice_cols");
  const std::int64_t n = x.shape()[0], d = x.shape()[1];
  if (c0 < 0 || c1 > d || c0 >= c1) throw ShapeError(msg("slice_cols: [", c0, ",", c1, ") of width ", d));
  Tensor out({n, c1 - c0});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = c0; j < c1; ++j) out.at(i, j - c0) = x.value().at(i, j);
  auto xn = x.node();
  return Var(make_node(std::move(out), {xn}, [xn, n, d, c0, c1](const Tensor& g) {
    Tensor gx({n, d});
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = c0; j < c1; ++j) gx.at(i, j) = g.at(i, j - c0);
    xn->accumulate(gx);
  }));
}

Var mean_rows(const Var& x) {
  check_rank2(x, "mean_rows");
  const std::int64_t n = x.shape()[0], d = x.shape()[1];
  Tensor out({1, d});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d; ++j) out[j] += x.value().at(i, j);
  for (std::int64_t j = 0; j < d; ++j) out[j] /= static_cast<Scalar>(n);
  auto xn = x.node();
  return Var(make_node(std::move(out), {xn}, [xn, n, d](const Tensor& g) {
    Tensor gx({n, d});
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < d; ++j) gx.at(i, j) = g[j] / static_cast<Scalar>(n);
    xn->accumulate(gx);
  }));
}

Var sum_squares(const Var& x) {
  Scalar acc = 0.0;
  for (std::int64_t i = 0; i < x.value().numel(); ++i) acc += x.value()[i] * x.value()[i];
  auto xn = x.node();
  Tensor xv = x.value();
  return Var(make_node(Tensor::scalar(acc), {xn}, [xn, xv](const Tensor& g) {
    Tensor gx = xv;
    for (auto& v : gx.vec()) v *= 2.0 * g[0];
    xn->accumulate(gx);
  }));
}

Var weighted_sum(const Var& x, const Tensor& weights) {
  if (!(x.value().shape() == weights.shape()))
    throw ShapeError("weighted_sum: weight shape mismatch");
  Scalar acc = 0.0;
  for (std::int64_t i = 0; i < weights.numel(); ++i) acc += x.value()[i] * weights[i];
  auto xn = x.node();
  return Var(make_node(Tensor::scalar(acc), {xn}, [xn, weights](const Tensor& g) {
    Tensor gx = weights;
    for (auto& v : gx.vec()) v *= g[0];
    xn->accumulate(gx);
  }));
}

Var softmax_rows(const Var& x) {
  check_rank2(x, "softmax_rows");
  const std::int64_t n = x.shape()[0], d = x.shape()[1];
  Tensor out({n, d});
  for (std::int64_t i = 0; i < n; ++i) {
    Scalar mx = x.value().at(i, 0);
    for (std::int64_t j = 1; j < d; ++j) mx = std::max(mx, x.value().at(i, j));
    Scalar sum = 0.0;
    for (std::int64_t j = 0; j < d; ++j) {
      const Scalar e = std::exp(x.value().at(i, j) - mx);
      out.at(i, j) = e;
      sum += e;
    }
    for (std::int64_t j = 0; j < d; ++j) out.at(i, j) /= sum;
  }
  auto xn = x.node();
  Tensor y = out;
  return Var(make_node(std::move(out), {xn}, [xn, y, n, d](const Tensor& g) {
    Tensor gx({n, d});
    for (std::int64_t i = 0; i < n; ++i) {
      Scalar dot = 0.0;
      for (std::int64_t j = 0; j < d; ++j) dot += g.at(i, j) * y.at(i, j);
      for (std::int64_t j = 0; j < d; ++j) gx.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
    }
    xn->accumulate(gx);
  }));
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, Scalar eps) {
  check_rank2(x, "layer_norm");
  const std::int64_t n = x.shape()[0], d = x.shape()[1];
  if (gamma.value().numel() != d || beta.value().numel() != d)
    throw ShapeError("layer_norm: affine parameter size mismatch");
  Tensor out({n, d});
  Tensor xhat({n, d});
  Tensor inv_std(Shape{n});
  for (std::int64_t i = 0; i < n; ++i) {
    Scalar mean = 0.0;
    for (std::int64_t j = 0; j < d; ++j) mean += x.value().at(i, j);
    mean /= static_cast<Scalar>(d);
    Scalar var = 0.0;
    for (std::int64_t j = 0; j < d; ++j) {
      const Scalar c = x.value().at(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<Scalar>(d);
    const Scalar istd = 1.0 / std::sqrt(var + eps);
    inv_std[i] = istd;
    for (std::int64_t j = 0; j < d; ++j) {
      const Scalar xh = (x.value().at(i, j) - mean) * istd;
      xhat.at(i, j) = xh;
      out.at(i, j) = gamma.value()[j] * xh + beta.value()[j];
    }
  }
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  Tensor gv = gamma.value();
  return Var(make_node(std::move(out), {xn, gn, bn}, [=](const Tensor& g) {
    if (gn->needs_grad) {
      Tensor gg(Shape{d});
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < d; ++j) gg[j] += g.at(i, j) * xhat.at(i, j);
      gn->accumulate(gg);
    }
    if (bn->needs_grad) {
      Tensor gb(Shape{d});
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < d; ++j) gb[j] += g.at(i, j);
      bn->accumulate(gb);
    }
    if (xn->needs_grad) {
      Tensor gx({n, d});
      for (std::int64_t i = 0; i < n; ++i) {
        Scalar mean_gy = 0.0, mean_gy_xhat = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
          const Scalar gy = g.at(i, j) * gv[j];
          mean_gy += gy;
          mean_gy_xhat += gy * xhat.at(i, j);
        }
        mean_gy /= static_cast<Scalar>(d);
        mean_gy_xhat /= static_cast<Scalar>(d);
        for (std::int64_t j = 0; j < d; ++j) {
          const Scalar gy = g.at(i, j) * gv[j];
          gx.at(i, j) = inv_std[i] * (gy - mean_gy - xhat.at(i, j) * mean_gy_xhat);
        }
      }
      xn->accumulate(gx);
    }
  }));
}

Var dropout(const Var& x, Scalar p, RandomStream& rng, Mode mode) {
  if (mode == Mode::kEval || p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("dropout: rate must be < 1");
  const Scalar keep = 1.0 - p;
  Tensor mask(x.value().shape());
  for (std::int64_t i = 0; i < mask.numel(); ++i) mask[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  Tensor out = x.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= mask[i];
  auto xn = x.node();
  return Var(make_node(std::move(out), {xn}, [xn, mask](const Tensor& g) {
    Tensor gx = g;
    for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] *= mask[i];
    xn->accumulate(gx);
  }));
}

Var conv2d(const Var& x, const Var& w, const Var& b, std::int64_t stride, std::int64_t pad) {
  if (x.value().rank() != 3 || w.value().rank() != 4)
    throw ShapeError(msg("conv2d: x", shape_str(x.shape()), " w", shape_str(w.shape())));
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (ws[1] != xs[0])
    throw ShapeError(msg("conv2d: input channels ", xs[0], " vs weight expects ", ws[1]));
  if (b.defined() && b.value().numel() != ws[0])
    throw ShapeError(msg("conv2d: bias size ", b.value().numel(), " vs ", ws[0], " filters"));
  const auto d = kernels::Conv2dDims::make(xs[0], xs[1], xs[2], ws[0], ws[2], ws[3], stride, pad);
  Tensor out({d.cout, d.ho, d.wo});
  kernels::conv2d_forward(x.value().data(), w.value().data(), b.defined() ? b.value().data() : nullptr,
                          out.data(), d);
  auto xn = x.node(), wn = w.node();
  auto bn = b.defined() ? b.node() : nullptr;
  Tensor xv = x.value(), wv = w.value();
  std::vector<detail::NodePtr> parents{xn, wn};
  if (bn) parents.push_back(bn);
  return Var(make_node(std::move(out), parents, [=](const Tensor& g) {
    if (xn->needs_grad) {
      Tensor gx({d.cin, d.h, d.w});
      kernels::conv2d_backward_input(g.data(), wv.data(), gx.data(), d);
      xn->accumulate(gx);
    }
    if (wn->needs_grad || (bn && bn->needs_grad)) {
      Tensor gw({d.cout, d.cin, d.kh, d.kw});
      Tensor gb = bn ? Tensor(Shape{d.cout}) : Tensor();
      kernels::conv2d_backward_weight(g.data(), xv.data(), gw.data(), bn ? gb.data() : nullptr, d);
      if (wn->needs_grad) wn->accumulate(gw);
      if (bn && bn->needs_grad) bn->accumulate(gb);
    }
  }));
}

Var shift3d(const Var& x, const Var& offsets, std::int64_t temporal_groups) {
  if (x.value().rank() != 3) throw ShapeError(msg("shift3d: x", shape_str(x.shape())));
  const auto& xs = x.shape();
  if (offsets.value().rank() != 2 || offsets.shape()[0] != xs[0] || offsets.shape()[1] != 3)
    throw ShapeError(msg("shift3d: offsets must be [", xs[0], ",3], got ", shape_str(offsets.shape())));
  if (!offsets.value().all_finite()) throw ValidationError("shift3d: non-finite offsets");
  const auto d = kernels::ShiftDims::make(xs[0], xs[1], xs[2], temporal_groups);
  Tensor out(x.value().shape());
  kernels::shift3d_forward(x.value().data(), offsets.value().data(), out.data(), d);
  auto xn = x.node(), on = offsets.node();
  Tensor xv = x.value(), ov = offsets.value();
  return Var(make_node(std::move(out), {xn, on}, [=](const Tensor& g) {
    if (xn->needs_grad) {
      Tensor gx(xv.shape());
      kernels::shift3d_backward_input(g.data(), ov.data(), gx.data(), d);
      xn->accumulate(gx);
    }
    if (on->needs_grad) {
      Tensor go(ov.shape());
      kernels::shift3d_backward_offsets(g.data(), xv.data(), ov.data(), go.data(), d);
      on->accumulate(go);
    }
  }));
}

Var global_avg_pool(const Var& x) {
  if (x.value().rank() != 3) throw ShapeError(msg("global_avg_pool: x", shape_str(x.shape())));
  const std::int64_t c = x.shape()[0], hw = x.shape()[1] * x.shape()[2];
  Tensor out({1, c});
  for (std::int64_t ci = 0; ci < c; ++ci) {
    Scalar acc = 0.0;
    const Scalar* p = x.value().data() + ci * hw;
    for (std::int64_t i = 0; i < hw; ++i) acc += p[i];
    out[ci] = acc / static_cast<Scalar>(hw);
  }
  auto xn = x.node();
  Shape xs = x.shape();
  return Var(make_node(std::move(out), {xn}, [xn, xs, c, hw](const Tensor& g) {
    Tensor gx(xs);
    for (std::int64_t ci = 0; ci < c; ++ci) {
      const Scalar v = g[ci] / static_cast<Scalar>(hw);
      Scalar* p = gx.data() + ci * hw;
      for (std::int64_t i = 0; i < hw; ++i) p[i] = v;
    }
    xn->accumulate(gx);
  }));
}

Scalar sigmoid(Scalar z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (1.0 + e);
}

Scalar softplus(Scalar z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

Var bce_with_logits(const Var& logit, int label, Scalar pos_weight) {
  if (logit.value().numel() != 1) throw ShapeError("bce_with_logits: logit must be a single element");
  if (pos_weight <= 0.0) throw ConfigError(msg("bce_with_logits: pos_weight ", pos_weight, " must be > 0"));
  const Scalar z = logit.value()[0];
  if (!std::isfinite(z)) throw ValidationError("bce_with_logits: non-finite logit");
  const Scalar y = label ? 1.0 : 0.0;
  const Scalar loss = pos_weight * y * softplus(-z) + (1.0 - y) * softplus(z);
  auto zn = logit.node();
  return Var(make_node(Tensor::scalar(loss), {zn}, [zn, z, y, pos_weight](const Tensor& g) {
    const Scalar dz = (1.0 - y) * sigmoid(z) - pos_weight * y * sigmoid(-z);
    zn->accumulate(Tensor::scalar(g[0] * dz));
  }));
}

}  // namespace intent
