#include "wend/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "wend/error.hpp"

namespace wend::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

std::atomic<std::uint64_t> g_sequence{0};

std::shared_ptr<Node> make_node(Shape shape, std::string op) {
  auto n = std::make_shared<Node>();
  n->value.assign(numel(shape), 0.0);
  n->shape = std::move(shape);
  n->op = std::move(op);
  n->seq = ++g_sequence;
  return n;
}

// Wires inputs and backward onto `out` when any input needs a gradient.
void attach(const std::shared_ptr<Node>& out, std::vector<std::shared_ptr<Node>> inputs,
            std::function<void(Node&)> fn) {
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const auto& n) { return n && n->requires_grad; });
  if (!needs) return;
  out->requires_grad = true;
  out->inputs = std::move(inputs);
  out->backward = std::move(fn);
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw ValidationError(op + ": incompatible shapes " + shape_string(a) + " and " +
                        shape_string(b));
}

void expect_rank(const std::string& op, const Tensor& t, std::size_t rank) {
  if (t.shape().size() != rank) {
    throw ValidationError(op + ": expected rank " + std::to_string(rank) + ", got " +
                          shape_string(t.shape()));
  }
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  for (std::size_t d : shape) require(d > 0, "tensor dimensions must be positive");
  auto n = make_node(std::move(shape), "leaf");
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t d : shape) require(d > 0, "tensor dimensions must be positive");
  require(values.size() == numel(shape),
          "tensor data length " + std::to_string(values.size()) + " does not match shape " +
              shape_string(shape));
  auto n = make_node(std::move(shape), "leaf");
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

double Tensor::item() const {
  require(size() == 1, "item() needs a single-element tensor, got " + shape_string(shape()));
  return node_->value[0];
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  expect_rank("conv2d input", x, 4);
  expect_rank("conv2d weight", w, 4);
  require(stride >= 1 && pad >= 0, "conv2d: stride must be >= 1 and pad >= 0");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t o = w.dim(0), k = w.dim(2);
  if (w.dim(1) != c || w.dim(3) != k) shape_error("conv2d", x.shape(), w.shape());
  if (b && (b.shape().size() != 1 || b.dim(0) != o)) shape_error("conv2d bias", w.shape(), b.shape());
  const long hp = static_cast<long>(h) + 2 * pad - static_cast<long>(k);
  const long wp = static_cast<long>(wd) + 2 * pad - static_cast<long>(k);
  if (hp < 0 || wp < 0) shape_error("conv2d", x.shape(), w.shape());
  const std::size_t ho = static_cast<std::size_t>(hp / stride + 1);
  const std::size_t wo = static_cast<std::size_t>(wp / stride + 1);
  const std::size_t pix = ho * wo;
  const std::size_t ckk = c * k * k;
  const std::size_t cols_w = n * pix;

  // im2col: row = (ci, ky, kx), col = (ni, oy, ox)
  auto cols = std::make_shared<std::vector<double>>(ckk * cols_w, 0.0);
  const auto xd = x.data();
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = cols->data() + ((ci * k + ky) * k + kx) * cols_w;
        for (std::size_t ni = 0; ni < n; ++ni) {
          const double* plane = xd.data() + (ni * c + ci) * h * wd;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const long iy = static_cast<long>(oy * stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<long>(h)) continue;
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const long ix = static_cast<long>(ox * stride + kx) - pad;
              if (ix < 0 || ix >= static_cast<long>(wd)) continue;
              row[ni * pix + oy * wo + ox] = plane[iy * static_cast<long>(wd) + ix];
            }
          }
        }
      }
    }
  }

  RowMat y(o, cols_w);
  y.noalias() = ConstMatMap(w.data().data(), o, ckk) * ConstMatMap(cols->data(), ckk, cols_w);

  auto out = make_node({n, o, ho, wo}, "conv2d");
  for (std::size_t ni = 0; ni < n; ++ni) {
    for (std::size_t oi = 0; oi < o; ++oi) {
      const double bias = b ? b.data()[oi] : 0.0;
      double* dst = out->value.data() + (ni * o + oi) * pix;
      const double* src = y.data() + oi * cols_w + ni * pix;
      for (std::size_t p = 0; p < pix; ++p) dst[p] = src[p] + bias;
    }
  }

  auto xn = x.ptr();
  auto wn = w.ptr();
  auto bn = b ? b.ptr() : nullptr;
  attach(out, {xn, wn, bn}, [=](Node& self) {
    RowMat dy(o, cols_w);
    for (std::size_t ni = 0; ni < n; ++ni) {
      for (std::size_t oi = 0; oi < o; ++oi) {
        const double* src = self.grad.data() + (ni * o + oi) * pix;
        std::copy(src, src + pix, dy.data() + oi * cols_w + ni * pix);
      }
    }
    if (bn && bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t oi = 0; oi < o; ++oi) bn->grad[oi] += dy.row(oi).sum();
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      MatMap(wn->grad.data(), o, ckk).noalias() +=
          dy * ConstMatMap(cols->data(), ckk, cols_w).transpose();
    }
    if (xn->requires_grad) {
      xn->ensure_grad();
      RowMat dcols(ckk, cols_w);
      dcols.noalias() = ConstMatMap(wn->value.data(), o, ckk).transpose() * dy;
      for (std::size_t ci = 0; ci < c; ++ci) {
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx) {
            const double* row = dcols.data() + ((ci * k + ky) * k + kx) * cols_w;
            for (std::size_t ni = 0; ni < n; ++ni) {
              double* plane = xn->grad.data() + (ni * c + ci) * h * wd;
              for (std::size_t oy = 0; oy < ho; ++oy) {
                const long iy = static_cast<long>(oy * stride + ky) - pad;
                if (iy < 0 || iy >= static_cast<long>(h)) continue;
                for (std::size_t ox = 0; ox < wo; ++ox) {
                  const long ix = static_cast<long>(ox * stride + kx) - pad;
                  if (ix < 0 || ix >= static_cast<long>(wd)) continue;
                  plane[iy * static_cast<long>(wd) + ix] += row[ni * pix + oy * wo + ox];
                }
              }
            }
          }
        }
      }
    }
  });
  return Tensor(out);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  expect_rank("linear input", x, 2);
  expect_rank("linear weight", w, 2);
  const std::size_t n = x.dim(0), in = x.dim(1), o = w.dim(0);
  if (w.dim(1) != in) shape_error("linear", x.shape(), w.shape());
  if (b && (b.shape().size() != 1 || b.dim(0) != o)) shape_error("linear bias", w.shape(), b.shape());

  auto out = make_node({n, o}, "linear");
  MatMap y(out->value.data(), n, o);
  y.noalias() = ConstMatMap(x.data().data(), n, in) * ConstMatMap(w.data().data(), o, in).transpose();
  if (b) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < o; ++j) y(i, j) += b.data()[j];
  }
  auto xn = x.ptr();
  auto wn = w.ptr();
  auto bn = b ? b.ptr() : nullptr;
  attach(out, {xn, wn, bn}, [=](Node& self) {
    ConstMatMap dy(self.grad.data(), n, o);
    if (xn->requires_grad) {
      xn->ensure_grad();
      MatMap(xn->grad.data(), n, in).noalias() += dy * ConstMatMap(wn->value.data(), o, in);
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      MatMap(wn->grad.data(), o, in).noalias() +=
          dy.transpose() * ConstMatMap(xn->value.data(), n, in);
    }
    if (bn && bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t j = 0; j < o; ++j) bn->grad[j] += dy.col(j).sum();
    }
  });
  return Tensor(out);
}

namespace {

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, const char* name, Fwd fwd, Deriv deriv) {
  auto out = make_node(x.shape(), name);
  const auto xv = x.data();
  for (std::size_t i = 0; i < xv.size(); ++i) out->value[i] = fwd(xv[i]);
  auto xn = x.ptr();
  attach(out, {xn}, [xn, deriv](Node& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      xn->grad[i] += self.grad[i] * deriv(xn->value[i], self.value[i]);
    }
  });
  return Tensor(out);
}

}  // namespace

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double out) { return out * (1.0 - out); });
}

Tensor add_scalar(const Tensor& x, double s) {
  return unary(
      x, "add_scalar", [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double s) {
  return unary(
      x, "mul_scalar", [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
  auto out = make_node(a.shape(), "add");
  for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = a.data()[i] + b.data()[i];
  auto an = a.ptr();
  auto bn = b.ptr();
  attach(out, {an, bn}, [an, bn](Node& self) {
    for (const auto& in : {an, bn}) {
      if (!in->requires_grad) continue;
      in->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
    }
  });
  return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  auto out = make_node(a.shape(), "mul");
  for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = a.data()[i] * b.data()[i];
  auto an = a.ptr();
  auto bn = b.ptr();
  attach(out, {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->value[i];
    }
  });
  return Tensor(out);
}

Tensor sum(const Tensor& x) {
  auto out = make_node({1}, "sum");
  out->value[0] = std::accumulate(x.data().begin(), x.data().end(), 0.0);
  auto xn = x.ptr();
  attach(out, {xn}, [xn](Node& self) {
    xn->ensure_grad();
    for (double& g : xn->grad) g += self.grad[0];
  });
  return Tensor(out);
}

Tensor mean(const Tensor& x) { return mul_scalar(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) shape_error("reshape", x.shape(), shape);
  auto out = make_node(std::move(shape), "reshape");
  out->value.assign(x.data().begin(), x.data().end());
  auto xn = x.ptr();
  attach(out, {xn}, [xn](Node& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
  });
  return Tensor(out);
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t end) {
  const Shape& s = x.shape();
  require(axis < s.size(), "slice: axis " + std::to_string(axis) + " out of range for " +
                               shape_string(s));
  require(start < end && end <= s[axis], "slice: range [" + std::to_string(start) + "," +
                                             std::to_string(end) + ") invalid for " +
                                             shape_string(s));
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  Shape os = s;
  os[axis] = end - start;
  auto out = make_node(os, "slice");
  const std::size_t span_len = (end - start) * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src = x.data().data() + (o * s[axis] + start) * inner;
    std::copy(src, src + span_len, out->value.data() + o * span_len);
  }
  auto xn = x.ptr();
  const std::size_t len = s[axis];
  attach(out, {xn}, [=](Node& self) {
    xn->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o) {
      double* dst = xn->grad.data() + (o * len + start) * inner;
      const double* src = self.grad.data() + o * span_len;
      for (std::size_t i = 0; i < span_len; ++i) dst[i] += src[i];
    }
  });
  return Tensor(out);
}

Tensor to_nhwc(const Tensor& x) {
  expect_rank("to_nhwc", x, 4);
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  auto out = make_node({n, h, w, c}, "to_nhwc");
  const auto xv = x.data();
  for (std::size_t ni = 0; ni < n; ++ni)
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t p = 0; p < h * w; ++p)
        out->value[(ni * h * w + p) * c + ci] = xv[(ni * c + ci) * h * w + p];
  auto xn = x.ptr();
  attach(out, {xn}, [=](Node& self) {
    xn->ensure_grad();
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t p = 0; p < h * w; ++p)
          xn->grad[(ni * c + ci) * h * w + p] += self.grad[(ni * h * w + p) * c + ci];
  });
  return Tensor(out);
}

Tensor global_avg_pool(const Tensor& x) {
  expect_rank("global_avg_pool", x, 4);
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  auto out = make_node({n, c}, "global_avg_pool");
  const double inv = 1.0 / static_cast<double>(hw);
  for (std::size_t i = 0; i < n * c; ++i) {
    const double* src = x.data().data() + i * hw;
    out->value[i] = std::accumulate(src, src + hw, 0.0) * inv;
  }
  auto xn = x.ptr();
  attach(out, {xn}, [=](Node& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < n * c; ++i)
      for (std::size_t p = 0; p < hw; ++p) xn->grad[i * hw + p] += self.grad[i] * inv;
  });
  return Tensor(out);
}

Tensor external_loss(std::span<const Tensor> inputs, double value,
                     std::vector<std::vector<double>> grads) {
  require(inputs.size() == grads.size(), "external_loss: one gradient per input required");
  std::vector<std::shared_ptr<Node>> nodes;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (grads[i].size() != inputs[i].size()) {
      shape_error("external_loss", inputs[i].shape(), {grads[i].size()});
    }
    nodes.push_back(inputs[i].ptr());
  }
  auto out = make_node({1}, "external_loss");
  out->value[0] = value;
  auto shared = std::make_shared<std::vector<std::vector<double>>>(std::move(grads));
  attach(out, nodes, [nodes, shared](Node& self) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!nodes[i]->requires_grad) continue;
      nodes[i]->ensure_grad();
      const auto& g = (*shared)[i];
      for (std::size_t j = 0; j < g.size(); ++j) nodes[i]->grad[j] += self.grad[0] * g[j];
    }
  });
  return Tensor(out);
}

void backward(const Tensor& loss) {
  require(loss.size() == 1, "backward needs a scalar loss, got " + shape_string(loss.shape()));
  if (!loss.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{&loss.node()};
  while (!stack.empty()) {
    Node* cur = stack.back();
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    order.push_back(cur);
    for (const auto& in : cur->inputs) {
      if (in && in->requires_grad) stack.push_back(in.get());
    }
  }
  std::sort(order.begin(), order.end(), [](const Node* a, const Node* b) { return a->seq > b->seq; });

  for (Node* n : order) {
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  }
  Node& root = loss.node();
  root.ensure_grad();
  root.grad[0] += 1.0;
  for (Node* n : order) {
    if (n->backward) n->backward(*n);
  }
}

}  // namespace wend::ad
