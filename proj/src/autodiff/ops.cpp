#include "csireid/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "csireid/error.hpp"

namespace csireid::ad {

namespace {

using detail::Node;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

MapC view(const Node& n) {
  return {n.value.data(), static_cast<Eigen::Index>(n.shape.rows),
          static_cast<Eigen::Index>(n.shape.cols)};
}
MapC grad_view(const Node& n) {
  return {n.grad.data(), static_cast<Eigen::Index>(n.shape.rows),
          static_cast<Eigen::Index>(n.shape.cols)};
}
Map grad_acc(Node& n) {
  auto& g = n.ensure_grad();
  return {g.data(), static_cast<Eigen::Index>(n.shape.rows),
          static_cast<Eigen::Index>(n.shape.cols)};
}

[[noreturn]] void shape_error(const char* op, Shape a, Shape b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows) +
                              "x" + std::to_string(a.cols) + " vs " + std::to_string(b.rows) +
                              "x" + std::to_string(b.cols) + ")");
}

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> bw) {
#ifndef NDEBUG
  for (double v : value) {
    if (!std::isfinite(v)) throw NumericError("non-finite value produced by a tensor op");
  }
#endif
  Tensor out = Tensor::from(shape.rows, shape.cols, std::move(value));
  if (!grad_enabled()) return out;
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [](const Tensor& p) { return p.requires_grad(); });
  if (!needs) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.parents.reserve(parents.size());
  for (auto& p : parents) node.parents.push_back(p.node());
  node.backward = std::move(bw);
  return out;
}

bool wants(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }

enum class Broadcast { same, row, scalar };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
  if (b.size() == 1) return Broadcast::scalar;
  shape_error(op, a.shape(), b.shape());
}

// Reduces an (m x n) gradient onto a broadcast operand.
void accumulate_broadcast(Node& target, Broadcast kind, const std::vector<double>& g,
                          std::size_t rows, std::size_t cols) {
  auto& tg = target.ensure_grad();
  switch (kind) {
    case Broadcast::same:
      for (std::size_t i = 0; i < g.size(); ++i) tg[i] += g[i];
      break;
    case Broadcast::row:
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) tg[c] += g[r * cols + c];
      }
      break;
    case Broadcast::scalar: {
      double s = 0.0;
      for (double v : g) s += v;
      tg[0] += s;
      break;
    }
  }
}

double broadcast_at(const std::vector<double>& b, Broadcast kind, std::size_t i, std::size_t cols) {
  switch (kind) {
    case Broadcast::same: return b[i];
    case Broadcast::row: return b[i % cols];
    case Broadcast::scalar: return b[0];
  }
  return 0.0;
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.size());
  const auto in = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [deriv](Node& self) {
    Node& p = *self.parents[0];
    auto& pg = p.ensure_grad();
    for (std::size_t i = 0; i < pg.size(); ++i) {
      pg[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
    }
  });
}

void check_axis(int axis) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("axis must be 0 or 1");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a.shape(), b.shape());
  const Shape shape{a.rows(), b.cols()};
  std::vector<double> out(shape.size());
  Map(out.data(), static_cast<Eigen::Index>(shape.rows), static_cast<Eigen::Index>(shape.cols))
      .noalias() = view(*a.node()) * view(*b.node());
  return make_result(shape, std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const auto g = grad_view(self);
    if (pa.requires_grad) grad_acc(pa).noalias() += g * view(pb).transpose();
    if (pb.requires_grad) grad_acc(pb).noalias() += view(pa).transpose() * g;
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const auto kind = broadcast_kind("add", a, b);
  std::vector<double> out(a.size());
  const auto& bv = b.node()->value;
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + broadcast_at(bv, kind, i, a.cols());
  return make_result(a.shape(), std::move(out), {a, b}, [kind](Node& self) {
    if (wants(self, 0)) accumulate_broadcast(*self.parents[0], Broadcast::same, self.grad, 0, 0);
    if (wants(self, 1)) {
      accumulate_broadcast(*self.parents[1], kind, self.grad, self.shape.rows, self.shape.cols);
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const auto kind = broadcast_kind("sub", a, b);
  std::vector<double> out(a.size());
  const auto& bv = b.node()->value;
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - broadcast_at(bv, kind, i, a.cols());
  return make_result(a.shape(), std::move(out), {a, b}, [kind](Node& self) {
    if (wants(self, 0)) accumulate_broadcast(*self.parents[0], Broadcast::same, self.grad, 0, 0);
    if (wants(self, 1)) {
      std::vector<double> neg(self.grad.size());
      for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -self.grad[i];
      accumulate_broadcast(*self.parents[1], kind, neg, self.shape.rows, self.shape.cols);
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto kind = broadcast_kind("mul", a, b);
  std::vector<double> out(a.size());
  const auto& bv = b.node()->value;
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * broadcast_at(bv, kind, i, a.cols());
  return make_result(a.shape(), std::move(out), {a, b}, [kind](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const std::size_t cols = self.shape.cols;
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += self.grad[i] * broadcast_at(pb.value, kind, i, cols);
      }
    }
    if (pb.requires_grad) {
      std::vector<double> prod(self.grad.size());
      for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = self.grad[i] * pa.value[i];
      accumulate_broadcast(pb, kind, prod, self.shape.rows, cols);
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  check_axis(axis);
  if (parts.empty()) throw std::invalid_argument("concat of zero tensors");
  Shape shape = parts[0].shape();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (axis == 0) {
      if (parts[i].cols() != shape.cols) shape_error("concat", parts[0].shape(), parts[i].shape());
      shape.rows += parts[i].rows();
    } else {
      if (parts[i].rows() != shape.rows) shape_error("concat", parts[0].shape(), parts[i].shape());
      shape.cols += parts[i].cols();
    }
  }
  std::vector<double> out(shape.size());
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const auto v = p.values();
    if (axis == 0) {
      std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(offset * shape.cols));
      offset += p.rows();
    } else {
      for (std::size_t r = 0; r < shape.rows; ++r) {
        std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(r * p.cols()), p.cols(),
                    out.begin() + static_cast<std::ptrdiff_t>(r * shape.cols + offset));
      }
      offset += p.cols();
    }
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_result(shape, std::move(out), std::move(parents), [axis, offsets](Node& self) {
    const std::size_t cols = self.shape.cols;
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      Node& p = *self.parents[i];
      if (!p.requires_grad) continue;
      auto& g = p.ensure_grad();
      if (axis == 0) {
        const double* src = self.grad.data() + offsets[i] * cols;
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += src[j];
      } else {
        for (std::size_t r = 0; r < p.shape.rows; ++r) {
          const double* src = self.grad.data() + r * cols + offsets[i];
          double* dst = g.data() + r * p.shape.cols;
          for (std::size_t c = 0; c < p.shape.cols; ++c) dst[c] += src[c];
        }
      }
    }
  });
}

Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t length) {
  check_axis(axis);
  const std::size_t extent = axis == 0 ? x.rows() : x.cols();
  if (length == 0 || start + length > extent) throw std::invalid_argument("slice out of range");
  const Shape shape = axis == 0 ? Shape{length, x.cols()} : Shape{x.rows(), length};
  std::vector<double> out(shape.size());
  const auto v = x.values();
  if (axis == 0) {
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(start * x.cols()), out.size(), out.begin());
  } else {
    for (std::size_t r = 0; r < shape.rows; ++r) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(r * x.cols() + start), length,
                  out.begin() + static_cast<std::ptrdiff_t>(r * length));
    }
  }
  return make_result(shape, std::move(out), {x}, [axis, start](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    if (axis == 0) {
      double* dst = g.data() + start * p.shape.cols;
      for (std::size_t i = 0; i < self.grad.size(); ++i) dst[i] += self.grad[i];
    } else {
      const std::size_t len = self.shape.cols;
      for (std::size_t r = 0; r < self.shape.rows; ++r) {
        double* dst = g.data() + r * p.shape.cols + start;
        const double* src = self.grad.data() + r * len;
        for (std::size_t c = 0; c < len; ++c) dst[c] += src[c];
      }
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  const std::size_t cols = x.cols();
  std::vector<double> out(rows.size() * cols);
  const auto v = x.values();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) throw std::invalid_argument("gather_rows index out of range");
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(rows[i] * cols), cols,
                out.begin() + static_cast<std::ptrdiff_t>(i * cols));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result({rows.size(), cols}, std::move(out), {x}, [idx](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    const std::size_t c = self.shape.cols;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < c; ++j) g[idx[i] * c + j] += self.grad[i * c + j];
    }
  });
}

Tensor transpose(const Tensor& x) {
  const Shape shape{x.cols(), x.rows()};
  std::vector<double> out(shape.size());
  Map(out.data(), static_cast<Eigen::Index>(shape.rows), static_cast<Eigen::Index>(shape.cols)) =
      view(*x.node()).transpose();
  return make_result(shape, std::move(out), {x}, [](Node& self) {
    grad_acc(*self.parents[0]) += grad_view(self).transpose();
  });
}

Tensor mean_axis(const Tensor& x, int axis) {
  check_axis(axis);
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  if (x.size() == 0) throw std::invalid_argument("mean over an empty axis");
  const auto v = x.values();
  if (axis == 0) {
    std::vector<double> out(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out[c] += v[r * cols + c];
    }
    for (double& o : out) o /= static_cast<double>(rows);
    return make_result({1, cols}, std::move(out), {x}, [](Node& self) {
      Node& p = *self.parents[0];
      auto& g = p.ensure_grad();
      const double inv = 1.0 / static_cast<double>(p.shape.rows);
      for (std::size_t r = 0; r < p.shape.rows; ++r) {
        for (std::size_t c = 0; c < p.shape.cols; ++c) g[r * p.shape.cols + c] += self.grad[c] * inv;
      }
    });
  }
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r] += v[r * cols + c];
    out[r] /= static_cast<double>(cols);
  }
  return make_result({rows, 1}, std::move(out), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    const double inv = 1.0 / static_cast<double>(p.shape.cols);
    for (std::size_t r = 0; r < p.shape.rows; ++r) {
      for (std::size_t c = 0; c < p.shape.cols; ++c) g[r * p.shape.cols + c] += self.grad[r] * inv;
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result({1, 1}, {s}, {x}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw std::invalid_argument("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x,
               [](double v) {
                 if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
                 const double e = std::exp(v);
                 return e / (1.0 + e);
               },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  if (x.size() == 0) throw std::invalid_argument("log of an empty tensor");
  for (double v : x.values()) {
    if (!(v > 0.0)) throw NumericError("log of a non-positive value");
  }
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor softmax(const Tensor& x, int axis) {
  check_axis(axis);
  if (axis == 0) return transpose(softmax(transpose(x), 1));
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  if (cols == 0) throw std::invalid_argument("softmax over an empty axis");
  std::vector<double> out(x.size());
  const auto v = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = v.data() + r * cols;
    double* o = out.data() + r * cols;
    const double peak = *std::max_element(in, in + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (o[c] = std::exp(in[c] - peak));
    for (std::size_t c = 0; c < cols; ++c) o[c] /= z;
  }
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    const std::size_t cols = self.shape.cols;
    for (std::size_t r = 0; r < self.shape.rows; ++r) {
      const double* y = self.value.data() + r * cols;
      const double* dy = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += dy[c] * y[c];
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += y[c] * (dy[c] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  if (gain.rows() != 1 || gain.cols() != cols) shape_error("layer_norm gain", x.shape(), gain.shape());
  if (bias.rows() != 1 || bias.cols() != cols) shape_error("layer_norm bias", x.shape(), bias.shape());
  std::vector<double> out(x.size());
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  const auto v = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = v.data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += in[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (in[c] - mu) * (in[c] - mu);
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (in[c] - mu) * inv;
      (*xhat)[r * cols + c] = h;
      out[r * cols + c] = h * gv[c] + bv[c];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gain, bias}, [xhat, inv_std](Node& self) {
    Node& px = *self.parents[0];
    Node& pg = *self.parents[1];
    Node& pb = *self.parents[2];
    const std::size_t rows = self.shape.rows;
    const std::size_t cols = self.shape.cols;
    const auto n = static_cast<double>(cols);
    if (pg.requires_grad || pb.requires_grad) {
      auto& gg = pg.ensure_grad();
      auto& gb = pb.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          gg[c] += self.grad[r * cols + c] * (*xhat)[r * cols + c];
          gb[c] += self.grad[r * cols + c];
        }
      }
    }
    if (!px.requires_grad) return;
    auto& gx = px.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* dy = self.grad.data() + r * cols;
      const double* h = xhat->data() + r * cols;
      double mean_d = 0.0;
      double mean_dh = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        const double d = dy[c] * pg.value[c];
        mean_d += d;
        mean_dh += d * h[c];
      }
      mean_d /= n;
      mean_dh /= n;
      for (std::size_t c = 0; c < cols; ++c) {
        const double d = dy[c] * pg.value[c];
        gx[r * cols + c] += (*inv_std)[r] * (d - mean_d - h[c] * mean_dh);
      }
    }
  });
}

Tensor dropout(const Tensor& x, double keep_prob, Rng& rng, bool training) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw std::invalid_argument("keep_prob must be in (0, 1]");
  if (!training || keep_prob == 1.0) return x;
  auto mask = std::make_shared<std::vector<double>>(x.size());
  const double scale_kept = 1.0 / keep_prob;
  for (double& m : *mask) m = rng.uniform() < keep_prob ? scale_kept : 0.0;
  std::vector<double> out(x.size());
  const auto v = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] * (*mask)[i];
  return make_result(x.shape(), std::move(out), {x}, [mask](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (*mask)[i];
  });
}

Tensor l2_normalize(const Tensor& x, int axis) {
  check_axis(axis);
  if (axis == 0) return transpose(l2_normalize(transpose(x), 1));
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  std::vector<double> out(x.size());
  auto norms = std::make_shared<std::vector<double>>(rows);
  const auto v = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < cols; ++c) ss += v[r * cols + c] * v[r * cols + c];
    const double norm = std::sqrt(ss);
    if (!(norm > 0.0)) throw NumericError("l2 normalization of a zero vector");
    (*norms)[r] = norm;
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = v[r * cols + c] / norm;
  }
  return make_result(x.shape(), std::move(out), {x}, [norms](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    const std::size_t cols = self.shape.cols;
    for (std::size_t r = 0; r < self.shape.rows; ++r) {
      const double* y = self.value.data() + r * cols;
      const double* dy = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += y[c] * dy[c];
      for (std::size_t c = 0; c < cols; ++c) {
        g[r * cols + c] += (dy[c] - y[c] * dot) / (*norms)[r];
      }
    }
  });
}

}  // namespace csireid::ad
