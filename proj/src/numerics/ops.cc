// maac/numerics/ops.cc

#include "maac/numerics/ops.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace maac::ops {
namespace {

using detail::Node;

Precision precision_of(std::initializer_list<const Var*> xs) {
  for (const Var* x : xs) {
    if (x->defined() && x->value().precision() == Precision::kSingle) {
      return Precision::kSingle;
    }
  }
  return Precision::kDouble;
}

Precision precision_of(std::span<const Var> xs) {
  for (const auto& x : xs) {
    if (x.value().precision() == Precision::kSingle) return Precision::kSingle;
  }
  return Precision::kDouble;
}

// Gradient buffer of input i, or null when that input needs no gradient.
Tensor* grad_in(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  return in.requires_grad ? &in.grad_buffer() : nullptr;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

void require_rank(const Var& a, std::size_t rank, const char* op) {
  if (a.shape().size() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " +
                                std::to_string(rank) + ", got " +
                                shape_string(a.shape()));
  }
}

template <typename Fwd, typename Deriv>
Var unary(const Var& x, const char* name, Fwd fwd, Deriv deriv) {
  Tensor out(x.shape(), 0.0, precision_of({&x}));
  const auto& in = x.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  out.finalize(name);
  return make_result(std::move(out), {x}, [deriv](Node& self) {
    if (Tensor* g = grad_in(self, 0)) {
      const auto& xin = self.inputs[0]->value;
      for (std::size_t i = 0; i < g->size(); ++i) {
        (*g)[i] += self.grad[i] * deriv(xin[i], self.value[i]);
      }
    }
  });
}

struct AxisSplit {
  std::size_t outer, n, inner;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit a{1, s.at(axis), 1};
  for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape(), 0.0, precision_of({&a, &b}));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.value()[i] + b.value()[i];
  }
  out.finalize("add");
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (Tensor* g = grad_in(self, k)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape(), 0.0, precision_of({&a, &b}));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.value()[i] - b.value()[i];
  }
  out.finalize("sub");
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (Tensor* g = grad_in(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (Tensor* g = grad_in(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape(), 0.0, precision_of({&a, &b}));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.value()[i] * b.value()[i];
  }
  out.finalize("mul");
  return make_result(std::move(out), {a, b}, [](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (Tensor* g = grad_in(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        (*g)[i] += self.grad[i] * bv[i];
      }
    }
    if (Tensor* g = grad_in(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        (*g)[i] += self.grad[i] * av[i];
      }
    }
  });
}

Var add_n(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("add_n: no inputs");
  for (const auto& x : xs) require_same_shape(xs[0], x, "add_n");
  Tensor out(xs[0].shape(), 0.0, precision_of(xs));
  for (const auto& x : xs) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += x.value()[i];
  }
  out.finalize("add_n");
  return make_result(std::move(out), std::vector<Var>(xs.begin(), xs.end()),
                     [](Node& self) {
                       for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                         if (Tensor* g = grad_in(self, k)) {
                           for (std::size_t i = 0; i < g->size(); ++i) {
                             (*g)[i] += self.grad[i];
                           }
                         }
                       }
                     });
}

Var scale(const Var& x, double s) {
  return unary(
      x, "scale", [s](double v) { return v * s; },
      [s](double, double) { return s; });
}

Var mul_const(const Var& x, const Tensor& c) {
  if (x.shape() != c.shape()) {
    throw std::invalid_argument("mul_const: shape mismatch");
  }
  Tensor out(x.shape(), 0.0, precision_of({&x}));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * c[i];
  out.finalize("mul_const");
  return make_result(std::move(out), {x}, [c](Node& self) {
    if (Tensor* g = grad_in(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        (*g)[i] += self.grad[i] * c[i];
      }
    }
  });
}

Var relu(const Var& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var exp(const Var& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Var log(const Var& x) {
  return unary(
      x, "log", [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Var square(const Var& x) {
  return unary(
      x, "square", [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Var clamp(const Var& x, double lo, double hi) {
  return unary(
      x, "clamp", [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v < lo || v > hi) ? 0.0 : 1.0; });
}

Var add_row(const Var& a, const Var& v) {
  require_rank(a, 2, "add_row");
  if (v.size() != a.shape()[1]) {
    throw std::invalid_argument("add_row: vector length " +
                                std::to_string(v.size()) + " vs " +
                                shape_string(a.shape()));
  }
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  Tensor out(a.shape(), 0.0, precision_of({&a, &v}));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = a.value()[r * cols + c] + v.value()[c];
    }
  }
  out.finalize("add_row");
  return make_result(std::move(out), {a, v}, [rows, cols](Node& self) {
    if (Tensor* g = grad_in(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (Tensor* g = grad_in(self, 1)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          (*g)[c] += self.grad[r * cols + c];
        }
      }
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw std::invalid_argument("matmul: " + shape_string(a.shape()) + " x " +
                                shape_string(b.shape()));
  }
  Tensor out({m, n}, 0.0, precision_of({&a, &b}));
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  out.finalize("matmul");
  return make_result(std::move(out), {a, b}, [m, k, n](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (Tensor* g = grad_in(self, 0)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            acc += self.grad[i * n + j] * bv[p * n + j];
          }
          (*g)[i * k + p] += acc;
        }
      }
    }
    if (Tensor* g = grad_in(self, 1)) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) {
            (*g)[p * n + j] += aip * self.grad[i * n + j];
          }
        }
      }
    }
  });
}

Var transpose(const Var& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  Tensor out({c, r}, 0.0, precision_of({&a}));
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.value()[i * c + j];
  }
  out.finalize("transpose");
  return make_result(std::move(out), {a}, [r, c](Node& self) {
    if (Tensor* g = grad_in(self, 0)) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          (*g)[i * c + j] += self.grad[j * r + i];
        }
      }
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require_rank(w, 2, "linear");
  const bool vec = x.shape().size() == 1;
  if (!vec) require_rank(x, 2, "linear");
  const std::size_t rows = vec ? 1 : x.shape()[0];
  const std::size_t in = vec ? x.shape()[0] : x.shape()[1];
  const std::size_t outd = w.shape()[0];
  if (w.shape()[1] != in) {
    throw std::invalid_argument("linear: input " + shape_string(x.shape()) +
                                " vs weight " + shape_string(w.shape()));
  }
  const bool has_bias = b.defined();
  if (has_bias && b.size() != outd) {
    throw std::invalid_argument("linear: bias " + shape_string(b.shape()) +
                                " vs weight " + shape_string(w.shape()));
  }
  Shape shape = vec ? Shape{outd} : Shape{rows, outd};
  Tensor out(shape, 0.0, precision_of({&x, &w, &b}));
  const auto& xv = x.value();
  const auto& wv = w.value();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < outd; ++o) {
      double acc = has_bias ? b.value()[o] : 0.0;
      const double* wr = &wv[o * in];
      const double* xr = &xv[r * in];
      for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
      out[r * outd + o] = acc;
    }
  }
  out.finalize("linear");
  std::vector<Var> inputs{x, w};
  if (has_bias) inputs.push_back(b);
  return make_result(
      std::move(out), std::move(inputs),
      [rows, in, outd, has_bias](Node& self) {
        const auto& xv = self.inputs[0]->value;
        const auto& wv = self.inputs[1]->value;
        Tensor* gx = grad_in(self, 0);
        Tensor* gw = grad_in(self, 1);
        Tensor* gb = has_bias ? grad_in(self, 2) : nullptr;
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t o = 0; o < outd; ++o) {
            const double go = self.grad[r * outd + o];
            if (go == 0.0) continue;
            if (gb) (*gb)[o] += go;
            if (gx) {
              for (std::size_t i = 0; i < in; ++i) {
                (*gx)[r * in + i] += go * wv[o * in + i];
              }
            }
            if (gw) {
              for (std::size_t i = 0; i < in; ++i) {
                (*gw)[o * in + i] += go * xv[r * in + i];
              }
            }
          }
        }
      });
}

Var linear(const Var& x, const Var& w) { return linear(x, w, Var()); }

Var sum(const Var& x) {
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  Tensor out({1}, acc, precision_of({&x}));
  out.finalize("sum");
  return make_result(std::move(out), {x}, [](Node& self) {
    if (Tensor* g = grad_in(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[0];
    }
  });
}

Var mean(const Var& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Var mean_axes(const Var& x, std::span<const std::size_t> axes) {
  const Shape& s = x.shape();
  std::vector<bool> reduce(s.size(), false);
  for (auto a : axes) {
    if (a >= s.size()) {
      throw std::invalid_argument("mean_axes: axis out of range for " +
                                  shape_string(s));
    }
    reduce[a] = true;
  }
  if (axes.empty()) throw std::invalid_argument("mean_axes: no axes");
  Shape out_shape;
  std::size_t count = 1;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (reduce[i]) {
      count *= s[i];
    } else {
      out_shape.push_back(s[i]);
    }
  }
  if (out_shape.empty()) out_shape = {1};

  // Map every input index to its output index.
  const std::size_t total = x.size();
  std::vector<std::size_t> target(total);
  std::vector<std::size_t> idx(s.size(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t o = 0;
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (!reduce[d]) o = o * s[d] + idx[d];
    }
    target[flat] = o;
    for (std::size_t d = s.size(); d-- > 0;) {
      if (++idx[d] < s[d]) break;
      idx[d] = 0;
    }
  }
  Tensor out(out_shape, 0.0, precision_of({&x}));
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < total; ++i) out[target[i]] += x.value()[i];
  for (auto& v : out.storage()) v *= inv;
  out.finalize("mean_axes");
  return make_result(std::move(out), {x},
                     [target = std::move(target), inv](Node& self) {
                       if (Tensor* g = grad_in(self, 0)) {
                         for (std::size_t i = 0; i < g->size(); ++i) {
                           (*g)[i] += self.grad[target[i]] * inv;
                         }
                       }
                     });
}

Var softmax(const Var& x, std::size_t axis) {
  if (axis >= x.shape().size()) {
    throw std::invalid_argument("softmax: axis out of range");
  }
  if (!x.value().all_finite()) {
    throw NonFiniteError("softmax: non-finite input");
  }
  const AxisSplit a = split_axis(x.shape(), axis);
  Tensor out(x.shape(), 0.0, precision_of({&x}));
  const auto& xv = x.value();
  for (std::size_t o = 0; o < a.outer; ++o) {
    for (std::size_t j = 0; j < a.inner; ++j) {
      const std::size_t base = o * a.n * a.inner + j;
      double mx = xv[base];
      for (std::size_t i = 1; i < a.n; ++i) {
        mx = std::max(mx, xv[base + i * a.inner]);
      }
      double z = 0.0;
      for (std::size_t i = 0; i < a.n; ++i) {
        const double e = std::exp(xv[base + i * a.inner] - mx);
        out[base + i * a.inner] = e;
        z += e;
      }
      for (std::size_t i = 0; i < a.n; ++i) out[base + i * a.inner] /= z;
    }
  }
  out.finalize("softmax");
  return make_result(std::move(out), {x}, [a](Node& self) {
    Tensor* g = grad_in(self, 0);
    if (!g) return;
    const auto& y = self.value;
    for (std::size_t o = 0; o < a.outer; ++o) {
      for (std::size_t j = 0; j < a.inner; ++j) {
        const std::size_t base = o * a.n * a.inner + j;
        double dot = 0.0;
        for (std::size_t i = 0; i < a.n; ++i) {
          dot += self.grad[base + i * a.inner] * y[base + i * a.inner];
        }
        for (std::size_t i = 0; i < a.n; ++i) {
          const std::size_t k = base + i * a.inner;
          (*g)[k] += y[k] * (self.grad[k] - dot);
        }
      }
    }
  });
}

Var log_softmax(const Var& x) {
  if (!x.value().all_finite()) {
    throw NonFiniteError("log_softmax: non-finite input");
  }
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  Tensor out(x.shape(), 0.0, precision_of({&x}));
  const auto& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = &xv[r * n];
    const double mx = *std::max_element(xr, xr + n);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += std::exp(xr[i] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t i = 0; i < n; ++i) out[r * n + i] = xr[i] - lse;
  }
  out.finalize("log_softmax");
  return make_result(std::move(out), {x}, [rows, n](Node& self) {
    Tensor* g = grad_in(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (std::size_t i = 0; i < n; ++i) gsum += self.grad[r * n + i];
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = r * n + i;
        (*g)[k] += self.grad[k] - std::exp(self.value[k]) * gsum;
      }
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_result(std::move(out), {x}, [](Node& self) {
    if (Tensor* g = grad_in(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Var concat(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& s0 = xs[0].shape();
  Shape lead(s0.begin(), s0.end() - 1);
  std::size_t rows = shape_size(lead);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& x : xs) {
    const Shape& s = x.shape();
    if (s.size() != s0.size() || !std::equal(lead.begin(), lead.end(),
                                             s.begin())) {
      throw std::invalid_argument("concat: leading dimensions differ");
    }
    widths.push_back(s.back());
    total += s.back();
  }
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor out(out_shape, 0.0, precision_of(xs));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < widths[k]; ++i) {
        out[r * total + offset + i] = xs[k].value()[r * widths[k] + i];
      }
    }
    offset += widths[k];
  }
  out.finalize("concat");
  return make_result(
      std::move(out), std::vector<Var>(xs.begin(), xs.end()),
      [rows, total, widths](Node& self) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          if (Tensor* g = grad_in(self, k)) {
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t i = 0; i < widths[k]; ++i) {
                (*g)[r * widths[k] + i] += self.grad[r * total + offset + i];
              }
            }
          }
          offset += widths[k];
        }
      });
}

Var slice_last(const Var& x, std::size_t begin, std::size_t len) {
  const std::size_t n = x.shape().back();
  if (len == 0 || begin + len > n) {
    throw std::invalid_argument("slice_last: range out of bounds");
  }
  const std::size_t rows = x.size() / n;
  Shape shape = x.shape();
  shape.back() = len;
  Tensor out(shape, 0.0, precision_of({&x}));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < len; ++i) {
      out[r * len + i] = x.value()[r * n + begin + i];
    }
  }
  out.finalize("slice_last");
  return make_result(std::move(out), {x}, [rows, n, begin, len](Node& self) {
    if (Tensor* g = grad_in(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < len; ++i) {
          (*g)[r * n + begin + i] += self.grad[r * len + i];
        }
      }
    }
  });
}

Var stack(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("stack: no inputs");
  for (const auto& x : xs) require_same_shape(xs[0], x, "stack");
  const std::size_t each = xs[0].size();
  Shape shape{xs.size()};
  shape.insert(shape.end(), xs[0].shape().begin(), xs[0].shape().end());
  Tensor out(shape, 0.0, precision_of(xs));
  for (std::size_t k = 0; k < xs.size(); ++k) {
    std::copy(xs[k].value().data().begin(), xs[k].value().data().end(),
              out.storage().begin() + static_cast<std::ptrdiff_t>(k * each));
  }
  out.finalize("stack");
  return make_result(std::move(out), std::vector<Var>(xs.begin(), xs.end()),
                     [each](Node& self) {
                       for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                         if (Tensor* g = grad_in(self, k)) {
                           for (std::size_t i = 0; i < each; ++i) {
                             (*g)[i] += self.grad[k * each + i];
                           }
                         }
                       }
                     });
}

Var select(const Var& x, std::size_t index) {
  const Shape& s = x.shape();
  if (s.size() < 2 || index >= s[0]) {
    throw std::invalid_argument("select: index out of range for " +
                                shape_string(s));
  }
  Shape shape(s.begin() + 1, s.end());
  const std::size_t each = shape_size(shape);
  std::vector<double> data(
      x.value().data().begin() + static_cast<std::ptrdiff_t>(index * each),
      x.value().data().begin() + static_cast<std::ptrdiff_t>((index + 1) * each));
  Tensor out(shape, std::move(data), precision_of({&x}));
  return make_result(std::move(out), {x}, [index, each](Node& self) {
    if (Tensor* g = grad_in(self, 0)) {
      for (std::size_t i = 0; i < each; ++i) {
        (*g)[index * each + i] += self.grad[i];
      }
    }
  });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
  require_rank(table, 2, "gather_rows");
  if (ids.empty()) throw std::invalid_argument("gather_rows: no ids");
  const std::size_t vocab = table.shape()[0], d = table.shape()[1];
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw std::out_of_range("gather_rows: id " + std::to_string(id) +
                              " outside table of " + std::to_string(vocab));
    }
  }
  Tensor out({ids.size(), d}, 0.0, precision_of({&table}));
  for (std::size_t r = 0; r < ids.size(); ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      out[r * d + i] = table.value()[static_cast<std::size_t>(ids[r]) * d + i];
    }
  }
  out.finalize("gather_rows");
  std::vector<int> rows(ids.begin(), ids.end());
  return make_result(std::move(out), {table},
                     [rows = std::move(rows), d](Node& self) {
                       if (Tensor* g = grad_in(self, 0)) {
                         for (std::size_t r = 0; r < rows.size(); ++r) {
                           const std::size_t base =
                               static_cast<std::size_t>(rows[r]) * d;
                           for (std::size_t i = 0; i < d; ++i) {
                             (*g)[base + i] += self.grad[r * d + i];
                           }
                         }
                       }
                     });
}

Var glu(const Var& y) {
  const std::size_t n = y.shape().back();
  if (n % 2 != 0) {
    throw std::invalid_argument("glu: last dimension " + std::to_string(n) +
                                " is odd");
  }
  const std::size_t half = n / 2;
  return mul(slice_last(y, 0, half), sigmoid(slice_last(y, half, half)));
}

Var dropout(Binding& binding, const Var& x, double rate) {
  if (!binding.training() || rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
  return mul_const(x, binding.dropout_mask(x.shape(), rate));
}

Var conv2d(const Var& x, const Var& w, const Var& b) {
  require_rank(x, 4, "conv2d");
  require_rank(w, 4, "conv2d");
  const std::size_t B = x.shape()[0], ci = x.shape()[1], H = x.shape()[2],
                    W = x.shape()[3];
  const std::size_t co = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
  if (w.shape()[1] != ci || kh % 2 == 0 || kw % 2 == 0 || b.size() != co) {
    throw std::invalid_argument("conv2d: input " + shape_string(x.shape()) +
                                " weight " + shape_string(w.shape()) +
                                " bias " + shape_string(b.shape()));
  }
  const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  Tensor out({B, co, H, W}, 0.0, precision_of({&x, &w, &b}));
  const auto& xv = x.value();
  const auto& wv = w.value();
  const std::size_t plane = H * W;
  for (std::size_t n = 0; n < B; ++n) {
    for (std::size_t o = 0; o < co; ++o) {
      double* op = &out[(n * co + o) * plane];
      std::fill(op, op + plane, b.value()[o]);
      for (std::size_t c = 0; c < ci; ++c) {
        const double* ip = &xv[(n * ci + c) * plane];
        for (std::size_t ky = 0; ky < kh; ++ky) {
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const double wt = wv[((o * ci + c) * kh + ky) * kw + kx];
            const long dy = static_cast<long>(ky) - ph;
            const long dx = static_cast<long>(kx) - pw;
            const long y0 = std::max(0L, -dy);
            const long y1 = std::min(static_cast<long>(H), static_cast<long>(H) - dy);
            const long x0 = std::max(0L, -dx);
            const long x1 = std::min(static_cast<long>(W), static_cast<long>(W) - dx);
            for (long yy = y0; yy < y1; ++yy) {
              double* orow = op + yy * static_cast<long>(W);
              const double* irow = ip + (yy + dy) * static_cast<long>(W) + dx;
              for (long xx = x0; xx < x1; ++xx) orow[xx] += wt * irow[xx];
            }
          }
        }
      }
    }
  }
  out.finalize("conv2d");
  return make_result(
      std::move(out), {x, w, b},
      [B, ci, H, W, co, kh, kw, ph, pw, plane](Node& self) {
        const auto& xv = self.inputs[0]->value;
        const auto& wv = self.inputs[1]->value;
        Tensor* gx = grad_in(self, 0);
        Tensor* gw = grad_in(self, 1);
        Tensor* gb = grad_in(self, 2);
        for (std::size_t n = 0; n < B; ++n) {
          for (std::size_t o = 0; o < co; ++o) {
            const double* gp = &self.grad[(n * co + o) * plane];
            if (gb) {
              double acc = 0.0;
              for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
              (*gb)[o] += acc;
            }
            for (std::size_t c = 0; c < ci; ++c) {
              const double* ip = &xv[(n * ci + c) * plane];
              double* gip = gx ? &(*gx)[(n * ci + c) * plane] : nullptr;
              for (std::size_t ky = 0; ky < kh; ++ky) {
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  const std::size_t widx = ((o * ci + c) * kh + ky) * kw + kx;
                  const double wt = wv[widx];
                  const long dy = static_cast<long>(ky) - ph;
                  const long dx = static_cast<long>(kx) - pw;
                  const long y0 = std::max(0L, -dy);
                  const long y1 = std::min(static_cast<long>(H), static_cast<long>(H) - dy);
                  const long x0 = std::max(0L, -dx);
                  const long x1 = std::min(static_cast<long>(W), static_cast<long>(W) - dx);
                  double wacc = 0.0;
                  for (long yy = y0; yy < y1; ++yy) {
                    const double* grow = gp + yy * static_cast<long>(W);
                    const long ioff = (yy + dy) * static_cast<long>(W) + dx;
                    for (long xx = x0; xx < x1; ++xx) {
                      wacc += grow[xx] * ip[ioff + xx];
                      if (gip) gip[ioff + xx] += grow[xx] * wt;
                    }
                  }
                  if (gw) (*gw)[widx] += wacc;
                }
              }
            }
          }
        }
      });
}

Var avg_pool2d(const Var& x, std::size_t pool_h, std::size_t pool_w) {
  require_rank(x, 4, "avg_pool2d");
  if (pool_h == 0 || pool_w == 0) {
    throw std::invalid_argument("avg_pool2d: zero pool size");
  }
  if (pool_h == 1 && pool_w == 1) return x;
  const std::size_t B = x.shape()[0], C = x.shape()[1], H = x.shape()[2],
                    W = x.shape()[3];
  const std::size_t oh = H / pool_h, ow = W / pool_w;
  if (oh == 0 || ow == 0) {
    throw std::invalid_argument("avg_pool2d: pooling " +
                                std::to_string(pool_h) + "x" +
                                std::to_string(pool_w) + " empties " +
                                shape_string(x.shape()));
  }
  const double inv = 1.0 / static_cast<double>(pool_h * pool_w);
  Tensor out({B, C, oh, ow}, 0.0, precision_of({&x}));
  const auto& xv = x.value();
  for (std::size_t p = 0; p < B * C; ++p) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xx = 0; xx < ow; ++xx) {
        double acc = 0.0;
        for (std::size_t a = 0; a < pool_h; ++a) {
          for (std::size_t c = 0; c < pool_w; ++c) {
            acc += xv[(p * H + y * pool_h + a) * W + xx * pool_w + c];
          }
        }
        out[(p * oh + y) * ow + xx] = acc * inv;
      }
    }
  }
  out.finalize("avg_pool2d");
  return make_result(
      std::move(out), {x}, [B, C, H, W, oh, ow, pool_h, pool_w, inv](Node& self) {
        Tensor* g = grad_in(self, 0);
        if (!g) return;
        for (std::size_t p = 0; p < B * C; ++p) {
          for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t xx = 0; xx < ow; ++xx) {
              const double go = self.grad[(p * oh + y) * ow + xx] * inv;
              for (std::size_t a = 0; a < pool_h; ++a) {
                for (std::size_t c = 0; c < pool_w; ++c) {
                  (*g)[(p * H + y * pool_h + a) * W + xx * pool_w + c] += go;
                }
              }
            }
          }
        }
      });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta,
               BatchNormState state, bool training) {
  require_rank(x, 4, "batch_norm");
  const std::size_t B = x.shape()[0], C = x.shape()[1];
  const std::size_t plane = x.shape()[2] * x.shape()[3];
  if (gamma.size() != C || beta.size() != C ||
      state.running_mean->value.size() != C ||
      state.running_var->value.size() != C) {
    throw std::invalid_argument("batch_norm: channel mismatch");
  }
  const std::size_t count = B * plane;
  const auto& xv = x.value();
  std::vector<double> mu(C), inv_std(C);
  if (training) {
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t n = 0; n < B; ++n) {
        for (std::size_t i = 0; i < plane; ++i) s += xv[(n * C + c) * plane + i];
      }
      const double m = s / static_cast<double>(count);
      double v = 0.0;
      for (std::size_t n = 0; n < B; ++n) {
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = xv[(n * C + c) * plane + i] - m;
          v += d * d;
        }
      }
      v /= static_cast<double>(count);
      mu[c] = m;
      inv_std[c] = 1.0 / std::sqrt(v + state.eps);
      const double unbiased =
          count > 1 ? v * static_cast<double>(count) / static_cast<double>(count - 1)
                    : v;
      auto& rm = state.running_mean->value;
      auto& rv = state.running_var->value;
      rm[c] = (1.0 - state.momentum) * rm[c] + state.momentum * m;
      rv[c] = (1.0 - state.momentum) * rv[c] + state.momentum * unbiased;
    }
    state.running_mean->value.finalize("batch_norm");
    state.running_var->value.finalize("batch_norm");
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mu[c] = state.running_mean->value[c];
      inv_std[c] = 1.0 / std::sqrt(state.running_var->value[c] + state.eps);
    }
  }
  Tensor xhat(x.shape(), 0.0);
  Tensor out(x.shape(), 0.0, precision_of({&x, &gamma, &beta}));
  for (std::size_t n = 0; n < B; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t k = (n * C + c) * plane + i;
        xhat[k] = (xv[k] - mu[c]) * inv_std[c];
        out[k] = gamma.value()[c] * xhat[k] + beta.value()[c];
      }
    }
  }
  out.finalize("batch_norm");
  return make_result(
      std::move(out), {x, gamma, beta},
      [B, C, plane, count, training, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Node& self) {
        const auto& gv = self.inputs[1]->value;
        Tensor* gx = grad_in(self, 0);
        Tensor* gg = grad_in(self, 1);
        Tensor* gb = grad_in(self, 2);
        for (std::size_t c = 0; c < C; ++c) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t n = 0; n < B; ++n) {
            for (std::size_t i = 0; i < plane; ++i) {
              const std::size_t k = (n * C + c) * plane + i;
              sum_dy += self.grad[k];
              sum_dy_xhat += self.grad[k] * xhat[k];
            }
          }
          if (gg) (*gg)[c] += sum_dy_xhat;
          if (gb) (*gb)[c] += sum_dy;
          if (!gx) continue;
          const double scale_c = gv[c] * inv_std[c];
          const double nc = static_cast<double>(count);
          for (std::size_t n = 0; n < B; ++n) {
            for (std::size_t i = 0; i < plane; ++i) {
              const std::size_t k = (n * C + c) * plane + i;
              if (training) {
                (*gx)[k] += scale_c *
                            (self.grad[k] - sum_dy / nc - xhat[k] * sum_dy_xhat / nc);
              } else {
                (*gx)[k] += scale_c * self.grad[k];
              }
            }
          }
        }
      });
}

LstmOut lstm_cell(const Var& x, const Var& h_prev, const Var& c_prev,
                  const Var& w_ih, const Var& w_hh, const Var& bias) {
  const std::size_t H = h_prev.size();
  if (c_prev.size() != H || w_ih.shape().size() != 2 ||
      w_ih.shape()[0] != 4 * H || w_ih.shape()[1] != x.size() ||
      w_hh.shape().size() != 2 || w_hh.shape()[0] != 4 * H ||
      w_hh.shape()[1] != H || bias.size() != 4 * H) {
    throw std::invalid_argument("lstm_cell: shape mismatch (x " +
                                shape_string(x.shape()) + ", h " +
                                shape_string(h_prev.shape()) + ", w_ih " +
                                shape_string(w_ih.shape()) + ")");
  }
  Var z = add(linear(x, w_ih, bias), linear(h_prev, w_hh));
  Var i = sigmoid(slice_last(z, 0, H));
  Var f = sigmoid(slice_last(z, H, H));
  Var g = tanh(slice_last(z, 2 * H, H));
  Var o = sigmoid(slice_last(z, 3 * H, H));
  Var c = add(mul(f, c_prev), mul(i, g));
  Var h = mul(o, tanh(c));
  return {h, c};
}

Var binary_cross_entropy(const Var& probs, const Tensor& targets, double eps) {
  if (probs.shape() != targets.shape()) {
    throw std::invalid_argument("binary_cross_entropy: shape mismatch");
  }
  for (double y : targets.data()) {
    if (!(y >= 0.0 && y <= 1.0)) {
      throw std::invalid_argument("binary_cross_entropy: target outside [0,1]");
    }
  }
  Var p = clamp(probs, eps, 1.0 - eps);
  Tensor ones(targets.shape(), 1.0);
  Tensor neg(targets.shape(), 0.0);
  for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = 1.0 - targets[i];
  Var pos_term = mul_const(log(p), targets);
  Var one_minus = sub(Var(ones), p);
  Var neg_term = mul_const(log(one_minus), neg);
  return scale(sum(add(pos_term, neg_term)),
               -1.0 / static_cast<double>(targets.size()));
}

}  // namespace maac::ops

namespace maac {

Tensor softmax_axis(const Tensor& x, std::size_t axis) {
  return ops::softmax(Var(x), axis).value();
}

Tensor glu(const Tensor& y) { return ops::glu(Var(y)).value(); }

Tensor global_avg_pool(const Tensor& x, std::span<const std::size_t> axes) {
  return ops::mean_axes(Var(x), axes).value();
}

}  // namespace maac
