// maac/numerics/ops.h
//
// Differentiable operations on Var. Every forward result is checked for
// non-finite values (NonFiniteError) and shape problems raise
// std::invalid_argument.

#pragma once

#include <span>
#include <vector>

#include "maac/numerics/graph.h"

namespace maac::ops {

// Elementwise, identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_n(std::span<const Var> xs);
Var scale(const Var& x, double s);
Var mul_const(const Var& x, const Tensor& c);

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var tanh(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var square(const Var& x);
// Gradient is zero where the input is clipped.
Var clamp(const Var& x, double lo, double hi);

// A [R x C] (+) v [C]: adds v to every row.
Var add_row(const Var& a, const Var& v);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
// x [in] or [R x in]; w [out x in]; b [out] (optional).
Var linear(const Var& x, const Var& w, const Var& b);
Var linear(const Var& x, const Var& w);

Var sum(const Var& x);
Var mean(const Var& x);
// Arithmetic mean over the listed axes; those axes are dropped. A result
// with no remaining axes has shape [1].
Var mean_axes(const Var& x, std::span<const std::size_t> axes);

Var softmax(const Var& x, std::size_t axis);
// Along the last axis, max-subtracted.
Var log_softmax(const Var& x);

Var reshape(const Var& x, Shape shape);
// Concatenates along the last axis; leading dimensions must agree.
Var concat(std::span<const Var> xs);
Var slice_last(const Var& x, std::size_t begin, std::size_t len);
// Stacks equal-shape tensors along a new leading axis.
Var stack(std::span<const Var> xs);
// x[index, ...] along axis 0.
Var select(const Var& x, std::size_t index);
// Rows of table [V x D] picked by ids -> [n x D].
Var gather_rows(const Var& table, std::span<const int> ids);

// Splits the last axis into halves [A, B] and returns A * sigmoid(B).
Var glu(const Var& y);

Var dropout(Binding& binding, const Var& x, double rate);

// x [B, Ci, H, W], w [Co, Ci, kh, kw] with odd kernels, b [Co]; zero
// "same" padding, stride 1. Direct summation.
Var conv2d(const Var& x, const Var& w, const Var& b);
// Non-overlapping average pooling; trailing rows/cols that do not fill a
// window are dropped.
Var avg_pool2d(const Var& x, std::size_t pool_h, std::size_t pool_w);

struct BatchNormState {
  Parameter* running_mean;
  Parameter* running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};
// Per-channel normalization of x [B, C, H, W]. Batch statistics in training
// mode (running statistics updated), running statistics otherwise.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta,
               BatchNormState state, bool training);

struct LstmOut {
  Var h;
  Var c;
};
// Gate layout along the 4H axis: input, forget, candidate, output.
LstmOut lstm_cell(const Var& x, const Var& h_prev, const Var& c_prev,
                  const Var& w_ih, const Var& w_hh, const Var& bias);

// -(1/N) sum[y log p + (1-y) log(1-p)] with p clamped to [eps, 1-eps].
Var binary_cross_entropy(const Var& probs, const Tensor& targets,
                         double eps = 1e-7);

}  // namespace maac::ops

namespace maac {

// Tensor-level conveniences (no graph).
Tensor softmax_axis(const Tensor& x, std::size_t axis);
Tensor glu(const Tensor& y);
Tensor global_avg_pool(const Tensor& x, std::span<const std::size_t> axes);

}  // namespace maac
