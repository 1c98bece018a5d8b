// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "poselift/common.hpp"

namespace poselift::ad {

using Mat = Eigen::MatrixXd;

class Tape;

/// Lightweight handle to a node on a tape. Copyable; the tape owns storage.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& val() const;
  int rows() const;
  int cols() const;
  /// Value of a 1x1 node.
  double scalar() const;
};

/// Append-only reverse-mode differentiation graph over dense matrices.
/// One tape per training step; nodes record cached values and a backward
/// closure. Nonsmooth primitives (abs, relu, max) use subgradient 0 at the
/// kink.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable leaf (parameter or input we want gradients for).
  Var input(const Mat& value);
  /// Non-differentiable leaf.
  Var constant(const Mat& value);
  Var constant_scalar(double value);

  /// Runs reverse-mode accumulation from a scalar output.
  void backward(const Var& output);

  /// Gradient of the last backward() pass w.r.t. node v; zeros if the node
  /// was never reached.
  Mat grad(const Var& v) const;

  std::size_t size() const { return nodes_.size(); }

  // Internal plumbing shared with the op implementations.
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::function<void(Tape&, const Mat&)> backprop;
  };
  Var emit(Mat value, bool requires_grad, std::function<void(Tape&, const Mat&)> backprop);
  const Mat& value_of(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  void accumulate(int id, const Mat& delta);

 private:
  std::vector<Node> nodes_;
};

// Elementwise arithmetic (matching shapes).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

// Scalar-constant arithmetic.
Var add_scalar(Var a, double c);
Var mul_scalar(Var a, double c);

// Broadcast arithmetic: row vector (1xC) over every row, column vector
// (Rx1) over every column, 1x1 node over everything.
Var add_rowvec(Var a, Var r);
Var mul_rowvec(Var a, Var r);
Var add_colvec(Var a, Var c);
Var mul_colvec(Var a, Var c);
Var add_scalar_var(Var a, Var s);
Var mul_scalar_var(Var a, Var s);

Var matmul(Var a, Var b);
Var transpose(Var a);

// Reductions.
Var sum(Var a);
Var mean(Var a);
Var sum_cols(Var a);  // Rx1, sums across each row
Var sum_rows(Var a);  // 1xC, sums down each column

// Elementwise nonlinearities.
Var neg(Var a);
Var abs(Var a);
Var square(Var a);
Var sqrt(Var a);
Var exp(Var a);
Var log(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var max_with(Var a, double c);
Var sin(Var a);
Var cos(Var a);

// Structure ops.
Var cols(Var a, int first, int count);
Var rows(Var a, int first, int count);
Var concat_cols(const std::vector<Var>& parts);
/// Interleaved repetition: output column j*k + r copies input column j.
Var repeat_cols(Var a, int k);

// Norms. norm1/norm2 reduce the whole matrix to 1x1; rowwise_norm2 returns
// an Rx1 column of per-row Euclidean norms (subgradient 0 at zero rows).
Var norm1(Var a);
Var norm2(Var a);
Var rowwise_norm2(Var a);

/// Rowwise cross product of two Rx3 matrices.
Var cross3(Var a, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }

}  // namespace poselift::ad
