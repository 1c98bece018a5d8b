// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include "poselift/autodiff.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace poselift::ad {

namespace {

void check_same_tape(const Var& a, const Var& b, const char* op) {
  require(a.tape != nullptr && a.tape == b.tape, std::string(op) + ": operands on different tapes");
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), std::string(op) + ": shape mismatch");
}

}  // namespace

const Mat& Var::val() const { return tape->value_of(id); }
int Var::rows() const { return static_cast<int>(val().rows()); }
int Var::cols() const { return static_cast<int>(val().cols()); }

double Var::scalar() const {
  require(rows() == 1 && cols() == 1, "scalar(): node is not 1x1");
  return val()(0, 0);
}

Var Tape::input(const Mat& value) {
  return emit(value, true, nullptr);
}

Var Tape::constant(const Mat& value) {
  return emit(value, false, nullptr);
}

Var Tape::constant_scalar(double value) {
  Mat m(1, 1);
  m(0, 0) = value;
  return constant(m);
}

Var Tape::emit(Mat value, bool requires_grad, std::function<void(Tape&, const Mat&)> backprop) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(int id, const Mat& delta) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = delta;
    n.has_grad = true;
  } else {
    n.grad += delta;
  }
}

void Tape::backward(const Var& output) {
  require(output.tape == this, "backward: output from a different tape");
  require(output.rows() == 1 && output.cols() == 1, "backward: output must be scalar");
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  Mat seed(1, 1);
  seed(0, 0) = 1.0;
  accumulate(output.id, seed);
  for (int id = output.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.has_grad && n.backprop) n.backprop(*this, n.grad);
  }
}

Mat Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id];
  if (n.has_grad) return n.grad;
  return Mat::Zero(n.value.rows(), n.value.cols());
}

Var add(Var a, Var b) {
  check_same_tape(a, b, "add");
  check_same_shape(a, b, "add");
  const int ia = a.id, ib = b.id;
  return a.tape->emit(a.val() + b.val(), a.tape->requires_grad(ia) || a.tape->requires_grad(ib),
                      [ia, ib](Tape& t, const Mat& g) {
                        t.accumulate(ia, g);
                        t.accumulate(ib, g);
                      });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b, "sub");
  check_same_shape(a, b, "sub");
  const int ia = a.id, ib = b.id;
  return a.tape->emit(a.val() - b.val(), a.tape->requires_grad(ia) || a.tape->requires_grad(ib),
                      [ia, ib](Tape& t, const Mat& g) {
                        t.accumulate(ia, g);
                        t.accumulate(ib, Mat(-g));
                      });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b, "mul");
  check_same_shape(a, b, "mul");
  const int ia = a.id, ib = b.id;
  return a.tape->emit(a.val().cwiseProduct(b.val()),
                      a.tape->requires_grad(ia) || a.tape->requires_grad(ib),
                      [ia, ib](Tape& t, const Mat& g) {
                        t.accumulate(ia, g.cwiseProduct(t.value_of(ib)));
                        t.accumulate(ib, g.cwiseProduct(t.value_of(ia)));
                      });
}

Var div(Var a, Var b) {
  check_same_tape(a, b, "div");
  check_same_shape(a, b, "div");
  const int ia = a.id, ib = b.id;
  return a.tape->emit(a.val().cwiseQuotient(b.val()),
                      a.tape->requires_grad(ia) || a.tape->requires_grad(ib),
                      [ia, ib](Tape& t, const Mat& g) {
                        const Mat& bv = t.value_of(ib);
                        t.accumulate(ia, g.cwiseQuotient(bv));
                        t.accumulate(ib, Mat(-g.cwiseProduct(t.value_of(ia))
                                                  .cwiseQuotient(bv.cwiseProduct(bv))));
                      });
}

Var add_scalar(Var a, double c) {
  const int ia = a.id;
  return a.tape->emit(a.val().array() + c, a.tape->requires_grad(ia),
                      [ia](Tape& t, const Mat& g) { t.accumulate(ia, g); });
}

Var mul_scalar(Var a, double c) {
  const int ia = a.id;
  return a.tape->emit(a.val() * c, a.tape->requires_grad(ia),
                      [ia, c](Tape& t, const Mat& g) { t.accumulate(ia, Mat(g * c)); });
}

Var add_rowvec(Var a, Var r) {
  check_same_tape(a, r, "add_rowvec");
  require(r.rows() == 1 && r.cols() == a.cols(), "add_rowvec: needs a 1xC row vector");
  const int ia = a.id, ir = r.id;
  Mat out = a.val();
  out.rowwise() += r.val().row(0);
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia) || a.tape->requires_grad(ir),
                      [ia, ir](Tape& t, const Mat& g) {
                        t.accumulate(ia, g);
                        t.accumulate(ir, Mat(g.colwise().sum()));
                      });
}

Var mul_rowvec(Var a, Var r) {
  check_same_tape(a, r, "mul_rowvec");
  require(r.rows() == 1 && r.cols() == a.cols(), "mul_rowvec: needs a 1xC row vector");
  const int ia = a.id, ir = r.id;
  Mat out = a.val().array().rowwise() * r.val().row(0).array();
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia) || a.tape->requires_grad(ir),
                      [ia, ir](Tape& t, const Mat& g) {
                        const Mat& av = t.value_of(ia);
                        const Mat& rv = t.value_of(ir);
                        t.accumulate(ia, Mat(g.array().rowwise() * rv.row(0).array()));
                        t.accumulate(ir, Mat(g.cwiseProduct(av).colwise().sum()));
                      });
}

Var add_colvec(Var a, Var c) {
  check_same_tape(a, c, "add_colvec");
  require(c.cols() == 1 && c.rows() == a.rows(), "add_colvec: needs an Rx1 column vector");
  const int ia = a.id, ic = c.id;
  Mat out = a.val();
  out.colwise() += Eigen::VectorXd(c.val().col(0));
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia) || a.tape->requires_grad(ic),
                      [ia, ic](Tape& t, const Mat& g) {
                        t.accumulate(ia, g);
                        t.accumulate(ic, Mat(g.rowwise().sum()));
                      });
}

Var mul_colvec(Var a, Var c) {
  check_same_tape(a, c, "mul_colvec");
  require(c.cols() == 1 && c.rows() == a.rows(), "mul_colvec: needs an Rx1 column vector");
  const int ia = a.id, ic = c.id;
  Mat out = a.val().array().colwise() * c.val().col(0).array();
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia) || a.tape->requires_grad(ic),
                      [ia, ic](Tape& t, const Mat& g) {
                        const Mat& av = t.value_of(ia);
                        const Mat& cv = t.value_of(ic);
                        t.accumulate(ia, Mat(g.array().colwise() * cv.col(0).array()));
                        t.accumulate(ic, Mat(g.cwiseProduct(av).rowwise().sum()));
                      });
}

Var add_scalar_var(Var a, Var s) {
  check_same_tape(a, s, "add_scalar_var");
  require(s.rows() == 1 && s.cols() == 1, "add_scalar_var: needs a 1x1 node");
  const int ia = a.id, is = s.id;
  return a.tape->emit(a.val().array() + s.val()(0, 0),
                      a.tape->requires_grad(ia) || a.tape->requires_grad(is),
                      [ia, is](Tape& t, const Mat& g) {
                        t.accumulate(ia, g);
                        Mat gs(1, 1);
                        gs(0, 0) = g.sum();
                        t.accumulate(is, gs);
                      });
}

Var mul_scalar_var(Var a, Var s) {
  check_same_tape(a, s, "mul_scalar_var");
  require(s.rows() == 1 && s.cols() == 1, "mul_scalar_var: needs a 1x1 node");
  const int ia = a.id, is = s.id;
  return a.tape->emit(a.val() * s.val()(0, 0),
                      a.tape->requires_grad(ia) || a.tape->requires_grad(is),
                      [ia, is](Tape& t, const Mat& g) {
                        t.accumulate(ia, Mat(g * t.value_of(is)(0, 0)));
                        Mat gs(1, 1);
                        gs(0, 0) = g.cwiseProduct(t.value_of(ia)).sum();
                        t.accumulate(is, gs);
                      });
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b, "matmul");
  require(a.cols() == b.rows(), "matmul: inner dimensions disagree");
  const int ia = a.id, ib = b.id;
  return a.tape->emit(a.val() * b.val(), a.tape->requires_grad(ia) || a.tape->requires_grad(ib),
                      [ia, ib](Tape& t, const Mat& g) {
                        t.accumulate(ia, Mat(g * t.value_of(ib).transpose()));
                        t.accumulate(ib, Mat(t.value_of(ia).transpose() * g));
                      });
}

Var transpose(Var a) {
  const int ia = a.id;
  return a.tape->emit(a.val().transpose(), a.tape->requires_grad(ia),
                      [ia](Tape& t, const Mat& g) { t.accumulate(ia, Mat(g.transpose())); });
}

Var sum(Var a) {
  const int ia = a.id;
  const int r = a.rows(), c = a.cols();
  Mat out(1, 1);
  out(0, 0) = a.val().sum();
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia),
                      [ia, r, c](Tape& t, const Mat& g) {
                        t.accumulate(ia, Mat(Mat::Constant(r, c, g(0, 0))));
                      });
}

Var mean(Var a) {
  const int ia = a.id;
  const int r = a.rows(), c = a.cols();
  const double n = static_cast<double>(r) * c;
  Mat out(1, 1);
  out(0, 0) = a.val().mean();
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia),
                      [ia, r, c, n](Tape& t, const Mat& g) {
                        t.accumulate(ia, Mat(Mat::Constant(r, c, g(0, 0) / n)));
                      });
}

Var sum_cols(Var a) {
  const int ia = a.id;
  const int c = a.cols();
  return a.tape->emit(a.val().rowwise().sum(), a.tape->requires_grad(ia),
                      [ia, c](Tape& t, const Mat& g) {
                        t.accumulate(ia, Mat(g * Mat::Ones(1, c)));
                      });
}

Var sum_rows(Var a) {
  const int ia = a.id;
  const int r = a.rows();
  return a.tape->emit(a.val().colwise().sum(), a.tape->requires_grad(ia),
                      [ia, r](Tape& t, const Mat& g) {
                        t.accumulate(ia, Mat(Mat::Ones(r, 1) * g));
                      });
}

Var neg(Var a) { return mul_scalar(a, -1.0); }

Var abs(Var a) {
  const int ia = a.id;
  return a.tape->emit(a.val().cwiseAbs(), a.tape->requires_grad(ia),
                      [ia](Tape& t, const Mat& g) {
                        const Mat& av = t.value_of(ia);
                        t.accumulate(ia, Mat(g.cwiseProduct(av.unaryExpr([](double v) {
                          return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                        }))));
                      });
}

Var square(Var a) {
  const int ia = a.id;
  return a.tape->emit(a.val().cwiseProduct(a.val()), a.tape->requires_grad(ia),
                      [ia](Tape& t, const Mat& g) {
                        t.accumulate(ia, Mat(2.0 * g.cwiseProduct(t.value_of(ia))));
                      });
}

Var sqrt(Var a) {
  const int ia = a.id;
  Mat out = a.val().cwiseSqrt();
  return a.tape->emit(out, a.tape->requires_grad(ia), [ia](Tape& t, const Mat& g) {
    t.accumulate(ia, Mat(0.5 * g.cwiseQuotient(t.value_of(ia).cwiseSqrt())));
  });
}

Var exp(Var a) {
  const int ia = a.id;
  Mat out = a.val().array().exp();
  Mat saved = out;
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia),
                      [ia, saved](Tape& t, const Mat& g) {
                        t.accumulate(ia, Mat(g.cwiseProduct(saved)));
                      });
}

Var log(Var a) {
  const int ia = a.id;
  Mat out = a.val().array().log();
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia), [ia](Tape& t, const Mat& g) {
    t.accumulate(ia, Mat(g.cwiseQuotient(t.value_of(ia))));
  });
}

Var sigmoid(Var a) {
  const int ia = a.id;
  Mat out = a.val().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  Mat saved = out;
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia),
                      [ia, saved](Tape& t, const Mat& g) {
                        t.accumulate(
                            ia, Mat(g.cwiseProduct(saved.cwiseProduct((1.0 - saved.array()).matrix()))));
                      });
}

Var tanh(Var a) {
  const int ia = a.id;
  Mat out = a.val().array().tanh();
  Mat saved = out;
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia),
                      [ia, saved](Tape& t, const Mat& g) {
                        t.accumulate(ia, Mat(g.cwiseProduct((1.0 - saved.array().square()).matrix())));
                      });
}

Var relu(Var a) {
  const int ia = a.id;
  Mat out = a.val().cwiseMax(0.0);
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia), [ia](Tape& t, const Mat& g) {
    const Mat& av = t.value_of(ia);
    t.accumulate(ia, Mat(g.cwiseProduct(
                         av.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }))));
  });
}

Var max_with(Var a, double c) {
  const int ia = a.id;
  Mat out = a.val().cwiseMax(c);
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia), [ia, c](Tape& t, const Mat& g) {
    const Mat& av = t.value_of(ia);
    t.accumulate(ia, Mat(g.cwiseProduct(
                         av.unaryExpr([c](double v) { return v > c ? 1.0 : 0.0; }))));
  });
}

Var sin(Var a) {
  const int ia = a.id;
  return a.tape->emit(a.val().array().sin(), a.tape->requires_grad(ia),
                      [ia](Tape& t, const Mat& g) {
                        t.accumulate(ia, Mat(g.cwiseProduct(
                                              Mat(t.value_of(ia).array().cos()))));
                      });
}

Var cos(Var a) {
  const int ia = a.id;
  return a.tape->emit(a.val().array().cos(), a.tape->requires_grad(ia),
                      [ia](Tape& t, const Mat& g) {
                        t.accumulate(ia, Mat(-g.cwiseProduct(
                                              Mat(t.value_of(ia).array().sin()))));
                      });
}

Var cols(Var a, int first, int count) {
  require(first >= 0 && count >= 0 && first + count <= a.cols(), "cols: slice out of range");
  const int ia = a.id;
  const int r = a.rows(), c = a.cols();
  return a.tape->emit(a.val().middleCols(first, count), a.tape->requires_grad(ia),
                      [ia, first, count, r, c](Tape& t, const Mat& g) {
                        Mat full = Mat::Zero(r, c);
                        full.middleCols(first, count) = g;
                        t.accumulate(ia, full);
                      });
}

Var rows(Var a, int first, int count) {
  require(first >= 0 && count >= 0 && first + count <= a.rows(), "rows: slice out of range");
  const int ia = a.id;
  const int r = a.rows(), c = a.cols();
  return a.tape->emit(a.val().middleRows(first, count), a.tape->requires_grad(ia),
                      [ia, first, count, r, c](Tape& t, const Mat& g) {
                        Mat full = Mat::Zero(r, c);
                        full.middleRows(first, count) = g;
                        t.accumulate(ia, full);
                      });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: empty input");
  Tape* tape = parts[0].tape;
  const int r = parts[0].rows();
  int total = 0;
  bool needs_grad = false;
  for (const Var& p : parts) {
    require(p.tape == tape, "concat_cols: operands on different tapes");
    require(p.rows() == r, "concat_cols: row count mismatch");
    total += p.cols();
    needs_grad = needs_grad || tape->requires_grad(p.id);
  }
  Mat out(r, total);
  std::vector<int> ids, widths;
  int at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.val();
    ids.push_back(p.id);
    widths.push_back(p.cols());
    at += p.cols();
  }
  return tape->emit(std::move(out), needs_grad, [ids, widths](Tape& t, const Mat& g) {
    int pos = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      t.accumulate(ids[i], Mat(g.middleCols(pos, widths[i])));
      pos += widths[i];
    }
  });
}

Var repeat_cols(Var a, int k) {
  require(k > 0, "repeat_cols: k must be positive");
  const int ia = a.id;
  const int r = a.rows(), c = a.cols();
  Mat out(r, c * k);
  for (int j = 0; j < c; ++j)
    for (int rep = 0; rep < k; ++rep) out.col(j * k + rep) = a.val().col(j);
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia),
                      [ia, r, c, k](Tape& t, const Mat& g) {
                        Mat acc = Mat::Zero(r, c);
                        for (int j = 0; j < c; ++j)
                          for (int rep = 0; rep < k; ++rep) acc.col(j) += g.col(j * k + rep);
                        t.accumulate(ia, acc);
                      });
}

Var norm1(Var a) {
  const int ia = a.id;
  Mat out(1, 1);
  out(0, 0) = a.val().cwiseAbs().sum();
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia), [ia](Tape& t, const Mat& g) {
    const Mat& av = t.value_of(ia);
    t.accumulate(ia, Mat(g(0, 0) * av.unaryExpr([](double v) {
      return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    })));
  });
}

Var norm2(Var a) {
  const int ia = a.id;
  const double n = a.val().norm();
  Mat out(1, 1);
  out(0, 0) = n;
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia), [ia, n](Tape& t, const Mat& g) {
    if (n < 1e-300) return;  // subgradient 0 at the origin
    t.accumulate(ia, Mat(g(0, 0) / n * t.value_of(ia)));
  });
}

Var rowwise_norm2(Var a) {
  const int ia = a.id;
  Mat out = a.val().rowwise().norm();
  Mat saved = out;
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia),
                      [ia, saved](Tape& t, const Mat& g) {
                        const Mat& av = t.value_of(ia);
                        Mat acc = Mat::Zero(av.rows(), av.cols());
                        for (int i = 0; i < av.rows(); ++i) {
                          if (saved(i, 0) < 1e-300) continue;
                          acc.row(i) = g(i, 0) / saved(i, 0) * av.row(i);
                        }
                        t.accumulate(ia, acc);
                      });
}

Var cross3(Var a, Var b) {
  check_same_tape(a, b, "cross3");
  check_same_shape(a, b, "cross3");
  require(a.cols() == 3, "cross3: operands must be Rx3");
  const int ia = a.id, ib = b.id;
  const int r = a.rows();
  Mat out(r, 3);
  for (int i = 0; i < r; ++i) {
    const Eigen::Vector3d av = a.val().row(i), bv = b.val().row(i);
    out.row(i) = av.cross(bv).transpose();
  }
  return a.tape->emit(std::move(out), a.tape->requires_grad(ia) || a.tape->requires_grad(ib),
                      [ia, ib, r](Tape& t, const Mat& g) {
                        const Mat& av = t.value_of(ia);
                        const Mat& bv = t.value_of(ib);
                        Mat ga(r, 3), gb(r, 3);
                        for (int i = 0; i < r; ++i) {
                          const Eigen::Vector3d ar = av.row(i), br = bv.row(i), gr = g.row(i);
                          ga.row(i) = br.cross(gr).transpose();
                          gb.row(i) = gr.cross(ar).transpose();
                        }
                        t.accumulate(ia, ga);
                        t.accumulate(ib, gb);
                      });
}

}  // namespace poselift::ad
