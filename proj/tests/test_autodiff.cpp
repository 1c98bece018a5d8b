// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "poselift/autodiff.hpp"

using namespace poselift;
using ad::Mat;
using ad::Var;

namespace {

using Builder = std::function<Var(ad::Tape&, const std::vector<Var>&)>;

double eval_scalar(const Builder& f, const std::vector<Mat>& xs) {
  ad::Tape tape;
  std::vector<Var> vars;
  for (const Mat& x : xs) vars.push_back(tape.input(x));
  return f(tape, vars).scalar();
}

// Checks reverse-mode gradients of a scalar-valued builder against central
// differences on every entry of every input.
void check_grads(const Builder& f, std::vector<Mat> xs, double step = 1e-6,
                 double tol = 1e-5) {
  ad::Tape tape;
  std::vector<Var> vars;
  for (const Mat& x : xs) vars.push_back(tape.input(x));
  const Var out = f(tape, vars);
  REQUIRE(out.rows() == 1);
  REQUIRE(out.cols() == 1);
  tape.backward(out);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const Mat g = tape.grad(vars[k]);
    for (int r = 0; r < xs[k].rows(); ++r)
      for (int c = 0; c < xs[k].cols(); ++c) {
        std::vector<Mat> plus = xs, minus = xs;
        plus[k](r, c) += step;
        minus[k](r, c) -= step;
        const double fd = (eval_scalar(f, plus) - eval_scalar(f, minus)) / (2.0 * step);
        const double scale = std::max({1.0, std::abs(fd), std::abs(g(r, c))});
        CHECK(std::abs(g(r, c) - fd) / scale < tol);
      }
  }
}

Mat randmat(Rng& rng, int r, int c, double lo = -2.0, double hi = 2.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

}  // namespace

TEST_CASE("values of elementwise primitives") {
  ad::Tape tape;
  Mat a(2, 2), b(2, 2);
  a << 1.0, -2.0, 3.0, 0.5;
  b << 4.0, 5.0, -6.0, 2.0;
  const Var va = tape.input(a), vb = tape.input(b);
  CHECK((ad::add(va, vb).val() - (a + b).matrix()).norm() == 0.0);
  CHECK((ad::sub(va, vb).val() - (a - b).matrix()).norm() == 0.0);
  CHECK((ad::mul(va, vb).val() - a.cwiseProduct(b)).norm() == 0.0);
  CHECK((ad::div(va, vb).val() - a.cwiseQuotient(b)).norm() == 0.0);
  CHECK(ad::sum(va).scalar() == doctest::Approx(a.sum()));
  CHECK(ad::mean(va).scalar() == doctest::Approx(a.mean()));
  CHECK(ad::norm1(va).scalar() == doctest::Approx(a.cwiseAbs().sum()));
  CHECK(ad::norm2(va).scalar() == doctest::Approx(a.norm()));
  CHECK(ad::abs(va).val()(0, 1) == 2.0);
  CHECK(ad::relu(va).val()(0, 1) == 0.0);
  CHECK(ad::relu(va).val()(1, 0) == 3.0);
  CHECK(ad::max_with(va, 0.75).val()(1, 1) == 0.75);
  CHECK(ad::sigmoid(tape.constant_scalar(0.0)).scalar() == doctest::Approx(0.5));
}

TEST_CASE("gradients of smooth elementwise primitives") {
  Rng rng(21);
  const Mat a = randmat(rng, 3, 4);
  const Mat b = randmat(rng, 3, 4, 0.5, 2.5);  // positive, safe for div/log/sqrt
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::add(v[0], v[1])); },
              {a, b});
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::sub(v[0], v[1])); },
              {a, b});
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::mul(v[0], v[1])); },
              {a, b});
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::div(v[0], v[1])); },
              {a, b});
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::square(v[0])); },
              {a});
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::sqrt(v[0])); }, {b});
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::exp(v[0])); }, {a});
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::log(v[0])); }, {b});
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::sigmoid(v[0])); },
              {a});
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::tanh(v[0])); }, {a});
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::sin(v[0])); }, {a});
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::cos(v[0])); }, {a});
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::neg(v[0])); }, {a});
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::add_scalar(v[0], 1.7)); },
      {a});
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::mul_scalar(v[0], -0.6)); },
      {a});
}

TEST_CASE("gradients of nonsmooth primitives away from kinks") {
  Rng rng(22);
  Mat a = randmat(rng, 3, 4);
  // Keep entries away from the kink so central differences are valid.
  for (int i = 0; i < a.size(); ++i)
    if (std::abs(a(i)) < 0.1) a(i) = 0.5;
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::abs(v[0])); }, {a});
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::relu(v[0])); }, {a});
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::max_with(v[0], 0.2)); },
      {a});
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::norm1(v[0]); }, {a});
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::norm2(v[0]); }, {a});
  check_grads([](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::rowwise_norm2(v[0])); },
              {a});
}

TEST_CASE("broadcast arithmetic values and gradients") {
  Rng rng(23);
  const Mat a = randmat(rng, 4, 5);
  const Mat row = randmat(rng, 1, 5);
  const Mat col = randmat(rng, 4, 1);
  const Mat s = randmat(rng, 1, 1);
  {
    ad::Tape tape;
    const Mat got = ad::add_rowvec(tape.input(a), tape.input(row)).val();
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 5; ++j) CHECK(got(i, j) == a(i, j) + row(0, j));
  }
  {
    ad::Tape tape;
    const Mat got = ad::mul_colvec(tape.input(a), tape.input(col)).val();
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 5; ++j) CHECK(got(i, j) == a(i, j) * col(i, 0));
  }
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::add_rowvec(v[0], v[1])); },
      {a, row});
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) {
        return ad::sum(ad::square(ad::mul_rowvec(v[0], v[1])));
      },
      {a, row});
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::add_colvec(v[0], v[1])); },
      {a, col});
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) {
        return ad::sum(ad::square(ad::mul_colvec(v[0], v[1])));
      },
      {a, col});
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) { return ad::sum(ad::add_scalar_var(v[0], v[1])); },
      {a, s});
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) {
        return ad::sum(ad::square(ad::mul_scalar_var(v[0], v[1])));
      },
      {a, s});
}

TEST_CASE("matmul and transpose") {
  Rng rng(24);
  const Mat a = randmat(rng, 3, 4);
  const Mat b = randmat(rng, 4, 2);
  {
    ad::Tape tape;
    const Mat got = ad::matmul(tape.input(a), tape.input(b)).val();
    CHECK((got - a * b).cwiseAbs().maxCoeff() < 1e-12);
    const Mat t = ad::transpose(tape.input(a)).val();
    CHECK((t - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) {
        return ad::sum(ad::square(ad::matmul(v[0], v[1])));
      },
      {a, b});
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) {
        return ad::sum(ad::square(ad::transpose(v[0])));
      },
      {a});
}

TEST_CASE("reductions along rows and columns") {
  Rng rng(25);
  const Mat a = randmat(rng, 3, 5);
  {
    ad::Tape tape;
    const Mat sc = ad::sum_cols(tape.input(a)).val();
    REQUIRE(sc.rows() == 3);
    REQUIRE(sc.cols() == 1);
    for (int i = 0; i < 3; ++i) CHECK(sc(i, 0) == doctest::Approx(a.row(i).sum()));
    const Mat sr = ad::sum_rows(tape.input(a)).val();
    REQUIRE(sr.rows() == 1);
    REQUIRE(sr.cols() == 5);
    for (int j = 0; j < 5; ++j) CHECK(sr(0, j) == doctest::Approx(a.col(j).sum()));
  }
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) {
        return ad::sum(ad::square(ad::sum_cols(v[0])));
      },
      {a});
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) {
        return ad::sum(ad::square(ad::sum_rows(v[0])));
      },
      {a});
}

TEST_CASE("structure ops preserve layout and route gradients") {
  Rng rng(26);
  const Mat a = randmat(rng, 3, 6);
  const Mat b = randmat(rng, 3, 2);
  {
    ad::Tape tape;
    const Mat piece = ad::cols(tape.input(a), 2, 3).val();
    CHECK((piece - a.middleCols(2, 3)).cwiseAbs().maxCoeff() == 0.0);
    const Mat rpiece = ad::rows(tape.input(a), 1, 2).val();
    CHECK((rpiece - a.middleRows(1, 2)).cwiseAbs().maxCoeff() == 0.0);
    const Mat cat = ad::concat_cols({tape.input(a), tape.input(b)}).val();
    REQUIRE(cat.cols() == 8);
    CHECK((cat.leftCols(6) - a).cwiseAbs().maxCoeff() == 0.0);
    CHECK((cat.rightCols(2) - b).cwiseAbs().maxCoeff() == 0.0);
    const Mat rep = ad::repeat_cols(tape.input(b), 3).val();
    REQUIRE(rep.cols() == 6);
    for (int j = 0; j < 2; ++j)
      for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k) CHECK(rep(r, 3 * j + k) == b(r, j));
  }
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) {
        return ad::sum(ad::square(ad::cols(v[0], 1, 4)));
      },
      {a});
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) {
        return ad::sum(ad::square(ad::rows(v[0], 0, 2)));
      },
      {a});
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) {
        return ad::sum(ad::square(ad::concat_cols({v[0], v[1]})));
      },
      {a, b});
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) {
        return ad::sum(ad::square(ad::repeat_cols(v[0], 3)));
      },
      {b});
}

TEST_CASE("rowwise cross product value and gradient") {
  Rng rng(27);
  const Mat a = randmat(rng, 4, 3);
  const Mat b = randmat(rng, 4, 3);
  {
    ad::Tape tape;
    const Mat got = ad::cross3(tape.input(a), tape.input(b)).val();
    for (int i = 0; i < 4; ++i) {
      const Eigen::Vector3d expect =
          Eigen::Vector3d(a.row(i)).cross(Eigen::Vector3d(b.row(i)));
      CHECK((got.row(i).transpose() - expect).norm() < 1e-12);
    }
  }
  check_grads(
      [](ad::Tape&, const std::vector<Var>& v) {
        return ad::sum(ad::square(ad::cross3(v[0], v[1])));
      },
      {a, b});
}

TEST_CASE("constants receive no gradient") {
  ad::Tape tape;
  Mat a(2, 2);
  a << 1, 2, 3, 4;
  const Var c = tape.constant(a);
  const Var x = tape.input(a);
  const Var out = ad::sum(ad::mul(c, x));
  tape.backward(out);
  CHECK(tape.grad(x).cwiseAbs().maxCoeff() > 0.0);
  CHECK(tape.grad(c).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient of a deep composite chain") {
  Rng rng(28);
  const Mat a = randmat(rng, 2, 3, 0.2, 1.5);
  const Mat w = randmat(rng, 3, 3);
  check_grads(
      [](ad::Tape& tape, const std::vector<Var>& v) {
        Var h = ad::tanh(ad::matmul(v[0], v[1]));
        h = ad::add_scalar(ad::sigmoid(h), 0.1);
        h = ad::log(h);
        h = ad::mul(h, h);
        return ad::mean(ad::sqrt(ad::add_scalar(ad::square(h), 1.0)));
      },
      {a, w});
}

TEST_CASE("backward accumulates through reused nodes") {
  // f(x) = sum(x * x) via the same node twice; gradient 2x.
  ad::Tape tape;
  Mat a(2, 2);
  a << 1.0, -2.0, 0.5, 3.0;
  const Var x = tape.input(a);
  const Var out = ad::sum(ad::mul(x, x));
  tape.backward(out);
  CHECK((tape.grad(x) - 2.0 * a).cwiseAbs().maxCoeff() < 1e-12);
}
