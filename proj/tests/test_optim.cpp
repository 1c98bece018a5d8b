// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "poselift/optim.hpp"

using namespace poselift;

TEST_CASE("adamw matches a hand-computed scalar trajectory") {
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.beta1 = 0.9;
  cfg.beta2 = 0.999;
  cfg.eps = 1e-8;
  cfg.weight_decay = 0.0;
  AdamW opt(cfg);

  Eigen::MatrixXd theta(1, 1);
  theta << 2.0;
  double ref = 2.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 5; ++t) {
    const double g = 2.0 * ref;  // d/dx x^2, evaluated at the reference copy
    Eigen::MatrixXd grad(1, 1);
    grad << 2.0 * theta(0, 0);
    opt.step({&theta}, {grad});
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m / (1.0 - std::pow(cfg.beta1, t));
    const double v_hat = v / (1.0 - std::pow(cfg.beta2, t));
    ref -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    CHECK(theta(0, 0) == doctest::Approx(ref).epsilon(1e-12));
  }
  CHECK(opt.step_count() == 5);
}

TEST_CASE("weight decay is decoupled from the gradient") {
  AdamWConfig cfg;
  cfg.lr = 0.05;
  cfg.weight_decay = 0.1;
  AdamW opt(cfg);
  Eigen::MatrixXd theta(2, 2);
  theta << 1.0, -2.0, 4.0, 0.5;
  const Eigen::MatrixXd before = theta;
  // Zero gradient: the only movement is the decay shrinkage theta * (1 - lr*wd).
  opt.step({&theta}, {Eigen::MatrixXd::Zero(2, 2)});
  CHECK((theta - before * (1.0 - cfg.lr * cfg.weight_decay)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("adamw rejects mismatched shapes") {
  AdamW opt(AdamWConfig{});
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(2, 3);
  CHECK_THROWS_AS(opt.step({&theta}, {Eigen::MatrixXd::Zero(3, 2)}), InputError);
  opt.step({&theta}, {Eigen::MatrixXd::Ones(2, 3)});
  Eigen::MatrixXd extra = Eigen::MatrixXd::Zero(1, 1);
  CHECK_THROWS_AS(opt.step({&theta, &extra},
                           {Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(1, 1)}),
                  InputError);
}

TEST_CASE("adamw moves every parameter tensor") {
  AdamWConfig cfg;
  cfg.lr = 0.01;
  AdamW opt(cfg);
  Eigen::MatrixXd a = Eigen::MatrixXd::Ones(2, 2);
  Eigen::MatrixXd b = Eigen::MatrixXd::Ones(3, 1);
  opt.step({&a, &b}, {Eigen::MatrixXd::Ones(2, 2), -Eigen::MatrixXd::Ones(3, 1)});
  CHECK(a(0, 0) < 1.0);   // positive gradient pushes down
  CHECK(b(0, 0) > 1.0);   // negative gradient pushes up
}

TEST_CASE("balancer holds nll terms out during warmup") {
  LossBalancer::Config cfg;
  cfg.warmup_steps = 3;
  LossBalancer bal({"nf"}, {{"nf", 1.0}, {"plain", 2.0}}, cfg);
  CHECK(bal.is_nll("nf"));
  CHECK_FALSE(bal.is_nll("plain"));
  CHECK(bal.weight("plain") == 2.0);
  CHECK(bal.weight("unlisted") == 1.0);

  for (int i = 0; i < 3; ++i) {
    ad::Tape tape;
    const ad::Var nf = tape.input(Eigen::MatrixXd::Constant(1, 1, 10.0 + i));
    const ad::Var plain = tape.input(Eigen::MatrixXd::Constant(1, 1, 0.5));
    const ad::Var total = bal.total(tape, {{"nf", nf}, {"plain", plain}});
    // During warmup only the pass-through term contributes.
    CHECK(total.scalar() == doctest::Approx(2.0 * 0.5).epsilon(1e-12));
    tape.backward(total);
    CHECK(tape.grad(nf).cwiseAbs().maxCoeff() == 0.0);
    CHECK(tape.grad(plain)(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  }
  CHECK(bal.warmed_up());
}

TEST_CASE("balancer maps nll terms into the unit interval after warmup") {
  LossBalancer::Config cfg;
  cfg.warmup_steps = 2;
  cfg.eps = 1e-8;
  LossBalancer bal({"nf"}, {{"nf", 3.0}}, cfg);
  // Warmup observations pin min = 10, max = 30.
  for (double v : {10.0, 30.0}) {
    ad::Tape tape;
    bal.total(tape, {{"nf", tape.input(Eigen::MatrixXd::Constant(1, 1, v))}});
  }
  // A value at the running midpoint maps to 0.5 before weighting.
  {
    ad::Tape tape;
    const ad::Var nf = tape.input(Eigen::MatrixXd::Constant(1, 1, 20.0));
    const ad::Var total = bal.total(tape, {{"nf", nf}});
    CHECK(total.scalar() == doctest::Approx(3.0 * 0.5).epsilon(1e-6));
    // The affine map is a constant transform: gradient is weight / span.
    tape.backward(total);
    CHECK(tape.grad(nf)(0, 0) == doctest::Approx(3.0 / 20.0).epsilon(1e-6));
  }
  // Values at the running extremes map to 0 and 1.
  CHECK(bal.total_value({{"nf", 10.0}}) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(bal.total_value({{"nf", 30.0}}) == doctest::Approx(3.0).epsilon(1e-6));
  // A new extreme expands the span rather than clipping.
  {
    ad::Tape tape;
    bal.total(tape, {{"nf", tape.input(Eigen::MatrixXd::Constant(1, 1, 50.0))}});
  }
  CHECK(bal.total_value({{"nf", 50.0}}) == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(bal.total_value({{"nf", 30.0}}) == doctest::Approx(3.0 * 0.5).epsilon(1e-6));
}

TEST_CASE("balancer passes non-nll terms through with fixed weights") {
  LossBalancer bal({}, {{"a", 10.0}, {"b", 0.1}});
  CHECK(bal.total_value({{"a", 2.0}, {"b", 5.0}}) == doctest::Approx(20.5).epsilon(1e-12));
  ad::Tape tape;
  const ad::Var a = tape.input(Eigen::MatrixXd::Constant(1, 1, 2.0));
  const ad::Var b = tape.input(Eigen::MatrixXd::Constant(1, 1, 5.0));
  const ad::Var total = bal.total(tape, {{"a", a}, {"b", b}});
  CHECK(total.scalar() == doctest::Approx(20.5).epsilon(1e-12));
  tape.backward(total);
  CHECK(tape.grad(a)(0, 0) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(tape.grad(b)(0, 0) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("balancer state tensor roundtrips") {
  LossBalancer::Config cfg;
  cfg.warmup_steps = 1;
  LossBalancer bal({"nf", "rle"}, {{"nf", 1.0}, {"rle", 10.0}}, cfg);
  {
    ad::Tape tape;
    bal.total(tape, {{"nf", tape.input(Eigen::MatrixXd::Constant(1, 1, -3.0))},
                     {"rle", tape.input(Eigen::MatrixXd::Constant(1, 1, 7.0))}});
    bal.total(tape, {{"nf", tape.input(Eigen::MatrixXd::Constant(1, 1, 5.0))},
                     {"rle", tape.input(Eigen::MatrixXd::Constant(1, 1, 2.0))}});
  }
  const Eigen::MatrixXd state = bal.state_tensor();
  REQUIRE(state.rows() == 3);
  REQUIRE(state.cols() == 3);

  LossBalancer fresh({"nf", "rle"}, {{"nf", 1.0}, {"rle", 10.0}}, cfg);
  fresh.load_state_tensor(state);
  CHECK(fresh.step() == bal.step());
  CHECK(fresh.warmed_up() == bal.warmed_up());
  const std::vector<std::pair<std::string, double>> probe = {{"nf", 1.0}, {"rle", 4.0}};
  CHECK(fresh.total_value(probe) == doctest::Approx(bal.total_value(probe)).epsilon(1e-12));

  LossBalancer wrong({"nf"}, {});
  CHECK_THROWS_AS(wrong.load_state_tensor(state), InputError);
}
