// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "poselift/data.hpp"
#include "poselift/liftnet.hpp"

using namespace poselift;

namespace {

struct Fixture {
  Dataset ds;
  std::vector<LiftSample> samples;
};

Fixture make_samples(long count, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.count = count;
  cfg.seed = seed;
  Fixture fx;
  fx.ds = generate(cfg);
  for (const SampleRecord& r : fx.ds.records) fx.samples.push_back({r.x_gt, r.K, r.E});
  return fx;
}

Eigen::VectorXd true_depths(const Pose3D& y, const CameraExtrinsics& E, const Topology& topo) {
  Eigen::VectorXd d(topo.joint_count);
  for (int j = 0; j < topo.joint_count; ++j)
    d(j) = (E.R * y.segment<3>(3 * j) + E.t).z();
  return d;
}

FlowModel identity_flow() {
  Rng rng(404);
  FlowModel m = FlowModel::init(34, 2, 16, rng);
  m.actnorm_ready = true;  // fresh init is the identity map, usable as-is
  return m;
}

// Balancer warmed with extremes wider than any value the tests produce, so
// later observations never move the normalization window.
LossBalancer warmed_balancer() {
  LossBalancer bal = make_lift_balancer({.warmup_steps = 2});
  for (double v : {-1000.0, 5000.0}) {
    ad::Tape tape;
    std::vector<std::pair<std::string, ad::Var>> terms;
    for (const auto& [name, value] : LiftLossTerms{}.named())
      terms.emplace_back(name, tape.constant(Eigen::MatrixXd::Constant(1, 1, name == "nf" ? v : value)));
    bal.total(tape, terms);
  }
  return bal;
}

}  // namespace

TEST_CASE("a fresh lifter outputs the prior depth and reprojects exactly") {
  const Topology& topo = default_topology();
  Fixture fx = make_samples(6, 21);
  Rng rng(22);
  const LifterParams params = LifterParams::init(48, 11000.0, 17, rng);
  CHECK(params.parameter_count() ==
        52L * 48 + 48 + 6L * (48L * 48 + 48) + 48L * 17 + 17);

  for (const LiftSample& s : fx.samples) {
    const Eigen::VectorXd d = lifter_depths(s.x, s.K, s.E, params, topo);
    CHECK((d.array() == 11000.0).all());
    const Pose3D y = lift(s.x, s.K, s.E, params, topo);
    const Pose2D back = project(y, s.K, s.E, topo);
    CHECK((back - s.x).cwiseAbs().maxCoeff() < 1e-9);
    // Every joint really sits at the requested camera depth.
    for (int j = 0; j < topo.joint_count; ++j)
      CHECK((s.E.R * y.segment<3>(3 * j) + s.E.t).z() == doctest::Approx(11000.0).epsilon(1e-12));
  }
}

TEST_CASE("lifter input packs the pose, then [R|t] rows, then intrinsics") {
  const Topology& topo = default_topology();
  Pose2D x(34);
  for (int i = 0; i < 34; ++i) x(i) = 0.5 * i;
  CameraIntrinsics K{600.0, 610.0, 3.0, 4.0, 0.4, 0.5};
  CameraExtrinsics E;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) E.R(r, c) = 10.0 * r + c;
  E.t = Eigen::Vector3d(100.0, 200.0, 300.0);

  const Eigen::VectorXd v = lifter_input(x, K, E, topo);
  REQUIRE(v.size() == 52);
  CHECK((v.head(34).array() == x.array()).all());
  const double camera_part[18] = {0,  1,  2,  100, 10,  11,  12,  200, 20,
                                  21, 22, 300, 600, 610, 3,   4,   0.4, 0.5};
  for (int i = 0; i < 18; ++i) CHECK(v(34 + i) == camera_part[i]);
  CHECK_THROWS_AS(lifter_input(Pose2D::Zero(30), K, E, topo), InputError);
}

TEST_CASE("ground-truth depths close the cycle to machine precision") {
  const Topology& topo = default_topology();
  Fixture fx = make_samples(4, 23);
  const FlowModel flow = identity_flow();

  std::vector<CycleRecord> batch;
  for (std::size_t i = 0; i < 4; ++i) {
    const SampleRecord& r = fx.ds.records[i];
    const Eigen::VectorXd d_in = true_depths(r.y_gt, r.E, topo);
    const double theta = 0.5 + 0.4 * static_cast<double>(i);
    const Pose3D y_rot = rotate_azimuth(r.y_gt, theta, topo);
    const Eigen::VectorXd d_rot = true_depths(y_rot, r.E, topo);
    int call = 0;
    const CycleRecord rec = cycle_with(
        [&](const Pose2D&) { return call++ == 0 ? d_in : d_rot; }, r.x_gt, r.K, r.E,
        theta, topo);
    CHECK(call == 2);
    CHECK((rec.y_hat - r.y_gt).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((rec.x_tilde - rec.x_in).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((rec.y_tilde - rec.y_hat).cwiseAbs().maxCoeff() < 1e-9);
    batch.push_back(rec);
  }

  BoneRatioStats stats;
  std::vector<Pose3D> poses;
  for (const CycleRecord& r : batch) poses.push_back(r.y_hat);
  stats.update(poses, topo);
  const LiftLossTerms t = lift_loss_terms(batch, flow, stats, topo);
  CHECK(t.l2d < 1e-9);
  CHECK(t.l3d < 1e-9);
  CHECK(t.def < 1e-9);
  CHECK(t.limbs < 1e-9);
  CHECK(std::isfinite(t.nf));

  const auto named = t.named();
  REQUIRE(named.size() == 6);
  CHECK(named[0].first == "l2d");
  CHECK(named[1].first == "l3d");
  CHECK(named[2].first == "nf");
  CHECK(named[3].first == "bone");
  CHECK(named[4].first == "limbs");
  CHECK(named[5].first == "def");

  // A lone record has no deformation pair.
  const LiftLossTerms lone =
      lift_loss_terms({batch[0]}, flow, stats, topo);
  CHECK(lone.def == 0.0);
  CHECK_THROWS_AS(lift_loss_terms({}, flow, stats, topo), InputError);
}

TEST_CASE("lift reprojects onto its input even at the depth floor") {
  const Topology& topo = default_topology();
  Fixture fx = make_samples(5, 24);
  Rng rng(25);
  LifterParams params = LifterParams::init(32, 10500.0, 17, rng);
  // Nonzero output head: depths vary joint to joint. The inputs are not
  // standardized here, so the hidden activations are large and the output
  // weights must stay small to keep depths in a plausible band.
  for (Eigen::Index r = 0; r < params.w_out.rows(); ++r)
    for (Eigen::Index c = 0; c < params.w_out.cols(); ++c)
      params.w_out(r, c) = 0.002 * rng.normal();

  for (const LiftSample& s : fx.samples) {
    const Pose3D y = lift(s.x, s.K, s.E, params, topo);
    CHECK((project(y, s.K, s.E, topo) - s.x).cwiseAbs().maxCoeff() < 1e-9);
  }

  // Forcing the raw output negative lands every joint on the floor. The
  // geometry still closes, though at micrometer depths the f/z projection
  // factor amplifies rounding noise, so the bound is looser here.
  params.w_out.setZero();
  params.b_out.setConstant(-3.0);
  const LiftSample& s = fx.samples[0];
  const Eigen::VectorXd raw = lifter_depths(s.x, s.K, s.E, params, topo);
  CHECK((raw.array() == -3.0).all());
  const Pose3D y = lift(s.x, s.K, s.E, params, topo);
  CHECK(y.allFinite());
  CHECK((project(y, s.K, s.E, topo) - s.x).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("constant-depth baseline flattens the camera depth") {
  const Topology& topo = default_topology();
  Fixture fx = make_samples(3, 26);
  const LiftSample& s = fx.samples[1];
  const Pose3D y = lift_constant_depth(s.x, s.K, s.E, 12000.0, topo);
  CHECK((project(y, s.K, s.E, topo) - s.x).cwiseAbs().maxCoeff() < 1e-9);
  // After root centering all joints share one camera-space depth.
  const Eigen::VectorXd d = true_depths(y, s.E, topo);
  CHECK((d.array() - d(0)).abs().maxCoeff() < 1e-9);
  CHECK_THROWS_AS(lift_constant_depth(s.x, s.K, s.E, 0.0, topo), InputError);
}

TEST_CASE("composite lift loss matches its graph and finite differences") {
  const Topology& topo = default_topology();
  const int J = topo.joint_count;
  Fixture fx = make_samples(4, 27);
  const FlowModel flow = identity_flow();
  LossBalancer bal = warmed_balancer();
  REQUIRE(bal.warmed_up());

  const std::size_t B = 4;
  std::vector<double> thetas;
  for (std::size_t i = 0; i < B; ++i) thetas.push_back(0.4 + 0.37 * static_cast<double>(i));

  // The composite as a function of the two raw depth stages.
  Rng rng(28);
  Eigen::MatrixXd D1(B, J), D2(B, J);
  for (std::size_t i = 0; i < B; ++i) {
    const SampleRecord& r = fx.ds.records[i];
    const Eigen::VectorXd base = true_depths(r.y_gt, r.E, topo);
    for (int j = 0; j < J; ++j) {
      D1(static_cast<Eigen::Index>(i), j) = base(j) + 60.0 * rng.normal();
      D2(static_cast<Eigen::Index>(i), j) = base(j) + 60.0 * rng.normal();
    }
  }

  auto records_at = [&](const Eigen::MatrixXd& d1, const Eigen::MatrixXd& d2) {
    std::vector<CycleRecord> out;
    for (std::size_t i = 0; i < B; ++i) {
      int call = 0;
      const SampleRecord& r = fx.ds.records[i];
      out.push_back(cycle_with(
          [&](const Pose2D&) -> Eigen::VectorXd {
            return (call++ == 0 ? d1 : d2).row(static_cast<Eigen::Index>(i)).transpose();
          },
          r.x_gt, r.K, r.E, thetas[i], topo));
    }
    return out;
  };

  // Stats frozen before any comparison so both paths see identical state.
  BoneRatioStats stats;
  {
    std::vector<Pose3D> poses;
    for (const CycleRecord& r : records_at(D1, D2)) poses.push_back(r.y_hat);
    stats.update(poses, topo);
  }

  auto plain_total = [&](const Eigen::MatrixXd& d1, const Eigen::MatrixXd& d2) {
    return lift_loss(records_at(d1, d2), flow, stats, bal, topo);
  };

  // Graph replica over the public batched operations, depths as inputs.
  ad::Tape tape;
  std::vector<CameraIntrinsics> Ks;
  std::vector<CameraExtrinsics> Es;
  Eigen::MatrixXd X(B, 2 * J), cos_c(B, 1), sin_c(B, 1);
  for (std::size_t i = 0; i < B; ++i) {
    const SampleRecord& r = fx.ds.records[i];
    Ks.push_back(r.K);
    Es.push_back(r.E);
    X.row(static_cast<Eigen::Index>(i)) = r.x_gt.transpose();
    cos_c(static_cast<Eigen::Index>(i), 0) = std::cos(thetas[i]);
    sin_c(static_cast<Eigen::Index>(i), 0) = std::sin(thetas[i]);
  }
  graph::CameraColumns cam = graph::CameraColumns::attach(tape, Ks, Es);
  auto xy = graph::deinterleave(X, 2);
  graph::PosePlanes2D x0{tape.constant(xy[0]), tape.constant(xy[1])};
  ad::Var x0_flat = tape.constant(X);
  ad::Var cosc = tape.constant(cos_c);
  ad::Var sinc = tape.constant(sin_c);
  ad::Var d1_var = tape.input(D1);
  ad::Var d2_var = tape.input(D2);

  graph::PosePlanes y_hat = graph::unproject(x0, ad::max_with(d1_var, kDepthFloor), cam);
  graph::PosePlanes y_rot = graph::rotate_azimuth(y_hat, cosc, sinc, topo.root_index);
  graph::PosePlanes2D x_rot = graph::project(y_rot, cam);
  ad::Var x_rot_flat = graph::interleave({x_rot.u, x_rot.v}, J);
  graph::PosePlanes y_trot = graph::unproject(x_rot, ad::max_with(d2_var, kDepthFloor), cam);
  graph::PosePlanes y_til =
      graph::rotate_azimuth(y_trot, cosc, ad::neg(sinc), topo.root_index);
  graph::PosePlanes2D x_til = graph::project(y_til, cam);

  ad::Var x_til_flat = graph::interleave({x_til.u, x_til.v}, J);
  ad::Var y_hat_flat = graph::interleave({y_hat.x, y_hat.y, y_hat.z}, J);
  ad::Var y_rot_flat = graph::interleave({y_rot.x, y_rot.y, y_rot.z}, J);
  ad::Var y_trot_flat = graph::interleave({y_trot.x, y_trot.y, y_trot.z}, J);
  ad::Var y_til_flat = graph::interleave({y_til.x, y_til.y, y_til.z}, J);

  FlowGraph fg = FlowGraph::attach(tape, flow, false);
  std::vector<std::pair<std::string, ad::Var>> terms;
  terms.emplace_back("l2d", graph::l2d(x_til_flat, x0_flat));
  terms.emplace_back("l3d", graph::l3d(y_rot_flat, y_trot_flat));
  terms.emplace_back("nf", graph::nf(tape, x_rot_flat, fg, flow, topo));
  terms.emplace_back("bone", graph::bone(y_hat_flat, topo, stats));
  terms.emplace_back("limbs", graph::limbs(y_hat_flat, topo));
  terms.emplace_back("def", graph::deformation(y_hat_flat, y_til_flat));
  ad::Var total = bal.total(tape, terms);

  const double f0 = plain_total(D1, D2);
  CHECK(total.scalar() == doctest::Approx(f0).epsilon(1e-9));

  tape.backward(total);
  const Eigen::MatrixXd g1 = tape.grad(d1_var);
  const Eigen::MatrixXd g2 = tape.grad(d2_var);

  const double h = 1.0;  // depths sit near 1e4 mm, so this is ~1e-4 relative
  Rng pick(29);
  for (int probe = 0; probe < 10; ++probe) {
    const Eigen::Index r = static_cast<Eigen::Index>(pick.uniform_index(B));
    const Eigen::Index c = static_cast<Eigen::Index>(pick.uniform_index(J));
    const bool first = probe % 2 == 0;
    Eigen::MatrixXd dp = D1, dm = D1, ep = D2, em = D2;
    if (first) {
      dp(r, c) += h;
      dm(r, c) -= h;
    } else {
      ep(r, c) += h;
      em(r, c) -= h;
    }
    const double fd = (plain_total(dp, ep) - plain_total(dm, em)) / (2.0 * h);
    const double g = first ? g1(r, c) : g2(r, c);
    CHECK(std::abs(fd - g) < 1e-4 * std::max({1.0, std::abs(fd), std::abs(g)}));
  }
}

TEST_CASE("training lowers the balanced loss deterministically") {
  const Topology& topo = default_topology();
  Fixture fx = make_samples(160, 31);
  const FlowModel flow = identity_flow();

  LiftTrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch = 40;
  cfg.dim_l = 32;
  cfg.seed = 5;
  cfg.balancer_warmup = 4;
  const LiftTrainResult a = train_liftnet(fx.samples, flow, cfg, topo);
  REQUIRE(a.trace.size() == 4);
  CHECK(!a.diverged);
  CHECK(a.trace.back() < a.trace.front());
  CHECK(a.balancer.warmed_up());

  const LiftTrainResult b = train_liftnet(fx.samples, flow, cfg, topo);
  CHECK(a.trace == b.trace);
  CHECK(lifter_checkpoint(a, topo, "h").serialize() ==
        lifter_checkpoint(b, topo, "h").serialize());

  LiftTrainConfig other = cfg;
  other.seed = 6;
  const LiftTrainResult c = train_liftnet(fx.samples, flow, other, topo);
  CHECK(a.trace != c.trace);

  // The ablation path trains without the flow term.
  LiftTrainConfig no_nf = cfg;
  no_nf.epochs = 2;
  no_nf.use_nf_term = false;
  const LiftTrainResult d = train_liftnet(fx.samples, flow, no_nf, topo);
  CHECK(!d.diverged);
  CHECK(d.trace.size() == 2);

  // A hopeless learning rate trips the divergence guard.
  LiftTrainConfig wild = cfg;
  wild.epochs = 2;
  wild.lr = 1e30;
  const LiftTrainResult e = train_liftnet(fx.samples, flow, wild, topo);
  CHECK(e.diverged);
}

TEST_CASE("training validates its inputs") {
  const Topology& topo = default_topology();
  Fixture fx = make_samples(8, 32);
  FlowModel flow = identity_flow();
  LiftTrainConfig cfg;
  cfg.epochs = 1;
  cfg.dim_l = 8;

  CHECK_THROWS_AS(train_liftnet({}, flow, cfg, topo), InputError);

  FlowModel cold = flow;
  cold.actnorm_ready = false;
  CHECK_THROWS_AS(train_liftnet(fx.samples, cold, cfg, topo), InputError);

  Rng rng(33);
  FlowModel narrow = FlowModel::init(10, 2, 8, rng);
  narrow.actnorm_ready = true;
  CHECK_THROWS_AS(train_liftnet(fx.samples, narrow, cfg, topo), InputError);

  LiftTrainConfig bad = cfg;
  bad.epochs = 0;
  CHECK_THROWS_AS(train_liftnet(fx.samples, flow, bad, topo), InputError);
}

TEST_CASE("lifter checkpoints roundtrip bitwise") {
  const Topology& topo = default_topology();
  Fixture fx = make_samples(60, 34);
  const FlowModel flow = identity_flow();
  LiftTrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch = 30;
  cfg.dim_l = 16;
  const LiftTrainResult result = train_liftnet(fx.samples, flow, cfg, topo);

  const Checkpoint ck = lifter_checkpoint(result, topo, "flowhash123");
  CHECK(ck.kind == "lifter");
  CHECK(ck.meta_at("flow_hash") == "flowhash123");

  const auto path = std::filesystem::temp_directory_path() / "poselift_lifter_ck.txt";
  ck.save(path);
  const Checkpoint back = Checkpoint::load(path);
  CHECK(back.serialize() == ck.serialize());

  LifterParams params;
  BoneRatioStats stats;
  lifter_from_checkpoint(back, topo, params, stats);
  CHECK(params.dim_l == 16);
  CHECK(params.depth_prior == result.params.depth_prior);
  const auto orig = result.params.tensors();
  const auto got = params.tensors();
  REQUIRE(orig.size() == got.size());
  for (std::size_t i = 0; i < orig.size(); ++i)
    CHECK((orig[i]->array() == got[i]->array()).all());
  CHECK((stats.state_tensor().array() == result.stats.state_tensor().array()).all());

  // The lifter reproduces its depths bit for bit after the roundtrip.
  const LiftSample& s = fx.samples[0];
  CHECK((lifter_depths(s.x, s.K, s.E, params, topo).array() ==
         lifter_depths(s.x, s.K, s.E, result.params, topo).array())
            .all());

  Checkpoint wrong = ck;
  wrong.kind = "flow";
  CHECK_THROWS_AS(LifterParams::from_checkpoint(wrong, topo), InputError);

  Topology renamed = topo;
  renamed.joint_names[3] = "other";
  CHECK_THROWS_AS(LifterParams::from_checkpoint(ck, renamed), InputError);
  std::filesystem::remove(path);
}
