// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include "poselift/liftnet.hpp"

#include <cmath>

namespace poselift {
namespace {

// Camera part of the lifter input: [R|t] flattened row-major, then focal,
// principal point, and scaling pairs. The layout is a wire contract; the
// standardization tensors are indexed against it.
Eigen::Matrix<double, 18, 1> lifter_camera_record(const CameraIntrinsics& K,
                                                  const CameraExtrinsics& E) {
  Eigen::Matrix<double, 18, 1> r;
  r << E.R(0, 0), E.R(0, 1), E.R(0, 2), E.t(0), E.R(1, 0), E.R(1, 1), E.R(1, 2), E.t(1),
      E.R(2, 0), E.R(2, 1), E.R(2, 2), E.t(2), K.f_w, K.f_h, K.c_w, K.c_h, K.s_w, K.s_h;
  return r;
}

Eigen::RowVectorXd standardized(const LifterParams& p, const Eigen::VectorXd& v) {
  return ((v.transpose() - p.std_mu.row(0)).array() / p.std_sd.row(0).array()).matrix();
}

Eigen::RowVectorXd mlp_forward(const LifterParams& p, const Eigen::VectorXd& v52) {
  Eigen::RowVectorXd h = standardized(p, v52) * p.w_in + p.b_in.row(0);
  h = h.cwiseMax(0.0);
  for (const auto& blk : p.blocks) {
    Eigen::RowVectorXd u = (h * blk.w1 + blk.b1.row(0)).cwiseMax(0.0);
    Eigen::RowVectorXd w = (u * blk.w2 + blk.b2.row(0)).cwiseMax(0.0);
    h += w;
  }
  return h * p.w_out + p.b_out.row(0);
}

}  // namespace

LifterParams LifterParams::init(int dim_l, double depth_prior, int joints, Rng& rng) {
  require(dim_l > 0, "lifter: dim_l must be positive");
  require(joints > 0, "lifter: joint count must be positive");
  const int in = 2 * joints + 18;
  LifterParams p;
  p.dim_l = dim_l;
  p.depth_prior = depth_prior;
  p.std_mu = Eigen::MatrixXd::Zero(1, in);
  p.std_sd = Eigen::MatrixXd::Ones(1, in);
  auto he = [&rng](Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
    m.resize(rows, cols);
    const double sd = std::sqrt(2.0 / static_cast<double>(rows));
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = sd * rng.normal();
  };
  he(p.w_in, in, dim_l);
  p.b_in = Eigen::MatrixXd::Zero(1, dim_l);
  for (auto& blk : p.blocks) {
    he(blk.w1, dim_l, dim_l);
    blk.b1 = Eigen::MatrixXd::Zero(1, dim_l);
    he(blk.w2, dim_l, dim_l);
    blk.b2 = Eigen::MatrixXd::Zero(1, dim_l);
  }
  p.w_out = Eigen::MatrixXd::Zero(dim_l, joints);
  p.b_out = Eigen::MatrixXd::Constant(1, joints, depth_prior);
  return p;
}

long LifterParams::parameter_count() const {
  long n = 0;
  for (const Eigen::MatrixXd* t : tensors()) n += static_cast<long>(t->size());
  return n;
}

std::vector<Eigen::MatrixXd*> LifterParams::tensors() {
  std::vector<Eigen::MatrixXd*> out = {&w_in, &b_in};
  for (auto& blk : blocks) {
    out.push_back(&blk.w1);
    out.push_back(&blk.b1);
    out.push_back(&blk.w2);
    out.push_back(&blk.b2);
  }
  out.push_back(&w_out);
  out.push_back(&b_out);
  return out;
}

std::vector<const Eigen::MatrixXd*> LifterParams::tensors() const {
  auto mut = const_cast<LifterParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

namespace {

const char* const kLifterTensorNames[] = {
    "w_in",      "b_in",      "block0_w1", "block0_b1", "block0_w2", "block0_b2",
    "block1_w1", "block1_b1", "block1_w2", "block1_b2", "block2_w1", "block2_b1",
    "block2_w2", "block2_b2", "w_out",     "b_out"};

}  // namespace

Checkpoint LifterParams::to_checkpoint(const Topology& topo) const {
  Checkpoint ck;
  ck.kind = "lifter";
  ck.meta["dim_l"] = std::to_string(dim_l);
  ck.meta["joints"] = std::to_string(topo.joint_count);
  ck.meta["topology"] = topo.content_hash();
  ck.meta["depth_prior"] = format_g17(depth_prior);
  ck.add("std_mu", std_mu);
  ck.add("std_sd", std_sd);
  auto ts = tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) ck.add(kLifterTensorNames[i], *ts[i]);
  return ck;
}

LifterParams LifterParams::from_checkpoint(const Checkpoint& ck, const Topology& topo) {
  require(ck.kind == "lifter", "checkpoint kind '" + ck.kind + "' is not a lifter");
  require(ck.meta_at("topology") == topo.content_hash(),
          "lifter checkpoint was trained on a different topology");
  LifterParams p;
  p.dim_l = std::stoi(ck.meta_at("dim_l"));
  p.depth_prior = parse_double(ck.meta_at("depth_prior"));
  p.std_mu = ck.tensor("std_mu");
  p.std_sd = ck.tensor("std_sd");
  auto ts = p.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) *ts[i] = ck.tensor(kLifterTensorNames[i]);
  const int in = 2 * topo.joint_count + 18;
  require(p.w_in.rows() == in && p.w_in.cols() == p.dim_l &&
              p.w_out.rows() == p.dim_l && p.w_out.cols() == topo.joint_count,
          "lifter checkpoint tensor shapes do not match dim_l/joints");
  return p;
}

Eigen::VectorXd lifter_input(const Pose2D& x, const CameraIntrinsics& K,
                             const CameraExtrinsics& E, const Topology& topo) {
  check_pose2d(x, topo, "lifter_input");
  Eigen::VectorXd v(x.size() + 18);
  v << x, lifter_camera_record(K, E);
  return v;
}

Eigen::VectorXd lifter_depths(const Pose2D& x, const CameraIntrinsics& K,
                              const CameraExtrinsics& E, const LifterParams& params,
                              const Topology& topo) {
  return mlp_forward(params, lifter_input(x, K, E, topo)).transpose();
}

Pose3D lift(const Pose2D& x, const CameraIntrinsics& K, const CameraExtrinsics& E,
            const LifterParams& params, const Topology& topo) {
  Eigen::VectorXd depths = lifter_depths(x, K, E, params, topo).cwiseMax(kDepthFloor);
  return unproject(x, depths, K, E, topo);
}

Pose3D lift_constant_depth(const Pose2D& x, const CameraIntrinsics& K,
                           const CameraExtrinsics& E, double depth, const Topology& topo) {
  require(depth > 0, "constant-depth lift: depth must be positive");
  return unproject(x, Eigen::VectorXd::Constant(topo.joint_count, depth), K, E, topo);
}

CycleRecord cycle_with(const DepthFn& depths, const Pose2D& x, const CameraIntrinsics& K,
                       const CameraExtrinsics& E, double theta, const Topology& topo) {
  CycleRecord rec;
  rec.x_in = x;
  rec.theta = theta;
  rec.y_hat = unproject(x, depths(x).cwiseMax(kDepthFloor), K, E, topo);
  rec.y_hat_rot = rotate_azimuth(rec.y_hat, theta, topo);
  rec.x_hat_rot = project(rec.y_hat_rot, K, E, topo);
  rec.y_tilde_rot = unproject(rec.x_hat_rot, depths(rec.x_hat_rot).cwiseMax(kDepthFloor), K, E, topo);
  rec.y_tilde = inverse_rotate_azimuth(rec.y_tilde_rot, theta, topo);
  rec.x_tilde = project(rec.y_tilde, K, E, topo);
  return rec;
}

CycleRecord cycle(const Pose2D& x, const CameraIntrinsics& K, const CameraExtrinsics& E,
                  const LifterParams& params, double theta, const Topology& topo) {
  return cycle_with(
      [&](const Pose2D& in) { return lifter_depths(in, K, E, params, topo); }, x, K, E,
      theta, topo);
}

CycleRecord cycle(const Pose2D& x, const CameraIntrinsics& K, const CameraExtrinsics& E,
                  const LifterParams& params, Rng& rng, const Topology& topo) {
  return cycle(x, K, E, params, sample_rotation_angle(rng), topo);
}

LossBalancer make_lift_balancer(LossBalancer::Config config) {
  return LossBalancer({"nf"},
                      {{"l2d", 10.0},
                       {"l3d", 1.0},
                       {"nf", 1.0},
                       {"bone", 10.0},
                       {"limbs", 0.1},
                       {"def", 1.0}},
                      config);
}

std::vector<std::pair<std::string, double>> LiftLossTerms::named() const {
  return {{"l2d", l2d}, {"l3d", l3d}, {"nf", nf}, {"bone", bone}, {"limbs", limbs}, {"def", def}};
}

LiftLossTerms lift_loss_terms(const std::vector<CycleRecord>& batch, const FlowModel& flow,
                              const BoneRatioStats& stats, const Topology& topo) {
  require(!batch.empty(), "lift_loss: empty batch");
  LiftLossTerms t;
  const double B = static_cast<double>(batch.size());
  std::vector<Pose3D> y_hats;
  y_hats.reserve(batch.size());
  for (const CycleRecord& r : batch) {
    t.l2d += l2d_loss(r.x_tilde, r.x_in);
    t.l3d += l3d_loss(r.y_hat_rot, r.y_tilde_rot);
    t.nf += nf_loss_pose(r.x_hat_rot, flow, topo);
    t.limbs += limbs_loss(r.y_hat, topo);
    y_hats.push_back(r.y_hat);
  }
  t.l2d /= B;
  t.l3d /= B;
  t.nf /= B;
  t.limbs /= B;
  t.bone = bone_loss(y_hats, topo, stats);
  const std::size_t pairs = batch.size() / 2;
  for (std::size_t p = 0; p < pairs; ++p)
    t.def += deformation_loss(batch[2 * p].y_hat, batch[2 * p + 1].y_hat,
                              batch[2 * p].y_tilde, batch[2 * p + 1].y_tilde);
  if (pairs) t.def /= static_cast<double>(pairs);
  return t;
}

double lift_loss(const std::vector<CycleRecord>& batch, const FlowModel& flow,
                 const BoneRatioStats& stats, const LossBalancer& balancer,
                 const Topology& topo) {
  return balancer.total_value(lift_loss_terms(batch, flow, stats, topo).named());
}

namespace {

struct LifterVars {
  std::vector<ad::Var> trainable;  // LifterParams::tensors() order
  ad::Var neg_mu, inv_sd;

  static LifterVars attach(ad::Tape& tape, LifterParams& p) {
    LifterVars v;
    for (Eigen::MatrixXd* t : p.tensors()) v.trainable.push_back(tape.input(*t));
    v.neg_mu = tape.constant(-p.std_mu);
    v.inv_sd = tape.constant(p.std_sd.cwiseInverse());
    return v;
  }

  ad::Var w_in() const { return trainable[0]; }
  ad::Var b_in() const { return trainable[1]; }
  ad::Var blk(int i, int slot) const { return trainable[2 + 4 * static_cast<std::size_t>(i) + slot]; }
  ad::Var w_out() const { return trainable[14]; }
  ad::Var b_out() const { return trainable[15]; }
};

ad::Var mlp_graph(const LifterVars& pv, ad::Var v_raw) {
  using namespace ad;
  Var v = mul_rowvec(add_rowvec(v_raw, pv.neg_mu), pv.inv_sd);
  Var h = relu(add_rowvec(matmul(v, pv.w_in()), pv.b_in()));
  for (int i = 0; i < 3; ++i) {
    Var u = relu(add_rowvec(matmul(h, pv.blk(i, 0)), pv.blk(i, 1)));
    Var w = relu(add_rowvec(matmul(u, pv.blk(i, 2)), pv.blk(i, 3)));
    h = add(h, w);
  }
  return add_rowvec(matmul(h, pv.w_out()), pv.b_out());
}

long count_floor_hits(const Eigen::MatrixXd& raw) {
  return (raw.array() < kDepthFloor).count();
}

}  // namespace

LiftTrainResult train_liftnet(const std::vector<LiftSample>& data, const FlowModel& flow,
                              const LiftTrainConfig& config, const Topology& topo) {
  require(!data.empty(), "train_liftnet: empty dataset");
  require(config.epochs > 0 && config.batch > 0, "train_liftnet: epochs and batch must be positive");
  flow.validate();
  require(flow.actnorm_ready, "train_liftnet: flow model is untrained");
  const int J = topo.joint_count;
  require(flow.dim == 2 * J, "train_liftnet: flow dimension does not match the skeleton");

  const std::size_t N = data.size();
  const int in_width = 2 * J + 18;
  Eigen::MatrixXd inputs(static_cast<Eigen::Index>(N), in_width);
  double depth_prior = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    inputs.row(static_cast<Eigen::Index>(i)) =
        lifter_input(data[i].x, data[i].K, data[i].E, topo).transpose();
    depth_prior += data[i].E.t.z();
  }
  depth_prior /= static_cast<double>(N);

  Rng rng(config.seed);
  LiftTrainResult result;
  result.params = LifterParams::init(config.dim_l, depth_prior, J, rng);
  result.params.std_mu = inputs.colwise().mean();
  Eigen::RowVectorXd var = (inputs.rowwise() - result.params.std_mu.row(0))
                               .array()
                               .square()
                               .colwise()
                               .mean()
                               .matrix();
  result.params.std_sd = var.array().sqrt().max(1e-8).matrix();
  result.balancer = make_lift_balancer({.warmup_steps = config.balancer_warmup});
  result.stats = BoneRatioStats();

  AdamW opt({.lr = config.lr, .weight_decay = config.weight_decay});
  LifterParams snap_params = result.params;
  BoneRatioStats snap_stats = result.stats;
  LossBalancer snap_balancer = result.balancer;
  std::vector<double> trace;
  long floor_hits = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = rng.permutation(N);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < N; start += static_cast<std::size_t>(config.batch)) {
      const std::size_t B = std::min<std::size_t>(config.batch, N - start);
      Eigen::MatrixXd X(B, 2 * J), cam18(B, 18);
      Eigen::MatrixXd cos_c(B, 1), sin_c(B, 1);
      std::vector<CameraIntrinsics> Ks(B);
      std::vector<CameraExtrinsics> Es(B);
      for (std::size_t i = 0; i < B; ++i) {
        const LiftSample& s = data[order[start + i]];
        X.row(static_cast<Eigen::Index>(i)) = s.x.transpose();
        cam18.row(static_cast<Eigen::Index>(i)) = lifter_camera_record(s.K, s.E).transpose();
        Ks[i] = s.K;
        Es[i] = s.E;
        const double theta = sample_rotation_angle(rng);
        cos_c(static_cast<Eigen::Index>(i), 0) = std::cos(theta);
        sin_c(static_cast<Eigen::Index>(i), 0) = std::sin(theta);
      }

      ad::Tape tape;
      LifterVars pv = LifterVars::attach(tape, result.params);
      graph::CameraColumns cam = graph::CameraColumns::attach(tape, Ks, Es);
      auto xy = graph::deinterleave(X, 2);
      graph::PosePlanes2D x0{tape.constant(xy[0]), tape.constant(xy[1])};
      ad::Var x0_flat = tape.constant(X);
      ad::Var camc = tape.constant(cam18);
      ad::Var cosc = tape.constant(cos_c);
      ad::Var sinc = tape.constant(sin_c);

      ad::Var raw1 = mlp_graph(pv, ad::concat_cols({x0_flat, camc}));
      ad::Var depths1 = ad::max_with(raw1, kDepthFloor);
      graph::PosePlanes y_hat = graph::unproject(x0, depths1, cam);
      graph::PosePlanes y_rot = graph::rotate_azimuth(y_hat, cosc, sinc, topo.root_index);
      graph::PosePlanes2D x_rot = graph::project(y_rot, cam);
      ad::Var x_rot_flat = graph::interleave({x_rot.u, x_rot.v}, J);

      ad::Var raw2 = mlp_graph(pv, ad::concat_cols({x_rot_flat, camc}));
      ad::Var depths2 = ad::max_with(raw2, kDepthFloor);
      graph::PosePlanes y_trot = graph::unproject(x_rot, depths2, cam);
      graph::PosePlanes y_til = graph::rotate_azimuth(y_trot, cosc, ad::neg(sinc), topo.root_index);
      graph::PosePlanes2D x_til = graph::project(y_til, cam);

      ad::Var x_til_flat = graph::interleave({x_til.u, x_til.v}, J);
      ad::Var y_hat_flat = graph::interleave({y_hat.x, y_hat.y, y_hat.z}, J);
      ad::Var y_rot_flat = graph::interleave({y_rot.x, y_rot.y, y_rot.z}, J);
      ad::Var y_trot_flat = graph::interleave({y_trot.x, y_trot.y, y_trot.z}, J);
      ad::Var y_til_flat = graph::interleave({y_til.x, y_til.y, y_til.z}, J);

      result.stats.update_rows(y_hat_flat.val(), topo);

      std::vector<std::pair<std::string, ad::Var>> terms;
      terms.emplace_back("l2d", graph::l2d(x_til_flat, x0_flat));
      terms.emplace_back("l3d", graph::l3d(y_rot_flat, y_trot_flat));
      if (config.use_nf_term) {
        FlowGraph fg = FlowGraph::attach(tape, flow, false);
        terms.emplace_back("nf", graph::nf(tape, x_rot_flat, fg, flow, topo));
      }
      terms.emplace_back("bone", graph::bone(y_hat_flat, topo, result.stats));
      terms.emplace_back("limbs", graph::limbs(y_hat_flat, topo));
      terms.emplace_back("def", graph::deformation(y_hat_flat, y_til_flat));
      ad::Var total = result.balancer.total(tape, terms);

      const double loss = total.scalar();
      if (!std::isfinite(loss)) {
        result.params = snap_params;
        result.stats = snap_stats;
        result.balancer = snap_balancer;
        result.trace = trace;
        result.depth_floor_hits = floor_hits;
        result.diverged = true;
        return result;
      }
      floor_hits += count_floor_hits(raw1.val()) + count_floor_hits(raw2.val());
      epoch_loss += loss * static_cast<double>(B);

      tape.backward(total);
      std::vector<Eigen::MatrixXd> grads;
      grads.reserve(pv.trainable.size());
      for (const ad::Var& v : pv.trainable) grads.push_back(tape.grad(v));
      opt.step(result.params.tensors(), grads);
    }
    trace.push_back(epoch_loss / static_cast<double>(N));
    snap_params = result.params;
    snap_stats = result.stats;
    snap_balancer = result.balancer;
  }

  result.trace = trace;
  result.depth_floor_hits = floor_hits;
  return result;
}

Checkpoint lifter_checkpoint(const LiftTrainResult& result, const Topology& topo,
                             const std::string& flow_hash) {
  Checkpoint ck = result.params.to_checkpoint(topo);
  ck.meta["flow_hash"] = flow_hash;
  ck.meta["depth_floor_hits"] = std::to_string(result.depth_floor_hits);
  ck.meta["diverged"] = result.diverged ? "1" : "0";
  ck.add("bone_stats", result.stats.state_tensor());
  ck.add("balancer", result.balancer.state_tensor());
  return ck;
}

void lifter_from_checkpoint(const Checkpoint& ck, const Topology& topo, LifterParams& params,
                            BoneRatioStats& stats) {
  params = LifterParams::from_checkpoint(ck, topo);
  stats = BoneRatioStats::from_state_tensor(ck.tensor("bone_stats"));
}

}  // namespace poselift
