// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include "poselift/constraints.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace poselift {

const Eigen::VectorXd& BoneRatioStats::ratios() const {
  require(initialized(), "bone ratio statistics not initialized");
  return ratios_;
}

Eigen::VectorXd BoneRatioStats::batch_mean_ratios(const Eigen::MatrixXd& batch,
                                                  const Topology& topo) const {
  const int B = static_cast<int>(topo.bones.size());
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(B);
  for (int i = 0; i < batch.rows(); ++i) {
    const Eigen::VectorXd lengths = bone_lengths(batch.row(i).transpose(), topo);
    const double ref = lengths[topo.reference_bone];
    if (ref <= 1e-9) throw NumericalError("bone stats: degenerate reference bone");
    acc += lengths / ref;
  }
  return acc / static_cast<double>(batch.rows());
}

void BoneRatioStats::update(const std::vector<Pose3D>& batch, const Topology& topo) {
  require(!batch.empty(), "bone stats: empty batch");
  Eigen::MatrixXd rows(batch.size(), 3 * topo.joint_count);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    check_pose3d(batch[i], topo, "bone stats");
    rows.row(i) = batch[i].transpose();
  }
  update_rows(rows, topo);
}

void BoneRatioStats::update_rows(const Eigen::MatrixXd& batch, const Topology& topo) {
  require(batch.rows() > 0, "bone stats: empty batch");
  const Eigen::VectorXd mean = batch_mean_ratios(batch, topo);
  if (!initialized()) {
    ratios_ = mean;
  } else {
    ratios_ = decay_ * ratios_ + (1.0 - decay_) * mean;
  }
  ++count_;
}

Eigen::MatrixXd BoneRatioStats::state_tensor() const {
  Eigen::MatrixXd state(ratios_.size() + 2, 1);
  state(0, 0) = decay_;
  state(1, 0) = static_cast<double>(count_);
  for (int b = 0; b < ratios_.size(); ++b) state(b + 2, 0) = ratios_[b];
  return state;
}

BoneRatioStats BoneRatioStats::from_state_tensor(const Eigen::MatrixXd& state) {
  require(state.cols() == 1 && state.rows() >= 2, "bone stats: bad state tensor");
  BoneRatioStats stats(state(0, 0));
  stats.count_ = static_cast<long>(state(1, 0));
  stats.ratios_ = state.col(0).segment(2, state.rows() - 2);
  return stats;
}

double bone_loss(const std::vector<Pose3D>& batch, const Topology& topo,
                 const BoneRatioStats& stats) {
  require(!batch.empty(), "bone_loss: empty batch");
  const Eigen::VectorXd& target = stats.ratios();
  const int B = static_cast<int>(topo.bones.size());
  require(target.size() == B, "bone_loss: stats bone count mismatch");
  double acc = 0.0;
  for (const Pose3D& y : batch) {
    const Eigen::VectorXd lengths = bone_lengths(y, topo);
    const double ref = lengths[topo.reference_bone];
    if (ref <= 1e-9) throw NumericalError("bone_loss: degenerate reference bone");
    for (int b = 0; b < B; ++b) {
      const double dev = lengths[b] / ref - target[b];
      acc += dev * dev;
    }
  }
  return acc / (static_cast<double>(batch.size()) * B);
}

double limbs_loss(const Pose3D& y, const Topology& topo) {
  check_pose3d(y, topo, "limbs_loss");
  require(!topo.limbs.empty(), "limbs_loss: topology has no limbs");
  const Eigen::Vector3d spine = y.segment<3>(3 * topo.spine_index);
  const Eigen::Vector3d a = y.segment<3>(3 * topo.left_hip_index) - spine;
  const Eigen::Vector3d b = y.segment<3>(3 * topo.right_hip_index) - spine;
  const Eigen::Vector3d n = a.cross(b);
  if (n.norm() <= 1e-9) throw NumericalError("limbs_loss: degenerate body plane");
  double acc = 0.0;
  for (const Limb& limb : topo.limbs) {
    const Bone& pb = topo.bones[limb.proximal_bone];
    const Bone& db = topo.bones[limb.distal_bone];
    const Eigen::Vector3d p = y.segment<3>(3 * pb.child) - y.segment<3>(3 * pb.parent);
    const Eigen::Vector3d d = y.segment<3>(3 * db.child) - y.segment<3>(3 * db.parent);
    acc += std::max(0.0, n.dot(p) - n.dot(d));
  }
  return acc / static_cast<double>(topo.limbs.size());
}

double deformation_loss(const Pose3D& ya, const Pose3D& yb, const Pose3D& ta, const Pose3D& tb) {
  require(ya.size() == yb.size() && ya.size() == ta.size() && ya.size() == tb.size(),
          "deformation_loss: pose length mismatch");
  return ((ya - yb) - (ta - tb)).norm();
}

double l2d_loss(const Pose2D& xa, const Pose2D& xb) {
  require(xa.size() == xb.size(), "l2d_loss: pose length mismatch");
  return (xa - xb).cwiseAbs().sum();
}

double l3d_loss(const Pose3D& ya, const Pose3D& yb) {
  require(ya.size() == yb.size(), "l3d_loss: pose length mismatch");
  return (ya - yb).norm();
}

double rle_loss(const Pose2D& x_hat, const Eigen::VectorXd& sigma, const Pose2D& x_gt) {
  require(x_hat.size() == x_gt.size() && x_hat.size() == sigma.size(),
          "rle_loss: input length mismatch");
  for (int i = 0; i < sigma.size(); ++i)
    require(sigma[i] > 0.0, "rle_loss: sigma must be positive");
  double acc = 0.0;
  for (int i = 0; i < x_hat.size(); ++i) {
    const double s = std::max(sigma[i], 1e-4);
    acc += std::abs(x_hat[i] - x_gt[i]) / s + std::log(s) + std::log(2.0);
  }
  return acc / static_cast<double>(x_hat.size());
}

namespace graph {

using ad::Var;

Var joint_cols(Var poses, int joint, int dim) { return ad::cols(poses, dim * joint, dim); }

Var l2d(Var xa, Var xb) {
  const double batch = xa.rows();
  return ad::mul_scalar(ad::norm1(ad::sub(xa, xb)), 1.0 / batch);
}

Var l3d(Var ya, Var yb) {
  const double batch = ya.rows();
  return ad::mul_scalar(ad::sum(ad::rowwise_norm2(ad::sub(ya, yb))), 1.0 / batch);
}

Var deformation(Var y_forward, Var y_backward) {
  const int batch = y_forward.rows();
  const int pairs = batch / 2;
  if (pairs == 0) return y_forward.tape->constant_scalar(0.0);
  Eigen::MatrixXd pairing = Eigen::MatrixXd::Zero(pairs, batch);
  for (int p = 0; p < pairs; ++p) {
    pairing(p, 2 * p) = 1.0;
    pairing(p, 2 * p + 1) = -1.0;
  }
  Var d = y_forward.tape->constant(pairing);
  Var diff = ad::sub(ad::matmul(d, y_forward), ad::matmul(d, y_backward));
  return ad::mul_scalar(ad::sum(ad::rowwise_norm2(diff)), 1.0 / pairs);
}

Var limbs(Var y, const Topology& topo) {
  Var spine = joint_cols(y, topo.spine_index, 3);
  Var a = ad::sub(joint_cols(y, topo.left_hip_index, 3), spine);
  Var b = ad::sub(joint_cols(y, topo.right_hip_index, 3), spine);
  Var n = ad::cross3(a, b);
  for (int i = 0; i < n.rows(); ++i) {
    if (n.val().row(i).norm() <= 1e-9)
      throw NumericalError("limbs_loss: degenerate body plane");
  }
  Var acc = y.tape->constant(Eigen::MatrixXd::Zero(y.rows(), 1));
  for (const Limb& limb : topo.limbs) {
    const Bone& pb = topo.bones[limb.proximal_bone];
    const Bone& db = topo.bones[limb.distal_bone];
    Var p = ad::sub(joint_cols(y, pb.child, 3), joint_cols(y, pb.parent, 3));
    Var d = ad::sub(joint_cols(y, db.child, 3), joint_cols(y, db.parent, 3));
    Var np = ad::sum_cols(ad::mul(n, p));
    Var nd = ad::sum_cols(ad::mul(n, d));
    acc = ad::add(acc, ad::max_with(ad::sub(np, nd), 0.0));
  }
  return ad::mean(ad::mul_scalar(acc, 1.0 / static_cast<double>(topo.limbs.size())));
}

Var bone(Var y, const Topology& topo, const BoneRatioStats& stats) {
  const Eigen::VectorXd& target = stats.ratios();
  const int B = static_cast<int>(topo.bones.size());
  require(target.size() == B, "bone_loss: stats bone count mismatch");
  const Bone& rb = topo.bones[topo.reference_bone];
  Var ref = ad::rowwise_norm2(
      ad::sub(joint_cols(y, rb.child, 3), joint_cols(y, rb.parent, 3)));
  for (int i = 0; i < ref.rows(); ++i)
    if (ref.val()(i, 0) <= 1e-9) throw NumericalError("bone_loss: degenerate reference bone");
  std::vector<Var> devs;
  devs.reserve(B);
  for (int bidx = 0; bidx < B; ++bidx) {
    const Bone& bn = topo.bones[bidx];
    Var len = ad::rowwise_norm2(
        ad::sub(joint_cols(y, bn.child, 3), joint_cols(y, bn.parent, 3)));
    Var ratio = ad::div(len, ref);
    devs.push_back(ad::square(ad::add_scalar(ratio, -target[bidx])));
  }
  return ad::mean(ad::concat_cols(devs));
}

Var rle(Var x_hat, Var sigma, const Eigen::MatrixXd& x_gt) {
  Var gt = x_hat.tape->constant(x_gt);
  Var s = ad::max_with(sigma, 1e-4);
  Var fit = ad::div(ad::abs(ad::sub(x_hat, gt)), s);
  Var penalty = ad::log(s);
  return ad::add_scalar(ad::mean(ad::add(fit, penalty)), std::log(2.0));
}

}  // namespace graph

}  // namespace poselift
