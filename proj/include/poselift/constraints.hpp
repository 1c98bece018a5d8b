// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <vector>

#include "poselift/autodiff.hpp"
#include "poselift/skeleton.hpp"

namespace poselift {

/// Running per-bone length ratios (bone length / reference bone length).
/// Initialized from the first observed batch, then updated by exponential
/// moving average; the training loop is the single writer.
class BoneRatioStats {
 public:
  explicit BoneRatioStats(double decay = 0.99) : decay_(decay) {}

  bool initialized() const { return count_ > 0; }
  long count() const { return count_; }
  double decay() const { return decay_; }
  const Eigen::VectorXd& ratios() const;

  void update(const std::vector<Pose3D>& batch, const Topology& topo);
  /// Batch as rows of a (batch x 3J) matrix.
  void update_rows(const Eigen::MatrixXd& batch, const Topology& topo);

  Eigen::MatrixXd state_tensor() const;
  static BoneRatioStats from_state_tensor(const Eigen::MatrixXd& state);

 private:
  double decay_;
  long count_ = 0;
  Eigen::VectorXd ratios_;

  Eigen::VectorXd batch_mean_ratios(const Eigen::MatrixXd& batch, const Topology& topo) const;
};

/// Mean squared deviation of per-bone length ratios from the running means,
/// averaged over poses and bones.
double bone_loss(const std::vector<Pose3D>& batch, const Topology& topo,
                 const BoneRatioStats& stats);

/// Limb fold penalty: with N = A x B the body plane normal (A, B from spine
/// to left/right hip), penalizes (1/L) sum_l max(0, N.p_l - N.d_l) so distal
/// bones may not fold against the plane direction. N is intentionally not
/// normalized, so the raw value scales with body width.
double limbs_loss(const Pose3D& y, const Topology& topo);

/// || (ya - yb) - (ta - tb) ||_2: two poses from one batch must deform
/// consistently through the cycle.
double deformation_loss(const Pose3D& ya, const Pose3D& yb, const Pose3D& ta, const Pose3D& tb);

double l2d_loss(const Pose2D& xa, const Pose2D& xb);
double l3d_loss(const Pose3D& ya, const Pose3D& yb);

/// Laplace negative log-likelihood with learned per-coordinate scale:
/// mean_i |xhat_i - xgt_i| / sigma_i + log sigma_i + log 2, with sigma
/// floored at 1e-4.
double rle_loss(const Pose2D& x_hat, const Eigen::VectorXd& sigma, const Pose2D& x_gt);

// Tape-graph versions over (batch x coords) row matrices. These mirror the
// plain definitions exactly; unit tests pin plain == graph.
namespace graph {

ad::Var joint_cols(ad::Var poses, int joint, int dim);

ad::Var l2d(ad::Var xa, ad::Var xb);
ad::Var l3d(ad::Var ya, ad::Var yb);
/// Deformation over consecutive disjoint row pairs (0,1), (2,3), ...;
/// a batch without a complete pair contributes 0.
ad::Var deformation(ad::Var y_forward, ad::Var y_backward);
ad::Var limbs(ad::Var y, const Topology& topo);
ad::Var bone(ad::Var y, const Topology& topo, const BoneRatioStats& stats);
ad::Var rle(ad::Var x_hat, ad::Var sigma, const Eigen::MatrixXd& x_gt);

}  // namespace graph

}  // namespace poselift
