// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <array>
#include <functional>
#include <vector>

#include "poselift/camera.hpp"
#include "poselift/constraints.hpp"
#include "poselift/normflow.hpp"
#include "poselift/optim.hpp"
#include "poselift/skeleton.hpp"

namespace poselift {

/// Depth floor applied to the lifter's raw output; keeps early training
/// alive when the network emits nonpositive depths.
constexpr double kDepthFloor = 1e-3;

/// Residual MLP mapping [2D pose; camera record] to per-joint depths.
/// Input standardization constants are frozen at training start and stored
/// with the parameters.
struct LifterParams {
  int dim_l = 1024;
  double depth_prior = 0.0;

  Eigen::MatrixXd std_mu;  // 1 x 52
  Eigen::MatrixXd std_sd;  // 1 x 52

  Eigen::MatrixXd w_in;  // 52 x dim_l
  Eigen::MatrixXd b_in;  // 1 x dim_l
  struct Block {
    Eigen::MatrixXd w1, b1;  // dim_l x dim_l, 1 x dim_l
    Eigen::MatrixXd w2, b2;
  };
  std::array<Block, 3> blocks;
  Eigen::MatrixXd w_out;  // dim_l x J
  Eigen::MatrixXd b_out;  // 1 x J

  /// Random hidden layers, zero output weights, output bias = depth_prior:
  /// a fresh lifter places every joint at the prior depth.
  static LifterParams init(int dim_l, double depth_prior, int joints, Rng& rng);

  long parameter_count() const;
  std::vector<Eigen::MatrixXd*> tensors();
  std::vector<const Eigen::MatrixXd*> tensors() const;

  Checkpoint to_checkpoint(const Topology& topo) const;
  static LifterParams from_checkpoint(const Checkpoint& ck, const Topology& topo);
};

/// The 52-value MLP input [x; R row-major; t; f_w,f_h; c_w,c_h; s_w,s_h].
Eigen::VectorXd lifter_input(const Pose2D& x, const CameraIntrinsics& K,
                             const CameraExtrinsics& E, const Topology& topo);

/// Raw depths before the floor; exposed so training can count floor hits.
Eigen::VectorXd lifter_depths(const Pose2D& x, const CameraIntrinsics& K,
                              const CameraExtrinsics& E, const LifterParams& params,
                              const Topology& topo);

/// 2D -> 3D: predicted depths (floored) fed through exact unprojection, so
/// the output always reprojects onto the input.
Pose3D lift(const Pose2D& x, const CameraIntrinsics& K, const CameraExtrinsics& E,
            const LifterParams& params, const Topology& topo);

/// Baseline lifter used for acceptance comparisons: every joint at a fixed
/// depth.
Pose3D lift_constant_depth(const Pose2D& x, const CameraIntrinsics& K,
                           const CameraExtrinsics& E, double depth, const Topology& topo);

/// Everything produced by one lift/rotate/project/lift-back cycle.
struct CycleRecord {
  Pose2D x_in;
  Pose3D y_hat;       // lift(x_in)
  Pose3D y_hat_rot;   // y_hat rotated by theta about its root
  Pose2D x_hat_rot;   // projection of the rotated pose
  Pose3D y_tilde_rot; // lift(x_hat_rot)
  Pose3D y_tilde;     // back-rotated
  Pose2D x_tilde;     // reprojection closing the cycle
  double theta = 0.0;
};

/// Pluggable depth source; lets tests run the cycle with oracle depths.
using DepthFn = std::function<Eigen::VectorXd(const Pose2D& x)>;

CycleRecord cycle_with(const DepthFn& depths, const Pose2D& x, const CameraIntrinsics& K,
                       const CameraExtrinsics& E, double theta, const Topology& topo);

CycleRecord cycle(const Pose2D& x, const CameraIntrinsics& K, const CameraExtrinsics& E,
                  const LifterParams& params, double theta, const Topology& topo);

/// Rotation angle drawn from rng.
CycleRecord cycle(const Pose2D& x, const CameraIntrinsics& K, const CameraExtrinsics& E,
                  const LifterParams& params, Rng& rng, const Topology& topo);

/// Balancer term names and fixed weights for the lifting objective.
LossBalancer make_lift_balancer(LossBalancer::Config config = {});

struct LiftLossTerms {
  double l2d = 0.0;
  double l3d = 0.0;
  double nf = 0.0;
  double bone = 0.0;
  double limbs = 0.0;
  double def = 0.0;

  std::vector<std::pair<std::string, double>> named() const;
};

/// Raw (unweighted) loss terms of a batch of cycle records. Deformation
/// pairs consecutive records (0,1), (2,3), ...; a lone trailing record
/// contributes no pair.
LiftLossTerms lift_loss_terms(const std::vector<CycleRecord>& batch, const FlowModel& flow,
                              const BoneRatioStats& stats, const Topology& topo);

/// Balancer-weighted total of the six terms; does not advance balancer
/// statistics (training owns that).
double lift_loss(const std::vector<CycleRecord>& batch, const FlowModel& flow,
                 const BoneRatioStats& stats, const LossBalancer& balancer,
                 const Topology& topo);

struct LiftSample {
  Pose2D x;
  CameraIntrinsics K;
  CameraExtrinsics E;
};

struct LiftTrainConfig {
  int epochs = 100;
  int batch = 256;
  double lr = 2e-4;
  double weight_decay = 1e-5;
  int dim_l = 1024;
  std::uint64_t seed = 1;
  long balancer_warmup = 100;
  bool use_nf_term = true;  // off for the prior-ablation run
};

struct LiftTrainResult {
  LifterParams params;
  BoneRatioStats stats;
  LossBalancer balancer = make_lift_balancer();
  std::vector<double> trace;  // per-epoch mean balanced loss
  long depth_floor_hits = 0;
  bool diverged = false;
};

/// Cycle-consistency training. The flow stays frozen; the balancer warms up
/// on the fly. Deterministic under config.seed.
LiftTrainResult train_liftnet(const std::vector<LiftSample>& data, const FlowModel& flow,
                              const LiftTrainConfig& config, const Topology& topo);

/// flow_hash records which flow checkpoint the lifter was trained against.
Checkpoint lifter_checkpoint(const LiftTrainResult& result, const Topology& topo,
                             const std::string& flow_hash);
void lifter_from_checkpoint(const Checkpoint& ck, const Topology& topo, LifterParams& params,
                            BoneRatioStats& stats);

}  // namespace poselift
