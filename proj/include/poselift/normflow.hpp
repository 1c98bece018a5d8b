// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <vector>

#include "poselift/autodiff.hpp"
#include "poselift/checkpoint.hpp"
#include "poselift/skeleton.hpp"

namespace poselift {

/// One coupling layer: a small MLP reads the passive half and produces a
/// bounded log-scale and shift for the active half. Zero-initialized output
/// layer makes the fresh layer an identity map.
struct FlowCoupling {
  // Biases kept as 1xN matrices so every parameter shares one tensor type
  // for optimizer and checkpoint plumbing.
  Eigen::MatrixXd w1;
  Eigen::MatrixXd b1;
  Eigen::MatrixXd w2;
  Eigen::MatrixXd b2;
};

/// One flow block applied in the normalizing (data -> latent) direction:
/// actnorm, then an invertible linear mixing layer stored as unit-lower L
/// and upper U factors with positive diagonal, then the coupling. The
/// generative direction runs the exact inverses in reverse order.
struct FlowBlock {
  Eigen::MatrixXd act_scale;   // 1 x dim
  Eigen::MatrixXd act_bias;    // 1 x dim
  Eigen::MatrixXd lower_raw;   // strict lower part enters L = I + tril(lower_raw)
  Eigen::MatrixXd upper_raw;   // strict upper part enters U
  Eigen::MatrixXd log_diag;    // 1 x dim, diag(U) = exp(log_diag)
  FlowCoupling coupling;
};

/// Log-scale bound for coupling layers: s = kCouplingClamp * tanh(raw / kCouplingClamp).
constexpr double kCouplingClamp = 2.0;

struct FlowModel {
  int dim = 0;
  int hidden = 128;
  std::vector<FlowBlock> blocks;
  bool actnorm_ready = false;
  // Descriptor of the expected input normalization; informational, recorded
  // in checkpoints so models are not evaluated on mismatched inputs.
  std::string normalization = "root_center/head_scale";

  /// Identity-initialized model; couplings get random hidden weights and a
  /// zero output layer.
  static FlowModel init(int dim, int depth, int hidden, Rng& rng);

  /// Whether block i transforms the first half (odd blocks) or second half
  /// (even blocks); alternates so every dimension gets updated.
  static bool coupling_swapped(int block_index) { return block_index % 2 == 1; }

  Eigen::MatrixXd linear_matrix(int block) const;
  /// Configures block's linear layer so that the generative direction
  /// multiplies by w. Requires an LU-decomposable w with positive pivots.
  void set_linear_from_generative(int block, const Eigen::MatrixXd& w);

  Checkpoint to_checkpoint() const;
  static FlowModel from_checkpoint(const Checkpoint& ck);

  void validate() const;
};

// Per-sublayer maps in the normalizing direction, shared by the full model
// evaluation and the Jacobian tests.
Eigen::VectorXd apply_actnorm(const FlowBlock& b, const Eigen::VectorXd& h);
double actnorm_log_det(const FlowBlock& b);
Eigen::VectorXd apply_invlinear(const FlowBlock& b, const Eigen::VectorXd& h);
double invlinear_log_det(const FlowBlock& b);
Eigen::VectorXd apply_coupling(const FlowBlock& b, const Eigen::VectorXd& h, bool swapped);
double coupling_log_det(const FlowBlock& b, const Eigen::VectorXd& h, bool swapped);

/// Normalizing pass x -> z with the exact log-determinant of the map.
std::pair<Eigen::VectorXd, double> flow_inverse(const Eigen::VectorXd& x, const FlowModel& m);

/// Generative pass z -> x (exact inverse of flow_inverse).
Eigen::VectorXd flow_forward(const Eigen::VectorXd& z, const FlowModel& m);

/// log p(x) by change of variables against a standard normal base.
double log_prob(const Eigen::VectorXd& x, const FlowModel& m);

/// Negative log-likelihood -log p(x).
double nf_loss(const Eigen::VectorXd& x, const FlowModel& m);

/// nf_loss of a raw 2D pose after root-centering and head-distance scaling.
double nf_loss_pose(const Pose2D& x, const FlowModel& m, const Topology& topo);

struct FlowTrainConfig {
  int depth = 8;
  int hidden = 128;
  int epochs = 30;
  int batch = 256;
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::uint64_t seed = 1;
  int min_poses = 1000;
  // Training-time dequantization noise (normalized pose units). Centered
  // poses have structurally constant coordinates (the root); without jitter
  // the likelihood of that degenerate direction is unbounded and training
  // blows up.
  double jitter = 1e-3;
};

struct FlowTrainResult {
  FlowModel model;
  std::vector<double> trace;  // per-epoch mean NLL
  bool diverged = false;
};

/// AdamW maximum-likelihood training. Inputs must already be normalized.
/// On divergence returns the last end-of-epoch parameters with the flag set.
FlowTrainResult train_flow(const std::vector<Eigen::VectorXd>& poses,
                           const FlowTrainConfig& config);

/// Trainable tensors in FlowGraph::attach registration order.
std::vector<Eigen::MatrixXd*> flow_param_ptrs(FlowModel& m);

/// Flow parameters registered on a tape, as trainable inputs or constants.
struct FlowGraph {
  struct BlockVars {
    ad::Var act_scale, act_bias;
    ad::Var lower_raw, upper_raw, log_diag;
    ad::Var w1, b1, w2, b2;
  };
  std::vector<BlockVars> blocks;
  std::vector<std::pair<std::string, ad::Var>> params;  // only when trainable

  static FlowGraph attach(ad::Tape& tape, const FlowModel& m, bool trainable);

  /// Mean NLL over rows of x (batch x dim), differentiable w.r.t. both the
  /// attached parameters and x.
  ad::Var mean_nll(ad::Tape& tape, ad::Var x, const FlowModel& shape) const;
};

namespace graph {

/// Root-center and head-scale a batch of raw 2D poses on the tape.
ad::Var normalize_pose2d(ad::Var x, const Topology& topo);

/// Mean nf_loss of raw 2D poses (normalization included).
ad::Var nf(ad::Tape& tape, ad::Var x_raw, const FlowGraph& fg, const FlowModel& shape,
           const Topology& topo);

}  // namespace graph

}  // namespace poselift
