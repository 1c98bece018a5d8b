// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <map>
#include <memory>
#include <vector>

#include "poselift/camera.hpp"
#include "poselift/constraints.hpp"
#include "poselift/data.hpp"
#include "poselift/normflow.hpp"
#include "poselift/optim.hpp"
#include "poselift/skeleton.hpp"

namespace poselift {

/// Linear capsule decoder: one map from [features; intrinsics] to the 9J
/// capsule vector (J attention logits, 3J pose, 3J camera, 2J presence).
/// Input standardization constants are frozen at training start.
struct DecoderParams {
  int joints = 0;
  int dim = 0;  // feature width + 6 intrinsics values
  double depth_prior = 0.0;

  Eigen::MatrixXd std_mu;  // 1 x dim
  Eigen::MatrixXd std_sd;  // 1 x dim
  Eigen::MatrixXd w;       // dim x 9J
  Eigen::MatrixXd b;       // 1 x 9J

  /// Small random weights; biases zero except the camera capsules' depth
  /// components, which start at depth_prior so the subject begins in front
  /// of the camera.
  static DecoderParams init(int dim, int joints, double depth_prior, Rng& rng);

  long parameter_count() const;
  std::vector<Eigen::MatrixXd*> tensors();

  Checkpoint to_checkpoint(const Topology& topo) const;
  static DecoderParams from_checkpoint(const Checkpoint& ck, const Topology& topo);
};

struct CapsuleSplit {
  Eigen::VectorXd attention;  // J, softmax weights summing to 1
  Eigen::VectorXd y;          // 3J, attention-scaled pose capsule
  Eigen::VectorXd gamma;      // 3J, attention-scaled camera capsule
  Eigen::VectorXd sigma_raw;  // 2J, attention-scaled presence logits
};

/// Append the six intrinsics values to a raw feature vector in the wire
/// order (f_w, f_h, c_w, c_h, s_w, s_h).
Eigen::VectorXd decoder_input(const Eigen::VectorXd& features_raw, const CameraIntrinsics& K);

/// Linear map + softmax attention; every joint's capsule slice is scaled by
/// J * attention_j, so uniform attention is the identity.
CapsuleSplit decode(const Eigen::VectorXd& features, const DecoderParams& params);

struct RegForward {
  Pose3D y_hat;  // root-centered
  CameraIntrinsics K;
  CameraExtrinsics E;
  Pose2D x_hat;
  Pose2D x_hat_rot;
  Eigen::VectorXd sigma_hat;  // 2J, in (0,1)
  CapsuleSplit split;
  double theta = 0.0;
};

RegForward regnet_forward(const Eigen::VectorXd& features_raw, const CropGeometry& crop,
                          const DecoderParams& params, double theta, const Topology& topo);
RegForward regnet_forward(const Eigen::VectorXd& features_raw, const CropGeometry& crop,
                          const DecoderParams& params, Rng& rng, const Topology& topo);

LossBalancer make_reg_balancer(LossBalancer::Config config = {});

struct RegLossTerms {
  double bone = 0.0;
  double limbs = 0.0;
  double nf = 0.0;
  double rle = 0.0;

  std::vector<std::pair<std::string, double>> named() const;
};

RegLossTerms reg_loss_terms(const std::vector<RegForward>& batch,
                            const std::vector<Pose2D>& x_gt, const FlowModel& flow,
                            const BoneRatioStats& stats, const Topology& topo);

/// Balancer-weighted total for one forward pass; statistics untouched.
double reg_loss(const RegForward& fwd, const Pose2D& x_gt, const FlowModel& flow,
                const BoneRatioStats& stats, const LossBalancer& balancer,
                const Topology& topo);

/// Source of encoder features for a sample; stands in for the image
/// encoder. Implementations must be deterministic per (record, seed).
class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  virtual int width() const = 0;
  virtual Eigen::VectorXd features(const SampleRecord& rec) const = 0;
};

/// Random linear embedding of the camera-frame ground-truth pose and its
/// root depth, plus Gaussian feature noise. Camera-frame (not world) input
/// mirrors what an image encoder can actually observe.
class SyntheticFeatureProvider : public FeatureProvider {
 public:
  SyntheticFeatureProvider(int width, double noise, std::uint64_t seed, const Topology& topo);

  int width() const override { return width_; }
  Eigen::VectorXd features(const SampleRecord& rec) const override;

 private:
  int width_;
  double noise_;
  std::uint64_t seed_;
  Topology topo_;
  Eigen::MatrixXd embed_;  // width x (3J + 1)
};

/// Serves precomputed features via the record's "file.bin:index" reference,
/// resolved relative to a base directory.
class FileFeatureProvider : public FeatureProvider {
 public:
  explicit FileFeatureProvider(const std::filesystem::path& base_dir);

  int width() const override;
  Eigen::VectorXd features(const SampleRecord& rec) const override;

 private:
  std::filesystem::path base_dir_;
  mutable std::map<std::string, FeatureFile> cache_;
  mutable int width_ = 0;

  const FeatureFile& file_for(const std::string& name) const;
};

struct RegSample {
  Eigen::VectorXd features;  // raw provider output, without intrinsics
  CropGeometry crop;
  Pose2D x_gt;
};

struct RegTrainConfig {
  int epochs = 45;
  int batch = 256;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::uint64_t seed = 1;
  long balancer_warmup = 100;
  double depth_prior_mm = 10000.0;
};

struct RegTrainResult {
  DecoderParams params;
  BoneRatioStats stats;
  LossBalancer balancer = make_reg_balancer();
  std::vector<double> trace;
  bool diverged = false;
};

RegTrainResult train_regnet(const std::vector<RegSample>& data, const FlowModel& flow,
                            const RegTrainConfig& config, const Topology& topo);

Checkpoint regnet_checkpoint(const RegTrainResult& result, const Topology& topo,
                             const std::string& flow_hash);
void regnet_from_checkpoint(const Checkpoint& ck, const Topology& topo, DecoderParams& params,
                            BoneRatioStats& stats);

}  // namespace poselift
