// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "poselift/camera.hpp"
#include "poselift/skeleton.hpp"

namespace poselift {

/// Synthetic skeleton/camera generator settings. Articulation ranges keep
/// knee and elbow folds on the valid side of the body plane, so generated
/// poses always satisfy limbs_loss = 0.
struct SyntheticConfig {
  long count = 1000;
  std::uint64_t seed = 1;

  // Articulation ranges, degrees.
  double knee_fold_max_deg = 60.0;
  double elbow_fold_max_deg = 60.0;
  double hip_swing_deg = 20.0;
  double hip_spread_deg = 8.0;
  double shoulder_swing_deg = 25.0;
  double shoulder_spread_deg = 12.0;
  double torso_lean_deg = 8.0;
  double yaw_deg = 180.0;

  // Subject size jitter, multiplicative half-widths.
  double scale_jitter = 0.12;
  double bone_jitter = 0.04;

  // Camera placement.
  double dist_min_mm = 9000.0;
  double dist_max_mm = 14000.0;
  double elev_min_deg = -15.0;
  double elev_max_deg = 25.0;
  double azim_deg = 180.0;

  // Imaging geometry (pixels).
  double full_min_px = 600.0;
  double full_max_px = 900.0;
  double net_w = 224.0;
  double net_h = 224.0;
  double crop_pad_px = 2.0;
  double crop_slack_max = 1.15;  // random bbox inflation upper bound
  double mu_h = 95.0;

  // 2D observation noise: stddev in full-image pixels, optionally scaled
  // per joint (size J; empty means all ones).
  double noise_px = 0.0;
  Eigen::VectorXd joint_noise_scale;

  void validate() const;
};

struct SampleRecord {
  long id = 0;
  Pose3D y_gt;
  Pose2D x_gt;
  CropGeometry crop;
  CameraIntrinsics K;
  CameraExtrinsics E;
  std::string features_ref;  // "file.bin:index" or empty
};

struct Dataset {
  int joint_count = 0;
  std::vector<SampleRecord> records;
};

/// Forward-kinematics synthesis over the default 17-joint topology.
/// Deterministic: record i is drawn from the substream (seed, i), so the
/// dataset does not depend on generation order.
Dataset generate(const SyntheticConfig& config);

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Field-mapping stub for adapting external 17-joint data: takes world
/// joint positions in millimeters (any origin; re-rooted at the pelvis),
/// an 18-value camera record and the crop geometry, and builds a
/// SampleRecord whose 2D pose is the projection of the given 3D pose.
/// Callers with measured 2D poses can overwrite x_gt afterwards.
SampleRecord record_from_external(long id, const Eigen::VectorXd& joints_mm,
                                  const Eigen::Matrix<double, 18, 1>& camera,
                                  const CropGeometry& crop, const Topology& topo);

/// Binary container of (sample id, feature vector) records with a declared
/// width; referenced from dataset records as "<file>:<index>".
struct FeatureFile {
  int width = 0;
  std::vector<std::pair<long, Eigen::VectorXd>> rows;

  static FeatureFile load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  const Eigen::VectorXd& at_index(std::size_t index) const;
  const Eigen::VectorXd& by_id(long id) const;
};

}  // namespace poselift
