// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "poselift/skeleton.hpp"

namespace poselift {

/// All metrics root-center both poses first (standard protocol) and treat
/// coordinates as millimeters.

/// Mean per-joint Euclidean distance.
double mpjpe(const Pose3D& pred, const Pose3D& gt, const Topology& topo);

/// MPJPE after the error-optimal similarity alignment (proper rotation,
/// uniform scale, translation) of pred onto gt. The alignment minimizes the
/// reported mean distance itself (least-squares Procrustes seeds a local
/// refinement); reflections are never admitted. Identity and scale-only
/// alignments are candidate transforms, so on every sample
///   pa_mpjpe <= n_mpjpe <= mpjpe.
double pa_mpjpe(const Pose3D& pred, const Pose3D& gt, const Topology& topo);

/// MPJPE after the error-optimal uniform scaling of pred. The scale
/// objective is convex, so the global optimum is found exactly; the
/// identity scale is a candidate, which pins n_mpjpe <= mpjpe.
double n_mpjpe(const Pose3D& pred, const Pose3D& gt, const Topology& topo);

/// Fraction of joints within threshold_mm after the n_mpjpe scale
/// normalization; the threshold is inclusive.
double n_pck(const Pose3D& pred, const Pose3D& gt, double threshold_mm, const Topology& topo);

/// Trapezoidal mean of n_pck over thresholds 0, 5, ..., 150 mm.
double auc(const Pose3D& pred, const Pose3D& gt, const Topology& topo);

struct MetricRow {
  long id = 0;
  double mpjpe = 0.0;
  double pa_mpjpe = 0.0;
  double n_mpjpe = 0.0;
  double n_pck_150 = 0.0;
  double auc = 0.0;
};

struct EvalReport {
  std::vector<MetricRow> rows;
  MetricRow aggregate;  // mean over rows, id = row count

  static EvalReport evaluate(const std::vector<std::pair<Pose3D, Pose3D>>& pairs,
                             const Topology& topo);
  static EvalReport evaluate_with_ids(const std::vector<long>& ids,
                                      const std::vector<std::pair<Pose3D, Pose3D>>& pairs,
                                      const Topology& topo);

  /// Flat comma-separated table: header, one row per sample, aggregate row.
  std::string to_csv() const;
  /// Short human-readable aggregate block.
  std::string summary() const;
};

}  // namespace poselift
