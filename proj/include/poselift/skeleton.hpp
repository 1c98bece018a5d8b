// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "poselift/common.hpp"

namespace poselift {

// Poses are flat coordinate vectors over a fixed joint set:
// Pose2D = (u_0, v_0, u_1, v_1, ...), Pose3D = (X_0, Y_0, Z_0, X_1, ...).
using Pose2D = Eigen::VectorXd;
using Pose3D = Eigen::VectorXd;

struct Bone {
  int parent;
  int child;
};

/// A limb is a pair of adjacent bones (upper/lower arm, thigh/shin) whose
/// fold direction is constrained against the body plane normal.
struct Limb {
  int proximal_bone;
  int distal_bone;
};

struct Topology {
  int joint_count = 0;
  std::vector<std::string> joint_names;
  std::vector<Bone> bones;
  std::vector<Limb> limbs;
  int spine_index = -1;
  int left_hip_index = -1;
  int right_hip_index = -1;
  int root_index = -1;
  int head_index = -1;
  int reference_bone = -1;

  /// Throws InputError if indices are out of range, the bones do not form a
  /// tree rooted at root_index, or a limb's bones do not share a joint.
  void validate() const;

  std::string to_json() const;
  static Topology from_json(const std::string& text);
  void save(const std::filesystem::path& p) const;
  static Topology load(const std::filesystem::path& p);

  /// SHA-256 of the canonical serialized form; stored in checkpoints so a
  /// model cannot be silently evaluated against a different skeleton.
  std::string content_hash() const;
};

/// The 17-joint Human3.6M-style skeleton used by default.
const Topology& default_topology();

void check_pose2d(const Pose2D& x, const Topology& topo, const std::string& what);
void check_pose3d(const Pose3D& y, const Topology& topo, const std::string& what);

/// Per-bone vectors, element b = child position minus parent position.
std::vector<Eigen::Vector3d> bone_vectors(const Pose3D& y, const Topology& topo);

/// Per-bone Euclidean lengths in bone order.
Eigen::VectorXd bone_lengths(const Pose3D& y, const Topology& topo);

/// Translates the pose so the root joint sits exactly at the origin.
/// Works for both 2D and 3D poses (dispatch on vector length).
Eigen::VectorXd root_center(const Eigen::VectorXd& pose, const Topology& topo);

/// Root-to-head distance of a 2D pose; used to scale-normalize flow inputs.
double head_distance_2d(const Pose2D& x, const Topology& topo);

/// Root-centered 2D pose divided by its root-to-head distance. A floor on
/// the distance keeps degenerate poses finite.
Pose2D normalize_pose2d(const Pose2D& x, const Topology& topo);

}  // namespace poselift
