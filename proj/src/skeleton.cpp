// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include "poselift/skeleton.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace poselift {

using json = nlohmann::json;

void Topology::validate() const {
  const int J = joint_count;
  require(J > 0, "topology: joint_count must be positive");
  require(static_cast<int>(joint_names.size()) == J, "topology: joint_names size mismatch");
  auto check_joint = [J](int idx, const char* what) {
    require(idx >= 0 && idx < J, std::string("topology: ") + what + " out of range");
  };
  check_joint(root_index, "root_index");
  check_joint(head_index, "head_index");
  check_joint(spine_index, "spine_index");
  check_joint(left_hip_index, "left_hip_index");
  check_joint(right_hip_index, "right_hip_index");

  require(static_cast<int>(bones.size()) == J - 1, "topology: tree over J joints needs J-1 bones");
  std::vector<int> parent(J, -2);
  parent[root_index] = -1;
  for (const Bone& b : bones) {
    check_joint(b.parent, "bone parent");
    check_joint(b.child, "bone child");
    require(b.child != root_index, "topology: root cannot be a bone child");
    require(parent[b.child] == -2, "topology: joint has two parents");
    parent[b.child] = b.parent;
  }
  // Every non-root joint must reach the root without cycles.
  for (int j = 0; j < J; ++j) {
    int cur = j;
    int steps = 0;
    while (cur != root_index) {
      require(parent[cur] >= 0, "topology: joint disconnected from root");
      cur = parent[cur];
      require(++steps <= J, "topology: bone cycle detected");
    }
  }
  const int B = static_cast<int>(bones.size());
  require(reference_bone >= 0 && reference_bone < B, "topology: reference_bone out of range");
  for (const Limb& l : limbs) {
    require(l.proximal_bone >= 0 && l.proximal_bone < B, "topology: limb proximal bone out of range");
    require(l.distal_bone >= 0 && l.distal_bone < B, "topology: limb distal bone out of range");
    const Bone& p = bones[l.proximal_bone];
    const Bone& d = bones[l.distal_bone];
    const bool shared = p.parent == d.parent || p.parent == d.child || p.child == d.parent ||
                        p.child == d.child;
    require(shared, "topology: limb bones must share a joint");
  }
}

std::string Topology::to_json() const {
  json j;
  j["format"] = "poselift-topology";
  j["version"] = 1;
  j["joint_names"] = joint_names;
  json bone_list = json::array();
  for (const Bone& b : bones) bone_list.push_back({b.parent, b.child});
  j["bones"] = bone_list;
  json limb_list = json::array();
  for (const Limb& l : limbs) limb_list.push_back({l.proximal_bone, l.distal_bone});
  j["limbs"] = limb_list;
  j["spine"] = spine_index;
  j["left_hip"] = left_hip_index;
  j["right_hip"] = right_hip_index;
  j["root"] = root_index;
  j["head"] = head_index;
  j["reference_bone"] = reference_bone;
  return j.dump(2) + "\n";
}

Topology Topology::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("topology: ") + e.what());
  }
  try {
    require(j.at("format") == "poselift-topology", "topology: unknown format field");
    require(j.at("version") == 1, "topology: unsupported version");
    Topology t;
    t.joint_names = j.at("joint_names").get<std::vector<std::string>>();
    t.joint_count = static_cast<int>(t.joint_names.size());
    for (const auto& b : j.at("bones")) t.bones.push_back({b.at(0).get<int>(), b.at(1).get<int>()});
    for (const auto& l : j.at("limbs")) t.limbs.push_back({l.at(0).get<int>(), l.at(1).get<int>()});
    t.spine_index = j.at("spine").get<int>();
    t.left_hip_index = j.at("left_hip").get<int>();
    t.right_hip_index = j.at("right_hip").get<int>();
    t.root_index = j.at("root").get<int>();
    t.head_index = j.at("head").get<int>();
    t.reference_bone = j.at("reference_bone").get<int>();
    t.validate();
    return t;
  } catch (const json::exception& e) {
    throw InputError(std::string("topology: ") + e.what());
  }
}

void Topology::save(const std::filesystem::path& p) const {
  std::ofstream out(p);
  if (!out) throw InputError("cannot write topology: " + p.string());
  out << to_json();
}

Topology Topology::load(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw InputError("cannot read topology: " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string Topology::content_hash() const { return sha256_string(to_json()); }

const Topology& default_topology() {
  static const Topology topo = [] {
    Topology t;
    t.joint_names = {"pelvis",     "r_hip",      "r_knee",   "r_ankle", "l_hip",   "l_knee",
                     "l_ankle",    "spine",      "thorax",   "neck",    "head",    "l_shoulder",
                     "l_elbow",    "l_wrist",    "r_shoulder", "r_elbow", "r_wrist"};
    t.joint_count = 17;
    t.bones = {{0, 1}, {1, 2}, {2, 3},  {0, 4},  {4, 5},  {5, 6},  {0, 7},  {7, 8},
               {8, 9}, {9, 10}, {8, 11}, {11, 12}, {12, 13}, {8, 14}, {14, 15}, {15, 16}};
    // proximal/distal pairs: upper arm/forearm and thigh/shin per side
    t.limbs = {{11, 12}, {14, 15}, {4, 5}, {1, 2}};
    t.spine_index = 7;
    t.left_hip_index = 4;
    t.right_hip_index = 1;
    t.root_index = 0;
    t.head_index = 10;
    t.reference_bone = 6;  // pelvis -> spine
    t.validate();
    return t;
  }();
  return topo;
}

void check_pose2d(const Pose2D& x, const Topology& topo, const std::string& what) {
  if (x.size() != 2 * topo.joint_count)
    throw InputError(what + ": expected " + std::to_string(2 * topo.joint_count) +
                     " coordinates, got " + std::to_string(x.size()));
  require_finite(x, what);
}

void check_pose3d(const Pose3D& y, const Topology& topo, const std::string& what) {
  if (y.size() != 3 * topo.joint_count)
    throw InputError(what + ": expected " + std::to_string(3 * topo.joint_count) +
                     " coordinates, got " + std::to_string(y.size()));
  require_finite(y, what);
}

std::vector<Eigen::Vector3d> bone_vectors(const Pose3D& y, const Topology& topo) {
  check_pose3d(y, topo, "bone_vectors");
  std::vector<Eigen::Vector3d> out;
  out.reserve(topo.bones.size());
  for (const Bone& b : topo.bones)
    out.push_back(y.segment<3>(3 * b.child) - y.segment<3>(3 * b.parent));
  return out;
}

Eigen::VectorXd bone_lengths(const Pose3D& y, const Topology& topo) {
  const auto vecs = bone_vectors(y, topo);
  Eigen::VectorXd lengths(vecs.size());
  for (std::size_t b = 0; b < vecs.size(); ++b) lengths[b] = vecs[b].norm();
  return lengths;
}

Eigen::VectorXd root_center(const Eigen::VectorXd& pose, const Topology& topo) {
  const int J = topo.joint_count;
  int dim = 0;
  if (pose.size() == 2 * J) dim = 2;
  else if (pose.size() == 3 * J) dim = 3;
  else
    throw InputError("root_center: pose length " + std::to_string(pose.size()) +
                     " matches neither 2J nor 3J");
  require_finite(pose, "root_center");
  Eigen::VectorXd out = pose;
  const Eigen::VectorXd root = pose.segment(dim * topo.root_index, dim);
  for (int j = 0; j < J; ++j) out.segment(dim * j, dim) -= root;
  return out;
}

double head_distance_2d(const Pose2D& x, const Topology& topo) {
  check_pose2d(x, topo, "head_distance_2d");
  return (x.segment<2>(2 * topo.head_index) - x.segment<2>(2 * topo.root_index)).norm();
}

Pose2D normalize_pose2d(const Pose2D& x, const Topology& topo) {
  Pose2D centered = root_center(x, topo);
  const double scale = std::max(head_distance_2d(x, topo), 1e-8);
  return centered / scale;
}

}  // namespace poselift
