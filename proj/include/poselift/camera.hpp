// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <vector>

#include "poselift/autodiff.hpp"
#include "poselift/skeleton.hpp"

namespace poselift {

/// Pinhole intrinsics with zero skew. The scaling factors s_w/s_h carry the
/// crop-and-rescale geometry and are kept alongside f and c because the
/// lifter consumes all six values.
struct CameraIntrinsics {
  double f_w = 1.0;
  double f_h = 1.0;
  double c_w = 0.0;
  double c_h = 0.0;
  double s_w = 1.0;
  double s_h = 1.0;

  Eigen::Matrix3d K() const;
  void validate() const;
};

struct CameraExtrinsics {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  /// Enforces orthogonality and det(R) = +1 within 1e-9.
  void validate() const;
};

/// Crop-and-rescale description of how a network input window was cut from
/// the full image. Sizes in pixels; mu_h is the dataset mean root-to-head
/// 2D length used for scale normalization.
struct CropGeometry {
  double w_full = 0.0;
  double h_full = 0.0;
  double left = 0.0;
  double top = 0.0;
  double w_bb = 0.0;
  double h_bb = 0.0;
  double w = 224.0;
  double h = 224.0;
  double mu_h = 1.0;

  void validate() const;

  /// 9-number wire form {w_full,h_full,left,top,w_bb,h_bb,w,h,mu_h}.
  Eigen::Matrix<double, 9, 1> to_vector() const;
  static CropGeometry from_vector(const Eigen::Matrix<double, 9, 1>& v);
};

/// 18-number camera record {f_w,f_h,c_w,c_h,s_w,s_h,R row-major,t}; the one
/// wire format shared by dataset files and checkpoints.
Eigen::Matrix<double, 18, 1> camera_to_vector(const CameraIntrinsics& K, const CameraExtrinsics& E);
void camera_from_vector(const Eigen::Matrix<double, 18, 1>& v, CameraIntrinsics& K,
                        CameraExtrinsics& E);

/// Full perspective projection: per joint, [u,v,w]^T = K [R|t] [X,Y,Z,1]^T
/// followed by division by w.
Pose2D project(const Pose3D& y, const CameraIntrinsics& K, const CameraExtrinsics& E,
               const Topology& topo);

/// Camera-frame depth (the homogeneous w) of every joint.
Eigen::VectorXd joint_depths(const Pose3D& y, const CameraExtrinsics& E, const Topology& topo);

/// Exact algebraic inverse of project given per-joint depths.
Pose3D unproject(const Pose2D& x, const Eigen::VectorXd& depths, const CameraIntrinsics& K,
                 const CameraExtrinsics& E, const Topology& topo);

/// Closed-form intrinsics from crop geometry:
///   s_w = W/(W_BB*mu_h), f = sqrt(W_full^2 + H_full^2), f_w = f*s_w,
///   c_w = (W_full/2 - LEFT - W/2)*s_w, and the h-analogues.
CameraIntrinsics intrinsics_from_crop(const CropGeometry& g);

/// Extrinsics from a camera capsule vector: the per-joint triples are
/// averaged to (theta_X, theta_Y, w_p), R = R_X(theta_X) * R_Y(theta_Y)
/// with the Z rotation discarded, and t places the world origin on the
/// camera ray through the image origin at depth w_p.
CameraExtrinsics extrinsics_from_capsule(const Eigen::VectorXd& gamma, const CameraIntrinsics& K);

/// Same construction from the already-averaged angles.
CameraExtrinsics extrinsics_from_angles(double theta_x, double theta_y, double w_p,
                                        const CameraIntrinsics& K);

/// Rotation about the vertical (Y) axis through the root joint; the root
/// stays fixed and all offsets rotate rigidly.
Pose3D rotate_azimuth(const Pose3D& y, double theta, const Topology& topo);
Pose3D inverse_rotate_azimuth(const Pose3D& y, double theta, const Topology& topo);

/// Uniform viewpoint-change angle in [10, 350] degrees, returned in radians.
double sample_rotation_angle(Rng& rng);

// Batched camera geometry on the autodiff tape. Poses are carried as
// per-coordinate planes (batch x J matrices) so per-sample camera values
// broadcast as column vectors; interleave() converts back to the flat
// (u0,v0,u1,...) pose layout the losses expect.
namespace graph {

struct PosePlanes {
  ad::Var x, y, z;
};

struct PosePlanes2D {
  ad::Var u, v;
};

/// Per-sample camera values as batch x 1 columns. The entries may be tape
/// constants (frozen cameras) or computed nodes (predicted cameras); the
/// projection math is identical either way.
struct CameraColumns {
  ad::Var r[3][3];
  ad::Var tx, ty, tz;
  ad::Var f_w, f_h, c_w, c_h;
  ad::Var inv_f_w, inv_f_h;

  static CameraColumns attach(ad::Tape& tape, const std::vector<CameraIntrinsics>& Ks,
                              const std::vector<CameraExtrinsics>& Es);
};

PosePlanes2D project(const PosePlanes& y, const CameraColumns& cam);
PosePlanes unproject(const PosePlanes2D& x, ad::Var depths, const CameraColumns& cam);

/// Rotation about the vertical axis through the root joint; cos/sin of the
/// per-sample angles given as batch x 1 nodes.
PosePlanes rotate_azimuth(const PosePlanes& y, ad::Var cos_col, ad::Var sin_col,
                          int root_index);

/// [P0 | P1 | ... ] coordinate planes -> interleaved flat pose matrix.
ad::Var interleave(const std::vector<ad::Var>& planes, int joints);

/// Split a flat interleaved matrix (batch x kJ) into k coordinate planes.
std::vector<Eigen::MatrixXd> deinterleave(const Eigen::MatrixXd& flat, int k);

}  // namespace graph

}  // namespace poselift
