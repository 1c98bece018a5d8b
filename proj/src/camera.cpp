// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include "poselift/camera.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace poselift {

Eigen::Matrix3d CameraIntrinsics::K() const {
  Eigen::Matrix3d k = Eigen::Matrix3d::Zero();
  k(0, 0) = f_w;
  k(1, 1) = f_h;
  k(0, 2) = c_w;
  k(1, 2) = c_h;
  k(2, 2) = 1.0;
  return k;
}

void CameraIntrinsics::validate() const {
  require(std::isfinite(f_w) && std::isfinite(f_h) && std::isfinite(c_w) && std::isfinite(c_h) &&
              std::isfinite(s_w) && std::isfinite(s_h),
          "intrinsics: non-finite value");
  require(f_w > 0.0 && f_h > 0.0, "intrinsics: focal lengths must be positive");
}

void CameraExtrinsics::validate() const {
  require(R.allFinite() && t.allFinite(), "extrinsics: non-finite value");
  const double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity()).norm();
  if (ortho >= 1e-9) throw InputError("extrinsics: R is not orthogonal");
  if (std::abs(R.determinant() - 1.0) >= 1e-9)
    throw InputError("extrinsics: det(R) != +1 (improper rotation)");
}

void CropGeometry::validate() const {
  const double vals[] = {w_full, h_full, left, top, w_bb, h_bb, w, h, mu_h};
  for (double v : vals) require(std::isfinite(v), "crop: non-finite value");
  require(w_full > 0 && h_full > 0, "crop: full image sizes must be positive");
  require(w_bb > 0 && h_bb > 0, "crop: crop sizes must be positive");
  require(w > 0 && h > 0, "crop: network input sizes must be positive");
  require(mu_h > 0, "crop: mu_h must be positive");
  require(left >= 0 && top >= 0 && left + w_bb <= w_full && top + h_bb <= h_full,
          "crop: crop box must lie inside the full image");
}

Eigen::Matrix<double, 9, 1> CropGeometry::to_vector() const {
  Eigen::Matrix<double, 9, 1> v;
  v << w_full, h_full, left, top, w_bb, h_bb, w, h, mu_h;
  return v;
}

CropGeometry CropGeometry::from_vector(const Eigen::Matrix<double, 9, 1>& v) {
  CropGeometry g;
  g.w_full = v(0);
  g.h_full = v(1);
  g.left = v(2);
  g.top = v(3);
  g.w_bb = v(4);
  g.h_bb = v(5);
  g.w = v(6);
  g.h = v(7);
  g.mu_h = v(8);
  return g;
}

Eigen::Matrix<double, 18, 1> camera_to_vector(const CameraIntrinsics& K,
                                              const CameraExtrinsics& E) {
  Eigen::Matrix<double, 18, 1> v;
  v << K.f_w, K.f_h, K.c_w, K.c_h, K.s_w, K.s_h, E.R(0, 0), E.R(0, 1), E.R(0, 2), E.R(1, 0),
      E.R(1, 1), E.R(1, 2), E.R(2, 0), E.R(2, 1), E.R(2, 2), E.t(0), E.t(1), E.t(2);
  return v;
}

void camera_from_vector(const Eigen::Matrix<double, 18, 1>& v, CameraIntrinsics& K,
                        CameraExtrinsics& E) {
  K.f_w = v(0);
  K.f_h = v(1);
  K.c_w = v(2);
  K.c_h = v(3);
  K.s_w = v(4);
  K.s_h = v(5);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) E.R(r, c) = v(6 + 3 * r + c);
  E.t = v.segment<3>(15);
}

Pose2D project(const Pose3D& y, const CameraIntrinsics& K, const CameraExtrinsics& E,
               const Topology& topo) {
  check_pose3d(y, topo, "project");
  K.validate();
  E.validate();
  const int J = topo.joint_count;
  Pose2D x(2 * J);
  for (int j = 0; j < J; ++j) {
    const Eigen::Vector3d pc = E.R * y.segment<3>(3 * j) + E.t;
    const double w = pc.z();
    if (std::abs(w) < 1e-12)
      throw NumericalError("project: joint " + std::to_string(j) + " at camera plane");
    x[2 * j] = (K.f_w * pc.x() + K.c_w * w) / w;
    x[2 * j + 1] = (K.f_h * pc.y() + K.c_h * w) / w;
  }
  return x;
}

Eigen::VectorXd joint_depths(const Pose3D& y, const CameraExtrinsics& E, const Topology& topo) {
  check_pose3d(y, topo, "joint_depths");
  const int J = topo.joint_count;
  Eigen::VectorXd w(J);
  for (int j = 0; j < J; ++j) w[j] = (E.R.row(2) * y.segment<3>(3 * j)).value() + E.t.z();
  return w;
}

Pose3D unproject(const Pose2D& x, const Eigen::VectorXd& depths, const CameraIntrinsics& K,
                 const CameraExtrinsics& E, const Topology& topo) {
  check_pose2d(x, topo, "unproject");
  K.validate();
  E.validate();
  const int J = topo.joint_count;
  if (depths.size() != J)
    throw InputError("unproject: expected " + std::to_string(J) + " depths, got " +
                     std::to_string(depths.size()));
  require_finite(depths, "unproject depths");
  Pose3D y(3 * J);
  for (int j = 0; j < J; ++j) {
    const double w = depths[j];
    if (w == 0.0) throw InputError("unproject: zero depth at joint " + std::to_string(j));
    Eigen::Vector3d pc;
    pc.x() = (x[2 * j] - K.c_w) * w / K.f_w;
    pc.y() = (x[2 * j + 1] - K.c_h) * w / K.f_h;
    pc.z() = w;
    y.segment<3>(3 * j) = E.R.transpose() * (pc - E.t);
  }
  return y;
}

CameraIntrinsics intrinsics_from_crop(const CropGeometry& g) {
  g.validate();
  CameraIntrinsics K;
  K.s_w = g.w / (g.w_bb * g.mu_h);
  K.s_h = g.h / (g.h_bb * g.mu_h);
  const double f = std::sqrt(g.w_full * g.w_full + g.h_full * g.h_full);
  K.f_w = f * K.s_w;
  K.f_h = f * K.s_h;
  K.c_w = (g.w_full / 2.0 - g.left - g.w / 2.0) * K.s_w;
  K.c_h = (g.h_full / 2.0 - g.top - g.h / 2.0) * K.s_h;
  return K;
}

CameraExtrinsics extrinsics_from_angles(double theta_x, double theta_y, double w_p,
                                        const CameraIntrinsics& K) {
  K.validate();
  if (w_p <= 0.0) throw NumericalError("extrinsics: subject behind camera (w_p <= 0)");
  const double cx = std::cos(theta_x), sx = std::sin(theta_x);
  const double cy = std::cos(theta_y), sy = std::sin(theta_y);
  Eigen::Matrix3d rx, ry;
  rx << 1, 0, 0, 0, cx, -sx, 0, sx, cx;
  ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
  CameraExtrinsics E;
  E.R = rx * ry;
  // Places the world origin on the back-projected ray of image point (0,0).
  E.t = Eigen::Vector3d(-K.c_w * w_p / K.f_w, -K.c_h * w_p / K.f_h, w_p);
  return E;
}

CameraExtrinsics extrinsics_from_capsule(const Eigen::VectorXd& gamma, const CameraIntrinsics& K) {
  if (gamma.size() % 3 != 0 || gamma.size() == 0)
    throw InputError("extrinsics_from_capsule: camera capsule length must be a positive multiple of 3");
  require_finite(gamma, "extrinsics_from_capsule");
  const int J = static_cast<int>(gamma.size()) / 3;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (int j = 0; j < J; ++j) mean += gamma.segment<3>(3 * j);
  mean /= static_cast<double>(J);
  return extrinsics_from_angles(mean.x(), mean.y(), mean.z(), K);
}

Pose3D rotate_azimuth(const Pose3D& y, double theta, const Topology& topo) {
  check_pose3d(y, topo, "rotate_azimuth");
  const int J = topo.joint_count;
  const Eigen::Vector3d root = y.segment<3>(3 * topo.root_index);
  const double c = std::cos(theta), s = std::sin(theta);
  Pose3D out(3 * J);
  for (int j = 0; j < J; ++j) {
    const Eigen::Vector3d d = y.segment<3>(3 * j) - root;
    out[3 * j] = root.x() + c * d.x() + s * d.z();
    out[3 * j + 1] = root.y() + d.y();
    out[3 * j + 2] = root.z() - s * d.x() + c * d.z();
  }
  return out;
}

Pose3D inverse_rotate_azimuth(const Pose3D& y, double theta, const Topology& topo) {
  return rotate_azimuth(y, -theta, topo);
}

double sample_rotation_angle(Rng& rng) { return rng.uniform(radians(10.0), radians(350.0)); }

namespace graph {

CameraColumns CameraColumns::attach(ad::Tape& tape, const std::vector<CameraIntrinsics>& Ks,
                                    const std::vector<CameraExtrinsics>& Es) {
  require(Ks.size() == Es.size() && !Ks.empty(), "camera graph: empty or mismatched batch");
  const Eigen::Index B = static_cast<Eigen::Index>(Ks.size());
  auto col = [&](auto get) {
    Eigen::MatrixXd c(B, 1);
    for (Eigen::Index i = 0; i < B; ++i) c(i, 0) = get(static_cast<std::size_t>(i));
    return tape.constant(c);
  };
  CameraColumns cam;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      cam.r[r][c] = col([&](std::size_t i) { return Es[i].R(r, c); });
  cam.tx = col([&](std::size_t i) { return Es[i].t(0); });
  cam.ty = col([&](std::size_t i) { return Es[i].t(1); });
  cam.tz = col([&](std::size_t i) { return Es[i].t(2); });
  cam.f_w = col([&](std::size_t i) { return Ks[i].f_w; });
  cam.f_h = col([&](std::size_t i) { return Ks[i].f_h; });
  cam.c_w = col([&](std::size_t i) { return Ks[i].c_w; });
  cam.c_h = col([&](std::size_t i) { return Ks[i].c_h; });
  cam.inv_f_w = col([&](std::size_t i) { return 1.0 / Ks[i].f_w; });
  cam.inv_f_h = col([&](std::size_t i) { return 1.0 / Ks[i].f_h; });
  return cam;
}

PosePlanes2D project(const PosePlanes& y, const CameraColumns& cam) {
  using namespace ad;
  Var pcx = add_colvec(add(add(mul_colvec(y.x, cam.r[0][0]), mul_colvec(y.y, cam.r[0][1])),
                           mul_colvec(y.z, cam.r[0][2])),
                       cam.tx);
  Var pcy = add_colvec(add(add(mul_colvec(y.x, cam.r[1][0]), mul_colvec(y.y, cam.r[1][1])),
                           mul_colvec(y.z, cam.r[1][2])),
                       cam.ty);
  Var pcz = add_colvec(add(add(mul_colvec(y.x, cam.r[2][0]), mul_colvec(y.y, cam.r[2][1])),
                           mul_colvec(y.z, cam.r[2][2])),
                       cam.tz);
  PosePlanes2D out;
  out.u = add_colvec(mul_colvec(div(pcx, pcz), cam.f_w), cam.c_w);
  out.v = add_colvec(mul_colvec(div(pcy, pcz), cam.f_h), cam.c_h);
  return out;
}

PosePlanes unproject(const PosePlanes2D& x, ad::Var depths, const CameraColumns& cam) {
  using namespace ad;
  Var pcx = mul(mul_colvec(add_colvec(x.u, neg(cam.c_w)), cam.inv_f_w), depths);
  Var pcy = mul(mul_colvec(add_colvec(x.v, neg(cam.c_h)), cam.inv_f_h), depths);
  Var qx = add_colvec(pcx, neg(cam.tx));
  Var qy = add_colvec(pcy, neg(cam.ty));
  Var qz = add_colvec(depths, neg(cam.tz));
  PosePlanes y;
  // R^T rows are R columns.
  y.x = add(add(mul_colvec(qx, cam.r[0][0]), mul_colvec(qy, cam.r[1][0])),
            mul_colvec(qz, cam.r[2][0]));
  y.y = add(add(mul_colvec(qx, cam.r[0][1]), mul_colvec(qy, cam.r[1][1])),
            mul_colvec(qz, cam.r[2][1]));
  y.z = add(add(mul_colvec(qx, cam.r[0][2]), mul_colvec(qy, cam.r[1][2])),
            mul_colvec(qz, cam.r[2][2]));
  return y;
}

PosePlanes rotate_azimuth(const PosePlanes& y, ad::Var cos_col, ad::Var sin_col,
                          int root_index) {
  using namespace ad;
  Var rx = cols(y.x, root_index, 1);
  Var rz = cols(y.z, root_index, 1);
  Var dx = add_colvec(y.x, neg(rx));
  Var dz = add_colvec(y.z, neg(rz));
  PosePlanes out;
  out.x = add_colvec(add(mul_colvec(dx, cos_col), mul_colvec(dz, sin_col)), rx);
  out.y = y.y;
  out.z = add_colvec(add(mul_colvec(dx, neg(sin_col)), mul_colvec(dz, cos_col)), rz);
  return out;
}

ad::Var interleave(const std::vector<ad::Var>& planes, int joints) {
  require(!planes.empty(), "interleave: no planes");
  const int k = static_cast<int>(planes.size());
  Eigen::MatrixXd perm = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k) * joints,
                                               static_cast<Eigen::Index>(k) * joints);
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < joints; ++j) perm(c * joints + j, k * j + c) = 1.0;
  ad::Tape& tape = *planes[0].tape;
  return ad::matmul(ad::concat_cols(planes), tape.constant(perm));
}

std::vector<Eigen::MatrixXd> deinterleave(const Eigen::MatrixXd& flat, int k) {
  require(k > 0 && flat.cols() % k == 0, "deinterleave: column count not divisible");
  const Eigen::Index joints = flat.cols() / k;
  std::vector<Eigen::MatrixXd> planes(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    planes[static_cast<std::size_t>(c)].resize(flat.rows(), joints);
    for (Eigen::Index j = 0; j < joints; ++j)
      planes[static_cast<std::size_t>(c)].col(j) = flat.col(k * j + c);
  }
  return planes;
}

}  // namespace graph

}  // namespace poselift
