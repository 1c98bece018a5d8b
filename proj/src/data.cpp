// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include "poselift/data.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "poselift/common.hpp"
#include "poselift/constraints.hpp"

namespace poselift {
namespace {

Eigen::Matrix3d rot_x(double a) {
  double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Eigen::Matrix3d rot_y(double a) {
  double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Eigen::Matrix3d rot_z(double a) {
  double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

// T-pose offsets (mm) of each joint from its parent, default topology order.
// Y is up; arms hang at the sides so elbow and knee folds share the valid
// side of the hip-plane constraint.
const double kOffsets[17][3] = {
    {0, 0, 0},      // pelvis (root)
    {-130, 0, 0},   // r_hip
    {0, -450, 0},   // r_knee
    {0, -450, 0},   // r_ankle
    {130, 0, 0},    // l_hip
    {0, -450, 0},   // l_knee
    {0, -450, 0},   // l_ankle
    {0, 230, 0},    // spine
    {0, 230, 0},    // thorax
    {0, 70, 0},     // neck
    {0, 120, 0},    // head
    {180, 0, 0},    // l_shoulder (from thorax)
    {0, -280, 0},   // l_elbow
    {0, -250, 0},   // l_wrist
    {-180, 0, 0},   // r_shoulder (from thorax)
    {0, -280, 0},   // r_elbow
    {0, -250, 0}    // r_wrist
};

// Folds never start at zero: a perfectly straight limb sits exactly on the
// fold-constraint boundary, where rounding can tip the hinge loss positive.
constexpr double kFoldMinDeg = 5.0;
constexpr double kPelvisJitterFrac = 0.10;

double deg_range(Rng& rng, double half_width_deg) {
  return radians(half_width_deg * (2.0 * rng.uniform() - 1.0));
}

Pose3D articulate(Rng& rng, const SyntheticConfig& cfg, const Topology& topo) {
  int joints = topo.joint_count;
  double scale = 1.0 + cfg.scale_jitter * (2.0 * rng.uniform() - 1.0);
  std::vector<double> bone_scale(joints, 1.0);
  for (const Bone& b : topo.bones)
    bone_scale[b.child] = 1.0 + cfg.bone_jitter * (2.0 * rng.uniform() - 1.0);

  std::vector<Eigen::Matrix3d> local(joints, Eigen::Matrix3d::Identity());
  local[0] = rot_y(deg_range(rng, cfg.yaw_deg));
  local[1] = rot_z(deg_range(rng, cfg.hip_spread_deg)) *
             rot_x(deg_range(rng, cfg.hip_swing_deg));
  local[2] = rot_x(radians(kFoldMinDeg) +
                   radians(cfg.knee_fold_max_deg - kFoldMinDeg) * rng.uniform());
  local[4] = rot_z(deg_range(rng, cfg.hip_spread_deg)) *
             rot_x(deg_range(rng, cfg.hip_swing_deg));
  local[5] = rot_x(radians(kFoldMinDeg) +
                   radians(cfg.knee_fold_max_deg - kFoldMinDeg) * rng.uniform());
  local[7] = rot_x(deg_range(rng, cfg.torso_lean_deg)) *
             rot_z(deg_range(rng, cfg.torso_lean_deg));
  local[11] = rot_z(deg_range(rng, cfg.shoulder_spread_deg)) *
              rot_x(deg_range(rng, cfg.shoulder_swing_deg));
  local[12] = rot_x(radians(kFoldMinDeg) +
                    radians(cfg.elbow_fold_max_deg - kFoldMinDeg) * rng.uniform());
  local[14] = rot_z(deg_range(rng, cfg.shoulder_spread_deg)) *
              rot_x(deg_range(rng, cfg.shoulder_swing_deg));
  local[15] = rot_x(radians(kFoldMinDeg) +
                    radians(cfg.elbow_fold_max_deg - kFoldMinDeg) * rng.uniform());

  std::vector<Eigen::Matrix3d> world(joints);
  std::vector<Eigen::Vector3d> pos(joints);
  world[0] = local[0];
  pos[0].setZero();
  for (const Bone& b : topo.bones) {
    Eigen::Vector3d off(kOffsets[b.child][0], kOffsets[b.child][1],
                        kOffsets[b.child][2]);
    off *= scale * bone_scale[b.child];
    pos[b.child] = pos[b.parent] + world[b.parent] * off;
    world[b.child] = world[b.parent] * local[b.child];
  }

  Pose3D y(3 * joints);
  for (int j = 0; j < joints; ++j) y.segment<3>(3 * j) = pos[j];
  return y;
}

std::string format_vector(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += format_g17(v(i));
  }
  return out;
}

}  // namespace

void SyntheticConfig::validate() const {
  require(count >= 0, "synthetic config: count must be nonnegative");
  require(knee_fold_max_deg >= kFoldMinDeg && knee_fold_max_deg <= 90.0,
          "synthetic config: knee fold range out of bounds");
  require(elbow_fold_max_deg >= kFoldMinDeg && elbow_fold_max_deg <= 90.0,
          "synthetic config: elbow fold range out of bounds");
  require(hip_swing_deg >= 0 && hip_spread_deg >= 0 && shoulder_swing_deg >= 0 &&
              shoulder_spread_deg >= 0 && torso_lean_deg >= 0 && yaw_deg >= 0,
          "synthetic config: articulation ranges must be nonnegative");
  require(scale_jitter >= 0 && scale_jitter < 1 && bone_jitter >= 0 && bone_jitter < 1,
          "synthetic config: jitter must lie in [0,1)");
  require(dist_min_mm > 0 && dist_max_mm >= dist_min_mm,
          "synthetic config: camera distance range invalid");
  require(elev_max_deg >= elev_min_deg, "synthetic config: elevation range invalid");
  require(azim_deg >= 0, "synthetic config: azimuth range must be nonnegative");
  require(full_min_px > 0 && full_max_px >= full_min_px,
          "synthetic config: full image size range invalid");
  require(net_w > 0 && net_h > 0, "synthetic config: network input size must be positive");
  require(crop_pad_px >= 0 && crop_slack_max >= 1.0,
          "synthetic config: crop padding invalid");
  require(mu_h > 0, "synthetic config: mu_h must be positive");
  require(noise_px >= 0, "synthetic config: noise must be nonnegative");
  if (joint_noise_scale.size() != 0) {
    require(joint_noise_scale.size() == 17,
            "synthetic config: joint_noise_scale must have one entry per joint");
    require(joint_noise_scale.minCoeff() >= 0,
            "synthetic config: joint_noise_scale must be nonnegative");
  }
}

Dataset generate(const SyntheticConfig& config) {
  config.validate();
  Topology topo = default_topology();
  Dataset ds;
  ds.joint_count = topo.joint_count;
  ds.records.reserve(static_cast<std::size_t>(config.count));
  Rng base(config.seed);

  for (long id = 0; id < config.count; ++id) {
    Rng rng = base.substream(static_cast<std::uint64_t>(id));
    SampleRecord rec;
    rec.id = id;
    bool placed = false;

    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      Pose3D y = articulate(rng, config, topo);
      if (limbs_loss(y, topo) != 0.0) continue;

      double w_full = config.full_min_px +
                      (config.full_max_px - config.full_min_px) * rng.uniform();
      double h_full = config.full_min_px +
                      (config.full_max_px - config.full_min_px) * rng.uniform();
      double theta_x = radians(config.elev_min_deg +
                               (config.elev_max_deg - config.elev_min_deg) * rng.uniform());
      double theta_y = deg_range(rng, config.azim_deg);
      double w_p = config.dist_min_mm +
                   (config.dist_max_mm - config.dist_min_mm) * rng.uniform();
      double p_u = w_full / 2 + kPelvisJitterFrac * w_full * (2 * rng.uniform() - 1);
      double p_v = h_full / 2 + kPelvisJitterFrac * h_full * (2 * rng.uniform() - 1);
      double slack_u = 1.02 + (config.crop_slack_max - 1.02) * rng.uniform();
      double slack_v = 1.02 + (config.crop_slack_max - 1.02) * rng.uniform();

      // Subject in full-image pixels: pinhole with the focal length the crop
      // intrinsics will later reconstruct, pelvis pinned at (p_u, p_v).
      double f = std::hypot(w_full, h_full);
      CameraIntrinsics full_cam{f, f, w_full / 2, h_full / 2, 1.0, 1.0};
      CameraExtrinsics ext;
      ext.R = rot_x(theta_x) * rot_y(theta_y);
      ext.t = Eigen::Vector3d((p_u - w_full / 2) * w_p / f,
                              (p_v - h_full / 2) * w_p / f, w_p);
      Pose2D full_px;
      try {
        full_px = project(y, full_cam, ext, topo);
      } catch (const NumericalError&) {
        continue;
      }

      double min_u = full_px(0), max_u = full_px(0);
      double min_v = full_px(1), max_v = full_px(1);
      for (int j = 1; j < topo.joint_count; ++j) {
        min_u = std::min(min_u, full_px(2 * j));
        max_u = std::max(max_u, full_px(2 * j));
        min_v = std::min(min_v, full_px(2 * j + 1));
        max_v = std::max(max_v, full_px(2 * j + 1));
      }

      // The capsule translation formula forces the pelvis onto the crop
      // center, so LEFT/TOP are not free once p_u, p_v are chosen.
      double left = p_u - config.net_w / 2;
      double top = p_v - config.net_h / 2;
      double pad = config.crop_pad_px;
      if (min_u < left + pad || min_v < top + pad) continue;
      double w_bb = (max_u - left + pad) * slack_u;
      double h_bb = (max_v - top + pad) * slack_v;
      if (left < 0 || top < 0 || left + w_bb > w_full || top + h_bb > h_full)
        continue;

      CropGeometry crop;
      crop.w_full = w_full;
      crop.h_full = h_full;
      crop.left = left;
      crop.top = top;
      crop.w_bb = w_bb;
      crop.h_bb = h_bb;
      crop.w = config.net_w;
      crop.h = config.net_h;
      crop.mu_h = config.mu_h;
      crop.validate();

      CameraIntrinsics K = intrinsics_from_crop(crop);
      CameraExtrinsics E = extrinsics_from_angles(theta_x, theta_y, w_p, K);
      Pose2D x_clean = project(y, K, E, topo);

      bool inside = true;
      for (int j = 0; j < topo.joint_count && inside; ++j) {
        double u_full = x_clean(2 * j) / K.s_w + left + config.net_w / 2;
        double v_full = x_clean(2 * j + 1) / K.s_h + top + config.net_h / 2;
        inside = u_full >= left && u_full <= left + w_bb && v_full >= top &&
                 v_full <= top + h_bb;
      }
      if (!inside) continue;

      rec.y_gt = y;
      rec.crop = crop;
      rec.K = K;
      rec.E = E;
      rec.x_gt = x_clean;
      if (config.noise_px > 0) {
        for (int j = 0; j < topo.joint_count; ++j) {
          double mult = config.joint_noise_scale.size() ? config.joint_noise_scale(j) : 1.0;
          rec.x_gt(2 * j) += K.s_w * config.noise_px * mult * rng.normal();
          rec.x_gt(2 * j + 1) += K.s_h * config.noise_px * mult * rng.normal();
        }
      }
      placed = true;
    }

    if (!placed)
      throw InputError("generate: record " + std::to_string(id) +
                       ": no feasible crop after 100 attempts (adjust camera or crop ranges)");
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), "dataset: cannot open " + path.string() + " for writing");
  out << "poselift-dataset v1 joints " << ds.joint_count << "\n";
  for (const SampleRecord& r : ds.records) {
    require(r.features_ref.find(' ') == std::string::npos,
            "dataset: features ref must not contain spaces");
    out << "id " << r.id;
    out << " y_gt " << format_vector(r.y_gt);
    out << " x_gt " << format_vector(r.x_gt);
    out << " crop " << format_vector(r.crop.to_vector());
    out << " camera " << format_vector(camera_to_vector(r.K, r.E));
    out << " features-ref " << (r.features_ref.empty() ? "-" : r.features_ref);
    out << "\n";
  }
  require(out.good(), "dataset: write failed for " + path.string());
}

namespace {

[[noreturn]] void dataset_fail(std::size_t line, const std::string& what) {
  throw InputError("dataset: line " + std::to_string(line) + ": " + what);
}

void expect_key(std::istringstream& in, const char* key, std::size_t line) {
  std::string tok;
  if (!(in >> tok) || tok != key)
    dataset_fail(line, std::string("expected field '") + key + "'");
}

Eigen::VectorXd read_numbers(std::istringstream& in, int n, const char* field,
                             std::size_t line) {
  Eigen::VectorXd v(n);
  std::string tok;
  for (int i = 0; i < n; ++i) {
    if (!(in >> tok))
      dataset_fail(line, std::string("truncated '") + field + "' field");
    try {
      v(i) = parse_double(tok);
    } catch (const InputError&) {
      dataset_fail(line, std::string("bad number in '") + field + "': " + tok);
    }
  }
  return v;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "dataset: cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw InputError("dataset: empty file, missing header");
  {
    std::istringstream hs(header);
    std::string magic, version, joints_key;
    int joints = 0;
    if (!(hs >> magic >> version >> joints_key >> joints) ||
        magic != "poselift-dataset" || joints_key != "joints")
      throw InputError("dataset: bad header: " + header);
    if (version != "v1")
      throw InputError("dataset: unsupported version " + version + " (expected v1)");
    require(joints > 0, "dataset: joint count must be positive");
    Dataset ds;
    ds.joint_count = joints;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream ls(line);
      SampleRecord r;
      expect_key(ls, "id", line_no);
      if (!(ls >> r.id)) dataset_fail(line_no, "bad id");
      expect_key(ls, "y_gt", line_no);
      r.y_gt = read_numbers(ls, 3 * joints, "y_gt", line_no);
      expect_key(ls, "x_gt", line_no);
      r.x_gt = read_numbers(ls, 2 * joints, "x_gt", line_no);
      expect_key(ls, "crop", line_no);
      r.crop = CropGeometry::from_vector(read_numbers(ls, 9, "crop", line_no));
      expect_key(ls, "camera", line_no);
      camera_from_vector(read_numbers(ls, 18, "camera", line_no), r.K, r.E);
      expect_key(ls, "features-ref", line_no);
      std::string ref;
      if (!(ls >> ref)) dataset_fail(line_no, "truncated 'features-ref' field");
      r.features_ref = ref == "-" ? std::string() : ref;
      std::string extra;
      if (ls >> extra) dataset_fail(line_no, "trailing tokens after record");
      ds.records.push_back(std::move(r));
    }
    return ds;
  }
}

SampleRecord record_from_external(long id, const Eigen::VectorXd& joints_mm,
                                  const Eigen::Matrix<double, 18, 1>& camera,
                                  const CropGeometry& crop, const Topology& topo) {
  require(joints_mm.size() == 3 * topo.joint_count,
          "external record: joint vector must have 3 entries per joint");
  require_finite(joints_mm, "external record joints");
  crop.validate();
  SampleRecord rec;
  rec.id = id;
  rec.y_gt = root_center(joints_mm, topo);
  rec.crop = crop;
  camera_from_vector(camera, rec.K, rec.E);
  rec.x_gt = project(rec.y_gt, rec.K, rec.E, topo);
  return rec;
}

namespace {
constexpr char kFeatureMagic[8] = {'P', 'L', 'F', 'E', 'A', 'T', '0', '1'};
}

void FeatureFile::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "features: cannot open " + path.string() + " for writing");
  out.write(kFeatureMagic, 8);
  std::uint64_t w = static_cast<std::uint64_t>(width);
  std::uint64_t n = rows.size();
  out.write(reinterpret_cast<const char*>(&w), 8);
  out.write(reinterpret_cast<const char*>(&n), 8);
  for (const auto& [id, vec] : rows) {
    require(vec.size() == width, "features: row width mismatch");
    std::int64_t id64 = id;
    out.write(reinterpret_cast<const char*>(&id64), 8);
    out.write(reinterpret_cast<const char*>(vec.data()),
              static_cast<std::streamsize>(sizeof(double) * vec.size()));
  }
  require(out.good(), "features: write failed for " + path.string());
}

FeatureFile FeatureFile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "features: cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  require(in.good() && std::equal(magic, magic + 8, kFeatureMagic),
          "features: bad magic in " + path.string());
  std::uint64_t w = 0, n = 0;
  in.read(reinterpret_cast<char*>(&w), 8);
  in.read(reinterpret_cast<char*>(&n), 8);
  require(in.good() && w > 0, "features: bad header in " + path.string());
  FeatureFile f;
  f.width = static_cast<int>(w);
  f.rows.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::int64_t id64 = 0;
    Eigen::VectorXd vec(f.width);
    in.read(reinterpret_cast<char*>(&id64), 8);
    in.read(reinterpret_cast<char*>(vec.data()),
            static_cast<std::streamsize>(sizeof(double) * vec.size()));
    require(in.good(), "features: truncated record " + std::to_string(i) + " in " +
                           path.string());
    f.rows.emplace_back(static_cast<long>(id64), std::move(vec));
  }
  return f;
}

const Eigen::VectorXd& FeatureFile::at_index(std::size_t index) const {
  require(index < rows.size(), "features: index out of range");
  return rows[index].second;
}

const Eigen::VectorXd& FeatureFile::by_id(long id) const {
  for (const auto& [rid, vec] : rows)
    if (rid == id) return vec;
  throw InputError("features: no row for sample id " + std::to_string(id));
}

}  // namespace poselift
