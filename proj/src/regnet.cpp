// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include "poselift/regnet.hpp"

#include <cmath>

namespace poselift {

DecoderParams DecoderParams::init(int dim, int joints, double depth_prior, Rng& rng) {
  require(dim > 6, "decoder: dim must exceed the 6 intrinsics values");
  require(joints > 0, "decoder: joint count must be positive");
  DecoderParams p;
  p.joints = joints;
  p.dim = dim;
  p.depth_prior = depth_prior;
  p.std_mu = Eigen::MatrixXd::Zero(1, dim);
  p.std_sd = Eigen::MatrixXd::Ones(1, dim);
  p.w.resize(dim, 9 * joints);
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Eigen::Index r = 0; r < p.w.rows(); ++r)
    for (Eigen::Index c = 0; c < p.w.cols(); ++c) p.w(r, c) = sd * rng.normal();
  p.b = Eigen::MatrixXd::Zero(1, 9 * joints);
  for (int j = 0; j < joints; ++j) p.b(0, 4 * joints + 3 * j + 2) = depth_prior;
  return p;
}

long DecoderParams::parameter_count() const {
  return static_cast<long>(w.size() + b.size());
}

std::vector<Eigen::MatrixXd*> DecoderParams::tensors() { return {&w, &b}; }

Checkpoint DecoderParams::to_checkpoint(const Topology& topo) const {
  Checkpoint ck;
  ck.kind = "regnet";
  ck.meta["dim"] = std::to_string(dim);
  ck.meta["joints"] = std::to_string(topo.joint_count);
  ck.meta["topology"] = topo.content_hash();
  ck.meta["depth_prior"] = format_g17(depth_prior);
  ck.add("std_mu", std_mu);
  ck.add("std_sd", std_sd);
  ck.add("w", w);
  ck.add("b", b);
  return ck;
}

DecoderParams DecoderParams::from_checkpoint(const Checkpoint& ck, const Topology& topo) {
  require(ck.kind == "regnet", "checkpoint kind '" + ck.kind + "' is not a regnet decoder");
  require(ck.meta_at("topology") == topo.content_hash(),
          "regnet checkpoint was trained on a different topology");
  DecoderParams p;
  p.joints = topo.joint_count;
  p.dim = std::stoi(ck.meta_at("dim"));
  p.depth_prior = parse_double(ck.meta_at("depth_prior"));
  p.std_mu = ck.tensor("std_mu");
  p.std_sd = ck.tensor("std_sd");
  p.w = ck.tensor("w");
  p.b = ck.tensor("b");
  require(p.w.rows() == p.dim && p.w.cols() == 9 * p.joints && p.b.cols() == 9 * p.joints,
          "regnet checkpoint tensor shapes do not match dim/joints");
  return p;
}

Eigen::VectorXd decoder_input(const Eigen::VectorXd& features_raw, const CameraIntrinsics& K) {
  Eigen::VectorXd v(features_raw.size() + 6);
  v << features_raw, K.f_w, K.f_h, K.c_w, K.c_h, K.s_w, K.s_h;
  return v;
}

CapsuleSplit decode(const Eigen::VectorXd& features, const DecoderParams& params) {
  require(features.size() == params.dim,
          "decode: expected " + std::to_string(params.dim) + " inputs, got " +
              std::to_string(features.size()));
  require_finite(features, "decode input");
  const int J = params.joints;
  Eigen::RowVectorXd v =
      ((features.transpose() - params.std_mu.row(0)).array() / params.std_sd.row(0).array())
          .matrix();
  Eigen::RowVectorXd raw = v * params.w + params.b.row(0);

  CapsuleSplit split;
  Eigen::VectorXd logits = raw.segment(0, J).transpose();
  Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  split.attention = (e / e.sum()).matrix();

  split.y.resize(3 * J);
  split.gamma.resize(3 * J);
  split.sigma_raw.resize(2 * J);
  for (int j = 0; j < J; ++j) {
    const double scale = static_cast<double>(J) * split.attention(j);
    split.y.segment<3>(3 * j) = scale * raw.segment(J + 3 * j, 3).transpose();
    split.gamma.segment<3>(3 * j) = scale * raw.segment(4 * J + 3 * j, 3).transpose();
    split.sigma_raw.segment<2>(2 * j) = scale * raw.segment(7 * J + 2 * j, 2).transpose();
  }
  return split;
}

RegForward regnet_forward(const Eigen::VectorXd& features_raw, const CropGeometry& crop,
                          const DecoderParams& params, double theta, const Topology& topo) {
  RegForward out;
  out.theta = theta;
  out.K = intrinsics_from_crop(crop);
  out.split = decode(decoder_input(features_raw, out.K), params);
  out.y_hat = root_center(out.split.y, topo);
  out.E = extrinsics_from_capsule(out.split.gamma, out.K);
  out.x_hat = project(out.y_hat, out.K, out.E, topo);
  out.x_hat_rot = project(rotate_azimuth(out.y_hat, theta, topo), out.K, out.E, topo);
  out.sigma_hat = (1.0 / (1.0 + (-out.split.sigma_raw.array()).exp())).matrix();
  return out;
}

RegForward regnet_forward(const Eigen::VectorXd& features_raw, const CropGeometry& crop,
                          const DecoderParams& params, Rng& rng, const Topology& topo) {
  return regnet_forward(features_raw, crop, params, sample_rotation_angle(rng), topo);
}

LossBalancer make_reg_balancer(LossBalancer::Config config) {
  return LossBalancer({"nf", "rle"},
                      {{"bone", 10.0}, {"limbs", 0.1}, {"nf", 1.0}, {"rle", 10.0}}, config);
}

std::vector<std::pair<std::string, double>> RegLossTerms::named() const {
  return {{"bone", bone}, {"limbs", limbs}, {"nf", nf}, {"rle", rle}};
}

RegLossTerms reg_loss_terms(const std::vector<RegForward>& batch,
                            const std::vector<Pose2D>& x_gt, const FlowModel& flow,
                            const BoneRatioStats& stats, const Topology& topo) {
  require(!batch.empty() && batch.size() == x_gt.size(),
          "reg_loss: empty batch or mismatched ground truth");
  RegLossTerms t;
  const double B = static_cast<double>(batch.size());
  std::vector<Pose3D> y_hats;
  y_hats.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    t.limbs += limbs_loss(batch[i].y_hat, topo);
    t.nf += nf_loss_pose(batch[i].x_hat_rot, flow, topo);
    t.rle += rle_loss(batch[i].x_hat, batch[i].sigma_hat, x_gt[i]);
    y_hats.push_back(batch[i].y_hat);
  }
  t.limbs /= B;
  t.nf /= B;
  t.rle /= B;
  t.bone = bone_loss(y_hats, topo, stats);
  return t;
}

double reg_loss(const RegForward& fwd, const Pose2D& x_gt, const FlowModel& flow,
                const BoneRatioStats& stats, const LossBalancer& balancer,
                const Topology& topo) {
  return balancer.total_value(reg_loss_terms({fwd}, {x_gt}, flow, stats, topo).named());
}

SyntheticFeatureProvider::SyntheticFeatureProvider(int width, double noise, std::uint64_t seed,
                                                  const Topology& topo)
    : width_(width), noise_(noise), seed_(seed), topo_(topo) {
  require(width_ > 0, "synthetic features: width must be positive");
  require(noise_ >= 0, "synthetic features: noise must be nonnegative");
  const int core = 3 * topo_.joint_count + 1;
  Rng rng(seed_);
  embed_.resize(width_, core);
  const double sd = 1.0 / std::sqrt(static_cast<double>(core));
  for (Eigen::Index r = 0; r < embed_.rows(); ++r)
    for (Eigen::Index c = 0; c < embed_.cols(); ++c) embed_(r, c) = sd * rng.normal();
}

Eigen::VectorXd SyntheticFeatureProvider::features(const SampleRecord& rec) const {
  check_pose3d(rec.y_gt, topo_, "synthetic features");
  const int J = topo_.joint_count;
  // Camera-frame pose in meters plus the root depth; everything an image of
  // the crop could reveal, nothing it could not (world yaw stays hidden).
  Eigen::VectorXd core(3 * J + 1);
  for (int j = 0; j < J; ++j)
    core.segment<3>(3 * j) = rec.E.R * rec.y_gt.segment<3>(3 * j) / 1000.0;
  core(3 * J) = rec.E.t.z() / 1000.0;
  Eigen::VectorXd f = embed_ * core;
  if (noise_ > 0) {
    Rng noise_rng = Rng(seed_).substream(static_cast<std::uint64_t>(rec.id));
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) += noise_ * noise_rng.normal();
  }
  return f;
}

FileFeatureProvider::FileFeatureProvider(const std::filesystem::path& base_dir)
    : base_dir_(base_dir) {}

const FeatureFile& FileFeatureProvider::file_for(const std::string& name) const {
  auto it = cache_.find(name);
  if (it == cache_.end())
    it = cache_.emplace(name, FeatureFile::load(base_dir_ / name)).first;
  return it->second;
}

int FileFeatureProvider::width() const {
  require(width_ > 0, "file features: width unknown before the first lookup");
  return width_;
}

Eigen::VectorXd FileFeatureProvider::features(const SampleRecord& rec) const {
  const std::string& ref = rec.features_ref;
  const auto sep = ref.rfind(':');
  if (ref.empty() || sep == std::string::npos || sep == 0 || sep + 1 == ref.size())
    throw InputError("record " + std::to_string(rec.id) +
                     ": missing or malformed features reference (expected file:index)");
  const std::string name = ref.substr(0, sep);
  std::size_t index = 0;
  try {
    index = static_cast<std::size_t>(std::stoul(ref.substr(sep + 1)));
  } catch (const std::exception&) {
    throw InputError("record " + std::to_string(rec.id) + ": bad features index in '" + ref + "'");
  }
  const FeatureFile& file = file_for(name);
  require(index < file.rows.size(),
          "record " + std::to_string(rec.id) + ": features index out of range");
  require(file.rows[index].first == rec.id,
          "record " + std::to_string(rec.id) + ": features row id mismatch");
  if (width_ == 0) width_ = file.width;
  require(file.width == width_, "file features: inconsistent widths across files");
  return file.rows[index].second;
}

namespace {

// Column-selection constants for the interleaved capsule layouts.
Eigen::MatrixXd root_tile_matrix(int joints, int root) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Identity(3 * joints, 3 * joints);
  for (int j = 0; j < joints; ++j)
    for (int c = 0; c < 3; ++c) t(3 * root + c, 3 * j + c) -= 1.0;
  return t;  // I - T: y * (I - T) root-centers an interleaved pose
}

Eigen::MatrixXd triple_mean_matrix(int joints) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3 * joints, 3);
  for (int j = 0; j < joints; ++j)
    for (int c = 0; c < 3; ++c) s(3 * j + c, c) = 1.0 / static_cast<double>(joints);
  return s;
}

Eigen::MatrixXd coord_pick_matrix(int joints, int k, int c) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k) * joints, joints);
  for (int j = 0; j < joints; ++j) p(k * j + c, j) = 1.0;
  return p;
}

}  // namespace

RegTrainResult train_regnet(const std::vector<RegSample>& data, const FlowModel& flow,
                            const RegTrainConfig& config, const Topology& topo) {
  require(!data.empty(), "train_regnet: empty dataset");
  require(config.epochs > 0 && config.batch > 0, "train_regnet: epochs and batch must be positive");
  flow.validate();
  require(flow.actnorm_ready, "train_regnet: flow model is untrained");
  const int J = topo.joint_count;
  require(flow.dim == 2 * J, "train_regnet: flow dimension does not match the skeleton");

  const std::size_t N = data.size();
  const int feat_width = static_cast<int>(data[0].features.size());
  require(feat_width > 0, "train_regnet: empty feature vectors");
  const int dim = feat_width + 6;
  Eigen::MatrixXd inputs(static_cast<Eigen::Index>(N), dim);
  std::vector<CameraIntrinsics> all_K(N);
  for (std::size_t i = 0; i < N; ++i) {
    require(data[i].features.size() == feat_width, "train_regnet: inconsistent feature widths");
    all_K[i] = intrinsics_from_crop(data[i].crop);
    inputs.row(static_cast<Eigen::Index>(i)) =
        decoder_input(data[i].features, all_K[i]).transpose();
  }

  Rng rng(config.seed);
  RegTrainResult result;
  result.params = DecoderParams::init(dim, J, config.depth_prior_mm, rng);
  result.params.std_mu = inputs.colwise().mean();
  Eigen::RowVectorXd var = (inputs.rowwise() - result.params.std_mu.row(0))
                               .array()
                               .square()
                               .colwise()
                               .mean()
                               .matrix();
  result.params.std_sd = var.array().sqrt().max(1e-8).matrix();
  result.balancer = make_reg_balancer({.warmup_steps = config.balancer_warmup});
  result.stats = BoneRatioStats();

  AdamW opt({.lr = config.lr, .weight_decay = config.weight_decay});
  DecoderParams snap_params = result.params;
  BoneRatioStats snap_stats = result.stats;
  LossBalancer snap_balancer = result.balancer;
  std::vector<double> trace;

  const Eigen::MatrixXd center_mat = root_tile_matrix(J, topo.root_index);
  const Eigen::MatrixXd mean_mat = triple_mean_matrix(J);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = rng.permutation(N);
    double epoch_loss = 0.0;
    bool bad = false;
    for (std::size_t start = 0; start < N && !bad; start += static_cast<std::size_t>(config.batch)) {
      const std::size_t B = std::min<std::size_t>(config.batch, N - start);
      Eigen::MatrixXd F(B, dim), Xgt(B, 2 * J), cos_c(B, 1), sin_c(B, 1);
      Eigen::MatrixXd fw(B, 1), fh(B, 1), cw(B, 1), ch(B, 1), ifw(B, 1), ifh(B, 1);
      Eigen::MatrixXd ntx(B, 1), nty(B, 1);  // -c/f factors for the capsule translation
      for (std::size_t i = 0; i < B; ++i) {
        const std::size_t idx = order[start + i];
        const Eigen::Index r = static_cast<Eigen::Index>(i);
        F.row(r) = inputs.row(static_cast<Eigen::Index>(idx));
        Xgt.row(r) = data[idx].x_gt.transpose();
        const CameraIntrinsics& K = all_K[idx];
        fw(r, 0) = K.f_w;
        fh(r, 0) = K.f_h;
        cw(r, 0) = K.c_w;
        ch(r, 0) = K.c_h;
        ifw(r, 0) = 1.0 / K.f_w;
        ifh(r, 0) = 1.0 / K.f_h;
        ntx(r, 0) = -K.c_w / K.f_w;
        nty(r, 0) = -K.c_h / K.f_h;
        const double theta = sample_rotation_angle(rng);
        cos_c(r, 0) = std::cos(theta);
        sin_c(r, 0) = std::sin(theta);
      }

      ad::Tape tape;
      ad::Var wv = tape.input(result.params.w);
      ad::Var bv = tape.input(result.params.b);
      Eigen::MatrixXd F_std(B, dim);
      for (Eigen::Index r = 0; r < F_std.rows(); ++r)
        F_std.row(r) = (F.row(r) - result.params.std_mu.row(0))
                           .cwiseQuotient(result.params.std_sd.row(0));
      ad::Var fstd = tape.constant(F_std);
      ad::Var raw = ad::add_rowvec(ad::matmul(fstd, wv), bv);

      ad::Var logits = ad::cols(raw, 0, J);
      Eigen::MatrixXd rowmax = logits.val().rowwise().maxCoeff();
      ad::Var shifted = ad::add_colvec(logits, tape.constant(-rowmax));
      ad::Var expd = ad::exp(shifted);
      ad::Var denom = ad::sum_cols(expd);
      ad::Var att = ad::mul_colvec(expd, ad::div(tape.constant(Eigen::MatrixXd::Ones(B, 1)), denom));
      ad::Var scale = ad::mul_scalar(att, static_cast<double>(J));

      ad::Var y_caps = ad::mul(ad::cols(raw, J, 3 * J), ad::repeat_cols(scale, 3));
      ad::Var g_caps = ad::mul(ad::cols(raw, 4 * J, 3 * J), ad::repeat_cols(scale, 3));
      ad::Var s_caps = ad::mul(ad::cols(raw, 7 * J, 2 * J), ad::repeat_cols(scale, 2));

      ad::Var y_centered = ad::matmul(y_caps, tape.constant(center_mat));
      ad::Var gbar = ad::matmul(g_caps, tape.constant(mean_mat));
      ad::Var thx = ad::cols(gbar, 0, 1);
      ad::Var thy = ad::cols(gbar, 1, 1);
      ad::Var wp = ad::cols(gbar, 2, 1);
      if (wp.val().minCoeff() <= 1e-6) {
        bad = true;
        break;
      }

      ad::Var cx = ad::cos(thx), sx = ad::sin(thx);
      ad::Var cy = ad::cos(thy), sy = ad::sin(thy);
      graph::CameraColumns cam;
      cam.r[0][0] = cy;
      cam.r[0][1] = tape.constant(Eigen::MatrixXd::Zero(B, 1));
      cam.r[0][2] = sy;
      cam.r[1][0] = ad::mul(sx, sy);
      cam.r[1][1] = cx;
      cam.r[1][2] = ad::neg(ad::mul(sx, cy));
      cam.r[2][0] = ad::neg(ad::mul(cx, sy));
      cam.r[2][1] = sx;
      cam.r[2][2] = ad::mul(cx, cy);
      cam.tx = ad::mul(wp, tape.constant(ntx));
      cam.ty = ad::mul(wp, tape.constant(nty));
      cam.tz = wp;
      cam.f_w = tape.constant(fw);
      cam.f_h = tape.constant(fh);
      cam.c_w = tape.constant(cw);
      cam.c_h = tape.constant(ch);
      cam.inv_f_w = tape.constant(ifw);
      cam.inv_f_h = tape.constant(ifh);

      graph::PosePlanes y_planes;
      y_planes.x = ad::matmul(y_centered, tape.constant(coord_pick_matrix(J, 3, 0)));
      y_planes.y = ad::matmul(y_centered, tape.constant(coord_pick_matrix(J, 3, 1)));
      y_planes.z = ad::matmul(y_centered, tape.constant(coord_pick_matrix(J, 3, 2)));

      graph::PosePlanes2D xh = graph::project(y_planes, cam);
      ad::Var x_hat = graph::interleave({xh.u, xh.v}, J);
      graph::PosePlanes y_rot =
          graph::rotate_azimuth(y_planes, tape.constant(cos_c), tape.constant(sin_c),
                                topo.root_index);
      graph::PosePlanes2D xr = graph::project(y_rot, cam);
      ad::Var x_rot = graph::interleave({xr.u, xr.v}, J);
      ad::Var sig = ad::sigmoid(s_caps);

      result.stats.update_rows(y_centered.val(), topo);

      FlowGraph fg = FlowGraph::attach(tape, flow, false);
      std::vector<std::pair<std::string, ad::Var>> terms;
      terms.emplace_back("bone", graph::bone(y_centered, topo, result.stats));
      terms.emplace_back("limbs", graph::limbs(y_centered, topo));
      terms.emplace_back("nf", graph::nf(tape, x_rot, fg, flow, topo));
      terms.emplace_back("rle", graph::rle(x_hat, sig, Xgt));
      ad::Var total = result.balancer.total(tape, terms);

      const double loss = total.scalar();
      if (!std::isfinite(loss)) {
        bad = true;
        break;
      }
      epoch_loss += loss * static_cast<double>(B);

      tape.backward(total);
      opt.step(result.params.tensors(), {tape.grad(wv), tape.grad(bv)});
    }

    if (bad) {
      result.params = snap_params;
      result.stats = snap_stats;
      result.balancer = snap_balancer;
      result.trace = trace;
      result.diverged = true;
      return result;
    }
    trace.push_back(epoch_loss / static_cast<double>(N));
    snap_params = result.params;
    snap_stats = result.stats;
    snap_balancer = result.balancer;
  }

  result.trace = trace;
  return result;
}

Checkpoint regnet_checkpoint(const RegTrainResult& result, const Topology& topo,
                             const std::string& flow_hash) {
  Checkpoint ck = result.params.to_checkpoint(topo);
  ck.meta["flow_hash"] = flow_hash;
  ck.meta["diverged"] = result.diverged ? "1" : "0";
  ck.add("bone_stats", result.stats.state_tensor());
  ck.add("balancer", result.balancer.state_tensor());
  return ck;
}

void regnet_from_checkpoint(const Checkpoint& ck, const Topology& topo, DecoderParams& params,
                            BoneRatioStats& stats) {
  params = DecoderParams::from_checkpoint(ck, topo);
  stats = BoneRatioStats::from_state_tensor(ck.tensor("bone_stats"));
}

}  // namespace poselift
