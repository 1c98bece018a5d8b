// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include "poselift/normflow.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "poselift/constraints.hpp"
#include "poselift/optim.hpp"

namespace poselift {

namespace {

void split_sizes(int dim, bool swapped, int& passive_at, int& passive_n, int& active_at,
                 int& active_n) {
  const int half1 = dim / 2;
  const int half2 = dim - half1;
  if (!swapped) {
    passive_at = 0;
    passive_n = half1;
    active_at = half1;
    active_n = half2;
  } else {
    passive_at = half1;
    passive_n = half2;
    active_at = 0;
    active_n = half1;
  }
}

Eigen::RowVectorXd coupling_mlp(const FlowCoupling& c, const Eigen::RowVectorXd& passive) {
  const Eigen::RowVectorXd hidden =
      ((passive * c.w1 + c.b1.row(0)).array().max(0.0)).matrix();
  return hidden * c.w2 + c.b2.row(0);
}

double clamp_scale(double raw) { return kCouplingClamp * std::tanh(raw / kCouplingClamp); }

}  // namespace

FlowModel FlowModel::init(int dim, int depth, int hidden, Rng& rng) {
  require(dim >= 2, "flow: dim must be at least 2");
  require(depth >= 1, "flow: depth must be at least 1");
  require(hidden >= 1, "flow: hidden width must be at least 1");
  FlowModel m;
  m.dim = dim;
  m.hidden = hidden;
  m.blocks.resize(depth);
  for (int i = 0; i < depth; ++i) {
    FlowBlock& b = m.blocks[i];
    b.act_scale = Eigen::MatrixXd::Ones(1, dim);
    b.act_bias = Eigen::MatrixXd::Zero(1, dim);
    b.lower_raw = Eigen::MatrixXd::Zero(dim, dim);
    b.upper_raw = Eigen::MatrixXd::Zero(dim, dim);
    b.log_diag = Eigen::MatrixXd::Zero(1, dim);
    int p_at, p_n, a_at, a_n;
    split_sizes(dim, coupling_swapped(i), p_at, p_n, a_at, a_n);
    const double w1_scale = 1.0 / std::sqrt(static_cast<double>(p_n));
    b.coupling.w1 = Eigen::MatrixXd::Zero(p_n, hidden);
    for (int r = 0; r < p_n; ++r)
      for (int c = 0; c < hidden; ++c) b.coupling.w1(r, c) = w1_scale * rng.normal();
    b.coupling.b1 = Eigen::MatrixXd::Zero(1, hidden);
    // Zero output layer: a fresh block is exactly the identity.
    b.coupling.w2 = Eigen::MatrixXd::Zero(hidden, 2 * a_n);
    b.coupling.b2 = Eigen::MatrixXd::Zero(1, 2 * a_n);
  }
  return m;
}

void FlowModel::validate() const {
  require(dim >= 2, "flow: invalid dim");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const FlowBlock& b = blocks[i];
    require(b.act_scale.rows() == 1 && b.act_scale.cols() == dim, "flow: act_scale shape");
    require(b.act_bias.rows() == 1 && b.act_bias.cols() == dim, "flow: act_bias shape");
    require(b.lower_raw.rows() == dim && b.lower_raw.cols() == dim, "flow: lower shape");
    require(b.upper_raw.rows() == dim && b.upper_raw.cols() == dim, "flow: upper shape");
    require(b.log_diag.rows() == 1 && b.log_diag.cols() == dim, "flow: log_diag shape");
    for (int d = 0; d < dim; ++d)
      require(b.act_scale(0, d) != 0.0, "flow: actnorm scale must be nonzero");
    int p_at, p_n, a_at, a_n;
    split_sizes(dim, coupling_swapped(static_cast<int>(i)), p_at, p_n, a_at, a_n);
    require(b.coupling.w1.rows() == p_n && b.coupling.w2.cols() == 2 * a_n,
            "flow: coupling shape");
  }
}

Eigen::MatrixXd FlowModel::linear_matrix(int block) const {
  const FlowBlock& b = blocks.at(block);
  Eigen::MatrixXd l = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < r; ++c) l(r, c) = b.lower_raw(r, c);
    u(r, r) = std::exp(b.log_diag(0, r));
    for (int c = r + 1; c < dim; ++c) u(r, c) = b.upper_raw(r, c);
  }
  return l * u;
}

void FlowModel::set_linear_from_generative(int block, const Eigen::MatrixXd& w) {
  require(w.rows() == dim && w.cols() == dim, "flow: generative matrix shape mismatch");
  Eigen::MatrixXd a = w.inverse();
  FlowBlock& b = blocks.at(block);
  b.lower_raw.setZero();
  b.upper_raw.setZero();
  // Doolittle factorization without pivoting; callers provide matrices with
  // positive pivots (the trainable parameterization enforces this anyway).
  for (int k = 0; k < dim; ++k) {
    const double pivot = a(k, k);
    require(pivot > 1e-12, "flow: generative matrix needs positive pivots");
    for (int r = k + 1; r < dim; ++r) {
      const double factor = a(r, k) / pivot;
      a.row(r).tail(dim - k) -= factor * a.row(k).tail(dim - k);
      b.lower_raw(r, k) = factor;
    }
  }
  for (int r = 0; r < dim; ++r) {
    b.log_diag(0, r) = std::log(a(r, r));
    for (int c = r + 1; c < dim; ++c) b.upper_raw(r, c) = a(r, c);
  }
}

Eigen::VectorXd apply_actnorm(const FlowBlock& b, const Eigen::VectorXd& h) {
  return (h.transpose().array() * b.act_scale.row(0).array() + b.act_bias.row(0).array())
      .matrix()
      .transpose();
}

double actnorm_log_det(const FlowBlock& b) {
  return b.act_scale.row(0).array().abs().log().sum();
}

Eigen::VectorXd apply_invlinear(const FlowBlock& b, const Eigen::VectorXd& h) {
  const int dim = static_cast<int>(h.size());
  // M h = L (U h) without assembling M.
  Eigen::VectorXd uh(dim);
  for (int r = 0; r < dim; ++r) {
    double acc = std::exp(b.log_diag(0, r)) * h[r];
    for (int c = r + 1; c < dim; ++c) acc += b.upper_raw(r, c) * h[c];
    uh[r] = acc;
  }
  Eigen::VectorXd out = uh;
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < r; ++c) out[r] += b.lower_raw(r, c) * uh[c];
  return out;
}

double invlinear_log_det(const FlowBlock& b) { return b.log_diag.row(0).sum(); }

Eigen::VectorXd apply_coupling(const FlowBlock& b, const Eigen::VectorXd& h, bool swapped) {
  const int dim = static_cast<int>(h.size());
  int p_at, p_n, a_at, a_n;
  split_sizes(dim, swapped, p_at, p_n, a_at, a_n);
  const Eigen::RowVectorXd passive = h.segment(p_at, p_n).transpose();
  const Eigen::RowVectorXd params = coupling_mlp(b.coupling, passive);
  Eigen::VectorXd out = h;
  for (int i = 0; i < a_n; ++i) {
    const double s = clamp_scale(params[i]);
    const double t = params[a_n + i];
    out[a_at + i] = (h[a_at + i] - t) * std::exp(-s);
  }
  return out;
}

double coupling_log_det(const FlowBlock& b, const Eigen::VectorXd& h, bool swapped) {
  const int dim = static_cast<int>(h.size());
  int p_at, p_n, a_at, a_n;
  split_sizes(dim, swapped, p_at, p_n, a_at, a_n);
  const Eigen::RowVectorXd passive = h.segment(p_at, p_n).transpose();
  const Eigen::RowVectorXd params = coupling_mlp(b.coupling, passive);
  double acc = 0.0;
  for (int i = 0; i < a_n; ++i) acc -= clamp_scale(params[i]);
  return acc;
}

std::pair<Eigen::VectorXd, double> flow_inverse(const Eigen::VectorXd& x, const FlowModel& m) {
  require(static_cast<int>(x.size()) == m.dim, "flow_inverse: input length mismatch");
  require_finite(x, "flow_inverse input");
  Eigen::VectorXd h = x;
  double log_det = 0.0;
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    const FlowBlock& b = m.blocks[i];
    const bool swapped = FlowModel::coupling_swapped(static_cast<int>(i));
    h = apply_actnorm(b, h);
    log_det += actnorm_log_det(b);
    h = apply_invlinear(b, h);
    log_det += invlinear_log_det(b);
    log_det += coupling_log_det(b, h, swapped);
    h = apply_coupling(b, h, swapped);
    if (!h.allFinite() || !std::isfinite(log_det))
      throw NumericalError("flow numerical overflow");
  }
  return {h, log_det};
}

Eigen::VectorXd flow_forward(const Eigen::VectorXd& z, const FlowModel& m) {
  require(static_cast<int>(z.size()) == m.dim, "flow_forward: input length mismatch");
  require_finite(z, "flow_forward input");
  const int dim = m.dim;
  Eigen::VectorXd h = z;
  for (int i = static_cast<int>(m.blocks.size()) - 1; i >= 0; --i) {
    const FlowBlock& b = m.blocks[i];
    const bool swapped = FlowModel::coupling_swapped(i);
    // Invert the coupling: passive half is unchanged, so the MLP sees the
    // same conditioning values as the normalizing pass did.
    int p_at, p_n, a_at, a_n;
    split_sizes(dim, swapped, p_at, p_n, a_at, a_n);
    const Eigen::RowVectorXd passive = h.segment(p_at, p_n).transpose();
    const Eigen::RowVectorXd params = coupling_mlp(b.coupling, passive);
    for (int k = 0; k < a_n; ++k) {
      const double s = clamp_scale(params[k]);
      const double t = params[a_n + k];
      h[a_at + k] = h[a_at + k] * std::exp(s) + t;
    }
    // Invert the linear layer with two triangular solves.
    Eigen::MatrixXd l = Eigen::MatrixXd::Identity(dim, dim);
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(dim, dim);
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < r; ++c) l(r, c) = b.lower_raw(r, c);
      u(r, r) = std::exp(b.log_diag(0, r));
      for (int c = r + 1; c < dim; ++c) u(r, c) = b.upper_raw(r, c);
    }
    h = l.triangularView<Eigen::Lower>().solve(h);
    h = u.triangularView<Eigen::Upper>().solve(h);
    // Invert actnorm.
    h = ((h.transpose().array() - b.act_bias.row(0).array()) / b.act_scale.row(0).array())
            .matrix()
            .transpose();
    if (!h.allFinite()) throw NumericalError("flow numerical overflow");
  }
  return h;
}

double log_prob(const Eigen::VectorXd& x, const FlowModel& m) {
  const auto [z, log_det] = flow_inverse(x, m);
  const double base = -0.5 * z.squaredNorm() - 0.5 * m.dim * std::log(2.0 * kPi);
  return base + log_det;
}

double nf_loss(const Eigen::VectorXd& x, const FlowModel& m) { return -log_prob(x, m); }

double nf_loss_pose(const Pose2D& x, const FlowModel& m, const Topology& topo) {
  return nf_loss(normalize_pose2d(x, topo), m);
}

FlowGraph FlowGraph::attach(ad::Tape& tape, const FlowModel& m, bool trainable) {
  FlowGraph fg;
  auto reg = [&](const std::string& name, const Eigen::MatrixXd& value) {
    ad::Var v = trainable ? tape.input(value) : tape.constant(value);
    if (trainable) fg.params.emplace_back(name, v);
    return v;
  };
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    const FlowBlock& b = m.blocks[i];
    const std::string p = "blocks." + std::to_string(i) + ".";
    BlockVars bv;
    // Registration order mirrors flow_param_ptrs(); keep the two in sync.
    bv.act_scale = reg(p + "act_scale", b.act_scale);
    bv.act_bias = reg(p + "act_bias", b.act_bias);
    bv.lower_raw = reg(p + "lower", b.lower_raw);
    bv.upper_raw = reg(p + "upper", b.upper_raw);
    bv.log_diag = reg(p + "log_diag", b.log_diag);
    bv.w1 = reg(p + "coupling.w1", b.coupling.w1);
    bv.b1 = reg(p + "coupling.b1", b.coupling.b1);
    bv.w2 = reg(p + "coupling.w2", b.coupling.w2);
    bv.b2 = reg(p + "coupling.b2", b.coupling.b2);
    fg.blocks.push_back(bv);
  }
  return fg;
}

std::vector<Eigen::MatrixXd*> flow_param_ptrs(FlowModel& m) {
  std::vector<Eigen::MatrixXd*> out;
  for (FlowBlock& b : m.blocks) {
    out.push_back(&b.act_scale);
    out.push_back(&b.act_bias);
    out.push_back(&b.lower_raw);
    out.push_back(&b.upper_raw);
    out.push_back(&b.log_diag);
    out.push_back(&b.coupling.w1);
    out.push_back(&b.coupling.b1);
    out.push_back(&b.coupling.w2);
    out.push_back(&b.coupling.b2);
  }
  return out;
}

ad::Var FlowGraph::mean_nll(ad::Tape& tape, ad::Var x, const FlowModel& shape) const {
  const int dim = shape.dim;
  require(x.cols() == dim, "flow graph: input width mismatch");
  const int batch = x.rows();
  Eigen::MatrixXd mask_l = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd mask_u = Eigen::MatrixXd::Zero(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) {
      if (r > c) mask_l(r, c) = 1.0;
      if (r < c) mask_u(r, c) = 1.0;
    }
  ad::Var c_identity = tape.constant(Eigen::MatrixXd::Identity(dim, dim));
  ad::Var c_mask_l = tape.constant(mask_l);
  ad::Var c_mask_u = tape.constant(mask_u);
  ad::Var c_ones_col = tape.constant(Eigen::MatrixXd::Ones(dim, 1));

  ad::Var h = x;
  ad::Var log_det = tape.constant(Eigen::MatrixXd::Zero(batch, 1));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockVars& bv = blocks[i];
    const bool swapped = FlowModel::coupling_swapped(static_cast<int>(i));
    // actnorm
    h = ad::add_rowvec(ad::mul_rowvec(h, bv.act_scale), bv.act_bias);
    log_det = ad::add_scalar_var(log_det, ad::sum(ad::log(ad::abs(bv.act_scale))));
    // invertible linear: M = (I + tril(lower)) (triu(upper) + diag(exp(log_diag)))
    ad::Var l = ad::add(c_identity, ad::mul(c_mask_l, bv.lower_raw));
    ad::Var diag = ad::mul(c_identity, ad::matmul(c_ones_col, ad::exp(bv.log_diag)));
    ad::Var u = ad::add(ad::mul(c_mask_u, bv.upper_raw), diag);
    ad::Var mlin = ad::matmul(l, u);
    h = ad::matmul(h, ad::transpose(mlin));
    log_det = ad::add_scalar_var(log_det, ad::sum(bv.log_diag));
    // coupling
    int p_at, p_n, a_at, a_n;
    split_sizes(dim, swapped, p_at, p_n, a_at, a_n);
    ad::Var passive = ad::cols(h, p_at, p_n);
    ad::Var active = ad::cols(h, a_at, a_n);
    ad::Var hidden = ad::relu(ad::add_rowvec(ad::matmul(passive, bv.w1), bv.b1));
    ad::Var params2 = ad::add_rowvec(ad::matmul(hidden, bv.w2), bv.b2);
    ad::Var raw_s = ad::cols(params2, 0, a_n);
    ad::Var shift = ad::cols(params2, a_n, a_n);
    ad::Var s = ad::mul_scalar(ad::tanh(ad::mul_scalar(raw_s, 1.0 / kCouplingClamp)),
                               kCouplingClamp);
    ad::Var active2 = ad::mul(ad::sub(active, shift), ad::exp(ad::neg(s)));
    h = swapped ? ad::concat_cols({active2, passive}) : ad::concat_cols({passive, active2});
    log_det = ad::sub(log_det, ad::sum_cols(s));
  }
  ad::Var nll = ad::add_scalar(ad::mul_scalar(ad::sum_cols(ad::square(h)), 0.5),
                               0.5 * dim * std::log(2.0 * kPi));
  nll = ad::sub(nll, log_det);
  return ad::mean(nll);
}

namespace graph {

ad::Var normalize_pose2d(ad::Var x, const Topology& topo) {
  const int dim = x.cols();
  require(dim == 2 * topo.joint_count, "normalize_pose2d: width mismatch");
  // Root centering is linear: one constant matrix multiply.
  Eigen::MatrixXd center = Eigen::MatrixXd::Identity(dim, dim);
  for (int j = 0; j < topo.joint_count; ++j) {
    center(2 * j, 2 * topo.root_index) -= 1.0;
    center(2 * j + 1, 2 * topo.root_index + 1) -= 1.0;
  }
  ad::Var centered = ad::matmul(x, x.tape->constant(center.transpose()));
  ad::Var head = graph::joint_cols(x, topo.head_index, 2);
  ad::Var root = graph::joint_cols(x, topo.root_index, 2);
  ad::Var dist = ad::max_with(ad::rowwise_norm2(ad::sub(head, root)), 1e-8);
  ad::Var inv = ad::div(x.tape->constant(Eigen::MatrixXd::Ones(x.rows(), 1)), dist);
  return ad::mul_colvec(centered, inv);
}

ad::Var nf(ad::Tape& tape, ad::Var x_raw, const FlowGraph& fg, const FlowModel& shape,
           const Topology& topo) {
  return fg.mean_nll(tape, normalize_pose2d(x_raw, topo), shape);
}

}  // namespace graph

FlowTrainResult train_flow(const std::vector<Eigen::VectorXd>& poses,
                           const FlowTrainConfig& config) {
  require(!poses.empty(), "train_flow: empty dataset");
  require(static_cast<int>(poses.size()) >= config.min_poses,
          "train_flow: need at least " + std::to_string(config.min_poses) + " poses, got " +
              std::to_string(poses.size()));
  const int dim = static_cast<int>(poses[0].size());
  for (const auto& p : poses)
    require(static_cast<int>(p.size()) == dim, "train_flow: inconsistent pose lengths");
  require(config.epochs >= 1 && config.batch >= 1, "train_flow: bad epochs/batch");

  Rng rng(config.seed);
  FlowTrainResult result;
  result.model = FlowModel::init(dim, config.depth, config.hidden, rng);
  FlowModel& model = result.model;

  // Data-dependent actnorm initialization from the first batch: each block's
  // input is standardized per dimension, propagating through the blocks in
  // order.
  const int init_n = std::min<int>(config.batch, static_cast<int>(poses.size()));
  Eigen::MatrixXd h0(init_n, dim);
  for (int i = 0; i < init_n; ++i) h0.row(i) = poses[i].transpose();
  if (config.jitter > 0.0) {
    for (int i = 0; i < init_n; ++i) {
      for (int d = 0; d < dim; ++d) h0(i, d) += config.jitter * rng.normal();
    }
  }
  for (std::size_t bi = 0; bi < model.blocks.size(); ++bi) {
    FlowBlock& b = model.blocks[bi];
    const Eigen::RowVectorXd mean = h0.colwise().mean();
    Eigen::RowVectorXd stddev(dim);
    for (int d = 0; d < dim; ++d) {
      const double var = (h0.col(d).array() - mean[d]).square().mean();
      stddev[d] = std::max(std::sqrt(var), 1e-6);
    }
    b.act_scale = stddev.cwiseInverse();
    b.act_bias = -mean.cwiseProduct(stddev.cwiseInverse());
    const bool swapped = FlowModel::coupling_swapped(static_cast<int>(bi));
    for (int i = 0; i < init_n; ++i) {
      Eigen::VectorXd h = h0.row(i).transpose();
      h = apply_actnorm(b, h);
      h = apply_invlinear(b, h);
      h = apply_coupling(b, h, swapped);
      h0.row(i) = h.transpose();
    }
  }
  model.actnorm_ready = true;

  AdamWConfig opt_cfg;
  opt_cfg.lr = config.lr;
  opt_cfg.weight_decay = config.weight_decay;
  AdamW opt(opt_cfg);
  std::vector<Eigen::MatrixXd*> param_ptrs = flow_param_ptrs(model);

  FlowModel last_good = model;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = rng.permutation(poses.size());
    double epoch_loss = 0.0;
    long batches = 0;
    for (std::size_t at = 0; at < order.size(); at += config.batch) {
      const int n = static_cast<int>(std::min<std::size_t>(config.batch, order.size() - at));
      Eigen::MatrixXd batch(n, dim);
      for (int i = 0; i < n; ++i) batch.row(i) = poses[order[at + i]].transpose();
      if (config.jitter > 0.0) {
        for (int i = 0; i < n; ++i) {
          for (int d = 0; d < dim; ++d) batch(i, d) += config.jitter * rng.normal();
        }
      }
      ad::Tape tape;
      FlowGraph fg = FlowGraph::attach(tape, model, true);
      ad::Var x = tape.constant(batch);
      ad::Var loss = fg.mean_nll(tape, x, model);
      if (!std::isfinite(loss.scalar())) {
        result.model = last_good;
        result.diverged = true;
        return result;
      }
      tape.backward(loss);
      std::vector<Eigen::MatrixXd> grads;
      grads.reserve(fg.params.size());
      for (const auto& [name, var] : fg.params) grads.push_back(tape.grad(var));
      opt.step(param_ptrs, grads);
      epoch_loss += loss.scalar();
      ++batches;
    }
    result.trace.push_back(epoch_loss / static_cast<double>(batches));
    last_good = model;
  }
  return result;
}

Checkpoint FlowModel::to_checkpoint() const {
  Checkpoint ck;
  ck.kind = "flow";
  ck.meta["dim"] = std::to_string(dim);
  ck.meta["hidden"] = std::to_string(hidden);
  ck.meta["depth"] = std::to_string(blocks.size());
  ck.meta["actnorm_ready"] = actnorm_ready ? "1" : "0";
  ck.meta["normalization"] = normalization;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const FlowBlock& b = blocks[i];
    const std::string p = "blocks." + std::to_string(i) + ".";
    ck.add(p + "act_scale", b.act_scale);
    ck.add(p + "act_bias", b.act_bias);
    ck.add(p + "lower", b.lower_raw);
    ck.add(p + "upper", b.upper_raw);
    ck.add(p + "log_diag", b.log_diag);
    ck.add(p + "coupling.w1", b.coupling.w1);
    ck.add(p + "coupling.b1", b.coupling.b1);
    ck.add(p + "coupling.w2", b.coupling.w2);
    ck.add(p + "coupling.b2", b.coupling.b2);
  }
  return ck;
}

FlowModel FlowModel::from_checkpoint(const Checkpoint& ck) {
  require(ck.kind == "flow", "flow: checkpoint kind is '" + ck.kind + "', expected 'flow'");
  FlowModel m;
  m.dim = std::stoi(ck.meta_at("dim"));
  m.hidden = std::stoi(ck.meta_at("hidden"));
  const int depth = std::stoi(ck.meta_at("depth"));
  m.actnorm_ready = ck.meta_at("actnorm_ready") == "1";
  m.normalization = ck.meta_at("normalization");
  m.blocks.resize(depth);
  for (int i = 0; i < depth; ++i) {
    FlowBlock& b = m.blocks[i];
    const std::string p = "blocks." + std::to_string(i) + ".";
    b.act_scale = ck.tensor(p + "act_scale");
    b.act_bias = ck.tensor(p + "act_bias");
    b.lower_raw = ck.tensor(p + "lower");
    b.upper_raw = ck.tensor(p + "upper");
    b.log_diag = ck.tensor(p + "log_diag");
    b.coupling.w1 = ck.tensor(p + "coupling.w1");
    b.coupling.b1 = ck.tensor(p + "coupling.b1");
    b.coupling.w2 = ck.tensor(p + "coupling.w2");
    b.coupling.b2 = ck.tensor(p + "coupling.b2");
  }
  m.validate();
  return m;
}

}  // namespace poselift
