// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include "poselift/optim.hpp"

#include <cmath>

namespace poselift {

void AdamW::step(const std::vector<Eigen::MatrixXd*>& params,
                 const std::vector<Eigen::MatrixXd>& grads) {
  require(params.size() == grads.size(), "adamw: params/grads count mismatch");
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = Eigen::MatrixXd::Zero(params[i]->rows(), params[i]->cols());
      v_[i] = Eigen::MatrixXd::Zero(params[i]->rows(), params[i]->cols());
    }
  }
  require(m_.size() == params.size(), "adamw: parameter count changed between steps");
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::MatrixXd& p = *params[i];
    const Eigen::MatrixXd& g = grads[i];
    require(p.rows() == g.rows() && p.cols() == g.cols(), "adamw: gradient shape mismatch");
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    const Eigen::MatrixXd m_hat = m_[i] / bc1;
    const Eigen::MatrixXd v_hat = v_[i] / bc2;
    const Eigen::MatrixXd update =
        (m_hat.array() / (v_hat.array().sqrt() + config_.eps)).matrix() +
        config_.weight_decay * p;
    p -= config_.lr * update;
  }
}

LossBalancer::LossBalancer(std::vector<std::string> nll_terms,
                           std::map<std::string, double> weights)
    : LossBalancer(std::move(nll_terms), std::move(weights), Config{}) {}

LossBalancer::LossBalancer(std::vector<std::string> nll_terms,
                           std::map<std::string, double> weights, Config config)
    : config_(config), nll_terms_(std::move(nll_terms)), weights_(std::move(weights)) {
  for (const auto& name : nll_terms_) stats_[name] = Stats{};
}

bool LossBalancer::is_nll(const std::string& term) const { return stats_.count(term) > 0; }

double LossBalancer::weight(const std::string& term) const {
  const auto it = weights_.find(term);
  return it == weights_.end() ? 1.0 : it->second;
}

void LossBalancer::observe(const std::string& term, double value) {
  require(std::isfinite(value), "balance: non-finite value for term " + term);
  Stats& s = stats_.at(term);
  if (!s.seen) {
    s.min = s.max = value;
    s.seen = true;
  } else {
    // Extremes only expand; the vertical shift and span never shrink.
    s.min = std::min(s.min, value);
    s.max = std::max(s.max, value);
  }
}

std::pair<double, double> LossBalancer::affine(const std::string& term) const {
  const Stats& s = stats_.at(term);
  const double scale = 1.0 / (s.max - s.min + config_.eps);
  return {scale, -s.min * scale};
}

ad::Var LossBalancer::total(ad::Tape& tape,
                            const std::vector<std::pair<std::string, ad::Var>>& terms) {
  ad::Var acc = tape.constant_scalar(0.0);
  for (const auto& [name, value] : terms) {
    require(value.rows() == 1 && value.cols() == 1, "balance: term " + name + " is not scalar");
    if (is_nll(name)) {
      observe(name, value.scalar());
      if (!warmed_up()) continue;
      const auto [scale, shift] = affine(name);
      ad::Var scaled = ad::add_scalar(ad::mul_scalar(value, scale), shift);
      acc = ad::add(acc, ad::mul_scalar(scaled, weight(name)));
    } else {
      acc = ad::add(acc, ad::mul_scalar(value, weight(name)));
    }
  }
  ++step_;
  return acc;
}

double LossBalancer::total_value(const std::vector<std::pair<std::string, double>>& terms) const {
  double acc = 0.0;
  for (const auto& [name, value] : terms) {
    if (is_nll(name)) {
      if (!warmed_up()) continue;
      require(stats_.at(name).seen, "balance: no statistics for term " + name);
      const auto [scale, shift] = affine(name);
      acc += weight(name) * (value * scale + shift);
    } else {
      acc += weight(name) * value;
    }
  }
  return acc;
}

Eigen::MatrixXd LossBalancer::state_tensor() const {
  Eigen::MatrixXd state(nll_terms_.size() + 1, 3);
  for (std::size_t i = 0; i < nll_terms_.size(); ++i) {
    const Stats& s = stats_.at(nll_terms_[i]);
    state(i, 0) = s.min;
    state(i, 1) = s.max;
    state(i, 2) = s.seen ? 1.0 : 0.0;
  }
  state(nll_terms_.size(), 0) = static_cast<double>(step_);
  state(nll_terms_.size(), 1) = 0.0;
  state(nll_terms_.size(), 2) = 0.0;
  return state;
}

void LossBalancer::load_state_tensor(const Eigen::MatrixXd& state) {
  require(state.rows() == static_cast<long>(nll_terms_.size()) + 1 && state.cols() == 3,
          "balance: state tensor shape mismatch");
  for (std::size_t i = 0; i < nll_terms_.size(); ++i) {
    Stats& s = stats_.at(nll_terms_[i]);
    s.min = state(i, 0);
    s.max = state(i, 1);
    s.seen = state(i, 2) != 0.0;
  }
  step_ = static_cast<long>(state(nll_terms_.size(), 0));
}

}  // namespace poselift
