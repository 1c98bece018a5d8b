// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "poselift/autodiff.hpp"
#include "poselift/common.hpp"

namespace poselift {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Adam with decoupled weight decay:
///   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
/// Moments are keyed by parameter position, so updates are independent of
/// any naming and deterministic.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config) : config_(config) {}

  void step(const std::vector<Eigen::MatrixXd*>& params,
            const std::vector<Eigen::MatrixXd>& grads);

  long step_count() const { return step_; }
  const AdamWConfig& config() const { return config_; }

 private:
  AdamWConfig config_;
  long step_ = 0;
  std::vector<Eigen::MatrixXd> m_;
  std::vector<Eigen::MatrixXd> v_;
};

/// Rescales negative-log-likelihood loss terms into [0,1] using running
/// min/max statistics before applying fixed weights. Non-NLL terms pass
/// through unscaled. During the warmup window NLL terms contribute weight 0
/// and only update statistics; afterwards the running extremes only expand.
class LossBalancer {
 public:
  struct Config {
    long warmup_steps = 100;
    double eps = 1e-8;
  };

  LossBalancer(std::vector<std::string> nll_terms, std::map<std::string, double> weights);
  LossBalancer(std::vector<std::string> nll_terms, std::map<std::string, double> weights,
               Config config);

  /// Builds the weighted total on the tape. Observes NLL term values
  /// (updating statistics), then maps each to (L - min)/(max - min + eps)
  /// as a constant affine transform. Advances the step counter once.
  ad::Var total(ad::Tape& tape, const std::vector<std::pair<std::string, ad::Var>>& terms);

  /// Same combination on plain scalars, without touching statistics.
  double total_value(const std::vector<std::pair<std::string, double>>& terms) const;

  double weight(const std::string& term) const;
  bool is_nll(const std::string& term) const;
  bool warmed_up() const { return step_ >= config_.warmup_steps; }
  long step() const { return step_; }

  /// Statistics as a flat tensor for checkpointing: one row per NLL term
  /// (min, max, seen) plus a final row holding the step counter.
  Eigen::MatrixXd state_tensor() const;
  void load_state_tensor(const Eigen::MatrixXd& state);
  const std::vector<std::string>& nll_terms() const { return nll_terms_; }

 private:
  struct Stats {
    double min = 0.0;
    double max = 0.0;
    bool seen = false;
  };
  Config config_;
  std::vector<std::string> nll_terms_;
  std::map<std::string, double> weights_;
  std::map<std::string, Stats> stats_;
  long step_ = 0;

  void observe(const std::string& term, double value);
  std::pair<double, double> affine(const std::string& term) const;  // (scale, shift)
};

}  // namespace poselift
