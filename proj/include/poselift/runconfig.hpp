// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "poselift/data.hpp"
#include "poselift/liftnet.hpp"
#include "poselift/normflow.hpp"
#include "poselift/regnet.hpp"

namespace poselift {

struct FeatureConfig {
  int width = 64;
  double noise = 0.01;
  std::uint64_t seed = 1;
};

/// One config object covering every stage. Values default to the published
/// training hyperparameters where those exist and to desk-scale choices
/// otherwise; a JSON file overrides defaults and CLI flags override both.
/// A section-level "seed" falls back to the top-level one.
struct RunConfig {
  std::uint64_t seed = 1;
  SyntheticConfig synthetic;
  FlowTrainConfig flow;
  LiftTrainConfig lift;
  RegTrainConfig reg;
  FeatureConfig features;

  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  /// Fully resolved snapshot (every field explicit); embedded in manifests.
  std::string to_json_text() const;
};

/// Reproducibility manifest: subcommand, resolved config, content hashes of
/// every input file, and the list of outputs. Contains no timestamps, so a
/// bit-identical rerun produces a bit-identical manifest.
void write_manifest(const std::filesystem::path& path, const std::string& subcommand,
                    const RunConfig& config,
                    const std::vector<std::pair<std::string, std::filesystem::path>>& inputs,
                    const std::vector<std::filesystem::path>& outputs);

/// Per-epoch loss trace as a two-column CSV.
void write_trace_csv(const std::filesystem::path& path, const std::vector<double>& trace);

}  // namespace poselift
