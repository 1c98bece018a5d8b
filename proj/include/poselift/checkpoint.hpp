// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace poselift {

/// Text container for named tensors plus string metadata. All numbers are
/// written with 17 significant digits so save/load/save is byte-identical,
/// which is what the determinism guarantees rest on.
struct Checkpoint {
  std::string kind;
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;

  void add(const std::string& name, const Eigen::MatrixXd& tensor);
  bool has_tensor(const std::string& name) const;
  const Eigen::MatrixXd& tensor(const std::string& name) const;
  const std::string& meta_at(const std::string& name) const;

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& text);
  void save(const std::filesystem::path& p) const;
  static Checkpoint load(const std::filesystem::path& p);
};

}  // namespace poselift
