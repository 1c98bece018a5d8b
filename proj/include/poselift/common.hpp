// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace poselift {

/// Bad user input: malformed files, dimension mismatches, invalid configs.
/// CLI maps this to exit code 1.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: singular projections, diverged training, NaN losses.
/// CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

constexpr double kPi = 3.14159265358979323846;

inline double radians(double degrees) { return degrees * kPi / 180.0; }
inline double degrees(double radians) { return radians * 180.0 / kPi; }

/// Counter-based deterministic RNG (xoshiro256++ seeded through splitmix64).
/// Self-contained so streams are reproducible bit-for-bit across platforms,
/// which std:: distributions do not guarantee.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Standard normal (Box-Muller, cached spare).
  double normal();
  double normal(double mean, double stddev);
  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n);

  /// Independent stream derived from (base seed, id); used for per-record
  /// generation so parallel order cannot change results.
  Rng substream(std::uint64_t id) const;

  /// Fisher-Yates over indices 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t state_[4];
  std::uint64_t base_seed_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Shortest decimal form that round-trips a double exactly (17 significant
/// digits); used by every text serializer so reruns are byte-identical.
std::string format_g17(double v);

/// Parse a double, rejecting trailing garbage.
double parse_double(const std::string& s);

/// Hex SHA-256 of a file's bytes; used for run manifests.
std::string sha256_file(const std::filesystem::path& p);
/// Hex SHA-256 of a string.
std::string sha256_string(const std::string& s);

void require(bool cond, const std::string& msg);
void require_finite(const Eigen::Ref<const Eigen::VectorXd>& v, const std::string& what);

}  // namespace poselift
