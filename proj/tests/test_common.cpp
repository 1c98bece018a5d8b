// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <set>
#include <vector>

#include "doctest.h"
#include "poselift/common.hpp"

using namespace poselift;

TEST_CASE("rng determinism and stream separation") {
  Rng a(42), b(42), c(43);
  bool all_equal = true;
  bool any_diff_seed = false;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t x = a.next_u64();
    all_equal = all_equal && (x == b.next_u64());
    any_diff_seed = any_diff_seed || (x != c.next_u64());
  }
  CHECK(all_equal);
  CHECK(any_diff_seed);
}

TEST_CASE("rng substream is a function of (seed, id), not draw position") {
  Rng parent(7);
  Rng s1 = parent.substream(5);
  for (int i = 0; i < 17; ++i) parent.uniform();  // advance the parent
  Rng s2 = parent.substream(5);
  for (int i = 0; i < 100; ++i) CHECK(s1.next_u64() == s2.next_u64());

  Rng other = Rng(7).substream(6);
  CHECK(Rng(7).substream(5).next_u64() != other.next_u64());
}

TEST_CASE("uniform stays inside bounds") {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = rng.uniform(-3.0, 2.5);
    CHECK(v >= -3.0);
    CHECK(v < 2.5);
  }
}

TEST_CASE("normal has roughly standard moments") {
  Rng rng(11);
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("permutation covers every index once") {
  Rng rng(3);
  const auto p = rng.permutation(257);
  std::set<std::size_t> seen(p.begin(), p.end());
  CHECK(p.size() == 257);
  CHECK(seen.size() == 257);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 256);
}

TEST_CASE("uniform_index bounds") {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) CHECK(rng.uniform_index(7) < 7);
}

TEST_CASE("format_g17 round-trips doubles bit-exactly") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double mag = std::pow(10.0, rng.uniform(-300.0, 300.0));
    const double x = (rng.uniform() - 0.5) * mag;
    const double back = parse_double(format_g17(x));
    CHECK(back == x);
  }
  CHECK(parse_double(format_g17(0.0)) == 0.0);
  CHECK(parse_double(format_g17(1e-310)) == 1e-310);  // subnormal
  CHECK(parse_double(format_g17(0.1)) == 0.1);
}

TEST_CASE("parse_double rejects garbage") {
  CHECK_THROWS_AS(parse_double("1.5x"), InputError);
  CHECK_THROWS_AS(parse_double(""), InputError);
  CHECK_THROWS_AS(parse_double("abc"), InputError);
  CHECK(parse_double("-2.5e3") == -2500.0);
}

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_string("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_string("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("sha256_file matches sha256_string") {
  const std::filesystem::path p = std::filesystem::temp_directory_path() / "poselift_sha.txt";
  {
    std::ofstream out(p, std::ios::binary);
    out << "abc";
  }
  CHECK(sha256_file(p) == sha256_string("abc"));
  std::filesystem::remove(p);
}

TEST_CASE("require and require_finite") {
  CHECK_NOTHROW(require(true, "fine"));
  CHECK_THROWS_AS(require(false, "boom"), InputError);

  Eigen::VectorXd v(3);
  v << 1.0, 2.0, 3.0;
  CHECK_NOTHROW(require_finite(v, "v"));
  v(1) = std::nan("");
  CHECK_THROWS_AS(require_finite(v, "v"), NumericalError);
  v(1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(require_finite(v, "v"), NumericalError);
}

TEST_CASE("radians and degrees invert") {
  CHECK(radians(180.0) == doctest::Approx(kPi).epsilon(1e-15));
  CHECK(degrees(radians(73.5)) == doctest::Approx(73.5).epsilon(1e-12));
}
