// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include "poselift/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "poselift/common.hpp"

namespace poselift {

namespace {
constexpr const char* kMagic = "poselift-checkpoint";
constexpr const char* kVersion = "v1";
}  // namespace

void Checkpoint::add(const std::string& name, const Eigen::MatrixXd& tensor) {
  require(!has_tensor(name), "checkpoint: duplicate tensor " + name);
  tensors.emplace_back(name, tensor);
}

bool Checkpoint::has_tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return true;
  return false;
}

const Eigen::MatrixXd& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw InputError("checkpoint: missing tensor " + name);
}

const std::string& Checkpoint::meta_at(const std::string& name) const {
  const auto it = meta.find(name);
  if (it == meta.end()) throw InputError("checkpoint: missing metadata " + name);
  return it->second;
}

std::string Checkpoint::serialize() const {
  std::ostringstream out;
  out << kMagic << ' ' << kVersion << '\n';
  out << "kind " << kind << '\n';
  for (const auto& [key, value] : meta) out << "meta " << key << ' ' << value << '\n';
  for (const auto& [name, t] : tensors) {
    out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (long r = 0; r < t.rows(); ++r) {
      for (long c = 0; c < t.cols(); ++c) {
        if (c) out << ' ';
        out << format_g17(t(r, c));
      }
      out << '\n';
    }
  }
  out << "end\n";
  return out.str();
}

Checkpoint Checkpoint::deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line))
      throw InputError(std::string("checkpoint: unexpected end of file, expected ") + what);
    ++line_no;
    return line;
  };
  auto fail = [&](const std::string& msg) -> void {
    throw InputError("checkpoint: line " + std::to_string(line_no) + ": " + msg);
  };

  next_line("header");
  {
    std::istringstream head(line);
    std::string magic, version;
    head >> magic >> version;
    if (magic != kMagic) fail("not a checkpoint file");
    if (version != kVersion) fail("unsupported version '" + version + "'");
  }
  Checkpoint ck;
  next_line("kind");
  {
    std::istringstream ks(line);
    std::string tag;
    ks >> tag >> ck.kind;
    if (tag != "kind" || ck.kind.empty()) fail("expected 'kind <name>'");
  }
  while (true) {
    next_line("'tensor' or 'end'");
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "end") break;
    if (tag == "meta") {
      std::string key;
      ls >> key;
      if (key.empty()) fail("meta entry without a key");
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ck.meta[key] = value;
      continue;
    }
    if (tag != "tensor") fail("expected 'meta', 'tensor' or 'end', got '" + tag + "'");
    std::string name;
    long rows = -1, cols = -1;
    ls >> name >> rows >> cols;
    if (name.empty() || rows < 0 || cols < 0) fail("malformed tensor header");
    Eigen::MatrixXd t(rows, cols);
    for (long r = 0; r < rows; ++r) {
      next_line("tensor row");
      std::istringstream rs(line);
      for (long c = 0; c < cols; ++c) {
        std::string tok;
        if (!(rs >> tok)) fail("tensor " + name + ": row has too few values");
        t(r, c) = parse_double(tok);
      }
      std::string extra;
      if (rs >> extra) fail("tensor " + name + ": row has trailing values");
    }
    ck.tensors.emplace_back(name, std::move(t));
  }
  return ck;
}

void Checkpoint::save(const std::filesystem::path& p) const {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint: " + p.string());
  out << serialize();
}

Checkpoint Checkpoint::load(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot read checkpoint: " + p.string() + " (run the producing stage first)");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace poselift
