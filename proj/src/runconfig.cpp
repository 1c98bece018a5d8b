// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include "poselift/runconfig.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "poselift/common.hpp"

namespace poselift {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& section, const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw InputError("config: unknown key '" + it.key() + "' in " + section);
    }
  }
}

const json* find(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double get_num(const json& obj, const std::string& section, const std::string& key, double fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) throw InputError("config: " + section + "." + key + ": expected a number");
  return v->get<double>();
}

long get_long(const json& obj, const std::string& section, const std::string& key, long fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) throw InputError("config: " + section + "." + key + ": expected an integer");
  return v->get<long>();
}

int get_int(const json& obj, const std::string& section, const std::string& key, int fallback) {
  return static_cast<int>(get_long(obj, section, key, fallback));
}

bool get_bool(const json& obj, const std::string& section, const std::string& key, bool fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw InputError("config: " + section + "." + key + ": expected a boolean");
  return v->get<bool>();
}

std::uint64_t get_seed(const json& obj, const std::string& section, std::uint64_t fallback) {
  const json* v = find(obj, "seed");
  if (!v) return fallback;
  if (!v->is_number_unsigned() && !v->is_number_integer()) {
    throw InputError("config: " + section + ".seed: expected an integer");
  }
  return v->get<std::uint64_t>();
}

void parse_synthetic(const json& obj, std::uint64_t top_seed, SyntheticConfig& c) {
  const std::string s = "synthetic";
  check_keys(obj, s,
             {"count", "seed", "knee_fold_max_deg", "elbow_fold_max_deg", "hip_swing_deg",
              "hip_spread_deg", "shoulder_swing_deg", "shoulder_spread_deg", "torso_lean_deg",
              "yaw_deg", "scale_jitter", "bone_jitter", "dist_min_mm", "dist_max_mm",
              "elev_min_deg", "elev_max_deg", "azim_deg", "full_min_px", "full_max_px", "net_w",
              "net_h", "crop_pad_px", "crop_slack_max", "mu_h", "noise_px", "joint_noise_scale"});
  c.count = get_long(obj, s, "count", c.count);
  c.seed = get_seed(obj, s, top_seed);
  c.knee_fold_max_deg = get_num(obj, s, "knee_fold_max_deg", c.knee_fold_max_deg);
  c.elbow_fold_max_deg = get_num(obj, s, "elbow_fold_max_deg", c.elbow_fold_max_deg);
  c.hip_swing_deg = get_num(obj, s, "hip_swing_deg", c.hip_swing_deg);
  c.hip_spread_deg = get_num(obj, s, "hip_spread_deg", c.hip_spread_deg);
  c.shoulder_swing_deg = get_num(obj, s, "shoulder_swing_deg", c.shoulder_swing_deg);
  c.shoulder_spread_deg = get_num(obj, s, "shoulder_spread_deg", c.shoulder_spread_deg);
  c.torso_lean_deg = get_num(obj, s, "torso_lean_deg", c.torso_lean_deg);
  c.yaw_deg = get_num(obj, s, "yaw_deg", c.yaw_deg);
  c.scale_jitter = get_num(obj, s, "scale_jitter", c.scale_jitter);
  c.bone_jitter = get_num(obj, s, "bone_jitter", c.bone_jitter);
  c.dist_min_mm = get_num(obj, s, "dist_min_mm", c.dist_min_mm);
  c.dist_max_mm = get_num(obj, s, "dist_max_mm", c.dist_max_mm);
  c.elev_min_deg = get_num(obj, s, "elev_min_deg", c.elev_min_deg);
  c.elev_max_deg = get_num(obj, s, "elev_max_deg", c.elev_max_deg);
  c.azim_deg = get_num(obj, s, "azim_deg", c.azim_deg);
  c.full_min_px = get_num(obj, s, "full_min_px", c.full_min_px);
  c.full_max_px = get_num(obj, s, "full_max_px", c.full_max_px);
  c.net_w = get_num(obj, s, "net_w", c.net_w);
  c.net_h = get_num(obj, s, "net_h", c.net_h);
  c.crop_pad_px = get_num(obj, s, "crop_pad_px", c.crop_pad_px);
  c.crop_slack_max = get_num(obj, s, "crop_slack_max", c.crop_slack_max);
  c.mu_h = get_num(obj, s, "mu_h", c.mu_h);
  c.noise_px = get_num(obj, s, "noise_px", c.noise_px);
  if (const json* v = find(obj, "joint_noise_scale")) {
    if (!v->is_array()) throw InputError("config: synthetic.joint_noise_scale: expected an array");
    c.joint_noise_scale.resize(static_cast<long>(v->size()));
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) {
        throw InputError("config: synthetic.joint_noise_scale: expected numbers");
      }
      c.joint_noise_scale(static_cast<long>(i)) = (*v)[i].get<double>();
    }
  }
}

void parse_flow(const json& obj, std::uint64_t top_seed, FlowTrainConfig& c) {
  const std::string s = "flow";
  check_keys(obj, s,
             {"depth", "hidden", "epochs", "batch", "lr", "weight_decay", "seed", "min_poses",
              "jitter"});
  c.depth = get_int(obj, s, "depth", c.depth);
  c.hidden = get_int(obj, s, "hidden", c.hidden);
  c.epochs = get_int(obj, s, "epochs", c.epochs);
  c.batch = get_int(obj, s, "batch", c.batch);
  c.lr = get_num(obj, s, "lr", c.lr);
  c.weight_decay = get_num(obj, s, "weight_decay", c.weight_decay);
  c.seed = get_seed(obj, s, top_seed);
  c.min_poses = get_int(obj, s, "min_poses", c.min_poses);
  c.jitter = get_num(obj, s, "jitter", c.jitter);
}

void parse_lift(const json& obj, std::uint64_t top_seed, LiftTrainConfig& c) {
  const std::string s = "liftnet";
  check_keys(obj, s,
             {"epochs", "batch", "lr", "weight_decay", "dim_l", "seed", "balancer_warmup",
              "use_nf_term"});
  c.epochs = get_int(obj, s, "epochs", c.epochs);
  c.batch = get_int(obj, s, "batch", c.batch);
  c.lr = get_num(obj, s, "lr", c.lr);
  c.weight_decay = get_num(obj, s, "weight_decay", c.weight_decay);
  c.dim_l = get_int(obj, s, "dim_l", c.dim_l);
  c.seed = get_seed(obj, s, top_seed);
  c.balancer_warmup = get_long(obj, s, "balancer_warmup", c.balancer_warmup);
  c.use_nf_term = get_bool(obj, s, "use_nf_term", c.use_nf_term);
}

void parse_reg(const json& obj, std::uint64_t top_seed, RegTrainConfig& c) {
  const std::string s = "regnet";
  check_keys(obj, s,
             {"epochs", "batch", "lr", "weight_decay", "seed", "balancer_warmup", "depth_prior_mm"});
  c.epochs = get_int(obj, s, "epochs", c.epochs);
  c.batch = get_int(obj, s, "batch", c.batch);
  c.lr = get_num(obj, s, "lr", c.lr);
  c.weight_decay = get_num(obj, s, "weight_decay", c.weight_decay);
  c.seed = get_seed(obj, s, top_seed);
  c.balancer_warmup = get_long(obj, s, "balancer_warmup", c.balancer_warmup);
  c.depth_prior_mm = get_num(obj, s, "depth_prior_mm", c.depth_prior_mm);
}

void parse_features(const json& obj, std::uint64_t top_seed, FeatureConfig& c) {
  const std::string s = "features";
  check_keys(obj, s, {"width", "noise", "seed"});
  c.width = get_int(obj, s, "width", c.width);
  c.noise = get_num(obj, s, "noise", c.noise);
  c.seed = get_seed(obj, s, top_seed);
}

json section_or_empty(const json& root, const std::string& key) {
  const json* v = find(root, key);
  if (!v) return json::object();
  if (!v->is_object()) throw InputError("config: '" + key + "' must be an object");
  return *v;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  if (!root.is_object()) throw InputError("config: top level must be an object");
  check_keys(root, "config", {"seed", "synthetic", "flow", "liftnet", "regnet", "features"});

  RunConfig cfg;
  cfg.seed = get_seed(root, "config", cfg.seed);
  cfg.synthetic.seed = cfg.flow.seed = cfg.lift.seed = cfg.reg.seed = cfg.features.seed = cfg.seed;
  parse_synthetic(section_or_empty(root, "synthetic"), cfg.seed, cfg.synthetic);
  parse_flow(section_or_empty(root, "flow"), cfg.seed, cfg.flow);
  parse_lift(section_or_empty(root, "liftnet"), cfg.seed, cfg.lift);
  parse_reg(section_or_empty(root, "regnet"), cfg.seed, cfg.reg);
  parse_features(section_or_empty(root, "features"), cfg.seed, cfg.features);
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::string RunConfig::to_json_text() const {
  json root;
  root["seed"] = seed;

  json& sy = root["synthetic"];
  sy["count"] = synthetic.count;
  sy["seed"] = synthetic.seed;
  sy["knee_fold_max_deg"] = synthetic.knee_fold_max_deg;
  sy["elbow_fold_max_deg"] = synthetic.elbow_fold_max_deg;
  sy["hip_swing_deg"] = synthetic.hip_swing_deg;
  sy["hip_spread_deg"] = synthetic.hip_spread_deg;
  sy["shoulder_swing_deg"] = synthetic.shoulder_swing_deg;
  sy["shoulder_spread_deg"] = synthetic.shoulder_spread_deg;
  sy["torso_lean_deg"] = synthetic.torso_lean_deg;
  sy["yaw_deg"] = synthetic.yaw_deg;
  sy["scale_jitter"] = synthetic.scale_jitter;
  sy["bone_jitter"] = synthetic.bone_jitter;
  sy["dist_min_mm"] = synthetic.dist_min_mm;
  sy["dist_max_mm"] = synthetic.dist_max_mm;
  sy["elev_min_deg"] = synthetic.elev_min_deg;
  sy["elev_max_deg"] = synthetic.elev_max_deg;
  sy["azim_deg"] = synthetic.azim_deg;
  sy["full_min_px"] = synthetic.full_min_px;
  sy["full_max_px"] = synthetic.full_max_px;
  sy["net_w"] = synthetic.net_w;
  sy["net_h"] = synthetic.net_h;
  sy["crop_pad_px"] = synthetic.crop_pad_px;
  sy["crop_slack_max"] = synthetic.crop_slack_max;
  sy["mu_h"] = synthetic.mu_h;
  sy["noise_px"] = synthetic.noise_px;
  sy["joint_noise_scale"] = json::array();
  for (long i = 0; i < synthetic.joint_noise_scale.size(); ++i) {
    sy["joint_noise_scale"].push_back(synthetic.joint_noise_scale(i));
  }

  json& fl = root["flow"];
  fl["depth"] = flow.depth;
  fl["hidden"] = flow.hidden;
  fl["epochs"] = flow.epochs;
  fl["batch"] = flow.batch;
  fl["lr"] = flow.lr;
  fl["weight_decay"] = flow.weight_decay;
  fl["seed"] = flow.seed;
  fl["min_poses"] = flow.min_poses;
  fl["jitter"] = flow.jitter;

  json& li = root["liftnet"];
  li["epochs"] = lift.epochs;
  li["batch"] = lift.batch;
  li["lr"] = lift.lr;
  li["weight_decay"] = lift.weight_decay;
  li["dim_l"] = lift.dim_l;
  li["seed"] = lift.seed;
  li["balancer_warmup"] = lift.balancer_warmup;
  li["use_nf_term"] = lift.use_nf_term;

  json& re = root["regnet"];
  re["epochs"] = reg.epochs;
  re["batch"] = reg.batch;
  re["lr"] = reg.lr;
  re["weight_decay"] = reg.weight_decay;
  re["seed"] = reg.seed;
  re["balancer_warmup"] = reg.balancer_warmup;
  re["depth_prior_mm"] = reg.depth_prior_mm;

  json& fe = root["features"];
  fe["width"] = features.width;
  fe["noise"] = features.noise;
  fe["seed"] = features.seed;

  return root.dump(2) + "\n";
}

void write_manifest(const std::filesystem::path& path, const std::string& subcommand,
                    const RunConfig& config,
                    const std::vector<std::pair<std::string, std::filesystem::path>>& inputs,
                    const std::vector<std::filesystem::path>& outputs) {
  json root;
  root["subcommand"] = subcommand;
  root["config"] = json::parse(config.to_json_text());
  root["inputs"] = json::object();
  for (const auto& [label, in_path] : inputs) {
    json entry;
    entry["path"] = in_path.string();
    entry["sha256"] = sha256_file(in_path);
    root["inputs"][label] = entry;
  }
  root["outputs"] = json::array();
  for (const auto& out : outputs) root["outputs"].push_back(out.string());

  std::ofstream out(path);
  if (!out) throw InputError("manifest: cannot write " + path.string());
  out << root.dump(2) << "\n";
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<double>& trace) {
  std::ofstream out(path);
  if (!out) throw InputError("trace: cannot write " + path.string());
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << i + 1 << "," << format_g17(trace[i]) << "\n";
  }
}

}  // namespace poselift
