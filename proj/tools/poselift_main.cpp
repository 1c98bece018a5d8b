// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "poselift/camera.hpp"
#include "poselift/checkpoint.hpp"
#include "poselift/common.hpp"
#include "poselift/data.hpp"
#include "poselift/liftnet.hpp"
#include "poselift/metrics.hpp"
#include "poselift/normflow.hpp"
#include "poselift/regnet.hpp"
#include "poselift/runconfig.hpp"
#include "poselift/skeleton.hpp"

namespace fs = std::filesystem;
using namespace poselift;

namespace {

// Shared flags; only one subcommand parses per process, so one storage
// block serves them all.
struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 1;
  std::string manifest;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* sub, CommonOpts& c) {
  sub->add_option("--config", c.config_path, "Config file (JSON); flags override its values")
      ->envname("POSELIFT_CONFIG");
  c.seed_opt = sub->add_option("--seed", c.seed, "Master seed overriding every per-stage seed");
  sub->add_option("--manifest", c.manifest, "Manifest path (default: <out>.manifest.json)");
}

RunConfig resolve_config(const CommonOpts& c) {
  RunConfig cfg;
  if (!c.config_path.empty()) cfg = RunConfig::load(c.config_path);
  if (c.seed_opt && c.seed_opt->count() > 0) {
    cfg.seed = c.seed;
    cfg.synthetic.seed = cfg.flow.seed = cfg.lift.seed = cfg.reg.seed = cfg.features.seed = c.seed;
  }
  return cfg;
}

fs::path manifest_path(const CommonOpts& c, const fs::path& primary_out) {
  if (!c.manifest.empty()) return c.manifest;
  return fs::path(primary_out.string() + ".manifest.json");
}

void require_file(const fs::path& p, const std::string& cmd, const std::string& what,
                  const std::string& stage) {
  if (!fs::exists(p)) {
    throw InputError(cmd + ": " + what + " '" + p.string() + "' not found; run " + stage +
                     " first");
  }
}

std::vector<std::pair<std::string, fs::path>> base_inputs(const CommonOpts& c) {
  std::vector<std::pair<std::string, fs::path>> inputs;
  if (!c.config_path.empty()) inputs.emplace_back("config", c.config_path);
  return inputs;
}

// File-backed features when every record carries a reference, synthetic
// oracle features otherwise.
std::unique_ptr<FeatureProvider> make_provider(const Dataset& ds, const fs::path& data_path,
                                               const RunConfig& cfg, const Topology& topo) {
  bool all_refs = !ds.records.empty();
  for (const auto& rec : ds.records) {
    if (rec.features_ref.empty()) {
      all_refs = false;
      break;
    }
  }
  if (all_refs) return std::make_unique<FileFeatureProvider>(data_path.parent_path());
  return std::make_unique<SyntheticFeatureProvider>(cfg.features.width, cfg.features.noise,
                                                    cfg.features.seed, topo);
}

const SampleRecord& pick_record(const Dataset& ds, bool has_id, long id, const std::string& cmd) {
  require(!ds.records.empty(), cmd + ": dataset is empty");
  if (!has_id) return ds.records.front();
  for (const auto& rec : ds.records) {
    if (rec.id == id) return rec;
  }
  throw InputError(cmd + ": no record with id " + std::to_string(id));
}

// ---------------------------------------------------------------- gen

struct GenOpts {
  std::string out;
  std::string features_out;
  long count = 0;
  double noise_px = 0.0;
  int feature_width = 0;
  double feature_noise = 0.0;
  CLI::Option *count_o = nullptr, *noise_o = nullptr, *fwidth_o = nullptr, *fnoise_o = nullptr;
};

void run_gen(const CommonOpts& c, const GenOpts& g) {
  RunConfig cfg = resolve_config(c);
  if (g.count_o->count()) cfg.synthetic.count = g.count;
  if (g.noise_o->count()) cfg.synthetic.noise_px = g.noise_px;
  if (g.fwidth_o->count()) cfg.features.width = g.feature_width;
  if (g.fnoise_o->count()) cfg.features.noise = g.feature_noise;

  const Topology& topo = default_topology();
  Dataset ds = generate(cfg.synthetic);

  std::vector<fs::path> outputs{g.out};
  if (!g.features_out.empty()) {
    SyntheticFeatureProvider provider(cfg.features.width, cfg.features.noise, cfg.features.seed,
                                      topo);
    FeatureFile ff;
    ff.width = provider.width();
    ff.rows.reserve(ds.records.size());
    // Reference by file name only: feature files live next to the dataset.
    const std::string fname = fs::path(g.features_out).filename().string();
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      SampleRecord& rec = ds.records[i];
      ff.rows.emplace_back(rec.id, provider.features(rec));
      rec.features_ref = fname + ":" + std::to_string(i);
    }
    ff.save(g.features_out);
    outputs.emplace_back(g.features_out);
  }
  save_dataset(ds, g.out);
  write_manifest(manifest_path(c, g.out), "gen", cfg, base_inputs(c), outputs);
  std::cout << "gen: wrote " << ds.records.size() << " records to " << g.out << "\n";
}

// ---------------------------------------------------------------- train-nf

struct TrainNfOpts {
  std::string data;
  std::string out;
  std::string trace;
  int epochs = 0;
  int batch = 0;
  double lr = 0.0;
  int depth = 0;
  int hidden = 0;
  CLI::Option *epochs_o = nullptr, *batch_o = nullptr, *lr_o = nullptr, *depth_o = nullptr,
              *hidden_o = nullptr;
};

void run_train_nf(const CommonOpts& c, const TrainNfOpts& o) {
  RunConfig cfg = resolve_config(c);
  if (o.epochs_o->count()) cfg.flow.epochs = o.epochs;
  if (o.batch_o->count()) cfg.flow.batch = o.batch;
  if (o.lr_o->count()) cfg.flow.lr = o.lr;
  if (o.depth_o->count()) cfg.flow.depth = o.depth;
  if (o.hidden_o->count()) cfg.flow.hidden = o.hidden;

  require_file(o.data, "train-nf", "dataset", "gen");
  const Topology& topo = default_topology();
  Dataset ds = load_dataset(o.data);
  std::vector<Eigen::VectorXd> poses;
  poses.reserve(ds.records.size());
  for (const auto& rec : ds.records) poses.push_back(normalize_pose2d(rec.x_gt, topo));

  FlowTrainResult result = train_flow(poses, cfg.flow);

  Checkpoint ck = result.model.to_checkpoint();
  ck.meta["dataset_sha256"] = sha256_file(o.data);
  ck.save(o.out);
  fs::path trace_path = o.trace.empty() ? fs::path(o.out + ".trace.csv") : fs::path(o.trace);
  write_trace_csv(trace_path, result.trace);
  auto inputs = base_inputs(c);
  inputs.emplace_back("data", o.data);
  write_manifest(manifest_path(c, o.out), "train-nf", cfg, inputs, {o.out, trace_path});

  if (result.diverged) {
    throw NumericalError("train-nf: loss went non-finite; checkpoint holds the last stable epoch");
  }
  std::cout << "train-nf: " << result.trace.size() << " epochs";
  if (!result.trace.empty()) std::cout << ", final mean NLL " << format_g17(result.trace.back());
  std::cout << ", wrote " << o.out << "\n";
}

// ---------------------------------------------------------------- train-lift

struct TrainLiftOpts {
  std::string data;
  std::string flow;
  std::string out;
  std::string trace;
  int epochs = 0;
  int batch = 0;
  double lr = 0.0;
  int dim_l = 0;
  bool no_nf = false;
  CLI::Option *epochs_o = nullptr, *batch_o = nullptr, *lr_o = nullptr, *dim_o = nullptr;
};

void run_train_lift(const CommonOpts& c, const TrainLiftOpts& o) {
  RunConfig cfg = resolve_config(c);
  if (o.epochs_o->count()) cfg.lift.epochs = o.epochs;
  if (o.batch_o->count()) cfg.lift.batch = o.batch;
  if (o.lr_o->count()) cfg.lift.lr = o.lr;
  if (o.dim_o->count()) cfg.lift.dim_l = o.dim_l;
  if (o.no_nf) cfg.lift.use_nf_term = false;

  require_file(o.data, "train-lift", "dataset", "gen");
  require_file(o.flow, "train-lift", "flow checkpoint", "train-nf");
  const Topology& topo = default_topology();
  Dataset ds = load_dataset(o.data);
  Checkpoint fck = Checkpoint::load(o.flow);
  require(fck.kind == "flow",
          "train-lift: '" + o.flow + "' is not a flow checkpoint (kind '" + fck.kind + "')");
  FlowModel flow = FlowModel::from_checkpoint(fck);

  std::vector<LiftSample> samples;
  samples.reserve(ds.records.size());
  for (const auto& rec : ds.records) samples.push_back({rec.x_gt, rec.K, rec.E});

  LiftTrainResult result = train_liftnet(samples, flow, cfg.lift, topo);

  Checkpoint ck = lifter_checkpoint(result, topo, sha256_file(o.flow));
  ck.meta["dataset_sha256"] = sha256_file(o.data);
  ck.save(o.out);
  fs::path trace_path = o.trace.empty() ? fs::path(o.out + ".trace.csv") : fs::path(o.trace);
  write_trace_csv(trace_path, result.trace);
  auto inputs = base_inputs(c);
  inputs.emplace_back("data", o.data);
  inputs.emplace_back("flow", o.flow);
  write_manifest(manifest_path(c, o.out), "train-lift", cfg, inputs, {o.out, trace_path});

  if (result.diverged) {
    throw NumericalError(
        "train-lift: loss went non-finite; checkpoint holds the last stable epoch");
  }
  std::cout << "train-lift: " << result.trace.size() << " epochs";
  if (!result.trace.empty()) std::cout << ", final loss " << format_g17(result.trace.back());
  std::cout << ", depth floor hits " << result.depth_floor_hits << ", wrote " << o.out << "\n";
}

// ---------------------------------------------------------------- train-reg

struct TrainRegOpts {
  std::string data;
  std::string flow;
  std::string out;
  std::string trace;
  int epochs = 0;
  int batch = 0;
  double lr = 0.0;
  int feature_width = 0;
  double feature_noise = 0.0;
  CLI::Option *epochs_o = nullptr, *batch_o = nullptr, *lr_o = nullptr, *fwidth_o = nullptr,
              *fnoise_o = nullptr;
};

void run_train_reg(const CommonOpts& c, const TrainRegOpts& o) {
  RunConfig cfg = resolve_config(c);
  if (o.epochs_o->count()) cfg.reg.epochs = o.epochs;
  if (o.batch_o->count()) cfg.reg.batch = o.batch;
  if (o.lr_o->count()) cfg.reg.lr = o.lr;
  if (o.fwidth_o->count()) cfg.features.width = o.feature_width;
  if (o.fnoise_o->count()) cfg.features.noise = o.feature_noise;

  require_file(o.data, "train-reg", "dataset", "gen");
  require_file(o.flow, "train-reg", "flow checkpoint", "train-nf");
  const Topology& topo = default_topology();
  Dataset ds = load_dataset(o.data);
  require(!ds.records.empty(), "train-reg: dataset is empty");
  Checkpoint fck = Checkpoint::load(o.flow);
  require(fck.kind == "flow",
          "train-reg: '" + o.flow + "' is not a flow checkpoint (kind '" + fck.kind + "')");
  FlowModel flow = FlowModel::from_checkpoint(fck);

  auto provider = make_provider(ds, o.data, cfg, topo);
  std::vector<RegSample> samples;
  samples.reserve(ds.records.size());
  double depth_sum = 0.0;
  for (const auto& rec : ds.records) {
    samples.push_back({provider->features(rec), rec.crop, rec.x_gt});
    depth_sum += rec.E.t.z();
  }
  // Start the decoder's depth at the dataset's mean subject distance.
  cfg.reg.depth_prior_mm = depth_sum / static_cast<double>(ds.records.size());

  RegTrainResult result = train_regnet(samples, flow, cfg.reg, topo);

  Checkpoint ck = regnet_checkpoint(result, topo, sha256_file(o.flow));
  ck.meta["dataset_sha256"] = sha256_file(o.data);
  ck.save(o.out);
  fs::path trace_path = o.trace.empty() ? fs::path(o.out + ".trace.csv") : fs::path(o.trace);
  write_trace_csv(trace_path, result.trace);
  auto inputs = base_inputs(c);
  inputs.emplace_back("data", o.data);
  inputs.emplace_back("flow", o.flow);
  write_manifest(manifest_path(c, o.out), "train-reg", cfg, inputs, {o.out, trace_path});

  if (result.diverged) {
    throw NumericalError(
        "train-reg: loss went non-finite; checkpoint holds the last stable epoch");
  }
  std::cout << "train-reg: " << result.trace.size() << " epochs";
  if (!result.trace.empty()) std::cout << ", final loss " << format_g17(result.trace.back());
  std::cout << ", wrote " << o.out << "\n";
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
  std::string data;
  std::string model;
  std::string pred;
  std::string out;
};

void run_eval(const CommonOpts& c, const EvalOpts& o) {
  RunConfig cfg = resolve_config(c);
  require(!o.model.empty() || !o.pred.empty(), "eval: provide --model or --pred");
  require_file(o.data, "eval", "dataset", "gen");
  const Topology& topo = default_topology();
  Dataset ds = load_dataset(o.data);
  require(!ds.records.empty(), "eval: dataset is empty");

  std::vector<long> ids;
  std::vector<std::pair<Pose3D, Pose3D>> pairs;
  ids.reserve(ds.records.size());
  pairs.reserve(ds.records.size());

  auto inputs = base_inputs(c);
  inputs.emplace_back("data", o.data);

  if (!o.pred.empty()) {
    require_file(o.pred, "eval", "prediction dataset", "gen");
    Dataset pd = load_dataset(o.pred);
    require(pd.records.size() == ds.records.size(),
            "eval: --pred has " + std::to_string(pd.records.size()) + " records, --data has " +
                std::to_string(ds.records.size()));
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      require(pd.records[i].id == ds.records[i].id,
              "eval: record " + std::to_string(i) + ": id mismatch between --pred and --data");
      ids.push_back(ds.records[i].id);
      pairs.emplace_back(pd.records[i].y_gt, ds.records[i].y_gt);
    }
    inputs.emplace_back("pred", o.pred);
  } else {
    require_file(o.model, "eval", "model checkpoint", "train-lift or train-reg");
    Checkpoint ck = Checkpoint::load(o.model);
    if (ck.kind == "lifter") {
      LifterParams params;
      BoneRatioStats stats;
      lifter_from_checkpoint(ck, topo, params, stats);
      for (const auto& rec : ds.records) {
        ids.push_back(rec.id);
        pairs.emplace_back(lift(rec.x_gt, rec.K, rec.E, params, topo), rec.y_gt);
      }
    } else if (ck.kind == "regnet") {
      DecoderParams params;
      BoneRatioStats stats;
      regnet_from_checkpoint(ck, topo, params, stats);
      auto provider = make_provider(ds, o.data, cfg, topo);
      for (const auto& rec : ds.records) {
        ids.push_back(rec.id);
        RegForward fwd = regnet_forward(provider->features(rec), rec.crop, params, kPi, topo);
        pairs.emplace_back(fwd.y_hat, rec.y_gt);
      }
    } else {
      throw InputError("eval: unsupported checkpoint kind '" + ck.kind + "'");
    }
    inputs.emplace_back("model", o.model);
  }

  EvalReport report = EvalReport::evaluate_with_ids(ids, pairs, topo);
  std::ofstream out(o.out);
  if (!out) throw InputError("eval: cannot write " + o.out);
  out << report.to_csv();
  out.close();
  write_manifest(manifest_path(c, o.out), "eval", cfg, inputs, {o.out});
  std::cout << report.summary();
}

// ---------------------------------------------------------------- project / lift

struct RecordOpts {
  std::string data;
  std::string model;
  long id = 0;
  CLI::Option* id_o = nullptr;
};

void run_project(const CommonOpts& c, const RecordOpts& o) {
  RunConfig cfg = resolve_config(c);
  require_file(o.data, "project", "dataset", "gen");
  const Topology& topo = default_topology();
  Dataset ds = load_dataset(o.data);
  const SampleRecord& rec = pick_record(ds, o.id_o->count() > 0, o.id, "project");

  Pose2D x = project(rec.y_gt, rec.K, rec.E, topo);
  std::cout << "id " << rec.id << "\n"
            << "joints " << topo.joint_count << "\n";
  for (int j = 0; j < topo.joint_count; ++j) {
    std::cout << "joint " << topo.joint_names[j] << " " << format_g17(x(2 * j)) << " "
              << format_g17(x(2 * j + 1)) << "\n";
  }
  auto inputs = base_inputs(c);
  inputs.emplace_back("data", o.data);
  fs::path mpath = c.manifest.empty() ? fs::path("project.manifest.json") : fs::path(c.manifest);
  write_manifest(mpath, "project", cfg, inputs, {});
}

void run_lift(const CommonOpts& c, const RecordOpts& o) {
  RunConfig cfg = resolve_config(c);
  require_file(o.data, "lift", "dataset", "gen");
  require_file(o.model, "lift", "lifter checkpoint", "train-lift");
  const Topology& topo = default_topology();
  Dataset ds = load_dataset(o.data);
  const SampleRecord& rec = pick_record(ds, o.id_o->count() > 0, o.id, "lift");

  Checkpoint ck = Checkpoint::load(o.model);
  require(ck.kind == "lifter",
          "lift: '" + o.model + "' is not a lifter checkpoint (kind '" + ck.kind + "')");
  LifterParams params;
  BoneRatioStats stats;
  lifter_from_checkpoint(ck, topo, params, stats);

  Pose3D y = lift(rec.x_gt, rec.K, rec.E, params, topo);
  std::cout << "id " << rec.id << "\n"
            << "joints " << topo.joint_count << "\n";
  for (int j = 0; j < topo.joint_count; ++j) {
    std::cout << "joint " << topo.joint_names[j] << " " << format_g17(y(3 * j)) << " "
              << format_g17(y(3 * j + 1)) << " " << format_g17(y(3 * j + 2)) << "\n";
  }
  auto inputs = base_inputs(c);
  inputs.emplace_back("data", o.data);
  inputs.emplace_back("model", o.model);
  fs::path mpath = c.manifest.empty() ? fs::path("lift.manifest.json") : fs::path(c.manifest);
  write_manifest(mpath, "lift", cfg, inputs, {});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "poselift: monocular 3D human pose toolkit (synthetic data, flow prior, lifting and "
      "regression training, evaluation)"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "poselift 0.1.0");

  CommonOpts common;

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  GenOpts go;
  add_common(gen, common);
  gen->add_option("--out", go.out, "Dataset file to write")->required();
  go.count_o = gen->add_option("--count", go.count, "Number of records");
  go.noise_o = gen->add_option("--noise-px", go.noise_px, "2D noise stddev in full-image pixels");
  gen->add_option("--features-out", go.features_out,
                  "Also write a synthetic feature file next to the dataset");
  go.fwidth_o = gen->add_option("--feature-width", go.feature_width, "Feature vector width");
  go.fnoise_o = gen->add_option("--feature-noise", go.feature_noise, "Feature noise stddev");

  CLI::App* tnf = app.add_subcommand("train-nf", "Train the 2D pose prior flow");
  TrainNfOpts no;
  add_common(tnf, common);
  tnf->add_option("--data", no.data, "Training dataset")->required();
  tnf->add_option("--out", no.out, "Checkpoint file to write")->required();
  tnf->add_option("--trace", no.trace, "Loss trace CSV (default: <out>.trace.csv)");
  no.epochs_o = tnf->add_option("--epochs", no.epochs, "Training epochs");
  no.batch_o = tnf->add_option("--batch", no.batch, "Batch size");
  no.lr_o = tnf->add_option("--lr", no.lr, "Learning rate");
  no.depth_o = tnf->add_option("--depth", no.depth, "Flow blocks");
  no.hidden_o = tnf->add_option("--hidden", no.hidden, "Coupling hidden width");

  CLI::App* tli = app.add_subcommand("train-lift", "Train the 2D -> 3D lifting network");
  TrainLiftOpts lo;
  add_common(tli, common);
  tli->add_option("--data", lo.data, "Training dataset")->required();
  tli->add_option("--flow", lo.flow, "Flow checkpoint from train-nf")->required();
  tli->add_option("--out", lo.out, "Checkpoint file to write")->required();
  tli->add_option("--trace", lo.trace, "Loss trace CSV (default: <out>.trace.csv)");
  lo.epochs_o = tli->add_option("--epochs", lo.epochs, "Training epochs");
  lo.batch_o = tli->add_option("--batch", lo.batch, "Batch size");
  lo.lr_o = tli->add_option("--lr", lo.lr, "Learning rate");
  lo.dim_o = tli->add_option("--dim-l", lo.dim_l, "Hidden width of the lifter MLP");
  tli->add_flag("--no-nf-term", lo.no_nf, "Drop the 2D prior term (ablation)");

  CLI::App* tre = app.add_subcommand("train-reg", "Train the capsule pose/camera decoder");
  TrainRegOpts ro;
  add_common(tre, common);
  tre->add_option("--data", ro.data, "Training dataset")->required();
  tre->add_option("--flow", ro.flow, "Flow checkpoint from train-nf")->required();
  tre->add_option("--out", ro.out, "Checkpoint file to write")->required();
  tre->add_option("--trace", ro.trace, "Loss trace CSV (default: <out>.trace.csv)");
  ro.epochs_o = tre->add_option("--epochs", ro.epochs, "Training epochs");
  ro.batch_o = tre->add_option("--batch", ro.batch, "Batch size");
  ro.lr_o = tre->add_option("--lr", ro.lr, "Learning rate");
  ro.fwidth_o = tre->add_option("--feature-width", ro.feature_width,
                                "Synthetic feature width (when the dataset has no feature refs)");
  ro.fnoise_o = tre->add_option("--feature-noise", ro.feature_noise, "Synthetic feature noise");

  CLI::App* ev = app.add_subcommand("eval", "Evaluate a model or a prediction dataset");
  EvalOpts eo;
  add_common(ev, common);
  ev->add_option("--data", eo.data, "Ground-truth dataset")->required();
  CLI::Option* model_o = ev->add_option("--model", eo.model, "Lifter or decoder checkpoint");
  ev->add_option("--pred", eo.pred, "Prediction dataset (instead of --model)")->excludes(model_o);
  ev->add_option("--out", eo.out, "Report CSV to write")->required();

  CLI::App* pr = app.add_subcommand("project", "Print one record's projected 2D pose");
  RecordOpts po;
  add_common(pr, common);
  pr->add_option("--data", po.data, "Dataset file")->required();
  po.id_o = pr->add_option("--id", po.id, "Record id (default: first record)");

  CLI::App* li = app.add_subcommand("lift", "Print one record's lifted 3D pose");
  RecordOpts io;
  add_common(li, common);
  li->add_option("--data", io.data, "Dataset file")->required();
  li->add_option("--model", io.model, "Lifter checkpoint from train-lift")->required();
  io.id_o = li->add_option("--id", io.id, "Record id (default: first record)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors normalized to 1
  }

  try {
    if (gen->parsed()) run_gen(common, go);
    else if (tnf->parsed()) run_train_nf(common, no);
    else if (tli->parsed()) run_train_lift(common, lo);
    else if (tre->parsed()) run_train_reg(common, ro);
    else if (ev->parsed()) run_eval(common, eo);
    else if (pr->parsed()) run_project(common, po);
    else if (li->parsed()) run_lift(common, io);
  } catch (const NumericalError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "poselift: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
