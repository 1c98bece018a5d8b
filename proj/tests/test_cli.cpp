// Copyright (c) 2026 poselift contributors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "poselift/checkpoint.hpp"
#include "poselift/common.hpp"
#include "poselift/data.hpp"
#include "poselift/runconfig.hpp"

extern std::string g_binary_path;

namespace fs = std::filesystem;
using poselift::InputError;
using poselift::RunConfig;

namespace {

struct RunResult {
  int exit = -1;
  std::string output;  // stdout and stderr combined
};

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

RunResult run_cli(const std::string& args, const fs::path& dir, const std::string& env = "") {
  const fs::path log = dir / "last_run.log";
  const std::string cmd = env + q(g_binary_path) + " " + args + " >" + q(log) + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::ostringstream buf;
  buf << in.rdbuf();
  r.output = buf.str();
  return r;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("poselift_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string field;
  while (std::getline(in, field, ',')) out.push_back(field);
  return out;
}

// The row of a report CSV whose id column equals the given key.
std::vector<std::string> csv_row(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + ",", 0) == 0) return split_csv(line);
  }
  FAIL("row not found in report");
  return {};
}

}  // namespace

TEST_CASE("version and help flags succeed") {
  const fs::path dir = scratch_dir("meta");
  const RunResult v = run_cli("--version", dir);
  CHECK(v.exit == 0);
  CHECK(contains(v.output, "poselift 0.1.0"));
  const RunResult h = run_cli("--help", dir);
  CHECK(h.exit == 0);
  CHECK(contains(h.output, "gen"));
  CHECK(contains(h.output, "train-nf"));
  CHECK(contains(h.output, "eval"));
}

TEST_CASE("usage errors exit with code one") {
  const fs::path dir = scratch_dir("usage");
  CHECK(run_cli("", dir).exit == 1);
  CHECK(run_cli("frobnicate", dir).exit == 1);
  CHECK(run_cli("gen", dir).exit == 1);  // missing required --out
  const RunResult bogus = run_cli("gen --out " + q(dir / "d.txt") + " --bogus 3", dir);
  CHECK(bogus.exit == 1);
  CHECK(contains(bogus.output, "--bogus"));
  // --model and --pred are mutually exclusive.
  CHECK(run_cli("eval --data d --model m --pred p --out o", dir).exit == 1);
}

TEST_CASE("the pipeline runs end to end and reruns bit-identically") {
  const fs::path dir = scratch_dir("pipeline");
  const fs::path rerun = dir / "rerun";
  fs::create_directories(rerun);
  const fs::path data = dir / "data.txt";

  const std::string gen_args = "--count 40 --feature-width 16 --seed 9";
  const RunResult g1 = run_cli("gen --out " + q(data) + " --features-out " +
                                   q(dir / "feats.bin") + " " + gen_args,
                               dir);
  REQUIRE(g1.exit == 0);
  CHECK(contains(g1.output, "gen: wrote 40 records"));

  // The manifest embeds the fully resolved config and the output list.
  const auto manifest = nlohmann::json::parse(slurp(dir / "data.txt.manifest.json"));
  CHECK(manifest["subcommand"] == "gen");
  CHECK(manifest["config"]["seed"] == 9);
  CHECK(manifest["config"]["synthetic"]["seed"] == 9);
  CHECK(manifest["config"]["synthetic"]["count"] == 40);
  CHECK(manifest["config"]["features"]["width"] == 16);
  CHECK(manifest["inputs"].empty());
  REQUIRE(manifest["outputs"].size() == 2);
  CHECK(manifest["outputs"][0] == data.string());

  // A rerun into a sibling directory reproduces both files byte for byte.
  const RunResult g2 = run_cli("gen --out " + q(rerun / "data.txt") + " --features-out " +
                                   q(rerun / "feats.bin") + " " + gen_args,
                               dir);
  REQUIRE(g2.exit == 0);
  CHECK(slurp(rerun / "data.txt") == slurp(data));
  CHECK(slurp(rerun / "feats.bin") == slurp(dir / "feats.bin"));

  const fs::path flow = dir / "flow.ck";
  const std::string nf_args =
      "train-nf --data " + q(data) + " --epochs 2 --batch 20 --seed 9 --out ";
  const RunResult t1 = run_cli(nf_args + q(flow), dir);
  REQUIRE(t1.exit == 0);
  CHECK(contains(t1.output, "train-nf: 2 epochs"));
  CHECK(contains(t1.output, "final mean NLL"));
  CHECK(poselift::Checkpoint::load(flow).kind == "flow");

  const std::string trace = slurp(fs::path(flow.string() + ".trace.csv"));
  CHECK(trace.rfind("epoch,loss\n1,", 0) == 0);
  CHECK(count_lines(trace) == 3);

  // The manifest hash of the dataset matches an independent computation.
  const auto nf_manifest = nlohmann::json::parse(slurp(fs::path(flow.string() + ".manifest.json")));
  CHECK(nf_manifest["inputs"]["data"]["sha256"] == poselift::sha256_file(data));

  const RunResult t2 = run_cli(nf_args + q(rerun / "flow.ck"), dir);
  REQUIRE(t2.exit == 0);
  CHECK(slurp(rerun / "flow.ck") == slurp(flow));
  CHECK(slurp(rerun / "flow.ck.trace.csv") == slurp(fs::path(flow.string() + ".trace.csv")));

  const fs::path lift_ck = dir / "lift.ck";
  const std::string lift_args = "train-lift --data " + q(data) + " --flow " + q(flow) +
                                " --epochs 2 --batch 20 --dim-l 16 --seed 9 --out ";
  const RunResult t3 = run_cli(lift_args + q(lift_ck), dir);
  REQUIRE(t3.exit == 0);
  CHECK(contains(t3.output, "train-lift: 2 epochs"));
  CHECK(contains(t3.output, "depth floor hits"));
  CHECK(poselift::Checkpoint::load(lift_ck).kind == "lifter");
  const RunResult t4 = run_cli(lift_args + q(rerun / "lift.ck"), dir);
  REQUIRE(t4.exit == 0);
  CHECK(slurp(rerun / "lift.ck") == slurp(lift_ck));

  const fs::path reg_ck = dir / "reg.ck";
  const std::string reg_args = "train-reg --data " + q(data) + " --flow " + q(flow) +
                               " --epochs 2 --batch 20 --seed 9 --out ";
  const RunResult t5 = run_cli(reg_args + q(reg_ck), dir);
  REQUIRE(t5.exit == 0);
  CHECK(contains(t5.output, "train-reg: 2 epochs"));
  CHECK(poselift::Checkpoint::load(reg_ck).kind == "regnet");
  const RunResult t6 = run_cli(reg_args + q(rerun / "reg.ck"), dir);
  REQUIRE(t6.exit == 0);
  CHECK(slurp(rerun / "reg.ck") == slurp(reg_ck));

  for (const fs::path& model : {lift_ck, reg_ck}) {
    const fs::path report = dir / (model.stem().string() + "_report.csv");
    const RunResult ev =
        run_cli("eval --data " + q(data) + " --model " + q(model) + " --out " + q(report), dir);
    REQUIRE(ev.exit == 0);
    CHECK(contains(ev.output, "samples 40"));
    const std::string csv = slurp(report);
    CHECK(csv.rfind("id,mpjpe,pa_mpjpe,n_mpjpe,n_pck_150,auc\n", 0) == 0);
    CHECK(count_lines(csv) == 42);  // header, 40 records, mean row
  }

  // Evaluating the dataset against its own copy scores a perfect report.
  const fs::path self_report = dir / "self.csv";
  const RunResult ev = run_cli("eval --data " + q(data) + " --pred " + q(rerun / "data.txt") +
                                   " --out " + q(self_report),
                               dir);
  REQUIRE(ev.exit == 0);
  const auto mean = csv_row(slurp(self_report), "mean");
  REQUIRE(mean.size() == 6);
  CHECK(std::stod(mean[1]) <= 1e-9);   // mpjpe
  CHECK(std::stod(mean[2]) <= 1e-9);   // pa_mpjpe
  CHECK(std::stod(mean[3]) <= 1e-9);   // n_mpjpe
  CHECK(std::stod(mean[4]) == 1.0);    // n_pck_150
  CHECK(std::stod(mean[5]) == 1.0);    // auc

  const RunResult pr =
      run_cli("project --data " + q(data) + " --manifest " + q(dir / "pm.json"), dir);
  REQUIRE(pr.exit == 0);
  CHECK(pr.output.rfind("id 0\njoints 17\njoint ", 0) == 0);
  CHECK(count_lines(pr.output) == 19);
  const RunResult pr5 = run_cli(
      "project --data " + q(data) + " --id 5 --manifest " + q(dir / "pm.json"), dir);
  REQUIRE(pr5.exit == 0);
  CHECK(pr5.output.rfind("id 5\n", 0) == 0);

  const RunResult lf = run_cli("lift --data " + q(data) + " --model " + q(lift_ck) +
                                   " --id 3 --manifest " + q(dir / "lm.json"),
                               dir);
  REQUIRE(lf.exit == 0);
  CHECK(lf.output.rfind("id 3\njoints 17\n", 0) == 0);
  CHECK(count_lines(lf.output) == 19);
  // Joint lines carry a name and three parseable coordinates.
  std::istringstream lines(lf.output);
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  int joints = 0;
  while (std::getline(lines, line)) {
    std::istringstream fields(line);
    std::string tag, name;
    double x = 0.0, y = 0.0, z = 0.0;
    fields >> tag >> name >> x >> y >> z;
    CHECK(tag == "joint");
    CHECK(!fields.fail());
    ++joints;
  }
  CHECK(joints == 17);
}

TEST_CASE("missing inputs fail with pointers to the producing stage") {
  const fs::path dir = scratch_dir("missing");
  const fs::path data = dir / "data.txt";
  REQUIRE(run_cli("gen --out " + q(data) + " --count 6", dir).exit == 0);
  const fs::path none = dir / "none";
  const fs::path out = dir / "o";

  const RunResult nf = run_cli("train-nf --data " + q(none) + " --out " + q(out), dir);
  CHECK(nf.exit == 1);
  CHECK(contains(nf.output, "run gen first"));

  const RunResult li = run_cli(
      "train-lift --data " + q(data) + " --flow " + q(none) + " --out " + q(out), dir);
  CHECK(li.exit == 1);
  CHECK(contains(li.output, "run train-nf first"));

  const RunResult re = run_cli(
      "train-reg --data " + q(data) + " --flow " + q(none) + " --out " + q(out), dir);
  CHECK(re.exit == 1);
  CHECK(contains(re.output, "run train-nf first"));

  const RunResult ev0 = run_cli("eval --data " + q(data) + " --out " + q(out), dir);
  CHECK(ev0.exit == 1);
  CHECK(contains(ev0.output, "provide --model or --pred"));

  const RunResult ev1 =
      run_cli("eval --data " + q(data) + " --model " + q(none) + " --out " + q(out), dir);
  CHECK(ev1.exit == 1);
  CHECK(contains(ev1.output, "run train-lift or train-reg first"));

  const RunResult lf = run_cli("lift --data " + q(data) + " --model " + q(none), dir);
  CHECK(lf.exit == 1);
  CHECK(contains(lf.output, "run train-lift first"));

  const RunResult pj = run_cli("project --data " + q(data) + " --id 999 --manifest " +
                                   q(dir / "pm.json"),
                               dir);
  CHECK(pj.exit == 1);
  CHECK(contains(pj.output, "no record with id 999"));
}

TEST_CASE("checkpoint kinds are enforced across stages") {
  const fs::path dir = scratch_dir("kinds");
  const fs::path data = dir / "data.txt";
  const fs::path flow = dir / "flow.ck";
  const fs::path lift_ck = dir / "lift.ck";
  REQUIRE(run_cli("gen --out " + q(data) + " --count 8", dir).exit == 0);
  REQUIRE(run_cli("train-nf --data " + q(data) + " --epochs 1 --batch 8 --out " + q(flow), dir)
              .exit == 0);
  REQUIRE(run_cli("train-lift --data " + q(data) + " --flow " + q(flow) +
                      " --epochs 1 --batch 8 --dim-l 8 --out " + q(lift_ck),
                  dir)
              .exit == 0);

  const RunResult a = run_cli("train-lift --data " + q(data) + " --flow " + q(lift_ck) +
                                  " --out " + q(dir / "o"),
                              dir);
  CHECK(a.exit == 1);
  CHECK(contains(a.output, "not a flow checkpoint"));

  const RunResult b = run_cli("lift --data " + q(data) + " --model " + q(flow) +
                                  " --manifest " + q(dir / "lm.json"),
                              dir);
  CHECK(b.exit == 1);
  CHECK(contains(b.output, "not a lifter checkpoint"));

  const RunResult c = run_cli(
      "eval --data " + q(data) + " --model " + q(flow) + " --out " + q(dir / "r.csv"), dir);
  CHECK(c.exit == 1);
  CHECK(contains(c.output, "unsupported checkpoint kind"));
}

TEST_CASE("config files apply, flags override, and the environment supplies the path") {
  const fs::path dir = scratch_dir("config");
  const fs::path cfg = dir / "cfg.json";
  std::ofstream(cfg) << "{\"seed\": 4, \"synthetic\": {\"count\": 7}}\n";

  const RunResult a =
      run_cli("gen --config " + q(cfg) + " --out " + q(dir / "a.txt"), dir);
  REQUIRE(a.exit == 0);
  CHECK(contains(a.output, "wrote 7 records"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "a.txt.manifest.json"));
  CHECK(manifest["config"]["seed"] == 4);
  CHECK(manifest["config"]["synthetic"]["count"] == 7);
  CHECK(manifest["inputs"]["config"]["path"] == cfg.string());

  const RunResult b =
      run_cli("gen --config " + q(cfg) + " --count 5 --out " + q(dir / "b.txt"), dir);
  REQUIRE(b.exit == 0);
  CHECK(contains(b.output, "wrote 5 records"));

  const RunResult c = run_cli("gen --out " + q(dir / "c.txt"), dir,
                              "POSELIFT_CONFIG=" + q(cfg) + " ");
  REQUIRE(c.exit == 0);
  CHECK(contains(c.output, "wrote 7 records"));

  // The config seed and the --seed flag resolve to the same dataset.
  const RunResult d = run_cli("gen --seed 4 --count 7 --out " + q(dir / "d.txt"), dir);
  REQUIRE(d.exit == 0);
  CHECK(slurp(dir / "d.txt") == slurp(dir / "a.txt"));

  const fs::path bad = dir / "bad.json";
  std::ofstream(bad) << "{oops\n";
  const RunResult e = run_cli("gen --config " + q(bad) + " --out " + q(dir / "e.txt"), dir);
  CHECK(e.exit == 1);
  CHECK(contains(e.output, "config:"));

  const fs::path unknown = dir / "unknown.json";
  std::ofstream(unknown) << "{\"synthetic\": {\"cnt\": 3}}\n";
  const RunResult f =
      run_cli("gen --config " + q(unknown) + " --out " + q(dir / "f.txt"), dir);
  CHECK(f.exit == 1);
  CHECK(contains(f.output, "unknown key 'cnt'"));
}

TEST_CASE("eval checks prediction datasets against the ground truth") {
  const fs::path dir = scratch_dir("pred");
  const fs::path data = dir / "data.txt";
  REQUIRE(run_cli("gen --out " + q(data) + " --count 6 --seed 3", dir).exit == 0);
  REQUIRE(run_cli("gen --out " + q(dir / "other.txt") + " --count 6 --seed 8", dir).exit == 0);

  // Same ids, different poses: a valid prediction set with nonzero error.
  const RunResult ok = run_cli("eval --data " + q(data) + " --pred " + q(dir / "other.txt") +
                                   " --out " + q(dir / "r.csv"),
                               dir);
  REQUIRE(ok.exit == 0);
  CHECK(std::stod(csv_row(slurp(dir / "r.csv"), "mean")[1]) > 1.0);

  REQUIRE(run_cli("gen --out " + q(dir / "short.txt") + " --count 5 --seed 8", dir).exit == 0);
  const RunResult len = run_cli("eval --data " + q(data) + " --pred " + q(dir / "short.txt") +
                                    " --out " + q(dir / "r2.csv"),
                                dir);
  CHECK(len.exit == 1);
  CHECK(contains(len.output, "records"));

  // Tamper with one id to trip the per-record alignment check.
  poselift::Dataset tampered = poselift::load_dataset(dir / "other.txt");
  tampered.records[2].id = 99;
  poselift::save_dataset(tampered, dir / "tampered.txt");
  const RunResult ids = run_cli("eval --data " + q(data) + " --pred " + q(dir / "tampered.txt") +
                                    " --out " + q(dir / "r3.csv"),
                                dir);
  CHECK(ids.exit == 1);
  CHECK(contains(ids.output, "id mismatch"));
}

TEST_CASE("run configs parse sections, propagate seeds, and reject bad values") {
  const RunConfig defaults = RunConfig::from_json_text("{}");
  CHECK(defaults.seed == 1);
  CHECK(defaults.synthetic.count == 1000);
  CHECK(defaults.flow.seed == 1);
  CHECK(defaults.features.width == 64);

  const RunConfig seeded = RunConfig::from_json_text("{\"seed\": 11}");
  CHECK(seeded.synthetic.seed == 11);
  CHECK(seeded.flow.seed == 11);
  CHECK(seeded.lift.seed == 11);
  CHECK(seeded.reg.seed == 11);
  CHECK(seeded.features.seed == 11);

  const RunConfig split =
      RunConfig::from_json_text("{\"seed\": 11, \"flow\": {\"seed\": 3, \"epochs\": 9}}");
  CHECK(split.flow.seed == 3);
  CHECK(split.flow.epochs == 9);
  CHECK(split.lift.seed == 11);

  const RunConfig arr = RunConfig::from_json_text(
      "{\"synthetic\": {\"joint_noise_scale\": [1.0, 2.0, 0.5]}}");
  REQUIRE(arr.synthetic.joint_noise_scale.size() == 3);
  CHECK(arr.synthetic.joint_noise_scale(1) == 2.0);

  // The resolved snapshot reparses to the same values.
  RunConfig tweaked = defaults;
  tweaked.seed = 21;
  tweaked.lift.dim_l = 48;
  tweaked.synthetic.noise_px = 1.5;
  const RunConfig back = RunConfig::from_json_text(tweaked.to_json_text());
  CHECK(back.seed == 21);
  CHECK(back.lift.dim_l == 48);
  CHECK(back.synthetic.noise_px == 1.5);
  CHECK(back.to_json_text() == tweaked.to_json_text());

  CHECK_THROWS_AS(RunConfig::from_json_text("[]"), InputError);
  CHECK_THROWS_AS(RunConfig::from_json_text("{\"bogus\": 1}"), InputError);
  CHECK_THROWS_AS(RunConfig::from_json_text("{\"flow\": {\"lr\": \"fast\"}}"), InputError);
  CHECK_THROWS_AS(RunConfig::from_json_text("{\"liftnet\": {\"epochs\": 1.5}}"), InputError);
  CHECK_THROWS_AS(RunConfig::from_json_text("{\"seed\": \"x\"}"), InputError);
  CHECK_THROWS_AS(
      RunConfig::from_json_text("{\"synthetic\": {\"joint_noise_scale\": [\"a\"]}}"), InputError);
  CHECK_THROWS_AS(RunConfig::from_json_text("{\"flow\": 3}"), InputError);
}
