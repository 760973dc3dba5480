// cuma: train and evaluate group-fair tabular classifiers with curvature
// matching, plus baselines, a shift-evaluation harness, sweeps and the
// numerical gradcheck suites.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cuma/harness.hpp"

namespace {

using cuma::harness::ExperimentSpec;

struct CommonFlags {
  std::string config_path;
  std::string method = "cuma";
  double alpha = 1.0;
  double gamma = 1.0;
  double h = 1.0;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  int epochs = 50;
  int batch_size = 128;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "out";

  std::string train_csv, test_csv, schema_path;
  int synth_n = 2000;
  int synth_d = 20;
  double group_ratio = 0.7;
  double noise_gap = 0.25;

  std::vector<std::string> shifts = {"gaussian", "uniform"};
  double shift_std = 0.03;
  std::string finetune_from;
};

void add_train_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON experiment spec; overrides the flags below");
  cmd->add_option("--method", f.method, "normal|advdebias|laftr-gnl1|cuma");
  cmd->add_option("--alpha", f.alpha, "adversary trade-off weight");
  cmd->add_option("--gamma", f.gamma, "curvature-matching trade-off weight");
  cmd->add_option("--h-step", f.h, "curvature finite-difference step h");
  cmd->add_option("--lr", f.lr, "initial learning rate");
  cmd->add_option("--weight-decay", f.weight_decay, "l2 weight decay");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--batch-size", f.batch_size, "batch size");
  cmd->add_option("--seed", f.seed, "root seed");
  cmd->add_option("--seeds", f.seeds, "repeated-run seeds (reports mean and std)")->delimiter(',');
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_option("--train-csv", f.train_csv, "training CSV (with --schema and --test-csv)");
  cmd->add_option("--test-csv", f.test_csv, "in-distribution test CSV");
  cmd->add_option("--schema", f.schema_path, "schema JSON for the CSVs");
  cmd->add_option("--synth-n", f.synth_n, "synthetic: total samples");
  cmd->add_option("--synth-d", f.synth_d, "synthetic: feature dimensions");
  cmd->add_option("--group-ratio", f.group_ratio, "synthetic: P(A=0)");
  cmd->add_option("--noise-gap", f.noise_gap, "synthetic: minority noise gap");
  cmd->add_option("--shifts", f.shifts, "noise shifts to evaluate (gaussian, uniform)")->delimiter(',');
  cmd->add_option("--shift-std", f.shift_std, "noise standard deviation");
  cmd->add_option("--finetune-from", f.finetune_from, "checkpoint to resume from");
}

ExperimentSpec spec_from_flags(const CommonFlags& f) {
  ExperimentSpec spec;
  spec.config.method = cuma::train::method_from_string(f.method);
  spec.config.alpha = f.alpha;
  spec.config.gamma = f.gamma;
  spec.config.h = f.h;
  spec.config.lr = f.lr;
  spec.config.weight_decay = f.weight_decay;
  spec.config.epochs = f.epochs;
  spec.config.batch_size = f.batch_size;
  spec.config.seed = f.seed;
  spec.seeds = f.seeds;
  spec.out_dir = f.out_dir;
  if (!f.finetune_from.empty()) spec.finetune_from = f.finetune_from;

  if (!f.train_csv.empty() || !f.test_csv.empty() || !f.schema_path.empty()) {
    cuma::require(!f.train_csv.empty() && !f.test_csv.empty() && !f.schema_path.empty(),
                  "csv input needs --train-csv, --test-csv and --schema together");
    spec.source.kind = cuma::harness::DataSource::Kind::kCsv;
    spec.source.csv = {f.train_csv, f.test_csv, f.schema_path};
  } else {
    spec.source.kind = cuma::harness::DataSource::Kind::kSynthetic;
    spec.source.synth.n = f.synth_n;
    spec.source.synth.d = f.synth_d;
    spec.source.synth.group_ratio = f.group_ratio;
    spec.source.synth.noise_gap = f.noise_gap;
  }

  spec.evals.push_back({cuma::harness::EvalSpec::Kind::kInDist, "in_dist", {}, ""});
  for (const std::string& s : f.shifts) {
    cuma::harness::EvalSpec e;
    e.kind = cuma::harness::EvalSpec::Kind::kShift;
    e.name = s;
    e.shift.kind = cuma::data::shift_kind_from_string(s);
    e.shift.std_dev = f.shift_std;
    spec.evals.push_back(std::move(e));
  }
  return spec;
}

// --config wins over individual flags.
ExperimentSpec resolve_spec(const CommonFlags& f) {
  ExperimentSpec spec = spec_from_flags(f);
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    cuma::require(in.good(), "cannot read config ", f.config_path);
    nlohmann::json j;
    in >> j;
    cuma::harness::spec_from_json(j, spec);
  }
  return spec;
}

int cmd_train(const CommonFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentSpec spec = resolve_spec(f);
  nlohmann::json report = cuma::harness::run(spec);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // Wall clock lives outside metrics.json: identical spec+seed must
  // reproduce that file byte for byte.
  cuma::harness::write_text(spec.out_dir + "/run_info.json",
                            nlohmann::json{{"wall_clock_seconds", secs}}.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  std::cout << "wall clock: " << secs << " s\n";
  return 0;
}

int cmd_evaluate(const CommonFlags& f, const std::string& checkpoint) {
  ExperimentSpec spec = resolve_spec(f);
  nlohmann::json report = cuma::harness::evaluate_checkpoint(checkpoint, spec);
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const CommonFlags& f, std::vector<double> alphas, std::vector<double> gammas,
              std::vector<double> hs) {
  ExperimentSpec spec = resolve_spec(f);
  if (alphas.empty()) alphas = {spec.config.alpha};
  if (gammas.empty()) gammas = {spec.config.gamma};
  if (hs.empty()) hs = {spec.config.h};
  std::vector<std::uint64_t> seeds = spec.seeds.empty()
                                         ? std::vector<std::uint64_t>{spec.config.seed}
                                         : spec.seeds;

  cuma::harness::SweepResult result = cuma::harness::sweep(spec, alphas, gammas, hs, seeds);
  std::filesystem::create_directories(spec.out_dir);
  cuma::harness::write_sweep_csv(spec.out_dir + "/sweep.csv", result);
  cuma::harness::write_pareto_csv(spec.out_dir + "/pareto.csv",
                                  cuma::harness::pareto_front(result));

  int failed = 0;
  for (const auto& row : result.rows) failed += row.failed;
  std::cout << "sweep: " << result.rows.size() << " cells, " << failed << " failed; wrote "
            << spec.out_dir << "/sweep.csv and pareto.csv\n";
  return failed == 0 ? 0 : 1;
}

int cmd_synth_data(const CommonFlags& f) {
  cuma::data::SynthSpec spec;
  spec.n = f.synth_n;
  spec.d = f.synth_d;
  spec.group_ratio = f.group_ratio;
  spec.noise_gap = f.noise_gap;
  spec.seed = f.seed;
  cuma::data::SynthResult r = cuma::data::synth_biased(spec, f.out_dir);
  std::cout << "wrote " << f.out_dir << "/train.csv (" << r.train.n() << " rows), test.csv ("
            << r.test.n() << " rows), schema.json, generator.json\n";
  return 0;
}

int cmd_gradcheck() {
  std::vector<cuma::oracle::SuiteResult> suites = cuma::gradcheck::run_all();
  bool all_pass = true;
  for (const auto& s : suites) {
    std::printf("[%s] %-38s max_err=%.3e  (%s)\n", s.pass ? "PASS" : "FAIL", s.name.c_str(),
                s.max_err, s.note.c_str());
    all_pass = all_pass && s.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"group-fair training with curvature matching"};
  app.require_subcommand(1);

  CommonFlags f;
  std::string checkpoint;
  std::vector<double> sweep_alphas, sweep_gammas, sweep_hs;

  CLI::App* train_cmd = app.add_subcommand("train", "train a model and evaluate on every set");
  add_train_flags(train_cmd, f);

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "score an existing checkpoint");
  add_train_flags(eval_cmd, f);
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "grid over alpha/gamma/h for trade-off curves");
  add_train_flags(sweep_cmd, f);
  sweep_cmd->add_option("--alphas", sweep_alphas, "alpha grid")->delimiter(',');
  sweep_cmd->add_option("--gammas", sweep_gammas, "gamma grid")->delimiter(',');
  sweep_cmd->add_option("--hs", sweep_hs, "h grid")->delimiter(',');

  CLI::App* synth_cmd = app.add_subcommand("synth-data", "generate the synthetic biased dataset");
  synth_cmd->add_option("--n", f.synth_n, "total samples");
  synth_cmd->add_option("--d", f.synth_d, "feature dimensions");
  synth_cmd->add_option("--group-ratio", f.group_ratio, "P(A=0)");
  synth_cmd->add_option("--noise-gap", f.noise_gap, "minority noise gap");
  synth_cmd->add_option("--seed", f.seed, "generator seed");
  synth_cmd->add_option("--out", f.out_dir, "output directory")->required();

  CLI::App* check_cmd = app.add_subcommand("gradcheck", "run the numerical oracle suites");
  (void)check_cmd;

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(f);
    if (eval_cmd->parsed()) return cmd_evaluate(f, checkpoint);
    if (sweep_cmd->parsed()) return cmd_sweep(f, sweep_alphas, sweep_gammas, sweep_hs);
    if (synth_cmd->parsed()) return cmd_synth_data(f);
    if (check_cmd->parsed()) return cmd_gradcheck();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
