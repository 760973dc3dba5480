#pragma once

// Experiment orchestration: resolve a spec (data source, evaluation suite,
// training configuration), train, evaluate on every set, and emit reports.
// All randomness flows from one root seed through named substreams, and
// metrics.json is a pure function of (spec, seed): re-running reproduces it
// byte for byte.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cuma/data.hpp"
#include "cuma/gradcheck.hpp"
#include "cuma/train.hpp"

namespace cuma::harness {

using nlohmann::json;

struct CsvSource {
  std::string train_csv;
  std::string test_csv;
  std::string schema_path;
};

struct DataSource {
  enum class Kind { kCsv, kSynthetic } kind = Kind::kSynthetic;
  CsvSource csv;
  data::SynthSpec synth;
};

struct EvalSpec {
  enum class Kind { kInDist, kShift, kCsv } kind = Kind::kInDist;
  std::string name;
  data::ShiftSpec shift;  // kShift
  std::string csv_path;   // kCsv
};

struct ExperimentSpec {
  train::TrainConfig config;
  DataSource source;
  std::vector<EvalSpec> evals;
  std::vector<std::uint64_t> seeds;  // additional seeds for repeated runs
  std::string out_dir = "out";
  std::optional<std::string> finetune_from;  // checkpoint path

  void validate() const {
    config.validate();
    require(!evals.empty(), "spec: at least one evaluation set required");
  }
};

// ---------------------------------------------------------------------------
// Spec <-> JSON
// ---------------------------------------------------------------------------

inline json config_to_json(const train::TrainConfig& c) {
  return {{"method", train::method_to_string(c.method)},
          {"alpha", c.alpha},
          {"gamma", c.gamma},
          {"h", c.h},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"mlp",
           {{"backbone_hidden", c.mlp.backbone_hidden},
            {"repr_dim", c.mlp.repr_dim},
            {"head_hidden", c.mlp.head_hidden},
            {"dropout", c.mlp.dropout}}},
          {"kernel_bandwidths", c.kernel.bandwidths}};
}

inline void config_from_json(const json& j, train::TrainConfig& c) {
  if (j.contains("method")) c.method = train::method_from_string(j.at("method").get<std::string>());
  if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
  if (j.contains("gamma")) c.gamma = j.at("gamma").get<double>();
  if (j.contains("h")) c.h = j.at("h").get<double>();
  if (j.contains("lr")) c.lr = j.at("lr").get<double>();
  if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
  if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("mlp")) {
    const json& m = j.at("mlp");
    if (m.contains("backbone_hidden")) c.mlp.backbone_hidden = m.at("backbone_hidden").get<int>();
    if (m.contains("repr_dim")) c.mlp.repr_dim = m.at("repr_dim").get<int>();
    if (m.contains("head_hidden")) c.mlp.head_hidden = m.at("head_hidden").get<int>();
    if (m.contains("dropout")) c.mlp.dropout = m.at("dropout").get<double>();
  }
  if (j.contains("kernel_bandwidths"))
    c.kernel.bandwidths = j.at("kernel_bandwidths").get<std::vector<double>>();
}

inline json spec_to_json(const ExperimentSpec& s) {
  json j;
  j["train"] = config_to_json(s.config);
  if (s.source.kind == DataSource::Kind::kCsv) {
    j["data"] = {{"kind", "csv"},
                 {"train_csv", s.source.csv.train_csv},
                 {"test_csv", s.source.csv.test_csv},
                 {"schema", s.source.csv.schema_path}};
  } else {
    j["data"] = {{"kind", "synthetic"},
                 {"n", s.source.synth.n},
                 {"d", s.source.synth.d},
                 {"group_ratio", s.source.synth.group_ratio},
                 {"noise_gap", s.source.synth.noise_gap},
                 {"test_fraction", s.source.synth.test_fraction}};
  }
  json evals = json::array();
  for (const auto& e : s.evals) {
    json ej = {{"name", e.name}};
    switch (e.kind) {
      case EvalSpec::Kind::kInDist: ej["kind"] = "in_dist"; break;
      case EvalSpec::Kind::kShift:
        ej["kind"] = "shift";
        ej["shift"] = e.shift.kind == data::ShiftSpec::Kind::kGaussian ? "gaussian" : "uniform";
        ej["std"] = e.shift.std_dev;
        break;
      case EvalSpec::Kind::kCsv:
        ej["kind"] = "csv";
        ej["csv"] = e.csv_path;
        break;
    }
    evals.push_back(std::move(ej));
  }
  j["eval"] = std::move(evals);
  if (!s.seeds.empty()) j["seeds"] = s.seeds;
  if (s.finetune_from) j["finetune_from"] = *s.finetune_from;
  j["out_dir"] = s.out_dir;
  return j;
}

inline void spec_from_json(const json& j, ExperimentSpec& s) {
  if (j.contains("train")) config_from_json(j.at("train"), s.config);
  if (j.contains("data")) {
    const json& d = j.at("data");
    const std::string kind = d.at("kind").get<std::string>();
    if (kind == "csv") {
      s.source.kind = DataSource::Kind::kCsv;
      s.source.csv.train_csv = d.at("train_csv").get<std::string>();
      s.source.csv.test_csv = d.at("test_csv").get<std::string>();
      s.source.csv.schema_path = d.at("schema").get<std::string>();
    } else if (kind == "synthetic") {
      s.source.kind = DataSource::Kind::kSynthetic;
      if (d.contains("n")) s.source.synth.n = d.at("n").get<int>();
      if (d.contains("d")) s.source.synth.d = d.at("d").get<int>();
      if (d.contains("group_ratio")) s.source.synth.group_ratio = d.at("group_ratio").get<double>();
      if (d.contains("noise_gap")) s.source.synth.noise_gap = d.at("noise_gap").get<double>();
      if (d.contains("test_fraction"))
        s.source.synth.test_fraction = d.at("test_fraction").get<double>();
    } else {
      fail("spec: unknown data source kind '", kind, "'");
    }
  }
  if (j.contains("eval")) {
    s.evals.clear();
    for (const json& ej : j.at("eval")) {
      EvalSpec e;
      e.name = ej.at("name").get<std::string>();
      const std::string kind = ej.at("kind").get<std::string>();
      if (kind == "in_dist") {
        e.kind = EvalSpec::Kind::kInDist;
      } else if (kind == "shift") {
        e.kind = EvalSpec::Kind::kShift;
        e.shift.kind = data::shift_kind_from_string(ej.at("shift").get<std::string>());
        if (ej.contains("std")) e.shift.std_dev = ej.at("std").get<double>();
      } else if (kind == "csv") {
        e.kind = EvalSpec::Kind::kCsv;
        e.csv_path = ej.at("csv").get<std::string>();
      } else {
        fail("spec: unknown eval kind '", kind, "'");
      }
      s.evals.push_back(std::move(e));
    }
  }
  if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("finetune_from")) s.finetune_from = j.at("finetune_from").get<std::string>();
  if (j.contains("out_dir")) s.out_dir = j.at("out_dir").get<std::string>();
}

inline ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "spec: cannot read ", path);
  json j;
  in >> j;
  ExperimentSpec s;
  spec_from_json(j, s);
  return s;
}

// FNV-1a over the canonical spec serialization; pins the evaluation-set list
// and every resolved hyperparameter.
inline std::string fingerprint(const json& canonical) {
  const std::string dump = canonical.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Running experiments
// ---------------------------------------------------------------------------

struct ResolvedData {
  data::EncodedDataset train;
  std::map<std::string, data::EncodedDataset> evals;
};

// Loads or generates the data and materializes every evaluation set. The
// whitening statistics of each evaluation set are asserted to be the
// training-split statistics.
inline ResolvedData resolve_data(const ExperimentSpec& spec, std::uint64_t seed,
                                 const std::optional<std::string>& persist_dir = std::nullopt) {
  ResolvedData out;
  data::EncodedDataset in_dist;

  if (spec.source.kind == DataSource::Kind::kCsv) {
    require(std::filesystem::exists(spec.source.csv.train_csv), "run: missing input file ",
            spec.source.csv.train_csv);
    require(std::filesystem::exists(spec.source.csv.test_csv), "run: missing input file ",
            spec.source.csv.test_csv);
    require(std::filesystem::exists(spec.source.csv.schema_path), "run: missing input file ",
            spec.source.csv.schema_path);
    data::Schema schema = data::load_schema(spec.source.csv.schema_path);
    data::Encoder enc(schema);
    out.train = enc.fit_transform(data::load_csv(spec.source.csv.train_csv));
    in_dist = enc.transform(data::load_csv(spec.source.csv.test_csv));
    for (const auto& e : spec.evals)
      if (e.kind == EvalSpec::Kind::kCsv) {
        require(std::filesystem::exists(e.csv_path), "run: missing input file ", e.csv_path);
        out.evals[e.name] = enc.transform(data::load_csv(e.csv_path));
      }
  } else {
    data::SynthSpec synth = spec.source.synth;
    synth.seed = seed;
    data::SynthResult r = data::synth_biased(synth, persist_dir);
    out.train = std::move(r.train);
    in_dist = std::move(r.test);
    for (const auto& e : spec.evals)
      require(e.kind != EvalSpec::Kind::kCsv,
              "run: csv evaluation sets need a csv data source (set '", e.name, "')");
  }

  for (const auto& e : spec.evals) {
    switch (e.kind) {
      case EvalSpec::Kind::kInDist:
        out.evals[e.name] = in_dist;
        break;
      case EvalSpec::Kind::kShift: {
        data::ShiftSpec shift = e.shift;
        shift.seed = substream_seed(seed, "shift." + e.name);
        out.evals[e.name] = data::apply_shift(in_dist, shift);
        break;
      }
      case EvalSpec::Kind::kCsv:
        break;  // already loaded
    }
  }

  for (const auto& [name, ds] : out.evals)
    require(ds.stats.fingerprint() == out.train.stats.fingerprint(),
            "run: evaluation set '", name, "' not whitened with training statistics");

  auto warn = [](const std::string& what, const data::EncodedDataset& ds) {
    if (ds.rejected_rows > 0)
      std::cerr << "warning: " << what << ": dropped " << ds.rejected_rows
                << " row(s) with missing values\n";
    if (ds.unseen_category_hits > 0)
      std::cerr << "warning: " << what << ": " << ds.unseen_category_hits
                << " categorical value(s) unseen in training mapped to zero blocks\n";
  };
  warn("training set", out.train);
  for (const auto& [name, ds] : out.evals) warn("evaluation set '" + name + "'", ds);
  return out;
}

struct SingleRun {
  std::uint64_t seed = 0;
  std::map<std::string, train::EvalMetrics> metrics;
  train::TrainResult result;
};

inline SingleRun run_single(const ExperimentSpec& spec, std::uint64_t seed,
                            const std::optional<std::string>& persist_data_dir = std::nullopt,
                            ResolvedData* data_out = nullptr) {
  ResolvedData rd = resolve_data(spec, seed, persist_data_dir);

  train::TrainConfig cfg = spec.config;
  cfg.seed = seed;

  std::optional<nn::FairModel> init_from;
  if (spec.finetune_from) {
    require(std::filesystem::exists(*spec.finetune_from), "run: missing checkpoint ",
            *spec.finetune_from);
    nn::FairModel ckpt = nn::load_checkpoint(*spec.finetune_from);
    cfg.mlp = ckpt.spec;
    init_from = std::move(ckpt);
  }

  SingleRun out;
  out.seed = seed;
  out.result = train::train(cfg, rd.train, rd.evals, init_from);

  if (out.result.epochs.empty()) {
    for (const auto& [name, ds] : rd.evals)
      out.metrics[name] = train::evaluate(out.result.model, ds);
  } else {
    out.metrics = out.result.epochs.back().eval;
  }
  if (data_out != nullptr) *data_out = std::move(rd);
  return out;
}

inline json metrics_to_json(const std::map<std::string, train::EvalMetrics>& metrics) {
  json j = json::object();
  for (const auto& [name, m] : metrics) {
    // File convention: percentages.
    j[name] = {{"accuracy", 100.0 * m.accuracy},
               {"delta_eo", 100.0 * m.delta_eo},
               {"delta_dp", 100.0 * m.delta_dp}};
  }
  return j;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write ", path);
  out << text;
}

inline void write_epoch_log(const std::string& path, const train::TrainResult& r) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write ", path);
  for (const auto& rec : r.epochs) {
    json j = {{"epoch", rec.epoch}, {"lr", rec.lr},        {"L_clf", rec.loss.clf},
              {"L_adv", rec.loss.adv}, {"L_cm", rec.loss.cm}, {"total", rec.loss.total}};
    json ev = json::object();
    for (const auto& [name, m] : rec.eval)
      ev[name] = {{"accuracy", 100.0 * m.accuracy},
                  {"delta_eo", 100.0 * m.delta_eo},
                  {"delta_dp", 100.0 * m.delta_dp}};
    j["eval"] = std::move(ev);
    out << j.dump() << "\n";
  }
}

// Per-sample curvature dump over the training set at the final parameters.
inline void write_curvature_csv(const std::string& path, const nn::FairModel& model,
                                const data::EncodedDataset& train_set, double h) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write ", path);
  out << "id,a,curvature\n";
  out.precision(12);
  for (int i = 0; i < train_set.n(); ++i) {
    ad::Tensor row(1, train_set.dim());
    for (int j = 0; j < train_set.dim(); ++j) row.at(0, j) = train_set.x.at(i, j);
    const double c =
        curv::curvature_fd(model, row, train_set.y[static_cast<std::size_t>(i)], h, i);
    out << i << "," << train_set.a[static_cast<std::size_t>(i)] << "," << c << "\n";
  }
}

// Trains (or finetunes), evaluates on every configured set and writes
// metrics.json, epochs.jsonl, curvatures.csv and the checkpoint. With
// several seeds, per-seed artifacts land in seed_<s>/ and metrics.json adds
// mean and standard deviation per metric.
inline json run(const ExperimentSpec& spec_in) {
  ExperimentSpec spec = spec_in;
  spec.validate();
  namespace fs = std::filesystem;
  fs::create_directories(spec.out_dir);

  std::vector<std::uint64_t> seeds = spec.seeds;
  if (seeds.empty()) seeds = {spec.config.seed};

  json canonical = spec_to_json(spec);
  canonical.erase("out_dir");  // location does not index the experiment
  const std::string fp = fingerprint(canonical);

  json report;
  report["config"] = canonical;
  report["fingerprint"] = fp;

  const bool multi = seeds.size() > 1;
  std::vector<SingleRun> runs;
  for (std::uint64_t seed : seeds) {
    const std::string dir = multi
                                ? (fs::path(spec.out_dir) / ("seed_" + std::to_string(seed))).string()
                                : spec.out_dir;
    fs::create_directories(dir);
    const std::optional<std::string> data_dir =
        spec.source.kind == DataSource::Kind::kSynthetic
            ? std::optional<std::string>((fs::path(dir) / "data").string())
            : std::nullopt;

    ResolvedData rd;
    SingleRun r = run_single(spec, seed, data_dir, &rd);
    nn::save_checkpoint(r.result.model, (fs::path(dir) / "checkpoint.json").string());
    write_epoch_log((fs::path(dir) / "epochs.jsonl").string(), r.result);
    write_curvature_csv((fs::path(dir) / "curvatures.csv").string(), r.result.model, rd.train,
                        spec.config.h);
    runs.push_back(std::move(r));
  }

  if (!multi) {
    report["seed"] = seeds[0];
    report["metrics"] = metrics_to_json(runs[0].metrics);
  } else {
    report["seeds"] = seeds;
    json runs_json = json::array();
    for (const auto& r : runs)
      runs_json.push_back({{"seed", r.seed}, {"metrics", metrics_to_json(r.metrics)}});
    report["runs"] = std::move(runs_json);

    // Mean and standard deviation (population) per set and metric, in
    // percent, matching the per-run convention.
    json mean = json::object(), stddev = json::object();
    for (const auto& [name, unused] : runs[0].metrics) {
      (void)unused;
      auto agg = [&](auto getter) {
        double m = 0.0, s = 0.0;
        for (const auto& r : runs) m += getter(r.metrics.at(name));
        m /= static_cast<double>(runs.size());
        for (const auto& r : runs) {
          const double d = getter(r.metrics.at(name)) - m;
          s += d * d;
        }
        return std::pair<double, double>(m, std::sqrt(s / static_cast<double>(runs.size())));
      };
      auto [acc_m, acc_s] = agg([](const train::EvalMetrics& m) { return 100.0 * m.accuracy; });
      auto [eo_m, eo_s] = agg([](const train::EvalMetrics& m) { return 100.0 * m.delta_eo; });
      auto [dp_m, dp_s] = agg([](const train::EvalMetrics& m) { return 100.0 * m.delta_dp; });
      mean[name] = {{"accuracy", acc_m}, {"delta_eo", eo_m}, {"delta_dp", dp_m}};
      stddev[name] = {{"accuracy", acc_s}, {"delta_eo", eo_s}, {"delta_dp", dp_s}};
    }
    report["mean"] = std::move(mean);
    report["std"] = std::move(stddev);
  }

  write_text((fs::path(spec.out_dir) / "metrics.json").string(), report.dump(2) + "\n");
  return report;
}

// Evaluation without training: loads a checkpoint and scores it on the
// spec's evaluation sets.
inline json evaluate_checkpoint(const std::string& checkpoint_path, const ExperimentSpec& spec) {
  require(std::filesystem::exists(checkpoint_path), "evaluate: missing checkpoint ",
          checkpoint_path);
  nn::FairModel model = nn::load_checkpoint(checkpoint_path);
  ResolvedData rd = resolve_data(spec, spec.config.seed);

  std::map<std::string, train::EvalMetrics> metrics;
  for (const auto& [name, ds] : rd.evals) metrics[name] = train::evaluate(model, ds);

  json report;
  report["checkpoint"] = checkpoint_path;
  report["metrics"] = metrics_to_json(metrics);
  std::filesystem::create_directories(spec.out_dir);
  write_text((std::filesystem::path(spec.out_dir) / "metrics.json").string(),
             report.dump(2) + "\n");
  return report;
}

// ---------------------------------------------------------------------------
// Hyperparameter sweep
// ---------------------------------------------------------------------------

struct SweepRow {
  double alpha = 0.0, gamma = 0.0, h = 0.0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::map<std::string, train::EvalMetrics> metrics;
};

struct SweepResult {
  std::vector<std::string> eval_names;  // in_dist first
  std::vector<SweepRow> rows;
};

// One run per (alpha, gamma, h, seed) grid point; failures are recorded and
// the sweep continues.
inline SweepResult sweep(const ExperimentSpec& base, const std::vector<double>& alphas,
                         const std::vector<double>& gammas, const std::vector<double>& hs,
                         const std::vector<std::uint64_t>& seeds) {
  require(!alphas.empty() && !gammas.empty() && !hs.empty() && !seeds.empty(),
          "sweep: empty grid");
  SweepResult out;
  for (const auto& e : base.evals) out.eval_names.push_back(e.name);

  for (double alpha : alphas)
    for (double gamma : gammas)
      for (double h : hs)
        for (std::uint64_t seed : seeds) {
          SweepRow row;
          row.alpha = alpha;
          row.gamma = gamma;
          row.h = h;
          row.seed = seed;
          try {
            ExperimentSpec cell = base;
            cell.config.alpha = alpha;
            cell.config.gamma = gamma;
            cell.config.h = h;
            cell.seeds.clear();
            SingleRun r = run_single(cell, seed);
            row.metrics = std::move(r.metrics);
          } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
          }
          out.rows.push_back(std::move(row));
        }
  return out;
}

inline void write_sweep_csv(const std::string& path, const SweepResult& sweep_result) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write ", path);
  out.precision(10);
  out << "alpha,gamma,h,seed,status,accuracy";
  for (const auto& name : sweep_result.eval_names) out << ",delta_eo_" << name;
  out << "\n";
  for (const auto& row : sweep_result.rows) {
    out << row.alpha << "," << row.gamma << "," << row.h << "," << row.seed << ","
        << (row.failed ? "failed" : "ok");
    if (row.failed) {
      out << ",";
      for (std::size_t i = 0; i < sweep_result.eval_names.size(); ++i) out << ",";
    } else {
      const auto& in_dist = row.metrics.count("in_dist") ? row.metrics.at("in_dist")
                                                         : row.metrics.begin()->second;
      out << "," << 100.0 * in_dist.accuracy;
      for (const auto& name : sweep_result.eval_names)
        out << "," << 100.0 * row.metrics.at(name).delta_eo;
    }
    out << "\n";
  }
}

struct ParetoPoint {
  std::string eval_set;
  double alpha = 0.0, gamma = 0.0, h = 0.0;
  double accuracy = 0.0;  // percent, in-distribution
  double delta_eo = 0.0;  // percent, on eval_set
};

// Per evaluation set: seed-averaged (accuracy, delta_eo) per grid cell, then
// the non-dominated subset (maximal accuracy for each achieved fairness
// level).
inline std::vector<ParetoPoint> pareto_front(const SweepResult& sweep_result) {
  struct Key {
    double alpha, gamma, h;
    bool operator<(const Key& o) const {
      if (alpha != o.alpha) return alpha < o.alpha;
      if (gamma != o.gamma) return gamma < o.gamma;
      return h < o.h;
    }
  };

  std::vector<ParetoPoint> front;
  for (const auto& name : sweep_result.eval_names) {
    std::map<Key, std::pair<ParetoPoint, int>> cells;
    for (const auto& row : sweep_result.rows) {
      if (row.failed) continue;
      Key k{row.alpha, row.gamma, row.h};
      auto& [point, count] = cells[k];
      const auto& in_dist = row.metrics.count("in_dist") ? row.metrics.at("in_dist")
                                                         : row.metrics.begin()->second;
      point.eval_set = name;
      point.alpha = row.alpha;
      point.gamma = row.gamma;
      point.h = row.h;
      point.accuracy += 100.0 * in_dist.accuracy;
      point.delta_eo += 100.0 * row.metrics.at(name).delta_eo;
      count += 1;
    }
    std::vector<ParetoPoint> points;
    for (auto& [k, pc] : cells) {
      (void)k;
      pc.first.accuracy /= pc.second;
      pc.first.delta_eo /= pc.second;
      points.push_back(pc.first);
    }
    for (const auto& p : points) {
      bool dominated = false;
      for (const auto& q : points) {
        if (q.accuracy >= p.accuracy && q.delta_eo <= p.delta_eo &&
            (q.accuracy > p.accuracy || q.delta_eo < p.delta_eo)) {
          dominated = true;
          break;
        }
      }
      if (!dominated) front.push_back(p);
    }
  }
  return front;
}

inline void write_pareto_csv(const std::string& path, const std::vector<ParetoPoint>& front) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write ", path);
  out.precision(10);
  out << "eval_set,alpha,gamma,h,accuracy,delta_eo\n";
  for (const auto& p : front)
    out << p.eval_set << "," << p.alpha << "," << p.gamma << "," << p.h << "," << p.accuracy
        << "," << p.delta_eo << "\n";
}

}  // namespace cuma::harness
