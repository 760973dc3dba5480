#pragma once

// Dataset pipeline: CSV + JSON schema in, whitened feature matrix with
// binary target and sensitive labels out. Categorical columns are one-hot
// expanded (category order = first appearance in the training split),
// whitening statistics are fitted on the training split only and applied to
// every evaluation split. Also: noise shifts, the synthetic biased
// generator, and group-stratified batching.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cuma/tensor.hpp"

namespace cuma::data {

using ad::Tensor;

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

enum class Role { kContinuous, kCategorical, kTarget, kSensitive };

struct BinRule {
  enum class Kind { kLabels, kTopFraction } kind = Kind::kLabels;
  std::string positive;     // labels: the value mapped to 1
  double fraction = 0.3;    // top_fraction: share of largest values mapped to 0
};

struct SchemaColumn {
  std::string name;
  Role role = Role::kContinuous;
  std::vector<std::string> categories;  // optional fixed category order
};

struct Schema {
  std::vector<SchemaColumn> columns;
  BinRule target_rule;
  BinRule sensitive_rule;

  void validate() const {
    int targets = 0, sensitives = 0;
    for (const auto& c : columns) {
      targets += c.role == Role::kTarget;
      sensitives += c.role == Role::kSensitive;
    }
    require(targets == 1, "schema: exactly one target column required, found ", targets);
    require(sensitives == 1, "schema: exactly one sensitive column required, found ", sensitives);
  }
};

inline Role role_from_string(const std::string& s) {
  if (s == "continuous") return Role::kContinuous;
  if (s == "categorical") return Role::kCategorical;
  if (s == "target") return Role::kTarget;
  if (s == "sensitive") return Role::kSensitive;
  fail("schema: unknown column role '", s, "'");
}

inline std::string role_to_string(Role r) {
  switch (r) {
    case Role::kContinuous: return "continuous";
    case Role::kCategorical: return "categorical";
    case Role::kTarget: return "target";
    case Role::kSensitive: return "sensitive";
  }
  return "?";
}

inline BinRule rule_from_json(const nlohmann::json& j) {
  BinRule r;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "labels") {
    r.kind = BinRule::Kind::kLabels;
    r.positive = j.at("positive").get<std::string>();
  } else if (kind == "top_fraction") {
    r.kind = BinRule::Kind::kTopFraction;
    r.fraction = j.at("fraction").get<double>();
    require(r.fraction > 0.0 && r.fraction < 1.0, "schema: top_fraction must be in (0,1), got ",
            r.fraction);
  } else {
    fail("schema: unknown binarization rule '", kind, "'");
  }
  return r;
}

inline nlohmann::json rule_to_json(const BinRule& r) {
  if (r.kind == BinRule::Kind::kLabels) return {{"kind", "labels"}, {"positive", r.positive}};
  return {{"kind", "top_fraction"}, {"fraction", r.fraction}};
}

inline Schema schema_from_json(const nlohmann::json& j) {
  Schema s;
  for (const auto& cj : j.at("columns")) {
    SchemaColumn c;
    c.name = cj.at("name").get<std::string>();
    c.role = role_from_string(cj.at("role").get<std::string>());
    if (cj.contains("categories")) c.categories = cj.at("categories").get<std::vector<std::string>>();
    s.columns.push_back(std::move(c));
  }
  s.target_rule = rule_from_json(j.at("target_rule"));
  s.sensitive_rule = rule_from_json(j.at("sensitive_rule"));
  s.validate();
  return s;
}

inline nlohmann::json schema_to_json(const Schema& s) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : s.columns) {
    nlohmann::json cj = {{"name", c.name}, {"role", role_to_string(c.role)}};
    if (!c.categories.empty()) cj["categories"] = c.categories;
    cols.push_back(std::move(cj));
  }
  return {{"columns", std::move(cols)},
          {"target_rule", rule_to_json(s.target_rule)},
          {"sensitive_rule", rule_to_json(s.sensitive_rule)}};
}

inline Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "schema: cannot read ", path);
  nlohmann::json j;
  in >> j;
  return schema_from_json(j);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  out.push_back(trim(field));
  return out;
}

inline bool is_missing(const std::string& v) { return v.empty() || v == "?" || v == "NA"; }

}  // namespace detail

inline RawTable load_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "csv: cannot read ", path);
  RawTable t;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "csv: ", path, " is empty");
  t.header = detail::split_csv_line(line);
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    t.rows.push_back(detail::split_csv_line(line));
    require(t.rows.back().size() == t.header.size(), "csv: row ", t.rows.size(), " of ", path,
            " has ", t.rows.back().size(), " fields, header has ", t.header.size());
  }
  return t;
}

inline void save_csv(const RawTable& t, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "csv: cannot write ", path);
  for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
  out << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Binarization
// ---------------------------------------------------------------------------

// The ceil(fraction*n) largest values get label 0, the rest label 1, ties at
// the threshold broken by stable input order. Returns labels plus the
// smallest value inside the 0 group (the threshold applied to later splits).
struct Binarization {
  std::vector<int> labels;
  double threshold = 0.0;
};

inline Binarization binarize_top_fraction(std::span<const double> values, double fraction = 0.30) {
  require(fraction > 0.0 && fraction < 1.0, "binarize: fraction must be in (0,1), got ", fraction);
  require(!values.empty(), "binarize: empty input");
  const double first = values.front();
  bool constant = true;
  for (double v : values)
    if (v != first) {
      constant = false;
      break;
    }
  require(!constant, "binarize: constant column, binarization degenerate");

  const std::size_t n = values.size();
  const auto zeros = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

  Binarization out;
  out.labels.assign(n, 1);
  for (std::size_t k = 0; k < zeros; ++k) out.labels[order[k]] = 0;
  out.threshold = values[order[zeros - 1]];
  return out;
}

// ---------------------------------------------------------------------------
// Encoder and EncodedDataset
// ---------------------------------------------------------------------------

struct Whitening {
  std::vector<double> mean;
  std::vector<double> std_dev;  // population (divide by n)

  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](double x) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(x));
      std::memcpy(&bits, &x, sizeof(bits));
      for (int k = 0; k < 8; ++k) {
        h ^= (bits >> (8 * k)) & 0xffULL;
        h *= 0x100000001b3ULL;
      }
    };
    for (double x : mean) feed(x);
    for (double x : std_dev) feed(x);
    return h;
  }
};

struct EncodedDataset {
  Tensor x;            // n x d, whitened
  std::vector<int> y;  // binary target
  std::vector<int> a;  // binary sensitive attribute
  Whitening stats;     // the training-split statistics used for whitening
  std::vector<std::string> feature_names;
  long rejected_rows = 0;   // rows dropped for missing values
  long unseen_category_hits = 0;

  int n() const { return x.rows; }
  int dim() const { return x.cols; }
};

class Encoder {
 public:
  explicit Encoder(Schema schema) : schema_(std::move(schema)) { schema_.validate(); }

  const Schema& schema() const { return schema_; }
  const Whitening& stats() const { return stats_; }

  // Fits categories, binarization thresholds and whitening statistics on the
  // training table and returns its encoding. Top-fraction binarization is
  // exact on this split (ceil(fraction*n) zeros).
  EncodedDataset fit_transform(const RawTable& table) {
    column_index_.clear();
    for (std::size_t c = 0; c < schema_.columns.size(); ++c) {
      const std::string& want = schema_.columns[c].name;
      auto it = std::find(table.header.begin(), table.header.end(), want);
      require(it != table.header.end(), "encode: column '", want, "' missing from CSV header");
      column_index_.push_back(static_cast<std::size_t>(it - table.header.begin()));
    }

    std::vector<std::size_t> kept = usable_rows(table);
    require(!kept.empty(), "encode: no usable rows in training table");

    // Category order: first appearance in the training split, unless pinned
    // in the schema.
    categories_.assign(schema_.columns.size(), {});
    for (std::size_t c = 0; c < schema_.columns.size(); ++c) {
      if (schema_.columns[c].role != Role::kCategorical) continue;
      if (!schema_.columns[c].categories.empty()) {
        categories_[c] = schema_.columns[c].categories;
        continue;
      }
      for (std::size_t r : kept) {
        const std::string& v = table.rows[r][column_index_[c]];
        if (std::find(categories_[c].begin(), categories_[c].end(), v) == categories_[c].end())
          categories_[c].push_back(v);
      }
    }

    feature_names_.clear();
    for (std::size_t c = 0; c < schema_.columns.size(); ++c) {
      const auto& col = schema_.columns[c];
      if (col.role == Role::kContinuous) feature_names_.push_back(col.name);
      if (col.role == Role::kCategorical)
        for (const std::string& cat : categories_[c])
          feature_names_.push_back(col.name + "=" + cat);
    }

    // Binarization thresholds from the training split.
    target_threshold_.reset();
    sensitive_threshold_.reset();
    std::vector<int> y = fit_labels(table, kept, Role::kTarget, schema_.target_rule,
                                    target_threshold_);
    std::vector<int> a = fit_labels(table, kept, Role::kSensitive, schema_.sensitive_rule,
                                    sensitive_threshold_);

    Tensor raw = encode_features(table, kept, nullptr);

    // Population whitening statistics.
    stats_.mean.assign(static_cast<std::size_t>(raw.cols), 0.0);
    stats_.std_dev.assign(static_cast<std::size_t>(raw.cols), 0.0);
    for (int i = 0; i < raw.rows; ++i)
      for (int j = 0; j < raw.cols; ++j) stats_.mean[static_cast<std::size_t>(j)] += raw.at(i, j);
    for (double& m : stats_.mean) m /= raw.rows;
    for (int i = 0; i < raw.rows; ++i)
      for (int j = 0; j < raw.cols; ++j) {
        const double d = raw.at(i, j) - stats_.mean[static_cast<std::size_t>(j)];
        stats_.std_dev[static_cast<std::size_t>(j)] += d * d;
      }
    for (double& s : stats_.std_dev) s = std::sqrt(s / raw.rows);
    fitted_ = true;

    EncodedDataset out;
    out.x = whiten(std::move(raw));
    out.y = std::move(y);
    out.a = std::move(a);
    out.stats = stats_;
    out.feature_names = feature_names_;
    out.rejected_rows = static_cast<long>(table.rows.size() - kept.size());
    return out;
  }

  // Applies the fitted encoding to another table (an evaluation split).
  // Unseen categories map to an all-zero one-hot block; top-fraction labels
  // use the training threshold.
  EncodedDataset transform(const RawTable& table) const {
    require(fitted_, "encode: transform before fit");
    std::vector<std::size_t> col_index;
    for (const auto& col : schema_.columns) {
      auto it = std::find(table.header.begin(), table.header.end(), col.name);
      require(it != table.header.end(), "encode: column '", col.name, "' missing from CSV header");
      col_index.push_back(static_cast<std::size_t>(it - table.header.begin()));
    }

    std::vector<std::size_t> kept = usable_rows(table, &col_index);
    require(!kept.empty(), "encode: no usable rows in table");

    EncodedDataset out;
    long unseen = 0;
    out.x = whiten(encode_features(table, kept, &unseen, &col_index));
    out.y = apply_labels(table, kept, Role::kTarget, schema_.target_rule, target_threshold_,
                         col_index);
    out.a = apply_labels(table, kept, Role::kSensitive, schema_.sensitive_rule,
                         sensitive_threshold_, col_index);
    out.stats = stats_;
    out.feature_names = feature_names_;
    out.rejected_rows = static_cast<long>(table.rows.size() - kept.size());
    out.unseen_category_hits = unseen;
    return out;
  }

 private:
  std::vector<std::size_t> usable_rows(const RawTable& table,
                                       const std::vector<std::size_t>* cols = nullptr) const {
    const std::vector<std::size_t>& index = cols ? *cols : column_index_;
    std::vector<std::size_t> kept;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      bool ok = true;
      for (std::size_t c = 0; c < schema_.columns.size() && ok; ++c)
        ok = !detail::is_missing(table.rows[r][index[c]]);
      if (ok) kept.push_back(r);
    }
    return kept;
  }

  static double parse_number(const std::string& v, const std::string& col) {
    try {
      std::size_t pos = 0;
      const double x = std::stod(v, &pos);
      require(pos == v.size(), "encode: trailing characters");
      return x;
    } catch (const std::exception&) {
      fail("encode: column '", col, "' has non-numeric value '", v, "'");
    }
  }

  std::vector<int> fit_labels(const RawTable& table, const std::vector<std::size_t>& kept,
                              Role role, const BinRule& rule,
                              std::optional<double>& threshold_out) {
    const std::size_t c = find_role(role);
    if (rule.kind == BinRule::Kind::kLabels) {
      std::vector<int> out;
      for (std::size_t r : kept)
        out.push_back(table.rows[r][column_index_[c]] == rule.positive ? 1 : 0);
      return out;
    }
    std::vector<double> values;
    for (std::size_t r : kept)
      values.push_back(parse_number(table.rows[r][column_index_[c]], schema_.columns[c].name));
    Binarization b = binarize_top_fraction(values, rule.fraction);
    threshold_out = b.threshold;
    return std::move(b.labels);
  }

  std::vector<int> apply_labels(const RawTable& table, const std::vector<std::size_t>& kept,
                                Role role, const BinRule& rule,
                                const std::optional<double>& threshold,
                                const std::vector<std::size_t>& col_index) const {
    const std::size_t c = find_role(role);
    std::vector<int> out;
    if (rule.kind == BinRule::Kind::kLabels) {
      for (std::size_t r : kept)
        out.push_back(table.rows[r][col_index[c]] == rule.positive ? 1 : 0);
      return out;
    }
    require(threshold.has_value(), "encode: missing fitted binarization threshold");
    for (std::size_t r : kept) {
      const double v = parse_number(table.rows[r][col_index[c]], schema_.columns[c].name);
      out.push_back(v >= *threshold ? 0 : 1);
    }
    return out;
  }

  std::size_t find_role(Role role) const {
    for (std::size_t c = 0; c < schema_.columns.size(); ++c)
      if (schema_.columns[c].role == role) return c;
    fail("encode: schema has no ", role_to_string(role), " column");
  }

  Tensor encode_features(const RawTable& table, const std::vector<std::size_t>& kept,
                         long* unseen, const std::vector<std::size_t>* cols = nullptr) const {
    const std::vector<std::size_t>& index = cols ? *cols : column_index_;
    int width = 0;
    for (std::size_t c = 0; c < schema_.columns.size(); ++c) {
      if (schema_.columns[c].role == Role::kContinuous) width += 1;
      if (schema_.columns[c].role == Role::kCategorical)
        width += static_cast<int>(categories_[c].size());
    }
    Tensor x(static_cast<int>(kept.size()), width);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const auto& row = table.rows[kept[i]];
      int j = 0;
      for (std::size_t c = 0; c < schema_.columns.size(); ++c) {
        const auto& col = schema_.columns[c];
        if (col.role == Role::kContinuous) {
          x.at(static_cast<int>(i), j++) = parse_number(row[index[c]], col.name);
        } else if (col.role == Role::kCategorical) {
          const std::string& v = row[index[c]];
          auto it = std::find(categories_[c].begin(), categories_[c].end(), v);
          if (it != categories_[c].end()) {
            x.at(static_cast<int>(i), j + static_cast<int>(it - categories_[c].begin())) = 1.0;
          } else if (unseen != nullptr) {
            ++*unseen;  // all-zero block for a category unseen in training
          } else {
            fail("encode: category '", v, "' in column '", col.name,
                 "' unseen while fitting");
          }
          j += static_cast<int>(categories_[c].size());
        }
      }
    }
    return x;
  }

  Tensor whiten(Tensor raw) const {
    for (int i = 0; i < raw.rows; ++i)
      for (int j = 0; j < raw.cols; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const double s = stats_.std_dev[ju];
        // Constant training features carry no information; they whiten to 0.
        raw.at(i, j) = s > 1e-12 ? (raw.at(i, j) - stats_.mean[ju]) / s : 0.0;
      }
    return raw;
  }

  Schema schema_;
  std::vector<std::size_t> column_index_;
  std::vector<std::vector<std::string>> categories_;
  std::vector<std::string> feature_names_;
  Whitening stats_;
  std::optional<double> target_threshold_;
  std::optional<double> sensitive_threshold_;
  bool fitted_ = false;
};

// Convenience: fit-and-encode a training CSV against a schema file.
inline EncodedDataset load_and_encode(const std::string& csv_path, const Schema& schema,
                                      Encoder* encoder_out = nullptr) {
  Encoder enc(schema);
  EncodedDataset d = enc.fit_transform(load_csv(csv_path));
  if (encoder_out != nullptr) *encoder_out = enc;
  return d;
}

// ---------------------------------------------------------------------------
// Distribution shifts
// ---------------------------------------------------------------------------

struct ShiftSpec {
  enum class Kind { kGaussian, kUniform } kind = Kind::kGaussian;
  double std_dev = 0.03;
  std::uint64_t seed = 0;

  void validate() const { require(std_dev > 0.0, "shift: standard deviation must be positive"); }
};

inline ShiftSpec::Kind shift_kind_from_string(const std::string& s) {
  if (s == "gaussian") return ShiftSpec::Kind::kGaussian;
  if (s == "uniform") return ShiftSpec::Kind::kUniform;
  fail("shift: unknown kind '", s, "'");
}

// Covariate shift only: noise on the whitened features, labels untouched.
// Uniform noise uses bound b = std*sqrt(3) so both kinds share mean 0 and
// the requested standard deviation.
inline EncodedDataset apply_shift(const EncodedDataset& d, const ShiftSpec& spec) {
  spec.validate();
  EncodedDataset out = d;
  std::mt19937_64 rng(substream_seed(spec.seed, "shift"));
  if (spec.kind == ShiftSpec::Kind::kGaussian) {
    std::normal_distribution<double> noise(0.0, spec.std_dev);
    for (double& v : out.x.v) v += noise(rng);
  } else {
    const double b = spec.std_dev * std::sqrt(3.0);
    std::uniform_real_distribution<double> noise(-b, b);
    for (double& v : out.x.v) v += noise(rng);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic biased generator
// ---------------------------------------------------------------------------

struct SynthSpec {
  int n = 2000;
  int d = 20;
  double group_ratio = 0.7;  // P(A=0)
  double noise_gap = 0.25;   // extra minority label noise + subspace rotation
  std::uint64_t seed = 1;
  double test_fraction = 0.25;
};

struct SynthResult {
  EncodedDataset train;
  EncodedDataset test;
  Schema schema;
  RawTable train_table;
  RawTable test_table;
  nlohmann::json metadata;  // generator parameters, recorded verbatim
};

// Two Gaussian class clusters per group. Group A=1 (the minority) gets a
// rotated signal subspace, a tighter class margin and more label-flip noise,
// all scaled by noise_gap; the groups also differ in base positive rate, so
// a plain model picks up the group marker and the adversary has bias to
// remove. noise_gap = 0 makes the groups geometrically identical.
inline SynthResult synth_biased(const SynthSpec& spec,
                                const std::optional<std::string>& persist_dir = std::nullopt) {
  require(spec.group_ratio > 0.0 && spec.group_ratio < 1.0, "synth: group ratio must be in (0,1)");
  require(spec.n >= 40, "synth: need at least 40 samples");
  require(spec.d >= 8, "synth: need at least 8 feature dimensions");

  const int k = std::min(4, spec.d / 4);  // signal subspace width
  const double base_rate_gap = 0.4;       // P(y=1|a=0) - P(y=1|a=1)
  const double margin = 1.25;
  const double cluster_std = 1.0;
  const double flip_base = 0.02;
  const double flip_minority = flip_base + 0.35 * spec.noise_gap;
  const double rotation = std::min(1.2, 0.9 * spec.noise_gap);
  const double minority_margin = margin * (1.0 - 0.3 * std::min(1.0, spec.noise_gap));
  const double marker_scale = 1.0;

  std::mt19937_64 rng(substream_seed(spec.seed, "synth"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  RawTable table;
  for (int j = 0; j < spec.d; ++j) table.header.push_back("f" + std::to_string(j));
  table.header.push_back("y");
  table.header.push_back("a");

  const double inv_sqrt_k = 1.0 / std::sqrt(static_cast<double>(k));
  auto emit_row = [&](std::vector<std::string>& out) {
    const int a = unit(rng) < spec.group_ratio ? 0 : 1;
    const double pos_rate = a == 0 ? 0.5 + base_rate_gap / 2.0 : 0.5 - base_rate_gap / 2.0;
    const int y_true = unit(rng) < pos_rate ? 1 : 0;
    const double cls = y_true == 1 ? 1.0 : -1.0;
    const double delta = a == 0 ? margin : minority_margin;

    std::vector<double> x(static_cast<std::size_t>(spec.d), 0.0);
    // Signal along dims [0,k) for the majority; rotated into [k,2k) for the
    // minority.
    const double phi = a == 0 ? 0.0 : rotation;
    for (int j = 0; j < k; ++j) x[static_cast<std::size_t>(j)] += cls * delta * std::cos(phi) * inv_sqrt_k;
    for (int j = k; j < 2 * k; ++j) x[static_cast<std::size_t>(j)] += cls * delta * std::sin(phi) * inv_sqrt_k;
    for (int j = 0; j < spec.d - 1; ++j) x[static_cast<std::size_t>(j)] += cluster_std * normal(rng);
    // Overt group marker in the last column.
    x[static_cast<std::size_t>(spec.d - 1)] = (a == 1 ? 1.0 : -1.0) * marker_scale + 0.25 * normal(rng);

    const double flip = a == 0 ? flip_base : flip_minority;
    const int y = unit(rng) < flip ? 1 - y_true : y_true;

    out.clear();
    std::ostringstream os;
    for (double v : x) {
      os.str("");
      os.precision(17);
      os << v;
      out.push_back(os.str());
    }
    out.push_back(std::to_string(y));
    out.push_back(std::to_string(a));
  };

  std::vector<std::string> row;
  for (int i = 0; i < spec.n; ++i) {
    emit_row(row);
    table.rows.push_back(row);
  }

  const auto n_test = static_cast<std::size_t>(spec.test_fraction * spec.n);
  SynthResult result;
  result.train_table.header = table.header;
  result.test_table.header = table.header;
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    (i < table.rows.size() - n_test ? result.train_table : result.test_table)
        .rows.push_back(std::move(table.rows[i]));

  Schema schema;
  for (int j = 0; j < spec.d; ++j)
    schema.columns.push_back({"f" + std::to_string(j), Role::kContinuous, {}});
  schema.columns.push_back({"y", Role::kTarget, {}});
  schema.columns.push_back({"a", Role::kSensitive, {}});
  schema.target_rule = {BinRule::Kind::kLabels, "1", 0.3};
  schema.sensitive_rule = {BinRule::Kind::kLabels, "1", 0.3};
  result.schema = schema;

  result.metadata = {{"n", spec.n},
                     {"d", spec.d},
                     {"group_ratio", spec.group_ratio},
                     {"noise_gap", spec.noise_gap},
                     {"seed", spec.seed},
                     {"test_fraction", spec.test_fraction},
                     {"signal_dims", k},
                     {"base_rate_gap", base_rate_gap},
                     {"margin", margin},
                     {"minority_margin", minority_margin},
                     {"cluster_std", cluster_std},
                     {"flip_base", flip_base},
                     {"flip_minority", flip_minority},
                     {"rotation_rad", rotation},
                     {"marker_scale", marker_scale}};

  if (persist_dir) {
    std::filesystem::create_directories(*persist_dir);
    save_csv(result.train_table, *persist_dir + "/train.csv");
    save_csv(result.test_table, *persist_dir + "/test.csv");
    std::ofstream sj(*persist_dir + "/schema.json");
    sj << schema_to_json(schema).dump(2) << "\n";
    std::ofstream mj(*persist_dir + "/generator.json");
    mj << result.metadata.dump(2) << "\n";
  }

  // Every path exercises the same loader: encode through the CSV tables.
  Encoder enc(schema);
  result.train = enc.fit_transform(result.train_table);
  result.test = enc.transform(result.test_table);
  return result;
}

// ---------------------------------------------------------------------------
// Stratified batching
// ---------------------------------------------------------------------------

struct BatchPlan {
  std::vector<std::vector<std::size_t>> batches;
  bool both_groups_ok = true;  // false: a group has fewer than 2 samples total
};

// Group proportions are preserved per batch (within one sample); each batch
// gets at least two samples from each group whenever the group is large
// enough for that to be possible across all batches.
inline BatchPlan stratified_batches(std::span<const int> a, int batch_size, std::uint64_t seed) {
  require(batch_size >= 4, "batches: batch size must be at least 4, got ", batch_size);
  require(!a.empty(), "batches: empty dataset");

  std::vector<std::size_t> group[2];
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(a[i] == 0 || a[i] == 1, "batches: sensitive attribute must be binary");
    group[a[i]].push_back(i);
  }

  BatchPlan plan;
  plan.both_groups_ok = group[0].size() >= 2 && group[1].size() >= 2;

  std::mt19937_64 rng(seed);
  std::shuffle(group[0].begin(), group[0].end(), rng);
  std::shuffle(group[1].begin(), group[1].end(), rng);

  const std::size_t n = a.size();
  const std::size_t n_batches =
      (n + static_cast<std::size_t>(batch_size) - 1) / static_cast<std::size_t>(batch_size);
  plan.batches.assign(n_batches, {});

  // Spread each group evenly: batch b takes floor or ceil of its share.
  for (int g = 0; g < 2; ++g) {
    const std::size_t total = group[g].size();
    const std::size_t base = total / n_batches;
    const std::size_t rem = total % n_batches;
    std::size_t off = 0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t take = base + (b < rem ? 1 : 0);
      for (std::size_t k = 0; k < take; ++k) plan.batches[b].push_back(group[g][off++]);
    }
  }
  return plan;
}

}  // namespace cuma::data
