#pragma once

// On-disk formats:
//   <name>.sig.csv       one sample per line, shortest round-trip decimal
//   <name>.meta.json     sample_rate, labels, seed, generator_params
//   dataset.json         [{signal_path, meta_path}, ...] relative to the manifest
//   features.csv         header of feature names + "label", one row per record
//   model.rfj            versioned JSON forest with the MFCC config fingerprint
// Every file is written to a temporary sibling and renamed into place.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "forest.hpp"
#include "record.hpp"

namespace esdgait::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc{}) throw IoError("cannot format number");
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw IoError("invalid number '" + std::string(s) + "' in " + where);
  return v;
}

inline void write_text_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

// --- signals ---------------------------------------------------------------

inline std::string signal_to_csv(std::span<const double> samples) {
  std::string out;
  out.reserve(samples.size() * 24);
  for (double v : samples) {
    out += format_double(v);
    out += '\n';
  }
  return out;
}

inline std::vector<double> parse_signal(std::istream& in, const std::string& where) {
  std::vector<double> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    samples.push_back(parse_double(line, where + ":" + std::to_string(line_no)));
  }
  return samples;
}

inline std::vector<double> read_signal_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_signal(in, path.string());
}

inline json record_meta(const SignalRecord& r) {
  return {{"sample_rate", r.sample_rate},   {"person_id", r.labels.person_id}, {"mood", r.labels.mood},
          {"plant_type", r.labels.plant_type}, {"location", r.labels.location},  {"activity", r.labels.activity},
          {"seed", r.seed},                 {"generator_params", r.generator_params}};
}

struct ManifestEntry {
  fs::path signal_path;
  fs::path meta_path;
};

/// Writes `<dir>/<name>.sig.csv` and `<dir>/<name>.meta.json`.
inline ManifestEntry write_record(const fs::path& dir, const std::string& name, const SignalRecord& record) {
  record.validate();
  ManifestEntry e{dir / (name + ".sig.csv"), dir / (name + ".meta.json")};
  write_text_atomic(e.signal_path, signal_to_csv(record.samples));
  write_json(e.meta_path, record_meta(record));
  return e;
}

inline SignalRecord read_record(const fs::path& signal_path, const fs::path& meta_path) {
  SignalRecord r;
  r.samples = read_signal_csv(signal_path);
  const json meta = read_json(meta_path);
  try {
    r.sample_rate = meta.at("sample_rate").get<double>();
    r.labels.person_id = meta.value("person_id", "");
    r.labels.mood = meta.value("mood", "neutral");
    r.labels.plant_type = meta.value("plant_type", "");
    r.labels.location = meta.value("location", "");
    r.labels.activity = meta.value("activity", "walk");
    r.seed = meta.value("seed", std::uint64_t{0});
    r.generator_params = meta.value("generator_params", json::object());
  } catch (const json::exception& e) {
    throw IoError("bad record metadata in " + meta_path.string() + ": " + e.what());
  }
  r.validate();
  return r;
}

/// Manifest paths are stored relative to the manifest's directory.
inline void write_manifest(const fs::path& manifest_path, const std::vector<ManifestEntry>& entries) {
  const fs::path base = manifest_path.has_parent_path() ? manifest_path.parent_path() : fs::path(".");
  json list = json::array();
  for (const auto& e : entries)
    list.push_back({{"signal_path", e.signal_path.lexically_relative(base).generic_string()},
                    {"meta_path", e.meta_path.lexically_relative(base).generic_string()}});
  write_json(manifest_path, list);
}

/// Entries with paths resolved against the manifest's directory.
inline std::vector<ManifestEntry> read_manifest(const fs::path& manifest_path) {
  const json list = read_json(manifest_path);
  if (!list.is_array()) throw IoError("manifest " + manifest_path.string() + " is not a list");
  const fs::path base = manifest_path.has_parent_path() ? manifest_path.parent_path() : fs::path(".");
  std::vector<ManifestEntry> out;
  for (const auto& item : list) {
    try {
      out.push_back({base / item.at("signal_path").get<std::string>(), base / item.at("meta_path").get<std::string>()});
    } catch (const json::exception& e) {
      throw IoError("bad manifest entry in " + manifest_path.string() + ": " + e.what());
    }
  }
  return out;
}

// --- feature tables --------------------------------------------------------

struct FeatureTable {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
};

inline void write_features_csv(const fs::path& path, const FeatureTable& table) {
  std::string out;
  for (const auto& n : table.feature_names) {
    out += n;
    out += ',';
  }
  out += "label\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    for (double v : table.rows[i]) {
      out += format_double(v);
      out += ',';
    }
    out += table.labels[i];
    out += '\n';
  }
  write_text_atomic(path, out);
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline FeatureTable read_features_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  FeatureTable t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  for (auto cell : split_commas(line)) t.feature_names.emplace_back(cell);
  if (t.feature_names.empty() || t.feature_names.back() != "label")
    throw IoError(path.string() + ": last column must be 'label'");
  t.feature_names.pop_back();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != t.feature_names.size() + 1)
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(t.feature_names.size() + 1) + " columns");
    std::vector<double> row(t.feature_names.size());
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = parse_double(cells[j], path.string() + ":" + std::to_string(line_no));
    t.rows.push_back(std::move(row));
    t.labels.emplace_back(cells.back());
  }
  return t;
}

/// Dataset with classes = sorted distinct label strings.
inline forest::Dataset to_dataset(const FeatureTable& t) {
  forest::Dataset d;
  d.n_rows = t.rows.size();
  d.n_cols = t.feature_names.size();
  d.feature_names = t.feature_names;
  std::vector<std::string> classes = t.labels;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  d.class_names = classes;
  d.features.reserve(d.n_rows * d.n_cols);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    d.features.insert(d.features.end(), t.rows[i].begin(), t.rows[i].end());
    d.labels.push_back(static_cast<int>(std::lower_bound(classes.begin(), classes.end(), t.labels[i]) - classes.begin()));
  }
  return d;
}

// --- model files -----------------------------------------------------------

inline constexpr std::string_view kModelFormat = "esdgait-random-forest";
inline constexpr int kModelVersion = 1;

/// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
inline std::string fingerprint(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

inline json tree_to_json(const forest::DecisionTree& tree) {
  json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
       n_samples = json::array(), impurity = json::array(), decrease = json::array(), counts = json::array();
  for (const auto& n : tree.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    n_samples.push_back(n.n_samples);
    impurity.push_back(n.impurity);
    decrease.push_back(n.weighted_impurity_decrease);
    counts.push_back(n.class_counts);
  }
  return {{"feature", feature},     {"threshold", threshold}, {"left", left},
          {"right", right},         {"n_samples", n_samples}, {"impurity", impurity},
          {"impurity_decrease_weighted", decrease}, {"class_counts", counts}};
}

inline forest::DecisionTree tree_from_json(const json& j, std::size_t n_features, std::size_t n_classes) {
  forest::DecisionTree tree;
  tree.n_features = n_features;
  tree.n_classes = n_classes;
  const auto& feature = j.at("feature");
  const std::size_t n = feature.size();
  tree.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& node = tree.nodes[i];
    node.feature = feature[i].get<int>();
    node.threshold = j.at("threshold")[i].get<double>();
    node.left = j.at("left")[i].get<int>();
    node.right = j.at("right")[i].get<int>();
    node.n_samples = j.at("n_samples")[i].get<std::size_t>();
    node.impurity = j.at("impurity")[i].get<double>();
    node.weighted_impurity_decrease = j.at("impurity_decrease_weighted")[i].get<double>();
    node.class_counts = j.at("class_counts")[i].get<std::vector<double>>();
    const bool leaf = node.feature < 0;
    if (node.class_counts.size() != n_classes ||
        (!leaf && (static_cast<std::size_t>(node.feature) >= n_features || node.left <= static_cast<int>(i) ||
                   node.right <= static_cast<int>(i) || static_cast<std::size_t>(node.left) >= n ||
                   static_cast<std::size_t>(node.right) >= n)))
      throw IoError("model tree node " + std::to_string(i) + " is malformed");
  }
  // Depths are not stored; recompute from the root.
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = tree.nodes[i];
    if (node.is_leaf()) continue;
    tree.nodes[static_cast<std::size_t>(node.left)].depth = node.depth + 1;
    tree.nodes[static_cast<std::size_t>(node.right)].depth = node.depth + 1;
  }
  return tree;
}

inline json model_to_json(const forest::RandomForestModel& model, const std::string& mfcc_fingerprint) {
  json trees = json::array();
  for (const auto& t : model.trees) trees.push_back(tree_to_json(t));
  return {{"format", kModelFormat},
          {"version", kModelVersion},
          {"mfcc_fingerprint", mfcc_fingerprint},
          {"params", model.params.to_json()},
          {"feature_names", model.feature_names},
          {"class_names", model.class_names},
          {"per_tree_seeds", model.per_tree_seeds},
          {"trees", trees}};
}

struct LoadedModel {
  forest::RandomForestModel model;
  std::string mfcc_fingerprint;
};

inline LoadedModel model_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat) throw IoError("not a random forest model file");
    if (j.at("version").get<int>() != kModelVersion)
      throw IoError("unsupported model version " + std::to_string(j.at("version").get<int>()));
    LoadedModel out;
    out.mfcc_fingerprint = j.at("mfcc_fingerprint").get<std::string>();
    auto& m = out.model;
    m.params = forest::ForestParams::from_json(j.at("params"));
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.per_tree_seeds = j.at("per_tree_seeds").get<std::vector<std::uint64_t>>();
    for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t, m.n_features(), m.n_classes()));
    if (m.trees.size() != m.params.n_estimators) throw IoError("model tree count does not match n_estimators");
    return out;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const fs::path& path, const forest::RandomForestModel& model, const std::string& mfcc_fingerprint) {
  write_json(path, model_to_json(model, mfcc_fingerprint));
}

/// Loads a model and refuses it when its MFCC fingerprint differs from
/// `expected_fingerprint` (if given).
inline LoadedModel load_model(const fs::path& path, const std::optional<std::string>& expected_fingerprint = {}) {
  LoadedModel m = model_from_json(read_json(path));
  if (expected_fingerprint && *expected_fingerprint != m.mfcc_fingerprint) {
    throw ValidationError("model " + path.string() + " was trained on MFCC config " + m.mfcc_fingerprint +
                          " but the features use " + *expected_fingerprint);
  }
  return m;
}

}  // namespace esdgait::io
