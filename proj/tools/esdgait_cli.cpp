// esdgait: synthesize gait recordings, extract MFCC features, train and
// evaluate random forests, build report tables and detect leg shaking.
//
// Precedence for every setting: command-line flag > config file > default.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "esdgait/experiment.hpp"

namespace fs = std::filesystem;
using namespace esdgait;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  unsigned jobs = 1;
  bool quiet = false;
};

experiment::ExperimentConfig load(const GlobalOptions& g, bool required = true) {
  json j;
  if (!g.config_path.empty()) {
    j = io::read_json(g.config_path);
  } else if (required) {
    throw ValidationError("--config is required for this command");
  } else {
    j = json::object();
  }
  if (g.seed) j["seed"] = *g.seed;
  if (!j.contains("seed")) j["seed"] = 0;
  return experiment::ExperimentConfig::from_json(j);
}

void say(const GlobalOptions& g, const std::string& line) {
  if (!g.quiet) std::cout << line << std::endl;
}

std::string fmt(double v) { return io::format_double(v); }

fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

// --- simulate ----------------------------------------------------------------

int cmd_simulate(const GlobalOptions& g, std::optional<std::size_t> samples_per_cell) {
  json j = io::read_json(g.config_path.empty() ? throw ValidationError("--config is required") : g.config_path);
  if (g.seed) j["seed"] = *g.seed;
  if (samples_per_cell) {
    for (auto& p : j["dataset"]["persons"]) p["samples"] = *samples_per_cell;
  }
  const auto config = experiment::ExperimentConfig::from_json(j);
  const fs::path out = g.out_dir;
  const auto records = experiment::simulate(config, g.jobs);
  const auto manifest = experiment::write_dataset(out, records);
  io::write_json(out / "config.resolved.json", config.to_json());
  say(g, "simulated " + std::to_string(records.size()) + " records -> " + manifest.string());
  return 0;
}

// --- featurize ---------------------------------------------------------------

int cmd_featurize(const GlobalOptions& g, const std::string& manifest_arg) {
  const auto config = load(g);
  const fs::path out = g.out_dir;
  const fs::path manifest = or_default(manifest_arg, out / "dataset.json");
  const auto records = experiment::read_dataset(manifest);
  const auto result = experiment::featurize_dataset(records, config, g.jobs);
  io::write_features_csv(out / "features.csv", result.table);
  io::write_json(out / "features.meta.json", result.meta);
  io::write_json(out / "rejects.json", result.rejects);
  say(g, "featurized " + std::to_string(result.table.rows.size()) + " records (" +
             std::to_string(result.rejects.size()) + " rejected), " + std::to_string(result.table.feature_names.size()) +
             " features -> " + (out / "features.csv").string());
  return 0;
}

// --- train / eval ------------------------------------------------------------

struct LoadedFeatures {
  forest::Dataset data;
  json meta;
};

LoadedFeatures load_features(const fs::path& features) {
  if (!fs::exists(features)) throw IoError("features file " + features.string() + " does not exist");
  LoadedFeatures f;
  f.data = io::to_dataset(io::read_features_csv(features));
  fs::path meta_path = features;
  meta_path.replace_filename(features.stem().string() + ".meta.json");
  if (!fs::exists(meta_path)) throw IoError("features metadata " + meta_path.string() + " does not exist");
  f.meta = io::read_json(meta_path);
  return f;
}

void print_report(const GlobalOptions& g, const forest::EvalReport& r) {
  say(g, r.protocol + ": n=" + std::to_string(r.n_samples) + " accuracy=" + fmt(r.accuracy) +
             " kappa=" + fmt(r.cohens_kappa) + " auroc=" + fmt(r.auroc));
}

int cmd_train(const GlobalOptions& g, const std::string& features_arg) {
  const auto config = load(g);
  const fs::path out = g.out_dir;
  const auto f = load_features(or_default(features_arg, out / "features.csv"));
  const auto result = experiment::train_and_evaluate(f.data, config, g.jobs);
  io::save_model(out / "model.rfj", result.model, f.meta.at("mfcc_fingerprint").get<std::string>());
  io::write_json(out / "eval_report.json", result.report.to_json());
  if (result.search) io::write_json(out / "search.json", result.search->to_json());
  print_report(g, result.report);
  say(g, "model -> " + (out / "model.rfj").string());
  return 0;
}

int cmd_eval(const GlobalOptions& g, const std::string& features_arg, const std::string& model_arg) {
  const auto config = load(g);
  const fs::path out = g.out_dir;
  const auto f = load_features(or_default(features_arg, out / "features.csv"));
  forest::EvalReport report;
  if (model_arg.empty()) {
    report = experiment::train_and_evaluate(f.data, config, g.jobs).report;
  } else {
    const auto loaded = io::load_model(model_arg, f.meta.at("mfcc_fingerprint").get<std::string>());
    const auto& model = loaded.model;
    if (model.feature_names != f.data.feature_names)
      throw ValidationError("model and features disagree on feature names");
    // Map the feature file's classes onto the model's class ids.
    forest::Dataset data = f.data;
    for (auto& y : data.labels) {
      const auto& name = f.data.class_names[static_cast<std::size_t>(y)];
      const auto it = std::find(model.class_names.begin(), model.class_names.end(), name);
      if (it == model.class_names.end()) throw ValidationError("class '" + name + "' is unknown to the model");
      y = static_cast<int>(it - model.class_names.begin());
    }
    data.class_names = model.class_names;
    const auto proba = forest::predict_proba_all(model, data, g.jobs);
    report.protocol = "saved_model";
    report.n_samples = data.n_rows;
    report.folds = 0;
    report.feature_names = data.feature_names;
    report.class_names = data.class_names;
    for (const auto& p : proba) report.predictions.push_back(forest::argmax(p));
    report.accuracy = forest::accuracy(report.predictions, data.labels);
    report.confusion_matrix = forest::confusion_matrix(report.predictions, data.labels, data.n_classes());
    report.cohens_kappa = forest::cohens_kappa(report.confusion_matrix);
    report.auroc = forest::auroc(proba, data.labels).value;
    report.importances = forest::mdi_importance(model);
  }
  io::write_json(out / "eval_report.json", report.to_json());
  print_report(g, report);
  return 0;
}

// --- report ------------------------------------------------------------------

int cmd_report(const GlobalOptions& g, const std::string& features_arg, const std::string& report_arg, bool sweep) {
  const auto config = load(g);
  const fs::path out = g.out_dir;
  const auto f = load_features(or_default(features_arg, out / "features.csv"));

  forest::EvalReport eval;
  const fs::path report_path = or_default(report_arg, out / "eval_report.json");
  if (fs::exists(report_path)) {
    const json r = io::read_json(report_path);
    eval.feature_names = f.data.feature_names;
    for (const auto& item : r.at("importances")) eval.importances.push_back(item.at("importance").get<double>());
    if (eval.importances.size() != eval.feature_names.size())
      throw ValidationError("report " + report_path.string() + " does not match the feature table");
  } else {
    eval = experiment::train_and_evaluate(f.data, config, g.jobs).report;
    io::write_json(report_path, eval.to_json());
  }
  io::write_text_atomic(out / "importance.csv", experiment::importance_csv(eval));

  json bundle = {{"eval", io::read_json(report_path)}};
  json chart = json::object();
  for (const auto& [name, v] : experiment::ranked_importances(eval)) chart[name] = v;
  bundle["importance_chart_data"] = chart;

  if (sweep || config.accuracy_sweep) {
    if (f.data.n_classes() < 2) throw ValidationError("accuracy sweep needs at least 2 persons");
    const auto rows = experiment::accuracy_vs_k(f.data, config.forest, config.cv_folds, config.seed, g.jobs);
    io::write_text_atomic(out / "accuracy_vs_k.csv", experiment::sweep_csv(rows));
    json table = json::array();
    for (const auto& r : rows)
      table.push_back({{"k", r.k}, {"forest_accuracy", r.forest_accuracy}, {"baseline_accuracy", r.baseline_accuracy}});
    bundle["accuracy_vs_k"] = table;
    for (const auto& r : rows)
      say(g, "k=" + std::to_string(r.k) + " forest=" + fmt(r.forest_accuracy) + " baseline=" + fmt(r.baseline_accuracy));
  }
  io::write_json(out / "report_bundle.json", bundle);
  say(g, "report -> " + (out / "report_bundle.json").string());
  return 0;
}

// --- detect ------------------------------------------------------------------

int cmd_detect(const GlobalOptions& g, const std::string& input, std::optional<double> sample_rate) {
  legshake::DetectorConfig detector;
  if (!g.config_path.empty()) {
    const json j = io::read_json(g.config_path);
    if (j.contains("detector")) detector = legshake::DetectorConfig::from_json(j.at("detector"));
  }
  if (sample_rate) detector.sample_rate = *sample_rate;
  detector.validate();

  std::ifstream file;
  std::istream* in = &std::cin;
  if (input != "-") {
    file.open(input);
    if (!file) throw IoError("cannot open " + input);
    in = &file;
  }

  legshake::ShakeDetector det(detector);
  const std::size_t block = detector.hop_samples();
  std::vector<double> buffer;
  buffer.reserve(block);
  std::uint64_t position = 0;
  std::size_t opened = 0, closed = 0, line_no = 0;
  auto flush = [&] {
    if (buffer.empty()) return;
    for (const auto& u : det.push(legshake::SampleChunk{position, buffer})) {
      (u.kind == legshake::DetectorUpdate::Kind::open ? opened : closed)++;
      std::cout << u.event.to_json(u.type()).dump() << '\n' << std::flush;
    }
    position += buffer.size();
    buffer.clear();
  };
  std::string line;
  while (std::getline(*in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    buffer.push_back(io::parse_double(line, input + ":" + std::to_string(line_no)));
    if (buffer.size() == block) flush();
  }
  flush();
  if (!g.quiet)
    std::cerr << "detect: " << position << " samples, " << opened << " event(s) opened, " << closed << " closed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plant-electrode gait sensing: simulate, featurize, train, eval, report, detect"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config_path, "Experiment config (JSON)");
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the config seed");
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_option("--jobs", g.jobs, "Worker threads (0: all cores); never changes results");
  app.add_flag("--quiet", g.quiet, "Only warnings and errors");

  auto* sim = app.add_subcommand("simulate", "Synthesize the configured cohort and write dataset.json");
  std::size_t samples_value = 0;
  auto* samples_opt = sim->add_option("--samples-per-cell", samples_value, "Override every person's walks per mood");

  auto* feat = app.add_subcommand("featurize", "Trim, standardize and MFCC-encode a dataset");
  std::string manifest;
  feat->add_option("--manifest", manifest, "dataset.json (default: OUT/dataset.json)");

  std::string features, model, report_path;
  auto* train = app.add_subcommand("train", "Cross-validate and fit the final model");
  train->add_option("--features", features, "features.csv (default: OUT/features.csv)");

  auto* eval = app.add_subcommand("eval", "Evaluate by cross-validation or with a saved model");
  eval->add_option("--features", features, "features.csv (default: OUT/features.csv)");
  eval->add_option("--model", model, "model.rfj to score instead of cross-validating");

  auto* rep = app.add_subcommand("report", "Write importance.csv, accuracy_vs_k.csv and report_bundle.json");
  bool sweep = false;
  rep->add_option("--features", features, "features.csv (default: OUT/features.csv)");
  rep->add_option("--report", report_path, "eval_report.json (default: OUT/eval_report.json)");
  rep->add_flag("--sweep", sweep, "Run the k-person accuracy sweep");

  auto* det = app.add_subcommand("detect", "Stream samples through the leg-shake detector");
  std::string input = "-";
  double rate_value = 0.0;
  det->add_option("input", input, "Samples file, one per line, or - for stdin");
  auto* rate_opt = det->add_option("--sample-rate", rate_value, "Sample rate in Hz");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (*seed_opt) g.seed = seed_value;
  log::set_level(g.quiet ? log::Level::warn : log::Level::info);

  try {
    if (*sim) return cmd_simulate(g, *samples_opt ? std::optional<std::size_t>(samples_value) : std::nullopt);
    if (*feat) return cmd_featurize(g, manifest);
    if (*train) return cmd_train(g, features);
    if (*eval) return cmd_eval(g, features, model);
    if (*rep) return cmd_report(g, features, report_path, sweep);
    if (*det) return cmd_detect(g, input, *rate_opt ? std::optional<double>(rate_value) : std::nullopt);
  } catch (const ValidationError& e) {
    log::error(e.what());
    return 1;
  } catch (const ConfigError& e) {
    log::error(e.what());
    return 1;
  } catch (const EncodingError& e) {
    log::error(e.what());
    return 1;
  } catch (const std::exception& e) {
    log::error(e.what());
    return 2;
  }
  return 1;
}
