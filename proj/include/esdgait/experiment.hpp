#pragma once

// Config-driven experiment plumbing shared by the CLI and the acceptance run:
// cohort synthesis, dataset featurization, training and the k-person sweep.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dsp.hpp"
#include "error.hpp"
#include "forest.hpp"
#include "io.hpp"
#include "legshake.hpp"
#include "log.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "record.hpp"
#include "simkit.hpp"
#include "validation.hpp"

namespace esdgait::experiment {

using nlohmann::json;

enum class Task { identify_person, classify_mood, legshake };

inline std::string to_string(Task t) {
  switch (t) {
    case Task::identify_person: return "identify_person";
    case Task::classify_mood: return "classify_mood";
    case Task::legshake: return "legshake";
  }
  return "identify_person";
}

inline Task parse_task(const std::string& s) {
  if (s == "identify_person") return Task::identify_person;
  if (s == "classify_mood") return Task::classify_mood;
  if (s == "legshake") return Task::legshake;
  throw ValidationError("unknown task '" + s + "' (identify_person | classify_mood | legshake)");
}

/// One cohort member. `samples` maps mood ("neutral" when the cohort has no
/// moods) to the number of walks.
struct PersonSpec {
  std::string id;
  simkit::GaitProfile gait;
  std::optional<double> rise_time;
  std::map<std::string, std::size_t> samples;
};

struct LegshakeCohort {
  std::size_t shake_records = 0;
  std::size_t idle_records = 0;
  double duration = 8.0;
  double frequency_low = 5.0;
  double frequency_high = 6.0;
  double onset_low = 1.0;
  double onset_high = 5.0;
  double snr_db = 10.0;
  simkit::ShakePose pose;

  /// Noise standard deviation giving `snr_db` against a sinusoid of peak `amplitude`.
  double noise_std_for(double amplitude) const {
    return amplitude / std::sqrt(2.0) / std::pow(10.0, snr_db / 20.0);
  }
};

struct DatasetSpec {
  std::vector<PersonSpec> persons;
  std::vector<std::string> moods;  // empty: neutral walks only
  simkit::WalkPath path;
  double jitter = 0.0;  // relative per-record std of step frequency, speed and amplitude
  double noise_std = 0.0;
  std::vector<std::string> plant_types{"plant_a"};
  std::vector<std::string> locations{"site_a"};
  simkit::CapacitanceParams capacitance;
  simkit::ElectrodeModel electrode;
  LegshakeCohort legshake;
};

struct SearchConfig {
  forest::SearchSpace space = forest::SearchSpace::default_space();
  std::size_t n_iter = 0;  // 0: no search
  std::size_t cv_folds = 10;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  Task task = Task::identify_person;
  DatasetSpec dataset;
  dsp::MfccConfig mfcc;
  forest::ForestParams forest;
  std::size_t cv_folds = 10;
  std::optional<double> holdout_fraction;
  SearchConfig search;
  bool include_categoricals = true;
  legshake::DetectorConfig detector;
  bool accuracy_sweep = false;

  void validate() const;
  json to_json() const;
  static ExperimentConfig from_json(const json& j);
};

// --- config parsing --------------------------------------------------------

namespace detail {

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline simkit::GaitProfile gait_from_json(const json& j, simkit::GaitProfile g = {}) {
  read_opt(j, "step_frequency", g.step_frequency);
  read_opt(j, "walking_speed", g.walking_speed);
  read_opt(j, "vertical_amplitude", g.vertical_amplitude);
  read_opt(j, "duty_cycle", g.duty_cycle);
  read_opt(j, "contact_charge_sign", g.contact_charge_sign);
  if (j.contains("contact_charge_sign")) g.detach_charge_sign = -g.contact_charge_sign;
  return g;
}

inline json gait_to_json(const simkit::GaitProfile& g) {
  return {{"step_frequency", g.step_frequency}, {"walking_speed", g.walking_speed},
          {"vertical_amplitude", g.vertical_amplitude}, {"duty_cycle", g.duty_cycle},
          {"contact_charge_sign", g.contact_charge_sign}};
}

inline simkit::CapacitanceParams capacitance_from_json(const json& j) {
  simkit::CapacitanceParams c;
  read_opt(j, "foot_contact", c.foot_contact);
  read_opt(j, "foot_airborne", c.foot_airborne);
  read_opt(j, "plant", c.plant);
  read_opt(j, "rise_time", c.rise_time);
  read_opt(j, "room", c.room);
  read_opt(j, "k_prop", c.k_prop);
  return c;
}

inline LegshakeCohort legshake_from_json(const json& j) {
  LegshakeCohort l;
  read_opt(j, "shake_records", l.shake_records);
  read_opt(j, "idle_records", l.idle_records);
  read_opt(j, "duration", l.duration);
  read_opt(j, "frequency_low", l.frequency_low);
  read_opt(j, "frequency_high", l.frequency_high);
  read_opt(j, "onset_low", l.onset_low);
  read_opt(j, "onset_high", l.onset_high);
  read_opt(j, "snr_db", l.snr_db);
  if (j.contains("pose")) {
    read_opt(j.at("pose"), "x", l.pose.x);
    read_opt(j.at("pose"), "y", l.pose.y);
    read_opt(j.at("pose"), "depth", l.pose.depth);
  }
  return l;
}

inline json legshake_to_json(const LegshakeCohort& l) {
  return {{"shake_records", l.shake_records}, {"idle_records", l.idle_records}, {"duration", l.duration},
          {"frequency_low", l.frequency_low},  {"frequency_high", l.frequency_high}, {"onset_low", l.onset_low},
          {"onset_high", l.onset_high},        {"snr_db", l.snr_db},
          {"pose", {{"x", l.pose.x}, {"y", l.pose.y}, {"depth", l.pose.depth}}}};
}

inline DatasetSpec dataset_from_json(const json& j) {
  DatasetSpec d;
  read_opt(j, "moods", d.moods);
  read_opt(j, "jitter", d.jitter);
  read_opt(j, "noise_std", d.noise_std);
  read_opt(j, "plant_types", d.plant_types);
  read_opt(j, "locations", d.locations);
  if (j.contains("path")) {
    read_opt(j.at("path"), "start", d.path.start);
    read_opt(j.at("path"), "end", d.path.end);
    read_opt(j.at("path"), "lateral", d.path.lateral);
  }
  if (j.contains("capacitance")) d.capacitance = capacitance_from_json(j.at("capacitance"));
  if (j.contains("electrode")) {
    read_opt(j.at("electrode"), "epsilon", d.electrode.epsilon);
    read_opt(j.at("electrode"), "area_s", d.electrode.area_s);
  }
  if (j.contains("legshake")) d.legshake = legshake_from_json(j.at("legshake"));

  const simkit::GaitProfile base = j.contains("gait") ? gait_from_json(j.at("gait")) : simkit::GaitProfile{};
  for (const auto& p : j.value("persons", json::array())) {
    PersonSpec person;
    person.id = p.at("id").get<std::string>();
    person.gait = gait_from_json(p, base);
    if (p.contains("rise_time")) person.rise_time = p.at("rise_time").get<double>();
    const json& s = p.at("samples");
    if (s.is_number_integer()) {
      const auto n = s.get<std::int64_t>();
      if (n < 0) throw ValidationError("person '" + person.id + "': samples must be >= 0");
      if (d.moods.empty()) {
        person.samples["neutral"] = static_cast<std::size_t>(n);
      } else {
        for (const auto& m : d.moods) person.samples[m] = static_cast<std::size_t>(n);
      }
    } else if (s.is_object()) {
      for (const auto& [mood, n] : s.items()) {
        if (!n.is_number_integer() || n.get<std::int64_t>() < 0)
          throw ValidationError("person '" + person.id + "': samples for '" + mood + "' must be an integer >= 0");
        person.samples[mood] = n.get<std::size_t>();
      }
    } else {
      throw ValidationError("person '" + person.id + "': samples must be an integer or a mood -> count object");
    }
    d.persons.push_back(std::move(person));
  }
  return d;
}

inline json dataset_to_json(const DatasetSpec& d) {
  json persons = json::array();
  for (const auto& p : d.persons) {
    json pj = gait_to_json(p.gait);
    pj["id"] = p.id;
    if (p.rise_time) pj["rise_time"] = *p.rise_time;
    pj["samples"] = p.samples;
    persons.push_back(pj);
  }
  return {{"persons", persons},
          {"moods", d.moods},
          {"path", {{"start", d.path.start}, {"end", d.path.end}, {"lateral", d.path.lateral}}},
          {"jitter", d.jitter},
          {"noise_std", d.noise_std},
          {"plant_types", d.plant_types},
          {"locations", d.locations},
          {"capacitance", d.capacitance.to_json()},
          {"electrode", {{"epsilon", d.electrode.epsilon}, {"area_s", d.electrode.area_s}}},
          {"legshake", legshake_to_json(d.legshake)}};
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
  mfcc.validate();
  forest.validate();
  detector.validate();
  if (cv_folds < 2) throw ValidationError("forest.cv_folds must be >= 2");
  if (holdout_fraction && !(*holdout_fraction > 0.0 && *holdout_fraction < 1.0))
    throw ValidationError("forest.holdout must be in (0, 1)");
  if (search.n_iter > 0) {
    search.space.validate();
    if (search.cv_folds < 2) throw ValidationError("forest.search.cv_folds must be >= 2");
  }
  const auto& d = dataset;
  d.capacitance.validate();
  d.electrode.validate();
  if (!(d.noise_std >= 0.0)) throw ValidationError("dataset.noise_std must be >= 0");
  if (!(d.jitter >= 0.0 && d.jitter < 0.5)) throw ValidationError("dataset.jitter must be in [0, 0.5)");
  if (d.plant_types.empty() || d.locations.empty())
    throw ValidationError("dataset.plant_types and dataset.locations must be non-empty");
  for (const auto& m : d.moods) simkit::parse_mood(m);

  if (task == Task::legshake) {
    const auto& l = d.legshake;
    if (l.shake_records + l.idle_records == 0) throw ValidationError("dataset.legshake has no records");
    if (!(l.frequency_low >= 3.0 && l.frequency_low <= l.frequency_high && l.frequency_high <= 10.0))
      throw ValidationError("dataset.legshake frequencies must satisfy 3 <= low <= high <= 10");
    if (!(l.onset_low >= 0.0 && l.onset_low <= l.onset_high && l.onset_high < l.duration))
      throw ValidationError("dataset.legshake onsets must satisfy 0 <= low <= high < duration");
    return;
  }

  if (d.persons.empty()) throw ValidationError("dataset.persons is empty");
  std::set<std::string> ids;
  for (const auto& p : d.persons) {
    if (p.id.empty()) throw ValidationError("person id must be non-empty");
    if (!ids.insert(p.id).second) throw ValidationError("duplicate person id '" + p.id + "'");
    p.gait.validate();
    if (p.rise_time && !(*p.rise_time > 0.0)) throw ValidationError("person '" + p.id + "': rise_time must be > 0");
    if (p.samples.empty()) throw ValidationError("person '" + p.id + "' has no samples");
    for (const auto& [mood, n] : p.samples) {
      if (n == 0) throw ValidationError("person '" + p.id + "': samples per cell must be >= 1");
      if (mood == "neutral") {
        if (!d.moods.empty()) throw ValidationError("person '" + p.id + "': cohort has moods; 'neutral' is not one");
      } else if (std::find(d.moods.begin(), d.moods.end(), mood) == d.moods.end()) {
        throw ValidationError("person '" + p.id + "': mood '" + mood + "' is not listed in dataset.moods");
      }
    }
  }
  if (task == Task::classify_mood && d.moods.size() < 2)
    throw ValidationError("classify_mood needs at least two moods");
  if (task == Task::identify_person && d.persons.size() < 2)
    throw ValidationError("identify_person needs at least two persons");
}

inline json ExperimentConfig::to_json() const {
  json forest_j = {{"params", forest.to_json()}, {"cv_folds", cv_folds}};
  if (holdout_fraction) forest_j["holdout"] = *holdout_fraction;
  if (search.n_iter > 0)
    forest_j["search"] = {{"space", search.space.to_json()}, {"n_iter", search.n_iter}, {"cv_folds", search.cv_folds}};
  return {{"seed", seed},
          {"task", to_string(task)},
          {"dataset", detail::dataset_to_json(dataset)},
          {"mfcc", mfcc.to_json()},
          {"forest", forest_j},
          {"features", {{"include_categoricals", include_categoricals}}},
          {"detector", detector.to_json()},
          {"report", {{"accuracy_sweep", accuracy_sweep}}}};
}

inline ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw ValidationError("experiment config must be an object");
    if (!j.contains("seed")) throw ValidationError("experiment config needs a 'seed'");
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("task")) c.task = parse_task(j.at("task").get<std::string>());
    if (j.contains("dataset")) c.dataset = detail::dataset_from_json(j.at("dataset"));
    if (j.contains("mfcc")) c.mfcc = dsp::MfccConfig::from_json(j.at("mfcc"));
    if (j.contains("forest")) {
      const json& f = j.at("forest");
      if (f.contains("params")) c.forest = forest::ForestParams::from_json(f.at("params"));
      detail::read_opt(f, "cv_folds", c.cv_folds);
      if (f.contains("holdout") && !f.at("holdout").is_null()) c.holdout_fraction = f.at("holdout").get<double>();
      if (f.contains("search")) {
        const json& s = f.at("search");
        if (s.contains("space")) c.search.space = forest::SearchSpace::from_json(s.at("space"));
        detail::read_opt(s, "n_iter", c.search.n_iter);
        detail::read_opt(s, "cv_folds", c.search.cv_folds);
      }
    }
    // Forest seed follows the experiment seed unless pinned in forest.params.
    if (!j.contains("forest") || !j.at("forest").contains("params") || !j.at("forest").at("params").contains("seed"))
      c.forest.seed = c.seed;
    if (j.contains("features")) detail::read_opt(j.at("features"), "include_categoricals", c.include_categoricals);
    if (j.contains("detector")) c.detector = legshake::DetectorConfig::from_json(j.at("detector"));
    if (j.contains("report")) detail::read_opt(j.at("report"), "accuracy_sweep", c.accuracy_sweep);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const io::fs::path& path) { return ExperimentConfig::from_json(io::read_json(path)); }

// --- synthesis -------------------------------------------------------------

struct NamedRecord {
  std::string name;
  SignalRecord record;
};

namespace detail {

struct WalkJob {
  const PersonSpec* person;
  std::string mood;
  std::size_t index;
};

inline std::string padded(std::size_t i) {
  std::ostringstream ss;
  ss << std::setw(3) << std::setfill('0') << i;
  return ss.str();
}

inline double jittered(double value, double jitter, Rng& rng) {
  if (jitter <= 0.0) return value;
  std::normal_distribution<double> n(0.0, jitter);
  return value * std::clamp(1.0 + n(rng), 0.5, 1.5);
}

inline NamedRecord synth_walk_record(const DatasetSpec& d, const WalkJob& job, std::uint64_t record_seed) {
  Rng rng(derive_seed(record_seed, 1));
  simkit::GaitProfile gait = job.person->gait;
  gait.step_frequency = jittered(gait.step_frequency, d.jitter, rng);
  gait.walking_speed = jittered(gait.walking_speed, d.jitter, rng);
  gait.vertical_amplitude = jittered(gait.vertical_amplitude, d.jitter, rng);

  std::optional<simkit::MoodProfile> mood;
  if (job.mood != "neutral") {
    mood = simkit::parse_mood(job.mood) == simkit::Mood::happy ? simkit::MoodProfile::happy()
                                                                : simkit::MoodProfile::sad();
  }
  simkit::CapacitanceParams cap = d.capacitance;
  if (job.person->rise_time) cap.rise_time = *job.person->rise_time;

  RecordLabels labels;
  labels.person_id = job.person->id;
  labels.plant_type = d.plant_types[uniform_index(rng, d.plant_types.size())];
  labels.location = d.locations[uniform_index(rng, d.locations.size())];

  const auto [traj, duration] = simkit::walk_along(d.path, simkit::apply_mood(gait, mood).walking_speed);
  NamedRecord out;
  out.name = job.person->id + (job.mood == "neutral" ? "" : "_" + job.mood) + "_" + padded(job.index);
  out.record = simkit::synth_walk(gait, mood, traj, cap, d.electrode, duration, d.noise_std, record_seed,
                                  std::move(labels));
  return out;
}

inline NamedRecord synth_shake_record(const DatasetSpec& d, bool shaking, std::size_t index,
                                      std::uint64_t record_seed) {
  const auto& l = d.legshake;
  Rng rng(derive_seed(record_seed, 1));
  const double f = uniform(rng, l.frequency_low, l.frequency_high);
  const double onset = uniform(rng, l.onset_low, l.onset_high);
  const double amplitude = simkit::legshake_amplitude(f, d.capacitance, d.electrode, l.pose);
  const double noise_std = l.noise_std_for(amplitude);
  RecordLabels labels;
  labels.plant_type = d.plant_types[uniform_index(rng, d.plant_types.size())];
  labels.location = d.locations[uniform_index(rng, d.locations.size())];
  labels.activity = shaking ? "legshake" : "idle";
  simkit::ShakePose pose = l.pose;
  if (!shaking) pose.depth = 0.0;

  NamedRecord out;
  out.name = std::string(shaking ? "shake_" : "idle_") + padded(index);
  out.record = simkit::synth_legshake(f, l.duration, onset, d.capacitance, d.electrode, noise_std, record_seed, pose,
                                      std::move(labels));
  if (!shaking) out.record.generator_params["shake_frequency"] = nullptr;
  return out;
}

}  // namespace detail

/// Every record of the configured cohort. Record r is seeded with
/// derive_seed(config.seed, r), so the output does not depend on `jobs`.
inline std::vector<NamedRecord> simulate(const ExperimentConfig& config, unsigned jobs = 1) {
  config.validate();
  const auto& d = config.dataset;
  std::vector<NamedRecord> out;
  if (config.task == Task::legshake) {
    const std::size_t total = d.legshake.shake_records + d.legshake.idle_records;
    out.resize(total);
    parallel_for(total, jobs, [&](std::size_t r) {
      const bool shaking = r < d.legshake.shake_records;
      const std::size_t index = shaking ? r : r - d.legshake.shake_records;
      out[r] = detail::synth_shake_record(d, shaking, index, derive_seed(config.seed, r));
    });
    return out;
  }

  std::vector<detail::WalkJob> walks;
  for (const auto& p : d.persons) {
    const std::vector<std::string> moods = d.moods.empty() ? std::vector<std::string>{"neutral"} : d.moods;
    for (const auto& m : moods) {
      const auto it = p.samples.find(m);
      if (it == p.samples.end()) continue;
      for (std::size_t i = 0; i < it->second; ++i) walks.push_back({&p, m, i});
    }
  }
  out.resize(walks.size());
  parallel_for(walks.size(), jobs, [&](std::size_t r) {
    out[r] = detail::synth_walk_record(d, walks[r], derive_seed(config.seed, r));
  });
  return out;
}

/// Writes every record plus `dataset.json` under `dir`; returns the manifest path.
inline io::fs::path write_dataset(const io::fs::path& dir, const std::vector<NamedRecord>& records) {
  std::vector<io::ManifestEntry> entries;
  entries.reserve(records.size());
  for (const auto& r : records) entries.push_back(io::write_record(dir / "records", r.name, r.record));
  const auto manifest = dir / "dataset.json";
  io::write_manifest(manifest, entries);
  return manifest;
}

inline std::vector<NamedRecord> read_dataset(const io::fs::path& manifest) {
  std::vector<NamedRecord> out;
  for (const auto& e : io::read_manifest(manifest)) {
    std::string name = e.signal_path.filename().string();
    if (const auto pos = name.find(".sig.csv"); pos != std::string::npos) name.resize(pos);
    out.push_back({name, io::read_record(e.signal_path, e.meta_path)});
  }
  return out;
}

// --- featurization ---------------------------------------------------------

inline std::string label_for(const RecordLabels& labels, Task task) {
  switch (task) {
    case Task::identify_person: return labels.person_id;
    case Task::classify_mood: return labels.mood;
    case Task::legshake: return labels.activity;
  }
  return labels.person_id;
}

/// Codes 0.. for the sorted distinct plant types and locations in `records`.
inline dsp::CategoryMaps build_category_maps(const std::vector<NamedRecord>& records) {
  std::set<std::string> plants, locations;
  for (const auto& r : records) {
    plants.insert(r.record.labels.plant_type);
    locations.insert(r.record.labels.location);
  }
  dsp::CategoryMaps maps;
  int code = 0;
  for (const auto& p : plants) maps["plant_type"][p] = code++;
  code = 0;
  for (const auto& l : locations) maps["location"][l] = code++;
  return maps;
}

struct FeaturizeResult {
  io::FeatureTable table;
  nlohmann::json meta;
  std::vector<std::string> rejects;
};

/// Drops degenerate records, trims the rest to a common length and extracts
/// one feature row per record in input order.
inline FeaturizeResult featurize_dataset(const std::vector<NamedRecord>& records, const ExperimentConfig& config,
                                         unsigned jobs = 1) {
  if (records.empty()) throw ValidationError("featurize: dataset has no records");
  const double rate = records.front().record.sample_rate;
  for (const auto& r : records)
    if (r.record.sample_rate != rate)
      throw ValidationError("featurize: mixed sample rates (" + io::format_double(rate) + " and " +
                            io::format_double(r.record.sample_rate) + " Hz)");
  dsp::MfccConfig mfcc = config.mfcc;
  if (mfcc.sample_rate != rate)
    throw ValidationError("featurize: records are sampled at " + io::format_double(rate) +
                          " Hz but the MFCC config expects " + io::format_double(mfcc.sample_rate) + " Hz");

  FeaturizeResult result;
  std::vector<NamedRecord> kept;
  for (const auto& r : records) {
    try {
      dsp::z_transform(r.record.samples);
      kept.push_back(r);
    } catch (const DegenerateSignalError&) {
      result.rejects.push_back(r.name);
    }
  }
  if (!result.rejects.empty())
    log::warn("featurize: rejected " + std::to_string(result.rejects.size()) + " degenerate record(s)");
  if (kept.empty()) throw ValidationError("featurize: every record is degenerate");

  std::vector<SignalRecord> signals;
  signals.reserve(kept.size());
  for (auto& r : kept) signals.push_back(std::move(r.record));
  signals = dsp::trim_to_common_length(std::move(signals));
  const std::size_t length = signals.front().samples.size();

  const dsp::CategoryMaps maps = build_category_maps(records);
  const dsp::MfccExtractor extractor(mfcc);
  std::vector<dsp::FeatureVector> rows(signals.size());
  parallel_for(signals.size(), jobs, [&](std::size_t i) {
    rows[i] = dsp::featurize(signals[i], extractor, config.include_categoricals, maps);
  });

  result.table.feature_names = rows.front().feature_names;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    result.table.rows.push_back(std::move(rows[i].values));
    result.table.labels.push_back(label_for(signals[i].labels, config.task));
  }
  result.meta = {{"mfcc", mfcc.to_json()},
                 {"mfcc_fingerprint", io::fingerprint(mfcc.to_json())},
                 {"task", to_string(config.task)},
                 {"include_categoricals", config.include_categoricals},
                 {"category_maps", maps},
                 {"trimmed_length", length},
                 {"n_records", result.table.rows.size()},
                 {"rejects", result.rejects}};
  return result;
}

// --- training and evaluation -----------------------------------------------

struct TrainResult {
  forest::ForestParams params;
  forest::EvalReport report;
  forest::RandomForestModel model;
  std::optional<forest::SearchResult> search;
};

/// Optional randomized search, then the configured evaluation protocol, then a
/// final model on every row.
inline TrainResult train_and_evaluate(const forest::Dataset& data, const ExperimentConfig& config, unsigned jobs = 1) {
  TrainResult out;
  out.params = config.forest;
  if (config.search.n_iter > 0) {
    out.search = forest::randomized_search(data, config.search.space, config.search.n_iter, config.search.cv_folds,
                                           config.seed, config.forest, jobs);
    out.params = out.search->best;
  }
  out.report = config.holdout_fraction
                   ? forest::holdout_evaluate(data, out.params, *config.holdout_fraction, config.seed, jobs)
                   : forest::cross_validate(data, out.params, config.cv_folds, config.seed, jobs);
  out.model = forest::fit_forest(data, out.params, jobs);
  return out;
}

struct SweepRow {
  std::size_t k = 0;
  double forest_accuracy = 0.0;
  double baseline_accuracy = 0.0;
};

/// Share of the most frequent label.
inline double modal_share(std::span<const int> labels) {
  if (labels.empty()) throw ValidationError("modal_share: no labels");
  std::map<int, std::size_t> counts;
  for (int y : labels) ++counts[y];
  std::size_t best = 0;
  for (const auto& [y, n] : counts) best = std::max(best, n);
  return static_cast<double>(best) / static_cast<double>(labels.size());
}

/// Rows of the first `k` classes, relabelled into a k-class dataset.
inline forest::Dataset first_classes(const forest::Dataset& data, std::size_t k) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.n_rows; ++i)
    if (static_cast<std::size_t>(data.labels[i]) < k) rows.push_back(i);
  forest::Dataset sub = data.subset(rows);
  sub.class_names.resize(k);
  return sub;
}

/// Forest CV accuracy and majority-class accuracy over the first k = 2..K
/// classes (classes are the sorted person ids).
inline std::vector<SweepRow> accuracy_vs_k(const forest::Dataset& data, const forest::ForestParams& params,
                                           std::size_t folds, std::uint64_t seed, unsigned jobs = 1) {
  if (data.n_classes() < 2) throw ValidationError("accuracy_vs_k needs at least 2 classes");
  std::vector<SweepRow> rows;
  for (std::size_t k = 2; k <= data.n_classes(); ++k) {
    const forest::Dataset sub = first_classes(data, k);
    const auto report = forest::cross_validate(sub, params, folds, seed, jobs);
    rows.push_back({k, report.accuracy, modal_share(sub.labels)});
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "k,forest_acc,baseline_acc\n";
  for (const auto& r : rows)
    out += std::to_string(r.k) + "," + io::format_double(r.forest_accuracy) + "," +
           io::format_double(r.baseline_accuracy) + "\n";
  return out;
}

/// Feature importances sorted descending (ties: feature order).
inline std::vector<std::pair<std::string, double>> ranked_importances(const forest::EvalReport& report) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t j = 0; j < report.importances.size(); ++j)
    out.emplace_back(report.feature_names[j], report.importances[j]);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

inline std::string importance_csv(const forest::EvalReport& report) {
  std::string out = "feature,importance\n";
  for (const auto& [name, v] : ranked_importances(report)) out += name + "," + io::format_double(v) + "\n";
  return out;
}

}  // namespace esdgait::experiment
