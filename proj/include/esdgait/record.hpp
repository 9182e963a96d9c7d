#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace esdgait {

inline constexpr double kDefaultSampleRate = 10000.0;

/// Label metadata carried by every record.
struct RecordLabels {
  std::string person_id;
  std::string mood = "neutral";  // happy | sad | neutral
  std::string plant_type;
  std::string location;
  std::string activity = "walk";  // walk | legshake | idle
};

/// A sampled induced-current trace plus its labels and provenance.
struct SignalRecord {
  std::vector<double> samples;
  double sample_rate = kDefaultSampleRate;
  RecordLabels labels;
  std::uint64_t seed = 0;
  nlohmann::json generator_params = nlohmann::json::object();

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }

  void validate() const {
    if (samples.empty()) throw ValidationError("signal record has no samples");
    if (!(sample_rate > 0.0)) throw ValidationError("signal record sample_rate must be positive");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!std::isfinite(samples[i]))
        throw ValidationError("signal record sample " + std::to_string(i) + " is not finite");
    }
  }
};

}  // namespace esdgait
