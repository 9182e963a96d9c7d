#pragma once

// Preprocessing and MFCC feature extraction.
//
// Per frame: window -> |DFT|^p -> triangular mel filterbank -> log (floored)
// -> orthonormal DCT-II -> first n_mfcc coefficients. Frames start at sample
// 0 and advance by hop_length with no padding.

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "record.hpp"
#include "spectrum.hpp"

namespace esdgait::dsp {

inline constexpr double kLogFloor = 1e-10;

struct MfccConfig {
  double sample_rate = kDefaultSampleRate;
  std::size_t n_mfcc = 20;
  std::size_t window_size = 2500;
  std::size_t hop_length = 1250;
  double magnitude_exponent = 2.0;
  std::size_t n_mel_filters = 40;
  double fmin = 0.0;
  std::optional<double> fmax;  // defaults to sample_rate / 2
  WindowFunction window_function = WindowFunction::hann;

  double upper_frequency() const { return fmax.value_or(sample_rate / 2.0); }

  void validate() const {
    if (!(sample_rate > 0.0)) throw ValidationError("sample_rate must be > 0");
    if (hop_length == 0 || window_size < hop_length)
      throw ValidationError("require window_size >= hop_length > 0");
    if (n_mfcc == 0 || n_mfcc > n_mel_filters) throw ValidationError("require 0 < n_mfcc <= n_mel_filters");
    if (!(magnitude_exponent > 0.0)) throw ValidationError("magnitude_exponent must be > 0");
    if (!(fmin >= 0.0 && fmin < upper_frequency() && upper_frequency() <= sample_rate / 2.0))
      throw ValidationError("require 0 <= fmin < fmax <= sample_rate/2");
  }

  nlohmann::json to_json() const {
    return {{"sample_rate", sample_rate},
            {"n_mfcc", n_mfcc},
            {"window_size", window_size},
            {"hop_length", hop_length},
            {"magnitude_exponent", magnitude_exponent},
            {"n_mel_filters", n_mel_filters},
            {"fmin", fmin},
            {"fmax", upper_frequency()},
            {"window_function", to_string(window_function)}};
  }

  static MfccConfig from_json(const nlohmann::json& j) {
    MfccConfig c;
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    c.n_mfcc = j.value("n_mfcc", c.n_mfcc);
    c.window_size = j.value("window_size", c.window_size);
    c.hop_length = j.value("hop_length", c.hop_length);
    c.magnitude_exponent = j.value("magnitude_exponent", c.magnitude_exponent);
    c.n_mel_filters = j.value("n_mel_filters", c.n_mel_filters);
    c.fmin = j.value("fmin", c.fmin);
    if (j.contains("fmax") && !j.at("fmax").is_null()) c.fmax = j.at("fmax").get<double>();
    if (j.contains("window_function")) c.window_function = parse_window(j.at("window_function").get<std::string>());
    c.validate();
    return c;
  }
};

// --- preprocessing ---------------------------------------------------------

/// Trims every record to the shortest length, removing the excess evenly from
/// both ends; an odd excess sample comes off the end.
inline std::vector<SignalRecord> trim_to_common_length(std::vector<SignalRecord> records) {
  if (records.empty()) throw ValidationError("trim_to_common_length: empty record list");
  std::size_t target = records.front().samples.size();
  for (const auto& r : records) target = std::min(target, r.samples.size());
  for (auto& r : records) {
    const std::size_t excess = r.samples.size() - target;
    const std::size_t front = excess / 2;
    r.samples.erase(r.samples.begin(), r.samples.begin() + static_cast<std::ptrdiff_t>(front));
    r.samples.resize(target);
  }
  return records;
}

/// Standardizes to zero mean and unit population variance.
inline std::vector<double> z_transform(std::span<const double> samples) {
  if (samples.size() < 2) throw DegenerateSignalError("z_transform needs at least 2 samples");
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  double peak = 0.0;
  for (double x : samples) {
    mean += x;
    peak = std::max(peak, std::abs(x));
  }
  mean /= n;
  double var = 0.0;
  for (double x : samples) var += (x - mean) * (x - mean);
  var /= n;
  const double sd = std::sqrt(var);
  // Zero spread, or spread lost in rounding noise of the values themselves.
  if (!(sd > 4.0 * DBL_EPSILON * peak)) throw DegenerateSignalError("signal has zero variance");

  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[i] = (samples[i] - mean) / sd;
  // Second pass removes residual rounding in the mean.
  double residual = 0.0;
  for (double x : out) residual += x;
  residual /= n;
  for (double& x : out) x -= residual;
  return out;
}

// --- mel scale -------------------------------------------------------------

inline double hz_to_mel(double f) {
  if (!(f >= 0.0)) throw DomainError("hz_to_mel: negative frequency");
  return 2595.0 * std::log10(1.0 + f / 700.0);
}

inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

struct MelFilterbank {
  std::size_t n_bins = 0;  // window_size / 2 + 1
  std::vector<std::vector<double>> filters;  // n_mel_filters x n_bins
  std::vector<double> center_frequencies;
  std::vector<std::pair<std::size_t, std::size_t>> support;  // [first, last] bin with positive weight

  std::size_t size() const { return filters.size(); }

  /// Filter energies for one power spectrum.
  std::vector<double> apply(std::span<const double> power) const {
    std::vector<double> out(filters.size(), 0.0);
    for (std::size_t m = 0; m < filters.size(); ++m) {
      double acc = 0.0;
      for (std::size_t k = support[m].first; k <= support[m].second; ++k) acc += filters[m][k] * power[k];
      out[m] = acc;
    }
    return out;
  }
};

/// Triangular filters with apexes equally spaced in mel between fmin and fmax.
inline MelFilterbank build_mel_filterbank(const MfccConfig& config) {
  config.validate();
  const std::size_t n_filters = config.n_mel_filters;
  const double mel_lo = hz_to_mel(config.fmin);
  const double mel_hi = hz_to_mel(config.upper_frequency());

  std::vector<double> edges(n_filters + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(n_filters + 1));

  MelFilterbank fb;
  fb.n_bins = config.window_size / 2 + 1;
  fb.filters.assign(n_filters, std::vector<double>(fb.n_bins, 0.0));
  fb.center_frequencies.resize(n_filters);
  fb.support.resize(n_filters);
  const double bin_hz = config.sample_rate / static_cast<double>(config.window_size);

  for (std::size_t m = 0; m < n_filters; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    fb.center_frequencies[m] = center;
    std::optional<std::size_t> first, last;
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      const double rising = (f - lo) / (center - lo);
      const double falling = (hi - f) / (hi - center);
      const double w = std::max(0.0, std::min(rising, falling));
      fb.filters[m][k] = w;
      if (w > 0.0) {
        if (!first) first = k;
        last = k;
      }
    }
    if (!first) {
      throw ConfigError("mel filter " + std::to_string(m) + " (center " + std::to_string(center) +
                        " Hz) covers no spectrum bin; reduce n_mel_filters or enlarge window_size");
    }
    fb.support[m] = {*first, *last};
  }
  return fb;
}

/// Orthonormal DCT-II basis, `rows` x `size` (rows <= size).
inline std::vector<std::vector<double>> dct_matrix(std::size_t rows, std::size_t size) {
  std::vector<std::vector<double>> d(rows, std::vector<double>(size));
  const double n = static_cast<double>(size);
  for (std::size_t k = 0; k < rows; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (std::size_t i = 0; i < size; ++i)
      d[k][i] = scale * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                                 (2.0 * n));
  }
  return d;
}

/// Coefficient grid, n_coeffs rows x n_frames columns, row-major.
struct FeatureMatrix {
  std::size_t n_coeffs = 0;
  std::size_t n_frames = 0;
  std::vector<double> coefficients;
  std::vector<double> frame_times;  // frame centres, seconds

  double at(std::size_t coeff, std::size_t frame) const { return coefficients[coeff * n_frames + frame]; }
  double& at(std::size_t coeff, std::size_t frame) { return coefficients[coeff * n_frames + frame]; }
};

inline std::size_t frame_count(std::size_t length, std::size_t window_size, std::size_t hop_length) {
  if (length < window_size) return 0;
  return (length - window_size) / hop_length + 1;
}

/// Reusable extractor: owns the window, filterbank, DCT basis and FFT plan.
/// Immutable after construction; `compute` may be called concurrently.
class MfccExtractor {
public:
  explicit MfccExtractor(const MfccConfig& config)
      : config_(config),
        filterbank_(build_mel_filterbank(config)),
        window_(make_window(config.window_function, config.window_size)),
        dct_(dct_matrix(config.n_mfcc, config.n_mel_filters)),
        fft_(std::make_shared<RealFft>(config.window_size)) {}

  const MfccConfig& config() const { return config_; }
  const MelFilterbank& filterbank() const { return filterbank_; }

  FeatureMatrix compute(std::span<const double> samples) const {
    const std::size_t win = config_.window_size;
    if (samples.size() < win) {
      throw TooShortError("signal of " + std::to_string(samples.size()) + " samples is shorter than one window (" +
                          std::to_string(win) + ")");
    }
    for (double x : samples)
      if (!std::isfinite(x)) throw ValidationError("mfcc: non-finite sample");

    FeatureMatrix out;
    out.n_coeffs = config_.n_mfcc;
    out.n_frames = frame_count(samples.size(), win, config_.hop_length);
    out.coefficients.assign(out.n_coeffs * out.n_frames, 0.0);
    out.frame_times.resize(out.n_frames);

    std::vector<double> frame(win);
    std::vector<std::complex<double>> spectrum(fft_->bins());
    std::vector<double> power(fft_->bins());
    const double half_exponent = config_.magnitude_exponent / 2.0;

    for (std::size_t f = 0; f < out.n_frames; ++f) {
      const std::size_t start = f * config_.hop_length;
      for (std::size_t i = 0; i < win; ++i) frame[i] = samples[start + i] * window_[i];
      fft_->forward(frame, spectrum);
      for (std::size_t k = 0; k < power.size(); ++k) {
        const double sq = std::norm(spectrum[k]);
        power[k] = half_exponent == 1.0 ? sq : std::pow(sq, half_exponent);
      }
      std::vector<double> energies = filterbank_.apply(power);
      for (double& e : energies) e = std::log(std::max(e, kLogFloor));
      for (std::size_t c = 0; c < out.n_coeffs; ++c) {
        double acc = 0.0;
        for (std::size_t m = 0; m < energies.size(); ++m) acc += dct_[c][m] * energies[m];
        out.at(c, f) = acc;
      }
      out.frame_times[f] = (static_cast<double>(start) + 0.5 * static_cast<double>(win)) / config_.sample_rate;
    }
    return out;
  }

private:
  MfccConfig config_;
  MelFilterbank filterbank_;
  std::vector<double> window_;
  std::vector<std::vector<double>> dct_;
  std::shared_ptr<const RealFft> fft_;
};

inline FeatureMatrix mfcc(std::span<const double> samples, const MfccConfig& config = {}) {
  return MfccExtractor(config).compute(samples);
}

// --- feature vectors -------------------------------------------------------

/// Categorical value -> integer code, per categorical feature name.
using CategoryMaps = std::map<std::string, std::map<std::string, int>>;

inline const std::vector<std::string>& categorical_feature_names() {
  static const std::vector<std::string> names{"plant_type", "location"};
  return names;
}

struct FeatureVector {
  std::vector<double> values;
  std::vector<std::string> feature_names;
};

inline std::vector<std::string> mfcc_feature_names(std::size_t n_coeffs, std::size_t n_frames) {
  std::vector<std::string> names;
  names.reserve(n_coeffs * n_frames);
  for (std::size_t c = 0; c < n_coeffs; ++c)
    for (std::size_t f = 0; f < n_frames; ++f) names.push_back("mfcc" + std::to_string(c) + "_t" + std::to_string(f));
  return names;
}

inline int encode_category(const CategoryMaps& maps, const std::string& feature, const std::string& value) {
  const auto m = maps.find(feature);
  if (m == maps.end()) throw EncodingError("no category map for feature '" + feature + "'");
  const auto code = m->second.find(value);
  if (code == m->second.end())
    throw EncodingError("value '" + value + "' of '" + feature + "' has no category code");
  return code->second;
}

/// z_transform -> mfcc -> coefficient-major flatten, optionally followed by
/// the integer-coded plant type and location.
inline FeatureVector featurize(const SignalRecord& record, const MfccExtractor& extractor,
                               bool include_categoricals = false, const CategoryMaps& category_maps = {}) {
  if (record.sample_rate != extractor.config().sample_rate) {
    throw ValidationError("record sample rate " + std::to_string(record.sample_rate) +
                          " does not match MFCC sample rate " + std::to_string(extractor.config().sample_rate));
  }
  const std::vector<double> standardized = z_transform(record.samples);
  const FeatureMatrix m = extractor.compute(standardized);

  FeatureVector fv;
  fv.values = m.coefficients;
  fv.feature_names = mfcc_feature_names(m.n_coeffs, m.n_frames);
  if (include_categoricals) {
    fv.values.push_back(encode_category(category_maps, "plant_type", record.labels.plant_type));
    fv.values.push_back(encode_category(category_maps, "location", record.labels.location));
    fv.feature_names.push_back("plant_type");
    fv.feature_names.push_back("location");
  }
  return fv;
}

inline FeatureVector featurize(const SignalRecord& record, const MfccConfig& config,
                               bool include_categoricals = false, const CategoryMaps& category_maps = {}) {
  return featurize(record, MfccExtractor(config), include_categoricals, category_maps);
}

}  // namespace esdgait::dsp
