#pragma once

// Streaming leg-shake detector: a sliding-window band-power ratio around the
// 5-6 Hz shake signature with open/close hysteresis.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "record.hpp"
#include "spectrum.hpp"

namespace esdgait::legshake {

struct DetectorConfig {
  double sample_rate = kDefaultSampleRate;
  double window_seconds = 1.0;
  double hop_seconds = 0.25;
  double band_low = 4.0;
  double band_high = 8.0;
  double peak_target_low = 5.0;
  double peak_target_high = 6.0;
  double ratio_threshold = 0.5;
  std::size_t min_consecutive_windows = 3;
  std::size_t release_windows = 2;

  std::size_t window_samples() const { return static_cast<std::size_t>(std::llround(window_seconds * sample_rate)); }
  std::size_t hop_samples() const { return static_cast<std::size_t>(std::llround(hop_seconds * sample_rate)); }

  void validate() const {
    if (!(sample_rate > 0.0)) throw ValidationError("detector sample_rate must be > 0");
    if (!(window_seconds > 0.0 && hop_seconds > 0.0)) throw ValidationError("detector window and hop must be > 0");
    if (window_samples() < 4 || hop_samples() < 1) throw ValidationError("detector window too short");
    if (!(band_low < peak_target_low && peak_target_low < peak_target_high && peak_target_high < band_high &&
          band_high < sample_rate / 2.0))
      throw ValidationError("require band_low < peak_target_low < peak_target_high < band_high < sample_rate/2");
    if (!(band_low > 0.0)) throw ValidationError("band_low must be > 0");
    if (!(ratio_threshold > 0.0 && ratio_threshold < 1.0)) throw ValidationError("ratio_threshold must be in (0, 1)");
    if (min_consecutive_windows < 1 || release_windows < 1) throw ValidationError("window counts must be >= 1");
  }

  nlohmann::json to_json() const {
    return {{"sample_rate", sample_rate},
            {"window_seconds", window_seconds},
            {"hop_seconds", hop_seconds},
            {"band_low", band_low},
            {"band_high", band_high},
            {"peak_target_low", peak_target_low},
            {"peak_target_high", peak_target_high},
            {"ratio_threshold", ratio_threshold},
            {"min_consecutive_windows", min_consecutive_windows},
            {"release_windows", release_windows}};
  }

  static DetectorConfig from_json(const nlohmann::json& j) {
    DetectorConfig c;
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    c.window_seconds = j.value("window_seconds", c.window_seconds);
    c.hop_seconds = j.value("hop_seconds", c.hop_seconds);
    c.band_low = j.value("band_low", c.band_low);
    c.band_high = j.value("band_high", c.band_high);
    c.peak_target_low = j.value("peak_target_low", c.peak_target_low);
    c.peak_target_high = j.value("peak_target_high", c.peak_target_high);
    c.ratio_threshold = j.value("ratio_threshold", c.ratio_threshold);
    c.min_consecutive_windows = j.value("min_consecutive_windows", c.min_consecutive_windows);
    c.release_windows = j.value("release_windows", c.release_windows);
    c.validate();
    return c;
  }
};

struct BandRatio {
  double ratio = 0.0;
  double peak_frequency = 0.0;  // 0 for a silent window
};

/// Holds the FFT plan and window for one window length.
class BandAnalyzer {
public:
  explicit BandAnalyzer(const DetectorConfig& config)
      : config_(config),
        n_(config.window_samples()),
        taper_(make_window(WindowFunction::hann, n_)),
        fft_(std::make_shared<RealFft>(n_)) {
    config_.validate();
  }

  /// ratio = in-band power / total power without DC, from the Hann-windowed
  /// power spectrum of the mean-removed window. peak_frequency is the in-band
  /// maximum refined by a parabola through the log power of its 3 bins.
  BandRatio operator()(std::span<const double> window) const {
    if (window.size() != n_)
      throw ValidationError("band_ratio: window has " + std::to_string(window.size()) + " samples, expected " +
                            std::to_string(n_));
    double mean = 0.0;
    for (double x : window) mean += x;
    mean /= static_cast<double>(n_);
    double var = 0.0;
    for (double x : window) var += (x - mean) * (x - mean);
    if (!(var > 0.0)) return {};

    std::vector<double> buf(n_);
    for (std::size_t i = 0; i < n_; ++i) buf[i] = (window[i] - mean) * taper_[i];
    std::vector<std::complex<double>> spec(fft_->bins());
    fft_->forward(buf, spec);

    const double bin_hz = config_.sample_rate / static_cast<double>(n_);
    const auto lo = static_cast<std::size_t>(std::ceil(config_.band_low / bin_hz));
    const auto hi = std::min(spec.size() - 1, static_cast<std::size_t>(std::floor(config_.band_high / bin_hz)));
    double total = 0.0, band = 0.0;
    std::size_t peak = lo;
    for (std::size_t k = 1; k < spec.size(); ++k) {
      const double p = std::norm(spec[k]);
      total += p;
      if (k >= lo && k <= hi) {
        band += p;
        if (p > std::norm(spec[peak])) peak = k;
      }
    }
    if (!(total > 0.0)) return {};

    double offset = 0.0;
    if (peak > 0 && peak + 1 < spec.size()) {
      constexpr double tiny = 1e-300;
      const double a = std::log(std::norm(spec[peak - 1]) + tiny);
      const double b = std::log(std::norm(spec[peak]) + tiny);
      const double c = std::log(std::norm(spec[peak + 1]) + tiny);
      const double denom = a - 2.0 * b + c;
      if (denom < 0.0) offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
    }
    const double freq = std::clamp((static_cast<double>(peak) + offset) * bin_hz, config_.band_low, config_.band_high);
    return {band / total, freq};
  }

private:
  DetectorConfig config_;
  std::size_t n_;
  std::vector<double> taper_;
  std::shared_ptr<const RealFft> fft_;
};

inline BandRatio band_ratio(std::span<const double> window, const DetectorConfig& config = {}) {
  return BandAnalyzer(config)(window);
}

struct ShakeEvent {
  double onset = 0.0;
  std::optional<double> offset;  // empty while the event is open
  double peak_frequency = 0.0;
  double mean_band_ratio = 0.0;

  nlohmann::json to_json(const std::string& type) const {
    return {{"type", type},
            {"onset", onset},
            {"offset", offset ? nlohmann::json(*offset) : nlohmann::json(nullptr)},
            {"peak_frequency", peak_frequency},
            {"mean_band_ratio", mean_band_ratio}};
  }
};

struct DetectorUpdate {
  enum class Kind { open, close };
  Kind kind = Kind::open;
  ShakeEvent event;
  std::uint64_t reported_at_sample = 0;  // stream position when the update was emitted

  std::string type() const { return kind == Kind::open ? "open" : "close"; }
};

/// Contiguous block of samples starting at absolute sample `start_index`.
struct SampleChunk {
  std::uint64_t start_index = 0;
  std::span<const double> samples;
};

/// One detector per stream; not thread-safe. Windows are evaluated every hop
/// once a full window has arrived, and are timestamped at their centre.
/// An event opens on the first window of a run of `min_consecutive_windows`
/// qualifying windows (ratio >= threshold and peak in the target range) and
/// closes at the first window of a run of `release_windows` failing ones.
class ShakeDetector {
public:
  explicit ShakeDetector(const DetectorConfig& config = {})
      : config_(config),
        analyzer_(config),
        window_(config.window_samples()),
        hop_(config.hop_samples()),
        ring_(window_, 0.0),
        linear_(window_, 0.0) {}

  const DetectorConfig& config() const { return config_; }
  std::uint64_t samples_seen() const { return seen_; }
  const std::vector<ShakeEvent>& events() const { return events_; }
  bool event_open() const { return open_; }

  std::vector<DetectorUpdate> push(const SampleChunk& chunk) {
    if (chunk.start_index < seen_)
      throw StreamError("chunk starting at sample " + std::to_string(chunk.start_index) +
                        " overlaps or precedes already consumed samples (next expected " + std::to_string(seen_) + ")");
    if (chunk.start_index > seen_)
      throw StreamError("chunk starting at sample " + std::to_string(chunk.start_index) + " leaves a gap after sample " +
                        std::to_string(seen_));
    std::vector<DetectorUpdate> updates;
    for (double x : chunk.samples) {
      if (!std::isfinite(x)) throw StreamError("non-finite sample at index " + std::to_string(seen_));
      ring_[static_cast<std::size_t>(seen_ % window_)] = x;
      ++seen_;
      if (seen_ >= window_ && (seen_ - window_) % hop_ == 0) evaluate(updates);
    }
    return updates;
  }

  /// Appends samples directly after the previous push.
  std::vector<DetectorUpdate> push(std::span<const double> samples) { return push(SampleChunk{seen_, samples}); }

private:
  void evaluate(std::vector<DetectorUpdate>& updates) {
    const std::uint64_t start = seen_ - window_;
    const auto head = static_cast<std::size_t>(start % window_);
    std::copy(ring_.begin() + static_cast<std::ptrdiff_t>(head), ring_.end(), linear_.begin());
    std::copy(ring_.begin(), ring_.begin() + static_cast<std::ptrdiff_t>(head),
              linear_.begin() + static_cast<std::ptrdiff_t>(window_ - head));
    const BandRatio br = analyzer_(linear_);
    const double t = (static_cast<double>(start) + 0.5 * static_cast<double>(window_)) / config_.sample_rate;
    const bool qualifies = br.ratio >= config_.ratio_threshold && br.peak_frequency >= config_.peak_target_low &&
                           br.peak_frequency <= config_.peak_target_high;

    if (!open_) {
      if (!qualifies) {
        run_.clear();
        return;
      }
      if (run_.empty()) run_start_ = t;
      run_.push_back(br);
      if (run_.size() >= config_.min_consecutive_windows) {
        open_ = true;
        release_ = 0;
        ShakeEvent e;
        e.onset = run_start_;
        summarize(e);
        events_.push_back(e);
        updates.push_back({DetectorUpdate::Kind::open, e, seen_});
      }
      return;
    }

    if (qualifies) {
      release_ = 0;
      run_.push_back(br);
      return;
    }
    if (release_ == 0) release_start_ = t;
    if (++release_ >= config_.release_windows) {
      ShakeEvent& e = events_.back();
      e.offset = release_start_;
      summarize(e);
      updates.push_back({DetectorUpdate::Kind::close, e, seen_});
      open_ = false;
      release_ = 0;
      run_.clear();
    }
  }

  void summarize(ShakeEvent& e) const {
    double ratio = 0.0, peak = 0.0;
    for (const auto& b : run_) {
      ratio += b.ratio;
      peak += b.peak_frequency;
    }
    e.mean_band_ratio = ratio / static_cast<double>(run_.size());
    e.peak_frequency = peak / static_cast<double>(run_.size());
  }

  DetectorConfig config_;
  BandAnalyzer analyzer_;
  std::size_t window_;
  std::size_t hop_;
  std::vector<double> ring_;
  std::vector<double> linear_;
  std::uint64_t seen_ = 0;

  bool open_ = false;
  std::vector<BandRatio> run_;  // qualifying windows of the current run or open event
  double run_start_ = 0.0;
  std::size_t release_ = 0;
  double release_start_ = 0.0;
  std::vector<ShakeEvent> events_;
};

/// Runs a fresh detector over `chunks` and returns all events; an event still
/// open at the end of the stream has no offset.
inline std::vector<ShakeEvent> detect_stream(std::span<const SampleChunk> chunks, const DetectorConfig& config = {}) {
  ShakeDetector detector(config);
  for (const auto& c : chunks) detector.push(c);
  return detector.events();
}

/// Convenience: a whole record as one chunk.
inline std::vector<ShakeEvent> detect_signal(std::span<const double> samples, const DetectorConfig& config = {}) {
  const SampleChunk chunk{0, samples};
  return detect_stream(std::span<const SampleChunk>(&chunk, 1), config);
}

}  // namespace esdgait::legshake
