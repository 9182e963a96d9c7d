#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "esdgait/legshake.hpp"
#include "esdgait/simkit.hpp"

using namespace esdgait;
using namespace esdgait::legshake;

namespace {

std::vector<double> sine(double freq, std::size_t n, double rate = 10000.0, double amplitude = 1.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate);
  return x;
}

std::vector<double> noise(std::size_t n, double std_dev, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, std_dev);
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return x;
}

// Noise std giving `snr_db` against a sinusoid of peak `amplitude`.
double noise_for_snr(double amplitude, double snr_db) {
  return amplitude / std::sqrt(2.0) / std::pow(10.0, snr_db / 20.0);
}

SignalRecord shake_record(double freq, double duration, double onset, std::uint64_t seed, double snr_db = 10.0) {
  const double a = simkit::legshake_amplitude(freq, {}, {});
  return simkit::synth_legshake(freq, duration, onset, {}, {}, noise_for_snr(a, snr_db), seed);
}

std::vector<ShakeEvent> run_chunked(const std::vector<double>& x, std::size_t chunk) {
  ShakeDetector d;
  for (std::size_t i = 0; i < x.size(); i += chunk)
    d.push(std::span<const double>(x.data() + i, std::min(chunk, x.size() - i)));
  return d.events();
}

}  // namespace

TEST(BandRatio, PureInBandSineIsAlmostAllInBand) {
  const auto r = band_ratio(sine(5.5, 10000));
  EXPECT_GT(r.ratio, 0.99);
  EXPECT_NEAR(r.peak_frequency, 5.5, 0.1);
}

TEST(BandRatio, PeakTracksOffBinFrequencies) {
  for (double f : {4.6, 5.0, 5.3, 5.75, 6.2, 7.4}) EXPECT_NEAR(band_ratio(sine(f, 10000)).peak_frequency, f, 0.1) << f;
}

TEST(BandRatio, OutOfBandSineIsNearZero) {
  EXPECT_LT(band_ratio(sine(50.0, 10000)).ratio, 0.01);
  EXPECT_LT(band_ratio(sine(1.5, 10000)).ratio, 0.05);
}

TEST(BandRatio, SilentOrConstantWindowIsZero) {
  const auto r = band_ratio(std::vector<double>(10000, 3.0));
  EXPECT_EQ(r.ratio, 0.0);
  EXPECT_EQ(r.peak_frequency, 0.0);
}

TEST(BandRatio, WhiteNoiseMatchesBandFraction) {
  // Flat spectrum: expected share is the band width over Nyquist.
  double mean = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) mean += band_ratio(noise(10000, 1.0, s)).ratio / 20.0;
  EXPECT_NEAR(mean, 5.0 / 5000.0, 5e-4);
}

TEST(BandRatio, TenDbSnrMonteCarlo) {
  const double sigma = noise_for_snr(1.0, 10.0);
  const auto clean = sine(5.5, 10000);
  int above = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto x = noise(10000, sigma, 1000 + s);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += clean[i];
    above += band_ratio(x).ratio > 0.5;
  }
  EXPECT_GE(above, 95);
}

TEST(BandRatio, RejectsWrongWindowLength) {
  EXPECT_THROW(band_ratio(std::vector<double>(999, 0.0)), ValidationError);
}

TEST(Detector, OnsetNearTruth) {
  const auto r = shake_record(5.5, 8.0, 2.0, 3);
  const auto events = detect_signal(r.samples);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_NEAR(events[0].onset, 2.0, 0.25);
  EXPECT_GE(events[0].peak_frequency, 5.0);
  EXPECT_LE(events[0].peak_frequency, 6.0);
}

TEST(Detector, NoiseOnlyGivesNoEvents) {
  const double sigma = noise_for_snr(simkit::legshake_amplitude(5.5, {}, {}), 10.0);
  for (std::uint64_t s = 0; s < 10; ++s) EXPECT_TRUE(detect_signal(noise(80000, sigma, s)).empty());
}

TEST(Detector, ContinuousShakeLeavesOneOpenEvent) {
  const auto x = sine(5.5, 50000);
  const auto events = detect_signal(x);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_FALSE(events[0].offset.has_value());
  EXPECT_NEAR(events[0].onset, 0.5, 1e-12);
}

TEST(Detector, ShakeBurstClosesAfterItEnds) {
  auto x = sine(5.5, 40000);
  for (std::size_t i = 30000; i < x.size(); ++i) x[i] = 0.0;
  auto n = noise(x.size(), 0.01, 2);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += n[i];
  const auto events = detect_signal(x);
  ASSERT_EQ(events.size(), 1u);
  ASSERT_TRUE(events[0].offset.has_value());
  EXPECT_GT(*events[0].offset, events[0].onset);
  EXPECT_NEAR(*events[0].offset, 3.0, 0.5);
}

TEST(Detector, ChunkingDoesNotChangeEvents) {
  const auto r = shake_record(5.8, 8.0, 3.1, 11);
  const auto whole = detect_signal(r.samples);
  ASSERT_FALSE(whole.empty());
  for (std::size_t chunk : {1u, 7u, 1250u, 2500u, 9999u, 80000u}) {
    const auto got = run_chunked(r.samples, chunk);
    ASSERT_EQ(got.size(), whole.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].onset, whole[i].onset);
      EXPECT_EQ(got[i].offset, whole[i].offset);
      EXPECT_EQ(got[i].peak_frequency, whole[i].peak_frequency);
      EXPECT_EQ(got[i].mean_band_ratio, whole[i].mean_band_ratio);
    }
  }
}

TEST(Detector, RandomChunkSizesAgree) {
  const auto r = shake_record(5.2, 8.0, 1.7, 5);
  const auto whole = detect_signal(r.samples);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 5; ++t) {
    ShakeDetector d;
    std::size_t i = 0;
    while (i < r.samples.size()) {
      const std::size_t len = std::min<std::size_t>(1 + rng() % 3000, r.samples.size() - i);
      d.push(SampleChunk{i, std::span<const double>(r.samples.data() + i, len)});
      i += len;
    }
    ASSERT_EQ(d.events().size(), whole.size());
    for (std::size_t e = 0; e < whole.size(); ++e) EXPECT_EQ(d.events()[e].onset, whole[e].onset);
  }
}

TEST(Detector, GapsAndOverlapsAreStreamErrors) {
  const std::vector<double> x(100, 0.0);
  ShakeDetector d;
  d.push(SampleChunk{0, x});
  EXPECT_THROW(d.push(SampleChunk{50, x}), StreamError);
  EXPECT_THROW(d.push(SampleChunk{150, x}), StreamError);
  EXPECT_NO_THROW(d.push(SampleChunk{100, x}));
  const std::vector<double> bad{0.0, std::nan("")};
  EXPECT_THROW(d.push(bad), StreamError);
}

TEST(Detector, EventsRespectHysteresisAndNeverOverlap) {
  const DetectorConfig cfg;
  std::mt19937_64 rng(21);
  for (int t = 0; t < 10; ++t) {
    // Alternating bursts of shaking and silence of random length.
    std::vector<double> x;
    const double sigma = 0.1;
    while (x.size() < 100000) {
      const std::size_t burst = 2000 + rng() % 20000;
      const bool on = rng() % 2 == 0;
      const auto s = on ? sine(5.5, burst) : std::vector<double>(burst, 0.0);
      x.insert(x.end(), s.begin(), s.end());
    }
    const auto n = noise(x.size(), sigma, t);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += n[i];
    const auto events = detect_signal(x, cfg);
    for (std::size_t e = 0; e < events.size(); ++e) {
      if (events[e].offset) {
        EXPECT_GE(*events[e].offset - events[e].onset, cfg.min_consecutive_windows * cfg.hop_seconds - 1e-9);
      }
      if (e > 0) {
        ASSERT_TRUE(events[e - 1].offset.has_value());
        EXPECT_LE(*events[e - 1].offset, events[e].onset);
      }
      EXPECT_GE(events[e].peak_frequency, cfg.band_low);
      EXPECT_LE(events[e].peak_frequency, cfg.band_high);
    }
  }
}

TEST(Detector, OpenIsReportedWithinLatencyBound) {
  const DetectorConfig cfg;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const double onset = 1.0 + 0.37 * static_cast<double>(s);
    const auto r = shake_record(5.05 + 0.09 * static_cast<double>(s), 8.0, onset, 40 + s);
    ShakeDetector d(cfg);
    std::optional<DetectorUpdate> first;
    for (std::size_t i = 0; i < r.samples.size() && !first; i += 1250) {
      const auto ups = d.push(std::span<const double>(r.samples.data() + i, std::min<std::size_t>(1250, r.samples.size() - i)));
      if (!ups.empty()) first = ups.front();
    }
    ASSERT_TRUE(first.has_value());
    EXPECT_EQ(first->type(), "open");
    const double reported = static_cast<double>(first->reported_at_sample) / cfg.sample_rate;
    EXPECT_LE(reported - onset, cfg.window_seconds + cfg.min_consecutive_windows * cfg.hop_seconds + 1e-9);
  }
}

TEST(Detector, TimestampsAreWindowCentres) {
  DetectorConfig cfg;
  cfg.min_consecutive_windows = 1;
  cfg.release_windows = 1;
  auto x = std::vector<double>(20000, 0.0);
  const auto s = sine(5.5, 10000);
  std::copy(s.begin(), s.end(), x.begin() + 5000);
  const auto events = detect_signal(x, cfg);
  ASSERT_FALSE(events.empty());
  // The onset is a window centre on the 0.25 s grid offset by half a window.
  const double k = (events[0].onset - 0.5) / 0.25;
  EXPECT_NEAR(k, std::round(k), 1e-9);
}

TEST(DetectorConfig, ValidationAndRoundTrip) {
  DetectorConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.window_samples(), 10000u);
  EXPECT_EQ(c.hop_samples(), 2500u);
  const auto back = DetectorConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  auto bad = c;
  bad.band_low = 5.5;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = c;
  bad.ratio_threshold = 1.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = c;
  bad.band_high = 6000.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = c;
  bad.min_consecutive_windows = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
}
