#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "esdgait/dsp.hpp"
#include "oracles.hpp"

using namespace esdgait;
using namespace esdgait::dsp;

namespace {

SignalRecord record_of(std::vector<double> samples) {
  SignalRecord r;
  r.samples = std::move(samples);
  return r;
}

std::vector<double> iota_signal(std::size_t n, double start) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = start + static_cast<double>(i);
  return v;
}

}  // namespace

TEST(Trim, EqualLengthsUnchanged) {
  const auto out = trim_to_common_length({record_of(iota_signal(10, 0)), record_of(iota_signal(10, 5))});
  EXPECT_EQ(out[0].samples, iota_signal(10, 0));
  EXPECT_EQ(out[1].samples, iota_signal(10, 5));
}

TEST(Trim, EvenExcessSplitsEvenly) {
  const auto out = trim_to_common_length({record_of(iota_signal(12, 0)), record_of(iota_signal(10, 0))});
  EXPECT_EQ(out[0].samples, iota_signal(10, 1));
}

TEST(Trim, OddExcessTakesExtraFromEnd) {
  const auto out = trim_to_common_length({record_of(iota_signal(13, 0)), record_of(iota_signal(10, 0))});
  ASSERT_EQ(out[0].samples.size(), 10u);
  EXPECT_EQ(out[0].samples.front(), 1.0);  // one from the start
  EXPECT_EQ(out[0].samples.back(), 10.0);  // 11 and 12 removed from the end
}

TEST(Trim, MetadataSurvivesAndEmptyIsRejected) {
  auto r = record_of(iota_signal(20, 0));
  r.labels.person_id = "p3";
  r.seed = 17;
  const auto out = trim_to_common_length({r, record_of(iota_signal(5, 0))});
  EXPECT_EQ(out[0].labels.person_id, "p3");
  EXPECT_EQ(out[0].seed, 17u);
  EXPECT_THROW(trim_to_common_length({}), ValidationError);
}

TEST(ZTransform, ThreePointExample) {
  const std::vector<double> x{1.0, 2.0, 3.0};
  const auto z = z_transform(x);
  EXPECT_NEAR(z[0], -std::sqrt(1.5), 1e-12);
  EXPECT_NEAR(z[1], 0.0, 1e-12);
  EXPECT_NEAR(z[2], std::sqrt(1.5), 1e-12);
}

TEST(ZTransform, ConstantIsDegenerate) {
  const std::vector<double> x{5.0, 5.0, 5.0};
  EXPECT_THROW(z_transform(x), DegenerateSignalError);
  const std::vector<double> single{1.0};
  EXPECT_THROW(z_transform(single), DegenerateSignalError);
}

TEST(ZTransform, MomentsAffineInvarianceAndIdempotence) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.01, 100.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = oracle::gaussian_signal(1000 + trial * 37, trial);
    const auto z = z_transform(x);
    double mean = 0.0, var = 0.0;
    for (double v : z) mean += v;
    mean /= z.size();
    for (double v : z) var += (v - mean) * (v - mean);
    var /= z.size();
    EXPECT_LT(std::abs(mean), 1e-9);
    EXPECT_LT(std::abs(var - 1.0), 1e-9);

    const double a = u(rng), b = u(rng) - 50.0;
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i] + b;
    const auto zy = z_transform(y);
    const auto zz = z_transform(z);
    for (std::size_t i = 0; i < z.size(); ++i) {
      ASSERT_NEAR(zy[i], z[i], 1e-9);
      ASSERT_NEAR(zz[i], z[i], 1e-9);
    }
  }
}

TEST(Mel, AnchorPoints) {
  EXPECT_EQ(hz_to_mel(0.0), 0.0);
  EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-9);
  EXPECT_NEAR(hz_to_mel(700.0), 781.17, 0.01);
  EXPECT_NEAR(hz_to_mel(1000.0), 999.99, 0.01);
  EXPECT_THROW(hz_to_mel(-1.0), DomainError);
  for (double f = 0.0; f < 5000.0; f += 17.0) {
    EXPECT_LT(hz_to_mel(f), hz_to_mel(f + 1.0));
    EXPECT_NEAR(mel_to_hz(hz_to_mel(f)), f, 1e-9 * (1.0 + f));
  }
}

TEST(Filterbank, ShapeWeightsAndSpacing) {
  const MfccConfig config;
  const auto fb = build_mel_filterbank(config);
  ASSERT_EQ(fb.size(), 40u);
  EXPECT_EQ(fb.n_bins, 1251u);
  for (std::size_t m = 0; m < fb.size(); ++m) {
    double sum = 0.0;
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      ASSERT_GE(fb.filters[m][k], 0.0);
      sum += fb.filters[m][k];
      // Support is contiguous.
      const bool inside = k >= fb.support[m].first && k <= fb.support[m].second;
      ASSERT_EQ(inside, fb.filters[m][k] > 0.0) << "filter " << m << " bin " << k;
    }
    EXPECT_GT(sum, 0.0);
    if (m > 0) {
      EXPECT_GT(fb.center_frequencies[m], fb.center_frequencies[m - 1]);
      EXPECT_LE(fb.support[m].first, fb.support[m - 1].second);  // neighbours overlap
    }
  }
  const double first_gap = fb.center_frequencies[1] - fb.center_frequencies[0];
  const double last_gap = fb.center_frequencies[39] - fb.center_frequencies[38];
  EXPECT_LT(first_gap, last_gap);
  // Centres equally spaced in mel.
  const double step = hz_to_mel(fb.center_frequencies[1]) - hz_to_mel(fb.center_frequencies[0]);
  for (std::size_t m = 1; m < fb.size(); ++m)
    EXPECT_NEAR(hz_to_mel(fb.center_frequencies[m]) - hz_to_mel(fb.center_frequencies[m - 1]), step, 1e-9);
}

TEST(Filterbank, WeightsMatchDirectTriangles) {
  const MfccConfig config;
  const auto fb = build_mel_filterbank(config);
  for (std::size_t m = 0; m < fb.size(); ++m)
    for (std::size_t k = 0; k < fb.n_bins; ++k)
      ASSERT_NEAR(fb.filters[m][k], oracle::triangle(m, 40, 0.0, 5000.0, k * 4.0), 1e-12);
}

TEST(Filterbank, SineAtCentreExcitesItsFilterMost) {
  const MfccConfig config;
  const auto fb = build_mel_filterbank(config);
  for (std::size_t m : {5u, 12u, 20u, 33u}) {
    // Snap to the nearest bin so the tone does not leak between neighbours.
    const double f = std::round(fb.center_frequencies[m] / 4.0) * 4.0;
    std::vector<double> x(2500);
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = std::sin(2.0 * std::numbers::pi * f * t / 1e4);
    const auto power = oracle::naive_power_spectrum(x);
    const auto energies = fb.apply(power);
    const auto best = std::max_element(energies.begin(), energies.end()) - energies.begin();
    EXPECT_EQ(static_cast<std::size_t>(best), m) << "f=" << f;
  }
}

TEST(Filterbank, TooManyFiltersIsAConfigError) {
  MfccConfig config;
  config.window_size = 64;
  config.hop_length = 32;
  config.n_mel_filters = 200;
  EXPECT_THROW(build_mel_filterbank(config), ConfigError);
}

TEST(Dct, SquareBasisIsOrthonormal) {
  const auto d = dct_matrix(40, 40);
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 40; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < 40; ++k) dot += d[i][k] * d[j][k];
      ASSERT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-10);
    }
}

TEST(Mfcc, TableShapeForTwentyFiveThousandSamples) {
  const auto m = mfcc(oracle::gaussian_signal(25000, 1));
  EXPECT_EQ(m.n_coeffs, 20u);
  EXPECT_EQ(m.n_frames, 19u);
  EXPECT_EQ(m.coefficients.size(), 380u);
  EXPECT_DOUBLE_EQ(m.frame_times.front(), 0.125);
  EXPECT_DOUBLE_EQ(m.frame_times[1] - m.frame_times[0], 0.125);
  for (double v : m.coefficients) EXPECT_TRUE(std::isfinite(v));
}

TEST(Mfcc, FrameCountFormulaHoldsForRandomLengths) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> len(2500, 20000);
  const MfccExtractor extractor(MfccConfig{});
  for (int i = 0; i < 30; ++i) {
    const std::size_t n = len(rng);
    const auto m = extractor.compute(oracle::gaussian_signal(n, i));
    EXPECT_EQ(m.n_frames, (n - 2500) / 1250 + 1) << n;
  }
}

TEST(Mfcc, ShorterThanOneWindowFails) {
  EXPECT_THROW(mfcc(oracle::gaussian_signal(2499, 1)), TooShortError);
}

TEST(Mfcc, GainOnlyMovesRowZero) {
  const auto x = oracle::gaussian_signal(10000, 4);
  for (double gain : {2.0, 10.0}) {
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = gain * x[i];
    const auto a = mfcc(x), b = mfcc(y);
    const double shift = b.at(0, 0) - a.at(0, 0);
    EXPECT_NEAR(shift, std::sqrt(40.0) * std::log(gain * gain), 1e-9);
    for (std::size_t f = 0; f < a.n_frames; ++f) {
      EXPECT_NEAR(b.at(0, f) - a.at(0, f), shift, 1e-9);
      for (std::size_t c = 1; c < a.n_coeffs; ++c) ASSERT_NEAR(a.at(c, f), b.at(c, f), 1e-9);
    }
  }
}

TEST(Mfcc, MatchesNaiveReference) {
  for (std::uint64_t seed = 100; seed < 103; ++seed) {
    const auto x = oracle::gaussian_signal(6250, seed);
    const auto got = mfcc(x);
    const auto want = oracle::mfcc(x);
    ASSERT_EQ(got.n_frames, want.front().size());
    for (std::size_t c = 0; c < 20; ++c)
      for (std::size_t f = 0; f < got.n_frames; ++f) ASSERT_NEAR(got.at(c, f), want[c][f], 1e-6);
  }
}

TEST(Mfcc, SilentFramesHitTheLogFloor) {
  const std::vector<double> zeros(5000, 0.0);
  const auto m = mfcc(zeros);
  EXPECT_NEAR(m.at(0, 0), std::sqrt(40.0) * std::log(1e-10), 1e-9);
  for (std::size_t c = 1; c < 20; ++c) EXPECT_NEAR(m.at(c, 0), 0.0, 1e-9);
}

TEST(Mfcc, ConfigValidation) {
  MfccConfig c;
  c.hop_length = 3000;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.n_mfcc = 41;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  c.fmax = 6000.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = {};
  EXPECT_EQ(MfccConfig::from_json(c.to_json()).to_json(), c.to_json());
}

TEST(Featurize, LengthsAndNames) {
  auto r = record_of(oracle::gaussian_signal(25000, 9));
  r.labels.plant_type = "ficus";
  r.labels.location = "lab";
  const auto plain = featurize(r, MfccConfig{});
  EXPECT_EQ(plain.values.size(), 380u);
  EXPECT_EQ(plain.feature_names.front(), "mfcc0_t0");
  EXPECT_EQ(plain.feature_names[18], "mfcc0_t18");
  EXPECT_EQ(plain.feature_names[19], "mfcc1_t0");
  EXPECT_EQ(plain.feature_names[379], "mfcc19_t18");

  const CategoryMaps maps{{"plant_type", {{"ficus", 0}, {"pothos", 1}}}, {"location", {{"lab", 3}}}};
  const auto with = featurize(r, MfccConfig{}, true, maps);
  ASSERT_EQ(with.values.size(), 382u);
  EXPECT_EQ(with.feature_names[380], "plant_type");
  EXPECT_EQ(with.feature_names[381], "location");
  EXPECT_EQ(with.values[380], 0.0);
  EXPECT_EQ(with.values[381], 3.0);
  EXPECT_EQ(featurize(r, MfccConfig{}, true, maps).values, with.values);
}

TEST(Featurize, UnknownCategoryIsAnEncodingError) {
  auto r = record_of(oracle::gaussian_signal(5000, 9));
  r.labels.plant_type = "cactus";
  r.labels.location = "lab";
  const CategoryMaps maps{{"plant_type", {{"ficus", 0}}}, {"location", {{"lab", 0}}}};
  EXPECT_THROW(featurize(r, MfccConfig{}, true, maps), EncodingError);
}

TEST(Featurize, StandardizesFirst) {
  auto r = record_of(oracle::gaussian_signal(5000, 12));
  auto scaled = r;
  for (double& v : scaled.samples) v = 1e-11 * v + 3e-12;
  const auto a = featurize(r, MfccConfig{});
  const auto b = featurize(scaled, MfccConfig{});
  for (std::size_t i = 0; i < a.values.size(); ++i) ASSERT_NEAR(a.values[i], b.values[i], 1e-6);
  auto flat = record_of(std::vector<double>(5000, 2.0));
  EXPECT_THROW(featurize(flat, MfccConfig{}), DegenerateSignalError);
}
