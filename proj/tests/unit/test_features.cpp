#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "neurotwin/error.hpp"
#include "neurotwin/features.hpp"

using namespace neurotwin;
using namespace neurotwin::features;

namespace {

Window sine_window(double freq, double amp = 1.0, double seconds = 2.0, double fs = 500.0) {
  Window w;
  w.sample_rate_hz = fs;
  const auto n = static_cast<std::size_t>(seconds * fs);
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(amp * std::sin(2 * std::numbers::pi * freq * i / fs + 0.3));
  return w;
}

Window noise_window(std::uint64_t seed, double sd = 1.0, std::size_t n = 1000) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0, sd);
  Window w;
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(d(rng));
  return w;
}

signal::RawSignal flat_signal(double seconds, double fs = 500.0) {
  signal::RawSignal s;
  s.sample_rate_hz = fs;
  s.samples.assign(static_cast<std::size_t>(seconds * fs), 1.0);
  return s;
}

}  // namespace

TEST(Segment, Counts) {
  EXPECT_EQ(segment(flat_signal(10), {2.0, 0.5}).size(), 9u);
  const auto tiles = segment(flat_signal(4), {2.0, 0.0});
  ASSERT_EQ(tiles.size(), 2u);
  EXPECT_EQ(tiles[0].samples.size(), 1000u);
  EXPECT_DOUBLE_EQ(tiles[1].start_s, 2.0);
  EXPECT_TRUE(segment(flat_signal(1), {2.0, 0.5}).empty());
}

TEST(Segment, IndexOrderedWithHop) {
  const auto ws = segment(flat_signal(10), {4.0, 0.75});
  for (std::size_t i = 0; i < ws.size(); ++i) {
    EXPECT_EQ(ws[i].index, i);
    EXPECT_DOUBLE_EQ(ws[i].start_s, static_cast<double>(i));
  }
  EXPECT_EQ(ws.size(), 7u);
}

TEST(Segment, RejectsBadSpec) {
  EXPECT_THROW(segment(flat_signal(10), {1.0, 0.5}), InvalidSpecError);
  EXPECT_THROW(segment(flat_signal(10), {6.0, 0.5}), InvalidSpecError);
  EXPECT_THROW(segment(flat_signal(10), {2.0, 1.0}), InvalidSpecError);
}

TEST(BandPower, AlphaDominatesForTenHz) {
  const auto w = sine_window(10);
  const double a = band_power(w, kAlpha);
  for (Band b : {kDelta, kTheta, kBeta, Band{31, 100}}) EXPECT_GT(a, band_power(w, b));
}

TEST(BandPower, ZeroWindowIsZero) {
  Window z;
  z.samples.assign(1000, 0.0);
  for (Band b : {kDelta, kTheta, kAlpha, kBeta, kGamma}) EXPECT_EQ(band_power(z, b), 0.0);
}

TEST(BandPower, OutsideNyquistRejected) {
  const auto w = sine_window(10, 1, 2, 100.0);
  EXPECT_THROW(band_power(w, kGamma), InvalidSpecError);
  EXPECT_THROW(band_power(w, Band{0.0, 4.0}), InvalidSpecError);
}

TEST(Periodogram, ParsevalAgainstWindowedEnergy) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto w = noise_window(seed, 3.0, 1000 + seed);
    const auto pg = periodogram(w.samples, 500);
    // Oracle: window-compensated mean power from the time domain.
    const std::size_t n = w.samples.size();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double h = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * i / n);
      num += w.samples[i] * w.samples[i] * h * h;
      den += h * h;
    }
    EXPECT_NEAR(pg.total() / (num / den), 1.0, 1e-6);
    double bands = 0;
    for (Band b : {kDelta, kTheta, kAlpha, kBeta, kGamma}) bands += band_power(pg, 500, b);
    EXPECT_LE(bands, pg.total() * (1 + 1e-6));
  }
}

TEST(Zcr, SineCrossesTwicePerCycle) {
  for (double f : {3.0, 10.0, 27.0}) {
    const auto w = sine_window(f, 1, 4);
    EXPECT_NEAR(zcr(w), 2 * f, 1.0 / 4.0) << f;
  }
}

TEST(Zcr, ConstantAndAlternating) {
  Window c;
  c.samples.assign(500, 2.0);
  EXPECT_EQ(zcr(c), 0.0);
  Window alt;
  for (int i = 0; i < 500; ++i) alt.samples.push_back(i % 2 == 0 ? 1.0 : -1.0);
  EXPECT_DOUBLE_EQ(zcr(alt), 499.0 / alt.duration_s());
}

TEST(Zcr, ZerosInheritSign) {
  Window w;
  w.sample_rate_hz = 1;
  w.samples = {1, 0, 0, 1, 0, -1, 0, -1};
  EXPECT_DOUBLE_EQ(zcr(w), 1.0 / 8.0);
  Window e;
  EXPECT_THROW(zcr(e), ShapeError);
}

TEST(Hjorth, SineValues) {
  const double amp = 3.0;
  const auto w = sine_window(10, amp);
  const auto h = hjorth(w);
  EXPECT_NEAR(h.activity / (amp * amp / 2), 1.0, 0.02);
  EXPECT_NEAR(h.complexity, 1.0, 0.05);
}

TEST(Hjorth, NoiseMobilityExceedsSine) {
  const auto s = sine_window(10, std::sqrt(2.0));
  const auto n = noise_window(4);
  EXPECT_GT(hjorth(n).mobility, hjorth(s).mobility);
}

TEST(Hjorth, DegenerateInputs) {
  Window c;
  c.samples.assign(100, 5.0);
  EXPECT_THROW(hjorth(c), DegenerateInputError);
  Window tiny;
  tiny.samples = {1, 2};
  EXPECT_THROW(hjorth(tiny), ShapeError);
}

TEST(Rms, Constant) {
  Window c;
  c.samples.assign(77, -4.5);
  EXPECT_DOUBLE_EQ(rms(c), 4.5);
}

TEST(SpectralEntropy, SineLowNoiseHigh) {
  EXPECT_LT(spectral_entropy(sine_window(10)), 0.3);
  EXPECT_GT(spectral_entropy(noise_window(42)), 0.9);
  Window z;
  z.samples.assign(100, 0.0);
  EXPECT_THROW(spectral_entropy(z), DegenerateInputError);
}

TEST(SpectralEntropy, AlwaysInUnitInterval) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int t = 0; t < 100; ++t) {
    Window w;
    const std::size_t n = 16 + rng() % 500;
    for (std::size_t i = 0; i < n; ++i) w.samples.push_back(u(rng) + (t % 3 == 0 ? 7.0 : 0.0));
    const double h = spectral_entropy(w);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, 1.0);
  }
}

TEST(Assemble, ZeroWindowErrorsWithIndex) {
  Window z;
  z.samples.assign(1000, 0.0);
  z.index = 7;
  try {
    assemble(z);
    FAIL();
  } catch (const DegenerateInputError& e) {
    EXPECT_NE(std::string(e.what()).find("window 7"), std::string::npos);
  }
}

TEST(Assemble, AlphaDominantSyntheticSignal) {
  signal::SynthesisSpec spec;
  spec.rng_seed = 31;
  spec.eog_amplitude = 0;
  spec.powerline_amplitude = 0;
  const auto sig = signal::synthesize_eeg(spec).clean;
  const auto fvs = extract_all(segment(sig, {}));
  ASSERT_EQ(fvs.size(), 9u);
  for (const auto& f : fvs) {
    const auto a = f.to_array();
    EXPECT_EQ(a.size(), kFeatureCount);
    for (std::size_t i = 0; i < 5; ++i) {
      if (i != 2) {
        EXPECT_GT(f.alpha_pw, a[i]);
      }
    }
    for (double v : a) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
  }
}

TEST(Assemble, ScalingInvariance) {
  const auto base = noise_window(77);
  const auto f = assemble(base);
  for (double c : {0.01, 3.0, 250.0}) {
    Window w = base;
    for (auto& v : w.samples) v *= c;
    const auto g = assemble(w);
    const auto fa = f.to_array();
    const auto ga = g.to_array();
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(ga[i] / (fa[i] * c * c), 1.0, 1e-9);
    EXPECT_NEAR(g.hjorth_activity / (f.hjorth_activity * c * c), 1.0, 1e-9);
    EXPECT_NEAR(g.rms, f.rms * c, 1e-9 * g.rms);
    EXPECT_EQ(g.zcr, f.zcr);
    EXPECT_NEAR(g.hjorth_mobility, f.hjorth_mobility, 1e-9);
    EXPECT_NEAR(g.hjorth_complexity, f.hjorth_complexity, 1e-9);
    EXPECT_NEAR(g.spectral_entropy, f.spectral_entropy, 1e-9);
  }
}

TEST(Assemble, OrderIndependentAcrossWindows) {
  std::vector<Window> ws{noise_window(1), sine_window(6), noise_window(2)};
  const auto a = extract_all(ws);
  std::vector<Window> rev(ws.rbegin(), ws.rend());
  const auto b = extract_all(rev);
  for (std::size_t i = 0; i < ws.size(); ++i) EXPECT_EQ(a[i], b[ws.size() - 1 - i]);
}

TEST(FeatureCsv, RoundTrip) {
  std::vector<Window> ws{noise_window(5), sine_window(12)};
  ws[1].index = 1;
  ws[1].start_s = 1.0;
  const auto fvs = extract_all(ws);
  const auto text = features_to_csv(ws, fvs);
  EXPECT_EQ(text.rfind("window_index,start_s,delta_pw,", 0), 0u);
  const auto back = features_from_csv(text);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto a = fvs[i].to_array();
    const auto b = back[i].to_array();
    for (std::size_t k = 0; k < kFeatureCount; ++k) EXPECT_DOUBLE_EQ(a[k], b[k]);
  }
}

TEST(FeatureVector, ArrayOrderMatchesNames) {
  FeatureVector f;
  f.delta_pw = 1;
  f.spectral_entropy = 11;
  f.zcr = 6;
  const auto a = f.to_array();
  EXPECT_EQ(a[0], 1);
  EXPECT_EQ(a[5], 6);
  EXPECT_EQ(a[10], 11);
  EXPECT_EQ(FeatureVector::from_array(a), f);
  EXPECT_EQ(kFeatureNames[5], "zcr");
  std::vector<double> bad(10, 0.0);
  EXPECT_THROW(FeatureVector::from_array(bad), ShapeError);
}
