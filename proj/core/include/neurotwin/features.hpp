#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neurotwin/signal_chain.hpp"

namespace neurotwin::features {

inline constexpr std::size_t kFeatureCount = 11;

/// Canonical field order. This order is the wire schema for packets, CSVs and
/// model inputs.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "delta_pw",        "theta_pw",        "alpha_pw",          "beta_pw",
    "gamma_pw",        "zcr",             "hjorth_activity",   "hjorth_mobility",
    "hjorth_complexity", "rms",           "spectral_entropy"};

struct FeatureVector {
  double delta_pw = 0;
  double theta_pw = 0;
  double alpha_pw = 0;
  double beta_pw = 0;
  double gamma_pw = 0;
  double zcr = 0;
  double hjorth_activity = 0;
  double hjorth_mobility = 0;
  double hjorth_complexity = 0;
  double rms = 0;
  double spectral_entropy = 0;

  std::array<double, kFeatureCount> to_array() const;
  static FeatureVector from_array(std::span<const double> values);

  bool operator==(const FeatureVector&) const = default;
};

struct Band {
  double low_hz;
  double high_hz;
};

inline constexpr Band kDelta{0.5, 4.0};
inline constexpr Band kTheta{4.0, 8.0};
inline constexpr Band kAlpha{8.0, 13.0};
inline constexpr Band kBeta{13.0, 30.0};
inline constexpr Band kGamma{31.0, 100.0};

struct WindowSpec {
  double length_s = 2.0;
  double overlap_fraction = 0.5;
};

struct Window {
  std::vector<double> samples;
  double sample_rate_hz = 500.0;
  std::size_t index = 0;
  double start_s = 0.0;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

/// Hop = length * (1 - overlap); the trailing partial window is dropped.
/// A signal shorter than one window yields an empty list.
std::vector<Window> segment(const signal::RawSignal& signal, const WindowSpec& spec);

/// One-sided Hann periodogram, scaled so that the bins sum to the
/// window-compensated mean power sum((x*w)^2) / sum(w^2).
struct Periodogram {
  std::vector<double> power;  // bins 0..n/2
  double bin_hz = 0.0;

  double total() const;
};

Periodogram periodogram(std::span<const double> samples, double sample_rate_hz);

/// Sum of periodogram bins whose center lies in [low, high).
double band_power(const Window& window, Band band);
double band_power(const Periodogram& pg, double sample_rate_hz, Band band);

double zcr(const Window& window);

struct Hjorth {
  double activity;
  double mobility;
  double complexity;
};

Hjorth hjorth(const Window& window);

double rms(const Window& window);
double spectral_entropy(const Window& window);
double spectral_entropy(const Periodogram& pg);

/// All eleven features for one window. Sub-op errors are rethrown with the
/// window index in the message.
FeatureVector assemble(const Window& window);

std::vector<FeatureVector> extract_all(const std::vector<Window>& windows);

/// `window_index,start_s,` + the eleven canonical names.
std::string features_to_csv(const std::vector<Window>& windows, const std::vector<FeatureVector>& fvs);
std::vector<FeatureVector> features_from_csv(std::string_view text);

}  // namespace neurotwin::features
