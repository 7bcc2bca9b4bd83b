#pragma once

// EEG synthesis, IIR filtering, scalar LMS EOG removal and SNR measurement.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace neurotwin::signal {

struct RawSignal {
  std::vector<double> samples;  // microvolts
  double sample_rate_hz = 500.0;
  std::string channel_id = "Cz";

  std::size_t size() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

struct ReferenceSignal {
  std::vector<double> samples;
  double sample_rate_hz = 500.0;
};

struct RhythmComponent {
  double freq_hz = 10.0;
  double amplitude_uv = 20.0;
};

struct SynthesisSpec {
  double duration_s = 10.0;
  double sample_rate_hz = 500.0;
  std::vector<RhythmComponent> rhythms{{10.0, 20.0}};
  double noise_std = 3.0;
  double eog_amplitude = 40.0;  // peak-ish amplitude of the reference EOG
  double eog_rate_hz = 0.5;     // blink/saccade events per second
  double eog_coupling = 0.8;    // fraction of the EOG that projects onto the EEG
  double powerline_hz = 50.0;
  double powerline_amplitude = 10.0;
  // Interictal-style spike events (0 disables).
  double spike_rate_hz = 0.0;
  double spike_amplitude = 0.0;
  std::uint64_t rng_seed = 0;
  std::string channel_id = "Cz";
};

struct SynthesizedEeg {
  RawSignal contaminated;
  ReferenceSignal reference;
  RawSignal clean;
};

/// Builds clean + coupling*EOG + powerline + white noise. The clean part is
/// the rhythm sum plus optional spikes; all phases and events come from the
/// seed, so equal specs give bit-identical output.
SynthesizedEeg synthesize_eeg(const SynthesisSpec& spec);

enum class FilterKind { bandpass, notch };

struct FilterSpec {
  FilterKind kind = FilterKind::bandpass;
  double low_hz = 0.5;
  double high_hz = 45.0;
  double center_hz = 50.0;
  double q_factor = 30.0;
  int order = 4;  // overall bandpass order; must be a positive multiple of 2

  static FilterSpec bandpass(double low_hz, double high_hz, int order = 4);
  static FilterSpec notch(double center_hz, double q_factor = 30.0);
};

/// One direct-form-II-transposed biquad, a0 normalized to 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

/// Second-order sections for a filter spec at a given sample rate.
/// Throws InvalidSpecError when a cutoff is at or above Nyquist.
std::vector<Biquad> design_sos(const FilterSpec& spec, double sample_rate_hz);

/// Causal cascade filter from zero initial state. Same length and rate.
RawSignal apply_filter(const RawSignal& signal, const FilterSpec& spec);
std::vector<double> apply_sos(std::span<const double> x, std::span<const Biquad> sections);

struct LmsState {
  double coefficient = 0.0;
  double learning_rate = 0.01;
};

struct LmsResult {
  RawSignal denoised;
  LmsState state;
};

inline constexpr double kLmsDivergenceLimit = 1e6;

/// Scalar LMS: e(t) = y(t) - a(t) r(t), then a(t+1) = a(t) + mu e(t) r(t).
LmsResult lms_denoise(const RawSignal& signal, const ReferenceSignal& reference, LmsState state);

/// nullopt means the residual is exactly zero (infinite SNR).
std::optional<double> snr_db(const RawSignal& clean, const RawSignal& signal,
                             std::size_t skip_samples = 0);

struct ChainConfig {
  FilterSpec bandpass = FilterSpec::bandpass(0.5, 45.0);
  std::optional<FilterSpec> notch = FilterSpec::notch(50.0);
  double lms_learning_rate = 0.01;
  // The reference is filtered by the same cascade, then scaled to unit RMS
  // so that lms_learning_rate has a rate-independent meaning.
  bool normalize_reference = true;
};

struct ChainResult {
  RawSignal denoised;
  LmsState lms;
  double reference_scale = 1.0;
};

/// bandpass -> notch -> LMS EOG decorrelation.
ChainResult denoise_chain(const RawSignal& raw, const ReferenceSignal& reference,
                          const ChainConfig& config = {});

/// Samples excluded from amplitude/SNR measurements while the IIR settles.
inline std::size_t settling_samples(double sample_rate_hz) {
  return static_cast<std::size_t>(sample_rate_hz);
}

}  // namespace neurotwin::signal
