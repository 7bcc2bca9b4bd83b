#include "neurotwin/signal_chain.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "neurotwin/error.hpp"

namespace neurotwin::signal {

namespace {

constexpr double kPi = std::numbers::pi;

void require_finite(std::span<const double> xs, const char* what) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i])) {
      throw NumericError(std::string(what) + ": non-finite sample at index " + std::to_string(i));
    }
  }
}

// Half-cosine-shaped blink bump, ~0.3 s long.
double blink_shape(double dt_s) {
  constexpr double half_width = 0.15;
  if (std::abs(dt_s) >= half_width) return 0.0;
  return 0.5 * (1.0 + std::cos(kPi * dt_s / half_width));
}

// Biphasic spike-and-slow-wave transient, ~0.25 s long.
double spike_shape(double dt_s) {
  if (dt_s < 0.0 || dt_s > 0.25) return 0.0;
  if (dt_s < 0.035) return std::sin(kPi * dt_s / 0.035);
  return -0.35 * std::sin(kPi * (dt_s - 0.035) / 0.215);
}

std::vector<double> poisson_events(std::mt19937_64& rng, double rate_hz, double duration_s) {
  std::vector<double> times;
  if (rate_hz <= 0.0) return times;
  std::exponential_distribution<double> gap(rate_hz);
  for (double t = gap(rng); t < duration_s; t += gap(rng)) times.push_back(t);
  return times;
}

Biquad first_order(double fc, double fs, bool highpass) {
  const double k = std::tan(kPi * fc / fs);
  Biquad q;
  q.a1 = (k - 1.0) / (k + 1.0);
  if (highpass) {
    q.b0 = 1.0 / (1.0 + k);
    q.b1 = -q.b0;
  } else {
    q.b0 = k / (1.0 + k);
    q.b1 = q.b0;
  }
  return q;
}

Biquad second_order(double fc, double fs, double quality, bool highpass) {
  const double w0 = 2.0 * kPi * fc / fs;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * quality);
  const double a0 = 1.0 + alpha;
  Biquad q;
  if (highpass) {
    q.b0 = (1.0 + cw) / 2.0 / a0;
    q.b1 = -(1.0 + cw) / a0;
  } else {
    q.b0 = (1.0 - cw) / 2.0 / a0;
    q.b1 = (1.0 - cw) / a0;
  }
  q.b2 = q.b0;
  q.a1 = -2.0 * cw / a0;
  q.a2 = (1.0 - alpha) / a0;
  return q;
}

// Butterworth sections of order m at cutoff fc.
void append_butterworth(std::vector<Biquad>& out, int m, double fc, double fs, bool highpass) {
  for (int k = 1; k <= m / 2; ++k) {
    const double quality = 1.0 / (2.0 * std::cos((2.0 * k - 1.0) * kPi / (2.0 * m)));
    out.push_back(second_order(fc, fs, quality, highpass));
  }
  if (m % 2 == 1) out.push_back(first_order(fc, fs, highpass));
}

}  // namespace

SynthesizedEeg synthesize_eeg(const SynthesisSpec& spec) {
  if (!(spec.duration_s > 0.0) || !(spec.sample_rate_hz > 0.0)) {
    throw InvalidSpecError("synthesize_eeg: duration and sample rate must be positive");
  }
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate_hz));
  if (n == 0) throw InvalidSpecError("synthesize_eeg: spec yields zero samples");

  std::mt19937_64 rng(spec.rng_seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::uniform_real_distribution<double> unit(0.5, 1.0);

  std::vector<double> rhythm_phase;
  for (std::size_t k = 0; k < spec.rhythms.size(); ++k) rhythm_phase.push_back(phase(rng));
  const double line_phase = phase(rng);
  const double drift_phase = phase(rng);

  struct Event {
    double t;
    double gain;
  };
  std::vector<Event> blinks;
  for (double t : poisson_events(rng, spec.eog_rate_hz, spec.duration_s)) {
    const double sign = unit(rng) < 0.75 ? 1.0 : -1.0;
    blinks.push_back({t, sign * unit(rng)});
  }
  std::vector<Event> spikes;
  for (double t : poisson_events(rng, spec.spike_rate_hz, spec.duration_s)) {
    spikes.push_back({t, unit(rng)});
  }

  SynthesizedEeg out;
  out.clean.sample_rate_hz = out.contaminated.sample_rate_hz = out.reference.sample_rate_hz =
      spec.sample_rate_hz;
  out.clean.channel_id = out.contaminated.channel_id = spec.channel_id;
  out.clean.samples.resize(n);
  out.contaminated.samples.resize(n);
  out.reference.samples.resize(n);

  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate_hz;

    double clean = 0.0;
    for (std::size_t k = 0; k < spec.rhythms.size(); ++k) {
      const auto& c = spec.rhythms[k];
      clean += c.amplitude_uv * std::sin(2.0 * kPi * c.freq_hz * t + rhythm_phase[k]);
    }
    for (const auto& s : spikes) clean += spec.spike_amplitude * s.gain * spike_shape(t - s.t);

    double eog = 0.25 * spec.eog_amplitude * std::sin(2.0 * kPi * 0.7 * t + drift_phase);
    for (const auto& b : blinks) eog += spec.eog_amplitude * b.gain * blink_shape(t - b.t);

    const double line =
        spec.powerline_amplitude * std::sin(2.0 * kPi * spec.powerline_hz * t + line_phase);
    // Always draw so that enabling noise later does not shift other streams.
    const double white = noise(rng);

    out.clean.samples[i] = clean;
    out.reference.samples[i] = eog;
    double contaminated = clean;
    if (spec.eog_coupling != 0.0 && spec.eog_amplitude != 0.0) contaminated += spec.eog_coupling * eog;
    if (spec.powerline_amplitude != 0.0) contaminated += line;
    if (spec.noise_std != 0.0) contaminated += spec.noise_std * white;
    out.contaminated.samples[i] = contaminated;
  }
  return out;
}

FilterSpec FilterSpec::bandpass(double low_hz, double high_hz, int order) {
  FilterSpec s;
  s.kind = FilterKind::bandpass;
  s.low_hz = low_hz;
  s.high_hz = high_hz;
  s.order = order;
  return s;
}

FilterSpec FilterSpec::notch(double center_hz, double q_factor) {
  FilterSpec s;
  s.kind = FilterKind::notch;
  s.center_hz = center_hz;
  s.q_factor = q_factor;
  s.order = 2;
  return s;
}

std::vector<Biquad> design_sos(const FilterSpec& spec, double fs) {
  if (!(fs > 0.0)) throw InvalidSpecError("filter: sample rate must be positive");
  const double nyquist = fs / 2.0;
  std::vector<Biquad> sos;
  if (spec.kind == FilterKind::bandpass) {
    if (!(spec.low_hz > 0.0) || !(spec.low_hz < spec.high_hz) || !(spec.high_hz < nyquist)) {
      throw InvalidSpecError("bandpass: need 0 < low_hz < high_hz < Nyquist (" +
                             std::to_string(nyquist) + " Hz)");
    }
    if (spec.order < 2 || spec.order % 2 != 0) {
      throw InvalidSpecError("bandpass: order must be a positive even integer");
    }
    const int per_edge = spec.order / 2;
    append_butterworth(sos, per_edge, spec.low_hz, fs, /*highpass=*/true);
    append_butterworth(sos, per_edge, spec.high_hz, fs, /*highpass=*/false);
  } else {
    if (!(spec.center_hz > 0.0) || !(spec.center_hz < nyquist)) {
      throw InvalidSpecError("notch: center must lie in (0, Nyquist)");
    }
    if (!(spec.q_factor > 0.0)) throw InvalidSpecError("notch: q_factor must be positive");
    const double w0 = 2.0 * kPi * spec.center_hz / fs;
    const double cw = std::cos(w0);
    const double alpha = std::sin(w0) / (2.0 * spec.q_factor);
    const double a0 = 1.0 + alpha;
    Biquad q;
    q.b0 = 1.0 / a0;
    q.b1 = -2.0 * cw / a0;
    q.b2 = 1.0 / a0;
    q.a1 = -2.0 * cw / a0;
    q.a2 = (1.0 - alpha) / a0;
    sos.push_back(q);
  }
  return sos;
}

std::vector<double> apply_sos(std::span<const double> x, std::span<const Biquad> sections) {
  std::vector<double> y(x.begin(), x.end());
  for (const auto& q : sections) {
    double z1 = 0.0;
    double z2 = 0.0;
    for (double& v : y) {
      const double in = v;
      const double out = q.b0 * in + z1;
      z1 = q.b1 * in - q.a1 * out + z2;
      z2 = q.b2 * in - q.a2 * out;
      v = out;
    }
  }
  return y;
}

RawSignal apply_filter(const RawSignal& signal, const FilterSpec& spec) {
  const auto sos = design_sos(spec, signal.sample_rate_hz);
  RawSignal out = signal;
  out.samples = apply_sos(signal.samples, sos);
  return out;
}

LmsResult lms_denoise(const RawSignal& signal, const ReferenceSignal& reference, LmsState state) {
  if (signal.samples.size() != reference.samples.size()) {
    throw ShapeError("lms_denoise: signal has " + std::to_string(signal.samples.size()) +
                     " samples, reference has " + std::to_string(reference.samples.size()));
  }
  if (!(state.learning_rate > 0.0) || state.learning_rate > 1.0) {
    throw InvalidSpecError("lms_denoise: learning rate must lie in (0, 1]");
  }
  if (!std::isfinite(state.coefficient)) throw NumericError("lms_denoise: non-finite coefficient");

  LmsResult result{signal, state};
  auto& e = result.denoised.samples;
  const auto& y = signal.samples;
  const auto& r = reference.samples;
  double a = state.coefficient;
  const double mu = state.learning_rate;
  for (std::size_t t = 0; t < y.size(); ++t) {
    e[t] = y[t] - a * r[t];
    a = a + mu * e[t] * r[t];
    if (!(std::abs(a) <= kLmsDivergenceLimit)) {
      throw DivergenceError("lms_denoise: coefficient diverged", t);
    }
  }
  result.state.coefficient = a;
  return result;
}

std::optional<double> snr_db(const RawSignal& clean, const RawSignal& signal, std::size_t skip) {
  if (clean.samples.size() != signal.samples.size()) {
    throw ShapeError("snr_db: clean and signal lengths differ");
  }
  if (skip >= clean.samples.size()) throw ShapeError("snr_db: skip consumes the whole signal");
  double p_clean = 0.0;
  double p_resid = 0.0;
  for (std::size_t i = skip; i < clean.samples.size(); ++i) {
    const double c = clean.samples[i];
    const double d = signal.samples[i] - c;
    p_clean += c * c;
    p_resid += d * d;
  }
  if (p_clean == 0.0) throw DegenerateInputError("snr_db: clean signal has zero power");
  if (p_resid == 0.0) return std::nullopt;
  return 10.0 * std::log10(p_clean / p_resid);
}

ChainResult denoise_chain(const RawSignal& raw, const ReferenceSignal& reference,
                          const ChainConfig& config) {
  if (raw.samples.size() != reference.samples.size()) {
    throw ShapeError("denoise_chain: signal/reference length mismatch");
  }
  require_finite(raw.samples, "denoise_chain signal");
  require_finite(reference.samples, "denoise_chain reference");

  auto sos = design_sos(config.bandpass, raw.sample_rate_hz);
  if (config.notch) {
    const auto notch = design_sos(*config.notch, raw.sample_rate_hz);
    sos.insert(sos.end(), notch.begin(), notch.end());
  }

  RawSignal filtered = raw;
  filtered.samples = apply_sos(raw.samples, sos);
  ReferenceSignal ref{apply_sos(reference.samples, sos), reference.sample_rate_hz};

  double scale = 1.0;
  if (config.normalize_reference && !ref.samples.empty()) {
    double power = 0.0;
    for (double v : ref.samples) power += v * v;
    power /= static_cast<double>(ref.samples.size());
    if (power > 0.0) {
      scale = 1.0 / std::sqrt(power);
      for (double& v : ref.samples) v *= scale;
    }
  }

  auto lms = lms_denoise(filtered, ref, LmsState{0.0, config.lms_learning_rate});
  return ChainResult{std::move(lms.denoised), lms.state, scale};
}

}  // namespace neurotwin::signal
