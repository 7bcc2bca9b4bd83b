#include "neurotwin/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>

#include "neurotwin/csv.hpp"
#include "neurotwin/error.hpp"
#include "neurotwin/packet.hpp"

namespace neurotwin::features {

namespace {

// fftw planner calls are not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

double variance(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double acc = 0.0;
  for (double v : x) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(x.size());
}

std::vector<double> scaled_diff(std::span<const double> x, double fs) {
  std::vector<double> d(x.size() - 1);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) d[i] = (x[i + 1] - x[i]) * fs;
  return d;
}

}  // namespace

std::array<double, kFeatureCount> FeatureVector::to_array() const {
  return {delta_pw,        theta_pw,        alpha_pw,          beta_pw, gamma_pw,         zcr,
          hjorth_activity, hjorth_mobility, hjorth_complexity, rms,     spectral_entropy};
}

FeatureVector FeatureVector::from_array(std::span<const double> v) {
  if (v.size() != kFeatureCount) {
    throw ShapeError("FeatureVector: expected 11 values, got " + std::to_string(v.size()));
  }
  return FeatureVector{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]};
}

std::vector<Window> segment(const signal::RawSignal& signal, const WindowSpec& spec) {
  if (!(spec.length_s >= 2.0 && spec.length_s <= 5.0)) {
    throw InvalidSpecError("segment: window length must lie in [2, 5] s");
  }
  if (!(spec.overlap_fraction >= 0.0 && spec.overlap_fraction < 1.0)) {
    throw InvalidSpecError("segment: overlap must lie in [0, 1)");
  }
  const auto width = static_cast<std::size_t>(std::llround(spec.length_s * signal.sample_rate_hz));
  if (width < 2) throw InvalidSpecError("segment: window holds fewer than 2 samples");
  const auto hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(width) * (1.0 - spec.overlap_fraction))));

  std::vector<Window> out;
  const auto& x = signal.samples;
  for (std::size_t start = 0, k = 0; start + width <= x.size(); start += hop, ++k) {
    Window w;
    w.samples.assign(x.begin() + static_cast<std::ptrdiff_t>(start),
                     x.begin() + static_cast<std::ptrdiff_t>(start + width));
    w.sample_rate_hz = signal.sample_rate_hz;
    w.index = k;
    w.start_s = static_cast<double>(start) / signal.sample_rate_hz;
    out.push_back(std::move(w));
  }
  return out;
}

double Periodogram::total() const {
  double acc = 0.0;
  for (double p : power) acc += p;
  return acc;
}

Periodogram periodogram(std::span<const double> samples, double fs) {
  const std::size_t n = samples.size();
  if (n < 2) throw ShapeError("periodogram: need at least 2 samples");
  const std::size_t bins = n / 2 + 1;

  std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  std::unique_ptr<fftw_complex, FftwFree> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
  }

  // Periodic Hann, which sums exactly to n/2 and keeps the scaling simple.
  double window_energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                          static_cast<double>(n));
    in.get()[i] = samples[i] * w;
    window_energy += w * w;
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }

  Periodogram pg;
  pg.bin_hz = fs / static_cast<double>(n);
  pg.power.resize(bins);
  const double norm = 1.0 / (static_cast<double>(n) * window_energy);
  for (std::size_t k = 0; k < bins; ++k) {
    const double re = out.get()[k][0];
    const double im = out.get()[k][1];
    double p = (re * re + im * im) * norm;
    const bool unpaired = (k == 0) || (n % 2 == 0 && k == n / 2);
    if (!unpaired) p *= 2.0;
    pg.power[k] = p;
  }
  return pg;
}

double band_power(const Periodogram& pg, double fs, Band band) {
  const double nyquist = fs / 2.0;
  if (!(band.low_hz > 0.0) || !(band.low_hz < band.high_hz) || band.high_hz > nyquist) {
    throw InvalidSpecError("band_power: band [" + std::to_string(band.low_hz) + ", " +
                           std::to_string(band.high_hz) + ") outside (0, Nyquist]");
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < pg.power.size(); ++k) {
    const double f = static_cast<double>(k) * pg.bin_hz;
    if (f >= band.low_hz && f < band.high_hz) acc += pg.power[k];
  }
  return acc;
}

double band_power(const Window& window, Band band) {
  return band_power(periodogram(window.samples, window.sample_rate_hz), window.sample_rate_hz, band);
}

double zcr(const Window& window) {
  if (window.samples.empty()) throw ShapeError("zcr: empty window");
  int prev_sign = 0;
  std::size_t changes = 0;
  for (double v : window.samples) {
    const int s = v > 0.0 ? 1 : (v < 0.0 ? -1 : prev_sign);
    if (prev_sign != 0 && s != prev_sign) ++changes;
    prev_sign = s;
  }
  return static_cast<double>(changes) / window.duration_s();
}

Hjorth hjorth(const Window& window) {
  const auto& x = window.samples;
  if (x.size() < 3) throw ShapeError("hjorth: window needs at least 3 samples");
  const double var_x = variance(x);
  if (!(var_x > 0.0)) throw DegenerateInputError("hjorth: zero-variance window");
  const auto dx = scaled_diff(x, window.sample_rate_hz);
  const double var_dx = variance(dx);
  if (!(var_dx > 0.0)) throw DegenerateInputError("hjorth: zero-variance first difference");
  const auto ddx = scaled_diff(dx, window.sample_rate_hz);
  const double var_ddx = variance(ddx);

  const double mobility = std::sqrt(var_dx / var_x);
  const double mobility_dx = std::sqrt(var_ddx / var_dx);
  return Hjorth{var_x, mobility, mobility_dx / mobility};
}

double rms(const Window& window) {
  if (window.samples.empty()) throw ShapeError("rms: empty window");
  double acc = 0.0;
  for (double v : window.samples) acc += v * v;
  return std::sqrt(acc / static_cast<double>(window.samples.size()));
}

double spectral_entropy(const Periodogram& pg) {
  const std::size_t k_bins = pg.power.size() - 1;  // positive frequencies only
  if (k_bins < 2) throw ShapeError("spectral_entropy: too few frequency bins");
  double total = 0.0;
  for (std::size_t k = 1; k < pg.power.size(); ++k) total += pg.power[k];
  if (!(total > 0.0)) throw DegenerateInputError("spectral_entropy: zero-power window");
  double h = 0.0;
  for (std::size_t k = 1; k < pg.power.size(); ++k) {
    const double q = pg.power[k] / total;
    if (q > 0.0) h -= q * std::log(q);
  }
  return std::clamp(h / std::log(static_cast<double>(k_bins)), 0.0, 1.0);
}

double spectral_entropy(const Window& window) {
  return spectral_entropy(periodogram(window.samples, window.sample_rate_hz));
}

FeatureVector assemble(const Window& window) {
  try {
    const auto pg = periodogram(window.samples, window.sample_rate_hz);
    const double fs = window.sample_rate_hz;
    const Band gamma{kGamma.low_hz, std::min(kGamma.high_hz, fs / 2.0)};
    const auto hj = hjorth(window);

    FeatureVector f;
    f.delta_pw = band_power(pg, fs, kDelta);
    f.theta_pw = band_power(pg, fs, kTheta);
    f.alpha_pw = band_power(pg, fs, kAlpha);
    f.beta_pw = band_power(pg, fs, kBeta);
    f.gamma_pw = band_power(pg, fs, gamma);
    f.zcr = zcr(window);
    f.hjorth_activity = hj.activity;
    f.hjorth_mobility = hj.mobility;
    f.hjorth_complexity = hj.complexity;
    f.rms = rms(window);
    f.spectral_entropy = spectral_entropy(pg);
    for (double v : f.to_array()) {
      if (!std::isfinite(v)) throw NumericError("non-finite feature");
    }
    return f;
  } catch (const DegenerateInputError& e) {
    throw DegenerateInputError("window " + std::to_string(window.index) + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("window " + std::to_string(window.index) + ": " + e.what());
  }
}

std::vector<FeatureVector> extract_all(const std::vector<Window>& windows) {
  std::vector<FeatureVector> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(assemble(w));
  return out;
}

std::string features_to_csv(const std::vector<Window>& windows, const std::vector<FeatureVector>& fvs) {
  if (windows.size() != fvs.size()) throw ShapeError("features_to_csv: windows and features differ in length");
  std::string out = "window_index,start_s";
  for (auto n : kFeatureNames) {
    out += ',';
    out += n;
  }
  out += '\n';
  for (std::size_t i = 0; i < fvs.size(); ++i) {
    out += std::to_string(windows[i].index) + "," + fog::format_double(windows[i].start_s);
    for (double v : fvs[i].to_array()) out += "," + fog::format_double(v);
    out += '\n';
  }
  return out;
}

std::vector<FeatureVector> features_from_csv(std::string_view text) {
  const auto table = io::parse_csv(text);
  std::array<std::size_t, kFeatureCount> cols{};
  for (std::size_t k = 0; k < kFeatureCount; ++k) cols[k] = table.column(kFeatureNames[k]);
  std::vector<FeatureVector> out;
  for (const auto& row : table.rows) {
    std::array<double, kFeatureCount> v{};
    for (std::size_t k = 0; k < kFeatureCount; ++k) v[k] = io::parse_double(row[cols[k]]);
    out.push_back(FeatureVector::from_array(v));
  }
  return out;
}

}  // namespace neurotwin::features
