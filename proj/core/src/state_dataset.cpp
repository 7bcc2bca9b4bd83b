#include <cmath>
#include <random>
#include <sstream>

#include "neurotwin/brainstate.hpp"
#include "neurotwin/csv.hpp"
#include "neurotwin/error.hpp"
#include "neurotwin/packet.hpp"

namespace neurotwin::brainstate {

signal::SynthesisSpec regime_spec(BrainState state, double duration_s, double fs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gain(0.8, 1.2);
  std::uniform_real_distribution<double> shift(-0.5, 0.5);
  auto rhythm = [&](double f, double a) { return signal::RhythmComponent{f + shift(rng), a * gain(rng)}; };

  signal::SynthesisSpec spec;
  spec.duration_s = duration_s;
  spec.sample_rate_hz = fs;
  spec.noise_std = 2.0;
  spec.eog_amplitude = 30.0 * gain(rng);
  spec.eog_rate_hz = 0.3;
  spec.powerline_amplitude = 8.0;
  switch (state) {
    case BrainState::healthy:
      spec.rhythms = {rhythm(10.0, 25.0), rhythm(6.0, 6.0), rhythm(20.0, 4.0), rhythm(38.0, 1.5)};
      break;
    case BrainState::interictal:
      spec.rhythms = {rhythm(2.5, 10.0), rhythm(6.0, 22.0), rhythm(10.0, 9.0), rhythm(20.0, 4.0)};
      spec.spike_rate_hz = 0.8;
      spec.spike_amplitude = 60.0 * gain(rng);
      break;
    case BrainState::seizure:
      spec.rhythms = {rhythm(5.0, 5.0), rhythm(10.0, 6.0), rhythm(22.0, 25.0), rhythm(36.0, 18.0)};
      spec.noise_std = 4.0;
      break;
  }
  spec.rng_seed = rng();
  return spec;
}

std::vector<features::FeatureVector> regime_features(BrainState state, int windows,
                                                     const DatasetSpec& spec, std::uint64_t seed) {
  if (windows < 1) throw InvalidSpecError("regime_features: need at least one window");
  const double hop = spec.window.length_s * (1.0 - spec.window.overlap_fraction);
  const double duration = 1.0 + spec.window.length_s + hop * (windows - 1) + 0.5;
  const auto synth = signal::synthesize_eeg(regime_spec(state, duration, spec.sample_rate_hz, seed));
  auto denoised = signal::denoise_chain(synth.contaminated, synth.reference).denoised;
  const auto settle = static_cast<std::ptrdiff_t>(signal::settling_samples(spec.sample_rate_hz));
  denoised.samples.erase(denoised.samples.begin(), denoised.samples.begin() + settle);
  auto segs = features::segment(denoised, spec.window);
  if (static_cast<int>(segs.size()) < windows) throw ShapeError("regime_features: too few windows");
  segs.resize(static_cast<std::size_t>(windows));
  return features::extract_all(segs);
}

std::vector<SequenceSample> synth_state_dataset(std::uint64_t seed, int n_per_class, const DatasetSpec& spec) {
  if (n_per_class < 1) throw InvalidSpecError("synth_state_dataset: n_per_class must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<SequenceSample> out;
  for (int i = 0; i < n_per_class; ++i) {
    for (auto state : {BrainState::seizure, BrainState::interictal, BrainState::healthy}) {
      out.push_back(SequenceSample{regime_features(state, spec.windows_per_sample, spec, rng()), state});
    }
  }
  return out;
}

std::string dataset_to_csv(std::span<const SequenceSample> dataset) {
  std::string out = "sample_id,label,window_index";
  for (auto name : features::kFeatureNames) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    for (std::size_t w = 0; w < dataset[s].windows.size(); ++w) {
      out += std::to_string(s) + "," + std::string(to_string(dataset[s].label)) + "," + std::to_string(w);
      for (double v : dataset[s].windows[w].to_array()) out += "," + fog::format_double(v);
      out += '\n';
    }
  }
  return out;
}

std::vector<SequenceSample> dataset_from_csv(std::string_view text) {
  const auto table = io::parse_csv(text);
  const auto c_id = table.column("sample_id");
  const auto c_label = table.column("label");
  const auto c_win = table.column("window_index");
  std::vector<std::size_t> c_feat;
  for (auto name : features::kFeatureNames) c_feat.push_back(table.column(name));

  std::vector<SequenceSample> out;
  long long current = -1;
  for (const auto& row : table.rows) {
    const long long id = io::parse_int(row[c_id]);
    const auto label = parse_state(row[c_label]);
    const long long win = io::parse_int(row[c_win]);
    if (id != current) {
      out.push_back(SequenceSample{{}, label});
      current = id;
    } else if (out.back().label != label) {
      throw ParseError("dataset csv: sample " + std::to_string(id) + " changes label");
    }
    if (win != static_cast<long long>(out.back().windows.size())) {
      throw ParseError("dataset csv: window indices of sample " + std::to_string(id) + " not contiguous");
    }
    std::array<double, features::kFeatureCount> v{};
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = io::parse_double(row[c_feat[k]]);
    out.back().windows.push_back(features::FeatureVector::from_array(v));
  }
  return out;
}

}  // namespace neurotwin::brainstate
