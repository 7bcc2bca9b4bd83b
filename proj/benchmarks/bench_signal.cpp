#include <benchmark/benchmark.h>

#include "neurotwin/features.hpp"
#include "neurotwin/kinetics.hpp"
#include "neurotwin/signal_chain.hpp"

using namespace neurotwin;

namespace {

signal::SynthesizedEeg recording(double seconds) {
  signal::SynthesisSpec spec;
  spec.duration_s = seconds;
  spec.rng_seed = 11;
  return signal::synthesize_eeg(spec);
}

void BM_DenoiseChain(benchmark::State& state) {
  const auto s = recording(static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(signal::denoise_chain(s.contaminated, s.reference));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.contaminated.size()));
}
BENCHMARK(BM_DenoiseChain)->Arg(10)->Arg(60);

void BM_FeatureExtraction(benchmark::State& state) {
  const auto s = recording(60);
  const auto windows = features::segment(s.contaminated, features::WindowSpec{});
  for (auto _ : state) benchmark::DoNotOptimize(features::extract_all(windows));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(windows.size()));
}
BENCHMARK(BM_FeatureExtraction);

void BM_KineticsFit(benchmark::State& state) {
  kinetics::GrowthSpec spec;
  spec.observations = static_cast<int>(state.range(0));
  const auto series = kinetics::synth_growth_series(3, spec);
  for (auto _ : state) benchmark::DoNotOptimize(kinetics::fit(series));
}
BENCHMARK(BM_KineticsFit)->Arg(20)->Arg(151)->Arg(2000);

}  // namespace
