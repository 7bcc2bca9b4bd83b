#include <benchmark/benchmark.h>

#include <random>

#include "neurotwin/brainstate.hpp"
#include "neurotwin/vit.hpp"

using namespace neurotwin;

namespace {

void BM_VitForward(benchmark::State& state) {
  const auto params = vit::ModelParams::random(vit::VitConfig{}, 1);
  const auto image = vit::make_multifocal_corpus(2, 1).front().image;
  const auto grid = vit::patchify(image, 16);
  for (auto _ : state) benchmark::DoNotOptimize(vit::forward(params, grid));
}
BENCHMARK(BM_VitForward);

void BM_VitTrainStep(benchmark::State& state) {
  auto params = vit::ModelParams::random(vit::VitConfig{}, 1);
  const auto batch = vit::make_multifocal_corpus(2, 8);
  int step = 0;
  for (auto _ : state) benchmark::DoNotOptimize(vit::train_step(params, batch, vit::LossConfig{}, 0.01, step++));
}
BENCHMARK(BM_VitTrainStep);

void BM_PatchAttribution(benchmark::State& state) {
  const auto params = vit::ModelParams::random(vit::VitConfig{}, 1);
  const auto grid = vit::patchify(vit::make_multifocal_corpus(2, 1).front().image, 16);
  for (auto _ : state) benchmark::DoNotOptimize(vit::patch_attribution(params, grid));
}
BENCHMARK(BM_PatchAttribution);

void BM_BiLstmForward(benchmark::State& state) {
  const auto params = brainstate::BiLstmParams::random(1);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 1);
  Eigen::MatrixXd x(state.range(0), 11);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(brainstate::forward(params, x));
}
BENCHMARK(BM_BiLstmForward)->Arg(10)->Arg(100);

}  // namespace
