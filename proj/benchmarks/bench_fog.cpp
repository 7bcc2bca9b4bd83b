#include <benchmark/benchmark.h>

#include "neurotwin/cloud_store.hpp"
#include "neurotwin/fog_gate.hpp"
#include "neurotwin/packet.hpp"

using namespace neurotwin;

namespace {

constexpr std::int64_t kNow = 1700000000000;

struct Fixture {
  fog::DeviceRegistry registry;
  std::vector<std::uint8_t> key = std::vector<std::uint8_t>(32, 0x11);
  fog::RiskModel model;

  Fixture() {
    registry.add("hs-01", key);
    model.weights(1, 0) = 1.0;
  }

  fog::Packet packet(std::uint64_t seq) const {
    std::array<double, features::kFeatureCount> a{};
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = 0.1 * static_cast<double>(i + seq % 7);
    auto p = fog::make_packet("hs-01", kNow, seq, features::FeatureVector::from_array(a));
    p.hmac_hex = fog::sign(p, key);
    return p;
  }
};

void BM_SignPacket(benchmark::State& state) {
  Fixture f;
  auto p = f.packet(0);
  for (auto _ : state) benchmark::DoNotOptimize(fog::sign(p, f.key));
}
BENCHMARK(BM_SignPacket);

void BM_GateDecision(benchmark::State& state) {
  Fixture f;
  const auto p = f.packet(1);
  for (auto _ : state) benchmark::DoNotOptimize(fog::gate(p, f.registry, f.model, kNow));
}
BENCHMARK(BM_GateDecision);

void BM_NodeProcessFrame(benchmark::State& state) {
  Fixture f;
  std::vector<std::string> frames;
  for (std::uint64_t s = 0; s < 4096; ++s) frames.push_back(fog::encode_frame(f.packet(s)));
  for (auto _ : state) {
    state.PauseTiming();
    fog::CloudStore store;
    fog::FogNode node(f.registry, f.model, {}, store);
    state.ResumeTiming();
    for (const auto& fr : frames) benchmark::DoNotOptimize(node.process_frame(fr, kNow));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames.size()));
}
BENCHMARK(BM_NodeProcessFrame);

}  // namespace
