#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "neurotwin/error.hpp"
#include "neurotwin/twin.hpp"

using namespace neurotwin;
using namespace neurotwin::twin;
using brainstate::BrainState;
using brainstate::StatePrediction;

namespace {

StatePrediction state(double seizure, double interictal, double healthy) {
  StatePrediction p;
  p.probs = {seizure, interictal, healthy};
  p.argmax_label = seizure >= interictal && seizure >= healthy ? BrainState::seizure
                   : interictal >= healthy                     ? BrainState::interictal
                                                               : BrainState::healthy;
  return p;
}

TumorFinding tumor(double conf) { return {true, conf, 5.0, "inferior-left"}; }

fog::StoredRecord record(const std::string& dev, std::uint64_t seq, std::int64_t ts, double base = 1.0) {
  std::array<double, features::kFeatureCount> a{};
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = base + static_cast<double>(i);
  auto p = fog::make_packet(dev, ts, seq, features::FeatureVector::from_array(a));
  p.hmac_hex = std::string(64, 'a');
  return {p, 0.9, ts + 25};
}

Scenario quick(std::vector<BrainState> regimes) {
  Scenario sc;
  sc.regimes = std::move(regimes);
  sc.device_count = static_cast<int>(sc.regimes.size());
  sc.duration_s = 12;
  sc.state_epochs = 150;
  sc.vit_steps = 60;
  return sc;
}

}  // namespace

TEST(Fusion, WorkedExample) {
  const double r = fuse_risk(state(0.1, 0.7, 0.2), tumor(0.92));
  EXPECT_NEAR(r, 0.6 * 0.92 + 0.4 * (0.1 * 1 + 0.7 * 0.6), 1e-12);
  EXPECT_NEAR(r, 0.76, 1e-12);
  EXPECT_EQ(risk_band(r), RiskBand::high);
}

TEST(Fusion, Extremes) {
  EXPECT_EQ(fuse_risk(state(0, 0, 1), TumorFinding{}), 0.0);
  EXPECT_NEAR(fuse_risk(state(1, 0, 0), tumor(1.0)), 1.0, 1e-15);
  // An absent tumor contributes nothing even with a confidence recorded.
  EXPECT_EQ(fuse_risk(state(0, 0, 1), TumorFinding{false, 0.9, std::nullopt, ""}), 0.0);
  EXPECT_NEAR(fuse_risk(std::nullopt, tumor(0.5)), 0.3, 1e-15);
  EXPECT_EQ(risk_band(0.3999), RiskBand::low);
  EXPECT_EQ(risk_band(0.4), RiskBand::moderate);
  EXPECT_EQ(risk_band(0.7), RiskBand::high);
}

TEST(Fusion, BoundedAndMonotone) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 500; ++t) {
    double a = u(rng), b = u(rng), c = u(rng);
    const double s = a + b + c;
    a /= s, b /= s, c /= s;
    const double conf = u(rng);
    const double r = fuse_risk(state(a, b, c), tumor(conf));
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
    EXPECT_GE(fuse_risk(state(a, b, c), tumor(std::min(1.0, conf + 0.1))), r);
    // Move mass from healthy to seizure.
    const double d = c * 0.5;
    EXPECT_GE(fuse_risk(state(a + d, b, c - d), tumor(conf)), r);
  }
}

TEST(Fusion, ConfigValidation) {
  FusionConfig bad;
  bad.w_mri = 0.7;
  EXPECT_THROW(bad.validate(), InvalidSpecError);
  FusionConfig neg;
  neg.w_mri = 1.2;
  neg.w_eeg = -0.2;
  EXPECT_THROW(neg.validate(), InvalidSpecError);
}

TEST(Ingest, MonotoneLastUpdateAndOutOfOrder) {
  TwinState tw;
  tw.device_id = "dev-01";
  ingest(tw, record("dev-01", 0, 1000));
  ingest(tw, record("dev-01", 1, 3000));
  EXPECT_EQ(tw.last_update_ms, 3000);
  ingest(tw, record("dev-01", 2, 2000, 7.0));
  EXPECT_EQ(tw.last_update_ms, 3000);
  EXPECT_EQ(tw.out_of_order, 1u);
  EXPECT_EQ(tw.ingested, 3u);
  EXPECT_EQ(tw.recent_windows.size(), 3u);
  EXPECT_EQ(tw.latest_features->delta_pw, 7.0);
}

TEST(Ingest, BoundedHistory) {
  TwinState tw;
  for (std::uint64_t s = 0; s < 100; ++s) {
    ingest(tw, record("d", s, 1000 * static_cast<std::int64_t>(s)), 8);
    assess(tw, state(0.2, 0.3, 0.5), tumor(0.4));
  }
  EXPECT_EQ(tw.recent_windows.size(), 8u);
  EXPECT_LE(tw.risk_history.size(), 100u);
  for (std::size_t i = 1; i < tw.risk_history.size(); ++i) {
    EXPECT_GT(tw.risk_history[i].t_ms, tw.risk_history[i - 1].t_ms);
  }
}

TEST(Assess, SameTimestampReplaces) {
  TwinState tw;
  ingest(tw, record("d", 0, 500));
  assess(tw, state(0, 0, 1), tumor(0.2));
  assess(tw, state(1, 0, 0), tumor(0.2));
  ASSERT_EQ(tw.risk_history.size(), 1u);
  EXPECT_NEAR(tw.risk_history[0].risk, 0.6 * 0.2 + 0.4, 1e-12);
  EXPECT_EQ(tw.fused_risk, tw.risk_history[0].risk);
}

TEST(Snapshot, RoundTripBitExact) {
  TwinState tw;
  tw.device_id = "dev-07";
  for (std::uint64_t s = 0; s < 5; ++s) ingest(tw, record("dev-07", s, 1700000000000 + 1000 * s, 0.1 + s / 3.0));
  assess(tw, state(0.123456789012345, 0.3, 1 - 0.123456789012345 - 0.3), TumorFinding{true, 0.987654321, 3.14159, "superior-right"});
  tw.forecast = kinetics::Forecast{20000.5, 101.25, 90.0 + 1e-13, 112.5, 0.95};
  TwinState empty;
  empty.device_id = "dev-08";
  const auto text = snapshot({tw, empty});
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  const auto back = parse_snapshot(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], tw);
  EXPECT_EQ(back[1], empty);
  EXPECT_EQ(snapshot(back), text);
  EXPECT_THROW(parse_snapshot_line("{\"version\":99}"), ParseError);
  EXPECT_THROW(parse_snapshot_line("nope"), ParseError);
}

TEST(Finding, FromPatches) {
  // 4x4 grid; two hot patches in the lower-right quadrant.
  std::vector<double> p(16, 0.1);
  p[10] = 0.9;
  p[15] = 0.8;
  const auto stats = vit::threshold_from_stats(0.2, 0.1);
  const auto f = finding_from_patches(p, 4, 4, stats, 64.0);
  EXPECT_TRUE(f.present);
  EXPECT_DOUBLE_EQ(f.confidence, 0.9);
  ASSERT_TRUE(f.volume_cc.has_value());
  EXPECT_DOUBLE_EQ(*f.volume_cc, 2.0 / 16 * 64.0);
  EXPECT_EQ(f.region_label, "inferior-right");

  const auto none = finding_from_patches(std::vector<double>(16, 0.1), 4, 4, stats, 64.0);
  EXPECT_FALSE(none.present);
  EXPECT_FALSE(none.volume_cc.has_value());
  EXPECT_THROW(finding_from_patches(p, 3, 4, stats, 64.0), ShapeError);
}

TEST(Pipeline, HealthyScenarioForwardsNothing) {
  const auto r = run_pipeline(quick({BrainState::healthy, BrainState::healthy}));
  EXPECT_GT(r.produced, 0u);
  EXPECT_EQ(r.counters.forwarded, 0u);
  EXPECT_EQ(r.counters.parked, r.produced);
  EXPECT_TRUE(r.conserved());
}

TEST(Pipeline, SeizureScenarioForwardsAndRaisesRisk) {
  const auto r = run_pipeline(quick({BrainState::seizure}));
  EXPECT_GE(r.counters.forwarded, 1u);
  ASSERT_EQ(r.twins.size(), 1u);
  EXPECT_NE(risk_band(r.twins[0].fused_risk), RiskBand::low);
  ASSERT_TRUE(r.twins[0].latest_state.has_value());
  EXPECT_EQ(r.twins[0].latest_state->argmax_label, BrainState::seizure);
  EXPECT_TRUE(r.conserved());
}

TEST(Pipeline, DeterministicPerSeed) {
  auto sc = quick({BrainState::seizure, BrainState::interictal, BrainState::healthy});
  sc.tamper_rate = 0.2;
  const auto a = run_pipeline(sc);
  const auto b = run_pipeline(sc);
  EXPECT_EQ(a.report, b.report);
  EXPECT_EQ(a.artifacts, b.artifacts);
  EXPECT_EQ(a.twins, b.twins);
  EXPECT_TRUE(a.conserved());
  EXPECT_GT(a.counters.rejected, 0u);
  sc.seed = 43;
  EXPECT_NE(run_pipeline(sc).report, a.report);
}

TEST(Pipeline, ConservationAcrossSeeds) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto sc = quick({BrainState::seizure, BrainState::healthy});
    sc.seed = seed;
    sc.tamper_rate = 0.1 * static_cast<double>(seed);
    const auto r = run_pipeline(sc);
    EXPECT_TRUE(r.conserved()) << seed;
    for (const auto& tw : r.twins) {
      EXPECT_GE(tw.fused_risk, 0.0);
      EXPECT_LE(tw.fused_risk, 1.0);
    }
  }
}

TEST(Pipeline, StageErrorsAreTagged) {
  auto bad = quick({BrainState::healthy});
  bad.duration_s = -1;
  try {
    run_pipeline(bad);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "config");
  }
  const auto path = std::filesystem::temp_directory_path() / "nt_bad_risk_model.txt";
  std::ofstream(path) << "garbage\n";
  auto sc = quick({BrainState::healthy});
  sc.risk_model_path = path;
  try {
    run_pipeline(sc);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "models");
    EXPECT_NE(std::string(e.what()).find("stage models"), std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST(Pipeline, WritesArtifacts) {
  const auto r = run_pipeline(quick({BrainState::seizure}));
  const auto dir = std::filesystem::temp_directory_path() / "nt_pipeline_artifacts";
  std::filesystem::remove_all(dir);
  write_artifacts(r, dir);
  for (const auto& [name, body] : r.artifacts) {
    ASSERT_TRUE(std::filesystem::exists(dir / name)) << name;
    EXPECT_EQ(std::filesystem::file_size(dir / name), body.size());
  }
  EXPECT_TRUE(r.artifacts.count("report.txt"));
  EXPECT_TRUE(r.artifacts.count("twins.ndjson"));
  std::filesystem::remove_all(dir);
}
