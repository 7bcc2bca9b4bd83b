#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "neurotwin/brainstate.hpp"
#include "neurotwin/cloud_store.hpp"
#include "neurotwin/features.hpp"
#include "neurotwin/fog_gate.hpp"
#include "neurotwin/kinetics.hpp"
#include "neurotwin/threshold.hpp"

namespace neurotwin::twin {

struct TumorFinding {
  bool present = false;
  double confidence = 0.0;
  std::optional<double> volume_cc;  // set only when present
  std::string region_label;

  bool operator==(const TumorFinding&) const = default;
};

enum class RiskBand { low, moderate, high };
std::string_view to_string(RiskBand b);

struct FusionConfig {
  double w_mri = 0.6;
  double w_eeg = 0.4;
  std::array<double, brainstate::kStateCount> state_risk{1.0, 0.6, 0.0};  // seizure, interictal, healthy
  double high_cutoff = 0.7;
  double moderate_cutoff = 0.4;

  /// Nonnegative weights summing to 1, state risks in [0, 1].
  void validate() const;
};

/// w_mri * (present ? confidence : 0) + w_eeg * sum_s p_s * state_risk[s].
/// Without a state prediction the EEG term contributes 0.
double fuse_risk(const std::optional<brainstate::StatePrediction>& state, const TumorFinding& finding,
                 const FusionConfig& config = {});
RiskBand risk_band(double fused, const FusionConfig& config = {});

struct RiskPoint {
  std::int64_t t_ms = 0;
  double risk = 0.0;

  bool operator==(const RiskPoint&) const = default;
};

struct TwinState {
  std::string device_id;
  std::int64_t last_update_ms = 0;
  std::optional<features::FeatureVector> latest_features;
  std::vector<features::FeatureVector> recent_windows;  // oldest first, bounded
  std::optional<brainstate::StatePrediction> latest_state;
  TumorFinding finding;
  std::optional<kinetics::Forecast> forecast;
  double fused_risk = 0.0;
  std::vector<RiskPoint> risk_history;  // strictly increasing t_ms
  std::uint64_t ingested = 0;
  std::uint64_t out_of_order = 0;

  bool operator==(const TwinState&) const = default;
};

inline constexpr std::size_t kDefaultWindowHistory = 32;

/// Applies one forwarded record. last_update_ms only moves forward; an older
/// timestamp is still accepted but counted in out_of_order.
void ingest(TwinState& twin, const fog::StoredRecord& record,
            std::size_t window_history = kDefaultWindowHistory);

/// Sets state, finding and fused risk, and records (last_update_ms, risk).
/// A point at the same timestamp as the previous one replaces it.
void assess(TwinState& twin, const std::optional<brainstate::StatePrediction>& state,
            const TumorFinding& finding, const FusionConfig& config = {});

/// present iff some patch exceeds theta; confidence = max p; volume is the
/// fraction of flagged patches times the reference volume.
TumorFinding finding_from_patches(std::span<const double> probs, int grid_rows, int grid_cols,
                                  const vit::ThresholdStats& stats, double reference_volume_cc);

inline constexpr int kSnapshotVersion = 1;

/// One JSON object per line, tagged with the snapshot version.
std::string snapshot_line(const TwinState& twin);
TwinState parse_snapshot_line(std::string_view line);
std::string snapshot(const std::vector<TwinState>& twins);
std::vector<TwinState> parse_snapshot(std::string_view text);

// ---- end-to-end run ----

struct Scenario {
  std::uint64_t seed = 42;
  int device_count = 2;
  /// Brain-state regime per device, cycled when shorter than device_count.
  std::vector<brainstate::BrainState> regimes{brainstate::BrainState::seizure,
                                              brainstate::BrainState::healthy};
  double duration_s = 20.0;
  double sample_rate_hz = 250.0;
  double contamination = 1.0;  // scales EOG and mains amplitudes
  double tamper_rate = 0.0;    // fraction of frames with a corrupted MAC
  std::int64_t start_utc_ms = 1704067200000;  // 2024-01-01T00:00:00Z
  std::int64_t network_latency_ms = 25;

  int scan_count = 1;
  bool tumor_present = true;
  double reference_volume_cc = 60.0;
  double forecast_horizon_days = 120.0;

  fog::GateConfig gate{};
  FusionConfig fusion{};

  // Model training budgets, used when no model file is supplied.
  int state_train_per_class = 6;
  int state_epochs = 300;
  int vit_train_images = 8;
  int vit_steps = 120;

  std::optional<std::filesystem::path> risk_model_path;
  std::optional<std::filesystem::path> state_model_path;
  std::optional<std::filesystem::path> vit_checkpoint_path;

  void validate() const;
};

struct RunResult {
  std::string report;
  /// Artifact file name -> contents.
  std::map<std::string, std::string> artifacts;
  std::vector<TwinState> twins;
  fog::NodeCounters counters;
  std::size_t produced = 0;
  std::size_t stored = 0;

  bool conserved() const {
    return produced == counters.forwarded + counters.parked + counters.rejected &&
           counters.input == produced && stored == counters.forwarded;
  }
};

/// synth -> denoise -> features -> sign -> gate -> ingest -> classify -> fuse
/// -> forecast. Deterministic per scenario. Stage failures surface as
/// StageError.
RunResult run_pipeline(const Scenario& scenario);

/// Writes every artifact under `dir` (created if needed).
void write_artifacts(const RunResult& result, const std::filesystem::path& dir);

}  // namespace neurotwin::twin
