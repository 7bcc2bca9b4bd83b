#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "neurotwin/error.hpp"
#include "neurotwin/twin.hpp"

namespace neurotwin::twin {

using json = nlohmann::ordered_json;

std::string_view to_string(RiskBand b) {
  switch (b) {
    case RiskBand::low: return "low";
    case RiskBand::moderate: return "moderate";
    case RiskBand::high: return "high";
  }
  return "?";
}

void FusionConfig::validate() const {
  if (!(w_mri >= 0.0 && w_eeg >= 0.0) || std::abs(w_mri + w_eeg - 1.0) > 1e-12) {
    throw InvalidSpecError("fusion: weights must be nonnegative and sum to 1");
  }
  for (double r : state_risk) {
    if (!(r >= 0.0 && r <= 1.0)) throw InvalidSpecError("fusion: state risks must lie in [0, 1]");
  }
  if (!(moderate_cutoff <= high_cutoff)) throw InvalidSpecError("fusion: moderate cutoff above high cutoff");
}

double fuse_risk(const std::optional<brainstate::StatePrediction>& state, const TumorFinding& finding,
                 const FusionConfig& config) {
  config.validate();
  const double mri = finding.present ? std::clamp(finding.confidence, 0.0, 1.0) : 0.0;
  double eeg = 0.0;
  if (state) {
    for (int s = 0; s < brainstate::kStateCount; ++s) {
      eeg += state->probs[static_cast<std::size_t>(s)] * config.state_risk[static_cast<std::size_t>(s)];
    }
  }
  return std::clamp(config.w_mri * mri + config.w_eeg * eeg, 0.0, 1.0);
}

RiskBand risk_band(double fused, const FusionConfig& config) {
  if (fused >= config.high_cutoff) return RiskBand::high;
  if (fused >= config.moderate_cutoff) return RiskBand::moderate;
  return RiskBand::low;
}

void ingest(TwinState& twin, const fog::StoredRecord& record, std::size_t window_history) {
  const auto& p = record.packet;
  if (twin.device_id.empty()) twin.device_id = p.device_id;
  if (p.device_id != twin.device_id) {
    throw InvalidSpecError("ingest: record for '" + p.device_id + "' routed to twin '" + twin.device_id + "'");
  }
  if (p.features.size() != features::kFeatureCount) throw ShapeError("ingest: feature vector must have 11 entries");
  if (twin.ingested > 0 && p.timestamp_utc_ms < twin.last_update_ms) {
    ++twin.out_of_order;
  } else {
    twin.last_update_ms = p.timestamp_utc_ms;
  }
  const auto fv = features::FeatureVector::from_array(p.features);
  twin.latest_features = fv;
  twin.recent_windows.push_back(fv);
  if (window_history > 0 && twin.recent_windows.size() > window_history) {
    twin.recent_windows.erase(twin.recent_windows.begin(),
                              twin.recent_windows.end() - static_cast<std::ptrdiff_t>(window_history));
  }
  ++twin.ingested;
}

void assess(TwinState& twin, const std::optional<brainstate::StatePrediction>& state,
            const TumorFinding& finding, const FusionConfig& config) {
  twin.latest_state = state;
  twin.finding = finding;
  twin.fused_risk = fuse_risk(state, finding, config);
  if (!twin.risk_history.empty() && twin.risk_history.back().t_ms >= twin.last_update_ms) {
    twin.risk_history.back() = {twin.risk_history.back().t_ms, twin.fused_risk};
  } else {
    twin.risk_history.push_back({twin.last_update_ms, twin.fused_risk});
  }
}

TumorFinding finding_from_patches(std::span<const double> probs, int grid_rows, int grid_cols,
                                  const vit::ThresholdStats& stats, double reference_volume_cc) {
  if (grid_rows <= 0 || grid_cols <= 0 || probs.size() != static_cast<std::size_t>(grid_rows * grid_cols)) {
    throw ShapeError("finding: probabilities do not match the patch grid");
  }
  if (!(reference_volume_cc > 0.0)) throw InvalidSpecError("finding: reference volume must be positive");
  const auto flags = vit::classify_patches(probs, stats.theta);
  TumorFinding f;
  double rsum = 0.0;
  double csum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (!flags[i]) continue;
    ++hits;
    rsum += static_cast<double>(i / static_cast<std::size_t>(grid_cols));
    csum += static_cast<double>(i % static_cast<std::size_t>(grid_cols));
  }
  if (hits == 0) return f;
  f.present = true;
  f.confidence = *std::max_element(probs.begin(), probs.end());
  f.volume_cc = reference_volume_cc * static_cast<double>(hits) / static_cast<double>(probs.size());
  const double rc = rsum / static_cast<double>(hits);
  const double cc = csum / static_cast<double>(hits);
  f.region_label = std::string(rc < (grid_rows - 1) / 2.0 ? "superior" : "inferior") + "-" +
                   (cc < (grid_cols - 1) / 2.0 ? "left" : "right");
  return f;
}

namespace {

json features_json(const features::FeatureVector& fv) {
  json a = json::array();
  for (double v : fv.to_array()) a.push_back(v);
  return a;
}

features::FeatureVector features_from(const json& j) {
  if (!j.is_array() || j.size() != features::kFeatureCount) throw ParseError("snapshot: bad feature array");
  std::array<double, features::kFeatureCount> v{};
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return features::FeatureVector::from_array(v);
}

}  // namespace

std::string snapshot_line(const TwinState& t) {
  json j;
  j["version"] = kSnapshotVersion;
  j["device_id"] = t.device_id;
  j["last_update_ms"] = t.last_update_ms;
  j["latest_features"] = t.latest_features ? features_json(*t.latest_features) : json(nullptr);
  json windows = json::array();
  for (const auto& w : t.recent_windows) windows.push_back(features_json(w));
  j["recent_windows"] = windows;
  if (t.latest_state) {
    j["latest_state"] = {{"probs", t.latest_state->probs},
                         {"label", std::string(brainstate::to_string(t.latest_state->argmax_label))}};
  } else {
    j["latest_state"] = nullptr;
  }
  j["finding"] = {{"present", t.finding.present},
                  {"confidence", t.finding.confidence},
                  {"volume_cc", t.finding.volume_cc ? json(*t.finding.volume_cc) : json(nullptr)},
                  {"region_label", t.finding.region_label}};
  if (t.forecast) {
    j["forecast"] = {{"t_future", t.forecast->t_future},
                     {"point_cc", t.forecast->point_cc},
                     {"interval_low_cc", t.forecast->interval_low_cc},
                     {"interval_high_cc", t.forecast->interval_high_cc},
                     {"confidence_level", t.forecast->confidence_level}};
  } else {
    j["forecast"] = nullptr;
  }
  j["fused_risk"] = t.fused_risk;
  json hist = json::array();
  for (const auto& p : t.risk_history) hist.push_back(json::array({p.t_ms, p.risk}));
  j["risk_history"] = hist;
  j["ingested"] = t.ingested;
  j["out_of_order"] = t.out_of_order;
  return j.dump() + "\n";
}

TwinState parse_snapshot_line(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  try {
    const auto j = json::parse(line);
    if (j.at("version").get<int>() != kSnapshotVersion) {
      throw ParseError("snapshot: unsupported version " + j.at("version").dump());
    }
    TwinState t;
    t.device_id = j.at("device_id").get<std::string>();
    t.last_update_ms = j.at("last_update_ms").get<std::int64_t>();
    if (!j.at("latest_features").is_null()) t.latest_features = features_from(j.at("latest_features"));
    for (const auto& w : j.at("recent_windows")) t.recent_windows.push_back(features_from(w));
    if (!j.at("latest_state").is_null()) {
      brainstate::StatePrediction sp;
      sp.probs = j.at("latest_state").at("probs").get<std::array<double, brainstate::kStateCount>>();
      sp.argmax_label = brainstate::parse_state(j.at("latest_state").at("label").get<std::string>());
      t.latest_state = sp;
    }
    const auto& f = j.at("finding");
    t.finding.present = f.at("present").get<bool>();
    t.finding.confidence = f.at("confidence").get<double>();
    if (!f.at("volume_cc").is_null()) t.finding.volume_cc = f.at("volume_cc").get<double>();
    t.finding.region_label = f.at("region_label").get<std::string>();
    if (!j.at("forecast").is_null()) {
      const auto& fc = j.at("forecast");
      t.forecast = kinetics::Forecast{fc.at("t_future").get<double>(), fc.at("point_cc").get<double>(),
                                      fc.at("interval_low_cc").get<double>(),
                                      fc.at("interval_high_cc").get<double>(),
                                      fc.at("confidence_level").get<double>()};
    }
    t.fused_risk = j.at("fused_risk").get<double>();
    for (const auto& p : j.at("risk_history")) {
      t.risk_history.push_back({p.at(0).get<std::int64_t>(), p.at(1).get<double>()});
    }
    t.ingested = j.at("ingested").get<std::uint64_t>();
    t.out_of_order = j.at("out_of_order").get<std::uint64_t>();
    return t;
  } catch (const json::exception& e) {
    throw ParseError(std::string("snapshot: ") + e.what());
  }
}

std::string snapshot(const std::vector<TwinState>& twins) {
  std::string out;
  for (const auto& t : twins) out += snapshot_line(t);
  return out;
}

std::vector<TwinState> parse_snapshot(std::string_view text) {
  std::vector<TwinState> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    if (!line.empty()) out.push_back(parse_snapshot_line(line));
    start = end + 1;
  }
  return out;
}

}  // namespace neurotwin::twin
