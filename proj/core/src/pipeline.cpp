#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "neurotwin/csv.hpp"
#include "neurotwin/error.hpp"
#include "neurotwin/twin.hpp"
#include "neurotwin/vit.hpp"

namespace neurotwin::twin {

namespace {

using brainstate::BrainState;

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e.what());
  }
}

std::string f6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct DeviceRun {
  std::string device_id;
  BrainState regime;
  std::vector<std::uint8_t> key;
  std::optional<double> snr_before_db;
  std::optional<double> snr_after_db;
  std::vector<fog::Packet> packets;
};

/// Stream of independent sub-seeds, one per named consumer, so adding a
/// consumer never perturbs the others.
std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt)};
  std::mt19937_64 rng(seq);
  return rng();
}

fog::RiskModel train_risk_model(std::uint64_t seed, int per_class) {
  const auto data = brainstate::synth_state_dataset(seed, per_class);
  std::size_t rows = 0;
  for (const auto& s : data) rows += s.windows.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(features::kFeatureCount));
  std::vector<int> labels;
  Eigen::Index r = 0;
  for (const auto& s : data) {
    for (const auto& w : s.windows) {
      const auto a = w.to_array();
      for (std::size_t c = 0; c < a.size(); ++c) x(r, static_cast<Eigen::Index>(c)) = a[c];
      labels.push_back(s.label == BrainState::seizure ? 1 : 0);
      ++r;
    }
  }
  return brainstate::train_logistic(x, labels);
}

vit::VitConfig pipeline_vit_config() {
  vit::VitConfig c;
  c.image_size = 64;
  c.patch_size = 16;
  c.d_model = 16;
  c.heads = 2;
  c.layers = 1;
  c.ffn_hidden = 32;
  return c;
}

}  // namespace

void Scenario::validate() const {
  if (device_count < 1 || device_count > 99) throw InvalidSpecError("scenario: device_count must be in [1, 99]");
  if (regimes.empty()) throw InvalidSpecError("scenario: at least one regime required");
  if (!(duration_s >= 4.0)) throw InvalidSpecError("scenario: duration_s must be >= 4");
  if (!(sample_rate_hz >= 250.0 && sample_rate_hz <= 500.0)) {
    throw InvalidSpecError("scenario: sample_rate_hz must be in [250, 500]");
  }
  if (!(contamination >= 0.0)) throw InvalidSpecError("scenario: contamination must be >= 0");
  if (!(tamper_rate >= 0.0 && tamper_rate <= 1.0)) throw InvalidSpecError("scenario: tamper_rate in [0, 1]");
  if (scan_count < 1) throw InvalidSpecError("scenario: scan_count must be >= 1");
  if (!(reference_volume_cc > 0.0)) throw InvalidSpecError("scenario: reference_volume_cc must be > 0");
  if (!(forecast_horizon_days > 0.0)) throw InvalidSpecError("scenario: forecast_horizon_days must be > 0");
  if (state_train_per_class < 2 || state_epochs < 1 || vit_train_images < 1 || vit_steps < 0) {
    throw InvalidSpecError("scenario: training budgets out of range");
  }
  fusion.validate();
}

RunResult run_pipeline(const Scenario& sc) {
  stage("config", [&] { sc.validate(); });
  RunResult res;

  // ---- edge: synth -> denoise -> features -> sign ----
  std::mt19937_64 key_rng(sub_seed(sc.seed, 1));
  std::mt19937_64 tamper_rng(sub_seed(sc.seed, 2));
  std::bernoulli_distribution tamper(sc.tamper_rate);
  std::vector<DeviceRun> devices;
  fog::DeviceRegistry registry;
  const brainstate::DatasetSpec window_spec{};
  for (int d = 0; d < sc.device_count; ++d) {
    DeviceRun dev;
    char id[16];
    std::snprintf(id, sizeof id, "dev-%02d", d + 1);
    dev.device_id = id;
    dev.regime = sc.regimes[static_cast<std::size_t>(d) % sc.regimes.size()];
    for (int b = 0; b < 32; ++b) dev.key.push_back(static_cast<std::uint8_t>(key_rng() & 0xFF));
    registry.add(dev.device_id, dev.key);

    const auto synth = stage("synth", [&] {
      auto spec = brainstate::regime_spec(dev.regime, sc.duration_s, sc.sample_rate_hz,
                                          sub_seed(sc.seed, 100 + static_cast<std::uint64_t>(d)));
      spec.eog_amplitude *= sc.contamination;
      spec.powerline_amplitude *= sc.contamination;
      spec.channel_id = dev.device_id;
      return signal::synthesize_eeg(spec);
    });
    auto denoised = stage("denoise", [&] { return signal::denoise_chain(synth.contaminated, synth.reference).denoised; });
    const auto settle = signal::settling_samples(sc.sample_rate_hz);
    stage("denoise", [&] {
      try {
        dev.snr_before_db = signal::snr_db(synth.clean, synth.contaminated, settle);
        dev.snr_after_db = signal::snr_db(synth.clean, denoised, settle);
      } catch (const DegenerateInputError&) {
        // silent clean signal: SNR undefined, reported as n/a
      }
    });
    denoised.samples.erase(denoised.samples.begin(), denoised.samples.begin() + static_cast<std::ptrdiff_t>(settle));
    const auto windows = stage("features", [&] { return features::segment(denoised, window_spec.window); });
    const auto fvs = stage("features", [&] { return features::extract_all(windows); });
    stage("sign", [&] {
      for (std::size_t w = 0; w < fvs.size(); ++w) {
        const double end_s = 1.0 + windows[w].start_s + windows[w].duration_s();
        const auto ts = sc.start_utc_ms + static_cast<std::int64_t>(std::llround(end_s * 1000.0));
        auto p = fog::make_packet(dev.device_id, ts, w, fvs[w]);
        p.hmac_hex = fog::sign(p, dev.key);
        dev.packets.push_back(std::move(p));
      }
    });
    devices.push_back(std::move(dev));
  }

  // ---- models ----
  const fog::RiskModel risk_model = stage("models", [&] {
    return sc.risk_model_path ? fog::RiskModel::load(*sc.risk_model_path)
                              : train_risk_model(sub_seed(sc.seed, 3), sc.state_train_per_class);
  });
  const brainstate::StateModel state_model = stage("models", [&] {
    if (sc.state_model_path) return brainstate::StateModel::load(*sc.state_model_path);
    const auto data = brainstate::synth_state_dataset(sub_seed(sc.seed, 4), sc.state_train_per_class);
    brainstate::TrainOptions opt;
    opt.epochs = sc.state_epochs;
    opt.init_seed = sub_seed(sc.seed, 5);
    opt.stop_at_full_accuracy = true;
    return brainstate::train(data, opt);
  });

  // ---- fog gate -> cloud store ----
  fog::CloudStore store;
  fog::FogNode node(registry, risk_model, sc.gate, store);
  std::string gate_csv = "device_id,seq,timestamp_utc_ms";
  for (auto n : features::kFeatureNames) gate_csv += "," + std::string(n);
  gate_csv += ",tampered,risk_high_prob,action,reason\n";
  stage("gate", [&] {
    // Interleave devices in timestamp order, as a shared uplink would.
    std::vector<std::pair<std::size_t, std::size_t>> order;
    for (std::size_t d = 0; d < devices.size(); ++d) {
      for (std::size_t i = 0; i < devices[d].packets.size(); ++i) order.emplace_back(d, i);
    }
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
      return devices[a.first].packets[a.second].timestamp_utc_ms <
             devices[b.first].packets[b.second].timestamp_utc_ms;
    });
    for (const auto& [d, i] : order) {
      const auto& p = devices[d].packets[i];
      std::string frame = fog::encode_frame(p);
      const bool tampered = tamper(tamper_rng);
      if (tampered) {
        // Flip one MAC nibble; the frame stays well-formed.
        const auto pos = frame.rfind('"') - 1;
        frame[pos] = frame[pos] == '0' ? '1' : '0';
      }
      const auto out = node.process_frame(frame, p.timestamp_utc_ms + sc.network_latency_ms);
      ++res.produced;
      gate_csv += p.device_id + "," + std::to_string(p.seq) + "," + std::to_string(p.timestamp_utc_ms);
      for (double v : p.features) gate_csv += "," + fog::format_double(v);
      gate_csv += std::string(",") + (tampered ? "1" : "0") + "," +
                  (out.decision.risk_evaluated ? f6(out.decision.risk_high_prob) : std::string()) + "," +
                  std::string(fog::to_string(out.decision.action)) + "," +
                  std::string(fog::to_string(out.decision.reason)) + "\n";
    }
  });
  res.counters = node.counters();
  res.stored = store.size();

  // ---- tumor finding ----
  struct ScanResult {
    Eigen::VectorXd probs;
    vit::ThresholdStats stats;
    TumorFinding finding;
    int grid = 0;
  };
  std::vector<ScanResult> scans;
  stage("tumor", [&] {
    vit::ModelParams params;
    if (sc.vit_checkpoint_path) {
      params = vit::load_checkpoint(*sc.vit_checkpoint_path);
    } else {
      const auto cfg = pipeline_vit_config();
      vit::CorpusSpec cs;
      cs.image_size = cfg.image_size;
      cs.patch_size = cfg.patch_size;
      const auto corpus = vit::make_multifocal_corpus(sub_seed(sc.seed, 6), sc.vit_train_images, cs);
      params = vit::ModelParams::random(cfg, sub_seed(sc.seed, 7));
      vit::train(params, corpus, vit::LossConfig{}, 0.1, sc.vit_steps);
    }
    vit::CorpusSpec scan_spec;
    scan_spec.image_size = params.config.image_size;
    scan_spec.patch_size = params.config.patch_size;
    if (!sc.tumor_present) scan_spec.min_foci = scan_spec.max_foci = 0;
    const auto images = vit::make_multifocal_corpus(sub_seed(sc.seed, 8), sc.scan_count, scan_spec);
    for (const auto& img : images) {
      const auto grid = vit::patchify(img.image, params.config.patch_size);
      ScanResult s;
      s.probs = vit::forward(params, grid).probs;
      s.stats = vit::adaptive_threshold(std::span<const double>(s.probs.data(), static_cast<std::size_t>(s.probs.size())));
      s.grid = grid.grid_rows;
      s.finding = finding_from_patches(std::span<const double>(s.probs.data(), static_cast<std::size_t>(s.probs.size())),
                                       grid.grid_rows, grid.grid_cols, s.stats, sc.reference_volume_cc);
      scans.push_back(std::move(s));
    }
  });
  // The most confident scan defines the patient-level finding.
  const auto& lead = *std::max_element(scans.begin(), scans.end(), [](const auto& a, const auto& b) {
    return a.finding.confidence < b.finding.confidence;
  });

  // ---- kinetics ----
  const auto series = kinetics::synth_growth_series(sub_seed(sc.seed, 9));
  const auto fit = stage("forecast", [&] { return kinetics::fit(series, 3); });
  const double t_last = series.observations.back().t_days;
  std::vector<kinetics::Forecast> forecasts;
  stage("forecast", [&] {
    for (double h = 10.0; h < sc.forecast_horizon_days; h += 10.0) forecasts.push_back(kinetics::forecast(fit, t_last + h));
    forecasts.push_back(kinetics::forecast(fit, t_last + sc.forecast_horizon_days));
  });
  const auto trend = stage("forecast", [&] {
    return kinetics::trend_shape(fit, series.observations.front().t_days, t_last, sc.forecast_horizon_days);
  });

  // ---- ingest -> classify -> fuse ----
  std::map<std::string, TwinState> twins;
  for (const auto& dev : devices) twins[dev.device_id].device_id = dev.device_id;
  stage("ingest", [&] {
    for (const auto& rec : store.records()) ingest(twins.at(rec.packet.device_id), rec);
  });
  stage("classify", [&] {
    for (auto& [id, t] : twins) {
      std::optional<brainstate::StatePrediction> pred;
      if (!t.recent_windows.empty()) pred = state_model.predict(t.recent_windows);
      t.forecast = forecasts.back();
      assess(t, pred, lead.finding, sc.fusion);
    }
  });
  for (auto& [id, t] : twins) res.twins.push_back(t);

  // ---- report ----
  std::string r;
  r += "neurotwin run report\n";
  r += "seed: " + std::to_string(sc.seed) + "\n";
  r += "devices: " + std::to_string(sc.device_count) + ", duration_s: " + f6(sc.duration_s) +
       ", sample_rate_hz: " + f6(sc.sample_rate_hz) + "\n";
  r += "contamination: " + f6(sc.contamination) + ", tamper_rate: " + f6(sc.tamper_rate) + "\n";
  r += "gate: threshold " + f6(sc.gate.threshold) + ", freshness_ms " + std::to_string(sc.gate.freshness_ms) + "\n";
  r += "\n[edge]\n";
  std::string snr_csv = "device_id,regime,snr_before_db,snr_after_db,windows\n";
  for (const auto& dev : devices) {
    const auto s = [](const std::optional<double>& v) { return v ? f6(*v) : std::string("n/a"); };
    r += dev.device_id + " regime=" + std::string(brainstate::to_string(dev.regime)) +
         " windows=" + std::to_string(dev.packets.size()) + " snr_before_db=" + s(dev.snr_before_db) +
         " snr_after_db=" + s(dev.snr_after_db) + "\n";
    snr_csv += dev.device_id + "," + std::string(brainstate::to_string(dev.regime)) + "," +
               (dev.snr_before_db ? f6(*dev.snr_before_db) : "") + "," +
               (dev.snr_after_db ? f6(*dev.snr_after_db) : "") + "," + std::to_string(dev.packets.size()) + "\n";
  }
  r += "\n[fog]\n";
  r += "produced: " + std::to_string(res.produced) + "\n";
  r += "forwarded: " + std::to_string(res.counters.forwarded) + "\n";
  r += "parked: " + std::to_string(res.counters.parked) + "\n";
  r += "rejected: " + std::to_string(res.counters.rejected) + "\n";
  for (const auto& [reason, n] : res.counters.by_reason) {
    r += "  " + std::string(fog::to_string(reason)) + ": " + std::to_string(n) + "\n";
  }
  r += "stored: " + std::to_string(res.stored) + "\n";
  r += std::string("conservation: ") + (res.conserved() ? "ok" : "VIOLATED") + "\n";
  r += "\n[tumor]\n";
  std::string patch_csv = "scan,patch,row,col,prob,above_theta\n";
  for (std::size_t i = 0; i < scans.size(); ++i) {
    const auto& s = scans[i];
    r += "scan " + std::to_string(i) + ": mu_bg=" + f6(s.stats.mu_bg) + " sigma_bg=" + f6(s.stats.sigma_bg) +
         " theta=" + f6(s.stats.theta) + " present=" + (s.finding.present ? "yes" : "no") +
         " confidence=" + f6(s.finding.confidence) +
         " volume_cc=" + (s.finding.volume_cc ? f6(*s.finding.volume_cc) : std::string("n/a")) +
         " region=" + (s.finding.region_label.empty() ? std::string("n/a") : s.finding.region_label) + "\n";
    for (Eigen::Index p = 0; p < s.probs.size(); ++p) {
      patch_csv += std::to_string(i) + "," + std::to_string(p) + "," + std::to_string(p / s.grid) + "," +
                   std::to_string(p % s.grid) + "," + fog::format_double(s.probs[p]) + "," +
                   (s.probs[p] > s.stats.theta ? "1" : "0") + "\n";
    }
  }
  r += "\n[kinetics]\n" + kinetics::fit_report(fit, {forecasts.back()}, &trend);
  r += "\n[twins]\n";
  std::string history_csv = "device_id,t_ms,fused_risk\n";
  for (const auto& t : res.twins) {
    r += t.device_id + ": ingested=" + std::to_string(t.ingested) + " out_of_order=" + std::to_string(t.out_of_order);
    if (t.latest_state) {
      r += " state=" + std::string(brainstate::to_string(t.latest_state->argmax_label)) + " probs=(" +
           f6(t.latest_state->probs[0]) + ", " + f6(t.latest_state->probs[1]) + ", " + f6(t.latest_state->probs[2]) +
           ")";
    } else {
      r += " state=n/a";
    }
    r += " fused_risk=" + f6(t.fused_risk) + " band=" + std::string(to_string(risk_band(t.fused_risk, sc.fusion))) + "\n";
    for (const auto& p : t.risk_history) history_csv += t.device_id + "," + std::to_string(p.t_ms) + "," + f6(p.risk) + "\n";
  }
  res.report = r;

  std::string store_log;
  for (const auto& rec : store.records()) store_log += fog::CloudStore::to_json_line(rec) + "\n";
  res.artifacts["report.txt"] = r;
  res.artifacts["edge_snr.csv"] = snr_csv;
  res.artifacts["gate.csv"] = gate_csv;
  res.artifacts["cloud_store.ndjson"] = store_log;
  res.artifacts["patches.csv"] = patch_csv;
  res.artifacts["kinetics.csv"] = kinetics::fit_to_csv(series, fit, forecasts);
  res.artifacts["risk_history.csv"] = history_csv;
  res.artifacts["twins.ndjson"] = snapshot(res.twins);
  return res;
}

void write_artifacts(const RunResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : result.artifacts) io::write_text(dir / name, content);
}

}  // namespace neurotwin::twin
