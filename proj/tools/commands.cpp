#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "neurotwin/brainstate.hpp"
#include "neurotwin/csv.hpp"
#include "neurotwin/error.hpp"
#include "neurotwin/features.hpp"
#include "neurotwin/fog_gate.hpp"
#include "neurotwin/hmac.hpp"
#include "neurotwin/image_io.hpp"
#include "neurotwin/kinetics.hpp"
#include "neurotwin/signal_chain.hpp"
#include "neurotwin/svg.hpp"
#include "neurotwin/tcp_transport.hpp"
#include "neurotwin/threshold.hpp"
#include "neurotwin/twin.hpp"
#include "neurotwin/vit.hpp"

namespace nt_cli {

namespace nt = neurotwin;
using nt::fog::format_double;

namespace {

std::string f6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

/// Signal CSVs carry a t_s column; the rate comes from the first step unless
/// given explicitly.
double infer_rate(const nt::io::CsvTable& t, const std::optional<double>& flag) {
  if (flag) return *flag;
  const auto c = t.column("t_s");
  if (t.rows.size() < 2) throw nt::ParseError("signal csv: need two rows to infer the sample rate (or pass --rate)");
  const double dt = nt::io::parse_double(t.rows[1][c]) - nt::io::parse_double(t.rows[0][c]);
  if (!(dt > 0.0)) throw nt::ParseError("signal csv: t_s must increase");
  return std::round(1.0 / dt * 1e6) / 1e6;
}

std::vector<double> column_values(const nt::io::CsvTable& t, const std::string& name) {
  const auto c = t.column(name);
  std::vector<double> v;
  v.reserve(t.rows.size());
  for (const auto& row : t.rows) v.push_back(nt::io::parse_double(row[c]));
  return v;
}

bool has_column(const nt::io::CsvTable& t, const std::string& name) {
  for (const auto& h : t.header) {
    if (h == name) return true;
  }
  return false;
}

nt::brainstate::BrainState regime_arg(const std::string& s) {
  try {
    return nt::brainstate::parse_state(s);
  } catch (const nt::ParseError&) {
    usage_error("unknown regime '" + s + "' (expected seizure, interictal or healthy)");
  }
}

void info(const std::string& msg) { std::cerr << msg << "\n"; }

}  // namespace

void Commands::register_all(CLI::App& app) {
  synth_ = app.add_subcommand("synth", "Synthesize a contaminated EEG channel with its EOG reference and clean truth");
  synth_->add_option("--seed", synth_o_.seed, "RNG seed (falls back to NEUROTWIN_SEED)");
  synth_->add_option("--duration", synth_o_.duration_s, "Duration in seconds")->capture_default_str();
  synth_->add_option("--rate", synth_o_.rate_hz, "Sample rate in Hz")->capture_default_str();
  synth_->add_option("--regime", synth_o_.regime, "healthy | interictal | seizure")->capture_default_str();
  synth_->add_option("--eog-amplitude", synth_o_.eog_amplitude, "Override the EOG amplitude (uV)");
  synth_->add_option("--noise-std", synth_o_.noise_std, "Override white-noise std (uV)");
  synth_->add_option("--powerline-hz", synth_o_.powerline_hz, "Mains frequency")->capture_default_str();
  synth_->add_option("--powerline-amplitude", synth_o_.powerline_amplitude, "Override mains amplitude (uV)");
  synth_->add_option("--out", synth_o_.out, "Output CSV t_s,value_uv,reference_uv,clean_uv (- = stdout)")
      ->capture_default_str();

  denoise_ = app.add_subcommand("denoise", "Bandpass -> notch -> LMS EOG cancellation");
  denoise_->add_option("--in", denoise_o_.in, "Signal CSV t_s,value_uv,reference_uv[,clean_uv]")->required();
  denoise_->add_option("--out", denoise_o_.out, "Output CSV t_s,value_uv[,clean_uv]")->capture_default_str();
  denoise_->add_option("--rate", denoise_o_.rate_hz, "Sample rate (default: inferred from t_s)");
  denoise_->add_option("--lr", denoise_o_.lr, "LMS learning rate in (0, 1]")->capture_default_str();
  denoise_->add_option("--band-low", denoise_o_.band_low, "Bandpass low edge (Hz)")->capture_default_str();
  denoise_->add_option("--band-high", denoise_o_.band_high, "Bandpass high edge (Hz)")->capture_default_str();
  denoise_->add_option("--notch-hz", denoise_o_.notch_hz, "Notch centre, 0 disables")->capture_default_str();
  denoise_->add_option("--order", denoise_o_.order, "Overall bandpass order (even)")->capture_default_str();

  features_ = app.add_subcommand("features", "Window a signal and extract the eleven EEG features");
  features_->add_option("--in", features_o_.in, "Signal CSV with a t_s column")->required();
  features_->add_option("--column", features_o_.column, "Signal column to analyse")->capture_default_str();
  features_->add_option("--rate", features_o_.rate_hz, "Sample rate (default: inferred from t_s)");
  features_->add_option("--window", features_o_.window_s, "Window length in seconds, 2..5")->capture_default_str();
  features_->add_option("--overlap", features_o_.overlap, "Overlap fraction in [0, 1)")->capture_default_str();
  features_->add_option("--skip", features_o_.skip_s, "Seconds dropped from the start")->capture_default_str();
  features_->add_option("--out", features_o_.out, "Feature CSV (- = stdout)")->capture_default_str();
  features_->add_option("--frames", features_o_.frames, "Also write signed packet frames here");
  features_->add_option("--device", features_o_.device, "Device id for frames")->capture_default_str();
  features_->add_option("--registry", features_o_.registry, "Registry TSV holding the device key");
  features_->add_option("--key-hex", features_o_.key_hex, "64-hex-char device key (instead of --registry)");
  features_->add_option("--start-ms", features_o_.start_ms, "UTC ms of the first sample (default: now)");

  gate_ = app.add_subcommand("gate", "Authenticate, validate and risk-gate packet frames");
  gate_->add_option("--registry", gate_o_.registry, "Registry TSV: device_id<TAB>hex_key")->required();
  gate_->add_option("--risk-model", gate_o_.risk_model, "Risk model tensor file (client mode ignores it)");
  gate_->add_option("--threshold", gate_o_.threshold, "Forward when P(high) >= threshold")->capture_default_str();
  gate_->add_option("--freshness-ms", gate_o_.freshness_ms, "Accepted |now - timestamp|")->capture_default_str();
  gate_->add_option("--in", gate_o_.in, "Frames file (- = stdin)")->capture_default_str();
  gate_->add_option("--listen", gate_o_.listen, "Accept one loopback TCP connection on this port instead of --in");
  gate_->add_option("--connect", gate_o_.connect, "Client mode: send --in frames to host:port and exit");
  gate_->add_option("--now-ms", gate_o_.now_ms, "Fixed gate clock (default: wall clock)");
  gate_->add_option("--store", gate_o_.store, "Append forwarded records (NDJSON)");
  gate_->add_option("--parked", gate_o_.parked, "Write parked packets as frames");
  gate_->add_option("--summary", gate_o_.summary, "Counters report (default: stderr)");

  train_vit_ = app.add_subcommand("train-vit", "Train the toy ViT on a seeded multifocal corpus");
  train_vit_->add_option("--seed", train_vit_o_.seed, "RNG seed (falls back to NEUROTWIN_SEED)");
  train_vit_->add_option("--steps", train_vit_o_.steps, "Gradient steps")->capture_default_str();
  train_vit_->add_option("--lambda1", train_vit_o_.lambda1, "Attention-entropy weight")->capture_default_str();
  train_vit_->add_option("--lr", train_vit_o_.lr, "Learning rate")->capture_default_str();
  train_vit_->add_option("--images", train_vit_o_.images, "Corpus size")->capture_default_str();
  train_vit_->add_option("--config", train_vit_o_.config, "tiny | small")->capture_default_str();
  train_vit_->add_option("--out", train_vit_o_.out, "Checkpoint path")->required();
  train_vit_->add_option("--metrics", train_vit_o_.metrics, "Per-step loss CSV");

  attribute_ = app.add_subcommand("attribute", "Patch probabilities, adaptive threshold and attribution map");
  attribute_->add_option("--checkpoint", attribute_o_.checkpoint, "ViT checkpoint")->required();
  attribute_->add_option("--image", attribute_o_.image, "Image (.pgm or .csv); resized to the model input");
  attribute_->add_option("--seed", attribute_o_.seed, "Synthesize the scan from this seed when --image is absent");
  attribute_->add_option("--target", attribute_o_.target, "tumor | background")->capture_default_str();
  attribute_->add_option("--k", attribute_o_.k, "Threshold multiplier")->capture_default_str();
  attribute_->add_option("--out", attribute_o_.out, "Per-patch CSV (- = stdout)")->capture_default_str();
  attribute_->add_option("--svg", attribute_o_.svg, "Attribution heatmap SVG");

  classify_ = app.add_subcommand("classify-state", "Train or apply the BiLSTM brain-state classifier");
  classify_->add_flag("--train", classify_o_.train, "Train on a seeded synthetic corpus");
  classify_->add_option("--seed", classify_o_.seed, "RNG seed for --train (falls back to NEUROTWIN_SEED)");
  classify_->add_option("--per-class", classify_o_.per_class, "Training sequences per class")->capture_default_str();
  classify_->add_option("--epochs", classify_o_.epochs, "Maximum epochs")->capture_default_str();
  classify_->add_option("--hidden", classify_o_.hidden, "Hidden units per direction")->capture_default_str();
  classify_->add_option("--lr", classify_o_.lr, "Learning rate")->capture_default_str();
  classify_->add_option("--model", classify_o_.model, "Model file (written by --train, read otherwise)")->required();
  classify_->add_option("--risk-out", classify_o_.risk_out, "With --train: also fit and write the fog risk model");
  classify_->add_option("--dataset-out", classify_o_.dataset_out, "With --train: write the training windows CSV");
  classify_->add_option("--in", classify_o_.in, "Feature CSV forming one sequence");
  classify_->add_option("--out", classify_o_.out, "Prediction CSV (- = stdout)")->capture_default_str();

  forecast_ = app.add_subcommand("forecast", "Polynomial tumor-volume fit with prediction intervals");
  forecast_->add_option("--in", forecast_o_.in, "CSV date_iso,volume_cc")->required();
  forecast_->add_option("--degree", forecast_o_.degree, "Polynomial degree")->capture_default_str();
  forecast_->add_option("--horizon-days", forecast_o_.horizon_days, "Forecast horizon past the last scan")
      ->capture_default_str();
  forecast_->add_option("--step-days", forecast_o_.step_days, "Spacing of forecast rows")->capture_default_str();
  forecast_->add_option("--confidence", forecast_o_.confidence, "Interval level")->capture_default_str();
  forecast_->add_option("--out", forecast_o_.out, "Observed + forecast rows CSV");
  forecast_->add_option("--report", forecast_o_.report, "Diagnostics report (- = stdout)")->capture_default_str();
  forecast_->add_option("--svg", forecast_o_.svg, "Volume chart SVG");

  pipeline_ = app.add_subcommand("pipeline", "End-to-end run: edge -> fog -> cloud -> twin");
  pipeline_->add_option("--seed", pipeline_o_.seed, "RNG seed (falls back to NEUROTWIN_SEED)");
  pipeline_->add_option("--devices", pipeline_o_.devices, "Number of headsets")->capture_default_str();
  pipeline_->add_option("--regimes", pipeline_o_.regimes, "Regime per device, cycled")->delimiter(',')
      ->capture_default_str();
  pipeline_->add_option("--duration", pipeline_o_.duration_s, "Seconds of EEG per device")->capture_default_str();
  pipeline_->add_option("--rate", pipeline_o_.rate_hz, "Sample rate")->capture_default_str();
  pipeline_->add_option("--contamination", pipeline_o_.contamination, "EOG/mains scale")->capture_default_str();
  pipeline_->add_option("--tamper-rate", pipeline_o_.tamper_rate, "Fraction of frames with a bad MAC")
      ->capture_default_str();
  pipeline_->add_option("--scans", pipeline_o_.scans, "Synthetic MR slices")->capture_default_str();
  pipeline_->add_flag("--no-tumor", pipeline_o_.no_tumor, "Synthesize lesion-free slices");
  pipeline_->add_option("--horizon-days", pipeline_o_.horizon_days, "Kinetics horizon")->capture_default_str();
  pipeline_->add_option("--threshold", pipeline_o_.threshold, "Fog risk threshold")->capture_default_str();
  pipeline_->add_option("--risk-model", pipeline_o_.risk_model, "Use this risk model instead of training one");
  pipeline_->add_option("--state-model", pipeline_o_.state_model, "Use this BiLSTM instead of training one");
  pipeline_->add_option("--vit-checkpoint", pipeline_o_.vit_checkpoint, "Use this ViT instead of training one");
  pipeline_->add_option("--out-dir", pipeline_o_.out_dir, "Write every stage artifact here");
  pipeline_->add_option("--report", pipeline_o_.report, "Run report (- = stdout)")->capture_default_str();

  plot_ = app.add_subcommand("plot", "Render an SVG figure from a CSV artifact");
  plot_->add_option("--kind", plot_o_.kind, "signal | bands | kinetics | risk | patches | training")
      ->required()
      ->check(CLI::IsMember({"signal", "bands", "kinetics", "risk", "patches", "training"}));
  plot_->add_option("--in", plot_o_.in, "Input CSV")->required();
  plot_->add_option("--out", plot_o_.out, "SVG path (- = stdout)")->capture_default_str();
  plot_->add_option("--title", plot_o_.title, "Figure title");
}

void Commands::run() {
  if (synth_->parsed()) return synth();
  if (denoise_->parsed()) return denoise();
  if (features_->parsed()) return features();
  if (gate_->parsed()) return gate();
  if (train_vit_->parsed()) return train_vit();
  if (attribute_->parsed()) return attribute();
  if (classify_->parsed()) return classify_state();
  if (forecast_->parsed()) return forecast();
  if (pipeline_->parsed()) return pipeline();
  if (plot_->parsed()) return plot();
}

void Commands::synth() {
  const auto& o = synth_o_;
  const auto seed = resolve_seed(o.seed);
  auto spec = nt::brainstate::regime_spec(regime_arg(o.regime), o.duration_s, o.rate_hz, seed);
  if (o.eog_amplitude) spec.eog_amplitude = *o.eog_amplitude;
  if (o.noise_std) spec.noise_std = *o.noise_std;
  if (o.powerline_amplitude) spec.powerline_amplitude = *o.powerline_amplitude;
  spec.powerline_hz = o.powerline_hz;
  const auto s = nt::signal::synthesize_eeg(spec);
  std::string out = "t_s,value_uv,reference_uv,clean_uv\n";
  for (std::size_t i = 0; i < s.clean.size(); ++i) {
    out += format_double(static_cast<double>(i) / o.rate_hz) + "," + format_double(s.contaminated.samples[i]) + "," +
           format_double(s.reference.samples[i]) + "," + format_double(s.clean.samples[i]) + "\n";
  }
  nt::io::write_text(o.out, out);
}

void Commands::denoise() {
  const auto& o = denoise_o_;
  const auto table = nt::io::parse_csv(nt::io::read_text(o.in));
  const double fs = infer_rate(table, o.rate_hz);
  nt::signal::RawSignal raw{column_values(table, "value_uv"), fs, "Cz"};
  nt::signal::ReferenceSignal ref{column_values(table, "reference_uv"), fs};
  nt::signal::ChainConfig cfg;
  cfg.bandpass = nt::signal::FilterSpec::bandpass(o.band_low, o.band_high, o.order);
  if (o.notch_hz > 0.0) {
    cfg.notch = nt::signal::FilterSpec::notch(o.notch_hz);
  } else {
    cfg.notch.reset();
  }
  cfg.lms_learning_rate = o.lr;
  const auto res = nt::signal::denoise_chain(raw, ref, cfg);
  const bool with_clean = has_column(table, "clean_uv");
  std::string out = with_clean ? "t_s,value_uv,clean_uv\n" : "t_s,value_uv\n";
  const auto t = column_values(table, "t_s");
  std::vector<double> clean;
  if (with_clean) clean = column_values(table, "clean_uv");
  for (std::size_t i = 0; i < t.size(); ++i) {
    out += format_double(t[i]) + "," + format_double(res.denoised.samples[i]);
    if (with_clean) out += "," + format_double(clean[i]);
    out += "\n";
  }
  nt::io::write_text(o.out, out);
  info("lms coefficient: " + f6(res.lms.coefficient));
  if (with_clean) {
    const nt::signal::RawSignal c{clean, fs, "Cz"};
    const auto skip = nt::signal::settling_samples(fs);
    const auto before = nt::signal::snr_db(c, raw, skip);
    const auto after = nt::signal::snr_db(c, res.denoised, skip);
    info("snr_before_db: " + (before ? f6(*before) : std::string("inf")));
    info("snr_after_db: " + (after ? f6(*after) : std::string("inf")));
  }
}

void Commands::features() {
  const auto& o = features_o_;
  const auto table = nt::io::parse_csv(nt::io::read_text(o.in));
  const double fs = infer_rate(table, o.rate_hz);
  nt::signal::RawSignal sig{column_values(table, o.column), fs, o.device};
  const auto skip = static_cast<std::size_t>(std::llround(o.skip_s * fs));
  if (skip >= sig.samples.size()) throw nt::InvalidSpecError("--skip removes the whole signal");
  sig.samples.erase(sig.samples.begin(), sig.samples.begin() + static_cast<std::ptrdiff_t>(skip));
  const auto windows = nt::features::segment(sig, {o.window_s, o.overlap});
  if (windows.empty()) throw nt::DegenerateInputError("signal shorter than one window");
  const auto fvs = nt::features::extract_all(windows);
  nt::io::write_text(o.out, nt::features::features_to_csv(windows, fvs));
  info("windows: " + std::to_string(fvs.size()));

  if (o.frames.empty()) return;
  std::vector<std::uint8_t> key;
  if (!o.key_hex.empty()) {
    key = nt::fog::from_hex(o.key_hex);
  } else if (!o.registry.empty()) {
    const auto reg = nt::fog::DeviceRegistry::load(o.registry);
    const auto* k = reg.find(o.device);
    if (k == nullptr) throw nt::InvalidSpecError("device '" + o.device + "' not in registry");
    key = *k;
  } else {
    usage_error("--frames needs --key-hex or --registry");
  }
  if (key.size() != 32) throw nt::InvalidSpecError("device key must be 32 bytes");
  const std::int64_t start = o.start_ms ? *o.start_ms : wall_clock_ms();
  std::string frames;
  for (std::size_t w = 0; w < fvs.size(); ++w) {
    const double end_s = o.skip_s + windows[w].start_s + windows[w].duration_s();
    auto p = nt::fog::make_packet(o.device, start + static_cast<std::int64_t>(std::llround(end_s * 1000.0)), w, fvs[w]);
    p.hmac_hex = nt::fog::sign(p, key);
    frames += nt::fog::encode_frame(p);
  }
  nt::io::write_text(o.frames, frames);
}

void Commands::gate() {
  const auto& o = gate_o_;
  if (!o.connect.empty()) {
    const auto colon = o.connect.rfind(':');
    if (colon == std::string::npos) usage_error("--connect expects host:port");
    const auto text = nt::io::read_text(o.in);
    std::vector<std::string> frames;
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      end = end == std::string::npos ? text.size() : end + 1;
      frames.push_back(text.substr(start, end - start));
      start = end;
    }
    nt::fog::send_frames(o.connect.substr(0, colon),
                         static_cast<std::uint16_t>(nt::io::parse_int(o.connect.substr(colon + 1))), frames);
    info("sent " + std::to_string(frames.size()) + " frames");
    return;
  }
  if (o.risk_model.empty()) usage_error("--risk-model is required unless --connect is given");
  const auto registry = nt::fog::DeviceRegistry::load(o.registry);
  const auto model = nt::fog::RiskModel::load(o.risk_model);
  std::optional<nt::fog::CloudStore> store_storage;
  if (o.store.empty()) {
    store_storage.emplace();
  } else {
    store_storage.emplace(std::filesystem::path(o.store));
  }
  nt::fog::FogNode node(registry, model, {o.threshold, o.freshness_ms}, *store_storage);
  auto handle = [&](std::string_view frame) {
    node.process_frame(frame, o.now_ms ? *o.now_ms : wall_clock_ms());
  };
  if (o.listen) {
    nt::fog::LineListener listener(*o.listen);
    info("listening on 127.0.0.1:" + std::to_string(listener.port()));
    listener.serve_one(handle);
  } else {
    const auto text = nt::io::read_text(o.in);
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      end = end == std::string::npos ? text.size() : end + 1;
      handle(std::string_view(text).substr(start, end - start));
      start = end;
    }
  }
  const auto& c = node.counters();
  std::string summary = "input: " + std::to_string(c.input) + "\nforwarded: " + std::to_string(c.forwarded) +
                        "\nparked: " + std::to_string(c.parked) + "\nrejected: " + std::to_string(c.rejected) + "\n";
  for (const auto& [reason, n] : c.by_reason) {
    summary += std::string(nt::fog::to_string(reason)) + ": " + std::to_string(n) + "\n";
  }
  if (o.summary.empty()) {
    std::cerr << summary;
  } else {
    nt::io::write_text(o.summary, summary);
  }
  if (!o.parked.empty()) {
    std::string parked;
    for (const auto& p : node.parked()) parked += nt::fog::encode_frame(p.packet);
    nt::io::write_text(o.parked, parked);
  }
}

void Commands::train_vit() {
  const auto& o = train_vit_o_;
  const auto seed = resolve_seed(o.seed);
  nt::vit::VitConfig cfg;
  if (o.config == "tiny") {
    cfg = nt::vit::VitConfig::tiny();
  } else if (o.config != "small") {
    usage_error("--config must be tiny or small");
  }
  nt::vit::CorpusSpec cs;
  cs.image_size = cfg.image_size;
  cs.patch_size = cfg.patch_size;
  const auto corpus = nt::vit::make_multifocal_corpus(seed, o.images, cs);
  auto params = nt::vit::ModelParams::random(cfg, seed + 1);
  nt::vit::LossConfig lc;
  lc.lambda1 = o.lambda1;
  std::string metrics = "step,total,ce,plar,mean_entropy\n";
  for (int s = 0; s < o.steps; ++s) {
    const auto m = nt::vit::train_step(params, corpus, lc, o.lr, s);
    metrics += std::to_string(s) + "," + format_double(m.loss.total) + "," + format_double(m.loss.ce) + "," +
               format_double(m.loss.plar) + "," + format_double(m.loss.mean_entropy) + "\n";
  }
  const auto final_loss = nt::vit::evaluate_loss(params, corpus, lc);
  nt::vit::save_checkpoint(params, o.out);
  if (!o.metrics.empty()) nt::io::write_text(o.metrics, metrics);
  info("final loss: total=" + f6(final_loss.total) + " ce=" + f6(final_loss.ce) +
       " mean_entropy=" + f6(final_loss.mean_entropy));
}

void Commands::attribute() {
  const auto& o = attribute_o_;
  const auto params = nt::vit::load_checkpoint(o.checkpoint);
  const int size = params.config.image_size;
  Eigen::MatrixXd image;
  if (!o.image.empty()) {
    image = nt::io::load_image(o.image);
    if (image.rows() != size || image.cols() != size) image = nt::io::resize_bilinear(image, size, size);
  } else {
    nt::vit::CorpusSpec cs;
    cs.image_size = size;
    cs.patch_size = params.config.patch_size;
    image = nt::vit::make_multifocal_corpus(resolve_seed(o.seed), 1, cs).front().image;
  }
  nt::vit::TargetClass target = nt::vit::TargetClass::tumor;
  if (o.target == "background") {
    target = nt::vit::TargetClass::background;
  } else if (o.target != "tumor") {
    usage_error("--target must be tumor or background");
  }
  const auto grid = nt::vit::patchify(image, params.config.patch_size);
  const auto probs = nt::vit::forward(params, grid).probs;
  const std::span<const double> ps(probs.data(), static_cast<std::size_t>(probs.size()));
  const auto stats = nt::vit::adaptive_threshold(ps, o.k);
  const auto attr = nt::vit::patch_attribution(params, grid, target);
  const auto flags = nt::vit::classify_patches(ps, stats.theta);
  std::string out = "patch,row,col,prob,attribution,above_theta\n";
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(i / grid.grid_cols) + "," + std::to_string(i % grid.grid_cols) +
           "," + format_double(probs[i]) + "," + format_double(attr[i]) + "," +
           (flags[static_cast<std::size_t>(i)] ? "1" : "0") + "\n";
  }
  nt::io::write_text(o.out, out);
  info("mu_bg=" + f6(stats.mu_bg) + " sigma_bg=" + f6(stats.sigma_bg) + " theta=" + f6(stats.theta) +
       " patches_above=" + std::to_string(nt::vit::count_above(ps, stats.theta)));
  if (!o.svg.empty()) {
    nt::io::write_text(o.svg, nt::svg::heatmap(std::span<const double>(attr.data(), static_cast<std::size_t>(attr.size())),
                                               grid.grid_rows, grid.grid_cols, "Patch attribution", flags));
  }
}

void Commands::classify_state() {
  const auto& o = classify_o_;
  if (o.train) {
    const auto seed = resolve_seed(o.seed);
    const auto data = nt::brainstate::synth_state_dataset(seed, o.per_class);
    nt::brainstate::TrainOptions opt;
    opt.epochs = o.epochs;
    opt.hidden = o.hidden;
    opt.learning_rate = o.lr;
    opt.init_seed = seed + 1;
    nt::brainstate::TrainReport rep;
    const auto model = nt::brainstate::train(data, opt, &rep);
    model.save(o.model);
    info("epochs: " + std::to_string(rep.epochs_run) + " train_accuracy: " + f6(rep.train_accuracy) +
         " final_loss: " + f6(rep.loss_per_epoch.empty() ? 0.0 : rep.loss_per_epoch.back()));
    if (!o.dataset_out.empty()) nt::io::write_text(o.dataset_out, nt::brainstate::dataset_to_csv(data));
    if (!o.risk_out.empty()) {
      std::size_t rows = 0;
      for (const auto& s : data) rows += s.windows.size();
      Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), 11);
      std::vector<int> labels;
      Eigen::Index r = 0;
      for (const auto& s : data) {
        for (const auto& w : s.windows) {
          const auto a = w.to_array();
          for (int c = 0; c < 11; ++c) x(r, c) = a[static_cast<std::size_t>(c)];
          labels.push_back(s.label == nt::brainstate::BrainState::seizure ? 1 : 0);
          ++r;
        }
      }
      const auto risk = nt::brainstate::train_logistic(x, labels);
      risk.save(o.risk_out);
      info("risk model loss: " + f6(nt::brainstate::logistic_loss(risk, x, labels)));
    }
    return;
  }
  if (o.in.empty()) usage_error("classify-state needs --in (or --train)");
  const auto model = nt::brainstate::StateModel::load(o.model);
  const auto windows = nt::features::features_from_csv(nt::io::read_text(o.in));
  if (windows.empty()) throw nt::DegenerateInputError("feature CSV has no rows");
  const auto pred = model.predict(windows);
  nt::io::write_text(o.out, "label,p_seizure,p_interictal,p_healthy\n" +
                                std::string(nt::brainstate::to_string(pred.argmax_label)) + "," +
                                format_double(pred.probs[0]) + "," + format_double(pred.probs[1]) + "," +
                                format_double(pred.probs[2]) + "\n");
}

void Commands::forecast() {
  const auto& o = forecast_o_;
  if (!(o.step_days > 0.0)) usage_error("--step-days must be positive");
  const auto series = nt::kinetics::series_from_csv(nt::io::read_text(o.in));
  const auto fit = nt::kinetics::fit(series, o.degree);
  const double t_last = series.observations.back().t_days;
  std::vector<nt::kinetics::Forecast> fcs;
  for (double h = o.step_days; h < o.horizon_days - 1e-9; h += o.step_days) {
    fcs.push_back(nt::kinetics::forecast(fit, t_last + h, o.confidence));
  }
  fcs.push_back(nt::kinetics::forecast(fit, t_last + o.horizon_days, o.confidence));
  std::optional<nt::kinetics::TrendReport> trend;
  if (o.degree >= 2) {
    trend = nt::kinetics::trend_shape(fit, series.observations.front().t_days, t_last, o.horizon_days);
  }
  nt::io::write_text(o.report, nt::kinetics::fit_report(fit, {fcs.back()}, trend ? &*trend : nullptr));
  const auto csv = nt::kinetics::fit_to_csv(series, fit, fcs);
  if (!o.out.empty()) nt::io::write_text(o.out, csv);
  if (!o.svg.empty()) nt::io::write_text(o.svg, render_plot("kinetics", csv, "Tumor volume"));
}

void Commands::pipeline() {
  const auto& o = pipeline_o_;
  nt::twin::Scenario sc;
  sc.seed = resolve_seed(o.seed);
  sc.device_count = o.devices;
  sc.regimes.clear();
  for (const auto& r : o.regimes) sc.regimes.push_back(regime_arg(r));
  sc.duration_s = o.duration_s;
  sc.sample_rate_hz = o.rate_hz;
  sc.contamination = o.contamination;
  sc.tamper_rate = o.tamper_rate;
  sc.scan_count = o.scans;
  sc.tumor_present = !o.no_tumor;
  sc.forecast_horizon_days = o.horizon_days;
  sc.gate.threshold = o.threshold;
  if (!o.risk_model.empty()) sc.risk_model_path = o.risk_model;
  if (!o.state_model.empty()) sc.state_model_path = o.state_model;
  if (!o.vit_checkpoint.empty()) sc.vit_checkpoint_path = o.vit_checkpoint;
  const auto res = nt::twin::run_pipeline(sc);
  if (!o.out_dir.empty()) nt::twin::write_artifacts(res, o.out_dir);
  nt::io::write_text(o.report, res.report);
  if (!res.conserved()) throw nt::NumericError("packet conservation violated");
}

void Commands::plot() {
  const auto& o = plot_o_;
  nt::io::write_text(o.out, render_plot(o.kind, nt::io::read_text(o.in), o.title));
}

}  // namespace nt_cli
