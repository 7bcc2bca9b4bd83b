#pragma once

#include <CLI11.hpp>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nt_cli {

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag);
[[noreturn]] void usage_error(const std::string& msg);

struct SynthOpts {
  std::optional<std::uint64_t> seed;
  double duration_s = 10.0;
  double rate_hz = 500.0;
  std::string regime = "healthy";
  std::optional<double> eog_amplitude;
  std::optional<double> noise_std;
  double powerline_hz = 50.0;
  std::optional<double> powerline_amplitude;
  std::string out = "-";
};

struct DenoiseOpts {
  std::string in;
  std::string out = "-";
  std::optional<double> rate_hz;
  double lr = 0.01;
  double band_low = 0.5;
  double band_high = 45.0;
  double notch_hz = 50.0;
  int order = 4;
};

struct FeaturesOpts {
  std::string in;
  std::string column = "value_uv";
  std::optional<double> rate_hz;
  double window_s = 2.0;
  double overlap = 0.5;
  double skip_s = 0.0;
  std::string out = "-";
  std::string frames;
  std::string device = "dev-01";
  std::string registry;
  std::string key_hex;
  std::optional<std::int64_t> start_ms;
};

struct GateOpts {
  std::string registry;
  std::string risk_model;
  double threshold = 0.75;
  std::int64_t freshness_ms = 5000;
  std::string in = "-";
  std::optional<std::uint16_t> listen;
  std::string connect;
  std::optional<std::int64_t> now_ms;
  std::string store;
  std::string parked;
  std::string summary;
};

struct TrainVitOpts {
  std::optional<std::uint64_t> seed;
  int steps = 200;
  double lambda1 = 0.5;
  double lr = 0.1;
  int images = 8;
  std::string config = "small";
  std::string out;
  std::string metrics;
};

struct AttributeOpts {
  std::string checkpoint;
  std::string image;
  std::optional<std::uint64_t> seed;
  std::string target = "tumor";
  double k = 1.5;
  std::string out = "-";
  std::string svg;
};

struct ClassifyOpts {
  bool train = false;
  std::optional<std::uint64_t> seed;
  int per_class = 10;
  int epochs = 500;
  int hidden = 16;
  double lr = 0.5;
  std::string model;
  std::string risk_out;
  std::string dataset_out;
  std::string in;
  std::string out = "-";
};

struct ForecastOpts {
  std::string in;
  int degree = 3;
  double horizon_days = 120.0;
  double step_days = 10.0;
  double confidence = 0.95;
  std::string out;
  std::string report = "-";
  std::string svg;
};

struct PipelineOpts {
  std::optional<std::uint64_t> seed;
  int devices = 2;
  std::vector<std::string> regimes{"seizure", "healthy"};
  double duration_s = 20.0;
  double rate_hz = 250.0;
  double contamination = 1.0;
  double tamper_rate = 0.0;
  int scans = 1;
  bool no_tumor = false;
  double horizon_days = 120.0;
  double threshold = 0.75;
  std::string risk_model;
  std::string state_model;
  std::string vit_checkpoint;
  std::string out_dir;
  std::string report = "-";
};

struct PlotOpts {
  std::string kind;
  std::string in;
  std::string out = "-";
  std::string title;
};

class Commands {
 public:
  void register_all(CLI::App& app);
  void run();

 private:
  void synth();
  void denoise();
  void features();
  void gate();
  void train_vit();
  void attribute();
  void classify_state();
  void forecast();
  void pipeline();
  void plot();

  CLI::App* synth_ = nullptr;
  CLI::App* denoise_ = nullptr;
  CLI::App* features_ = nullptr;
  CLI::App* gate_ = nullptr;
  CLI::App* train_vit_ = nullptr;
  CLI::App* attribute_ = nullptr;
  CLI::App* classify_ = nullptr;
  CLI::App* forecast_ = nullptr;
  CLI::App* pipeline_ = nullptr;
  CLI::App* plot_ = nullptr;

  SynthOpts synth_o_;
  DenoiseOpts denoise_o_;
  FeaturesOpts features_o_;
  GateOpts gate_o_;
  TrainVitOpts train_vit_o_;
  AttributeOpts attribute_o_;
  ClassifyOpts classify_o_;
  ForecastOpts forecast_o_;
  PipelineOpts pipeline_o_;
  PlotOpts plot_o_;
};

/// Renders one of the figure kinds from its CSV artifact.
std::string render_plot(const std::string& kind, const std::string& csv_text, const std::string& title);

}  // namespace nt_cli
