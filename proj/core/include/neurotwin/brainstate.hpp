#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "neurotwin/features.hpp"
#include "neurotwin/fog_gate.hpp"

namespace neurotwin::brainstate {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Class order is part of every artifact: seizure=0, interictal=1, healthy=2.
enum class BrainState { seizure = 0, interictal = 1, healthy = 2 };
inline constexpr int kStateCount = 3;

std::string_view to_string(BrainState s);
BrainState parse_state(std::string_view s);

struct SequenceSample {
  std::vector<features::FeatureVector> windows;
  BrainState label = BrainState::healthy;
};

struct StatePrediction {
  std::array<double, kStateCount> probs{1.0 / 3, 1.0 / 3, 1.0 / 3};
  BrainState argmax_label = BrainState::seizure;

  bool operator==(const StatePrediction&) const = default;
};

struct LstmCell {
  MatrixXd w;  // 4h x in, gate blocks ordered input, forget, output, candidate
  MatrixXd u;  // 4h x h
  VectorXd b;  // 4h
};

/// Also used as a gradient container.
struct BiLstmParams {
  int input_size = 11;
  int hidden = 16;
  LstmCell fwd;
  LstmCell bwd;
  MatrixXd out_w;  // 3 x 2h
  VectorXd out_b;  // 3

  static BiLstmParams zeros(int input_size = 11, int hidden = 16);
  static BiLstmParams random(std::uint64_t seed, int input_size = 11, int hidden = 16);

  /// Flat views of every trainable tensor, in a fixed order.
  void for_each(const std::function<void(const std::string&, std::span<double>)>& fn);
  bool all_finite();
};

/// Runs both directions over already-normalized inputs (T x input_size).
/// Throws NumericError naming the time index on non-finite state.
StatePrediction forward(const BiLstmParams& params, const MatrixXd& inputs);

/// Mean cross-entropy over the dataset; fills grad when non-null.
double loss_and_gradient(const BiLstmParams& params, std::span<const MatrixXd> inputs,
                         std::span<const BrainState> labels, BiLstmParams* grad);

/// Central differences over every parameter; relative error uses the same
/// max(|a|, |n|, 1e-6) denominator as the transformer check.
double grad_check(const BiLstmParams& params, std::span<const MatrixXd> inputs,
                  std::span<const BrainState> labels, double h = 1e-5);

/// Per-feature z-normalization fitted on training windows.
struct NormStats {
  VectorXd mean;
  VectorXd stddev;

  static NormStats fit(std::span<const SequenceSample> samples);
  MatrixXd apply(const std::vector<features::FeatureVector>& windows) const;
};

struct StateModel {
  BiLstmParams params;
  NormStats norm;

  StatePrediction predict(const std::vector<features::FeatureVector>& windows) const;

  void save(const std::filesystem::path& path) const;
  static StateModel load(const std::filesystem::path& path);
};

struct TrainReport {
  std::vector<double> loss_per_epoch;  // loss before each update, plus the final loss
  double train_accuracy = 0.0;
  int epochs_run = 0;
};

struct TrainOptions {
  double learning_rate = 0.5;
  int epochs = 500;
  int hidden = 16;
  std::uint64_t init_seed = 1;
  bool stop_at_full_accuracy = false;
};

/// Fits normalization stats, then full-batch gradient descent on mean
/// cross-entropy. Throws DivergenceError on a non-finite loss.
StateModel train(std::span<const SequenceSample> dataset, const TrainOptions& options,
                 TrainReport* report = nullptr);

double accuracy(const StateModel& model, std::span<const SequenceSample> dataset);

struct DatasetSpec {
  int windows_per_sample = 10;
  double sample_rate_hz = 250.0;
  features::WindowSpec window{};
};

/// Balanced synthetic corpus: seizure (strong beta/gamma, high ZCR),
/// interictal (raised theta plus spike transients) and healthy
/// (alpha-dominant). Signals go through the same denoising chain and feature
/// extractor as live data. Deterministic per seed.
std::vector<SequenceSample> synth_state_dataset(std::uint64_t seed, int n_per_class,
                                                const DatasetSpec& spec = {});

/// Generator settings for one regime; amplitudes and frequencies are jittered
/// from `seed`.
signal::SynthesisSpec regime_spec(BrainState state, double duration_s, double sample_rate_hz,
                                  std::uint64_t seed);

/// Contaminated signal -> denoising chain -> windows -> features, with the
/// first second (filter settling) dropped.
std::vector<features::FeatureVector> regime_features(BrainState state, int windows,
                                                     const DatasetSpec& spec, std::uint64_t seed);

/// `sample_id,label,window_index,` + the 11 canonical feature names.
std::string dataset_to_csv(std::span<const SequenceSample> dataset);
std::vector<SequenceSample> dataset_from_csv(std::string_view text);

/// Two-class softmax regression for the fog risk gate. Inputs are standardized
/// internally and the scaling is folded back so the model consumes raw
/// features. Throws DegenerateInputError unless each class has >= 2 rows.
fog::RiskModel train_logistic(const MatrixXd& features, std::span<const int> binary_labels,
                              double lr = 0.5, int epochs = 500);

double logistic_loss(const fog::RiskModel& model, const MatrixXd& features,
                     std::span<const int> binary_labels);

}  // namespace neurotwin::brainstate
