#pragma once

// Toy-scale vision transformer with patch-level attention-entropy
// regularization, per-patch sigmoid tumor head, hand-written backward pass,
// gradient-weighted patch attribution, and checkpoint I/O.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace neurotwin::vit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct PatchGrid {
  int grid_rows = 0;
  int grid_cols = 0;
  int patch_size = 16;
  MatrixXd patches;  // N x patch_size^2, row-major patch order, row-major pixels

  int count() const { return grid_rows * grid_cols; }
};

/// Throws ShapeError unless both image dims are divisible by patch_size and
/// the grid has at least 2 patches.
PatchGrid patchify(const MatrixXd& image, int patch_size);
MatrixXd reassemble(const PatchGrid& grid);

struct VitConfig {
  int image_size = 64;
  int patch_size = 16;
  int d_model = 32;
  int heads = 2;
  int layers = 2;
  int ffn_hidden = 64;
  bool position_embeddings = true;

  int patch_count() const { return (image_size / patch_size) * (image_size / patch_size); }
  int patch_dim() const { return patch_size * patch_size; }
  int head_dim() const { return d_model / heads; }
  void validate() const;

  /// N=4, d=8, one layer, one head: small enough for exhaustive
  /// finite-difference checks.
  static VitConfig tiny();
};

struct LayerParams {
  MatrixXd wq, wk, wv, wo;  // d x d
  MatrixXd bo;              // 1 x d
  MatrixXd w1;              // d x f
  MatrixXd b1;              // 1 x f
  MatrixXd w2;              // f x d
  MatrixXd b2;              // 1 x d
};

/// Also used to hold gradients, with identical shapes.
struct ModelParams {
  VitConfig config;
  MatrixXd patch_proj;  // P x d
  MatrixXd patch_bias;  // 1 x d
  MatrixXd pos;         // N x d (ignored when position embeddings are off)
  std::vector<LayerParams> layers;
  MatrixXd head_w;  // d x 1
  MatrixXd head_b;  // 1 x 1

  static ModelParams zeros(const VitConfig& config);

  struct InitOptions {
    double attention_gain = 1.0;  // scales Wq and Wk
    double pos_scale = 0.1;
  };
  static ModelParams random(const VitConfig& config, std::uint64_t seed, InitOptions options);
  static ModelParams random(const VitConfig& config, std::uint64_t seed) {
    return random(config, seed, InitOptions{});
  }

  /// Visits every trainable tensor in a fixed order.
  void for_each(const std::function<void(const std::string&, MatrixXd&)>& fn);
  void for_each(const std::function<void(const std::string&, const MatrixXd&)>& fn) const;
  std::size_t parameter_count() const;
  bool all_finite() const;
};

struct AttentionMap {
  int layer = 0;
  int head = 0;
  MatrixXd alpha;  // N x N, rows sum to 1
};

struct LayerCache {
  MatrixXd x_in, q, k, v, concat, x_mid, hidden_act, x_out;
  std::vector<MatrixXd> attn;  // one per head
};

struct ForwardCache {
  MatrixXd patches;  // standardized embedding input
  MatrixXd x0;
  std::vector<LayerCache> layers;
  VectorXd logits;
};

struct ForwardResult {
  VectorXd probs;  // per-patch tumor probability
  std::vector<AttentionMap> maps;  // layer-major, head-minor
  ForwardCache cache;
};

/// Throws NumericError naming the layer on non-finite activations.
ForwardResult forward(const ModelParams& params, const PatchGrid& grid);

enum class PlarAggregation { all_layers, final_layer };
enum class PlarNormalization { per_query, all_pairs };  // 1/N or 1/N^2

struct LossConfig {
  double lambda1 = 0.5;
  double epsilon = 1e-8;
  PlarAggregation aggregation = PlarAggregation::all_layers;
  PlarNormalization normalization = PlarNormalization::per_query;
};

/// H_i = -sum_j a_ij log(a_ij + eps). A row whose sum is off by more than
/// 1e-6 is an invariant violation (DegenerateInputError).
VectorXd attention_entropy(const MatrixXd& alpha, double epsilon = 1e-8);

/// -(1/N) sum_i H_i per map, averaged over the maps selected by the config.
double plar_loss(const std::vector<AttentionMap>& maps, const LossConfig& config = {});

/// Mean binary cross-entropy over patches, log arguments clamped at 1e-12.
double ce_loss(std::span<const double> probs, std::span<const double> labels);
double ce_loss(const VectorXd& probs, const VectorXd& labels);

double total_loss(const VectorXd& probs, const VectorXd& labels,
                  const std::vector<AttentionMap>& maps, const LossConfig& config);

/// Mean attention entropy over every row of every map (diagnostic).
double mean_attention_entropy(const std::vector<AttentionMap>& maps, double epsilon = 1e-8);

struct LabeledImage {
  MatrixXd image;  // values in [0, 1]
  VectorXd labels;  // per patch, 1 = tumor
};

struct LossBreakdown {
  double total = 0.0;
  double ce = 0.0;
  double plar = 0.0;
  double mean_entropy = 0.0;
};

/// Batch-mean loss and its gradient.
LossBreakdown loss_and_gradient(const ModelParams& params, std::span<const LabeledImage> batch,
                                const LossConfig& config, ModelParams* grad);

LossBreakdown evaluate_loss(const ModelParams& params, std::span<const LabeledImage> batch,
                            const LossConfig& config);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  Eigen::Index worst_row = 0, worst_col = 0;
  std::size_t checked = 0;
};

/// Central differences (step h) against the analytic gradient over every
/// parameter. Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult grad_check(const ModelParams& params, std::span<const LabeledImage> batch,
                           const LossConfig& config, double h = 1e-5);

struct StepMetrics {
  int step = 0;
  LossBreakdown loss;
};

/// One full-batch gradient-descent step. Throws NumericError with step
/// diagnostics on a non-finite loss.
StepMetrics train_step(ModelParams& params, std::span<const LabeledImage> batch,
                       const LossConfig& config, double lr, int step_index = 0);

std::vector<StepMetrics> train(ModelParams& params, std::span<const LabeledImage> batch,
                               const LossConfig& config, double lr, int steps);

enum class TargetClass { tumor, background };

/// Gradient of the mean class logit w.r.t. the final-layer patch embeddings,
/// channel-averaged into weights, weighted per patch, clipped at 0 and
/// max-normalized. All-zero evidence gives an all-zero map.
VectorXd patch_attribution(const ModelParams& params, const PatchGrid& grid,
                           TargetClass target = TargetClass::tumor);

struct CorpusSpec {
  int image_size = 64;
  int patch_size = 16;
  int min_foci = 1;
  int max_foci = 4;
  double background_level = 0.25;
  double background_noise = 0.08;
  double lesion_intensity = 0.6;
  double min_radius_px = 3.0;
  double max_radius_px = 6.0;
  double label_cutoff = 0.3;  // patch is tumor if lesion contribution exceeds this anywhere
};

/// Multifocal synthetic MR-like slices with per-patch labels.
std::vector<LabeledImage> make_multifocal_corpus(std::uint64_t seed, int count,
                                                 const CorpusSpec& spec = {});

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace neurotwin::vit
