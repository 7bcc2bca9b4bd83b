#include <algorithm>
#include <cmath>
#include <random>

#include "neurotwin/error.hpp"
#include "neurotwin/vit.hpp"

namespace neurotwin::vit {

GradCheckResult grad_check(const ModelParams& params, std::span<const LabeledImage> batch,
                           const LossConfig& config, double h) {
  ModelParams analytic;
  loss_and_gradient(params, batch, config, &analytic);

  ModelParams probe = params;
  GradCheckResult result;
  std::vector<const MatrixXd*> grads;
  analytic.for_each([&grads](const std::string&, const MatrixXd& m) { grads.push_back(&m); });

  std::size_t t = 0;
  probe.for_each([&](const std::string& name, MatrixXd& w) {
    const MatrixXd& g = *grads[t++];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        const double saved = w(r, c);
        w(r, c) = saved + h;
        const double up = evaluate_loss(probe, batch, config).total;
        w(r, c) = saved - h;
        const double down = evaluate_loss(probe, batch, config).total;
        w(r, c) = saved;

        const double numeric = (up - down) / (2.0 * h);
        const double a = g(r, c);
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
        const double rel = std::abs(a - numeric) / denom;
        ++result.checked;
        if (rel > result.max_relative_error) {
          result.max_relative_error = rel;
          result.worst_tensor = name;
          result.worst_row = r;
          result.worst_col = c;
        }
      }
    }
  });
  return result;
}

StepMetrics train_step(ModelParams& params, std::span<const LabeledImage> batch,
                       const LossConfig& config, double lr, int step_index) {
  if (!(lr > 0.0)) throw InvalidSpecError("train_step: learning rate must be positive");
  if (batch.empty()) throw InvalidSpecError("train_step: empty batch");
  ModelParams grad;
  const auto loss = loss_and_gradient(params, batch, config, &grad);
  if (!std::isfinite(loss.total)) {
    throw NumericError("train_step " + std::to_string(step_index) + ": non-finite loss (ce=" +
                       std::to_string(loss.ce) + ", plar=" + std::to_string(loss.plar) + ")");
  }
  std::vector<const MatrixXd*> gs;
  grad.for_each([&gs](const std::string&, const MatrixXd& m) { gs.push_back(&m); });
  std::size_t t = 0;
  params.for_each([&](const std::string&, MatrixXd& w) { w -= lr * *gs[t++]; });
  return StepMetrics{step_index, loss};
}

std::vector<StepMetrics> train(ModelParams& params, std::span<const LabeledImage> batch,
                               const LossConfig& config, double lr, int steps) {
  std::vector<StepMetrics> history;
  history.reserve(static_cast<std::size_t>(std::max(steps, 0)));
  for (int s = 0; s < steps; ++s) history.push_back(train_step(params, batch, config, lr, s));
  return history;
}

std::vector<LabeledImage> make_multifocal_corpus(std::uint64_t seed, int count, const CorpusSpec& spec) {
  if (count < 1) throw InvalidSpecError("corpus: count must be >= 1");
  if (spec.image_size % spec.patch_size != 0) throw InvalidSpecError("corpus: size not divisible");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> foci(spec.min_foci, spec.max_foci);
  std::uniform_real_distribution<double> pos(0.0, static_cast<double>(spec.image_size));
  std::uniform_real_distribution<double> radius(spec.min_radius_px, spec.max_radius_px);
  std::uniform_real_distribution<double> gain(0.8, 1.2);

  const int size = spec.image_size;
  const int grid = size / spec.patch_size;
  std::vector<LabeledImage> corpus;
  for (int item = 0; item < count; ++item) {
    MatrixXd lesion = MatrixXd::Zero(size, size);
    const int k = foci(rng);
    for (int f = 0; f < k; ++f) {
      const double cy = pos(rng);
      const double cx = pos(rng);
      const double r = radius(rng);
      const double amp = spec.lesion_intensity * gain(rng);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          lesion(y, x) = std::max(lesion(y, x), amp * std::exp(-d2 / (2.0 * r * r)));
        }
      }
    }
    LabeledImage li;
    li.image.resize(size, size);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double v = spec.background_level + spec.background_noise * noise(rng) + lesion(y, x);
        li.image(y, x) = std::clamp(v, 0.0, 1.0);
      }
    }
    li.labels = VectorXd::Zero(grid * grid);
    for (int gr = 0; gr < grid; ++gr) {
      for (int gc = 0; gc < grid; ++gc) {
        const double peak =
            lesion.block(gr * spec.patch_size, gc * spec.patch_size, spec.patch_size, spec.patch_size)
                .maxCoeff();
        li.labels[gr * grid + gc] = peak > spec.label_cutoff ? 1.0 : 0.0;
      }
    }
    corpus.push_back(std::move(li));
  }
  return corpus;
}

}  // namespace neurotwin::vit
