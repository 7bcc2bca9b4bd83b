#include "neurotwin/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "neurotwin/error.hpp"

namespace neurotwin::vit {

ThresholdStats threshold_from_stats(double mu_bg, double sigma_bg, double k) {
  if (!std::isfinite(mu_bg) || !std::isfinite(sigma_bg) || !std::isfinite(k) || sigma_bg < 0.0) {
    throw NumericError("threshold: mu/sigma/k must be finite and sigma >= 0");
  }
  return ThresholdStats{mu_bg, sigma_bg, k, mu_bg + k * sigma_bg, 0};
}

ThresholdStats adaptive_threshold(std::span<const double> probs, double k, BackgroundRule rule) {
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw NumericError("adaptive_threshold: probability outside [0, 1]");
  }

  std::vector<double> background;
  if (rule == BackgroundRule::whole_scan) {
    background.assign(probs.begin(), probs.end());
  } else {
    std::vector<double> sorted(probs.begin(), probs.end());
    std::sort(sorted.begin(), sorted.end());
    double median = 0.0;
    if (!sorted.empty()) {
      const std::size_t n = sorted.size();
      median = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    }
    for (double p : probs) {
      if (p <= median) background.push_back(p);
    }
  }
  if (background.size() < 2) {
    throw DegenerateInputError("adaptive_threshold: need >= 2 background patches, have " +
                               std::to_string(background.size()));
  }

  double mean = 0.0;
  for (double p : background) mean += p;
  mean /= static_cast<double>(background.size());
  double var = 0.0;
  for (double p : background) var += (p - mean) * (p - mean);
  var /= static_cast<double>(background.size());

  auto stats = threshold_from_stats(mean, std::sqrt(var), k);
  stats.background_count = background.size();
  return stats;
}

std::vector<bool> classify_patches(std::span<const double> probs, double theta) {
  std::vector<bool> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] > theta;
  return out;
}

std::size_t count_above(std::span<const double> probs, double theta) {
  return static_cast<std::size_t>(
      std::count_if(probs.begin(), probs.end(), [theta](double p) { return p > theta; }));
}

}  // namespace neurotwin::vit
