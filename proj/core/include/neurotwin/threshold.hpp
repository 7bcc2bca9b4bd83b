#pragma once

#include <span>
#include <vector>

namespace neurotwin::vit {

/// Which patches feed mu_bg / sigma_bg.
enum class BackgroundRule {
  whole_scan,    // every patch in the scan
  below_median,  // patches with p <= median(p)
};

struct ThresholdStats {
  double mu_bg = 0.0;
  double sigma_bg = 0.0;  // population standard deviation
  double k = 1.5;
  double theta = 0.0;     // mu_bg + k * sigma_bg
  std::size_t background_count = 0;
};

inline constexpr double kDefaultThresholdK = 1.5;

ThresholdStats threshold_from_stats(double mu_bg, double sigma_bg, double k = kDefaultThresholdK);

/// Throws DegenerateInputError with fewer than 2 background patches and
/// NumericError on probabilities outside [0, 1].
ThresholdStats adaptive_threshold(std::span<const double> probs, double k = kDefaultThresholdK,
                                  BackgroundRule rule = BackgroundRule::whole_scan);

/// tumor iff p > theta (strict).
std::vector<bool> classify_patches(std::span<const double> probs, double theta);

std::size_t count_above(std::span<const double> probs, double theta);

}  // namespace neurotwin::vit
