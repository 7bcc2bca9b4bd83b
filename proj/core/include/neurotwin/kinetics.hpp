#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace neurotwin::kinetics {

struct Observation {
  double t_days = 0.0;  // days since 1970-01-01
  double volume_cc = 0.0;
};

/// Observations with strictly increasing t and positive finite volumes.
struct VolumeSeries {
  std::vector<Observation> observations;

  std::size_t size() const { return observations.size(); }
  void validate() const;
};

struct PolyFit {
  int degree = 3;
  std::vector<double> coeffs;  // ascending powers of raw t (days)
  double r_squared = 0.0;      // NaN when the response is constant but not fitted exactly
  std::optional<double> f_statistic;  // nullopt when SST == 0
  std::optional<double> p_value;
  std::string p_value_note;
  double sse = 0.0;
  double sst = 0.0;
  double mse = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  bool degenerate = false;  // constant response

  // Conditioning: u = (t - t_center) / t_scale maps the observed span to [-1, 1].
  double t_center = 0.0;
  double t_scale = 1.0;
  std::vector<double> scaled_coeffs;  // ascending powers of u
  Eigen::MatrixXd r_factor;           // upper-triangular R of the scaled design

  double evaluate(double t_days) const;
  double derivative(double t_days) const;  // d volume / d t
  /// x0^T (X^T X)^{-1} x0 for the design row at t.
  double leverage(double t_days) const;
  std::size_t dof() const { return n - static_cast<std::size_t>(degree) - 1; }
};

/// Least squares via Householder QR of the scaled Vandermonde design.
/// Throws InvalidSpecError if n < degree + 2 and DegenerateInputError for a
/// rank-deficient design.
PolyFit fit(const VolumeSeries& series, int degree = 3);

struct Forecast {
  double t_future = 0.0;
  double point_cc = 0.0;
  double interval_low_cc = 0.0;
  double interval_high_cc = 0.0;
  double confidence_level = 0.95;

  bool operator==(const Forecast&) const = default;
};

/// point +/- t_{dof, (1+c)/2} * std_error * sqrt(1 + leverage).
Forecast forecast(const PolyFit& fit, double t_future, double confidence = 0.95);

enum class Slope { rising, declining };
enum class TrendShape { rising, peaking, declining, rebounding };

std::string_view to_string(Slope s);
std::string_view to_string(TrendShape s);

struct TrendSegment {
  double t_start;
  double t_end;
  Slope slope;
};

struct TurningPoint {
  double t_days;
  bool is_peak;
};

struct TrendReport {
  std::vector<TrendSegment> segments;
  std::vector<TurningPoint> turning_points;
  TrendShape shape = TrendShape::rising;
};

/// Sign analysis of the fitted derivative over [t_first, t_last + horizon].
TrendReport trend_shape(const PolyFit& fit, double t_first, double t_last, double horizon_days);

/// ISO-8601 calendar date (YYYY-MM-DD) <-> days since 1970-01-01.
double days_from_iso(std::string_view date);
std::string iso_from_days(double days);

/// Reads `date_iso,volume_cc`.
VolumeSeries series_from_csv(std::string_view text);

/// Rows of kind observed / forecast:
/// `kind,date_iso,t_days,volume_cc,fitted_cc,low_cc,high_cc`.
std::string fit_to_csv(const VolumeSeries& series, const PolyFit& fit,
                       const std::vector<Forecast>& forecasts);

/// Human-readable diagnostics block.
std::string fit_report(const PolyFit& fit, const std::vector<Forecast>& forecasts,
                       const TrendReport* trend = nullptr);

struct GrowthSpec {
  int observations = 151;
  double start_day = 19723.0;  // 2024-01-01
  double step_days = 2.0;
  double baseline_cc = 10.0;
  double linear_cc_per_day = 0.02;
  double quadratic = 2e-4;
  double cubic = 5e-7;
  double noise_cc = 0.3;
};

/// Cubic growth plus Gaussian noise, volumes floored at 0.01 cc.
VolumeSeries synth_growth_series(std::uint64_t seed, const GrowthSpec& spec = {});

}  // namespace neurotwin::kinetics
