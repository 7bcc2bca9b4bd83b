#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "neurotwin/error.hpp"
#include "neurotwin/kinetics.hpp"
#include "ols_oracle.hpp"

using namespace neurotwin;
using namespace neurotwin::kinetics;

namespace {

VolumeSeries from_fn(const std::vector<double>& ts, double (*f)(double)) {
  VolumeSeries s;
  for (double t : ts) s.observations.push_back({t, f(t)});
  return s;
}

std::vector<double> one_to(int n) {
  std::vector<double> t;
  for (int i = 1; i <= n; ++i) t.push_back(i);
  return t;
}

double cube(double t) { return t * t * t; }

std::vector<double> ts_of(const VolumeSeries& s) {
  std::vector<double> v;
  for (const auto& o : s.observations) v.push_back(o.t_days);
  return v;
}

std::vector<double> ys_of(const VolumeSeries& s) {
  std::vector<double> v;
  for (const auto& o : s.observations) v.push_back(o.volume_cc);
  return v;
}

}  // namespace

TEST(Fit, ExactCubic) {
  const auto s = from_fn(one_to(10), cube);
  const auto f = fit(s);
  ASSERT_EQ(f.coeffs.size(), 4u);
  EXPECT_NEAR(f.coeffs[0], 0, 1e-8);
  EXPECT_NEAR(f.coeffs[1], 0, 1e-8);
  EXPECT_NEAR(f.coeffs[2], 0, 1e-8);
  EXPECT_NEAR(f.coeffs[3], 1, 1e-8);
  EXPECT_GE(f.r_squared, 1 - 1e-10);
  EXPECT_LE(f.sse, 1e-8);
  EXPECT_NEAR(forecast(f, 12).point_cc, 1728, 1e-6);
  const auto at_last = forecast(f, 10);
  EXPECT_LE(at_last.interval_high_cc - at_last.interval_low_cc, 1e-6);
}

TEST(Fit, Diagnostics) {
  const auto s = synth_growth_series(3);
  const auto f = fit(s);
  EXPECT_EQ(f.n, 151u);
  EXPECT_EQ(f.dof(), 147u);
  EXPECT_NEAR(f.mse, f.sse / 147, 1e-12 * f.mse);
  EXPECT_NEAR(f.std_error, std::sqrt(f.mse), 1e-15 * f.std_error + 1e-300);
  EXPECT_NEAR(f.r_squared, 1 - f.sse / f.sst, 1e-12);
  EXPECT_GE(f.r_squared, 0.0);
  EXPECT_LE(f.r_squared, 1.0);
  ASSERT_TRUE(f.f_statistic.has_value());
  EXPECT_NEAR(*f.f_statistic, ((f.sst - f.sse) / 3) / (f.sse / 147), 1e-9 * *f.f_statistic);
  ASSERT_TRUE(f.p_value.has_value());
  EXPECT_LT(*f.p_value, 1e-4);
  EXPECT_EQ(f.p_value_note, "p < 0.0001");
}

TEST(Fit, ConstantResponseIsDegenerate) {
  VolumeSeries s;
  for (int i = 0; i < 8; ++i) s.observations.push_back({100.0 + i, 4.2});
  const auto f = fit(s);
  EXPECT_TRUE(f.degenerate);
  EXPECT_EQ(f.sst, 0.0);
  EXPECT_FALSE(f.f_statistic.has_value());
  EXPECT_EQ(f.r_squared, 1.0);
  EXPECT_NEAR(f.evaluate(103.5), 4.2, 1e-12);
}

TEST(Fit, Errors) {
  EXPECT_THROW(fit(from_fn(one_to(4), cube)), InvalidSpecError);
  EXPECT_THROW(fit(from_fn(one_to(10), cube), 0), InvalidSpecError);
  VolumeSeries dup = from_fn(one_to(6), cube);
  dup.observations[3].t_days = dup.observations[2].t_days;
  EXPECT_THROW(fit(dup), InvalidSpecError);
  VolumeSeries neg = from_fn(one_to(6), cube);
  neg.observations[0].volume_cc = -1;
  EXPECT_THROW(fit(neg), InvalidSpecError);
  // Four points collapsed within 1e-9 days plus one far away: numerically rank 2.
  VolumeSeries collapsed;
  for (int i = 0; i < 4; ++i) collapsed.observations.push_back({1e-10 * i, 1.0 + i});
  collapsed.observations.push_back({1.0, 2.0});
  EXPECT_THROW(fit(collapsed), DegenerateInputError);
}

TEST(Fit, MatchesNormalEquationsOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    GrowthSpec spec;
    spec.noise_cc = 0.5 + trial * 0.1;
    const auto s = synth_growth_series(rng(), spec);
    const auto f = fit(s);
    const auto o = nt_test::normal_equations_fit(ts_of(s), ys_of(s), 3, f.t_center, f.t_scale);
    long double scale = 0;
    for (auto c : o.coeffs) scale = std::max(scale, std::fabs(c));
    for (int k = 0; k < 4; ++k) {
      EXPECT_NEAR(f.scaled_coeffs[k], static_cast<double>(o.coeffs[k]), 1e-6 * static_cast<double>(scale));
    }
    EXPECT_NEAR(f.sse / static_cast<double>(o.sse), 1.0, 1e-8);
  }
}

TEST(Fit, ResidualsOrthogonalToDesign) {
  const auto s = synth_growth_series(11);
  const auto f = fit(s);
  for (int k = 0; k <= 3; ++k) {
    double dot = 0, norm = 0;
    for (const auto& o : s.observations) {
      const double u = (o.t_days - f.t_center) / f.t_scale;
      const double col = std::pow(u, k);
      dot += (o.volume_cc - f.evaluate(o.t_days)) * col;
      norm += col * col;
    }
    EXPECT_LT(std::abs(dot) / std::sqrt(norm), 1e-8) << k;
  }
}

TEST(Fit, VolumeShiftMovesInterceptOnly) {
  const auto s = synth_growth_series(12);
  const auto f = fit(s);
  auto shifted = s;
  const double c = 25.0;
  for (auto& o : shifted.observations) o.volume_cc += c;
  const auto g = fit(shifted);
  EXPECT_NEAR(g.scaled_coeffs[0], f.scaled_coeffs[0] + c, 1e-9);
  for (int k = 1; k <= 3; ++k) EXPECT_NEAR(g.scaled_coeffs[k], f.scaled_coeffs[k], 1e-9);
  EXPECT_NEAR(g.r_squared, f.r_squared, 1e-9);
}

TEST(Fit, AffineTimeReparameterization) {
  const auto s = synth_growth_series(13);
  const auto f = fit(s);
  VolumeSeries r;
  for (const auto& o : s.observations) r.observations.push_back({0.5 * o.t_days - 9000.0, o.volume_cc});
  const auto g = fit(r);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_NEAR(f.evaluate(s.observations[i].t_days), g.evaluate(r.observations[i].t_days), 1e-8);
  }
}

TEST(Fit, NestedModelsSse) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = synth_growth_series(rng());
    EXPECT_LE(fit(s, 3).sse, fit(s, 2).sse * (1 + 1e-12));
    EXPECT_LE(fit(s, 2).sse, fit(s, 1).sse * (1 + 1e-12));
  }
}

TEST(Forecast, IntervalsWiden) {
  const auto s = synth_growth_series(15);
  const auto f = fit(s);
  const double t_max = s.observations.back().t_days;
  const auto near = forecast(f, t_max + 10);
  const auto far = forecast(f, t_max + 100);
  EXPECT_GT(far.interval_high_cc - far.interval_low_cc, near.interval_high_cc - near.interval_low_cc);
  double prev = 0;
  for (int d = 0; d <= 200; d += 5) {
    const auto fc = forecast(f, t_max + d);
    EXPECT_LE(fc.interval_low_cc, fc.point_cc);
    EXPECT_LE(fc.point_cc, fc.interval_high_cc);
    const double w = fc.interval_high_cc - fc.interval_low_cc;
    EXPECT_GE(w, prev);
    prev = w;
  }
  EXPECT_GT(forecast(f, t_max, 0.99).interval_high_cc, forecast(f, t_max, 0.9).interval_high_cc);
  EXPECT_THROW(forecast(f, NAN), InvalidSpecError);
  EXPECT_THROW(forecast(f, t_max, 1.0), InvalidSpecError);
}

TEST(Forecast, LeverageMatchesOracle) {
  // Hat value for a degree-1 fit: 1/n + (t - mean)^2 / Sxx.
  VolumeSeries s;
  const std::vector<double> ts{0, 1, 3, 4, 7, 9};
  for (double t : ts) s.observations.push_back({t, 1 + t + 0.1 * std::sin(t)});
  const auto f = fit(s, 1);
  double mean = 0;
  for (double t : ts) mean += t;
  mean /= ts.size();
  double sxx = 0;
  for (double t : ts) sxx += (t - mean) * (t - mean);
  for (double t : {0.0, 5.0, 20.0}) EXPECT_NEAR(f.leverage(t), 1.0 / ts.size() + (t - mean) * (t - mean) / sxx, 1e-12);
}

TEST(Trend, RisingCubic) {
  VolumeSeries s;
  for (int i = 1; i <= 10; ++i) s.observations.push_back({double(i), double(i * i * i) + 1});
  const auto f = fit(s);
  const auto r = trend_shape(f, 1, 10, 30);
  EXPECT_EQ(r.shape, TrendShape::rising);
  EXPECT_TRUE(r.turning_points.empty());
}

TEST(Trend, ParabolaPeaksAtVertex) {
  VolumeSeries s;
  for (int i = 0; i <= 12; ++i) {
    const double t = i * 0.8;
    s.observations.push_back({t, 60 - (t - 4.3) * (t - 4.3)});
  }
  const auto f = fit(s, 2);
  // Analytic vertex of the fitted quadratic: -c1 / (2 c2).
  const double vertex = -f.coeffs[1] / (2 * f.coeffs[2]);
  EXPECT_NEAR(vertex, 4.3, 1e-9);
  const auto r = trend_shape(f, 0, 9.6, 0);
  EXPECT_EQ(r.shape, TrendShape::peaking);
  ASSERT_EQ(r.turning_points.size(), 1u);
  EXPECT_TRUE(r.turning_points[0].is_peak);
  EXPECT_NEAR(r.turning_points[0].t_days, vertex, 1e-6);
  ASSERT_EQ(r.segments.size(), 2u);
  EXPECT_EQ(r.segments[0].slope, Slope::rising);
  EXPECT_EQ(r.segments[1].slope, Slope::declining);
}

TEST(Trend, DegreeOneRejected) {
  const auto f = fit(from_fn(one_to(6), cube), 1);
  EXPECT_THROW(trend_shape(f, 1, 6, 10), InvalidSpecError);
}

TEST(Dates, IsoRoundTrip) {
  EXPECT_EQ(days_from_iso("1970-01-01"), 0.0);
  EXPECT_EQ(days_from_iso("2024-01-01"), 19723.0);
  EXPECT_EQ(iso_from_days(20382), "2025-10-21");
  for (double d : {0.0, 11016.0, 19723.0, 20500.0}) EXPECT_EQ(days_from_iso(iso_from_days(d)), d);
  EXPECT_THROW(days_from_iso("2024-02-30"), ParseError);
  EXPECT_THROW(days_from_iso("24/01/01"), ParseError);
}

TEST(Io, CsvRoundTripAndReport) {
  const auto s = synth_growth_series(16, GrowthSpec{.observations = 20});
  std::string csv = "date_iso,volume_cc\n";
  for (const auto& o : s.observations) csv += iso_from_days(o.t_days) + "," + std::to_string(o.volume_cc) + "\n";
  const auto back = series_from_csv(csv);
  ASSERT_EQ(back.size(), 20u);
  EXPECT_EQ(back.observations[3].t_days, s.observations[3].t_days);
  const auto f = fit(back);
  std::vector<Forecast> fcs{forecast(f, back.observations.back().t_days + 30)};
  const auto out = fit_to_csv(back, f, fcs);
  EXPECT_EQ(out.rfind("kind,date_iso,t_days,volume_cc,fitted_cc,low_cc,high_cc\n", 0), 0u);
  EXPECT_NE(out.find("\nforecast,"), std::string::npos);
  const auto trend = trend_shape(f, back.observations.front().t_days, back.observations.back().t_days, 30);
  const auto rep = fit_report(f, fcs, &trend);
  EXPECT_NE(rep.find("r_squared"), std::string::npos);
}

TEST(Synth, Deterministic) {
  const auto a = synth_growth_series(5);
  const auto b = synth_growth_series(5);
  EXPECT_EQ(ys_of(a), ys_of(b));
  EXPECT_NO_THROW(a.validate());
}
