#include "neurotwin/kinetics.hpp"

#include <Eigen/QR>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "neurotwin/csv.hpp"
#include "neurotwin/error.hpp"
#include "neurotwin/packet.hpp"

namespace neurotwin::kinetics {

namespace {

Eigen::VectorXd design_row(double u, int degree) {
  Eigen::VectorXd row(degree + 1);
  double p = 1.0;
  for (int k = 0; k <= degree; ++k) {
    row[k] = p;
    p *= u;
  }
  return row;
}

double horner(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

void VolumeSeries::validate() const {
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& o = observations[i];
    if (!std::isfinite(o.t_days) || !std::isfinite(o.volume_cc) || !(o.volume_cc > 0.0)) {
      throw InvalidSpecError("volume series: observation " + std::to_string(i) +
                             " must have finite t and positive finite volume");
    }
    if (i > 0 && !(o.t_days > observations[i - 1].t_days)) {
      throw InvalidSpecError("volume series: t must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
}

double PolyFit::evaluate(double t) const { return horner(scaled_coeffs, (t - t_center) / t_scale); }

double PolyFit::derivative(double t) const {
  const double u = (t - t_center) / t_scale;
  double acc = 0.0;
  for (int k = degree; k >= 1; --k) acc = acc * u + k * scaled_coeffs[static_cast<std::size_t>(k)];
  return acc / t_scale;
}

double PolyFit::leverage(double t) const {
  const Eigen::VectorXd x0 = design_row((t - t_center) / t_scale, degree);
  const Eigen::VectorXd z =
      r_factor.transpose().triangularView<Eigen::Lower>().solve(x0);
  return z.squaredNorm();
}

PolyFit fit(const VolumeSeries& series, int degree) {
  if (degree < 1) throw InvalidSpecError("fit: degree must be >= 1");
  series.validate();
  const std::size_t n = series.size();
  if (n < static_cast<std::size_t>(degree) + 2) {
    throw InvalidSpecError("fit: need at least degree + 2 = " + std::to_string(degree + 2) +
                           " observations, have " + std::to_string(n));
  }

  PolyFit f;
  f.degree = degree;
  f.n = n;
  const double t0 = series.observations.front().t_days;
  const double t1 = series.observations.back().t_days;
  f.t_center = 0.5 * (t0 + t1);
  f.t_scale = 0.5 * (t1 - t0);
  if (!(f.t_scale > 0.0)) throw DegenerateInputError("fit: singular design (zero time span)");

  const auto rows = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd x(rows, degree + 1);
  Eigen::VectorXd y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& o = series.observations[static_cast<std::size_t>(i)];
    x.row(i) = design_row((o.t_days - f.t_center) / f.t_scale, degree).transpose();
    y[i] = o.volume_cc;
  }

  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  f.r_factor = qr.matrixQR().topRows(degree + 1).triangularView<Eigen::Upper>();
  const Eigen::VectorXd diag = f.r_factor.diagonal().cwiseAbs();
  if (!(diag.minCoeff() > 1e-12 * diag.maxCoeff())) {
    throw DegenerateInputError("fit: singular design (duplicate or collapsed time points)");
  }
  const Eigen::VectorXd beta = qr.solve(y);
  f.scaled_coeffs.assign(beta.data(), beta.data() + beta.size());

  // Expand sum_k a_k ((t - c)/s)^k into powers of t.
  f.coeffs.assign(static_cast<std::size_t>(degree) + 1, 0.0);
  for (int k = 0; k <= degree; ++k) {
    const double ak = beta[k] / std::pow(f.t_scale, k);
    for (int j = 0; j <= k; ++j) {
      f.coeffs[static_cast<std::size_t>(j)] += ak * binomial(k, j) * std::pow(-f.t_center, k - j);
    }
  }

  const Eigen::VectorXd resid = y - x * beta;
  f.sse = resid.squaredNorm();
  bool constant = true;
  for (Eigen::Index i = 1; i < rows; ++i) constant = constant && (y[i] == y[0]);
  f.sst = constant ? 0.0 : (y.array() - y.mean()).square().sum();
  f.mse = f.sse / static_cast<double>(f.dof());
  f.std_error = std::sqrt(f.mse);

  if (f.sst == 0.0) {
    f.degenerate = true;
    const double tiny = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(y[0]);
    const bool exact = f.sse <= static_cast<double>(n) * tiny * tiny;
    f.r_squared = exact ? 1.0 : std::numeric_limits<double>::quiet_NaN();
    f.p_value_note = "F undefined (constant response)";
    return f;
  }

  f.r_squared = 1.0 - f.sse / f.sst;
  const double df1 = degree;
  const double df2 = static_cast<double>(f.dof());
  if (f.sse == 0.0) {
    f.f_statistic = std::numeric_limits<double>::infinity();
    f.p_value = 0.0;
  } else {
    f.f_statistic = ((f.sst - f.sse) / df1) / (f.sse / df2);
    const boost::math::fisher_f dist(df1, df2);
    f.p_value = *f.f_statistic > 0.0 ? boost::math::cdf(boost::math::complement(dist, *f.f_statistic)) : 1.0;
  }
  f.p_value_note = *f.p_value < 1e-4 ? "p < 0.0001" : "p = " + fmt("%.4f", *f.p_value);
  return f;
}

Forecast forecast(const PolyFit& fit, double t_future, double confidence) {
  if (!std::isfinite(t_future)) throw InvalidSpecError("forecast: t_future must be finite");
  if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidSpecError("forecast: confidence in (0, 1)");
  Forecast fc;
  fc.t_future = t_future;
  fc.confidence_level = confidence;
  fc.point_cc = fit.evaluate(t_future);
  const boost::math::students_t dist(static_cast<double>(fit.dof()));
  const double tq = boost::math::quantile(dist, 0.5 + confidence / 2.0);
  const double half = tq * fit.std_error * std::sqrt(1.0 + fit.leverage(t_future));
  fc.interval_low_cc = fc.point_cc - half;
  fc.interval_high_cc = fc.point_cc + half;
  return fc;
}

std::string_view to_string(Slope s) { return s == Slope::rising ? "rising" : "declining"; }

std::string_view to_string(TrendShape s) {
  switch (s) {
    case TrendShape::rising: return "rising";
    case TrendShape::peaking: return "peaking";
    case TrendShape::declining: return "declining";
    case TrendShape::rebounding: return "rebounding";
  }
  return "?";
}

TrendReport trend_shape(const PolyFit& fit, double t_first, double t_last, double horizon_days) {
  if (fit.degree < 2) throw InvalidSpecError("trend_shape: degree must be >= 2");
  const double a = t_first;
  const double b = t_last + std::max(0.0, horizon_days);
  if (!(b > a)) throw InvalidSpecError("trend_shape: empty horizon");

  // Bracket sign changes of the derivative on a fine grid, then bisect.
  constexpr int kGrid = 4096;
  std::vector<double> roots;
  double prev_t = a;
  double prev_d = fit.derivative(a);
  for (int i = 1; i <= kGrid; ++i) {
    const double t = a + (b - a) * i / kGrid;
    const double d = fit.derivative(t);
    if ((prev_d < 0.0 && d > 0.0) || (prev_d > 0.0 && d < 0.0)) {
      double lo = prev_t;
      double hi = t;
      double dlo = prev_d;
      for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double dm = fit.derivative(mid);
        if ((dm < 0.0) == (dlo < 0.0)) {
          lo = mid;
          dlo = dm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev_t = t;
    prev_d = d;
  }

  TrendReport rep;
  std::vector<double> edges{a};
  edges.insert(edges.end(), roots.begin(), roots.end());
  edges.push_back(b);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double mid = 0.5 * (edges[i] + edges[i + 1]);
    rep.segments.push_back({edges[i], edges[i + 1], fit.derivative(mid) >= 0.0 ? Slope::rising : Slope::declining});
  }
  for (std::size_t i = 0; i < roots.size(); ++i) {
    rep.turning_points.push_back({roots[i], rep.segments[i].slope == Slope::rising});
  }
  const Slope first = rep.segments.front().slope;
  const Slope last = rep.segments.back().slope;
  if (rep.segments.size() == 1) {
    rep.shape = first == Slope::rising ? TrendShape::rising : TrendShape::declining;
  } else if (last == Slope::declining) {
    rep.shape = first == Slope::rising ? TrendShape::peaking : TrendShape::declining;
  } else {
    rep.shape = first == Slope::declining ? TrendShape::rebounding : TrendShape::rising;
  }
  return rep;
}

double days_from_iso(std::string_view date) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  const std::string s(date);
  if (std::sscanf(s.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3 || s.size() != 10) {
    throw ParseError("not an ISO date (YYYY-MM-DD): '" + s + "'");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw ParseError("invalid calendar date: '" + s + "'");
  return static_cast<double>(std::chrono::sys_days{ymd}.time_since_epoch().count());
}

std::string iso_from_days(double days) {
  const std::chrono::sys_days sd{std::chrono::days{static_cast<long>(std::floor(days))}};
  const std::chrono::year_month_day ymd{sd};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

VolumeSeries series_from_csv(std::string_view text) {
  const auto table = io::parse_csv(text);
  const auto c_date = table.column("date_iso");
  const auto c_vol = table.column("volume_cc");
  VolumeSeries s;
  for (const auto& row : table.rows) {
    s.observations.push_back({days_from_iso(row[c_date]), io::parse_double(row[c_vol])});
  }
  s.validate();
  return s;
}

std::string fit_to_csv(const VolumeSeries& series, const PolyFit& fit, const std::vector<Forecast>& forecasts) {
  std::string out = "kind,date_iso,t_days,volume_cc,fitted_cc,low_cc,high_cc\n";
  const double conf = forecasts.empty() ? 0.95 : forecasts.front().confidence_level;
  for (const auto& o : series.observations) {
    const auto fc = forecast(fit, o.t_days, conf);
    out += "observed," + iso_from_days(o.t_days) + "," + fog::format_double(o.t_days) + "," +
           fog::format_double(o.volume_cc) + "," + fog::format_double(fc.point_cc) + "," +
           fog::format_double(fc.interval_low_cc) + "," + fog::format_double(fc.interval_high_cc) + "\n";
  }
  for (const auto& fc : forecasts) {
    out += "forecast," + iso_from_days(fc.t_future) + "," + fog::format_double(fc.t_future) + ",," +
           fog::format_double(fc.point_cc) + "," + fog::format_double(fc.interval_low_cc) + "," +
           fog::format_double(fc.interval_high_cc) + "\n";
  }
  return out;
}

std::string fit_report(const PolyFit& fit, const std::vector<Forecast>& forecasts, const TrendReport* trend) {
  std::string out;
  out += "model: polynomial degree " + std::to_string(fit.degree) + ", n = " + std::to_string(fit.n) + "\n";
  out += "coefficients (ascending powers of t_days):";
  for (double c : fit.coeffs) out += " " + fmt("%.10e", c);
  out += "\n";
  out += "r_squared: " + fmt("%.12f", fit.r_squared) + "\n";
  out += "f_statistic: " + (fit.f_statistic ? fmt("%.6g", *fit.f_statistic) : std::string("undefined")) + "\n";
  out += "p_value: " + fit.p_value_note + "\n";
  out += "sse: " + fmt("%.6g", fit.sse) + "\n";
  out += "mse: " + fmt("%.6g", fit.mse) + "\n";
  out += "std_error: " + fmt("%.6g", fit.std_error) + "\n";
  if (fit.degenerate) out += "diagnostic: constant response\n";
  for (const auto& fc : forecasts) {
    out += "forecast " + iso_from_days(fc.t_future) + ": " + fmt("%.1f", fc.point_cc) + " cc [" +
           fmt("%.1f", fc.interval_low_cc) + ", " + fmt("%.1f", fc.interval_high_cc) + "] at " +
           fmt("%.0f", fc.confidence_level * 100.0) + "%\n";
  }
  if (trend != nullptr) {
    out += "trend: " + std::string(to_string(trend->shape)) + "\n";
    for (const auto& tp : trend->turning_points) {
      out += std::string(tp.is_peak ? "peak" : "trough") + " at " + iso_from_days(tp.t_days) + " (t = " +
             fmt("%.3f", tp.t_days) + ")\n";
    }
  }
  return out;
}

VolumeSeries synth_growth_series(std::uint64_t seed, const GrowthSpec& spec) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  VolumeSeries s;
  for (int i = 0; i < spec.observations; ++i) {
    const double dt = i * spec.step_days;
    const double v = spec.baseline_cc + spec.linear_cc_per_day * dt + spec.quadratic * dt * dt +
                     spec.cubic * dt * dt * dt + spec.noise_cc * noise(rng);
    s.observations.push_back({spec.start_day + dt, std::max(v, 0.01)});
  }
  return s;
}

}  // namespace neurotwin::kinetics
