#include <algorithm>
#include <cmath>
#include <map>

#include "commands.hpp"
#include "neurotwin/csv.hpp"
#include "neurotwin/error.hpp"
#include "neurotwin/features.hpp"
#include "neurotwin/svg.hpp"

namespace nt_cli {

namespace nt = neurotwin;

namespace {

const std::vector<std::string> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::vector<double> col(const nt::io::CsvTable& t, const std::string& name) {
  const auto c = t.column(name);
  std::vector<double> v;
  for (const auto& r : t.rows) v.push_back(r[c].empty() ? std::nan("") : nt::io::parse_double(r[c]));
  return v;
}

std::pair<double, double> finite_range(std::initializer_list<const std::vector<double>*> vs) {
  double lo = INFINITY;
  double hi = -INFINITY;
  for (const auto* v : vs) {
    for (double x : *v) {
      if (std::isfinite(x)) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    }
  }
  if (!std::isfinite(lo)) throw nt::DegenerateInputError("plot: no finite values");
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

std::string plot_signal(const nt::io::CsvTable& t, const std::string& title) {
  const auto ts = col(t, "t_s");
  std::vector<std::vector<double>> cols;
  std::vector<std::string> names;
  for (const auto& h : t.header) {
    if (h == "t_s") continue;
    names.push_back(h);
    cols.push_back(col(t, h));
  }
  double lo = INFINITY;
  double hi = -INFINITY;
  for (const auto& c : cols) {
    const auto [a, b] = finite_range({&c});
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  nt::svg::Chart chart(title.empty() ? "EEG channel" : title, "time (s)", "uV", 900, 400);
  chart.set_range(ts.front(), ts.back(), lo, hi);
  for (std::size_t i = 0; i < cols.size(); ++i) chart.series(ts, cols[i], kPalette[i % kPalette.size()], names[i], 1.0);
  return chart.str();
}

std::string plot_bands(const nt::io::CsvTable& t, const std::string& title) {
  const std::vector<std::string> bands{"delta_pw", "theta_pw", "alpha_pw", "beta_pw", "gamma_pw"};
  std::vector<double> xs;
  std::vector<double> means;
  for (std::size_t b = 0; b < bands.size(); ++b) {
    const auto v = col(t, bands[b]);
    double s = 0.0;
    for (double x : v) s += x;
    xs.push_back(static_cast<double>(b));
    means.push_back(v.empty() ? 0.0 : s / static_cast<double>(v.size()));
  }
  nt::svg::Chart chart(title.empty() ? "Mean band power" : title, "band", "power (uV^2)");
  chart.set_range(-0.6, 4.6, 0.0, *std::max_element(means.begin(), means.end()) * 1.1);
  chart.bars(xs, means, 0.6, kPalette[0], "");
  chart.category_labels({"Delta", "Theta", "Alpha", "Beta", "Gamma"});
  return chart.str();
}

std::string plot_kinetics(const nt::io::CsvTable& t, const std::string& title) {
  const auto kind_c = t.column("kind");
  const auto td = col(t, "t_days");
  const auto vol = col(t, "volume_cc");
  const auto fitted = col(t, "fitted_cc");
  const auto lo = col(t, "low_cc");
  const auto hi = col(t, "high_cc");
  std::vector<double> ox, oy, fx, fy, bx, blo, bhi;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    fx.push_back(td[i]);
    fy.push_back(fitted[i]);
    if (t.rows[i][kind_c] == "observed") {
      ox.push_back(td[i]);
      oy.push_back(vol[i]);
    } else {
      bx.push_back(td[i]);
      blo.push_back(lo[i]);
      bhi.push_back(hi[i]);
    }
  }
  const auto [y0, y1] = finite_range({&vol, &fitted, &lo, &hi});
  nt::svg::Chart chart(title.empty() ? "Tumor volume" : title, "days since epoch", "volume (cc)", 900, 420);
  chart.set_range(td.front(), td.back(), std::min(0.0, y0), y1);
  const double width = ox.size() > 1 ? (ox.back() - ox.front()) / static_cast<double>(ox.size()) * 0.6 : 1.0;
  chart.bars(ox, oy, width, "#9ecae1", "observed");
  if (!bx.empty()) chart.band(bx, blo, bhi, "#fdae6b", "prediction interval");
  chart.series(fx, fy, kPalette[1], "degree-3 fit", 2.0);
  return chart.str();
}

std::string plot_risk(const nt::io::CsvTable& t, const std::string& title) {
  const auto dev_c = t.column("device_id");
  const auto tms = col(t, "t_ms");
  const auto risk = col(t, "fused_risk");
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_dev;
  const double t0 = tms.empty() ? 0.0 : *std::min_element(tms.begin(), tms.end());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    auto& [xs, ys] = by_dev[t.rows[i][dev_c]];
    xs.push_back((tms[i] - t0) / 1000.0);
    ys.push_back(risk[i]);
  }
  const auto [x0, x1] = finite_range({&tms});
  nt::svg::Chart chart(title.empty() ? "Fused risk" : title, "time (s)", "risk", 720, 360);
  chart.set_range(0.0, std::max(1.0, (x1 - x0) / 1000.0), 0.0, 1.0);
  std::size_t i = 0;
  for (const auto& [dev, xy] : by_dev) {
    auto xs = xy.first;
    auto ys = xy.second;
    if (xs.size() == 1) {
      xs.push_back(xs.front() + 0.5);
      ys.push_back(ys.front());
    }
    chart.series(xs, ys, kPalette[i++ % kPalette.size()], dev, 2.0);
  }
  return chart.str();
}

std::string plot_patches(const nt::io::CsvTable& t, const std::string& title) {
  const auto rows = col(t, "row");
  const auto cols = col(t, "col");
  const auto probs = col(t, "prob");
  const auto above = col(t, "above_theta");
  bool multi_scan = false;
  for (const auto& h : t.header) multi_scan = multi_scan || h == "scan";
  std::vector<double> vals;
  std::vector<bool> mask;
  int nr = 0;
  int nc = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (multi_scan && t.rows[i][t.column("scan")] != "0") continue;
    vals.push_back(probs[i]);
    mask.push_back(above[i] != 0.0);
    nr = std::max(nr, static_cast<int>(rows[i]) + 1);
    nc = std::max(nc, static_cast<int>(cols[i]) + 1);
  }
  return nt::svg::heatmap(vals, nr, nc, title.empty() ? "Patch tumor probability" : title, mask);
}

std::string plot_training(const nt::io::CsvTable& t, const std::string& title) {
  const auto step = col(t, "step");
  const auto ent = col(t, "mean_entropy");
  const auto ce = col(t, "ce");
  const auto [y0, y1] = finite_range({&ent, &ce});
  nt::svg::Chart chart(title.empty() ? "Training" : title, "step", "value");
  chart.set_range(step.front(), step.back(), std::min(0.0, y0), y1);
  chart.series(step, ent, kPalette[0], "mean attention entropy");
  chart.series(step, ce, kPalette[1], "cross-entropy");
  return chart.str();
}

}  // namespace

std::string render_plot(const std::string& kind, const std::string& csv_text, const std::string& title) {
  const auto t = nt::io::parse_csv(csv_text);
  if (t.rows.empty()) throw nt::DegenerateInputError("plot: input has no rows");
  if (kind == "signal") return plot_signal(t, title);
  if (kind == "bands") return plot_bands(t, title);
  if (kind == "kinetics") return plot_kinetics(t, title);
  if (kind == "risk") return plot_risk(t, title);
  if (kind == "patches") return plot_patches(t, title);
  if (kind == "training") return plot_training(t, title);
  usage_error("unknown plot kind '" + kind + "'");
}

}  // namespace nt_cli
