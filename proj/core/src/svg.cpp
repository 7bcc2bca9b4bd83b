#include "neurotwin/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "neurotwin/error.hpp"

namespace neurotwin::svg {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

Document::Document(double width, double height) : width_(width), height_(height) {}

void Document::rect(double x, double y, double w, double h, const std::string& fill,
                    const std::string& stroke, double opacity) {
  body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
           "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\" fill-opacity=\"" + num(opacity) + "\"/>\n";
}

void Document::line(double x1, double y1, double x2, double y2, const std::string& stroke, double width) {
  body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
           "\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) + "\"/>\n";
}

void Document::polyline(std::span<const std::pair<double, double>> points, const std::string& stroke,
                        double width, const std::string& fill, double opacity) {
  body_ += "<polyline fill=\"" + fill + "\" fill-opacity=\"" + num(opacity) + "\" stroke=\"" + stroke +
           "\" stroke-width=\"" + num(width) + "\" points=\"";
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i > 0) body_ += ' ';
    body_ += num(points[i].first) + "," + num(points[i].second);
  }
  body_ += "\"/>\n";
}

void Document::text(double x, double y, const std::string& s, double size, const std::string& anchor,
                    const std::string& fill) {
  body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"" +
           num(size) + "\" text-anchor=\"" + anchor + "\" fill=\"" + fill + "\">" + escape(s) + "</text>\n";
}

std::string Document::str() const {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width_) + "\" height=\"" + num(height_) +
         "\" viewBox=\"0 0 " + num(width_) + " " + num(height_) + "\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + body_ + "</svg>\n";
}

Chart::Chart(std::string title, std::string x_label, std::string y_label, double width, double height)
    : doc_(width, height), title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void Chart::set_range(double x0, double x1, double y0, double y1) {
  if (!(std::isfinite(x0) && std::isfinite(x1) && std::isfinite(y0) && std::isfinite(y1))) {
    throw NumericError("chart: non-finite range");
  }
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) {
    y0 -= 0.5;
    y1 = y0 + 1.0;
  }
  x0_ = x0;
  x1_ = x1;
  y0_ = y0;
  y1_ = y1;
}

double Chart::px(double x) const {
  return left_ + (x - x0_) / (x1_ - x0_) * (doc_.width() - left_ - right_);
}

double Chart::py(double y) const {
  return doc_.height() - bottom_ - (y - y0_) / (y1_ - y0_) * (doc_.height() - top_ - bottom_);
}

void Chart::legend_entry(const std::string& color, const std::string& label) {
  if (!label.empty()) legend_.emplace_back(color, label);
}

void Chart::series(std::span<const double> xs, std::span<const double> ys, const std::string& color,
                   const std::string& label, double width) {
  if (xs.size() != ys.size()) throw ShapeError("chart series: x/y length mismatch");
  std::vector<std::pair<double, double>> pts;
  pts.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) pts.emplace_back(px(xs[i]), py(ys[i]));
  doc_.polyline(pts, color, width);
  legend_entry(color, label);
}

void Chart::band(std::span<const double> xs, std::span<const double> lo, std::span<const double> hi,
                 const std::string& color, const std::string& label) {
  if (xs.size() != lo.size() || xs.size() != hi.size()) throw ShapeError("chart band: length mismatch");
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < xs.size(); ++i) pts.emplace_back(px(xs[i]), py(hi[i]));
  for (std::size_t i = xs.size(); i-- > 0;) pts.emplace_back(px(xs[i]), py(lo[i]));
  if (!pts.empty()) pts.push_back(pts.front());
  doc_.polyline(pts, "none", 0.0, color, 0.25);
  legend_entry(color, label);
}

void Chart::bars(std::span<const double> xs, std::span<const double> ys, double bar_width,
                 const std::string& color, const std::string& label) {
  if (xs.size() != ys.size()) throw ShapeError("chart bars: x/y length mismatch");
  const double base = py(std::max(y0_, 0.0));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = px(xs[i] - bar_width / 2);
    const double w = px(xs[i] + bar_width / 2) - x;
    const double top = py(ys[i]);
    doc_.rect(x, std::min(top, base), w, std::abs(base - top), color);
  }
  legend_entry(color, label);
}

void Chart::category_labels(const std::vector<std::string>& labels) {
  categorical_ = true;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    doc_.text(px(static_cast<double>(i)), doc_.height() - bottom_ + 16, labels[i], 11, "middle");
  }
}

std::string Chart::str() {
  const double w = doc_.width();
  const double h = doc_.height();
  doc_.line(left_, h - bottom_, w - right_, h - bottom_, "#444");
  doc_.line(left_, top_, left_, h - bottom_, "#444");
  for (int i = 0; i <= 4; ++i) {
    const double yv = y0_ + (y1_ - y0_) * i / 4.0;
    doc_.line(left_ - 4, py(yv), left_, py(yv), "#444");
    doc_.text(left_ - 6, py(yv) + 4, tick(yv), 10, "end");
    if (!categorical_) {
      const double xv = x0_ + (x1_ - x0_) * i / 4.0;
      doc_.line(px(xv), h - bottom_, px(xv), h - bottom_ + 4, "#444");
      doc_.text(px(xv), h - bottom_ + 16, tick(xv), 10, "middle");
    }
  }
  doc_.text(w / 2, 22, title_, 14, "middle");
  doc_.text((left_ + w - right_) / 2, h - 12, x_label_, 12, "middle");
  doc_.text(14, (top_ + h - bottom_) / 2, y_label_, 12, "start");
  double ly = top_ + 8;
  for (const auto& [color, label] : legend_) {
    doc_.rect(w - right_ - 150, ly - 9, 12, 10, color);
    doc_.text(w - right_ - 134, ly, label, 11);
    ly += 16;
  }
  return doc_.str();
}

std::string heatmap(std::span<const double> values, int rows, int cols, const std::string& title,
                    const std::vector<bool>& outlined) {
  if (rows <= 0 || cols <= 0 || values.size() != static_cast<std::size_t>(rows * cols)) {
    throw ShapeError("heatmap: values do not match grid");
  }
  if (!outlined.empty() && outlined.size() != values.size()) throw ShapeError("heatmap: outline mask size");
  const double cell = 40.0;
  Document doc(cols * cell + 20, rows * cell + 50);
  doc.text(doc.width() / 2, 22, title, 14, "middle");
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const auto i = static_cast<std::size_t>(r * cols + c);
      const double v = std::isfinite(values[i]) ? std::clamp(values[i], 0.0, 1.0) : 0.0;
      const int g = static_cast<int>(std::lround(255 * (1 - v)));
      char color[16];
      std::snprintf(color, sizeof color, "#%02x%02x%02x", 180 + static_cast<int>(std::lround(75 * (1 - v))), g, g);
      const bool mark = !outlined.empty() && outlined[i];
      doc.rect(10 + c * cell, 35 + r * cell, cell, cell, color, mark ? "#000" : "#ccc");
      doc.text(10 + c * cell + cell / 2, 35 + r * cell + cell / 2 + 4, tick(values[i]), 9, "middle");
    }
  }
  return doc.str();
}

}  // namespace neurotwin::svg
