#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace neurotwin::svg {

/// Bare-bones SVG writer: polylines, rects, lines and text.
class Document {
 public:
  Document(double width, double height);

  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke = "none", double opacity = 1.0);
  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0);
  void polyline(std::span<const std::pair<double, double>> points, const std::string& stroke,
                double width = 1.5, const std::string& fill = "none", double opacity = 1.0);
  void text(double x, double y, const std::string& s, double size = 12.0,
            const std::string& anchor = "start", const std::string& fill = "#222");

  std::string str() const;
  double width() const { return width_; }
  double height() const { return height_; }

 private:
  double width_;
  double height_;
  std::string body_;
};

std::string escape(const std::string& s);

/// Maps data coordinates onto a plotting frame with axes and tick labels.
class Chart {
 public:
  Chart(std::string title, std::string x_label, std::string y_label, double width = 720,
        double height = 400);

  /// Data range; call before adding marks. Degenerate ranges are widened.
  void set_range(double x0, double x1, double y0, double y1);

  void series(std::span<const double> xs, std::span<const double> ys, const std::string& color,
              const std::string& label, double width = 1.5);
  void band(std::span<const double> xs, std::span<const double> lo, std::span<const double> hi,
            const std::string& color, const std::string& label);
  void bars(std::span<const double> xs, std::span<const double> ys, double bar_width,
            const std::string& color, const std::string& label);
  /// Categorical bar chart helper: labels along x at 0..n-1.
  void category_labels(const std::vector<std::string>& labels);

  std::string str();

 private:
  double px(double x) const;
  double py(double y) const;
  void legend_entry(const std::string& color, const std::string& label);

  Document doc_;
  std::string title_, x_label_, y_label_;
  double left_ = 70, right_ = 20, top_ = 40, bottom_ = 55;
  double x0_ = 0, x1_ = 1, y0_ = 0, y1_ = 1;
  bool categorical_ = false;
  std::vector<std::pair<std::string, std::string>> legend_;
};

/// Grid of patch values as a heatmap (0 = white, 1 = dark red), with an
/// optional outline on flagged cells.
std::string heatmap(std::span<const double> values, int rows, int cols, const std::string& title,
                    const std::vector<bool>& outlined = {});

}  // namespace neurotwin::svg
