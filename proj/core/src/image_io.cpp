#include "neurotwin/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <vector>

#include "neurotwin/csv.hpp"
#include "neurotwin/error.hpp"
#include "neurotwin/packet.hpp"

namespace neurotwin::io {

namespace {

struct PgmCursor {
  std::string_view s;
  std::size_t pos = 0;

  void skip_space_and_comments() {
    while (pos < s.size()) {
      if (s[pos] == '#') {
        while (pos < s.size() && s[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  }

  long number() {
    skip_space_and_comments();
    const std::size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (start == pos) throw ParseError("pgm: expected a number at byte " + std::to_string(start));
    return std::stol(std::string(s.substr(start, pos - start)));
  }
};

}  // namespace

Eigen::MatrixXd parse_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
    throw ParseError("pgm: missing P2/P5 magic");
  }
  const bool binary = bytes[1] == '5';
  PgmCursor c{bytes, 2};
  const long width = c.number();
  const long height = c.number();
  const long maxval = c.number();
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) throw ParseError("pgm: bad header");
  Eigen::MatrixXd img(height, width);
  if (binary) {
    ++c.pos;  // single whitespace after maxval
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    const std::size_t need = static_cast<std::size_t>(width * height) * bpp;
    if (bytes.size() < c.pos + need) throw ParseError("pgm: truncated pixel data");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + c.pos);
    for (long r = 0; r < height; ++r) {
      for (long col = 0; col < width; ++col) {
        const std::size_t i = static_cast<std::size_t>(r * width + col) * bpp;
        const unsigned v = bpp == 2 ? (unsigned{p[i]} << 8) | p[i + 1] : p[i];
        img(r, col) = static_cast<double>(v) / static_cast<double>(maxval);
      }
    }
  } else {
    for (long r = 0; r < height; ++r) {
      for (long col = 0; col < width; ++col) {
        const long v = c.number();
        if (v > maxval) throw ParseError("pgm: sample exceeds maxval");
        img(r, col) = static_cast<double>(v) / static_cast<double>(maxval);
      }
    }
  }
  return img;
}

std::string encode_pgm(const Eigen::MatrixXd& image) {
  std::string out = "P5\n" + std::to_string(image.cols()) + " " + std::to_string(image.rows()) + "\n255\n";
  for (Eigen::Index r = 0; r < image.rows(); ++r) {
    for (Eigen::Index c = 0; c < image.cols(); ++c) {
      const double v = std::isfinite(image(r, c)) ? std::clamp(image(r, c), 0.0, 1.0) : 0.0;
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
  return out;
}

Eigen::MatrixXd parse_matrix_csv(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t s = 0;
    for (;;) {
      const auto comma = line.find(',', s);
      row.push_back(parse_double(line.substr(s, comma - s)));
      if (comma == std::string_view::npos) break;
      s = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError("matrix csv: ragged row " + std::to_string(rows.size() + 1));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("matrix csv: empty input");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  return m;
}

std::string matrix_to_csv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ',';
      out += fog::format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

Eigen::MatrixXd load_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pgm") return parse_pgm(read_text(path));
  if (ext == ".csv") return parse_matrix_csv(read_text(path));
  throw InvalidSpecError("unsupported image format '" + ext + "' (expected .pgm or .csv)");
}

void save_image(const std::filesystem::path& path, const Eigen::MatrixXd& image) {
  const auto ext = path.extension().string();
  if (ext == ".pgm") {
    write_text(path, encode_pgm(image));
  } else if (ext == ".csv") {
    write_text(path, matrix_to_csv(image));
  } else {
    throw InvalidSpecError("unsupported image format '" + ext + "' (expected .pgm or .csv)");
  }
}

Eigen::MatrixXd resize_bilinear(const Eigen::MatrixXd& image, int rows, int cols) {
  if (rows <= 0 || cols <= 0 || image.size() == 0) throw ShapeError("resize: empty shape");
  Eigen::MatrixXd out(rows, cols);
  const double sy = static_cast<double>(image.rows()) / rows;
  const double sx = static_cast<double>(image.cols()) / cols;
  const auto maxr = static_cast<double>(image.rows() - 1);
  const auto maxc = static_cast<double>(image.cols() - 1);
  for (int r = 0; r < rows; ++r) {
    const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, maxr);
    const auto y0 = static_cast<Eigen::Index>(std::floor(y));
    const auto y1 = std::min<Eigen::Index>(y0 + 1, image.rows() - 1);
    const double fy = y - static_cast<double>(y0);
    for (int c = 0; c < cols; ++c) {
      const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, maxc);
      const auto x0 = static_cast<Eigen::Index>(std::floor(x));
      const auto x1 = std::min<Eigen::Index>(x0 + 1, image.cols() - 1);
      const double fx = x - static_cast<double>(x0);
      out(r, c) = (1 - fy) * ((1 - fx) * image(y0, x0) + fx * image(y0, x1)) +
                  fy * ((1 - fx) * image(y1, x0) + fx * image(y1, x1));
    }
  }
  return out;
}

}  // namespace neurotwin::io
