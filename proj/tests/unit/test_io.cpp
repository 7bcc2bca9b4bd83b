#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "neurotwin/csv.hpp"
#include "neurotwin/error.hpp"
#include "neurotwin/image_io.hpp"
#include "neurotwin/svg.hpp"
#include "neurotwin/tensor_file.hpp"

using namespace neurotwin;
using namespace neurotwin::io;

TEST(Csv, ParseBasics) {
  const auto t = parse_csv("a,b\r\n1,2\n\n3,4\n");
  ASSERT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][t.column("b")], "4");
  EXPECT_THROW(t.column("c"), ParseError);
  EXPECT_THROW(parse_csv("a,b\n1,2,3\n"), ParseError);
  EXPECT_DOUBLE_EQ(parse_double("-1.5e3"), -1500.0);
  EXPECT_THROW(parse_double("1.5x"), ParseError);
  EXPECT_THROW(parse_double(""), ParseError);
  EXPECT_EQ(parse_int("42"), 42);
  EXPECT_THROW(parse_int("4.2"), ParseError);
  EXPECT_EQ(join({"x", "y", "z"}), "x,y,z");
}

TEST(TensorFile, RoundTripExact) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1e3);
  Eigen::MatrixXd a(3, 5);
  for (int i = 0; i < a.size(); ++i) a(i) = n(rng) * std::pow(10.0, i % 7 - 3);
  TensorFile tf;
  tf.set_meta("kind", "test model");
  tf.add("a", a);
  tf.add("empty_row", Eigen::MatrixXd::Zero(1, 2));
  const auto back = TensorFile::parse(tf.serialize());
  EXPECT_EQ(back.meta("kind"), "test model");
  EXPECT_EQ(back.get("a"), a);
  EXPECT_THROW(back.get("a", 5, 3), ShapeError);
  EXPECT_FALSE(back.contains("zz"));
  EXPECT_THROW(back.get("zz"), ParseError);
  EXPECT_THROW(TensorFile::parse("garbage"), ParseError);
}

TEST(Pgm, AsciiAndBinary) {
  const auto p2 = parse_pgm("P2\n# note\n3 2\n4\n0 1 2\n3 4 4\n");
  ASSERT_EQ(p2.rows(), 2);
  ASSERT_EQ(p2.cols(), 3);
  EXPECT_DOUBLE_EQ(p2(0, 2), 0.5);
  EXPECT_DOUBLE_EQ(p2(1, 1), 1.0);

  Eigen::MatrixXd img(2, 2);
  img << 0.0, 1.0, 0.5, 0.25;
  const auto bytes = encode_pgm(img);
  EXPECT_EQ(bytes.rfind("P5", 0), 0u);
  const auto back = parse_pgm(bytes);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(back(i), img(i), 0.5 / 255 + 1e-12);

  std::string wide = "P5\n1 2\n65535\n";
  wide += std::string{'\xff', '\xff', '\x00', '\x01'};
  const auto w = parse_pgm(wide);
  EXPECT_DOUBLE_EQ(w(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(w(1, 0), 1.0 / 65535);
  EXPECT_THROW(parse_pgm("P6\n1 1\n255\nx"), ParseError);
  EXPECT_THROW(parse_pgm("P5\n4 4\n255\nab"), ParseError);
}

TEST(MatrixCsv, RoundTrip) {
  Eigen::MatrixXd m(2, 3);
  m << 0.1, 0.2, 1.0 / 3, 4, 5e-9, 6;
  EXPECT_EQ(parse_matrix_csv(matrix_to_csv(m)), m);
  EXPECT_THROW(parse_matrix_csv("1,2\n3\n"), ParseError);
}

TEST(Images, SaveLoadByExtension) {
  const auto dir = std::filesystem::temp_directory_path();
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(4, 4, 0.2);
  m(1, 2) = 0.8;
  save_image(dir / "nt_io_test.csv", m);
  EXPECT_EQ(load_image(dir / "nt_io_test.csv"), m);
  save_image(dir / "nt_io_test.pgm", m);
  EXPECT_NEAR(load_image(dir / "nt_io_test.pgm")(1, 2), 0.8, 0.5 / 255 + 1e-12);
  EXPECT_THROW(load_image(dir / "nt_io_test.png"), InvalidSpecError);
  std::filesystem::remove(dir / "nt_io_test.csv");
  std::filesystem::remove(dir / "nt_io_test.pgm");
}

TEST(Resize, BilinearProperties) {
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(600, 600, 0.37);
  const auto small = resize_bilinear(flat, 64, 64);
  EXPECT_EQ(small.rows(), 64);
  for (int i = 0; i < small.size(); ++i) EXPECT_NEAR(small(i), 0.37, 1e-12);
  Eigen::MatrixXd ramp(10, 10);
  for (int r = 0; r < 10; ++r) {
    for (int c = 0; c < 10; ++c) ramp(r, c) = c;
  }
  EXPECT_EQ(resize_bilinear(ramp, 10, 10), ramp);
  // Horizontal ramp doubled in width: pixel centres map to (x + 0.5) / 2 - 0.5.
  const auto up = resize_bilinear(ramp, 10, 20);
  EXPECT_NEAR(up(0, 5), 2.25, 1e-12);
  EXPECT_NEAR(up(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(up(0, 19), 9.0, 1e-12);
}

TEST(Svg, EscapingAndStructure) {
  EXPECT_EQ(svg::escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
  svg::Chart chart("Vol <cc>", "t", "v");
  chart.set_range(0, 10, 0, 5);
  const std::vector<double> xs{0, 5, 10}, ys{1, 2, 4};
  chart.series(xs, ys, "#123456", "fit");
  const auto s = chart.str();
  EXPECT_EQ(s.rfind("<svg", 0), 0u);
  EXPECT_NE(s.find("</svg>"), std::string::npos);
  EXPECT_NE(s.find("Vol &lt;cc&gt;"), std::string::npos);
  EXPECT_NE(s.find("<polyline"), std::string::npos);
  const std::vector<double> vals(16, 0.5);
  const auto h = svg::heatmap(vals, 4, 4, "map", std::vector<bool>(16, false));
  EXPECT_NE(h.find("<rect"), std::string::npos);
}
