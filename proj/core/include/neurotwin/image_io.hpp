#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace neurotwin::io {

/// Grayscale images as row-major matrices with intensities in [0, 1].

/// Binary (P5) or ASCII (P2) portable graymap, maxval <= 65535.
Eigen::MatrixXd parse_pgm(std::string_view bytes);
std::string encode_pgm(const Eigen::MatrixXd& image);  // P5, 8-bit, values clamped

/// Comma-separated rows of numbers, no header.
Eigen::MatrixXd parse_matrix_csv(std::string_view text);
std::string matrix_to_csv(const Eigen::MatrixXd& m);

/// Dispatches on extension: .pgm or .csv.
Eigen::MatrixXd load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const Eigen::MatrixXd& image);

/// Bilinear resampling with pixel-centre alignment.
Eigen::MatrixXd resize_bilinear(const Eigen::MatrixXd& image, int rows, int cols);

}  // namespace neurotwin::io
