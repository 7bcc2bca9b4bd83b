#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace neurotwin::io {

/// Text checkpoint container: a manifest of named row-major matrices plus
/// free-form string metadata.
///
///   neurotwin-tensors 1
///   meta <key> <value...>
///   tensor <name> <rows> <cols>
///   <rows lines of cols values, %.17g>
///   end
///
/// Values are written with 17 significant digits, so save/load round-trips
/// every double exactly.
class TensorFile {
 public:
  void set_meta(const std::string& key, std::string value);
  const std::string& meta(std::string_view key) const;
  bool has_meta(std::string_view key) const;

  void add(const std::string& name, const Eigen::MatrixXd& value);
  const Eigen::MatrixXd& get(std::string_view name) const;
  /// Throws ShapeError when the stored shape differs.
  const Eigen::MatrixXd& get(std::string_view name, Eigen::Index rows, Eigen::Index cols) const;
  bool contains(std::string_view name) const;
  const std::vector<std::pair<std::string, Eigen::MatrixXd>>& tensors() const { return tensors_; }

  std::string serialize() const;
  static TensorFile parse(std::string_view text);

  void save(const std::filesystem::path& path) const;
  static TensorFile load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string, std::less<>> meta_;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors_;
};

}  // namespace neurotwin::io
