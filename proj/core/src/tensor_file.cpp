#include "neurotwin/tensor_file.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "neurotwin/error.hpp"
#include "neurotwin/packet.hpp"

namespace neurotwin::io {

namespace {

constexpr std::string_view kMagic = "neurotwin-tensors 1";

bool valid_token(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
  }
  return true;
}

}  // namespace

void TensorFile::set_meta(const std::string& key, std::string value) {
  if (!valid_token(key)) throw InvalidSpecError("TensorFile: invalid meta key '" + key + "'");
  if (value.find('\n') != std::string::npos) throw InvalidSpecError("TensorFile: meta value has LF");
  meta_[key] = std::move(value);
}

const std::string& TensorFile::meta(std::string_view key) const {
  auto it = meta_.find(key);
  if (it == meta_.end()) throw ParseError("TensorFile: missing meta '" + std::string(key) + "'");
  return it->second;
}

bool TensorFile::has_meta(std::string_view key) const { return meta_.find(key) != meta_.end(); }

void TensorFile::add(const std::string& name, const Eigen::MatrixXd& value) {
  if (!valid_token(name)) throw InvalidSpecError("TensorFile: invalid tensor name '" + name + "'");
  if (contains(name)) throw InvalidSpecError("TensorFile: duplicate tensor '" + name + "'");
  tensors_.emplace_back(name, value);
}

bool TensorFile::contains(std::string_view name) const {
  for (const auto& [n, _] : tensors_) {
    if (n == name) return true;
  }
  return false;
}

const Eigen::MatrixXd& TensorFile::get(std::string_view name) const {
  for (const auto& [n, m] : tensors_) {
    if (n == name) return m;
  }
  throw ParseError("TensorFile: missing tensor '" + std::string(name) + "'");
}

const Eigen::MatrixXd& TensorFile::get(std::string_view name, Eigen::Index rows,
                                       Eigen::Index cols) const {
  const auto& m = get(name);
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError("TensorFile: tensor '" + std::string(name) + "' is " +
                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  return m;
}

std::string TensorFile::serialize() const {
  std::string out(kMagic);
  out += '\n';
  for (const auto& [k, v] : meta_) out += "meta " + k + " " + v + "\n";
  for (const auto& [name, m] : tensors_) {
    out += "tensor " + name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out += ' ';
        out += fog::format_double(m(r, c));
      }
      out += '\n';
    }
  }
  out += "end\n";
  return out;
}

TensorFile TensorFile::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw ParseError("TensorFile: bad magic line");

  TensorFile tf;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      tf.set_meta(key, value);
    } else if (kind == "tensor") {
      std::string name;
      long rows = -1;
      long cols = -1;
      if (!(ls >> name >> rows >> cols) || rows < 0 || cols < 0) {
        throw ParseError("TensorFile: malformed tensor header: " + line);
      }
      Eigen::MatrixXd m(rows, cols);
      for (long r = 0; r < rows; ++r) {
        if (!std::getline(in, line)) throw ParseError("TensorFile: truncated tensor " + name);
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (long c = 0; c < cols; ++c) {
          while (p < end && *p == ' ') ++p;
          char* next = nullptr;
          const double v = std::strtod(p, &next);
          if (next == p) throw ParseError("TensorFile: bad value in tensor " + name);
          m(r, c) = v;
          p = next;
        }
        while (p < end && *p == ' ') ++p;
        if (p != end) throw ParseError("TensorFile: extra values in tensor " + name);
      }
      tf.add(name, m);
    } else {
      throw ParseError("TensorFile: unknown record '" + kind + "'");
    }
  }
  if (!ended) throw ParseError("TensorFile: missing end marker");
  return tf;
}

void TensorFile::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("TensorFile: cannot write " + path.string());
  out << serialize();
  if (!out) throw Error("TensorFile: write failed for " + path.string());
}

TensorFile TensorFile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("TensorFile: cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace neurotwin::io
