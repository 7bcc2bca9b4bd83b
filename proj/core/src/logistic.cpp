#include <cmath>

#include "neurotwin/brainstate.hpp"
#include "neurotwin/error.hpp"

namespace neurotwin::brainstate {

fog::RiskModel train_logistic(const MatrixXd& x, std::span<const int> labels, double lr, int epochs) {
  if (x.cols() != 11) throw ShapeError("train_logistic: expected 11 feature columns");
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw ShapeError("train_logistic: row/label count mismatch");
  }
  if (!x.allFinite()) throw NumericError("train_logistic: non-finite features");
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (int y : labels) {
    if (y == 1) {
      ++pos;
    } else if (y == 0) {
      ++neg;
    } else {
      throw InvalidSpecError("train_logistic: labels must be 0 or 1");
    }
  }
  if (pos < 2 || neg < 2) {
    throw DegenerateInputError("train_logistic: need >= 2 examples of each class (have " +
                               std::to_string(neg) + " low, " + std::to_string(pos) + " high)");
  }

  const double n = static_cast<double>(x.rows());
  const Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::RowVectorXd sd = ((x.rowwise() - mean).array().square().colwise().sum() / n).sqrt();
  for (Eigen::Index k = 0; k < sd.size(); ++k) {
    if (!(sd[k] > 0.0)) sd[k] = 1.0;
  }
  const MatrixXd z = (x.rowwise() - mean).array().rowwise() / sd.array();

  MatrixXd w = MatrixXd::Zero(2, 11);
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    MatrixXd logits = z * w.transpose();
    logits.rowwise() += b.transpose();
    MatrixXd dlogits(logits.rows(), 2);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double m = logits.row(i).maxCoeff();
      const double e0 = std::exp(logits(i, 0) - m);
      const double e1 = std::exp(logits(i, 1) - m);
      const double y = labels[static_cast<std::size_t>(i)];
      dlogits(i, 0) = (e0 / (e0 + e1) - (1.0 - y)) / n;
      dlogits(i, 1) = (e1 / (e0 + e1) - y) / n;
    }
    w -= lr * dlogits.transpose() * z;
    b -= lr * dlogits.colwise().sum().transpose();
  }

  // Fold the standardization into raw-feature weights.
  fog::RiskModel model;
  for (int c = 0; c < 2; ++c) {
    model.weights.row(c) = w.row(c).array() / sd.array();
    model.bias[c] = b[c] - (w.row(c).array() * mean.array() / sd.array()).sum();
  }
  if (!model.weights.allFinite() || !model.bias.allFinite()) {
    throw NumericError("train_logistic: non-finite weights");
  }
  return model;
}

double logistic_loss(const fog::RiskModel& model, const MatrixXd& x, std::span<const int> labels) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::Matrix<double, 11, 1> row = x.row(i).transpose();
    const auto p = fog::risk_score({row.data(), 11}, model);
    loss -= std::log(std::max(p[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])], 1e-300));
  }
  return loss / static_cast<double>(x.rows());
}

}  // namespace neurotwin::brainstate
