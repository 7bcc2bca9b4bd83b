#include <cmath>
#include <fstream>
#include <random>

#include "neurotwin/brainstate.hpp"
#include "neurotwin/error.hpp"
#include "neurotwin/tensor_file.hpp"

namespace neurotwin::brainstate {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LstmCell zero_cell(int in, int h) {
  return LstmCell{MatrixXd::Zero(4 * h, in), MatrixXd::Zero(4 * h, h), VectorXd::Zero(4 * h)};
}

LstmCell random_cell(std::mt19937_64& rng, int in, int h) {
  std::normal_distribution<double> dist(0.0, 1.0);
  auto cell = zero_cell(in, h);
  const double sw = 1.0 / std::sqrt(static_cast<double>(in));
  const double su = 1.0 / std::sqrt(static_cast<double>(h));
  for (Eigen::Index r = 0; r < cell.w.rows(); ++r) {
    for (Eigen::Index c = 0; c < cell.w.cols(); ++c) cell.w(r, c) = sw * dist(rng);
  }
  for (Eigen::Index r = 0; r < cell.u.rows(); ++r) {
    for (Eigen::Index c = 0; c < cell.u.cols(); ++c) cell.u(r, c) = su * dist(rng);
  }
  cell.b.segment(h, h).setOnes();  // forget-gate bias
  return cell;
}

struct StepCache {
  VectorXd x, h_prev, c_prev, i, f, o, g, c, tanh_c, h;
};

// Runs one direction over `order`, returning the per-step caches.
std::vector<StepCache> run_direction(const LstmCell& cell, int hidden, const MatrixXd& inputs,
                                     bool reverse) {
  const auto steps = inputs.rows();
  std::vector<StepCache> cache;
  cache.reserve(static_cast<std::size_t>(steps));
  VectorXd h = VectorXd::Zero(hidden);
  VectorXd c = VectorXd::Zero(hidden);
  for (Eigen::Index s = 0; s < steps; ++s) {
    const Eigen::Index t = reverse ? steps - 1 - s : s;
    StepCache sc;
    sc.x = inputs.row(t).transpose();
    sc.h_prev = h;
    sc.c_prev = c;
    const VectorXd z = cell.w * sc.x + cell.u * h + cell.b;
    sc.i = z.segment(0, hidden).unaryExpr([](double v) { return sigmoid(v); });
    sc.f = z.segment(hidden, hidden).unaryExpr([](double v) { return sigmoid(v); });
    sc.o = z.segment(2 * hidden, hidden).unaryExpr([](double v) { return sigmoid(v); });
    sc.g = z.segment(3 * hidden, hidden).array().tanh().matrix();
    sc.c = (sc.f.array() * c.array() + sc.i.array() * sc.g.array()).matrix();
    sc.tanh_c = sc.c.array().tanh().matrix();
    sc.h = (sc.o.array() * sc.tanh_c.array()).matrix();
    if (!sc.h.allFinite() || !sc.c.allFinite()) {
      throw NumericError("bilstm: non-finite state at time index " + std::to_string(t));
    }
    h = sc.h;
    c = sc.c;
    cache.push_back(std::move(sc));
  }
  return cache;
}

void backprop_direction(const LstmCell& cell, int hidden, const std::vector<StepCache>& cache,
                        VectorXd dh, LstmCell& grad) {
  VectorXd dc = VectorXd::Zero(hidden);
  for (auto it = cache.rbegin(); it != cache.rend(); ++it) {
    const auto& s = *it;
    const auto one = Eigen::ArrayXd::Ones(hidden);
    const Eigen::ArrayXd d_o = dh.array() * s.tanh_c.array();
    dc = (dc.array() + dh.array() * s.o.array() * (one - s.tanh_c.array().square())).matrix();
    const Eigen::ArrayXd d_i = dc.array() * s.g.array();
    const Eigen::ArrayXd d_g = dc.array() * s.i.array();
    const Eigen::ArrayXd d_f = dc.array() * s.c_prev.array();

    VectorXd dz(4 * hidden);
    dz.segment(0, hidden) = (d_i * s.i.array() * (one - s.i.array())).matrix();
    dz.segment(hidden, hidden) = (d_f * s.f.array() * (one - s.f.array())).matrix();
    dz.segment(2 * hidden, hidden) = (d_o * s.o.array() * (one - s.o.array())).matrix();
    dz.segment(3 * hidden, hidden) = (d_g * (one - s.g.array().square())).matrix();

    grad.w += dz * s.x.transpose();
    grad.u += dz * s.h_prev.transpose();
    grad.b += dz;
    dh = cell.u.transpose() * dz;
    dc = (dc.array() * s.f.array()).matrix();
  }
}

StatePrediction finish(const VectorXd& logits) {
  StatePrediction p;
  const double m = logits.maxCoeff();
  double sum = 0.0;
  for (int k = 0; k < kStateCount; ++k) sum += (p.probs[static_cast<std::size_t>(k)] = std::exp(logits[k] - m));
  int best = 0;
  for (int k = 0; k < kStateCount; ++k) {
    p.probs[static_cast<std::size_t>(k)] /= sum;
    if (p.probs[static_cast<std::size_t>(k)] > p.probs[static_cast<std::size_t>(best)]) best = k;
  }
  p.argmax_label = static_cast<BrainState>(best);
  return p;
}

}  // namespace

std::string_view to_string(BrainState s) {
  switch (s) {
    case BrainState::seizure: return "seizure";
    case BrainState::interictal: return "interictal";
    case BrainState::healthy: return "healthy";
  }
  return "?";
}

BrainState parse_state(std::string_view s) {
  if (s == "seizure") return BrainState::seizure;
  if (s == "interictal") return BrainState::interictal;
  if (s == "healthy") return BrainState::healthy;
  throw ParseError("unknown brain state '" + std::string(s) + "'");
}

BiLstmParams BiLstmParams::zeros(int input_size, int hidden) {
  if (input_size <= 0 || hidden <= 0) throw InvalidSpecError("bilstm: sizes must be positive");
  BiLstmParams p;
  p.input_size = input_size;
  p.hidden = hidden;
  p.fwd = zero_cell(input_size, hidden);
  p.bwd = zero_cell(input_size, hidden);
  p.out_w = MatrixXd::Zero(kStateCount, 2 * hidden);
  p.out_b = VectorXd::Zero(kStateCount);
  return p;
}

BiLstmParams BiLstmParams::random(std::uint64_t seed, int input_size, int hidden) {
  auto p = zeros(input_size, hidden);
  std::mt19937_64 rng(seed);
  p.fwd = random_cell(rng, input_size, hidden);
  p.bwd = random_cell(rng, input_size, hidden);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(2.0 * hidden));
  for (Eigen::Index r = 0; r < p.out_w.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.out_w.cols(); ++c) p.out_w(r, c) = dist(rng);
  }
  return p;
}

void BiLstmParams::for_each(const std::function<void(const std::string&, std::span<double>)>& fn) {
  auto view = [](auto& m) { return std::span<double>(m.data(), static_cast<std::size_t>(m.size())); };
  fn("fwd.w", view(fwd.w));
  fn("fwd.u", view(fwd.u));
  fn("fwd.b", view(fwd.b));
  fn("bwd.w", view(bwd.w));
  fn("bwd.u", view(bwd.u));
  fn("bwd.b", view(bwd.b));
  fn("out.w", view(out_w));
  fn("out.b", view(out_b));
}

bool BiLstmParams::all_finite() {
  bool ok = true;
  for_each([&ok](const std::string&, std::span<double> v) {
    for (double x : v) ok = ok && std::isfinite(x);
  });
  return ok;
}

StatePrediction forward(const BiLstmParams& params, const MatrixXd& inputs) {
  if (inputs.rows() < 1) throw ShapeError("bilstm: sequence must have at least one step");
  if (inputs.cols() != params.input_size) throw ShapeError("bilstm: input width mismatch");
  const auto f = run_direction(params.fwd, params.hidden, inputs, false);
  const auto b = run_direction(params.bwd, params.hidden, inputs, true);
  VectorXd joined(2 * params.hidden);
  joined << f.back().h, b.back().h;
  return finish(params.out_w * joined + params.out_b);
}

double loss_and_gradient(const BiLstmParams& params, std::span<const MatrixXd> inputs,
                         std::span<const BrainState> labels, BiLstmParams* grad) {
  if (inputs.empty() || inputs.size() != labels.size()) {
    throw InvalidSpecError("bilstm loss: dataset empty or labels mismatched");
  }
  if (grad != nullptr) *grad = BiLstmParams::zeros(params.input_size, params.hidden);
  const double inv_n = 1.0 / static_cast<double>(inputs.size());
  const int h = params.hidden;
  double loss = 0.0;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    const auto& x = inputs[s];
    if (x.rows() < 1 || x.cols() != params.input_size) throw ShapeError("bilstm: bad input shape");
    const auto fc = run_direction(params.fwd, h, x, false);
    const auto bc = run_direction(params.bwd, h, x, true);
    VectorXd joined(2 * h);
    joined << fc.back().h, bc.back().h;
    const auto pred = finish(params.out_w * joined + params.out_b);
    const auto y = static_cast<std::size_t>(labels[s]);
    loss -= std::log(std::max(pred.probs[y], 1e-300)) * inv_n;
    if (grad == nullptr) continue;

    VectorXd dlogits(kStateCount);
    for (int k = 0; k < kStateCount; ++k) {
      dlogits[k] = (pred.probs[static_cast<std::size_t>(k)] - (static_cast<std::size_t>(k) == y ? 1.0 : 0.0)) * inv_n;
    }
    grad->out_w += dlogits * joined.transpose();
    grad->out_b += dlogits;
    const VectorXd djoined = params.out_w.transpose() * dlogits;
    backprop_direction(params.fwd, h, fc, djoined.head(h), grad->fwd);
    backprop_direction(params.bwd, h, bc, djoined.tail(h), grad->bwd);
  }
  return loss;
}

double grad_check(const BiLstmParams& params, std::span<const MatrixXd> inputs,
                  std::span<const BrainState> labels, double h) {
  BiLstmParams analytic;
  loss_and_gradient(params, inputs, labels, &analytic);
  std::vector<std::span<double>> grads;
  analytic.for_each([&grads](const std::string&, std::span<double> v) { grads.push_back(v); });

  BiLstmParams probe = params;
  double worst = 0.0;
  std::size_t t = 0;
  probe.for_each([&](const std::string&, std::span<double> w) {
    const auto g = grads[t++];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + h;
      const double up = loss_and_gradient(probe, inputs, labels, nullptr);
      w[i] = saved - h;
      const double down = loss_and_gradient(probe, inputs, labels, nullptr);
      w[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(g[i]), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(g[i] - numeric) / denom);
    }
  });
  return worst;
}

NormStats NormStats::fit(std::span<const SequenceSample> samples) {
  const auto width = static_cast<Eigen::Index>(features::kFeatureCount);
  NormStats n{VectorXd::Zero(width), VectorXd::Zero(width)};
  std::size_t rows = 0;
  for (const auto& s : samples) {
    for (const auto& w : s.windows) {
      const auto a = w.to_array();
      n.mean += Eigen::Map<const VectorXd>(a.data(), width);
      ++rows;
    }
  }
  if (rows == 0) throw DegenerateInputError("NormStats: no windows");
  n.mean /= static_cast<double>(rows);
  for (const auto& s : samples) {
    for (const auto& w : s.windows) {
      const auto a = w.to_array();
      n.stddev += (Eigen::Map<const VectorXd>(a.data(), width) - n.mean).array().square().matrix();
    }
  }
  n.stddev = (n.stddev / static_cast<double>(rows)).array().sqrt().matrix();
  for (Eigen::Index k = 0; k < width; ++k) {
    if (!(n.stddev[k] > 0.0)) n.stddev[k] = 1.0;
  }
  return n;
}

MatrixXd NormStats::apply(const std::vector<features::FeatureVector>& windows) const {
  MatrixXd x(static_cast<Eigen::Index>(windows.size()), mean.size());
  for (std::size_t t = 0; t < windows.size(); ++t) {
    const auto a = windows[t].to_array();
    for (Eigen::Index k = 0; k < mean.size(); ++k) {
      x(static_cast<Eigen::Index>(t), k) = (a[static_cast<std::size_t>(k)] - mean[k]) / stddev[k];
    }
  }
  return x;
}

StatePrediction StateModel::predict(const std::vector<features::FeatureVector>& windows) const {
  return forward(params, norm.apply(windows));
}

void StateModel::save(const std::filesystem::path& path) const {
  io::TensorFile tf;
  tf.set_meta("kind", "bilstm-state");
  tf.set_meta("classes", "seizure,interictal,healthy");
  tf.set_meta("hidden", std::to_string(params.hidden));
  tf.set_meta("input_size", std::to_string(params.input_size));
  tf.add("fwd.w", params.fwd.w);
  tf.add("fwd.u", params.fwd.u);
  tf.add("fwd.b", params.fwd.b);
  tf.add("bwd.w", params.bwd.w);
  tf.add("bwd.u", params.bwd.u);
  tf.add("bwd.b", params.bwd.b);
  tf.add("out.w", params.out_w);
  tf.add("out.b", params.out_b);
  tf.add("norm.mean", norm.mean);
  tf.add("norm.std", norm.stddev);
  tf.save(path);
}

StateModel StateModel::load(const std::filesystem::path& path) {
  const auto tf = io::TensorFile::load(path);
  if (tf.meta("kind") != "bilstm-state") throw ParseError("not a brain-state model");
  int hidden = 0;
  int in = 0;
  try {
    hidden = std::stoi(tf.meta("hidden"));
    in = std::stoi(tf.meta("input_size"));
  } catch (const std::logic_error&) {
    throw ParseError("brain-state model: malformed metadata");
  }
  StateModel m;
  m.params = BiLstmParams::zeros(in, hidden);
  m.params.fwd.w = tf.get("fwd.w", 4 * hidden, in);
  m.params.fwd.u = tf.get("fwd.u", 4 * hidden, hidden);
  m.params.fwd.b = tf.get("fwd.b", 4 * hidden, 1);
  m.params.bwd.w = tf.get("bwd.w", 4 * hidden, in);
  m.params.bwd.u = tf.get("bwd.u", 4 * hidden, hidden);
  m.params.bwd.b = tf.get("bwd.b", 4 * hidden, 1);
  m.params.out_w = tf.get("out.w", kStateCount, 2 * hidden);
  m.params.out_b = tf.get("out.b", kStateCount, 1);
  m.norm.mean = tf.get("norm.mean", in, 1);
  m.norm.stddev = tf.get("norm.std", in, 1);
  return m;
}

double accuracy(const StateModel& model, std::span<const SequenceSample> dataset) {
  if (dataset.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : dataset) hits += model.predict(s.windows).argmax_label == s.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

StateModel train(std::span<const SequenceSample> dataset, const TrainOptions& options,
                 TrainReport* report) {
  if (dataset.empty()) throw InvalidSpecError("bilstm train: empty dataset");
  if (!(options.learning_rate > 0.0)) throw InvalidSpecError("bilstm train: lr must be positive");
  StateModel model;
  model.norm = NormStats::fit(dataset);
  model.params = BiLstmParams::random(options.init_seed, static_cast<int>(features::kFeatureCount),
                                      options.hidden);

  std::vector<MatrixXd> inputs;
  std::vector<BrainState> labels;
  for (const auto& s : dataset) {
    inputs.push_back(model.norm.apply(s.windows));
    labels.push_back(s.label);
  }

  TrainReport local;
  TrainReport& rep = report != nullptr ? *report : local;
  rep = TrainReport{};
  BiLstmParams grad;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const double loss = loss_and_gradient(model.params, inputs, labels, &grad);
    if (!std::isfinite(loss)) throw DivergenceError("bilstm train: non-finite loss", static_cast<std::size_t>(epoch));
    rep.loss_per_epoch.push_back(loss);
    std::vector<std::span<double>> gs;
    grad.for_each([&gs](const std::string&, std::span<double> v) { gs.push_back(v); });
    std::size_t t = 0;
    model.params.for_each([&](const std::string&, std::span<double> w) {
      const auto g = gs[t++];
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= options.learning_rate * g[i];
    });
    rep.epochs_run = epoch + 1;
    if (options.stop_at_full_accuracy && accuracy(model, dataset) == 1.0) break;
  }
  rep.loss_per_epoch.push_back(loss_and_gradient(model.params, inputs, labels, nullptr));
  rep.train_accuracy = accuracy(model, dataset);
  return model;
}

}  // namespace neurotwin::brainstate
