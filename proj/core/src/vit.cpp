#include "neurotwin/vit.hpp"

#include <cmath>
#include <random>

#include "neurotwin/error.hpp"
#include "neurotwin/tensor_file.hpp"

namespace neurotwin::vit {

namespace {

constexpr double kRowSumTolerance = 1e-6;
constexpr double kLogClamp = 1e-12;

MatrixXd softmax_rows(const MatrixXd& s) {
  MatrixXd a(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    a.row(i) = (s.row(i).array() - m).exp();
    a.row(i) /= a.row(i).sum();
  }
  return a;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_finite(const MatrixXd& m, const std::string& where) {
  if (!m.allFinite()) throw NumericError("vit forward: non-finite activation in " + where);
}

MatrixXd normal_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  std::normal_distribution<double> dist(0.0, 1.0);
  MatrixXd m(rows, cols);
  // Row-major fill so the draw order does not depend on Eigen's storage order.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * dist(rng);
  }
  return m;
}

// Which maps contribute to the PLAR term.
bool plar_includes(const AttentionMap& map, int layer_count, const LossConfig& config) {
  return config.aggregation == PlarAggregation::all_layers || map.layer == layer_count - 1;
}

double plar_norm(Eigen::Index n, const LossConfig& config) {
  const double nd = static_cast<double>(n);
  return config.normalization == PlarNormalization::per_query ? nd : nd * nd;
}

}  // namespace

// ---------------------------------------------------------------- patches

PatchGrid patchify(const MatrixXd& image, int patch_size) {
  if (patch_size <= 0) throw ShapeError("patchify: patch size must be positive");
  if (image.rows() % patch_size != 0 || image.cols() % patch_size != 0) {
    throw ShapeError("patchify: " + std::to_string(image.rows()) + "x" + std::to_string(image.cols()) +
                     " image is not divisible by patch size " + std::to_string(patch_size));
  }
  PatchGrid g;
  g.patch_size = patch_size;
  g.grid_rows = static_cast<int>(image.rows()) / patch_size;
  g.grid_cols = static_cast<int>(image.cols()) / patch_size;
  if (g.count() < 2) throw ShapeError("patchify: need at least 2 patches");
  g.patches.resize(g.count(), patch_size * patch_size);
  for (int gr = 0; gr < g.grid_rows; ++gr) {
    for (int gc = 0; gc < g.grid_cols; ++gc) {
      const int idx = gr * g.grid_cols + gc;
      for (int r = 0; r < patch_size; ++r) {
        for (int c = 0; c < patch_size; ++c) {
          g.patches(idx, r * patch_size + c) = image(gr * patch_size + r, gc * patch_size + c);
        }
      }
    }
  }
  return g;
}

MatrixXd reassemble(const PatchGrid& g) {
  const int ps = g.patch_size;
  MatrixXd image(g.grid_rows * ps, g.grid_cols * ps);
  for (int gr = 0; gr < g.grid_rows; ++gr) {
    for (int gc = 0; gc < g.grid_cols; ++gc) {
      const int idx = gr * g.grid_cols + gc;
      for (int r = 0; r < ps; ++r) {
        for (int c = 0; c < ps; ++c) image(gr * ps + r, gc * ps + c) = g.patches(idx, r * ps + c);
      }
    }
  }
  return image;
}

// ----------------------------------------------------------------- params

void VitConfig::validate() const {
  if (patch_size <= 0 || image_size <= 0 || image_size % patch_size != 0) {
    throw InvalidSpecError("VitConfig: image size must be a positive multiple of patch size");
  }
  if (patch_count() < 2) throw InvalidSpecError("VitConfig: need at least 2 patches");
  if (d_model <= 0 || heads <= 0 || d_model % heads != 0) {
    throw InvalidSpecError("VitConfig: d_model must be a positive multiple of heads");
  }
  if (layers <= 0 || ffn_hidden <= 0) throw InvalidSpecError("VitConfig: layers/ffn must be positive");
}

VitConfig VitConfig::tiny() {
  VitConfig c;
  c.image_size = 32;
  c.patch_size = 16;
  c.d_model = 8;
  c.heads = 1;
  c.layers = 1;
  c.ffn_hidden = 8;
  return c;
}

ModelParams ModelParams::zeros(const VitConfig& config) {
  config.validate();
  const int d = config.d_model;
  const int f = config.ffn_hidden;
  ModelParams p;
  p.config = config;
  p.patch_proj = MatrixXd::Zero(config.patch_dim(), d);
  p.patch_bias = MatrixXd::Zero(1, d);
  p.pos = MatrixXd::Zero(config.patch_count(), d);
  for (int l = 0; l < config.layers; ++l) {
    LayerParams lp;
    lp.wq = lp.wk = lp.wv = lp.wo = MatrixXd::Zero(d, d);
    lp.bo = MatrixXd::Zero(1, d);
    lp.w1 = MatrixXd::Zero(d, f);
    lp.b1 = MatrixXd::Zero(1, f);
    lp.w2 = MatrixXd::Zero(f, d);
    lp.b2 = MatrixXd::Zero(1, d);
    p.layers.push_back(std::move(lp));
  }
  p.head_w = MatrixXd::Zero(d, 1);
  p.head_b = MatrixXd::Zero(1, 1);
  return p;
}

ModelParams ModelParams::random(const VitConfig& config, std::uint64_t seed, InitOptions options) {
  auto p = zeros(config);
  std::mt19937_64 rng(seed);
  const double d = config.d_model;
  const double f = config.ffn_hidden;
  p.patch_proj = normal_matrix(rng, config.patch_dim(), config.d_model, 1.0);
  p.pos = normal_matrix(rng, config.patch_count(), config.d_model, options.pos_scale);
  for (auto& lp : p.layers) {
    lp.wq = normal_matrix(rng, config.d_model, config.d_model, options.attention_gain / std::sqrt(d));
    lp.wk = normal_matrix(rng, config.d_model, config.d_model, options.attention_gain / std::sqrt(d));
    lp.wv = normal_matrix(rng, config.d_model, config.d_model, 1.0 / std::sqrt(d));
    lp.wo = normal_matrix(rng, config.d_model, config.d_model, 1.0 / std::sqrt(d));
    lp.w1 = normal_matrix(rng, config.d_model, config.ffn_hidden, 1.0 / std::sqrt(d));
    lp.w2 = normal_matrix(rng, config.ffn_hidden, config.d_model, 1.0 / std::sqrt(f));
  }
  p.head_w = normal_matrix(rng, config.d_model, 1, 1.0 / std::sqrt(d));
  return p;
}

void ModelParams::for_each(const std::function<void(const std::string&, MatrixXd&)>& fn) {
  fn("patch_proj", patch_proj);
  fn("patch_bias", patch_bias);
  if (config.position_embeddings) fn("pos", pos);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    auto& lp = layers[l];
    fn(pre + "wq", lp.wq);
    fn(pre + "wk", lp.wk);
    fn(pre + "wv", lp.wv);
    fn(pre + "wo", lp.wo);
    fn(pre + "bo", lp.bo);
    fn(pre + "w1", lp.w1);
    fn(pre + "b1", lp.b1);
    fn(pre + "w2", lp.w2);
    fn(pre + "b2", lp.b2);
  }
  fn("head_w", head_w);
  fn("head_b", head_b);
}

void ModelParams::for_each(const std::function<void(const std::string&, const MatrixXd&)>& fn) const {
  const_cast<ModelParams*>(this)->for_each(
      [&fn](const std::string& name, MatrixXd& m) { fn(name, m); });
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&n](const std::string&, const MatrixXd& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each([&ok](const std::string&, const MatrixXd& m) { ok = ok && m.allFinite(); });
  return ok;
}

// ---------------------------------------------------------------- forward

// Per-image standardization, then 1/sqrt(P) so that P * P^T stays O(1) and a
// single gradient-descent rate suits the embedding and the attention weights.
MatrixXd embedding_input(const MatrixXd& patches) {
  const double mean = patches.mean();
  const double var = (patches.array() - mean).square().mean();
  const double sd = var > 1e-16 ? std::sqrt(var) : 1.0;
  return (patches.array() - mean) / (sd * std::sqrt(static_cast<double>(patches.cols())));
}

ForwardResult forward(const ModelParams& params, const PatchGrid& grid) {
  const auto& cfg = params.config;
  const int n = grid.count();
  if (n != cfg.patch_count() || grid.patches.cols() != cfg.patch_dim()) {
    throw ShapeError("vit forward: grid of " + std::to_string(n) + " patches x " +
                     std::to_string(grid.patches.cols()) + " does not match the model");
  }
  const int dk = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  ForwardResult out;
  auto& cache = out.cache;
  cache.patches = embedding_input(grid.patches);
  cache.x0 = cache.patches * params.patch_proj;
  cache.x0.rowwise() += params.patch_bias.row(0);
  if (cfg.position_embeddings) cache.x0 += params.pos;
  check_finite(cache.x0, "patch embedding");

  const MatrixXd* x = &cache.x0;
  for (int l = 0; l < cfg.layers; ++l) {
    const auto& lp = params.layers[static_cast<std::size_t>(l)];
    LayerCache lc;
    lc.x_in = *x;
    lc.q = lc.x_in * lp.wq;
    lc.k = lc.x_in * lp.wk;
    lc.v = lc.x_in * lp.wv;
    lc.concat.resize(n, cfg.d_model);
    for (int h = 0; h < cfg.heads; ++h) {
      const MatrixXd s = lc.q.middleCols(h * dk, dk) * lc.k.middleCols(h * dk, dk).transpose() * scale;
      MatrixXd a = softmax_rows(s);
      lc.concat.middleCols(h * dk, dk) = a * lc.v.middleCols(h * dk, dk);
      out.maps.push_back(AttentionMap{l, h, a});
      lc.attn.push_back(std::move(a));
    }
    lc.x_mid = lc.x_in + lc.concat * lp.wo;
    lc.x_mid.rowwise() += lp.bo.row(0);
    MatrixXd pre = lc.x_mid * lp.w1;
    pre.rowwise() += lp.b1.row(0);
    lc.hidden_act = pre.array().tanh().matrix();
    lc.x_out = lc.x_mid + lc.hidden_act * lp.w2;
    lc.x_out.rowwise() += lp.b2.row(0);
    check_finite(lc.x_out, "layer " + std::to_string(l));
    cache.layers.push_back(std::move(lc));
    x = &cache.layers.back().x_out;
  }

  cache.logits = (*x * params.head_w).col(0).array() + params.head_b(0, 0);
  if (!cache.logits.allFinite()) throw NumericError("vit forward: non-finite activation in head");
  out.probs = cache.logits.unaryExpr([](double z) { return sigmoid(z); });
  return out;
}

// ----------------------------------------------------------------- losses

VectorXd attention_entropy(const MatrixXd& alpha, double epsilon) {
  VectorXd h(alpha.rows());
  for (Eigen::Index i = 0; i < alpha.rows(); ++i) {
    const double sum = alpha.row(i).sum();
    if (!(std::abs(sum - 1.0) <= kRowSumTolerance)) {
      throw DegenerateInputError("attention_entropy: row " + std::to_string(i) + " sums to " +
                                 std::to_string(sum));
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j < alpha.cols(); ++j) acc -= alpha(i, j) * std::log(alpha(i, j) + epsilon);
    h[i] = acc;
  }
  return h;
}

double plar_loss(const std::vector<AttentionMap>& maps, const LossConfig& config) {
  if (maps.empty()) throw InvalidSpecError("plar_loss: no attention maps");
  int layer_count = 0;
  for (const auto& m : maps) layer_count = std::max(layer_count, m.layer + 1);
  double acc = 0.0;
  int used = 0;
  for (const auto& m : maps) {
    if (!plar_includes(m, layer_count, config)) continue;
    acc += -attention_entropy(m.alpha, config.epsilon).sum() / plar_norm(m.alpha.rows(), config);
    ++used;
  }
  return acc / used;
}

double ce_loss(std::span<const double> probs, std::span<const double> labels) {
  if (labels.empty() || labels.size() != probs.size()) {
    throw InvalidSpecError("ce_loss: labels missing or of the wrong length");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    const double y = labels[i];
    acc -= y * std::log(std::max(p, kLogClamp)) + (1.0 - y) * std::log(std::max(1.0 - p, kLogClamp));
  }
  return acc / static_cast<double>(probs.size());
}

double ce_loss(const VectorXd& probs, const VectorXd& labels) {
  return ce_loss(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())),
                 std::span<const double>(labels.data(), static_cast<std::size_t>(labels.size())));
}

double total_loss(const VectorXd& probs, const VectorXd& labels,
                  const std::vector<AttentionMap>& maps, const LossConfig& config) {
  const double ce = ce_loss(probs, labels);
  if (config.lambda1 == 0.0) return ce;
  return ce + config.lambda1 * plar_loss(maps, config);
}

double mean_attention_entropy(const std::vector<AttentionMap>& maps, double epsilon) {
  double acc = 0.0;
  Eigen::Index rows = 0;
  for (const auto& m : maps) {
    acc += attention_entropy(m.alpha, epsilon).sum();
    rows += m.alpha.rows();
  }
  return rows == 0 ? 0.0 : acc / static_cast<double>(rows);
}

// --------------------------------------------------------------- backward

namespace {

// Accumulates d(scale * loss)/d(params) into grad given dL/dlogits and the
// per-map dL/dalpha contributions (indexed like ForwardResult::maps).
// Returns dL/dx_final.
MatrixXd backward(const ModelParams& params, const ForwardCache& cache, const VectorXd& dlogits,
                  const std::vector<MatrixXd>* dalpha_extra, ModelParams& grad,
                  bool stop_at_final = false) {
  const auto& cfg = params.config;
  const int dk = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  const MatrixXd& x_final = cache.layers.empty() ? cache.x0 : cache.layers.back().x_out;
  grad.head_w += x_final.transpose() * dlogits;
  grad.head_b(0, 0) += dlogits.sum();
  MatrixXd dx = dlogits * params.head_w.transpose();
  if (stop_at_final) return dx;

  for (int l = cfg.layers - 1; l >= 0; --l) {
    const auto& lp = params.layers[static_cast<std::size_t>(l)];
    const auto& lc = cache.layers[static_cast<std::size_t>(l)];
    auto& gl = grad.layers[static_cast<std::size_t>(l)];

    // Feed-forward sublayer.
    gl.w2 += lc.hidden_act.transpose() * dx;
    gl.b2 += dx.colwise().sum();
    const MatrixXd dpre =
        ((dx * lp.w2.transpose()).array() * (1.0 - lc.hidden_act.array().square())).matrix();
    gl.w1 += lc.x_mid.transpose() * dpre;
    gl.b1 += dpre.colwise().sum();
    const MatrixXd dmid = dx + dpre * lp.w1.transpose();

    // Attention sublayer.
    gl.wo += lc.concat.transpose() * dmid;
    gl.bo += dmid.colwise().sum();
    const MatrixXd dconcat = dmid * lp.wo.transpose();
    MatrixXd dq(lc.q.rows(), lc.q.cols());
    MatrixXd dk_(lc.k.rows(), lc.k.cols());
    MatrixXd dv(lc.v.rows(), lc.v.cols());
    for (int h = 0; h < cfg.heads; ++h) {
      const MatrixXd& a = lc.attn[static_cast<std::size_t>(h)];
      const auto qh = lc.q.middleCols(h * dk, dk);
      const auto kh = lc.k.middleCols(h * dk, dk);
      const auto vh = lc.v.middleCols(h * dk, dk);
      const auto doh = dconcat.middleCols(h * dk, dk);

      MatrixXd da = doh * vh.transpose();
      if (dalpha_extra != nullptr) {
        da += (*dalpha_extra)[static_cast<std::size_t>(l * cfg.heads + h)];
      }
      dv.middleCols(h * dk, dk) = a.transpose() * doh;
      const VectorXd row_dot = (da.array() * a.array()).rowwise().sum();
      const MatrixXd ds = (a.array() * (da.colwise() - row_dot).array()).matrix();
      dq.middleCols(h * dk, dk) = ds * kh * scale;
      dk_.middleCols(h * dk, dk) = ds.transpose() * qh * scale;
    }
    gl.wq += lc.x_in.transpose() * dq;
    gl.wk += lc.x_in.transpose() * dk_;
    gl.wv += lc.x_in.transpose() * dv;
    dx = dmid + dq * lp.wq.transpose() + dk_ * lp.wk.transpose() + dv * lp.wv.transpose();
  }

  grad.patch_proj += cache.patches.transpose() * dx;
  grad.patch_bias += dx.colwise().sum();
  if (cfg.position_embeddings) grad.pos += dx;
  return dx;
}

}  // namespace

LossBreakdown loss_and_gradient(const ModelParams& params, std::span<const LabeledImage> batch,
                                const LossConfig& config, ModelParams* grad) {
  if (batch.empty()) throw InvalidSpecError("loss: empty batch");
  const auto& cfg = params.config;
  if (grad != nullptr) *grad = ModelParams::zeros(cfg);

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  LossBreakdown total;
  for (const auto& item : batch) {
    const auto grid = patchify(item.image, cfg.patch_size);
    const auto fr = forward(params, grid);
    const VectorXd& y = item.labels;
    const double ce = ce_loss(fr.probs, y);
    const double plar = plar_loss(fr.maps, config);
    total.ce += ce * inv_b;
    total.plar += plar * inv_b;
    total.mean_entropy += mean_attention_entropy(fr.maps, config.epsilon) * inv_b;
    if (grad == nullptr) continue;

    // d ce / d logit_i, honouring the log clamp.
    const Eigen::Index n = fr.probs.size();
    VectorXd dlogits(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = fr.probs[i];
      double dp = 0.0;
      if (p > kLogClamp) dp -= y[i] / p;
      if (1.0 - p > kLogClamp) dp += (1.0 - y[i]) / (1.0 - p);
      dlogits[i] = dp * p * (1.0 - p) / static_cast<double>(n) * inv_b;
    }

    std::vector<MatrixXd> dalpha;
    if (config.lambda1 != 0.0) {
      int used = 0;
      for (const auto& m : fr.maps) used += plar_includes(m, cfg.layers, config) ? 1 : 0;
      for (const auto& m : fr.maps) {
        if (!plar_includes(m, cfg.layers, config)) {
          dalpha.push_back(MatrixXd::Zero(m.alpha.rows(), m.alpha.cols()));
          continue;
        }
        const double coef = config.lambda1 * inv_b / used / plar_norm(m.alpha.rows(), config);
        // d(-H_i)/d a_ij = log(a + eps) + a / (a + eps)
        const auto a = m.alpha.array();
        dalpha.push_back((coef * ((a + config.epsilon).log() + a / (a + config.epsilon))).matrix());
      }
    }
    backward(params, fr.cache, dlogits, dalpha.empty() ? nullptr : &dalpha, *grad);
  }
  total.total = total.ce + (config.lambda1 == 0.0 ? 0.0 : config.lambda1 * total.plar);
  return total;
}

LossBreakdown evaluate_loss(const ModelParams& params, std::span<const LabeledImage> batch,
                            const LossConfig& config) {
  return loss_and_gradient(params, batch, config, nullptr);
}

// ------------------------------------------------------------ attribution

VectorXd patch_attribution(const ModelParams& params, const PatchGrid& grid, TargetClass target) {
  const auto fr = forward(params, grid);
  const Eigen::Index n = fr.probs.size();
  const double sign = target == TargetClass::tumor ? 1.0 : -1.0;
  const VectorXd dscore = VectorXd::Constant(n, sign / static_cast<double>(n));

  auto scratch = ModelParams::zeros(params.config);
  const MatrixXd g = backward(params, fr.cache, dscore, nullptr, scratch, /*stop_at_final=*/true);
  const MatrixXd& features =
      fr.cache.layers.empty() ? fr.cache.x0 : fr.cache.layers.back().x_out;

  const Eigen::RowVectorXd channel_weights = g.colwise().mean();
  VectorXd cam = (features * channel_weights.transpose()).cwiseMax(0.0);
  const double peak = cam.maxCoeff();
  if (peak > 0.0) cam /= peak;
  return cam;
}

// ------------------------------------------------------------- checkpoint

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  io::TensorFile tf;
  const auto& c = params.config;
  tf.set_meta("kind", "vitpp");
  tf.set_meta("image_size", std::to_string(c.image_size));
  tf.set_meta("patch_size", std::to_string(c.patch_size));
  tf.set_meta("d_model", std::to_string(c.d_model));
  tf.set_meta("heads", std::to_string(c.heads));
  tf.set_meta("layers", std::to_string(c.layers));
  tf.set_meta("ffn_hidden", std::to_string(c.ffn_hidden));
  tf.set_meta("position_embeddings", c.position_embeddings ? "1" : "0");
  ModelParams copy = params;
  copy.config.position_embeddings = true;  // always persist pos
  copy.for_each([&tf](const std::string& name, const MatrixXd& m) { tf.add(name, m); });
  tf.save(path);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  const auto tf = io::TensorFile::load(path);
  if (tf.meta("kind") != "vitpp") throw ParseError("checkpoint is not a vitpp model");
  VitConfig c;
  try {
    c.image_size = std::stoi(tf.meta("image_size"));
    c.patch_size = std::stoi(tf.meta("patch_size"));
    c.d_model = std::stoi(tf.meta("d_model"));
    c.heads = std::stoi(tf.meta("heads"));
    c.layers = std::stoi(tf.meta("layers"));
    c.ffn_hidden = std::stoi(tf.meta("ffn_hidden"));
  } catch (const std::logic_error&) {
    throw ParseError("checkpoint: malformed config metadata");
  }
  c.position_embeddings = tf.meta("position_embeddings") == "1";
  auto p = ModelParams::zeros(c);
  p.config.position_embeddings = true;
  p.for_each([&tf](const std::string& name, MatrixXd& m) { m = tf.get(name, m.rows(), m.cols()); });
  p.config.position_embeddings = c.position_embeddings;
  return p;
}

}  // namespace neurotwin::vit
