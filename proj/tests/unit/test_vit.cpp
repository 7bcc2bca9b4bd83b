#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "neurotwin/error.hpp"
#include "neurotwin/vit.hpp"

using namespace neurotwin;
using namespace neurotwin::vit;

namespace {

MatrixXd ramp_image(int h, int w) {
  MatrixXd m(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) m(r, c) = (r * w + c) / static_cast<double>(h * w);
  }
  return m;
}

AttentionMap uniform_map(int n) { return {0, 0, MatrixXd::Constant(n, n, 1.0 / n)}; }

AttentionMap one_hot_map(int n) {
  MatrixXd a = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) a(i, (i + 1) % n) = 1.0;
  return {0, 0, a};
}

std::vector<LabeledImage> tiny_batch(std::uint64_t seed, int count) {
  CorpusSpec spec;
  spec.image_size = VitConfig::tiny().image_size;
  return make_multifocal_corpus(seed, count, spec);
}

LabeledImage bright_patch_image(int patch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.03);
  LabeledImage li;
  li.image = MatrixXd(64, 64);
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 64; ++c) li.image(r, c) = std::clamp(0.2 + n(rng), 0.0, 1.0);
  }
  li.image.block((patch / 4) * 16, (patch % 4) * 16, 16, 16).setConstant(0.95);
  li.labels = VectorXd::Zero(16);
  li.labels(patch) = 1.0;
  return li;
}

}  // namespace

TEST(Patchify, CountsAndInverse) {
  const auto img = ramp_image(64, 64);
  const auto g = patchify(img, 16);
  EXPECT_EQ(g.count(), 16);
  EXPECT_EQ(g.patches.rows(), 16);
  EXPECT_EQ(g.patches.cols(), 256);
  EXPECT_EQ(reassemble(g), img);
  // Row-major patch order: patch 1 starts at column 16 of row 0.
  EXPECT_DOUBLE_EQ(g.patches(1, 0), img(0, 16));
  EXPECT_DOUBLE_EQ(g.patches(4, 0), img(16, 0));

  const auto rect = ramp_image(32, 48);
  EXPECT_EQ(reassemble(patchify(rect, 16)), rect);
}

TEST(Patchify, ShapeErrors) {
  EXPECT_THROW(patchify(MatrixXd::Zero(600, 600), 16), ShapeError);
  EXPECT_THROW(patchify(MatrixXd::Zero(16, 16), 16), ShapeError);
  EXPECT_NO_THROW(patchify(MatrixXd::Zero(592, 592), 16));
}

TEST(Forward, ZeroModelIsUniform) {
  const auto params = ModelParams::zeros(VitConfig{});
  const auto res = forward(params, patchify(ramp_image(64, 64), 16));
  ASSERT_EQ(res.probs.size(), 16);
  for (int i = 0; i < 16; ++i) EXPECT_DOUBLE_EQ(res.probs(i), 0.5);
  ASSERT_EQ(res.maps.size(), 4u);  // 2 layers x 2 heads
  for (const auto& m : res.maps) {
    for (int i = 0; i < 16; ++i) {
      for (int j = 0; j < 16; ++j) EXPECT_NEAR(m.alpha(i, j), 1.0 / 16, 1e-15);
    }
  }
}

TEST(Forward, AttentionRowsStochastic) {
  const auto corpus = make_multifocal_corpus(3, 5);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto params = ModelParams::random(VitConfig{}, s, {3.0, 0.5});
    const auto res = forward(params, patchify(corpus[s].image, 16));
    for (const auto& m : res.maps) {
      for (int i = 0; i < m.alpha.rows(); ++i) {
        EXPECT_NEAR(m.alpha.row(i).sum(), 1.0, 1e-9);
        EXPECT_GE(m.alpha.row(i).minCoeff(), 0.0);
        EXPECT_LE(m.alpha.row(i).maxCoeff(), 1.0);
      }
    }
    for (int i = 0; i < res.probs.size(); ++i) {
      EXPECT_GE(res.probs(i), 0.0);
      EXPECT_LE(res.probs(i), 1.0);
    }
  }
}

TEST(Forward, PermutationEquivariantWithoutPositions) {
  VitConfig cfg;
  cfg.position_embeddings = false;
  const auto params = ModelParams::random(cfg, 21);
  const auto img = make_multifocal_corpus(8, 1).front().image;
  const auto grid = patchify(img, 16);
  std::vector<int> perm(16);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(4);
  std::shuffle(perm.begin(), perm.end(), rng);
  PatchGrid shuffled = grid;
  for (int i = 0; i < 16; ++i) shuffled.patches.row(i) = grid.patches.row(perm[i]);
  const auto a = forward(params, grid).probs;
  const auto b = forward(params, shuffled).probs;
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(b(i), a(perm[i]), 1e-12);
}

TEST(Entropy, Extremes) {
  EXPECT_NEAR(attention_entropy(uniform_map(16).alpha)(0), std::log(16.0), 1e-6);
  EXPECT_NEAR(attention_entropy(one_hot_map(16).alpha)(3), 0.0, 1e-7);
  EXPECT_NEAR(attention_entropy(uniform_map(2).alpha)(1), 0.693147, 1e-6);
  MatrixXd bad = MatrixXd::Constant(4, 4, 0.3);
  EXPECT_THROW(attention_entropy(bad), DegenerateInputError);
}

TEST(Entropy, BoundedOnRandomRows) {
  std::mt19937_64 rng(2);
  std::gamma_distribution<double> g(0.3, 1.0);
  for (int t = 0; t < 100; ++t) {
    MatrixXd a(16, 16);
    for (int i = 0; i < 16; ++i) {
      for (int j = 0; j < 16; ++j) a(i, j) = g(rng) + 1e-300;
      a.row(i) /= a.row(i).sum();
    }
    const auto h = attention_entropy(a);
    EXPECT_GE(h.minCoeff(), -1e-7);
    EXPECT_LE(h.maxCoeff(), std::log(16.0) + 1e-6);
  }
}

TEST(Plar, Examples) {
  EXPECT_NEAR(plar_loss({uniform_map(16)}), -2.7726, 1e-4);
  EXPECT_NEAR(plar_loss({one_hot_map(16)}), 0.0, 1e-7);
  // Half-concentrated: half the mass on one key, the rest spread.
  MatrixXd half = MatrixXd::Constant(16, 16, 0.5 / 15);
  for (int i = 0; i < 16; ++i) half(i, i) = 0.5;
  const double l_half = plar_loss({{0, 0, half}});
  EXPECT_LT(plar_loss({uniform_map(16)}), l_half);
  EXPECT_LT(l_half, plar_loss({one_hot_map(16)}));
  // Averaged across maps.
  EXPECT_NEAR(plar_loss({uniform_map(16), one_hot_map(16)}), -std::log(16.0) / 2, 1e-6);
  LossConfig all_pairs;
  all_pairs.normalization = PlarNormalization::all_pairs;
  EXPECT_NEAR(plar_loss({uniform_map(16)}, all_pairs), -std::log(16.0) / 16, 1e-6);
  LossConfig final_only;
  final_only.aggregation = PlarAggregation::final_layer;
  AttentionMap late = one_hot_map(16);
  late.layer = 1;
  EXPECT_NEAR(plar_loss({uniform_map(16), late}, final_only), 0.0, 1e-7);
}

TEST(Plar, WithinBounds) {
  const auto corpus = make_multifocal_corpus(6, 3);
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto res = forward(ModelParams::random(VitConfig{}, s, {4.0, 0.5}), patchify(corpus[s].image, 16));
    const double l = plar_loss(res.maps);
    EXPECT_LE(l, 0.0);
    EXPECT_GE(l, -std::log(16.0) - 1e-6);
  }
}

TEST(CrossEntropy, Examples) {
  EXPECT_NEAR(ce_loss(std::vector<double>{0.9, 0.2}, std::vector<double>{1, 0}),
              -(std::log(0.9) + std::log(0.8)) / 2, 1e-12);
  EXPECT_NEAR(ce_loss(std::vector<double>{0.9, 0.2}, std::vector<double>{1, 0}), 0.16425, 1e-5);
  EXPECT_NEAR(ce_loss(std::vector<double>{0.5, 0.5, 0.5}, std::vector<double>{1, 0, 1}), std::log(2.0), 1e-12);
  EXPECT_NEAR(ce_loss(std::vector<double>{1, 0}, std::vector<double>{1, 0}), 0.0, 1e-11);
  EXPECT_THROW(ce_loss(std::vector<double>{0.5}, std::vector<double>{1, 0}), InvalidSpecError);
  EXPECT_THROW(ce_loss(std::vector<double>{0.5}, std::vector<double>{}), InvalidSpecError);
}

TEST(TotalLoss, Examples) {
  VectorXd p = VectorXd::Constant(16, 0.5);
  VectorXd y = VectorXd::Zero(16);
  y.head(5).setOnes();
  LossConfig c0;
  c0.lambda1 = 0.0;
  std::vector<AttentionMap> maps{uniform_map(16)};
  EXPECT_EQ(total_loss(p, y, maps, c0), ce_loss(p, y));
  LossConfig c1;
  c1.lambda1 = 1.0;
  EXPECT_NEAR(total_loss(p, y, maps, c1), std::log(2.0) - std::log(16.0), 1e-6);
  double prev = INFINITY;
  for (double lam : {0.1, 0.3, 0.5, 1.0}) {
    LossConfig c;
    c.lambda1 = lam;
    const double t = total_loss(p, y, maps, c);
    EXPECT_LT(t, prev);
    prev = t;
  }
}

TEST(GradCheck, TinyModelWithinTolerance) {
  const auto batch = tiny_batch(1, 2);
  for (std::uint64_t seed : {1u, 2u}) {
    const auto params = ModelParams::random(VitConfig::tiny(), seed, {2.0, 0.5});
    LossConfig cfg;
    cfg.lambda1 = 1.0;
    const auto r = grad_check(params, batch, cfg);
    EXPECT_LE(r.max_relative_error, 1e-4) << r.worst_tensor << "(" << r.worst_row << "," << r.worst_col << ")";
    EXPECT_EQ(r.checked, params.parameter_count());
  }
}

TEST(GradCheck, DefaultModelSpotCheck) {
  VitConfig cfg;
  cfg.image_size = 32;
  const auto params = ModelParams::random(cfg, 5, {2.0, 0.5});
  CorpusSpec spec;
  spec.image_size = 32;
  const auto batch = make_multifocal_corpus(2, 1, spec);
  const auto r = grad_check(params, batch, LossConfig{});
  EXPECT_LE(r.max_relative_error, 1e-4) << r.worst_tensor;
}

TEST(Gradient, PlarOnlyReachesAttentionPaths) {
  const auto batch = tiny_batch(4, 3);
  const auto params = ModelParams::random(VitConfig::tiny(), 9, {2.0, 0.5});
  LossConfig c0;
  c0.lambda1 = 0.0;
  LossConfig c1;
  c1.lambda1 = 1.0;
  auto g0 = ModelParams::zeros(VitConfig::tiny());
  auto g1 = g0;
  loss_and_gradient(params, batch, c0, &g0);
  loss_and_gradient(params, batch, c1, &g1);
  std::map<std::string, double> diff;
  g0.for_each([&](const std::string& name, const MatrixXd& m) { diff[name] = -1; (void)m; });
  std::vector<MatrixXd> a, b;
  std::vector<std::string> names;
  g0.for_each([&](const std::string& name, const MatrixXd& m) {
    names.push_back(name);
    a.push_back(m);
  });
  g1.for_each([&](const std::string&, const MatrixXd& m) { b.push_back(m); });
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double d = (a[i] - b[i]).cwiseAbs().maxCoeff();
    const bool upstream_of_attention = names[i] == "layer0.wq" || names[i] == "layer0.wk" ||
                                       names[i] == "patch_proj" || names[i] == "patch_bias" ||
                                       names[i] == "pos";
    if (upstream_of_attention) {
      EXPECT_GT(d, 1e-8) << names[i];
    } else {
      EXPECT_LT(d, 1e-14) << names[i];
    }
  }
}

TEST(Training, LossMostlyNonIncreasing) {
  const auto batch = make_multifocal_corpus(10, 4);
  auto params = ModelParams::random(VitConfig{}, 10);
  const auto hist = train(params, batch, LossConfig{}, 0.01, 50);
  ASSERT_EQ(hist.size(), 50u);
  int violations = 0;
  for (std::size_t i = 1; i < hist.size(); ++i) violations += hist[i].loss.total > hist[i - 1].loss.total;
  EXPECT_LE(violations, 5);
  EXPECT_LT(hist.back().loss.total, hist.front().loss.total);
  EXPECT_TRUE(params.all_finite());
}

TEST(Training, StepRejectsBadArgs) {
  auto params = ModelParams::random(VitConfig::tiny(), 1);
  const auto batch = tiny_batch(1, 1);
  EXPECT_THROW(train_step(params, batch, LossConfig{}, 0.0), InvalidSpecError);
  EXPECT_THROW(train_step(params, std::span<const LabeledImage>{}, LossConfig{}, 0.1), InvalidSpecError);
}

TEST(Attribution, ZeroModelFlat) {
  const auto params = ModelParams::zeros(VitConfig{});
  const auto map = patch_attribution(params, patchify(ramp_image(64, 64), 16));
  ASSERT_EQ(map.size(), 16);
  for (int i = 0; i < 16; ++i) EXPECT_EQ(map(i), 0.0);
}

TEST(Attribution, OverfitBrightPatchIsArgmax) {
  std::vector<LabeledImage> batch;
  for (int p = 0; p < 16; p += 3) batch.push_back(bright_patch_image(p, 100 + p));
  VitConfig cfg;
  cfg.d_model = 16;
  cfg.layers = 1;
  cfg.ffn_hidden = 32;
  auto params = ModelParams::random(cfg, 3);
  train(params, batch, LossConfig{}, 0.1, 200);
  for (int target : {5, 10}) {
    const auto img = bright_patch_image(target, 900 + target);
    const auto map = patch_attribution(params, patchify(img.image, 16));
    Eigen::Index arg;
    map.maxCoeff(&arg);
    EXPECT_EQ(arg, target);
    EXPECT_GE(map.minCoeff(), 0.0);
    EXPECT_DOUBLE_EQ(map.maxCoeff(), 1.0);
  }
}

TEST(Attribution, AlwaysInUnitInterval) {
  const auto corpus = make_multifocal_corpus(77, 6);
  for (std::uint64_t s = 0; s < 6; ++s) {
    const auto params = ModelParams::random(VitConfig{}, s);
    for (auto target : {TargetClass::tumor, TargetClass::background}) {
      const auto map = patch_attribution(params, patchify(corpus[s].image, 16), target);
      EXPECT_GE(map.minCoeff(), 0.0);
      EXPECT_LE(map.maxCoeff(), 1.0);
    }
  }
}

TEST(Corpus, DeterministicAndLabelled) {
  const auto a = make_multifocal_corpus(5, 4);
  const auto b = make_multifocal_corpus(5, 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].image, b[i].image);
    EXPECT_EQ(a[i].labels, b[i].labels);
    EXPECT_GE(a[i].labels.sum(), 1.0);
    EXPECT_GE(a[i].image.minCoeff(), 0.0);
    EXPECT_LE(a[i].image.maxCoeff(), 1.0);
  }
}

TEST(Checkpoint, RoundTrip) {
  const auto params = ModelParams::random(VitConfig{}, 44);
  const auto path = std::filesystem::temp_directory_path() / "nt_vit_ckpt_test.bin";
  save_checkpoint(params, path);
  const auto back = load_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.config.d_model, params.config.d_model);
  std::vector<MatrixXd> a, b;
  params.for_each([&](const std::string&, const MatrixXd& m) { a.push_back(m); });
  back.for_each([&](const std::string&, const MatrixXd& m) { b.push_back(m); });
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}
