#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "neurotwin/brainstate.hpp"
#include "neurotwin/error.hpp"

using namespace neurotwin;
using namespace neurotwin::brainstate;

namespace {

MatrixXd random_inputs(std::mt19937_64& rng, int t, int in = 11) {
  std::normal_distribution<double> n(0, 1);
  MatrixXd x(t, in);
  for (int r = 0; r < t; ++r) {
    for (int c = 0; c < in; ++c) x(r, c) = n(rng);
  }
  return x;
}

features::FeatureVector fv_from(std::mt19937_64& rng, double center) {
  std::normal_distribution<double> n(center, 0.3);
  std::array<double, features::kFeatureCount> a{};
  for (auto& v : a) v = n(rng);
  return features::FeatureVector::from_array(a);
}

// Three well-separated clusters of random sequences.
std::vector<SequenceSample> separable_set(std::uint64_t seed, int per_class, int t = 4) {
  std::mt19937_64 rng(seed);
  std::vector<SequenceSample> out;
  for (int c = 0; c < kStateCount; ++c) {
    for (int i = 0; i < per_class; ++i) {
      SequenceSample s;
      s.label = static_cast<BrainState>(c);
      for (int k = 0; k < t; ++k) s.windows.push_back(fv_from(rng, 2.0 * c));
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace

TEST(Lstm, ZeroParamsGiveThirds) {
  const auto p = BiLstmParams::zeros();
  std::mt19937_64 rng(1);
  const auto pred = forward(p, random_inputs(rng, 5));
  for (double v : pred.probs) EXPECT_DOUBLE_EQ(v, 1.0 / 3);
}

TEST(Lstm, SingleStepSequence) {
  const auto p = BiLstmParams::random(3);
  std::mt19937_64 rng(2);
  const auto pred = forward(p, random_inputs(rng, 1));
  EXPECT_NEAR(pred.probs[0] + pred.probs[1] + pred.probs[2], 1.0, 1e-12);
}

TEST(Lstm, ProbsSumToOneAndShiftInvariant) {
  std::mt19937_64 rng(3);
  for (std::uint64_t s = 0; s < 30; ++s) {
    auto p = BiLstmParams::random(s);
    const auto x = random_inputs(rng, 1 + static_cast<int>(s % 7));
    const auto a = forward(p, x);
    EXPECT_NEAR(a.probs[0] + a.probs[1] + a.probs[2], 1.0, 1e-12);
    p.out_b.array() += 12.5;
    const auto b = forward(p, x);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(a.probs[k], b.probs[k], 1e-12);
    EXPECT_EQ(forward(p, x), b);
  }
}

TEST(Lstm, TiedCellsAreReversalInvariant) {
  auto p = BiLstmParams::random(8);
  p.bwd = p.fwd;
  const int h = p.hidden;
  p.out_w.rightCols(h) = p.out_w.leftCols(h);
  std::mt19937_64 rng(4);
  const auto x = random_inputs(rng, 6);
  const MatrixXd rev = x.colwise().reverse();
  const auto a = forward(p, x);
  const auto b = forward(p, rev);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(a.probs[k], b.probs[k], 1e-12);
}

TEST(Lstm, GradCheckH16T3) {
  std::mt19937_64 rng(5);
  std::vector<MatrixXd> xs{random_inputs(rng, 3), random_inputs(rng, 3)};
  std::vector<BrainState> ys{BrainState::seizure, BrainState::healthy};
  for (std::uint64_t s : {1u, 2u, 3u}) {
    EXPECT_LE(grad_check(BiLstmParams::random(s), xs, ys), 1e-4);
  }
}

TEST(Lstm, ShapeErrors) {
  const auto p = BiLstmParams::random(1);
  EXPECT_THROW(forward(p, MatrixXd::Zero(3, 10)), ShapeError);
  EXPECT_THROW(forward(p, MatrixXd::Zero(0, 11)), ShapeError);
}

TEST(Training, OverfitsTwentySamples) {
  auto data = separable_set(6, 7);
  data.resize(20);
  TrainReport rep;
  TrainOptions opt;
  opt.epochs = 500;
  const auto model = train(data, opt, &rep);
  EXPECT_DOUBLE_EQ(accuracy(model, data), 1.0);
  EXPECT_DOUBLE_EQ(rep.train_accuracy, 1.0);
  ASSERT_GT(rep.loss_per_epoch.size(), 100u);
  EXPECT_LT(rep.loss_per_epoch[100], rep.loss_per_epoch[0]);
}

TEST(Training, SyntheticCorpusLossDrops) {
  const auto data = synth_state_dataset(11, 4);
  TrainReport rep;
  TrainOptions opt;
  opt.epochs = 120;
  train(data, opt, &rep);
  EXPECT_LT(rep.loss_per_epoch[100], rep.loss_per_epoch[0]);
}

TEST(Training, EmptyDatasetRejected) {
  EXPECT_THROW(train(std::span<const SequenceSample>{}, TrainOptions{}), InvalidSpecError);
}

TEST(Dataset, DeterministicAndBalanced) {
  const auto a = synth_state_dataset(21, 3);
  const auto b = synth_state_dataset(21, 3);
  ASSERT_EQ(a.size(), 9u);
  std::array<int, 3> counts{};
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].label, b[i].label);
    EXPECT_EQ(a[i].windows, b[i].windows);
    EXPECT_EQ(a[i].windows.size(), 10u);
    ++counts[static_cast<int>(a[i].label)];
  }
  EXPECT_EQ(counts, (std::array<int, 3>{3, 3, 3}));
}

TEST(Dataset, HealthyAlphaExceedsSeizureAlpha) {
  const auto d = synth_state_dataset(33, 5);
  double alpha[3] = {0, 0, 0};
  int n[3] = {0, 0, 0};
  for (const auto& s : d) {
    for (const auto& w : s.windows) {
      alpha[static_cast<int>(s.label)] += w.alpha_pw;
      ++n[static_cast<int>(s.label)];
    }
  }
  EXPECT_GT(alpha[2] / n[2], alpha[0] / n[0]);
}

TEST(Dataset, CsvRoundTrip) {
  const auto d = synth_state_dataset(2, 1);
  const auto back = dataset_from_csv(dataset_to_csv(d));
  ASSERT_EQ(back.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(back[i].label, d[i].label);
    EXPECT_EQ(back[i].windows, d[i].windows);
  }
}

TEST(Normalization, RefitStatsMakePredictionScaleInvariant) {
  const auto data = separable_set(9, 3);
  TrainOptions opt;
  opt.epochs = 50;
  const auto model = train(data, opt);
  auto scaled = data;
  const double c = 37.0;
  for (auto& s : scaled) {
    for (auto& w : s.windows) {
      auto a = w.to_array();
      for (auto& v : a) v *= c;
      w = features::FeatureVector::from_array(a);
    }
  }
  StateModel refit{model.params, NormStats::fit(scaled)};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto a = model.predict(data[i].windows);
    const auto b = refit.predict(scaled[i].windows);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(a.probs[k], b.probs[k], 1e-9);
  }
}

TEST(Model, SaveLoadRoundTrip) {
  const auto data = separable_set(10, 2);
  TrainOptions opt;
  opt.epochs = 10;
  const auto model = train(data, opt);
  const auto path = std::filesystem::temp_directory_path() / "nt_state_model_test.bin";
  model.save(path);
  const auto back = StateModel::load(path);
  std::filesystem::remove(path);
  for (const auto& s : data) EXPECT_EQ(model.predict(s.windows), back.predict(s.windows));
}

TEST(Logistic, SeparableData) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0, 1);
  MatrixXd x(200, 11);
  std::vector<int> y(200);
  for (int i = 0; i < 200; ++i) {
    y[i] = i % 2;
    for (int c = 0; c < 11; ++c) x(i, c) = 0.1 * n(rng);
    x(i, 0) = (y[i] ? 2.0 : -2.0) + n(rng) * 0.5;
    x(i, 3) = (y[i] ? 1.0 : -1.0) + n(rng) * 0.5;
  }
  const auto m = train_logistic(x, y);
  int correct = 0;
  for (int i = 0; i < 200; ++i) {
    std::array<double, 11> row{};
    for (int c = 0; c < 11; ++c) row[c] = x(i, c);
    correct += (fog::risk_score(row, m)[1] >= 0.5) == (y[i] == 1);
  }
  EXPECT_GE(correct, 190);
  EXPECT_EQ(m.weights.rows(), 2);
  EXPECT_EQ(m.weights.cols(), 11);
  EXPECT_EQ(m.bias.size(), 2);
}

TEST(Logistic, SymmetricDataGivesHalf) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0, 1);
  MatrixXd x(40, 11);
  std::vector<int> y(40);
  for (int i = 0; i < 20; ++i) {
    for (int c = 0; c < 11; ++c) x(i, c) = n(rng);
    x.row(i + 20) = x.row(i);
    y[i] = 0;
    y[i + 20] = 1;
  }
  const auto m = train_logistic(x, y);
  EXPECT_LT((m.weights.row(1) - m.weights.row(0)).cwiseAbs().maxCoeff(), 1e-6);
  std::array<double, 11> row{};
  for (int c = 0; c < 11; ++c) row[c] = x(3, c);
  EXPECT_NEAR(fog::risk_score(row, m)[1], 0.5, 1e-6);
}

TEST(Logistic, LossDecreasesAndErrors) {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> n(0, 1);
  MatrixXd x(30, 11);
  std::vector<int> y(30);
  for (int i = 0; i < 30; ++i) {
    y[i] = i < 15;
    for (int c = 0; c < 11; ++c) x(i, c) = n(rng) + (y[i] ? 0.7 : 0.0);
  }
  EXPECT_LT(logistic_loss(train_logistic(x, y, 0.5, 50), x, y), std::log(2.0));
  std::vector<int> one_class(30, 1);
  EXPECT_THROW(train_logistic(x, one_class), DegenerateInputError);
  std::vector<int> short_y(10, 0);
  EXPECT_THROW(train_logistic(x, short_y), ShapeError);
}
