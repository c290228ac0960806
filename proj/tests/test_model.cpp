#include <gtest/gtest.h>

#include <filesystem>

#include "fedauc/model.hpp"
#include "oracles.hpp"

using namespace fedauc;

namespace {

ScoringModel linear_with(std::vector<double> params) {
  auto m = ScoringModel::linear(params.size() - 1);
  std::copy(params.begin(), params.end(), m.params().begin());
  return m;
}

}  // namespace

TEST(Score, LinearExamples) {
  EXPECT_DOUBLE_EQ(score(linear_with({1, 0, 0}), std::vector<double>{0.5, 9}), 0.5);
  EXPECT_DOUBLE_EQ(score(linear_with({2, -1, 0.3}), std::vector<double>{1, 1}), 1.3);
}

TEST(Score, ZeroMlpScoresZero) {
  auto m = ScoringModel::mlp(4, 7);
  RngStream r(1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(score(m, oracle::random_vec(4, r)), 0.0);
}

TEST(Score, DimensionMismatch) {
  auto m = ScoringModel::linear(3);
  EXPECT_THROW(score(m, std::vector<double>{1, 2}), ConfigError);
  EXPECT_THROW(score_grad(m, std::vector<double>{1, 2, 3, 4}), ConfigError);
}

TEST(Score, MlpMatchesHandForward) {
  RngStream r(2);
  auto m = oracle::random_model(ModelKind::kMlp, 3, r.fork(1u), 4);
  auto x = oracle::random_vec(3, r);
  const auto p = m.params();
  double h = p.back();
  for (int j = 0; j < 4; ++j) {
    double z = p[12 + j];
    for (int k = 0; k < 3; ++k) z += p[j * 3 + k] * x[k];
    h += p[16 + j] * std::tanh(z);
  }
  EXPECT_NEAR(score(m, x), h, 1e-14);
}

TEST(ScoreGrad, LinearGradientIsInput) {
  auto m = linear_with({0.3, -2, 5, 1});
  std::vector<double> x{1.5, -0.5, 2};
  auto sg = score_grad(m, x);
  EXPECT_DOUBLE_EQ(sg.h, score(m, x));
  EXPECT_EQ(sg.g, (std::vector<double>{1.5, -0.5, 2, 1}));
}

TEST(ScoreGrad, MatchesFiniteDifferences) {
  for (auto kind : {ModelKind::kLinear, ModelKind::kMlp}) {
    RngStream r(kind == ModelKind::kLinear ? 10 : 20);
    for (int trial = 0; trial < 100; ++trial) {
      auto m = oracle::random_model(kind, 4, r.fork(std::uint64_t(trial)));
      auto x = oracle::random_vec(4, r);
      auto sg = score_grad(m, x);
      EXPECT_DOUBLE_EQ(sg.h, score(m, x));
      auto fd = oracle::fd_grad([&](const std::vector<double>& v) { return score(unflatten(m, v), x); }, flatten(m));
      EXPECT_LE(oracle::rel_max_err(sg.g, fd), 1e-5);
    }
  }
}

TEST(ScoreGrad, ZeroOutputWeightsKillInputGradient) {
  RngStream r(3);
  auto m = oracle::random_model(ModelKind::kMlp, 3, r, 4);
  for (int j = 0; j < 4; ++j) m.params()[16 + j] = 0.0;
  auto sg = score_grad(m, oracle::random_vec(3, r));
  for (int i = 0; i < 16; ++i) EXPECT_EQ(sg.g[i], 0.0);
}

TEST(Axpy, Examples) {
  auto m = linear_with({1, 0});
  axpy_update(m, std::vector<double>{2, 0}, 0.1);
  EXPECT_DOUBLE_EQ(m.params()[0], 0.8);

  RngStream r(4);
  auto base = oracle::random_model(ModelKind::kMlp, 3, r);
  auto a = base;
  axpy_update(a, flatten(base), 0.0);
  EXPECT_EQ(a, base);
  axpy_update(a, std::vector<double>(base.param_count(), 0.0), 3.0);
  EXPECT_EQ(a, base);
  EXPECT_THROW(axpy_update(a, std::vector<double>{1.0}, 1.0), ConfigError);
}

TEST(Flatten, RoundTripsExactly) {
  RngStream r(5);
  auto m = oracle::random_model(ModelKind::kMlp, 6, r, 3);
  auto v = flatten(m);
  auto back = unflatten(ScoringModel::mlp(6, 3), v);
  EXPECT_EQ(flatten(back), v);
  auto x = oracle::random_vec(6, r);
  EXPECT_EQ(score(back, x), score(m, x));
  EXPECT_THROW(unflatten(m, std::vector<double>(3)), ConfigError);
}

TEST(Init, WithinFanInBounds) {
  auto m = ScoringModel::mlp(9, 4);
  init_uniform(m, RngStream(6));
  const auto p = m.params();
  for (std::size_t i = 0; i < 9 * 4 + 4; ++i) EXPECT_LE(std::abs(p[i]), 1.0 / 3.0);
  for (std::size_t i = 40; i < p.size(); ++i) EXPECT_LE(std::abs(p[i]), 0.5);
  auto again = ScoringModel::mlp(9, 4);
  init_uniform(again, RngStream(6));
  EXPECT_EQ(again, m);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  RngStream r(7);
  for (auto kind : {ModelKind::kLinear, ModelKind::kMlp}) {
    auto m = oracle::random_model(kind, 5, r.fork(std::uint64_t(kind == ModelKind::kMlp)), 3);
    m.params()[0] = 0.1 + 0.2;
    m.params()[1] = -1e-300;
    auto path = (std::filesystem::temp_directory_path() / "fedauc_model.ckpt").string();
    save_checkpoint(m, path);
    EXPECT_EQ(load_checkpoint(path), m);
  }
}

TEST(Checkpoint, RejectsGarbage) {
  auto path = (std::filesystem::temp_directory_path() / "fedauc_bad.ckpt").string();
  std::ofstream(path) << "not a model\n";
  EXPECT_THROW(load_checkpoint(path), DataError);
  std::ofstream(path) << "fedauc-model 1\nkind linear\ninput_dim 2\nhidden 0\nparams 3\n0x1p+0\n";
  EXPECT_THROW(load_checkpoint(path), DataError);
}
