#include <gtest/gtest.h>

#include "fedauc/metrics.hpp"
#include "oracles.hpp"

using namespace fedauc;

using V = std::vector<double>;

TEST(Auc, Examples) {
  EXPECT_EQ(auc(V{0.9, 0.8}, V{0.1, 0.2}), 1.0);
  EXPECT_EQ(auc(V{0.5}, V{0.5}), 0.5);
  EXPECT_EQ(auc(V{0.3, 0.9}, V{0.5}), 0.5);
  EXPECT_EQ(auc(V{0.1}, V{0.2, 0.3}), 0.0);
  EXPECT_THROW(auc(V{}, V{1}), DataError);
  EXPECT_THROW(auc(V{1}, V{}), DataError);
}

TEST(Auc, MatchesBruteForceWithTies) {
  RngStream r(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto np = 1 + r.index(200), nn = 1 + r.index(200);
    V pos(np), neg(nn);
    // Coarse grid so ties are frequent.
    for (auto& v : pos) v = std::round(4 * r.normal()) / 4 + 0.3;
    for (auto& v : neg) v = std::round(4 * r.normal()) / 4;
    EXPECT_NEAR(auc(pos, neg), oracle::brute_auc(pos, neg), 1e-12);
  }
}

TEST(Auc, ReverseSumsToOneWithoutTies) {
  RngStream r(2);
  for (int trial = 0; trial < 50; ++trial) {
    V pos(40), neg(60);
    for (auto& v : pos) v = r.normal();
    for (auto& v : neg) v = r.normal();
    EXPECT_NEAR(auc(pos, neg) + auc(neg, pos), 1.0, 1e-12);
  }
}

TEST(Auc, MonotoneTransformInvariance) {
  RngStream r(3);
  for (int trial = 0; trial < 50; ++trial) {
    V pos(30), neg(30);
    for (auto& v : pos) v = std::round(3 * r.normal()) / 3;
    for (auto& v : neg) v = std::round(3 * r.normal()) / 3;
    const double base = auc(pos, neg);
    auto tf = [](V v, auto f) {
      for (auto& x : v) x = f(x);
      return v;
    };
    auto affine = [](double x) { return 2.5 * x - 7.0; };
    auto cubic = [](double x) { return x * x * x + x; };
    auto squash = [](double x) { return std::tanh(x); };
    EXPECT_EQ(auc(tf(pos, affine), tf(neg, affine)), base);
    EXPECT_EQ(auc(tf(pos, cubic), tf(neg, cubic)), base);
    EXPECT_EQ(auc(tf(pos, squash), tf(neg, squash)), base);
  }
}

TEST(Evaluate, ConstantModelIsHalf) {
  RngStream r(4);
  auto m = ScoringModel::linear(3);
  m.bias() = 1.7;
  std::vector<Example> pos, neg;
  for (int i = 0; i < 10; ++i) pos.push_back(oracle::ex(oracle::random_vec(3, r), 1));
  for (int i = 0; i < 15; ++i) neg.push_back(oracle::ex(oracle::random_vec(3, r), -1));
  EXPECT_EQ(evaluate(m, pos, neg), 0.5);
}

TEST(Evaluate, OracleScorerOnSyntheticData) {
  RngStream root(5);
  auto u = random_direction(10, root.fork(1u));
  auto xs = make_synthetic_along(u, 2000, 0.1, 6.0, root.fork(2u));
  auto [pos, neg] = split_by_class(xs);
  auto m = ScoringModel::linear(10);
  std::copy(u.begin(), u.end(), m.params().begin());
  EXPECT_GE(evaluate(m, pos, neg), 0.99);
}
