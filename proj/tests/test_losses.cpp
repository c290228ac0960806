#include <gtest/gtest.h>

#include "fedauc/losses.hpp"
#include "fedauc/metrics.hpp"
#include "oracles.hpp"

using namespace fedauc;

namespace {

ScoringModel identity_1d() {
  auto m = ScoringModel::linear(1);
  m.params()[0] = 1.0;
  return m;
}

std::vector<double> stack(const MinimaxGrad& g) {
  std::vector<double> v = g.w;
  v.insert(v.end(), {g.a, g.b, g.alpha});
  return v;
}

std::vector<PairwiseLoss> family() {
  return {loss::Square{1.0},          loss::SquaredHinge{0.7}, loss::Logistic{1.5},
          loss::Sigmoid{0.8},         loss::BarrierHinge{1.0, 0.5}, loss::QNormHinge{1.2, 3.0}};
}

// Distance from t to the nearest point where phi is not twice differentiable.
double kink_distance(const PairwiseLoss& l, double t) {
  return std::visit(detail::Overloaded{
                        [&](const loss::SquaredHinge& s) { return std::abs(t - s.margin); },
                        [&](const loss::QNormHinge& s) { return std::abs(t - s.margin); },
                        [&](const loss::BarrierHinge& s) {
                          const double m = s.margin, tau = s.tau;
                          double v[] = {m - tau * (m + t), tau * (t - m), m - t};
                          std::sort(std::begin(v), std::end(v));
                          return v[2] - v[1];
                        },
                        [](const auto&) { return 1e9; },
                    },
                    l);
}

}  // namespace

TEST(MinimaxPartials, HandExamples) {
  auto d = minimax_partials(0.6, Label::kPositive, 0.5, 0.0, 0.0, 0.5);
  EXPECT_NEAR(d.d_h, -0.9, 1e-15);
  EXPECT_NEAR(d.d_a, -0.1, 1e-15);
  EXPECT_EQ(d.d_b, 0.0);
  EXPECT_NEAR(d.d_alpha, -0.6, 1e-15);

  d = minimax_partials(0.2, Label::kNegative, 0.0, 0.1, 1.0, 0.5);
  EXPECT_NEAR(d.d_h, 2.1, 1e-15);
  EXPECT_NEAR(d.d_b, -0.1, 1e-15);
  EXPECT_EQ(d.d_a, 0.0);
  EXPECT_NEAR(d.d_alpha, -0.3, 1e-15);

  d = minimax_partials(0.4, Label::kPositive, 0.4, 0.0, -1.0, 0.3);
  EXPECT_EQ(d.d_h, 0.0);
  EXPECT_EQ(d.d_a, 0.0);
}

TEST(MinimaxValue, HandExamples) {
  auto m = identity_1d();
  EXPECT_NEAR(minimax_value(m, 0.5, 0.0, 0.0, oracle::ex({0.6}, 1), 0.5), -0.595, 1e-15);
  EXPECT_NEAR(minimax_value(m, 0.0, 0.1, 1.0, oracle::ex({0.2}, -1), 0.5), 0.155, 1e-15);
  for (double p : {0.1, 0.5, 0.9}) {
    EXPECT_NEAR(minimax_value(m, 0.7, 3.0, -1.0, oracle::ex({0.7}, 1), p), -p * (1 - p), 1e-15);
  }
}

TEST(MinimaxValue, PriorOutOfRange) {
  auto m = identity_1d();
  EXPECT_THROW(minimax_value(m, 0, 0, 0, oracle::ex({1}, 1), 0.0), ConfigError);
  EXPECT_THROW(minimax_stoch_grad(m, 0, 0, 0, oracle::ex({1}, 1), 1.0), ConfigError);
}

TEST(MinimaxGrad, MatchesFiniteDifferences) {
  for (auto kind : {ModelKind::kLinear, ModelKind::kMlp}) {
    RngStream r(kind == ModelKind::kLinear ? 1 : 2);
    for (int trial = 0; trial < 100; ++trial) {
      auto m = oracle::random_model(kind, 3, r.fork(std::uint64_t(trial)), 4);
      auto z = oracle::ex(oracle::random_vec(3, r), r.uniform() < 0.5 ? 1 : -1);
      const double a = r.normal(), b = r.normal(), alpha = r.normal(), p = 0.05 + 0.9 * r.uniform();
      auto g = stack(minimax_stoch_grad(m, a, b, alpha, z, p));
      auto x0 = flatten(m);
      x0.insert(x0.end(), {a, b, alpha});
      auto fd = oracle::fd_grad(
          [&](const std::vector<double>& v) {
            const std::size_t n = m.param_count();
            return minimax_value(unflatten(m, std::span(v).first(n)), v[n], v[n + 1], v[n + 2], z, p);
          },
          x0);
      EXPECT_LE(oracle::rel_max_err(g, fd), 1e-5);
    }
  }
}

TEST(Prox, Examples) {
  RngStream r(3);
  MinimaxState v{oracle::random_model(ModelKind::kLinear, 2, r), 0.5, -0.5, 0.2};
  MinimaxGrad g{{1, 2, 3}, 4, 5, 6};

  auto out = add_prox_grad(g, v, ProxTerm{0.0, MinimaxState{ScoringModel::linear(2), 9, 9, 9}});
  EXPECT_EQ(stack(out), stack(g));

  out = add_prox_grad(g, v, ProxTerm{3.0, v});
  EXPECT_EQ(stack(out), stack(g));

  MinimaxState anchor = v;
  for (auto& w : anchor.model.params()) w -= 0.5;
  anchor.a -= 0.5;
  anchor.b -= 0.5;
  anchor.alpha = 100.0;
  out = add_prox_grad(g, v, ProxTerm{2.0, anchor});
  EXPECT_EQ(stack(out), (std::vector<double>{2, 3, 4, 5, 6, 6}));
}

TEST(OptimalDual, Examples) {
  auto d = optimal_dual(std::vector<double>{0.8}, std::vector<double>{0.3}, 0.5);
  EXPECT_DOUBLE_EQ(d.a, 0.8);
  EXPECT_DOUBLE_EQ(d.b, 0.3);
  EXPECT_DOUBLE_EQ(d.alpha, -0.5);
  d = optimal_dual(std::vector<double>{2.5}, std::vector<double>{2.5});
  EXPECT_EQ(d.alpha, 0.0);
  d = optimal_dual(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5});
  EXPECT_DOUBLE_EQ(d.a, 0.5);
  EXPECT_DOUBLE_EQ(d.b, 0.5);
  EXPECT_DOUBLE_EQ(d.alpha, 0.0);
  EXPECT_THROW(optimal_dual(std::vector<double>{}, std::vector<double>{1}), DataError);
}

TEST(MinimaxObjective, TwoPointExample) {
  std::vector<ClientDataset> cs(1);
  cs[0].pos.push_back(oracle::ex({0.8}, 1));
  cs[0].neg.push_back(oracle::ex({0.3}, -1));
  auto d = optimal_dual(std::vector<double>{0.8}, std::vector<double>{0.3});
  EXPECT_NEAR(minimax_objective(identity_1d(), cs, d.a, d.b, d.alpha, 0.5), -0.1875, 1e-15);
  EXPECT_NEAR(0.25 * (oracle::mean_pairwise_square(std::vector<double>{0.8}, std::vector<double>{0.3}) - 1.0),
              -0.1875, 1e-15);
}

TEST(MinimaxObjective, ConcaveInAlpha) {
  RngStream r(4);
  std::vector<ClientDataset> cs(2);
  for (int i = 0; i < 12; ++i) {
    auto e = oracle::ex(oracle::random_vec(2, r), i % 3 ? -1 : 1);
    (e.positive() ? cs[i % 2].pos : cs[i % 2].neg).push_back(e);
  }
  auto m = oracle::random_model(ModelKind::kLinear, 2, r);
  const double p = class_prior(cs).p;
  auto f = [&](double al) { return minimax_objective(m, cs, 0.3, -0.2, al, p); };
  for (double al : {-2.0, 0.0, 1.5}) {
    const double h = 1e-3;
    EXPECT_NEAR((f(al + h) - 2 * f(al) + f(al - h)) / (h * h), -2 * p * (1 - p), 1e-6);
  }
}

TEST(MinimaxObjective, DualIsStationary) {
  RngStream r(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ClientDataset> cs(3);
    for (int i = 0; i < 30; ++i) {
      auto e = oracle::ex(oracle::random_vec(3, r), r.uniform() < 0.3 ? 1 : -1);
      (e.positive() ? cs[i % 3].pos : cs[i % 3].neg).push_back(e);
    }
    cs[0].pos.push_back(oracle::ex(oracle::random_vec(3, r), 1));
    cs[1].neg.push_back(oracle::ex(oracle::random_vec(3, r), -1));
    auto m = oracle::random_model(ModelKind::kMlp, 3, r.fork(std::uint64_t(trial)), 4);
    const double p = class_prior(cs).p;
    auto [pos, neg] = pooled(cs);
    auto d = optimal_dual(scores(m, pos), scores(m, neg), p);
    double ga = 0, gb = 0, gal = 0;
    std::size_t n = 0;
    for (const auto* pool : {&pos, &neg}) {
      for (const auto& z : *pool) {
        auto g = minimax_stoch_grad(m, d.a, d.b, d.alpha, z, p);
        ga += g.a;
        gb += g.b;
        gal += g.alpha;
        ++n;
      }
    }
    EXPECT_LT(std::abs(ga / n), 1e-12);
    EXPECT_LT(std::abs(gb / n), 1e-12);
    EXPECT_LT(std::abs(gal / n), 1e-12);
  }
}

TEST(MinimaxObjective, EqualsPairwiseSquareAtDual) {
  RngStream r(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto kind = trial % 2 ? ModelKind::kMlp : ModelKind::kLinear;
    auto m = oracle::random_model(kind, 4, r.fork(std::uint64_t(trial)), 3);
    std::vector<ClientDataset> cs(2);
    const int n = 2 + int(r.index(49));
    for (int i = 0; i < n; ++i) {
      auto e = oracle::ex(oracle::random_vec(4, r), i == 0 ? 1 : (i == 1 ? -1 : (r.uniform() < 0.4 ? 1 : -1)));
      (e.positive() ? cs[r.index(2)].pos : cs[r.index(2)].neg).push_back(e);
    }
    const double p = class_prior(cs).p;
    auto [pos, neg] = pooled(cs);
    std::vector<double> hp, hn;
    for (const auto& e : pos) hp.push_back(score(m, e.features));
    for (const auto& e : neg) hn.push_back(score(m, e.features));
    auto d = optimal_dual(hp, hn, p);
    EXPECT_NEAR(minimax_objective(m, cs, d.a, d.b, d.alpha, p),
                p * (1 - p) * (oracle::mean_pairwise_square(hp, hn) - 1.0), 1e-10);
  }
}

TEST(Psi, ValueExamples) {
  EXPECT_DOUBLE_EQ(psi_value(loss::Sigmoid{1.0}, 0.3, 0.3), 0.5);
  EXPECT_DOUBLE_EQ(psi_value(loss::Square{1.0}, 1.5, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(psi_value(loss::BarrierHinge{1.0, 1.0}, 0.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(psi_value(loss::SquaredHinge{1.0}, 0.0, 0.5), 2.25);
  EXPECT_DOUBLE_EQ(psi_value(loss::SquaredHinge{1.0}, 3.0, 0.5), 0.0);
  EXPECT_NEAR(psi_value(loss::Logistic{1.0}, 0.0, 0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(psi_value(loss::QNormHinge{1.0, 3.0}, 0.0, 1.0), 8.0, 1e-12);
  EXPECT_NEAR(psi_value(loss::Sigmoid{2.0}, 1.0, 0.0), 1.0 / (1.0 + std::exp(0.5)), 1e-15);
}

TEST(Psi, GradExamples) {
  EXPECT_DOUBLE_EQ(psi_grad(loss::Sigmoid{1.0}, 0.2, 0.2).d1, -0.25);
  auto g = psi_grad(loss::SquaredHinge{1.0}, 2.5, 0.5);
  EXPECT_EQ(g.d1, 0.0);
  EXPECT_EQ(g.d2, 0.0);
  EXPECT_DOUBLE_EQ(psi_grad(loss::Logistic{1.0}, 0.0, 0.0).d1, -0.5);
}

TEST(Psi, BarrierHingeTieTakesLeftLimit) {
  // m=1, tau=1: pieces -t, t-1, 1-t. At t=1 the 1-t and t-1 pieces tie.
  loss::BarrierHinge l{1.0, 1.0};
  EXPECT_DOUBLE_EQ(psi_grad(l, 1.0, 0.0).d1, -1.0);
  EXPECT_DOUBLE_EQ(psi_grad(l, 1.0 + 1e-9, 0.0).d1, 1.0);
}

TEST(Psi, GradMatchesFiniteDifferencesAwayFromKinks) {
  RngStream r(7);
  for (const auto& l : family()) {
    int checked = 0;
    while (checked < 100) {
      const double a = 3.0 * r.normal(), b = 3.0 * r.normal();
      if (kink_distance(l, a - b) < 1e-3) continue;
      auto g = psi_grad(l, a, b);
      auto fd = oracle::fd_grad([&](const std::vector<double>& v) { return psi_value(l, v[0], v[1]); }, {a, b});
      std::vector<double> got{g.d1, g.d2};
      EXPECT_LE(oracle::rel_max_err(got, fd), 1e-5) << loss_name(l) << " t=" << a - b;
      ++checked;
    }
  }
}

TEST(Psi, Antisymmetry) {
  RngStream r(8);
  for (const auto& l : family()) {
    for (int i = 0; i < 200; ++i) {
      auto g = psi_grad(l, 2 * r.normal(), 2 * r.normal());
      EXPECT_EQ(g.d2, -g.d1);
    }
  }
}

TEST(Psi, DecreasingInGap) {
  for (const auto& l : family()) {
    // Square and the barrier hinge turn back up past t = m.
    if (std::holds_alternative<loss::Square>(l) || std::holds_alternative<loss::BarrierHinge>(l)) continue;
    double prev = psi_value(l, -5.0, 0.0);
    for (double t = -4.9; t < 5.0; t += 0.1) {
      const double v = psi_value(l, t, 0.0);
      EXPECT_LE(v, prev + 1e-12) << loss_name(l);
      prev = v;
    }
  }
}

TEST(Psi, InvalidHyperparameters) {
  EXPECT_THROW(psi_value(loss::Sigmoid{0.0}, 0, 0), ConfigError);
  EXPECT_THROW(psi_value(loss::Logistic{-1.0}, 0, 0), ConfigError);
  EXPECT_THROW(psi_value(loss::QNormHinge{1.0, 1.0}, 0, 0), ConfigError);
  EXPECT_THROW(psi_grad(loss::BarrierHinge{1.0, 0.0}, 0, 0), ConfigError);
}

TEST(PairwiseObjective, Examples) {
  auto m = identity_1d();
  std::vector<Example> pos{oracle::ex({0.2}, 1)}, neg{oracle::ex({0.5}, -1)};
  EXPECT_NEAR(pairwise_objective(m, pos, neg, loss::Square{1.0}), 1.69, 1e-14);
  EXPECT_DOUBLE_EQ(pairwise_objective(m, pos, neg, loss::Logistic{2.0}), psi_value(loss::Logistic{2.0}, 0.2, 0.5));

  std::vector<Example> p3{oracle::ex({1}, 1), oracle::ex({1}, 1)}, n3{oracle::ex({1}, -1), oracle::ex({1}, -1)};
  EXPECT_DOUBLE_EQ(pairwise_objective(m, p3, n3, loss::Sigmoid{1.0}), 0.5);
  EXPECT_THROW(pairwise_objective(m, std::vector<Example>{}, n3, loss::Sigmoid{1.0}), DataError);
}

TEST(PairwiseObjective, GradientMatchesFiniteDifferences) {
  RngStream r(9);
  std::vector<Example> pos, neg;
  for (int i = 0; i < 6; ++i) pos.push_back(oracle::ex(oracle::random_vec(3, r), 1));
  for (int i = 0; i < 9; ++i) neg.push_back(oracle::ex(oracle::random_vec(3, r), -1));
  for (const auto& l : family()) {
    if (l.index() == 4) continue;  // nonsmooth
    auto m = oracle::random_model(ModelKind::kMlp, 3, r.fork(l.index()), 4);
    auto g = pairwise_objective_grad(m, pos, neg, l);
    auto fd = oracle::fd_grad([&](const std::vector<double>& v) { return pairwise_objective(unflatten(m, v), pos, neg, l); },
                              flatten(m));
    EXPECT_LE(oracle::rel_max_err(g, fd), 1e-5) << loss_name(l);
  }
}

TEST(PairwiseObjective, SharpSigmoidApproachesOneMinusAuc) {
  RngStream r(10);
  auto m = identity_1d();
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Example> pos, neg;
    std::vector<double> hp, hn;
    for (int i = 0; i < 30; ++i) {
      hp.push_back(r.normal() + 0.5);
      pos.push_back(oracle::ex({hp.back()}, 1));
      hn.push_back(r.normal());
      neg.push_back(oracle::ex({hn.back()}, -1));
    }
    EXPECT_NEAR(pairwise_objective(m, pos, neg, loss::Sigmoid{1e-4}), 1.0 - oracle::brute_auc(hp, hn), 1e-3);
  }
}
