#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fedauc/core.hpp"
#include "fedauc/error.hpp"
#include "fedauc/model.hpp"

namespace fedauc {

// ---------------------------------------------------------------------------
// Minimax surrogate for the squared pairwise loss.
//
//   F(w,a,b,alpha; z) = (1-p)(h-a)^2 [y=1] + p(h-b)^2 [y=-1]
//                       + 2(1+alpha)(p h [y=-1] - (1-p) h [y=1]) - p(1-p) alpha^2
//
// minimized over the primal triple v = (w, a, b), maximized over alpha.
// ---------------------------------------------------------------------------

struct MinimaxState {
  ScoringModel model;
  double a = 0.0;
  double b = 0.0;
  double alpha = 0.0;

  bool operator==(const MinimaxState&) const = default;
};

// Partial derivatives of F with respect to the score and the scalar variables.
struct MinimaxPartials {
  double d_h = 0.0;
  double d_a = 0.0;
  double d_b = 0.0;
  double d_alpha = 0.0;
};

struct MinimaxGrad {
  ParamVector w;
  double a = 0.0;
  double b = 0.0;
  double alpha = 0.0;
};

namespace detail {

inline void check_prior(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("minimax: class prior p must lie in (0,1)");
}

}  // namespace detail

inline double minimax_value_at_score(double h, Label y, double a, double b, double alpha, double p) {
  detail::check_prior(p);
  const double q = 1.0 - p;
  const double tail = -p * q * alpha * alpha;
  if (y == Label::kPositive) return q * (h - a) * (h - a) - 2.0 * (1.0 + alpha) * q * h + tail;
  return p * (h - b) * (h - b) + 2.0 * (1.0 + alpha) * p * h + tail;
}

inline MinimaxPartials minimax_partials(double h, Label y, double a, double b, double alpha, double p) {
  detail::check_prior(p);
  const double q = 1.0 - p;
  MinimaxPartials d;
  if (y == Label::kPositive) {
    d.d_h = 2.0 * q * (h - a) - 2.0 * (1.0 + alpha) * q;
    d.d_a = -2.0 * q * (h - a);
    d.d_alpha = -2.0 * q * h - 2.0 * p * q * alpha;
  } else {
    d.d_h = 2.0 * p * (h - b) + 2.0 * (1.0 + alpha) * p;
    d.d_b = -2.0 * p * (h - b);
    d.d_alpha = 2.0 * p * h - 2.0 * p * q * alpha;
  }
  return d;
}

inline double minimax_value(const ScoringModel& model, double a, double b, double alpha, const Example& z,
                            double p) {
  return minimax_value_at_score(score(model, z.features), z.label, a, b, alpha, p);
}

inline MinimaxGrad minimax_stoch_grad(const ScoringModel& model, double a, double b, double alpha,
                                      const Example& z, double p) {
  detail::check_prior(p);
  MinimaxGrad g;
  const double h = score_grad_into(model, z.features, g.w);
  const auto d = minimax_partials(h, z.label, a, b, alpha, p);
  for (auto& v : g.w) v *= d.d_h;
  g.a = d.d_a;
  g.b = d.d_b;
  g.alpha = d.d_alpha;
  return g;
}

// Proximal stage term (gamma/2)||v - anchor||^2 over v = (w, a, b).
struct ProxTerm {
  double gamma = 0.0;
  MinimaxState anchor;
};

inline MinimaxGrad add_prox_grad(MinimaxGrad g, const MinimaxState& v, const ProxTerm& prox) {
  detail::require(prox.gamma >= 0.0, "prox: gamma must be >= 0");
  if (prox.gamma == 0.0) return g;
  const auto w = v.model.params();
  const auto w0 = prox.anchor.model.params();
  detail::require(w.size() == w0.size() && g.w.size() == w.size(), "prox: dimension mismatch");
  for (std::size_t i = 0; i < w.size(); ++i) g.w[i] += prox.gamma * (w[i] - w0[i]);
  g.a += prox.gamma * (v.a - prox.anchor.a);
  g.b += prox.gamma * (v.b - prox.anchor.b);
  return g;
}

struct DualOptimum {
  double a = 0.0;
  double b = 0.0;
  double alpha = 0.0;
};

// Stationary (a, b, alpha) of the empirical objective for fixed scores.
inline DualOptimum optimal_dual(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  detail::require_data(!pos_scores.empty() && !neg_scores.empty(), "optimal_dual: both score lists must be non-empty");
  auto mean = [](std::span<const double> s) {
    double acc = 0.0;
    for (double v : s) acc += v;
    return acc / static_cast<double>(s.size());
  };
  const double a = mean(pos_scores);
  const double b = mean(neg_scores);
  return {a, b, b - a};
}

inline DualOptimum optimal_dual(std::span<const double> pos_scores, std::span<const double> neg_scores, double p) {
  detail::check_prior(p);
  return optimal_dual(pos_scores, neg_scores);
}

// Empirical mean of F over every example of the federation.
inline double minimax_objective(const ScoringModel& model, std::span<const ClientDataset> datasets, double a,
                                double b, double alpha, double p) {
  detail::check_prior(p);
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& c : datasets) {
    for (const auto* pool : {&c.pos, &c.neg}) {
      for (const auto& z : *pool) {
        acc += minimax_value(model, a, b, alpha, z, p);
        ++n;
      }
    }
  }
  detail::require_data(n > 0, "minimax_objective: empty federation");
  return acc / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Pairwise surrogates psi(a, b) = phi(a - b), first argument is the
// positive-class score. All but Square and BarrierHinge are non-increasing
// in t = a - b.
// ---------------------------------------------------------------------------

namespace loss {

struct Square {
  double margin = 1.0;
};
struct SquaredHinge {
  double margin = 1.0;
};
struct Logistic {
  double scale = 1.0;
};
struct Sigmoid {
  double lambda = 1.0;
};
// Nonsmooth; gradients are subgradients taken as the limit from below in t.
struct BarrierHinge {
  double margin = 1.0;
  double tau = 1.0;
};
struct QNormHinge {
  double margin = 1.0;
  double q = 2.0;
};

}  // namespace loss

using PairwiseLoss =
    std::variant<loss::Square, loss::SquaredHinge, loss::Logistic, loss::Sigmoid, loss::BarrierHinge, loss::QNormHinge>;

struct PsiGrad {
  double d1 = 0.0;  // d psi / d a
  double d2 = 0.0;  // d psi / d b
};

namespace detail {

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

// phi(t) and phi'(t) for each family member.
inline std::pair<double, double> phi(const PairwiseLoss& loss, double t) {
  return std::visit(
      Overloaded{
          [t](const loss::Square& l) {
            const double r = l.margin - t;
            return std::pair{r * r, -2.0 * r};
          },
          [t](const loss::SquaredHinge& l) {
            const double r = std::max(0.0, l.margin - t);
            return std::pair{r * r, -2.0 * r};
          },
          [t](const loss::Logistic& l) {
            return std::pair{softplus(-l.scale * t), -l.scale * stable_sigmoid(-l.scale * t)};
          },
          [t](const loss::Sigmoid& l) {
            const double s = stable_sigmoid(-t / l.lambda);
            return std::pair{s, -s * (1.0 - s) / l.lambda};
          },
          [t](const loss::BarrierHinge& l) {
            // Pieces (value, slope); ties resolved toward the smaller slope,
            // which is the piece that dominates just below t.
            const std::pair<double, double> pieces[] = {
                {l.margin - l.tau * (l.margin + t), -l.tau},
                {l.tau * (t - l.margin), l.tau},
                {l.margin - t, -1.0},
            };
            auto best = pieces[0];
            for (const auto& pc : pieces) {
              if (pc.first > best.first || (pc.first == best.first && pc.second < best.second)) best = pc;
            }
            return best;
          },
          [t](const loss::QNormHinge& l) {
            const double r = std::max(0.0, l.margin - t);
            if (r == 0.0) return std::pair{0.0, 0.0};
            return std::pair{std::pow(r, l.q), -l.q * std::pow(r, l.q - 1.0)};
          },
      },
      loss);
}

}  // namespace detail

inline void validate(const PairwiseLoss& loss) {
  std::visit(detail::Overloaded{
                 [](const loss::Square&) {},
                 [](const loss::SquaredHinge&) {},
                 [](const loss::Logistic& l) { detail::require(l.scale > 0.0, "logistic loss: scale must be > 0"); },
                 [](const loss::Sigmoid& l) { detail::require(l.lambda > 0.0, "sigmoid loss: lambda must be > 0"); },
                 [](const loss::BarrierHinge& l) {
                   detail::require(l.tau > 0.0, "barrier hinge loss: tau must be > 0");
                 },
                 [](const loss::QNormHinge& l) { detail::require(l.q > 1.0, "q-norm hinge loss: q must be > 1"); },
             },
             loss);
}

inline std::string loss_name(const PairwiseLoss& loss) {
  static const char* names[] = {"square", "squared_hinge", "logistic", "sigmoid", "barrier_hinge", "qnorm_hinge"};
  return names[loss.index()];
}

inline double psi_value(const PairwiseLoss& loss, double a, double b) {
  validate(loss);
  return detail::phi(loss, a - b).first;
}

inline PsiGrad psi_grad(const PairwiseLoss& loss, double a, double b) {
  validate(loss);
  const double d = detail::phi(loss, a - b).second;
  return {d, -d};
}

inline std::vector<double> scores(const ScoringModel& model, std::span<const Example> examples) {
  std::vector<double> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(score(model, ex.features));
  return out;
}

// Mean of psi(h(z), h(z')) over all positive x negative pairs.
inline double pairwise_objective(const ScoringModel& model, std::span<const Example> pos,
                                 std::span<const Example> neg, const PairwiseLoss& loss) {
  detail::require_data(!pos.empty() && !neg.empty(), "pairwise_objective: both classes must be non-empty");
  validate(loss);
  const auto hp = scores(model, pos);
  const auto hn = scores(model, neg);
  double acc = 0.0;
  for (double a : hp)
    for (double b : hn) acc += detail::phi(loss, a - b).first;
  return acc / (static_cast<double>(hp.size()) * static_cast<double>(hn.size()));
}

// Exact gradient of pairwise_objective with respect to the model parameters.
inline ParamVector pairwise_objective_grad(const ScoringModel& model, std::span<const Example> pos,
                                           std::span<const Example> neg, const PairwiseLoss& loss) {
  detail::require_data(!pos.empty() && !neg.empty(), "pairwise_objective_grad: both classes must be non-empty");
  validate(loss);
  const auto hp = scores(model, pos);
  const auto hn = scores(model, neg);
  const double scale = 1.0 / (static_cast<double>(hp.size()) * static_cast<double>(hn.size()));
  ParamVector total(model.param_count(), 0.0), g;
  // Positive side: sum_j d1 psi(h_i, h_j) * grad h_i; the negative side mirrors it.
  for (std::size_t i = 0; i < pos.size(); ++i) {
    double coeff = 0.0;
    for (double b : hn) coeff += detail::phi(loss, hp[i] - b).second;
    score_grad_into(model, pos[i].features, g);
    for (std::size_t k = 0; k < g.size(); ++k) total[k] += scale * coeff * g[k];
  }
  for (std::size_t j = 0; j < neg.size(); ++j) {
    double coeff = 0.0;
    for (double a : hp) coeff -= detail::phi(loss, a - hn[j]).second;
    score_grad_into(model, neg[j].features, g);
    for (std::size_t k = 0; k < g.size(); ++k) total[k] += scale * coeff * g[k];
  }
  return total;
}

}  // namespace fedauc
