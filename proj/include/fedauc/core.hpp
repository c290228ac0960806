#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedauc/error.hpp"
#include "fedauc/rng.hpp"

namespace fedauc {

enum class Label : std::int8_t { kNegative = -1, kPositive = 1 };

inline double sign(Label y) { return y == Label::kPositive ? 1.0 : -1.0; }

struct Example {
  std::vector<double> features;
  Label label = Label::kNegative;

  bool positive() const { return label == Label::kPositive; }
  std::size_t dim() const { return features.size(); }
};

// One client's local data split into its positive and negative pools.
struct ClientDataset {
  int client_id = 0;
  std::vector<Example> pos;
  std::vector<Example> neg;

  std::size_t size() const { return pos.size() + neg.size(); }
  bool empty() const { return pos.empty() && neg.empty(); }

  // Index into the combined pool: [0, |pos|) are positives, the rest negatives.
  const Example& at(std::size_t i) const { return i < pos.size() ? pos[i] : neg[i - pos.size()]; }
};

struct DatasetStats {
  double p = 0.5;  // empirical positive-class prior
};

// Client-to-group assignment. Groups are visited in a fixed cycle by the
// scheduler; M clients from the visited group participate per round.
struct FederationLayout {
  int num_clients = 1;
  int num_groups = 1;
  int per_round = 1;
  std::vector<int> assignment;  // client id -> group index

  // Contiguous blocks by client id. When K divides N every group has N/K
  // clients; otherwise block sizes differ by at most one.
  static FederationLayout contiguous(int n, int k, int m) {
    detail::require(n >= 1 && k >= 1 && m >= 1, "layout: N, K, M must be >= 1");
    detail::require(k <= n, "layout: K must not exceed N");
    FederationLayout layout{n, k, m, std::vector<int>(static_cast<std::size_t>(n))};
    for (int c = 0; c < n; ++c) {
      layout.assignment[static_cast<std::size_t>(c)] =
          static_cast<int>(static_cast<std::int64_t>(c) * k / n);
    }
    layout.validate();
    return layout;
  }

  // Same block structure, but client permutation[i] takes the slot of client i.
  static FederationLayout permuted(int n, int k, int m, std::span<const int> permutation) {
    detail::require(permutation.size() == static_cast<std::size_t>(n),
                    "layout: permutation length must equal N");
    FederationLayout base = contiguous(n, k, m);
    FederationLayout layout = base;
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (int i = 0; i < n; ++i) {
      int c = permutation[static_cast<std::size_t>(i)];
      detail::require(c >= 0 && c < n && !seen[static_cast<std::size_t>(c)],
                      "layout: permutation must be a permutation of [0,N)");
      seen[static_cast<std::size_t>(c)] = true;
      layout.assignment[static_cast<std::size_t>(c)] = base.assignment[static_cast<std::size_t>(i)];
    }
    layout.validate();
    return layout;
  }

  // Members of each group, ascending client id.
  std::vector<std::vector<int>> groups() const {
    std::vector<std::vector<int>> g(static_cast<std::size_t>(num_groups));
    for (int c = 0; c < num_clients; ++c) g[static_cast<std::size_t>(assignment[static_cast<std::size_t>(c)])].push_back(c);
    return g;
  }

  void validate() const {
    detail::require(assignment.size() == static_cast<std::size_t>(num_clients),
                    "layout: assignment size must equal N");
    for (int g : assignment) detail::require(g >= 0 && g < num_groups, "layout: group index out of range");
    for (const auto& members : groups()) {
      detail::require(static_cast<int>(members.size()) >= per_round,
                      "layout: every group needs at least M clients (M=" + std::to_string(per_round) +
                          ", group size=" + std::to_string(members.size()) + ")");
    }
  }
};

inline std::pair<std::vector<Example>, std::vector<Example>> split_by_class(std::span<const Example> examples) {
  std::pair<std::vector<Example>, std::vector<Example>> out;
  for (const auto& ex : examples) (ex.positive() ? out.first : out.second).push_back(ex);
  return out;
}

// All examples of a federation, positives then negatives, in client order.
inline std::pair<std::vector<Example>, std::vector<Example>> pooled(std::span<const ClientDataset> clients) {
  std::pair<std::vector<Example>, std::vector<Example>> out;
  for (const auto& c : clients) {
    out.first.insert(out.first.end(), c.pos.begin(), c.pos.end());
    out.second.insert(out.second.end(), c.neg.begin(), c.neg.end());
  }
  return out;
}

namespace detail {

inline std::vector<ClientDataset> empty_clients(int n) {
  std::vector<ClientDataset> clients(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) clients[static_cast<std::size_t>(i)].client_id = i;
  return clients;
}

inline void place(ClientDataset& c, const Example& ex) { (ex.positive() ? c.pos : c.neg).push_back(ex); }

}  // namespace detail

// Class-conditional Dirichlet partition: for each class one proportion vector
// q ~ Dir(dir, ..., dir) over the N clients is drawn, then each example of that
// class goes to client j with probability q_j.
inline std::vector<ClientDataset> dirichlet_partition(std::span<const Example> examples, int n, double dir,
                                                      RngStream rng) {
  detail::require(n >= 1, "dirichlet_partition: N must be >= 1");
  detail::require(dir > 0.0 && std::isfinite(dir), "dirichlet_partition: concentration must be positive");
  detail::require_data(!examples.empty(), "dirichlet_partition: no examples");

  auto clients = detail::empty_clients(n);
  for (Label cls : {Label::kPositive, Label::kNegative}) {
    RngStream r = rng.fork(cls == Label::kPositive ? 1u : 2u);
    std::vector<double> cumulative(static_cast<std::size_t>(n));
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      total += r.gamma(dir);
      cumulative[static_cast<std::size_t>(j)] = total;
    }
    std::size_t forced = total > 0.0 ? 0 : r.index(static_cast<std::size_t>(n));
    for (const auto& ex : examples) {
      if (ex.label != cls) continue;
      std::size_t j = forced;
      if (total > 0.0) {
        const double u = r.uniform() * total;
        j = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        j = std::min(j, static_cast<std::size_t>(n - 1));
      }
      detail::place(clients[j], ex);
    }
  }
  return clients;
}

// Stratified round-robin split after a per-class shuffle; every client gets
// floor or ceil of its share of each class.
inline std::vector<ClientDataset> iid_partition(std::span<const Example> examples, int n, RngStream rng) {
  detail::require(n >= 1, "iid_partition: N must be >= 1");
  detail::require_data(!examples.empty(), "iid_partition: no examples");
  auto clients = detail::empty_clients(n);
  auto [pos, neg] = split_by_class(examples);
  RngStream rp = rng.fork(1u), rn = rng.fork(2u);
  rp.shuffle(pos);
  rn.shuffle(neg);
  for (std::size_t i = 0; i < pos.size(); ++i) clients[i % static_cast<std::size_t>(n)].pos.push_back(pos[i]);
  for (std::size_t i = 0; i < neg.size(); ++i) clients[i % static_cast<std::size_t>(n)].neg.push_back(neg[i]);
  return clients;
}

// Relabels exactly round(ratio * n_pos) positives, chosen uniformly over the
// whole federation, as negatives and moves them to their client's neg pool.
inline std::vector<ClientDataset> flip_labels(std::vector<ClientDataset> datasets, double ratio, RngStream rng) {
  detail::require(ratio >= 0.0 && ratio <= 1.0, "flip_labels: ratio must lie in [0,1]");
  std::vector<std::pair<std::size_t, std::size_t>> slots;  // (client, index in pos)
  for (std::size_t c = 0; c < datasets.size(); ++c)
    for (std::size_t i = 0; i < datasets[c].pos.size(); ++i) slots.emplace_back(c, i);

  const auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(slots.size())));
  if (count == 0) return datasets;

  // Partial Fisher-Yates: the first `count` slots are the sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + rng.index(slots.size() - i);
    std::swap(slots[i], slots[j]);
  }
  std::vector<std::vector<bool>> flipped(datasets.size());
  for (std::size_t c = 0; c < datasets.size(); ++c) flipped[c].assign(datasets[c].pos.size(), false);
  for (std::size_t i = 0; i < count; ++i) flipped[slots[i].first][slots[i].second] = true;

  for (std::size_t c = 0; c < datasets.size(); ++c) {
    auto& client = datasets[c];
    std::vector<Example> kept;
    for (std::size_t i = 0; i < client.pos.size(); ++i) {
      if (flipped[c][i]) {
        Example ex = std::move(client.pos[i]);
        ex.label = Label::kNegative;
        client.neg.push_back(std::move(ex));
      } else {
        kept.push_back(std::move(client.pos[i]));
      }
    }
    client.pos = std::move(kept);
  }
  return datasets;
}

inline std::vector<double> random_direction(std::size_t d, RngStream rng) {
  detail::require(d >= 1, "random_direction: dimension must be >= 1");
  std::vector<double> u(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& v : u) {
      v = rng.normal();
      norm += v * v;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& v : u) v /= norm;
  return u;
}

// Two unit-covariance Gaussian clouds with means at +-margin/2 along `direction`.
inline std::vector<Example> make_synthetic_along(std::span<const double> direction, std::size_t n,
                                                 double pos_fraction, double margin, RngStream rng) {
  detail::require(n >= 2, "make_synthetic: n must be >= 2");
  detail::require(pos_fraction > 0.0 && pos_fraction < 1.0, "make_synthetic: pos_fraction must lie in (0,1)");
  detail::require(margin >= 0.0, "make_synthetic: margin must be >= 0");
  const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(n) * pos_fraction));
  detail::require(n_pos >= 1 && n_pos < n, "make_synthetic: n and pos_fraction leave a class empty");

  std::vector<Example> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool positive = i < n_pos;
    const double shift = (positive ? 0.5 : -0.5) * margin;
    auto& ex = out[i];
    ex.label = positive ? Label::kPositive : Label::kNegative;
    ex.features.resize(direction.size());
    for (std::size_t j = 0; j < direction.size(); ++j) ex.features[j] = shift * direction[j] + rng.normal();
  }
  rng.shuffle(out);
  return out;
}

inline std::vector<Example> make_synthetic(std::size_t n, std::size_t d, double pos_fraction, double margin,
                                           RngStream rng) {
  const auto u = random_direction(d, rng.fork(1u));
  return make_synthetic_along(u, n, pos_fraction, margin, rng.fork(2u));
}

// Label-first CSV: label in {1, 0, -1}, then real-valued features.
inline std::vector<Example> load_csv(const std::string& path, bool skip_header = false) {
  std::ifstream in(path);
  if (!in) throw DataError("load_csv: cannot open '" + path + "'");

  auto parse_double = [&](std::string_view tok, std::size_t line_no) {
    while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r')) tok.remove_suffix(1);
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed value '" + std::string(tok) + "'");
    }
    return v;
  };

  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_header && line_no == 1) continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    std::vector<double> values;
    std::string_view rest(line);
    while (true) {
      auto comma = rest.find(',');
      values.push_back(parse_double(rest.substr(0, comma), line_no));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (values.size() < 2) {
      throw DataError(path + ":" + std::to_string(line_no) + ": row needs a label and at least one feature");
    }
    Example ex;
    if (values[0] == 1.0) {
      ex.label = Label::kPositive;
    } else if (values[0] == 0.0 || values[0] == -1.0) {
      ex.label = Label::kNegative;
    } else {
      throw DataError(path + ":" + std::to_string(line_no) + ": unknown label value");
    }
    ex.features.assign(values.begin() + 1, values.end());
    if (out.empty()) {
      dim = ex.features.size();
    } else if (ex.features.size() != dim) {
      throw DataError(path + ":" + std::to_string(line_no) + ": row has " + std::to_string(ex.features.size()) +
                      " features, expected " + std::to_string(dim));
    }
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw DataError("load_csv: '" + path + "' contains no rows");
  return out;
}

inline DatasetStats class_prior(std::span<const ClientDataset> datasets) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& c : datasets) {
    n_pos += c.pos.size();
    n_neg += c.neg.size();
  }
  detail::require_data(n_pos > 0 && n_neg > 0, "class_prior: federation needs both classes");
  return {static_cast<double>(n_pos) / static_cast<double>(n_pos + n_neg)};
}

}  // namespace fedauc
