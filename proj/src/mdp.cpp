#include "aspect/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <utility>

namespace aspect {

namespace {

constexpr double kRowSumTolerance = 1e-12;

// Nonzero transition entries per (s,a), for fast sweeps over sparse models.
struct SparseRows {
  std::vector<std::pair<int, double>> entries;
  std::vector<std::size_t> offsets;  // per (s,a), size S*A+1

  std::span<const std::pair<int, double>> row(int s, int a, int num_actions) const {
    std::size_t i = static_cast<std::size_t>(s) * num_actions + a;
    return {entries.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
};

SparseRows build_sparse_rows(const TabularMdp& mdp) {
  const int ns = mdp.num_states();
  const int na = mdp.num_actions;
  SparseRows rows;
  rows.offsets.reserve(static_cast<std::size_t>(ns) * na + 1);
  rows.offsets.push_back(0);
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      for (int s2 = 0; s2 < ns; ++s2) {
        double p = mdp.trans(s, a, s2);
        if (p != 0.0) rows.entries.emplace_back(s2, p);
      }
      rows.offsets.push_back(rows.entries.size());
    }
  }
  return rows;
}

void check_dimensions(const TabularMdp& mdp, const StochasticPolicy& policy) {
  if (policy.num_actions != mdp.num_actions ||
      policy.num_states() != mdp.num_states()) {
    throw ContractViolation("policy dimensions do not match the MDP: policy " +
                            std::to_string(policy.num_states()) + "x" +
                            std::to_string(policy.num_actions) + ", MDP " +
                            std::to_string(mdp.num_states()) + "x" +
                            std::to_string(mdp.num_actions));
  }
}

void check_value_size(const TabularMdp& mdp, const ValueFunction& value) {
  if (static_cast<int>(value.size()) != mdp.num_states()) {
    throw ContractViolation("value function has " +
                            std::to_string(value.size()) + " entries, MDP has " +
                            std::to_string(mdp.num_states()) + " states");
  }
}

double max_abs_reward(const TabularMdp& mdp) {
  double m = 0.0;
  for (double r : mdp.reward) m = std::max(m, std::abs(r));
  return m;
}

// Iterations until gamma^k * v_range falls below the stopping threshold,
// plus margin. Exceeding this signals an invalid model, not slow progress.
long iteration_cap(double gamma, double threshold, double v_range) {
  long cap = 64;
  if (v_range > threshold && threshold > 0.0) {
    cap += static_cast<long>(
        std::ceil(std::log(threshold / v_range) / std::log(gamma)));
  }
  return cap;
}

}  // namespace

int TabularMdp::semantic_index(const std::string& label) const {
  for (int v = 0; v < vocab_size(); ++v) {
    if (semantic_vocab[v] == label) return v;
  }
  throw VocabularyError("label '" + label + "' is not in the semantic vocabulary");
}

TabularMdp TabularMdp::zeros(int num_structural, std::vector<std::string> vocab,
                             int num_actions, double gamma) {
  if (num_structural <= 0 || vocab.empty() || num_actions <= 0) {
    throw ContractViolation("MDP shape parameters must be positive");
  }
  TabularMdp mdp;
  mdp.num_structural = num_structural;
  mdp.semantic_vocab = std::move(vocab);
  mdp.num_actions = num_actions;
  mdp.gamma = gamma;
  const std::size_t ns = static_cast<std::size_t>(mdp.num_states());
  mdp.transition.assign(ns * num_actions * ns, 0.0);
  mdp.reward.assign(ns * num_actions, 0.0);
  return mdp;
}

StochasticPolicy StochasticPolicy::uniform(int num_states, int num_actions) {
  StochasticPolicy p;
  p.num_actions = num_actions;
  p.probs.assign(static_cast<std::size_t>(num_states) * num_actions,
                 1.0 / num_actions);
  return p;
}

StochasticPolicy StochasticPolicy::deterministic(const std::vector<int>& actions,
                                                 int num_actions) {
  StochasticPolicy p;
  p.num_actions = num_actions;
  p.probs.assign(actions.size() * static_cast<std::size_t>(num_actions), 0.0);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] < 0 || actions[s] >= num_actions) {
      throw ContractViolation("action index out of range in deterministic policy");
    }
    p.probs[s * num_actions + actions[s]] = 1.0;
  }
  return p;
}

std::vector<double> StateEmbedding::embed(FactoredState s) const {
  if (s.u < 0 || s.u >= num_structural || s.v < 0 || s.v >= num_semantics) {
    throw ContractViolation("state outside the embedding's factorization");
  }
  std::vector<double> e(dimension(), 0.0);
  e[s.u] = 1.0;
  e[num_structural + s.v] = 1.0;
  return e;
}

double StateEmbedding::distance(FactoredState a, FactoredState b) const {
  if (a.u < 0 || a.u >= num_structural || a.v < 0 || a.v >= num_semantics ||
      b.u < 0 || b.u >= num_structural || b.v < 0 || b.v >= num_semantics) {
    throw ContractViolation("state outside the embedding's factorization");
  }
  // Euclidean distance between the one-hot embeddings in closed form.
  double sq = (a.u != b.u ? 2.0 : 0.0) + (a.v != b.v ? 2.0 : 0.0);
  return std::sqrt(sq);
}

std::vector<ValidationIssue> validate_mdp(const TabularMdp& mdp) {
  std::vector<ValidationIssue> issues;
  const int ns = mdp.num_states();
  const int na = mdp.num_actions;

  if (mdp.num_structural <= 0 || mdp.semantic_vocab.empty() || na <= 0) {
    issues.push_back({"MDP shape parameters must be positive"});
    return issues;
  }
  if (mdp.transition.size() !=
      static_cast<std::size_t>(ns) * na * ns) {
    issues.push_back({"transition tensor has wrong size"});
    return issues;
  }
  if (mdp.reward.size() != static_cast<std::size_t>(ns) * na) {
    issues.push_back({"reward table has wrong size"});
    return issues;
  }
  if (!(mdp.gamma > 0.0) || !(mdp.gamma < 1.0)) {
    issues.push_back({"discount not in (0,1): gamma=" + std::to_string(mdp.gamma)});
  }
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < ns; ++s2) {
        double p = mdp.trans(s, a, s2);
        if (p < 0.0) {
          issues.push_back({"negative probability T(" + std::to_string(s2) +
                                "|s=" + std::to_string(s) +
                                ",a=" + std::to_string(a) + ")",
                            s, a});
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        issues.push_back({"non-stochastic row at (s=" + std::to_string(s) +
                              ",a=" + std::to_string(a) +
                              "): sum=" + std::to_string(sum),
                          s, a});
      }
      if (!std::isfinite(mdp.rew(s, a))) {
        issues.push_back({"non-finite reward at (s=" + std::to_string(s) +
                              ",a=" + std::to_string(a) + ")",
                          s, a});
      }
    }
  }
  return issues;
}

ValueFunction bellman_backup(const TabularMdp& mdp,
                             const StochasticPolicy& policy,
                             const ValueFunction& value) {
  check_dimensions(mdp, policy);
  check_value_size(mdp, value);
  const int ns = mdp.num_states();
  const int na = mdp.num_actions;
  ValueFunction out(ns, 0.0);
  for (int s = 0; s < ns; ++s) {
    double v = 0.0;
    for (int a = 0; a < na; ++a) {
      double pa = policy.at(s, a);
      if (pa == 0.0) continue;
      double cont = 0.0;
      for (int s2 = 0; s2 < ns; ++s2) cont += mdp.trans(s, a, s2) * value[s2];
      v += pa * (mdp.rew(s, a) + mdp.gamma * cont);
    }
    out[s] = v;
  }
  return out;
}

ValueFunction evaluate_policy(const TabularMdp& mdp,
                              const StochasticPolicy& policy, double tol) {
  if (!(tol > 0.0)) throw ContractViolation("tol must be positive");
  if (!(mdp.gamma > 0.0) || !(mdp.gamma < 1.0)) {
    throw ContractViolation("discount not in (0,1)");
  }
  check_dimensions(mdp, policy);

  const int ns = mdp.num_states();
  const int na = mdp.num_actions;
  const double threshold = tol * (1.0 - mdp.gamma) / mdp.gamma;
  const double rmax = max_abs_reward(mdp);
  const long cap = iteration_cap(mdp.gamma, threshold,
                                 rmax > 0.0 ? 2.0 * rmax / (1.0 - mdp.gamma) : 0.0);
  const SparseRows rows = build_sparse_rows(mdp);

  ValueFunction v(ns, 0.0);
  ValueFunction next(ns, 0.0);
  for (long iter = 0;; ++iter) {
    if (iter > cap) {
      throw ConvergenceError(
          "policy evaluation did not converge within the iteration cap of " +
          std::to_string(cap) + " sweeps; the MDP is likely invalid");
    }
    double diff = 0.0;
    for (int s = 0; s < ns; ++s) {
      double val = 0.0;
      for (int a = 0; a < na; ++a) {
        double pa = policy.at(s, a);
        if (pa == 0.0) continue;
        double cont = 0.0;
        for (auto [s2, p] : rows.row(s, a, na)) cont += p * v[s2];
        val += pa * (mdp.rew(s, a) + mdp.gamma * cont);
      }
      next[s] = val;
      diff = std::max(diff, std::abs(val - v[s]));
    }
    v.swap(next);
    if (diff < threshold) break;
  }
  return v;
}

ValueIterationResult value_iteration(const TabularMdp& mdp, double tol) {
  if (!(tol > 0.0)) throw ContractViolation("tol must be positive");
  if (!(mdp.gamma > 0.0) || !(mdp.gamma < 1.0)) {
    throw ContractViolation("discount not in (0,1)");
  }
  const int ns = mdp.num_states();
  const int na = mdp.num_actions;
  const double threshold = tol * (1.0 - mdp.gamma) / mdp.gamma;
  const double rmax = max_abs_reward(mdp);
  const long cap = iteration_cap(mdp.gamma, threshold,
                                 rmax > 0.0 ? 2.0 * rmax / (1.0 - mdp.gamma) : 0.0);
  const SparseRows rows = build_sparse_rows(mdp);

  ValueFunction v(ns, 0.0);
  ValueFunction next(ns, 0.0);
  for (long iter = 0;; ++iter) {
    if (iter > cap) {
      throw ConvergenceError(
          "value iteration did not converge within the iteration cap of " +
          std::to_string(cap) + " sweeps; the MDP is likely invalid");
    }
    double diff = 0.0;
    for (int s = 0; s < ns; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < na; ++a) {
        double cont = 0.0;
        for (auto [s2, p] : rows.row(s, a, na)) cont += p * v[s2];
        best = std::max(best, mdp.rew(s, a) + mdp.gamma * cont);
      }
      next[s] = best;
      diff = std::max(diff, std::abs(best - v[s]));
    }
    v.swap(next);
    if (diff < threshold) break;
  }

  ValueIterationResult result;
  result.value = v;
  result.greedy_actions.assign(ns, 0);
  for (int s = 0; s < ns; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    int best_a = 0;
    for (int a = 0; a < na; ++a) {
      double cont = 0.0;
      for (auto [s2, p] : rows.row(s, a, na)) cont += p * v[s2];
      double q = mdp.rew(s, a) + mdp.gamma * cont;
      if (q > best) {  // strict: ties keep the lowest action index
        best = q;
        best_a = a;
      }
    }
    result.greedy_actions[s] = best_a;
  }
  result.greedy_policy =
      StochasticPolicy::deterministic(result.greedy_actions, na);
  return result;
}

QFunction q_from_v(const TabularMdp& mdp, const ValueFunction& value) {
  check_value_size(mdp, value);
  const int ns = mdp.num_states();
  const int na = mdp.num_actions;
  QFunction q;
  q.num_actions = na;
  q.q.assign(static_cast<std::size_t>(ns) * na, 0.0);
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      double cont = 0.0;
      for (int s2 = 0; s2 < ns; ++s2) cont += mdp.trans(s, a, s2) * value[s2];
      double val = mdp.rew(s, a) + mdp.gamma * cont;
      q.q[static_cast<std::size_t>(s) * na + a] = val;
      q.max_abs = std::max(q.max_abs, std::abs(val));
    }
  }
  return q;
}

StochasticPolicy softmax_policy(const QFunction& q, double temperature) {
  if (!(temperature > 0.0)) {
    throw ContractViolation("softmax temperature must be positive");
  }
  const int ns = q.num_states();
  const int na = q.num_actions;
  StochasticPolicy p;
  p.num_actions = na;
  p.probs.assign(static_cast<std::size_t>(ns) * na, 0.0);
  for (int s = 0; s < ns; ++s) {
    double m = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < na; ++a) m = std::max(m, q.at(s, a));
    double z = 0.0;
    for (int a = 0; a < na; ++a) {
      double w = std::exp((q.at(s, a) - m) / temperature);
      p.at(s, a) = w;
      z += w;
    }
    for (int a = 0; a < na; ++a) p.at(s, a) /= z;
  }
  return p;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw ContractViolation("tv_distance: distributions have different lengths");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - q[i]);
  return 0.5 * sum;
}

double estimate_lipschitz(const StochasticPolicy& policy,
                          const StateEmbedding& embedding) {
  const int ns = policy.num_states();
  if (ns < 2) {
    throw ContractViolation("estimate_lipschitz requires at least 2 states");
  }
  if (embedding.num_states() != ns) {
    throw ContractViolation(
        "embedding factorization does not match the policy's state count");
  }
  double l = 0.0;
  for (int s1 = 0; s1 < ns; ++s1) {
    for (int s2 = s1 + 1; s2 < ns; ++s2) {
      double d = embedding.distance(embedding.factored(s1), embedding.factored(s2));
      double tv = tv_distance(policy.row(s1), policy.row(s2));
      l = std::max(l, tv / d);
    }
  }
  return l;
}

nlohmann::json mdp_to_json(const TabularMdp& mdp) {
  const int ns = mdp.num_states();
  const int na = mdp.num_actions;
  nlohmann::json t = nlohmann::json::array();
  nlohmann::json r = nlohmann::json::array();
  for (int s = 0; s < ns; ++s) {
    nlohmann::json ts = nlohmann::json::array();
    nlohmann::json rs = nlohmann::json::array();
    for (int a = 0; a < na; ++a) {
      nlohmann::json ta = nlohmann::json::array();
      for (int s2 = 0; s2 < ns; ++s2) ta.push_back(mdp.trans(s, a, s2));
      ts.push_back(std::move(ta));
      rs.push_back(mdp.rew(s, a));
    }
    t.push_back(std::move(ts));
    r.push_back(std::move(rs));
  }
  return nlohmann::json{{"num_structural", mdp.num_structural},
                        {"semantic_vocab", mdp.semantic_vocab},
                        {"num_actions", mdp.num_actions},
                        {"gamma", mdp.gamma},
                        {"transition", std::move(t)},
                        {"reward", std::move(r)}};
}

TabularMdp mdp_from_json(const nlohmann::json& j) {
  TabularMdp mdp = TabularMdp::zeros(
      j.at("num_structural").get<int>(),
      j.at("semantic_vocab").get<std::vector<std::string>>(),
      j.at("num_actions").get<int>(), j.at("gamma").get<double>());
  const int ns = mdp.num_states();
  const int na = mdp.num_actions;
  const auto& t = j.at("transition");
  const auto& r = j.at("reward");
  if (static_cast<int>(t.size()) != ns || static_cast<int>(r.size()) != ns) {
    throw ContractViolation("serialized MDP tables do not match the state count");
  }
  for (int s = 0; s < ns; ++s) {
    if (static_cast<int>(t[s].size()) != na || static_cast<int>(r[s].size()) != na) {
      throw ContractViolation("serialized MDP tables do not match the action count");
    }
    for (int a = 0; a < na; ++a) {
      if (static_cast<int>(t[s][a].size()) != ns) {
        throw ContractViolation("serialized transition row has wrong length");
      }
      for (int s2 = 0; s2 < ns; ++s2) {
        mdp.trans(s, a, s2) = t[s][a][s2].get<double>();
      }
      mdp.rew(s, a) = r[s][a].get<double>();
    }
  }
  return mdp;
}

void save_mdp(const TabularMdp& mdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << mdp_to_json(mdp).dump(2) << "\n";
}

TabularMdp load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  nlohmann::json j;
  in >> j;
  return mdp_from_json(j);
}

}  // namespace aspect
