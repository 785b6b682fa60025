#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspect/errors.hpp"

namespace aspect {

/// A factored state s = (u, v): structural index u (e.g. a grid cell) and
/// semantic symbol v (an index into the owning MDP's vocabulary).
struct FactoredState {
  int u = 0;
  int v = 0;

  friend bool operator==(const FactoredState&, const FactoredState&) = default;
};

/// Finite MDP over the product state space [0, num_structural) x vocabulary.
/// The flat state index is s = u * vocab_size + v; all tables are row-major.
/// Instances are treated as immutable once filled and are safe to share
/// across threads.
struct TabularMdp {
  int num_structural = 0;
  std::vector<std::string> semantic_vocab;
  int num_actions = 0;
  double gamma = 0.0;
  std::vector<double> transition;  // [s][a][s']
  std::vector<double> reward;      // [s][a]

  int vocab_size() const { return static_cast<int>(semantic_vocab.size()); }
  int num_states() const { return num_structural * vocab_size(); }

  int state_index(FactoredState s) const { return s.u * vocab_size() + s.v; }
  FactoredState factored(int s) const {
    return {s / vocab_size(), s % vocab_size()};
  }

  double trans(int s, int a, int s2) const {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states() + s2];
  }
  double& trans(int s, int a, int s2) {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states() + s2];
  }
  double rew(int s, int a) const {
    return reward[static_cast<std::size_t>(s) * num_actions + a];
  }
  double& rew(int s, int a) {
    return reward[static_cast<std::size_t>(s) * num_actions + a];
  }

  int semantic_index(const std::string& label) const;  // VocabularyError if absent

  /// Zero-filled tables of the right shape; caller fills transition/reward.
  static TabularMdp zeros(int num_structural, std::vector<std::string> vocab,
                          int num_actions, double gamma);
};

/// Per-state action distribution pi[s][a]. Rows sum to one.
struct StochasticPolicy {
  int num_actions = 0;
  std::vector<double> probs;  // [s][a]

  int num_states() const {
    return num_actions == 0 ? 0 : static_cast<int>(probs.size()) / num_actions;
  }
  std::span<const double> row(int s) const {
    return {probs.data() + static_cast<std::size_t>(s) * num_actions,
            static_cast<std::size_t>(num_actions)};
  }
  double at(int s, int a) const {
    return probs[static_cast<std::size_t>(s) * num_actions + a];
  }
  double& at(int s, int a) {
    return probs[static_cast<std::size_t>(s) * num_actions + a];
  }

  static StochasticPolicy uniform(int num_states, int num_actions);
  /// Point-mass policy on the given action per state.
  static StochasticPolicy deterministic(const std::vector<int>& actions,
                                        int num_actions);
};

using ValueFunction = std::vector<double>;

struct QFunction {
  int num_actions = 0;
  std::vector<double> q;  // [s][a]
  double max_abs = 0.0;   // max_{s,a} |Q(s,a)|

  double at(int s, int a) const {
    return q[static_cast<std::size_t>(s) * num_actions + a];
  }
  int num_states() const {
    return num_actions == 0 ? 0 : static_cast<int>(q.size()) / num_actions;
  }
};

/// Concatenated one-hot embedding of (u, v) with Euclidean distance. Any two
/// states differing in exactly one component are sqrt(2) apart.
struct StateEmbedding {
  int num_structural = 0;
  int num_semantics = 0;

  int dimension() const { return num_structural + num_semantics; }
  int num_states() const { return num_structural * num_semantics; }
  FactoredState factored(int s) const {
    return {s / num_semantics, s % num_semantics};
  }

  std::vector<double> embed(FactoredState s) const;
  double distance(FactoredState a, FactoredState b) const;
};

struct ValidationIssue {
  std::string message;
  int s = -1;  // flat state index, when the issue names one
  int a = -1;
};

/// Reports every structural defect: non-stochastic rows, negative
/// probabilities, discount outside (0,1), shape mismatches. Empty iff valid.
std::vector<ValidationIssue> validate_mdp(const TabularMdp& mdp);

/// One application of the policy Bellman operator:
/// (T V)(s) = sum_a pi(a|s) [R(s,a) + gamma * sum_s' T(s'|s,a) V(s')].
ValueFunction bellman_backup(const TabularMdp& mdp,
                             const StochasticPolicy& policy,
                             const ValueFunction& value);

/// Fixed-point policy evaluation. Iterates the Bellman operator until the
/// sup-norm change drops below tol*(1-gamma)/gamma, which guarantees
/// ||V - V^pi||_inf <= tol by the contraction argument. Throws
/// ConvergenceError past the iteration cap (only reachable on invalid input).
ValueFunction evaluate_policy(const TabularMdp& mdp,
                              const StochasticPolicy& policy, double tol);

struct ValueIterationResult {
  ValueFunction value;
  std::vector<int> greedy_actions;  // ties broken by lowest action index
  StochasticPolicy greedy_policy;
};

ValueIterationResult value_iteration(const TabularMdp& mdp, double tol);

/// Q(s,a) = R(s,a) + gamma * sum_s' T(s'|s,a) V(s'), plus max_{s,a}|Q|.
QFunction q_from_v(const TabularMdp& mdp, const ValueFunction& value);

/// pi(a|s) proportional to exp(Q(s,a)/temperature). temperature > 0.
StochasticPolicy softmax_policy(const QFunction& q, double temperature);

/// Total variation distance between two finite distributions:
/// 0.5 * sum |p - q|.
double tv_distance(std::span<const double> p, std::span<const double> q);

/// Tight empirical TV-Lipschitz constant of the policy under the embedding:
/// max over distinct state pairs of D_TV(pi(.|s1), pi(.|s2)) / dist(s1, s2).
double estimate_lipschitz(const StochasticPolicy& policy,
                          const StateEmbedding& embedding);

// --- serialization ---------------------------------------------------------

nlohmann::json mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const nlohmann::json& j);

void save_mdp(const TabularMdp& mdp, const std::string& path);
TabularMdp load_mdp(const std::string& path);

}  // namespace aspect
