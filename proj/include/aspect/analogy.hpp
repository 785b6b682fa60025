#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aspect/mdp.hpp"

namespace aspect {

/// Total semantic relabeling phi: target vocabulary -> source vocabulary,
/// stored as an index table alongside both ordered vocabularies. Totality is
/// enforced at construction; partial maps are rejected up front.
struct SemanticMap {
  std::vector<std::string> target_vocab;
  std::vector<std::string> source_vocab;
  std::vector<int> image;  // image[v_target] = v_source

  SemanticMap() = default;
  SemanticMap(std::vector<std::string> target_vocab,
              std::vector<std::string> source_vocab, std::vector<int> image);

  static SemanticMap identity(const std::vector<std::string>& vocab);
  /// Builds the index table from (target label -> source label) pairs; every
  /// target label must be covered exactly once.
  static SemanticMap from_label_pairs(
      const std::vector<std::pair<std::string, std::string>>& pairs,
      std::vector<std::string> target_vocab,
      std::vector<std::string> source_vocab);

  int phi(int target_v) const;
  const std::string& phi_label(const std::string& target_label) const;
  int target_index(const std::string& label) const;

  /// Preimage size of each source semantic under phi.
  std::vector<int> preimage_counts() const;
};

/// h(u, v) = (u, phi(v)). The structural component is never altered.
FactoredState lift_h(const SemanticMap& map, FactoredState s);

/// Flat-index version of h for an MDP pair sharing num_structural:
/// result[target_flat_state] = source_flat_state.
std::vector<int> lift_h_state_map(const SemanticMap& map, int num_structural);

struct RewardViolation {
  FactoredState s;
  int a = 0;
  double target_value = 0.0;
  double source_value = 0.0;
};

struct TransitionViolation {
  FactoredState s;
  int a = 0;
  FactoredState s2;
  double target_value = 0.0;
  double source_value = 0.0;
};

/// Exhaustive comparison of the two substitution identities. Valid iff both
/// violation lists are empty.
struct AnalogyCertificate {
  std::vector<RewardViolation> reward_violations;
  std::vector<TransitionViolation> transition_violations;
  double max_abs_deviation = 0.0;
  double tolerance = 0.0;

  bool valid() const {
    return reward_violations.empty() && transition_violations.empty();
  }
};

nlohmann::json certificate_to_json(const AnalogyCertificate& cert);

/// Brute-force check of R_T((u,v),a) = R_S((u,phi(v)),a) and
/// T_T((u',v')|(u,v),a) = T_S((u',phi(v'))|(u,phi(v)),a) over every tuple,
/// including entries outside the target's reachable support.
AnalogyCertificate check_affordance_preserving(const TabularMdp& source,
                                               const TabularMdp& target,
                                               const SemanticMap& map,
                                               double tol = 1e-9);

/// Builds the target MDP by inverse substitution from the source, so both
/// identities hold exactly (certificate deviation 0). Throws MappingError if
/// the map's vocabularies do not line up with the source, and
/// ContractViolation if the source moves probability into a semantic whose
/// preimage count is not exactly one -- no row-stochastic analogous target
/// exists in that case.
TabularMdp build_analogous_target(const TabularMdp& source,
                                  const SemanticMap& map);

/// Composes a source policy with a total state map S_T -> S_S (flat indices):
/// row(s_T) = source_row(state_map[s_T]).
StochasticPolicy induced_policy(const StochasticPolicy& source_policy,
                                const std::vector<int>& state_map);

// --- serialization ---------------------------------------------------------

nlohmann::json semantic_map_to_json(const SemanticMap& map);
SemanticMap semantic_map_from_json(const nlohmann::json& j);

}  // namespace aspect
