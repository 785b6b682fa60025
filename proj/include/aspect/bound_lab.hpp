#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspect/analogy.hpp"
#include "aspect/mdp.hpp"

namespace aspect {

/// An approximate state mapping Psi: S_T -> S_S (flat indices) together with
/// a description of how it was corrupted away from the exact lift h.
struct ImaginationMap {
  std::vector<int> psi;
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::vector<int> corrupted_states;  // flat target states where psi != h
};

/// Corrupts h semantically: independently per target state, with probability
/// `rate` the image's semantic component is replaced by a uniformly random
/// *different* source semantic. Structural components are never altered.
/// Deterministic per seed.
ImaginationMap make_corrupted_psi(const std::vector<int>& h_map,
                                  int source_vocab_size, double rate,
                                  std::uint64_t seed);

/// epsilon = max over target states of ||embed(psi(s)) - embed(h(s))||, using
/// the source-side embedding.
double measure_epsilon(const ImaginationMap& psi, const std::vector<int>& h_map,
                       const StateEmbedding& source_embedding);

/// 2 * L_TV * Q_max * epsilon / (1 - gamma).
double degradation_bound(double l_tv, double q_max, double gamma,
                         double epsilon);

/// ||V_T^{pi_psi} - V_T^{pi_h}||_inf by exact policy evaluation of both.
double empirical_gap(const TabularMdp& target, const StochasticPolicy& pi_psi,
                     const StochasticPolicy& pi_h, double tol);

/// Random analogous-pair family. Maps may be non-injective or non-surjective;
/// transition support is restricted to uniquely-mapped semantics so that an
/// exactly analogous target always exists (see build_analogous_target).
struct FamilySpec {
  int min_structural = 3;
  int max_structural = 12;
  int min_source_vocab = 2;
  int max_source_vocab = 5;
  int min_target_vocab = 2;
  int max_target_vocab = 5;
  int min_actions = 2;
  int max_actions = 4;
  double min_gamma = 0.5;
  double max_gamma = 0.95;
};

struct AnalogyInstance {
  TabularMdp source;
  TabularMdp target;
  SemanticMap phi;
};

AnalogyInstance make_random_instance(const FamilySpec& family,
                                     std::uint64_t seed);

struct BoundExperimentConfig {
  FamilySpec family;
  int instances = 20;
  std::vector<double> rates = {0.0, 0.1, 0.3, 1.0};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  double temperature = 0.5;
  double eval_tol = 1e-10;
  double slack = 1e-9;  // absolute comparison slack for `holds`
  std::uint64_t master_seed = 42;
};

nlohmann::json bound_config_to_json(const BoundExperimentConfig& config);
BoundExperimentConfig bound_config_from_json(const nlohmann::json& j);

/// One report per (instance, rate, seed). `holds` records whether the
/// measured gap stayed within the computed bound (plus slack).
struct BoundReport {
  int instance_id = 0;
  double rate = 0.0;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
  double l_tv = 0.0;
  double q_max = 0.0;
  double gamma = 0.0;
  double bound = 0.0;
  double empirical_gap = 0.0;
  bool holds = false;
};

nlohmann::json bound_report_to_json(const BoundReport& report);

std::vector<BoundReport> run_bound_experiment(
    const BoundExperimentConfig& config);

/// CSV columns: instance_id,rate,seed,epsilon,l_tv,q_max,gamma,bound,gap,holds
std::string bound_reports_to_csv(const std::vector<BoundReport>& reports);
void write_bound_outputs(const std::vector<BoundReport>& reports,
                         const std::string& out_dir);

/// Shortest round-trip decimal form of a double; used by all CSV writers so
/// identical runs emit identical bytes.
std::string format_double(double x);

}  // namespace aspect
