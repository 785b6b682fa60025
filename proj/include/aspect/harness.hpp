#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspect/bound_lab.hpp"
#include "aspect/gridworld.hpp"
#include "aspect/remote_operator.hpp"
#include "aspect/rng.hpp"
#include "aspect/semantics.hpp"

namespace aspect {

enum class OperatorMode { Rule, Remote, RemoteWithRuleFallback };
enum class PolicyMode { Greedy, Softmax };

std::string operator_mode_name(OperatorMode mode);
OperatorMode operator_mode_from_name(const std::string& name);

struct PipelineConfig {
  OperatorMode operator_mode = OperatorMode::Rule;
  double artifact_noise_rate = 0.0;
  std::uint64_t rng_seed = 0;
  int episodes = 1;
  PolicyMode policy_mode = PolicyMode::Greedy;
  double temperature = 1.0;

  void validate() const;
};

using SemanticOperator = std::function<OperatorResult(const OperatorContext&)>;

/// Generator-failure channel: with probability `rate`, the imagined semantic
/// collapses to "empty". Deterministic per (seed, state).
struct NoiseChannel {
  double rate = 0.0;
  std::uint64_t seed = 0;

  bool fires(FactoredState s) const;
};

struct ImaginationOutcome {
  FactoredState state;       // source-aligned (u, v')
  Caption caption;           // rendered target observation
  OperatorResult remapped;   // operator output
  bool noise_fired = false;
};

/// One pass of the imagination pipeline: render the target observation,
/// remap it through the semantic operator, parse the source-aligned
/// description, and recompose with the unchanged structural component.
/// Throws OperatorError on operator failure and CaptionParseError /
/// VocabularyError when the operator output leaves the grammar.
ImaginationOutcome imagine_state(FactoredState state,
                                 const OperatorContext& ctx_template,
                                 const SemanticOperator& op,
                                 const EnvironmentDescriptor& target_env,
                                 const std::vector<std::string>& target_vocab,
                                 const std::vector<std::string>& source_vocab,
                                 const NoiseChannel& noise);

/// Action selection at the imagined state (flat index u*vocab+v on the
/// source side). Greedy mode takes the most probable action with
/// lowest-index tie-break; softmax mode samples from the row.
int zero_shot_step(FactoredState imagined, const StochasticPolicy& source_policy,
                   int source_vocab_size, PolicyMode mode, Rng& rng);

enum class Outcome { TargetPicked, DistractorPicked, Timeout, PipelineError };

std::string outcome_name(Outcome outcome);

struct TraceStep {
  FactoredState state;
  std::string caption;
  std::string remapped_caption;
  FactoredState imagined_state;
  int action = 0;

  nlohmann::json to_json(const std::vector<std::string>& target_vocab,
                         const std::vector<std::string>& source_vocab) const;
};

struct EpisodeRecord {
  Outcome outcome = Outcome::Timeout;
  int steps = 0;
  std::vector<TraceStep> trace;
  std::string error_message;
};

enum class Variant { SourceDirect, Aspect, OracleH };

std::string variant_name(Variant variant);
Variant variant_from_name(const std::string& name);

/// Everything an episode needs besides the seed: the target world, the solved
/// source policy, the map for the oracle, and the pipeline configuration.
struct EpisodeSetup {
  const Gridworld* target = nullptr;
  const Gridworld* source = nullptr;
  const StochasticPolicy* source_policy = nullptr;
  const SemanticMap* phi = nullptr;
  Variant variant = Variant::Aspect;
  SemanticOperator op;         // used by the aspect variant
  OperatorContext ctx_template;
  PolicyMode policy_mode = PolicyMode::Greedy;
  NoiseChannel noise;
};

EpisodeRecord run_episode(const EpisodeSetup& setup, int start_cell,
                          std::uint64_t action_seed);

/// Replays a trace's actions through the target MDP and returns the outcome,
/// for audit against the recorded one.
Outcome replay_trace(const Gridworld& target, const std::vector<TraceStep>& trace,
                     int start_cell);

struct EvalCounts {
  int target_picked = 0;
  int distractor_picked = 0;
  int timeouts = 0;
  int pipeline_errors = 0;
};

struct EvalReport {
  int case_id = 0;
  Variant variant = Variant::Aspect;
  std::uint64_t seed = 0;
  int episodes = 0;
  EvalCounts counts;
};

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;
};

struct CaseEvalConfig {
  std::vector<int> cases = {1, 2, 3};
  std::vector<Variant> variants = {Variant::SourceDirect, Variant::Aspect,
                                   Variant::OracleH};
  int episodes = 100;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  OperatorMode operator_mode = OperatorMode::Rule;
  double noise_rate = 0.0;
  PolicyMode policy_mode = PolicyMode::Greedy;
  double temperature = 1.0;
  int grid_width = 6;
  int grid_height = 6;
  CaseVocabulary vocabulary;
  double vi_tol = 1e-8;
  bool write_traces = false;
  std::optional<RemoteOperatorConfig> remote;  // required for remote modes
};

nlohmann::json case_config_to_json(const CaseEvalConfig& config);
CaseEvalConfig case_config_from_json(const nlohmann::json& j);

struct CaseEvalResult {
  std::vector<EvalReport> reports;  // per (case, variant, seed)
  // aggregate[case][variant] over seeds
  std::map<int, std::map<std::string, std::map<std::string, Aggregate>>> aggregates;
};

/// Invoked once per finished episode when installed; carries what a trace
/// writer needs.
struct TraceEvent {
  int case_id = 0;
  Variant variant = Variant::Aspect;
  std::uint64_t seed = 0;
  int episode = 0;
  int start_cell = 0;
  const EpisodeRecord* record = nullptr;
  const std::vector<std::string>* target_vocab = nullptr;
  const std::vector<std::string>* source_vocab = nullptr;
};

using TraceSink = std::function<void(const TraceEvent&)>;

/// Runs the full evaluation. Layouts are randomized per episode; every
/// variant sees the same layouts and start cells. Deterministic per config.
CaseEvalResult evaluate_cases(const CaseEvalConfig& config,
                              const TraceSink& sink = {});

std::string eval_reports_to_csv(const std::vector<EvalReport>& reports);
nlohmann::json eval_result_to_json(const CaseEvalResult& result,
                                   const CaseEvalConfig& config);

// --- command entry points (shared by the CLI and tests) ---------------------

/// Writes report.csv / report.json per case under out_dir. Returns 0.
int run_cases_command(const CaseEvalConfig& config, const std::string& out_dir);

/// Runs the bound experiment and writes CSV + JSON under out_dir. Returns 0
/// when every report holds, 1 otherwise.
int run_bound_command(const BoundExperimentConfig& config,
                      const std::string& out_dir);

/// Verifies the affordance certificates, value preservation, and
/// pipeline/homomorphism agreement, either on the three built-in fixtures or
/// on an explicit fixture. Prints one line per check; returns 0 iff all pass.
int run_check_command(const std::optional<CaseFixture>& fixture,
                      std::uint64_t seed, std::ostream& out);

/// Traces a single episode step by step and writes trace-0.jsonl. Returns 0.
int run_demo_command(int case_id, std::uint64_t seed, double noise_rate,
                     const std::string& out_dir, std::ostream& out);

}  // namespace aspect
