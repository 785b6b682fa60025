#include "aspect/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

namespace aspect {

namespace {

const char* kEnvironmentBrief =
    "A top-down grid room. The agent moves up, down, left or right one cell "
    "per step and can pick the object on its own cell. Picking the reward "
    "object ends the episode with a positive reward, picking the distractor "
    "ends it with a penalty, and the episode also ends at the step limit.";

TaskSpec task_from_spec(const GridSpec& spec) {
  TaskSpec task;
  task.reward_object = spec.reward_object;
  task.distractor_object = spec.distractor_object;
  task.environment_descriptors = {spec.wall_style, spec.floor_style};
  return task;
}

OperatorContext context_for_fixture(const CaseFixture& fixture) {
  OperatorContext ctx;
  ctx.environment_brief = kEnvironmentBrief;
  ctx.source_task = task_from_spec(fixture.source_spec);
  ctx.target_task = task_from_spec(fixture.target_spec);
  return ctx;
}

int vocab_index_of(const std::vector<std::string>& vocab,
                   const std::string& label) {
  auto it = std::find(vocab.begin(), vocab.end(), label);
  if (it == vocab.end()) {
    throw VocabularyError("label '" + label + "' is not in the vocabulary");
  }
  return static_cast<int>(it - vocab.begin());
}

int sample_successor(const TabularMdp& mdp, int s, int a, Rng& rng) {
  int single = -1;
  int nonzeros = 0;
  const int ns = mdp.num_states();
  for (int s2 = 0; s2 < ns; ++s2) {
    if (mdp.trans(s, a, s2) > 0.0) {
      single = s2;
      if (++nonzeros > 1) break;
    }
  }
  if (nonzeros <= 1) return single;
  double u = rng.uniform();
  double acc = 0.0;
  for (int s2 = 0; s2 < ns; ++s2) {
    acc += mdp.trans(s, a, s2);
    if (u < acc) return s2;
  }
  return ns - 1;
}

Outcome classify_pick(const GridworldView& view, FactoredState s) {
  if (s.v == view.reward_semantic) return Outcome::TargetPicked;
  return Outcome::DistractorPicked;
}

double mean_of(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  return xs.empty() ? 0.0 : m / static_cast<double>(xs.size());
}

double stddev_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double m = mean_of(xs);
  double var = 0.0;
  for (double x : xs) var += (x - m) * (x - m);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace

std::string operator_mode_name(OperatorMode mode) {
  switch (mode) {
    case OperatorMode::Rule: return "rule";
    case OperatorMode::Remote: return "remote";
    case OperatorMode::RemoteWithRuleFallback: return "fallback";
  }
  return "rule";
}

OperatorMode operator_mode_from_name(const std::string& name) {
  if (name == "rule") return OperatorMode::Rule;
  if (name == "remote") return OperatorMode::Remote;
  if (name == "fallback" || name == "remote-with-rule-fallback") {
    return OperatorMode::RemoteWithRuleFallback;
  }
  throw ContractViolation("unknown operator mode: " + name);
}

void PipelineConfig::validate() const {
  if (!(artifact_noise_rate >= 0.0) || !(artifact_noise_rate <= 1.0)) {
    throw ContractViolation("artifact noise rate must lie in [0,1]");
  }
  if (episodes < 1) throw ContractViolation("episodes must be at least 1");
}

bool NoiseChannel::fires(FactoredState s) const {
  if (rate <= 0.0) return false;
  std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s.u)) << 32) |
                      static_cast<std::uint32_t>(s.v);
  return keyed_unit(seed, key) < rate;
}

ImaginationOutcome imagine_state(FactoredState state,
                                 const OperatorContext& ctx_template,
                                 const SemanticOperator& op,
                                 const EnvironmentDescriptor& target_env,
                                 const std::vector<std::string>& target_vocab,
                                 const std::vector<std::string>& source_vocab,
                                 const NoiseChannel& noise) {
  ImaginationOutcome out;
  out.caption = render_caption(state, target_env, target_vocab);

  OperatorContext ctx = ctx_template;
  ctx.observation_caption = out.caption;
  out.remapped = op(ctx);

  Caption remapped{out.remapped.description, Caption::Provenance::OperatorOutput};
  CaptionContents contents = parse_caption(remapped, source_vocab);

  const int empty_v = vocab_index_of(source_vocab, "empty");
  int v = contents.label ? vocab_index_of(source_vocab, *contents.label)
                         : empty_v;
  if (noise.fires(state)) {
    v = empty_v;  // the remapped object failed to materialize
    out.noise_fired = true;
  }
  out.state = {state.u, v};
  return out;
}

namespace {

int select_action(int flat_state, const StochasticPolicy& policy,
                  PolicyMode mode, Rng& rng) {
  const int na = policy.num_actions;
  if (mode == PolicyMode::Greedy) {
    int best = 0;
    double best_p = policy.at(flat_state, 0);
    for (int a = 1; a < na; ++a) {
      if (policy.at(flat_state, a) > best_p) {  // ties keep the lowest index
        best_p = policy.at(flat_state, a);
        best = a;
      }
    }
    return best;
  }
  double u = rng.uniform();
  double acc = 0.0;
  for (int a = 0; a < na; ++a) {
    acc += policy.at(flat_state, a);
    if (u < acc) return a;
  }
  return na - 1;
}

}  // namespace

int zero_shot_step(FactoredState imagined, const StochasticPolicy& source_policy,
                   int source_vocab_size, PolicyMode mode, Rng& rng) {
  if (source_vocab_size <= 0) {
    throw ContractViolation("source vocabulary size must be positive");
  }
  int flat = imagined.u * source_vocab_size + imagined.v;
  if (flat < 0 || flat >= source_policy.num_states()) {
    throw ContractViolation("imagined state outside the source policy's domain");
  }
  return select_action(flat, source_policy, mode, rng);
}

std::string outcome_name(Outcome outcome) {
  switch (outcome) {
    case Outcome::TargetPicked: return "target_picked";
    case Outcome::DistractorPicked: return "distractor_picked";
    case Outcome::Timeout: return "timeout";
    case Outcome::PipelineError: return "pipeline_error";
  }
  return "timeout";
}

std::string variant_name(Variant variant) {
  switch (variant) {
    case Variant::SourceDirect: return "source-direct";
    case Variant::Aspect: return "aspect";
    case Variant::OracleH: return "oracle-h";
  }
  return "aspect";
}

Variant variant_from_name(const std::string& name) {
  if (name == "source-direct") return Variant::SourceDirect;
  if (name == "aspect" || name == "aspect-rule") return Variant::Aspect;
  if (name == "oracle-h") return Variant::OracleH;
  throw ContractViolation("unknown variant: " + name);
}

nlohmann::json TraceStep::to_json(
    const std::vector<std::string>& target_vocab,
    const std::vector<std::string>& source_vocab) const {
  auto state_json = [](FactoredState s, const std::vector<std::string>& vocab) {
    nlohmann::json j{{"u", s.u}, {"v", s.v}};
    if (s.v >= 0 && s.v < static_cast<int>(vocab.size())) {
      j["label"] = vocab[s.v];
    }
    return j;
  };
  return nlohmann::json{{"state", state_json(state, target_vocab)},
                        {"caption", caption},
                        {"remapped_caption", remapped_caption},
                        {"imagined_state", state_json(imagined_state, source_vocab)},
                        {"action", action_name(action)}};
}

EpisodeRecord run_episode(const EpisodeSetup& setup, int start_cell,
                          std::uint64_t action_seed) {
  const Gridworld& target = *setup.target;
  const GridworldView& view = target.view;
  const std::vector<std::string>& source_vocab = setup.source->view.vocabulary;
  const int source_empty = setup.source->view.empty_semantic;
  const int max_steps = target.spec.effective_max_steps();

  EpisodeRecord record;
  Rng rng(action_seed);
  FactoredState s = view.observe(start_cell);

  for (int step = 0; step < max_steps; ++step) {
    FactoredState imagined;
    std::string caption_text;
    std::string remapped_text;
    try {
      switch (setup.variant) {
        case Variant::Aspect: {
          ImaginationOutcome out =
              imagine_state(s, setup.ctx_template, setup.op, view.env,
                            view.vocabulary, source_vocab, setup.noise);
          imagined = out.state;
          caption_text = out.caption.text;
          remapped_text = out.remapped.description;
          break;
        }
        case Variant::OracleH: {
          imagined = lift_h(*setup.phi, s);
          caption_text = render_caption(s, view.env, view.vocabulary).text;
          remapped_text =
              render_caption(imagined, setup.source->view.env, source_vocab).text;
          break;
        }
        case Variant::SourceDirect: {
          // The raw source policy reads the target observation as-is: labels
          // it knows keep their identity, anything else reads as empty.
          const std::string& label = view.vocabulary[s.v];
          auto it = std::find(source_vocab.begin(), source_vocab.end(), label);
          imagined = {s.u, it == source_vocab.end()
                               ? source_empty
                               : static_cast<int>(it - source_vocab.begin())};
          caption_text = render_caption(s, view.env, view.vocabulary).text;
          remapped_text = caption_text;
          break;
        }
      }
    } catch (const std::exception& e) {
      record.outcome = Outcome::PipelineError;
      record.error_message = e.what();
      record.steps = step;
      return record;
    }

    int action = zero_shot_step(imagined, *setup.source_policy,
                                setup.source->mdp.vocab_size(),
                                setup.policy_mode, rng);
    record.trace.push_back({s, caption_text, remapped_text, imagined, action});

    FactoredState before = s;
    int next = sample_successor(target.mdp, target.mdp.state_index(s), action, rng);
    s = target.mdp.factored(next);
    record.steps = step + 1;
    if (s.u == view.done_structural) {
      record.outcome = classify_pick(view, before);
      return record;
    }
  }
  record.outcome = Outcome::Timeout;
  record.steps = max_steps;
  return record;
}

Outcome replay_trace(const Gridworld& target, const std::vector<TraceStep>& trace,
                     int start_cell) {
  const GridworldView& view = target.view;
  FactoredState s = view.observe(start_cell);
  for (const TraceStep& step : trace) {
    // Deterministic transitions only; take the most likely successor.
    int flat = target.mdp.state_index(s);
    int best = 0;
    double best_p = -1.0;
    for (int s2 = 0; s2 < target.mdp.num_states(); ++s2) {
      double p = target.mdp.trans(flat, step.action, s2);
      if (p > best_p) {
        best_p = p;
        best = s2;
      }
    }
    FactoredState before = s;
    s = target.mdp.factored(best);
    if (s.u == view.done_structural) return classify_pick(view, before);
  }
  return Outcome::Timeout;
}

nlohmann::json case_config_to_json(const CaseEvalConfig& c) {
  nlohmann::json variants = nlohmann::json::array();
  for (Variant v : c.variants) variants.push_back(variant_name(v));
  nlohmann::json j{
      {"cases", c.cases},
      {"variants", std::move(variants)},
      {"episodes", c.episodes},
      {"seeds", c.seeds},
      {"operator", operator_mode_name(c.operator_mode)},
      {"noise_rate", c.noise_rate},
      {"policy_mode", c.policy_mode == PolicyMode::Greedy ? "greedy" : "softmax"},
      {"temperature", c.temperature},
      {"grid", {{"width", c.grid_width}, {"height", c.grid_height}}},
      {"vocabulary",
       {{"empty", c.vocabulary.empty_label},
        {"source_reward", c.vocabulary.source_reward},
        {"source_distractor", c.vocabulary.source_distractor},
        {"target_reward", c.vocabulary.target_reward},
        {"source_wall", c.vocabulary.source_wall},
        {"source_floor", c.vocabulary.source_floor},
        {"shifted_wall", c.vocabulary.shifted_wall}}},
      {"vi_tol", c.vi_tol},
      {"write_traces", c.write_traces}};
  if (c.remote) j["remote"] = remote_config_to_json(*c.remote);
  return j;
}

CaseEvalConfig case_config_from_json(const nlohmann::json& j) {
  CaseEvalConfig c;
  if (j.contains("cases")) c.cases = j.at("cases").get<std::vector<int>>();
  if (j.contains("variants")) {
    c.variants.clear();
    for (const auto& name : j.at("variants")) {
      c.variants.push_back(variant_from_name(name.get<std::string>()));
    }
  }
  if (j.contains("episodes")) c.episodes = j.at("episodes").get<int>();
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("operator")) {
    c.operator_mode = operator_mode_from_name(j.at("operator").get<std::string>());
  }
  if (j.contains("noise_rate")) c.noise_rate = j.at("noise_rate").get<double>();
  if (j.contains("policy_mode")) {
    std::string mode = j.at("policy_mode").get<std::string>();
    if (mode == "greedy") {
      c.policy_mode = PolicyMode::Greedy;
    } else if (mode == "softmax") {
      c.policy_mode = PolicyMode::Softmax;
    } else {
      throw ContractViolation("unknown policy mode: " + mode);
    }
  }
  if (j.contains("temperature")) c.temperature = j.at("temperature").get<double>();
  if (j.contains("grid")) {
    c.grid_width = j.at("grid").at("width").get<int>();
    c.grid_height = j.at("grid").at("height").get<int>();
  }
  if (j.contains("vocabulary")) {
    const auto& v = j.at("vocabulary");
    auto fetch = [&](const char* key, std::string& field) {
      if (v.contains(key)) field = v.at(key).get<std::string>();
    };
    fetch("empty", c.vocabulary.empty_label);
    fetch("source_reward", c.vocabulary.source_reward);
    fetch("source_distractor", c.vocabulary.source_distractor);
    fetch("target_reward", c.vocabulary.target_reward);
    fetch("source_wall", c.vocabulary.source_wall);
    fetch("source_floor", c.vocabulary.source_floor);
    fetch("shifted_wall", c.vocabulary.shifted_wall);
  }
  if (j.contains("vi_tol")) c.vi_tol = j.at("vi_tol").get<double>();
  if (j.contains("write_traces")) c.write_traces = j.at("write_traces").get<bool>();
  if (j.contains("remote")) c.remote = remote_config_from_json(j.at("remote"));
  return c;
}

namespace {

SemanticOperator make_semantic_operator(const CaseEvalConfig& config) {
  switch (config.operator_mode) {
    case OperatorMode::Rule:
      return [](const OperatorContext& ctx) { return rule_operator(ctx); };
    case OperatorMode::Remote: {
      if (!config.remote) {
        throw ContractViolation("remote operator mode needs a remote config");
      }
      auto remote = std::make_shared<RemoteOperator>(*config.remote);
      return [remote](const OperatorContext& ctx) { return (*remote)(ctx); };
    }
    case OperatorMode::RemoteWithRuleFallback: {
      if (!config.remote) {
        throw ContractViolation("fallback operator mode needs a remote config");
      }
      auto remote = std::make_shared<RemoteOperator>(*config.remote);
      return [remote](const OperatorContext& ctx) {
        try {
          return (*remote)(ctx);
        } catch (const OperatorError& e) {
          std::cerr << "remote operator failed (" << e.what()
                    << "); falling back to the rule operator\n";
          return rule_operator(ctx);
        }
      };
    }
  }
  return [](const OperatorContext& ctx) { return rule_operator(ctx); };
}

struct EpisodeFixture {
  CaseFixture fixture;
  Gridworld source;
  Gridworld target;
  StochasticPolicy policy;
  OperatorContext ctx;
};

EpisodeFixture build_episode_fixture(const CaseEvalConfig& config, int case_id,
                                     std::uint64_t fixture_seed) {
  EpisodeFixture ef;
  ef.fixture = make_case_fixture(case_id, config.vocabulary, fixture_seed,
                                 config.grid_width, config.grid_height);
  ef.source = make_gridworld(ef.fixture.source_spec);
  ef.target = make_gridworld(ef.fixture.target_spec);
  ValueIterationResult vi = value_iteration(ef.source.mdp, config.vi_tol);
  if (config.policy_mode == PolicyMode::Greedy) {
    ef.policy = vi.greedy_policy;
  } else {
    ef.policy = softmax_policy(q_from_v(ef.source.mdp, vi.value),
                               config.temperature);
  }
  ef.ctx = context_for_fixture(ef.fixture);
  return ef;
}

}  // namespace

CaseEvalResult evaluate_cases(const CaseEvalConfig& config,
                              const TraceSink& sink) {
  if (config.episodes < 1) throw ContractViolation("episodes must be >= 1");
  if (config.seeds.empty()) throw ContractViolation("need at least one seed");
  if (!(config.noise_rate >= 0.0) || !(config.noise_rate <= 1.0)) {
    throw ContractViolation("noise rate must lie in [0,1]");
  }

  SemanticOperator op = make_semantic_operator(config);
  CaseEvalResult result;

  for (int case_id : config.cases) {
    for (std::uint64_t seed : config.seeds) {
      std::map<Variant, EvalCounts> counts;
      for (Variant v : config.variants) counts[v] = {};

      for (int ep = 0; ep < config.episodes; ++ep) {
        EpisodeFixture ef = build_episode_fixture(
            config, case_id, derive_seed(seed, 101, case_id, ep));
        const int cells = ef.target.spec.cells();
        Rng start_rng(derive_seed(seed, 102, case_id, ep));
        const int start_cell = start_rng.uniform_int(cells);

        for (Variant variant : config.variants) {
          EpisodeSetup setup;
          setup.target = &ef.target;
          setup.source = &ef.source;
          setup.source_policy = &ef.policy;
          setup.phi = &ef.fixture.phi;
          setup.variant = variant;
          setup.op = op;
          setup.ctx_template = ef.ctx;
          setup.policy_mode = config.policy_mode;
          setup.noise = {config.noise_rate, derive_seed(seed, 104, case_id, ep)};

          EpisodeRecord record = run_episode(
              setup, start_cell,
              derive_seed(seed, 103, case_id, ep,
                          static_cast<std::uint64_t>(variant)));
          if (sink) {
            sink({case_id, variant, seed, ep, start_cell, &record,
                  &ef.target.view.vocabulary, &ef.source.view.vocabulary});
          }
          EvalCounts& c = counts[variant];
          switch (record.outcome) {
            case Outcome::TargetPicked: c.target_picked++; break;
            case Outcome::DistractorPicked: c.distractor_picked++; break;
            case Outcome::Timeout: c.timeouts++; break;
            case Outcome::PipelineError: c.pipeline_errors++; break;
          }
        }
      }

      for (Variant variant : config.variants) {
        EvalReport report;
        report.case_id = case_id;
        report.variant = variant;
        report.seed = seed;
        report.episodes = config.episodes;
        report.counts = counts[variant];
        result.reports.push_back(report);
      }
    }
  }

  // Aggregate mean and (population) standard deviation over seeds.
  for (int case_id : config.cases) {
    for (Variant variant : config.variants) {
      std::vector<double> tp, dp, to, pe;
      for (const EvalReport& r : result.reports) {
        if (r.case_id != case_id || r.variant != variant) continue;
        tp.push_back(r.counts.target_picked);
        dp.push_back(r.counts.distractor_picked);
        to.push_back(r.counts.timeouts);
        pe.push_back(r.counts.pipeline_errors);
      }
      auto& agg = result.aggregates[case_id][variant_name(variant)];
      agg["target_picked"] = {mean_of(tp), stddev_of(tp)};
      agg["distractor_picked"] = {mean_of(dp), stddev_of(dp)};
      agg["timeouts"] = {mean_of(to), stddev_of(to)};
      agg["pipeline_errors"] = {mean_of(pe), stddev_of(pe)};
    }
  }
  return result;
}

std::string eval_reports_to_csv(const std::vector<EvalReport>& reports) {
  std::string csv =
      "variant,seed,target_picked,distractor_picked,timeouts,pipeline_errors\n";
  for (const EvalReport& r : reports) {
    csv += variant_name(r.variant) + "," + std::to_string(r.seed) + "," +
           std::to_string(r.counts.target_picked) + "," +
           std::to_string(r.counts.distractor_picked) + "," +
           std::to_string(r.counts.timeouts) + "," +
           std::to_string(r.counts.pipeline_errors) + "\n";
  }
  return csv;
}

nlohmann::json eval_result_to_json(const CaseEvalResult& result,
                                   const CaseEvalConfig& config) {
  nlohmann::json cases = nlohmann::json::object();
  for (int case_id : config.cases) {
    nlohmann::json rows = nlohmann::json::array();
    for (const EvalReport& r : result.reports) {
      if (r.case_id != case_id) continue;
      rows.push_back({{"variant", variant_name(r.variant)},
                      {"seed", r.seed},
                      {"episodes", r.episodes},
                      {"target_picked", r.counts.target_picked},
                      {"distractor_picked", r.counts.distractor_picked},
                      {"timeouts", r.counts.timeouts},
                      {"pipeline_errors", r.counts.pipeline_errors}});
    }
    nlohmann::json aggs = nlohmann::json::object();
    auto it = result.aggregates.find(case_id);
    if (it != result.aggregates.end()) {
      for (const auto& [variant, fields] : it->second) {
        nlohmann::json per_field = nlohmann::json::object();
        for (const auto& [field, agg] : fields) {
          per_field[field] = {{"mean", agg.mean}, {"std", agg.stddev}};
        }
        aggs[variant] = std::move(per_field);
      }
    }
    cases["case-" + std::to_string(case_id)] = {{"rows", std::move(rows)},
                                                {"aggregates", std::move(aggs)}};
  }
  return nlohmann::json{{"config", case_config_to_json(config)},
                        {"cases", std::move(cases)}};
}

int run_cases_command(const CaseEvalConfig& config, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);

  TraceSink sink;
  if (config.write_traces) {
    // One trace file per episode of the first seed, per case and variant.
    std::uint64_t first_seed = config.seeds.front();
    std::string base = out_dir;
    sink = [base, first_seed](const TraceEvent& event) {
      if (event.seed != first_seed) return;
      std::string dir = base + "/case-" + std::to_string(event.case_id) +
                        "/traces-" + variant_name(event.variant);
      std::filesystem::create_directories(dir);
      std::ofstream trace_out(
          dir + "/trace-" + std::to_string(event.episode) + ".jsonl",
          std::ios::binary);
      for (const TraceStep& step : event.record->trace) {
        trace_out << step.to_json(*event.target_vocab, *event.source_vocab).dump()
                  << "\n";
      }
    };
  }

  CaseEvalResult result = evaluate_cases(config, sink);
  for (int case_id : config.cases) {
    std::string dir = out_dir + "/case-" + std::to_string(case_id);
    std::filesystem::create_directories(dir);
    std::vector<EvalReport> rows;
    for (const EvalReport& r : result.reports) {
      if (r.case_id == case_id) rows.push_back(r);
    }
    std::ofstream csv(dir + "/report.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + dir + "/report.csv");
    csv << eval_reports_to_csv(rows);
  }
  std::ofstream json_out(out_dir + "/report.json", std::ios::binary);
  if (!json_out) throw std::runtime_error("cannot write " + out_dir + "/report.json");
  json_out << eval_result_to_json(result, config).dump(2) << "\n";
  return 0;
}

int run_bound_command(const BoundExperimentConfig& config,
                      const std::string& out_dir) {
  std::vector<BoundReport> reports = run_bound_experiment(config);
  write_bound_outputs(reports, out_dir);
  bool all_hold = std::all_of(reports.begin(), reports.end(),
                              [](const BoundReport& r) { return r.holds; });
  return all_hold ? 0 : 1;
}

namespace {

struct CheckPrinter {
  std::ostream& out;
  bool all_passed = true;

  void report(const std::string& name, bool passed, const std::string& detail = "") {
    out << (passed ? "[PASS] " : "[FAIL] ") << name;
    if (!detail.empty()) out << " -- " << detail;
    out << "\n";
    all_passed = all_passed && passed;
  }
};

void check_fixture(CheckPrinter& printer, const CaseFixture& fixture,
                   const std::string& tag) {
  Gridworld source = make_gridworld(fixture.source_spec);
  Gridworld target = make_gridworld(fixture.target_spec);

  auto source_issues = validate_mdp(source.mdp);
  auto target_issues = validate_mdp(target.mdp);
  printer.report(tag + ": source MDP validates", source_issues.empty());
  printer.report(tag + ": target MDP validates", target_issues.empty());

  AnalogyCertificate cert =
      check_affordance_preserving(source.mdp, target.mdp, fixture.phi);
  std::string detail;
  if (!cert.valid()) {
    detail = std::to_string(cert.reward_violations.size()) + " reward and " +
             std::to_string(cert.transition_violations.size()) +
             " transition violations, max deviation " +
             format_double(cert.max_abs_deviation);
    for (std::size_t i = 0; i < cert.reward_violations.size() && i < 3; ++i) {
      const auto& v = cert.reward_violations[i];
      detail += "; R(u=" + std::to_string(v.s.u) + ",v=" + std::to_string(v.s.v) +
                ",a=" + std::to_string(v.a) + ") " + format_double(v.target_value) +
                " vs " + format_double(v.source_value);
    }
  }
  printer.report(tag + ": affordance-preservation certificate", cert.valid(),
                 detail);

  // Value preservation under the exact lift.
  ValueIterationResult vi = value_iteration(source.mdp, 1e-10);
  std::vector<int> h_map =
      lift_h_state_map(fixture.phi, source.mdp.num_structural);
  StochasticPolicy pi_h = induced_policy(vi.greedy_policy, h_map);
  ValueFunction v_target = evaluate_policy(target.mdp, pi_h, 1e-10);
  ValueFunction v_source = evaluate_policy(source.mdp, vi.greedy_policy, 1e-10);
  double max_diff = 0.0;
  for (int st = 0; st < target.mdp.num_states(); ++st) {
    max_diff = std::max(max_diff, std::abs(v_target[st] - v_source[h_map[st]]));
  }
  printer.report(tag + ": value preservation within 1e-6", max_diff <= 1e-6,
                 "max |V_T - V_S.h| = " + format_double(max_diff));

  // The rule-operator pipeline coincides with h on every renderable state.
  OperatorContext ctx = context_for_fixture(fixture);
  NoiseChannel no_noise{0.0, 0};
  SemanticOperator op = [](const OperatorContext& c) { return rule_operator(c); };
  bool pipeline_matches = true;
  for (int u = 0; u < target.view.done_structural && pipeline_matches; ++u) {
    for (int v = 0; v < target.mdp.vocab_size(); ++v) {
      ImaginationOutcome out =
          imagine_state({u, v}, ctx, op, target.view.env, target.view.vocabulary,
                        source.view.vocabulary, no_noise);
      if (!(out.state == lift_h(fixture.phi, {u, v}))) {
        pipeline_matches = false;
        break;
      }
    }
  }
  printer.report(tag + ": imagination pipeline equals the exact lift",
                 pipeline_matches);
}

}  // namespace

int run_check_command(const std::optional<CaseFixture>& fixture,
                      std::uint64_t seed, std::ostream& out) {
  CheckPrinter printer{out};
  if (fixture) {
    check_fixture(printer, *fixture, "fixture");
  } else {
    for (int case_id = 1; case_id <= 3; ++case_id) {
      CaseFixture f = make_case_fixture(case_id, CaseVocabulary{}, seed);
      check_fixture(printer, f, "case-" + std::to_string(case_id));
    }
  }
  return printer.all_passed ? 0 : 1;
}

int run_demo_command(int case_id, std::uint64_t seed, double noise_rate,
                     const std::string& out_dir, std::ostream& out) {
  CaseEvalConfig config;
  config.noise_rate = noise_rate;
  EpisodeFixture ef = build_episode_fixture(config, case_id,
                                            derive_seed(seed, 101, case_id, 0));
  Rng start_rng(derive_seed(seed, 102, case_id, 0));
  const int start_cell = start_rng.uniform_int(ef.target.spec.cells());

  out << "case " << case_id << ", seed " << seed << "\n";
  out << "target world:\n" << ascii_render(ef.target, start_cell);

  EpisodeSetup setup;
  setup.target = &ef.target;
  setup.source = &ef.source;
  setup.source_policy = &ef.policy;
  setup.phi = &ef.fixture.phi;
  setup.variant = Variant::Aspect;
  setup.op = [](const OperatorContext& c) { return rule_operator(c); };
  setup.ctx_template = ef.ctx;
  setup.policy_mode = PolicyMode::Greedy;
  setup.noise = {noise_rate, derive_seed(seed, 104, case_id, 0)};

  EpisodeRecord record =
      run_episode(setup, start_cell, derive_seed(seed, 103, case_id, 0,
                                                 static_cast<std::uint64_t>(Variant::Aspect)));

  const auto& tv = ef.target.view.vocabulary;
  const auto& sv = ef.source.view.vocabulary;
  for (std::size_t i = 0; i < record.trace.size(); ++i) {
    const TraceStep& step = record.trace[i];
    out << "step " << i << ": state (u=" << step.state.u << ", "
        << tv[step.state.v] << ")\n";
    out << "  caption:  " << step.caption << "\n";
    out << "  remapped: " << step.remapped_caption << "\n";
    out << "  imagined: (u=" << step.imagined_state.u << ", "
        << sv[step.imagined_state.v] << ")\n";
    out << "  action:   " << action_name(step.action) << "\n";
  }
  out << "outcome: " << outcome_name(record.outcome) << " after "
      << record.steps << " steps\n";

  std::filesystem::create_directories(out_dir);
  std::ofstream trace_out(out_dir + "/trace-0.jsonl", std::ios::binary);
  if (!trace_out) throw std::runtime_error("cannot write " + out_dir + "/trace-0.jsonl");
  for (const TraceStep& step : record.trace) {
    trace_out << step.to_json(tv, sv).dump() << "\n";
  }
  return 0;
}

}  // namespace aspect
