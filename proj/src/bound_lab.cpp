#include "aspect/bound_lab.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "aspect/rng.hpp"

namespace aspect {

ImaginationMap make_corrupted_psi(const std::vector<int>& h_map,
                                  int source_vocab_size, double rate,
                                  std::uint64_t seed) {
  if (!(rate >= 0.0) || !(rate <= 1.0)) {
    throw ContractViolation("corruption rate must lie in [0,1]");
  }
  if (source_vocab_size <= 0) {
    throw ContractViolation("source vocabulary must be non-empty");
  }
  ImaginationMap out;
  out.psi = h_map;
  out.rate = rate;
  out.seed = seed;
  Rng rng(seed);
  for (std::size_t s = 0; s < h_map.size(); ++s) {
    if (rng.uniform() >= rate) continue;
    if (source_vocab_size < 2) continue;  // no different semantic available
    int u_img = h_map[s] / source_vocab_size;
    int v_img = h_map[s] % source_vocab_size;
    int k = rng.uniform_int(source_vocab_size - 1);
    int v_new = k >= v_img ? k + 1 : k;
    out.psi[s] = u_img * source_vocab_size + v_new;
    out.corrupted_states.push_back(static_cast<int>(s));
  }
  return out;
}

double measure_epsilon(const ImaginationMap& psi, const std::vector<int>& h_map,
                       const StateEmbedding& source_embedding) {
  if (psi.psi.size() != h_map.size()) {
    throw ContractViolation("psi and h are defined on different domains");
  }
  double eps = 0.0;
  for (std::size_t s = 0; s < h_map.size(); ++s) {
    eps = std::max(eps, source_embedding.distance(
                            source_embedding.factored(psi.psi[s]),
                            source_embedding.factored(h_map[s])));
  }
  return eps;
}

double degradation_bound(double l_tv, double q_max, double gamma,
                         double epsilon) {
  if (!(gamma > 0.0) || !(gamma < 1.0)) {
    throw ContractViolation("discount not in (0,1)");
  }
  if (l_tv < 0.0 || q_max < 0.0 || epsilon < 0.0) {
    throw ContractViolation("bound inputs must be non-negative");
  }
  return 2.0 * l_tv * q_max * epsilon / (1.0 - gamma);
}

double empirical_gap(const TabularMdp& target, const StochasticPolicy& pi_psi,
                     const StochasticPolicy& pi_h, double tol) {
  ValueFunction v_psi = evaluate_policy(target, pi_psi, tol);
  ValueFunction v_h = evaluate_policy(target, pi_h, tol);
  double gap = 0.0;
  for (std::size_t s = 0; s < v_psi.size(); ++s) {
    gap = std::max(gap, std::abs(v_psi[s] - v_h[s]));
  }
  return gap;
}

namespace {

int pick_in_range(Rng& rng, int lo, int hi) {
  return lo + rng.uniform_int(hi - lo + 1);
}

std::vector<std::string> numbered_labels(const std::string& prefix, int n) {
  std::vector<std::string> labels;
  labels.reserve(n);
  for (int i = 0; i < n; ++i) labels.push_back(prefix + std::to_string(i));
  return labels;
}

}  // namespace

AnalogyInstance make_random_instance(const FamilySpec& family,
                                     std::uint64_t seed) {
  if (family.min_source_vocab < 2) {
    throw ContractViolation("family requires at least 2 source semantics");
  }
  Rng rng(seed);
  const int nu = pick_in_range(rng, family.min_structural, family.max_structural);
  const int nvs = pick_in_range(rng, family.min_source_vocab, family.max_source_vocab);
  const int nvt = pick_in_range(rng, family.min_target_vocab, family.max_target_vocab);
  const int na = pick_in_range(rng, family.min_actions, family.max_actions);
  const double gamma = rng.uniform(family.min_gamma, family.max_gamma);

  std::vector<std::string> source_vocab = numbered_labels("s", nvs);
  std::vector<std::string> target_vocab = numbered_labels("t", nvt);

  // Half the instances use an injective map (when it fits); the rest draw a
  // general total map with one source semantic reserved for t0 so that at
  // least one semantic keeps a unique preimage.
  std::vector<int> image(nvt);
  const bool injective = nvt <= nvs && rng.uniform() < 0.5;
  if (injective) {
    std::vector<int> perm(nvs);
    for (int i = 0; i < nvs; ++i) perm[i] = i;
    for (int i = nvs - 1; i > 0; --i) {
      std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
    }
    for (int v = 0; v < nvt; ++v) image[v] = perm[v];
  } else {
    image[0] = 0;
    for (int v = 1; v < nvt; ++v) image[v] = 1 + rng.uniform_int(nvs - 1);
  }
  SemanticMap phi(target_vocab, source_vocab, image);

  // Destination states must carry uniquely-mapped semantics; otherwise no
  // analogous target exists (see build_analogous_target).
  const std::vector<int> counts = phi.preimage_counts();
  std::vector<int> allowed_semantics;
  for (int w = 0; w < nvs; ++w) {
    if (counts[w] == 1) allowed_semantics.push_back(w);
  }

  TabularMdp source = TabularMdp::zeros(nu, source_vocab, na, gamma);
  const int ns = source.num_states();
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      double total = 0.0;
      std::vector<double> weights(allowed_semantics.size() *
                                  static_cast<std::size_t>(nu));
      for (double& w : weights) {
        w = rng.uniform(0.05, 1.0);
        total += w;
      }
      std::size_t k = 0;
      for (int u2 = 0; u2 < nu; ++u2) {
        for (int w : allowed_semantics) {
          source.trans(s, a, u2 * nvs + w) = weights[k++] / total;
        }
      }
      source.rew(s, a) = rng.uniform(-1.0, 1.0);
    }
  }

  AnalogyInstance inst;
  inst.target = build_analogous_target(source, phi);
  inst.source = std::move(source);
  inst.phi = std::move(phi);
  return inst;
}

nlohmann::json bound_config_to_json(const BoundExperimentConfig& c) {
  return nlohmann::json{
      {"family",
       {{"structural", {c.family.min_structural, c.family.max_structural}},
        {"source_vocab", {c.family.min_source_vocab, c.family.max_source_vocab}},
        {"target_vocab", {c.family.min_target_vocab, c.family.max_target_vocab}},
        {"actions", {c.family.min_actions, c.family.max_actions}},
        {"gamma", {c.family.min_gamma, c.family.max_gamma}}}},
      {"instances", c.instances},
      {"rates", c.rates},
      {"seeds", c.seeds},
      {"temperature", c.temperature},
      {"eval_tol", c.eval_tol},
      {"slack", c.slack},
      {"master_seed", c.master_seed}};
}

BoundExperimentConfig bound_config_from_json(const nlohmann::json& j) {
  BoundExperimentConfig c;
  if (j.contains("family")) {
    const auto& f = j.at("family");
    auto range = [&](const char* key, int& lo, int& hi) {
      if (f.contains(key)) {
        lo = f.at(key).at(0).get<int>();
        hi = f.at(key).at(1).get<int>();
      }
    };
    range("structural", c.family.min_structural, c.family.max_structural);
    range("source_vocab", c.family.min_source_vocab, c.family.max_source_vocab);
    range("target_vocab", c.family.min_target_vocab, c.family.max_target_vocab);
    range("actions", c.family.min_actions, c.family.max_actions);
    if (f.contains("gamma")) {
      c.family.min_gamma = f.at("gamma").at(0).get<double>();
      c.family.max_gamma = f.at("gamma").at(1).get<double>();
    }
  }
  if (j.contains("instances")) c.instances = j.at("instances").get<int>();
  if (j.contains("rates")) c.rates = j.at("rates").get<std::vector<double>>();
  if (j.contains("seeds")) {
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  }
  if (j.contains("temperature")) c.temperature = j.at("temperature").get<double>();
  if (j.contains("eval_tol")) c.eval_tol = j.at("eval_tol").get<double>();
  if (j.contains("slack")) c.slack = j.at("slack").get<double>();
  if (j.contains("master_seed")) {
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
  }
  return c;
}

nlohmann::json bound_report_to_json(const BoundReport& r) {
  return nlohmann::json{
      {"instance_id", r.instance_id}, {"rate", r.rate},
      {"seed", r.seed},               {"epsilon", r.epsilon},
      {"l_tv", r.l_tv},               {"q_max", r.q_max},
      {"gamma", r.gamma},             {"bound", r.bound},
      {"gap", r.empirical_gap},       {"holds", r.holds}};
}

std::vector<BoundReport> run_bound_experiment(
    const BoundExperimentConfig& config) {
  std::vector<BoundReport> reports;
  for (int i = 0; i < config.instances; ++i) {
    try {
      AnalogyInstance inst =
          make_random_instance(config.family, derive_seed(config.master_seed, 1, i));

      ValueIterationResult vi = value_iteration(inst.source, config.eval_tol);
      QFunction q_star = q_from_v(inst.source, vi.value);
      StochasticPolicy pi_s = softmax_policy(q_star, config.temperature);

      StateEmbedding embedding{inst.source.num_structural,
                               inst.source.vocab_size()};
      const double l_tv = estimate_lipschitz(pi_s, embedding);

      const std::vector<int> h_map =
          lift_h_state_map(inst.phi, inst.source.num_structural);
      StochasticPolicy pi_h = induced_policy(pi_s, h_map);
      ValueFunction v_h = evaluate_policy(inst.target, pi_h, config.eval_tol);
      const double q_max = q_from_v(inst.target, v_h).max_abs;

      for (std::size_t ri = 0; ri < config.rates.size(); ++ri) {
        for (std::uint64_t sd : config.seeds) {
          ImaginationMap psi = make_corrupted_psi(
              h_map, inst.source.vocab_size(), config.rates[ri],
              derive_seed(sd, 2, i, ri));
          const double eps = measure_epsilon(psi, h_map, embedding);
          StochasticPolicy pi_psi = induced_policy(pi_s, psi.psi);
          ValueFunction v_psi =
              evaluate_policy(inst.target, pi_psi, config.eval_tol);
          double gap = 0.0;
          for (std::size_t s = 0; s < v_psi.size(); ++s) {
            gap = std::max(gap, std::abs(v_psi[s] - v_h[s]));
          }
          const double bound =
              degradation_bound(l_tv, q_max, inst.source.gamma, eps);

          BoundReport r;
          r.instance_id = i;
          r.rate = config.rates[ri];
          r.seed = sd;
          r.epsilon = eps;
          r.l_tv = l_tv;
          r.q_max = q_max;
          r.gamma = inst.source.gamma;
          r.bound = bound;
          r.empirical_gap = gap;
          r.holds = gap <= bound + config.slack;
          reports.push_back(r);
        }
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("bound experiment instance " + std::to_string(i) +
                               " failed: " + e.what());
    }
  }
  return reports;
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

std::string bound_reports_to_csv(const std::vector<BoundReport>& reports) {
  std::string csv =
      "instance_id,rate,seed,epsilon,l_tv,q_max,gamma,bound,gap,holds\n";
  for (const auto& r : reports) {
    csv += std::to_string(r.instance_id) + "," + format_double(r.rate) + "," +
           std::to_string(r.seed) + "," + format_double(r.epsilon) + "," +
           format_double(r.l_tv) + "," + format_double(r.q_max) + "," +
           format_double(r.gamma) + "," + format_double(r.bound) + "," +
           format_double(r.empirical_gap) + "," +
           (r.holds ? "true" : "false") + "\n";
  }
  return csv;
}

void write_bound_outputs(const std::vector<BoundReport>& reports,
                         const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream csv(out_dir + "/bound_report.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + out_dir + "/bound_report.csv");
    csv << bound_reports_to_csv(reports);
  }
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) j.push_back(bound_report_to_json(r));
  std::ofstream json_out(out_dir + "/bound_report.json", std::ios::binary);
  if (!json_out) {
    throw std::runtime_error("cannot write " + out_dir + "/bound_report.json");
  }
  json_out << j.dump(2) << "\n";
}

}  // namespace aspect
