#include "aspect/analogy.hpp"

#include <algorithm>
#include <cmath>

namespace aspect {

namespace {

int index_of(const std::vector<std::string>& vocab, const std::string& label) {
  for (int i = 0; i < static_cast<int>(vocab.size()); ++i) {
    if (vocab[i] == label) return i;
  }
  return -1;
}

}  // namespace

SemanticMap::SemanticMap(std::vector<std::string> target_vocab_in,
                         std::vector<std::string> source_vocab_in,
                         std::vector<int> image_in)
    : target_vocab(std::move(target_vocab_in)),
      source_vocab(std::move(source_vocab_in)),
      image(std::move(image_in)) {
  if (image.size() != target_vocab.size()) {
    throw MappingError("semantic map is not total on the target vocabulary: " +
                       std::to_string(image.size()) + " images for " +
                       std::to_string(target_vocab.size()) + " labels");
  }
  for (std::size_t v = 0; v < image.size(); ++v) {
    if (image[v] < 0 || image[v] >= static_cast<int>(source_vocab.size())) {
      throw MappingError("image of '" + target_vocab[v] +
                         "' lies outside the source vocabulary");
    }
  }
}

SemanticMap SemanticMap::identity(const std::vector<std::string>& vocab) {
  std::vector<int> image(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) image[i] = static_cast<int>(i);
  return SemanticMap(vocab, vocab, std::move(image));
}

SemanticMap SemanticMap::from_label_pairs(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    std::vector<std::string> target_vocab,
    std::vector<std::string> source_vocab) {
  std::vector<int> image(target_vocab.size(), -1);
  for (const auto& [from, to] : pairs) {
    int tv = index_of(target_vocab, from);
    if (tv < 0) {
      throw MappingError("label '" + from + "' is not in the target vocabulary");
    }
    int sv = index_of(source_vocab, to);
    if (sv < 0) {
      throw MappingError("image of '" + from +
                         "' lies outside the source vocabulary: '" + to + "'");
    }
    if (image[tv] != -1) {
      throw MappingError("label '" + from + "' mapped twice");
    }
    image[tv] = sv;
  }
  for (std::size_t v = 0; v < image.size(); ++v) {
    if (image[v] == -1) {
      throw MappingError("semantic map is not total: no image for '" +
                         target_vocab[v] + "'");
    }
  }
  return SemanticMap(std::move(target_vocab), std::move(source_vocab),
                     std::move(image));
}

int SemanticMap::phi(int target_v) const {
  if (target_v < 0 || target_v >= static_cast<int>(image.size())) {
    throw MappingError("semantic index " + std::to_string(target_v) +
                       " outside the map's domain");
  }
  return image[target_v];
}

const std::string& SemanticMap::phi_label(const std::string& target_label) const {
  return source_vocab[phi(target_index(target_label))];
}

int SemanticMap::target_index(const std::string& label) const {
  int i = index_of(target_vocab, label);
  if (i < 0) {
    throw MappingError("label '" + label + "' is not in the map's domain");
  }
  return i;
}

std::vector<int> SemanticMap::preimage_counts() const {
  std::vector<int> counts(source_vocab.size(), 0);
  for (int img : image) counts[img] += 1;
  return counts;
}

FactoredState lift_h(const SemanticMap& map, FactoredState s) {
  return {s.u, map.phi(s.v)};
}

std::vector<int> lift_h_state_map(const SemanticMap& map, int num_structural) {
  const int vt = static_cast<int>(map.target_vocab.size());
  const int vs = static_cast<int>(map.source_vocab.size());
  std::vector<int> state_map(static_cast<std::size_t>(num_structural) * vt);
  for (int u = 0; u < num_structural; ++u) {
    for (int v = 0; v < vt; ++v) {
      state_map[static_cast<std::size_t>(u) * vt + v] = u * vs + map.phi(v);
    }
  }
  return state_map;
}

nlohmann::json certificate_to_json(const AnalogyCertificate& cert) {
  nlohmann::json rv = nlohmann::json::array();
  for (const auto& v : cert.reward_violations) {
    rv.push_back({{"u", v.s.u},
                  {"v", v.s.v},
                  {"a", v.a},
                  {"target", v.target_value},
                  {"source", v.source_value}});
  }
  nlohmann::json tv = nlohmann::json::array();
  for (const auto& v : cert.transition_violations) {
    tv.push_back({{"u", v.s.u},
                  {"v", v.s.v},
                  {"a", v.a},
                  {"u2", v.s2.u},
                  {"v2", v.s2.v},
                  {"target", v.target_value},
                  {"source", v.source_value}});
  }
  return nlohmann::json{{"valid", cert.valid()},
                        {"max_abs_deviation", cert.max_abs_deviation},
                        {"tolerance", cert.tolerance},
                        {"reward_violations", std::move(rv)},
                        {"transition_violations", std::move(tv)}};
}

namespace {

void check_map_compatibility(const TabularMdp& source, const TabularMdp& target,
                             const SemanticMap& map) {
  if (source.num_actions != target.num_actions) {
    throw ContractViolation("source and target action spaces differ: " +
                            std::to_string(source.num_actions) + " vs " +
                            std::to_string(target.num_actions));
  }
  if (source.num_structural != target.num_structural) {
    throw ContractViolation("source and target structural spaces differ");
  }
  if (map.target_vocab != target.semantic_vocab) {
    throw MappingError("map domain does not match the target vocabulary");
  }
  if (map.source_vocab != source.semantic_vocab) {
    throw MappingError("map image vocabulary does not match the source");
  }
}

}  // namespace

AnalogyCertificate check_affordance_preserving(const TabularMdp& source,
                                               const TabularMdp& target,
                                               const SemanticMap& map,
                                               double tol) {
  check_map_compatibility(source, target, map);

  AnalogyCertificate cert;
  cert.tolerance = tol;
  const int nt = target.num_states();
  const int na = target.num_actions;

  for (int st = 0; st < nt; ++st) {
    FactoredState s = target.factored(st);
    int hs = source.state_index(lift_h(map, s));
    for (int a = 0; a < na; ++a) {
      double dr = target.rew(st, a) - source.rew(hs, a);
      cert.max_abs_deviation = std::max(cert.max_abs_deviation, std::abs(dr));
      if (std::abs(dr) > tol) {
        cert.reward_violations.push_back(
            {s, a, target.rew(st, a), source.rew(hs, a)});
      }
      for (int st2 = 0; st2 < nt; ++st2) {
        FactoredState s2 = target.factored(st2);
        int hs2 = source.state_index(lift_h(map, s2));
        double dt = target.trans(st, a, st2) - source.trans(hs, a, hs2);
        cert.max_abs_deviation = std::max(cert.max_abs_deviation, std::abs(dt));
        if (std::abs(dt) > tol) {
          cert.transition_violations.push_back(
              {s, a, s2, target.trans(st, a, st2), source.trans(hs, a, hs2)});
        }
      }
    }
  }
  return cert;
}

TabularMdp build_analogous_target(const TabularMdp& source,
                                  const SemanticMap& map) {
  if (map.source_vocab != source.semantic_vocab) {
    throw MappingError("map image vocabulary does not match the source");
  }

  // The substitution identity copies T_S(.|., (u', w)) into every preimage of
  // w, so a row-stochastic target exists only when reachable semantics have
  // exactly one preimage.
  const std::vector<int> counts = map.preimage_counts();
  const int ns = source.num_states();
  const int na = source.num_actions;
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      for (int s2 = 0; s2 < ns; ++s2) {
        if (source.trans(s, a, s2) == 0.0) continue;
        int w = source.factored(s2).v;
        if (counts[w] != 1) {
          throw ContractViolation(
              "no analogous target exists: the source transitions into "
              "semantic '" +
              source.semantic_vocab[w] + "' whose preimage count is " +
              std::to_string(counts[w]));
        }
      }
    }
  }

  TabularMdp target = TabularMdp::zeros(source.num_structural, map.target_vocab,
                                        na, source.gamma);
  const std::vector<int> h = lift_h_state_map(map, source.num_structural);
  const int nt = target.num_states();
  for (int st = 0; st < nt; ++st) {
    for (int a = 0; a < na; ++a) {
      target.rew(st, a) = source.rew(h[st], a);
      for (int st2 = 0; st2 < nt; ++st2) {
        target.trans(st, a, st2) = source.trans(h[st], a, h[st2]);
      }
    }
  }
  return target;
}

StochasticPolicy induced_policy(const StochasticPolicy& source_policy,
                                const std::vector<int>& state_map) {
  const int ns = source_policy.num_states();
  const int na = source_policy.num_actions;
  StochasticPolicy out;
  out.num_actions = na;
  out.probs.assign(state_map.size() * static_cast<std::size_t>(na), 0.0);
  for (std::size_t st = 0; st < state_map.size(); ++st) {
    int ss = state_map[st];
    if (ss < 0 || ss >= ns) {
      throw MappingError("state map image " + std::to_string(ss) +
                         " outside the source state set");
    }
    for (int a = 0; a < na; ++a) out.probs[st * na + a] = source_policy.at(ss, a);
  }
  return out;
}

nlohmann::json semantic_map_to_json(const SemanticMap& map) {
  nlohmann::json pairs = nlohmann::json::object();
  for (std::size_t v = 0; v < map.target_vocab.size(); ++v) {
    pairs[map.target_vocab[v]] = map.source_vocab[map.image[v]];
  }
  return nlohmann::json{{"target_vocab", map.target_vocab},
                        {"source_vocab", map.source_vocab},
                        {"map", std::move(pairs)}};
}

SemanticMap semantic_map_from_json(const nlohmann::json& j) {
  auto target_vocab = j.at("target_vocab").get<std::vector<std::string>>();
  auto source_vocab = j.at("source_vocab").get<std::vector<std::string>>();
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& [from, to] : j.at("map").items()) {
    pairs.emplace_back(from, to.get<std::string>());
  }
  return SemanticMap::from_label_pairs(pairs, std::move(target_vocab),
                                       std::move(source_vocab));
}

}  // namespace aspect
