#include "aspect/gridworld.hpp"

#include <algorithm>
#include <cctype>

#include "aspect/rng.hpp"

namespace aspect {

const char* action_name(int action) {
  switch (action) {
    case kActionUp: return "up";
    case kActionDown: return "down";
    case kActionLeft: return "left";
    case kActionRight: return "right";
    case kActionPick: return "pick";
    default: return "?";
  }
}

void GridSpec::validate() const {
  if (width < 1 || height < 1) {
    throw ContractViolation("grid dimensions must be positive");
  }
  if (width * height < 2) {
    throw ContractViolation("grid needs at least two cells");
  }
  if (!(gamma > 0.0) || !(gamma < 1.0)) {
    throw ContractViolation("discount not in (0,1)");
  }
  if (reward_object.empty()) {
    throw ContractViolation("spec needs a reward object");
  }
  if (!distractor_object.empty() && distractor_object == reward_object) {
    throw ContractViolation("reward and distractor objects must differ");
  }
  if (std::find(vocabulary.begin(), vocabulary.end(), "empty") ==
      vocabulary.end()) {
    throw ContractViolation("vocabulary must contain the 'empty' label");
  }
  auto known = [&](const std::string& label) {
    return std::find(vocabulary.begin(), vocabulary.end(), label) !=
           vocabulary.end();
  };
  if (!known(reward_object)) {
    throw ContractViolation("reward object is not in the vocabulary");
  }
  if (!distractor_object.empty() && !known(distractor_object)) {
    throw ContractViolation("distractor object is not in the vocabulary");
  }
  int reward_placements = 0;
  for (const auto& [cell, label] : object_layout) {
    if (cell < 0 || cell >= cells()) {
      throw ContractViolation("object placed outside the grid at cell " +
                              std::to_string(cell));
    }
    if (!known(label)) {
      throw ContractViolation("layout label '" + label +
                              "' is not in the vocabulary");
    }
    if (label == "empty") {
      throw ContractViolation("layout entries must name objects, not 'empty'");
    }
    if (label == reward_object) ++reward_placements;
  }
  if (reward_placements != 1) {
    throw ContractViolation("reward object must be placed exactly once, found " +
                            std::to_string(reward_placements));
  }
}

nlohmann::json grid_spec_to_json(const GridSpec& s) {
  nlohmann::json layout = nlohmann::json::object();
  for (const auto& [cell, label] : s.object_layout) {
    layout[std::to_string(cell)] = label;
  }
  return nlohmann::json{{"width", s.width},
                        {"height", s.height},
                        {"reward_object", s.reward_object},
                        {"distractor_object", s.distractor_object},
                        {"wall_style", s.wall_style},
                        {"floor_style", s.floor_style},
                        {"object_layout", std::move(layout)},
                        {"vocabulary", s.vocabulary},
                        {"step_penalty", s.step_penalty},
                        {"pick_reward", s.pick_reward},
                        {"distractor_penalty", s.distractor_penalty},
                        {"max_steps", s.max_steps},
                        {"gamma", s.gamma}};
}

GridSpec grid_spec_from_json(const nlohmann::json& j) {
  GridSpec s;
  s.width = j.at("width").get<int>();
  s.height = j.at("height").get<int>();
  s.reward_object = j.at("reward_object").get<std::string>();
  if (j.contains("distractor_object")) {
    s.distractor_object = j.at("distractor_object").get<std::string>();
  }
  if (j.contains("wall_style")) s.wall_style = j.at("wall_style").get<std::string>();
  if (j.contains("floor_style")) s.floor_style = j.at("floor_style").get<std::string>();
  for (const auto& item : j.at("object_layout").items()) {
    s.object_layout[std::stoi(item.key())] = item.value().get<std::string>();
  }
  s.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
  if (j.contains("step_penalty")) s.step_penalty = j.at("step_penalty").get<double>();
  if (j.contains("pick_reward")) s.pick_reward = j.at("pick_reward").get<double>();
  if (j.contains("distractor_penalty")) {
    s.distractor_penalty = j.at("distractor_penalty").get<double>();
  }
  if (j.contains("max_steps")) s.max_steps = j.at("max_steps").get<int>();
  if (j.contains("gamma")) s.gamma = j.at("gamma").get<double>();
  return s;
}

Gridworld make_gridworld(const GridSpec& spec) {
  spec.validate();

  Gridworld world;
  world.spec = spec;

  GridworldView& view = world.view;
  view.width = spec.width;
  view.height = spec.height;
  view.done_structural = spec.cells();
  view.vocabulary = spec.vocabulary;
  view.env = {spec.width, spec.height, spec.wall_style, spec.floor_style};

  auto vocab_index = [&](const std::string& label) {
    auto it = std::find(spec.vocabulary.begin(), spec.vocabulary.end(), label);
    return static_cast<int>(it - spec.vocabulary.begin());
  };
  view.empty_semantic = vocab_index("empty");
  view.reward_semantic = vocab_index(spec.reward_object);
  view.distractor_semantic =
      spec.distractor_object.empty() ? -1 : vocab_index(spec.distractor_object);
  view.cell_semantic.assign(spec.cells(), view.empty_semantic);
  for (const auto& [cell, label] : spec.object_layout) {
    view.cell_semantic[cell] = vocab_index(label);
  }

  const int nu = spec.cells() + 1;  // + absorbing done index
  TabularMdp mdp = TabularMdp::zeros(nu, spec.vocabulary, kNumGridActions,
                                     spec.gamma);
  const int nv = mdp.vocab_size();

  auto move_target = [&](int cell, int action) {
    int row = cell / spec.width;
    int col = cell % spec.width;
    switch (action) {
      case kActionUp: row = std::max(0, row - 1); break;
      case kActionDown: row = std::min(spec.height - 1, row + 1); break;
      case kActionLeft: col = std::max(0, col - 1); break;
      case kActionRight: col = std::min(spec.width - 1, col + 1); break;
    }
    return row * spec.width + col;
  };

  for (int u = 0; u < nu; ++u) {
    for (int v = 0; v < nv; ++v) {
      const int s = mdp.state_index({u, v});
      if (u == view.done_structural) {
        for (int a = 0; a < kNumGridActions; ++a) mdp.trans(s, a, s) = 1.0;
        continue;
      }
      for (int a = 0; a < kNumGridActions; ++a) {
        if (a != kActionPick) {
          int dest = move_target(u, a);
          int s2 = mdp.state_index({dest, view.cell_semantic[dest]});
          mdp.trans(s, a, s2) = 1.0;
          mdp.rew(s, a) = spec.step_penalty;
          continue;
        }
        if (v == view.reward_semantic) {
          int s2 = mdp.state_index({view.done_structural, view.empty_semantic});
          mdp.trans(s, a, s2) = 1.0;
          mdp.rew(s, a) = spec.pick_reward;
        } else if (view.distractor_semantic >= 0 &&
                   v == view.distractor_semantic) {
          int s2 = mdp.state_index({view.done_structural, view.empty_semantic});
          mdp.trans(s, a, s2) = 1.0;
          mdp.rew(s, a) = spec.distractor_penalty;
        } else {
          mdp.trans(s, a, s) = 1.0;  // failed pick keeps the state
          mdp.rew(s, a) = spec.step_penalty;
        }
      }
    }
  }
  world.mdp = std::move(mdp);
  return world;
}

std::string ascii_render(const Gridworld& world, int agent_cell) {
  const GridSpec& spec = world.spec;
  std::string out;
  out += "+" + std::string(spec.width, '-') + "+\n";
  for (int r = 0; r < spec.height; ++r) {
    out += "|";
    for (int c = 0; c < spec.width; ++c) {
      int cell = r * spec.width + c;
      char ch = '.';
      auto it = spec.object_layout.find(cell);
      if (it != spec.object_layout.end()) {
        ch = static_cast<char>(std::toupper(static_cast<unsigned char>(it->second[0])));
      }
      if (cell == agent_cell) ch = '@';
      out += ch;
    }
    out += "|\n";
  }
  out += "+" + std::string(spec.width, '-') + "+\n";
  for (const auto& [cell, label] : spec.object_layout) {
    out += std::string(1, static_cast<char>(std::toupper(
               static_cast<unsigned char>(label[0])))) +
           " = " + label + " at (" + std::to_string(cell / spec.width) + "," +
           std::to_string(cell % spec.width) + ")\n";
  }
  return out;
}

nlohmann::json case_fixture_to_json(const CaseFixture& f) {
  return nlohmann::json{{"case_id", f.case_id},
                        {"source_spec", grid_spec_to_json(f.source_spec)},
                        {"target_spec", grid_spec_to_json(f.target_spec)},
                        {"phi", semantic_map_to_json(f.phi)},
                        {"expected_rule_rewrites", f.expected_rule_rewrites}};
}

CaseFixture case_fixture_from_json(const nlohmann::json& j) {
  CaseFixture f;
  f.case_id = j.at("case_id").get<int>();
  f.source_spec = grid_spec_from_json(j.at("source_spec"));
  f.target_spec = grid_spec_from_json(j.at("target_spec"));
  f.phi = semantic_map_from_json(j.at("phi"));
  if (j.contains("expected_rule_rewrites")) {
    f.expected_rule_rewrites = j.at("expected_rule_rewrites").get<std::string>();
  }
  return f;
}

CaseFixture make_case_fixture(int case_id, const CaseVocabulary& vocab,
                              std::uint64_t seed, int width, int height) {
  if (case_id < 1 || case_id > 3) {
    throw ContractViolation("case id must be 1, 2 or 3");
  }

  Rng rng(seed);
  const int cells = width * height;
  const int reward_cell = rng.uniform_int(cells);
  int distractor_cell = rng.uniform_int(cells);
  while (distractor_cell == reward_cell) distractor_cell = rng.uniform_int(cells);

  CaseFixture fixture;
  fixture.case_id = case_id;

  GridSpec source;
  source.width = width;
  source.height = height;
  source.reward_object = vocab.source_reward;
  source.distractor_object = vocab.source_distractor;
  source.wall_style = vocab.source_wall;
  source.floor_style = vocab.source_floor;
  source.object_layout = {{reward_cell, vocab.source_reward},
                          {distractor_cell, vocab.source_distractor}};
  source.vocabulary = {vocab.empty_label, vocab.source_reward,
                       vocab.source_distractor};
  fixture.source_spec = source;

  GridSpec target = source;
  target.reward_object = vocab.target_reward;
  switch (case_id) {
    case 1:
      target.distractor_object = vocab.source_distractor;
      target.object_layout = {{reward_cell, vocab.target_reward},
                              {distractor_cell, vocab.source_distractor}};
      target.vocabulary = {vocab.empty_label, vocab.target_reward,
                           vocab.source_distractor};
      fixture.phi = SemanticMap::from_label_pairs(
          {{vocab.empty_label, vocab.empty_label},
           {vocab.target_reward, vocab.source_reward},
           {vocab.source_distractor, vocab.source_distractor}},
          target.vocabulary, source.vocabulary);
      fixture.expected_rule_rewrites =
          "'" + vocab.target_reward + "' -> '" + vocab.source_reward + "'";
      break;
    case 2:
      target.distractor_object = vocab.source_distractor;
      target.wall_style = vocab.shifted_wall;
      target.object_layout = {{reward_cell, vocab.target_reward},
                              {distractor_cell, vocab.source_distractor}};
      target.vocabulary = {vocab.empty_label, vocab.target_reward,
                           vocab.source_distractor};
      fixture.phi = SemanticMap::from_label_pairs(
          {{vocab.empty_label, vocab.empty_label},
           {vocab.target_reward, vocab.source_reward},
           {vocab.source_distractor, vocab.source_distractor}},
          target.vocabulary, source.vocabulary);
      fixture.expected_rule_rewrites =
          "'" + vocab.target_reward + "' -> '" + vocab.source_reward +
          "', walls '" + vocab.shifted_wall + "' -> '" + vocab.source_wall + "'";
      break;
    case 3:
      // The old source reward object returns as the target's distractor.
      target.distractor_object = vocab.source_reward;
      target.object_layout = {{reward_cell, vocab.target_reward},
                              {distractor_cell, vocab.source_reward}};
      target.vocabulary = {vocab.empty_label, vocab.target_reward,
                           vocab.source_reward};
      fixture.phi = SemanticMap::from_label_pairs(
          {{vocab.empty_label, vocab.empty_label},
           {vocab.target_reward, vocab.source_reward},
           {vocab.source_reward, vocab.source_distractor}},
          target.vocabulary, source.vocabulary);
      fixture.expected_rule_rewrites =
          "'" + vocab.target_reward + "' -> '" + vocab.source_reward + "', '" +
          vocab.source_reward + "' -> '" + vocab.source_distractor + "'";
      break;
  }
  fixture.target_spec = target;
  return fixture;
}

}  // namespace aspect
