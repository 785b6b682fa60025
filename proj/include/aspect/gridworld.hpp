#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspect/analogy.hpp"
#include "aspect/mdp.hpp"
#include "aspect/semantics.hpp"

namespace aspect {

// Actions of every gridworld MDP.
inline constexpr int kActionUp = 0;
inline constexpr int kActionDown = 1;
inline constexpr int kActionLeft = 2;
inline constexpr int kActionRight = 3;
inline constexpr int kActionPick = 4;
inline constexpr int kNumGridActions = 5;

const char* action_name(int action);

/// Declarative description of one pick/avoid gridworld task. Wall and floor
/// styles are caption-only metadata; they never enter the dynamics.
struct GridSpec {
  int width = 6;
  int height = 6;
  std::string reward_object;
  std::string distractor_object;  // empty = no distractor
  std::string wall_style = "grey";
  std::string floor_style = "grey";
  std::map<int, std::string> object_layout;  // cell -> label
  std::vector<std::string> vocabulary;       // must contain "empty"
  double step_penalty = 0.0;
  double pick_reward = 1.0;
  double distractor_penalty = -1.0;
  int max_steps = 0;  // 0 = default 4*(width+height)
  double gamma = 0.95;

  int cells() const { return width * height; }
  int effective_max_steps() const {
    return max_steps > 0 ? max_steps : 4 * (width + height);
  }

  void validate() const;
};

nlohmann::json grid_spec_to_json(const GridSpec& spec);
GridSpec grid_spec_from_json(const nlohmann::json& j);

/// The factored view kept alongside the tabular model: scene lookup, the
/// absorbing "done" index, and the caption environment.
struct GridworldView {
  int width = 0;
  int height = 0;
  int done_structural = 0;          // = width*height; absorbing, not renderable
  std::vector<int> cell_semantic;   // per cell, index into the vocabulary
  std::vector<std::string> vocabulary;
  int empty_semantic = 0;
  int reward_semantic = -1;
  int distractor_semantic = -1;     // -1 = no distractor
  EnvironmentDescriptor env;

  bool renderable(int u) const { return u >= 0 && u < width * height; }
  FactoredState observe(int cell) const { return {cell, cell_semantic[cell]}; }
};

struct Gridworld {
  GridSpec spec;
  TabularMdp mdp;
  GridworldView view;
};

/// Compiles the spec into a deterministic tabular MDP over
/// (cells + done) x vocabulary:
///  - moves are clamped at walls and land on the scene's semantic,
///  - pick on the reward/distractor semantic terminates with its payoff,
///  - pick elsewhere self-loops at the step penalty,
///  - every done-state action self-loops with zero reward.
Gridworld make_gridworld(const GridSpec& spec);

/// Debug renderer: one character per cell, '@' marks the agent.
std::string ascii_render(const Gridworld& world, int agent_cell = -1);

/// Default label set matching the desk-scale task taxonomy.
struct CaseVocabulary {
  std::string empty_label = "empty";
  std::string source_reward = "red ball";
  std::string source_distractor = "green ball";
  std::string target_reward = "purple box";
  std::string source_wall = "grey";
  std::string source_floor = "grey";
  std::string shifted_wall = "blue";  // case 2 wall style
};

/// A (source, target, phi) triple for one of the three transfer cases:
///   1 unseen reward object, 2 additionally shifted wall style,
///   3 the old source reward object returns as the target's distractor.
struct CaseFixture {
  int case_id = 0;
  GridSpec source_spec;
  GridSpec target_spec;
  SemanticMap phi;
  std::string expected_rule_rewrites;
};

nlohmann::json case_fixture_to_json(const CaseFixture& fixture);
CaseFixture case_fixture_from_json(const nlohmann::json& j);

/// Builds a case fixture with object placements randomized per seed. Source
/// and target share placement cells, so the fixture is analogous by
/// construction.
CaseFixture make_case_fixture(int case_id, const CaseVocabulary& vocab,
                              std::uint64_t seed, int width = 6, int height = 6);

}  // namespace aspect
