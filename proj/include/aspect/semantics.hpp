#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aspect/errors.hpp"
#include "aspect/mdp.hpp"

namespace aspect {

/// A textual observation together with where it came from.
struct Caption {
  enum class Provenance { Rendered, OperatorOutput, External };

  std::string text;
  Provenance provenance = Provenance::External;
};

/// A pick/avoid task description: the reward object, an optional distractor,
/// and ordered environment descriptors [wall style, floor style].
struct TaskSpec {
  std::string reward_object;
  std::string distractor_object;  // empty = none
  std::vector<std::string> environment_descriptors;

  void validate() const;
  /// One-sentence rendering used in operator prompts.
  std::string describe() const;
};

/// The context handed to a semantic operator alongside the observation.
struct OperatorContext {
  std::string environment_brief;
  TaskSpec source_task;
  TaskSpec target_task;
  Caption observation_caption;
};

/// Result contract for every semantic operator: whether the scene was
/// reimagined, and the (rewritten or verbatim) description.
struct OperatorResult {
  bool imagine = false;
  std::string description;
};

/// Grid-scale render geometry plus the caption-only style descriptors.
struct EnvironmentDescriptor {
  int width = 0;
  int height = 0;
  std::string wall_style;
  std::string floor_style;
};

/// Fills the fixed caption template:
///   "A <object> is at row <r>, column <c>. The walls are <wall>. The floor
///    is <floor>."
/// States whose semantic is "empty" use the no-object form. Pure function of
/// its inputs. Throws VocabularyError for labels outside `vocab` and
/// ContractViolation for non-renderable structural indices.
Caption render_caption(FactoredState s, const EnvironmentDescriptor& env,
                       const std::vector<std::string>& vocab);

/// Structural parse of the caption grammar, no vocabulary check.
struct ParsedCaption {
  std::optional<std::string> object;
  std::optional<std::pair<int, int>> location;  // (row, column)
  std::string wall;
  std::string floor;
};

ParsedCaption parse_caption_structure(const std::string& text);

/// Grammar parse plus vocabulary validation; inverse of render_caption.
struct CaptionContents {
  std::optional<std::string> label;
  std::optional<std::pair<int, int>> location;
};

CaptionContents parse_caption(const Caption& caption,
                              const std::vector<std::string>& vocab);

/// Deterministic semantic operator. Applies, as one simultaneous
/// substitution over the parsed caption:
///   1. target reward label      -> source reward label
///   2. source reward label      -> source distractor label (when it shows up
///      as a non-reward object of the target task)
///   3. target style descriptors -> source style descriptors
/// imagine is true iff the description actually changed; otherwise the input
/// text is returned verbatim. Total on well-formed contexts: captions outside
/// the grammar pass through unchanged.
OperatorResult rule_operator(const OperatorContext& ctx);

/// Strict schema gate for operator output: exactly one JSON object with a
/// boolean "imagine" and a non-empty string "description", nothing else.
/// Surrounding whitespace is tolerated; trailing commentary, markdown fences,
/// missing/extra/retyped fields are rejected with SchemaError.
OperatorResult validate_operator_output(const std::string& raw);

}  // namespace aspect
