#include "aspect/semantics.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

namespace aspect {

namespace {

constexpr const char* kEmptyLabel = "empty";

bool in_vocab(const std::vector<std::string>& vocab, const std::string& label) {
  return std::find(vocab.begin(), vocab.end(), label) != vocab.end();
}

std::string render_text(const std::optional<std::string>& object,
                        const std::optional<std::pair<int, int>>& location,
                        const std::string& wall, const std::string& floor) {
  std::string text;
  if (object) {
    text = "A " + *object + " is at row " + std::to_string(location->first) +
           ", column " + std::to_string(location->second) + ".";
  } else {
    text = "No objects are visible.";
  }
  text += " The walls are " + wall + ". The floor is " + floor + ".";
  return text;
}

// Minimal cursor-based matcher so parse errors can name a position.
struct Cursor {
  const std::string& text;
  std::size_t pos = 0;

  void expect(const std::string& literal) {
    if (text.compare(pos, literal.size(), literal) != 0) {
      throw CaptionParseError("expected \"" + literal + "\"", pos);
    }
    pos += literal.size();
  }

  std::string read_until(const std::string& delimiter) {
    std::size_t at = text.find(delimiter, pos);
    if (at == std::string::npos) {
      throw CaptionParseError("expected \"" + delimiter + "\" later in the text",
                              pos);
    }
    std::string out = text.substr(pos, at - pos);
    pos = at;
    return out;
  }

  int read_int() {
    std::size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      ++pos;
    }
    if (pos == start) throw CaptionParseError("expected a number", pos);
    return std::stoi(text.substr(start, pos - start));
  }

  void expect_end() {
    if (pos != text.size()) {
      throw CaptionParseError("trailing characters after the caption", pos);
    }
  }
};

}  // namespace

void TaskSpec::validate() const {
  if (reward_object.empty()) {
    throw ContractViolation("task spec needs a reward object");
  }
  if (!distractor_object.empty() && distractor_object == reward_object) {
    throw ContractViolation("reward and distractor objects must differ");
  }
}

std::string TaskSpec::describe() const {
  std::string s = "Pick the " + reward_object;
  if (!distractor_object.empty()) s += " and avoid the " + distractor_object;
  if (environment_descriptors.size() >= 2) {
    s += " in a room with " + environment_descriptors[0] + " walls and " +
         environment_descriptors[1] + " floor";
  }
  return s + ".";
}

Caption render_caption(FactoredState s, const EnvironmentDescriptor& env,
                       const std::vector<std::string>& vocab) {
  if (s.v < 0 || s.v >= static_cast<int>(vocab.size())) {
    throw VocabularyError("semantic index " + std::to_string(s.v) +
                          " has no label in the vocabulary");
  }
  if (s.u < 0 || s.u >= env.width * env.height) {
    throw ContractViolation("structural index " + std::to_string(s.u) +
                            " is not renderable on a " +
                            std::to_string(env.width) + "x" +
                            std::to_string(env.height) + " grid");
  }
  const std::string& label = vocab[s.v];
  Caption c;
  c.provenance = Caption::Provenance::Rendered;
  if (label == kEmptyLabel) {
    c.text = render_text(std::nullopt, std::nullopt, env.wall_style,
                         env.floor_style);
  } else {
    c.text = render_text(label, std::pair{s.u / env.width, s.u % env.width},
                         env.wall_style, env.floor_style);
  }
  return c;
}

ParsedCaption parse_caption_structure(const std::string& text) {
  ParsedCaption out;
  Cursor cur{text};
  if (text.rfind("No objects are visible.", 0) == 0) {
    cur.expect("No objects are visible.");
  } else {
    cur.expect("A ");
    out.object = cur.read_until(" is at row ");
    if (out.object->empty()) {
      throw CaptionParseError("empty object label", cur.pos);
    }
    cur.expect(" is at row ");
    int row = cur.read_int();
    cur.expect(", column ");
    int col = cur.read_int();
    cur.expect(".");
    out.location = {row, col};
  }
  cur.expect(" The walls are ");
  out.wall = cur.read_until(". The floor is ");
  cur.expect(". The floor is ");
  out.floor = cur.read_until(".");
  cur.expect(".");
  cur.expect_end();
  return out;
}

CaptionContents parse_caption(const Caption& caption,
                              const std::vector<std::string>& vocab) {
  ParsedCaption parsed = parse_caption_structure(caption.text);
  CaptionContents out;
  out.location = parsed.location;
  if (parsed.object) {
    if (!in_vocab(vocab, *parsed.object)) {
      throw VocabularyError("object label '" + *parsed.object +
                            "' is not in the vocabulary");
    }
    out.label = parsed.object;
  }
  return out;
}

OperatorResult rule_operator(const OperatorContext& ctx) {
  ctx.source_task.validate();
  ctx.target_task.validate();
  const std::string& input = ctx.observation_caption.text;

  ParsedCaption parsed;
  try {
    parsed = parse_caption_structure(input);
  } catch (const CaptionParseError&) {
    return {false, input};
  }

  const TaskSpec& src = ctx.source_task;
  const TaskSpec& tgt = ctx.target_task;

  // All rules act on the original tokens at once; a label rewritten by one
  // rule is never re-rewritten by another.
  std::optional<std::string> object = parsed.object;
  if (object) {
    if (*object == tgt.reward_object) {
      object = src.reward_object;
    } else if (*object == src.reward_object &&
               src.reward_object != tgt.reward_object &&
               !src.distractor_object.empty()) {
      object = src.distractor_object;
    }
  }

  std::string wall = parsed.wall;
  std::string floor = parsed.floor;
  if (src.environment_descriptors.size() >= 2 &&
      tgt.environment_descriptors.size() >= 2) {
    if (wall == tgt.environment_descriptors[0]) {
      wall = src.environment_descriptors[0];
    }
    if (floor == tgt.environment_descriptors[1]) {
      floor = src.environment_descriptors[1];
    }
  }

  std::string rewritten = render_text(object, parsed.location, wall, floor);
  if (rewritten == input) return {false, input};
  return {true, rewritten};
}

OperatorResult validate_operator_output(const std::string& raw) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("operator output is not a single JSON document: ") +
                          e.what(),
                      raw);
  }
  if (!j.is_object()) {
    throw SchemaError("operator output must be a JSON object", raw);
  }
  for (const auto& item : j.items()) {
    if (item.key() != "imagine" && item.key() != "description") {
      throw SchemaError("unexpected field '" + item.key() + "'", raw);
    }
  }
  if (!j.contains("imagine")) {
    throw SchemaError("missing field 'imagine'", raw);
  }
  if (!j.contains("description")) {
    throw SchemaError("missing field 'description'", raw);
  }
  if (!j["imagine"].is_boolean()) {
    throw SchemaError("field 'imagine' must be a boolean", raw);
  }
  if (!j["description"].is_string()) {
    throw SchemaError("field 'description' must be a string", raw);
  }
  OperatorResult out{j["imagine"].get<bool>(),
                     j["description"].get<std::string>()};
  if (out.description.empty()) {
    throw SchemaError("field 'description' must be non-empty", raw);
  }
  return out;
}

}  // namespace aspect
