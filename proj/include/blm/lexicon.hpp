#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "blm/types.hpp"

namespace blm {

// Verb with its two frames. Templates carry inflected forms and use the slots
// {SUBJ}, {OBJ} (transitive only) and {PP}.
struct VerbEntry {
  std::string lemma;
  Phenomenon phenomenon = Phenomenon::RollClass;
  std::string intransitive;
  std::string transitive;
};

// Which entity surfaces as the subject of the intransitive target sentence:
// the Theme for roll-class verbs, the Agent for bake-class verbs.
enum class SubjectRole { Agent, Theme };

constexpr SubjectRole target_subject(Phenomenon p) noexcept {
  return p == Phenomenon::RollClass ? SubjectRole::Theme : SubjectRole::Agent;
}

struct PhenomenonLexicon {
  Phenomenon phenomenon = Phenomenon::RollClass;
  std::vector<VerbEntry> verbs;
  std::vector<std::string> agents;
  std::vector<std::string> themes;
  std::vector<std::string> locations;
  std::vector<std::string> cue_action;  // templates over {AGENT}
  std::vector<std::string> cue_state;   // templates over {THEME}
};

class Lexicon {
 public:
  // The curated inventory shipped in data/lexicon.json, compiled in.
  static const Lexicon& builtin();
  static Lexicon from_json(const nlohmann::json& doc);
  static Lexicon load(const std::filesystem::path& path);

  const PhenomenonLexicon& get(Phenomenon p) const;
  nlohmann::json to_json() const;

  // Throws Error(ParseError) describing the first violated invariant.
  void validate() const;

 private:
  std::map<Phenomenon, PhenomenonLexicon> entries_;
};

// Substitute "{NAME}" slots. Every slot in the template must be bound, else
// Error(TemplateSlotMissing). Bound values may be empty.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

// Slot names in order of appearance.
std::vector<std::string> template_slots(std::string_view tmpl);

// One row of the context grid.
struct ParadigmSpec {
  std::string agent;
  std::string theme;
  VerbEntry verb;
  std::string cue_action;  // rendered sentence
  std::string cue_state;   // rendered sentence
  std::string location;
};

void validate(const ParadigmSpec& spec);

}  // namespace blm
