#include "blm/lexicon.hpp"

#include <fstream>
#include <set>

#include "blm/error.hpp"
#include "blm/text.hpp"
#include "embedded_lexicon.hpp"

namespace blm {

using nlohmann::json;

namespace {

std::vector<std::string> strings(const json& node, const char* key) {
  if (!node.contains(key) || !node.at(key).is_array())
    throw Error(Errc::ParseError, std::string("lexicon: missing array '") + key + "'");
  return node.at(key).get<std::vector<std::string>>();
}

void require_slots(std::string_view tmpl, std::set<std::string> allowed, std::set<std::string> required,
                   const std::string& what) {
  std::map<std::string, int> seen;
  for (const auto& s : template_slots(tmpl)) ++seen[s];
  for (const auto& [name, n] : seen) {
    if (!allowed.count(name)) throw Error(Errc::ParseError, what + ": unexpected slot {" + name + "}");
    if (n != 1) throw Error(Errc::ParseError, what + ": slot {" + name + "} repeated");
  }
  for (const auto& r : required)
    if (!seen.count(r)) throw Error(Errc::ParseError, what + ": missing slot {" + r + "}");
}

void require_unique_nonempty(const std::vector<std::string>& items, const std::string& what) {
  std::set<std::string> seen;
  for (const auto& s : items) {
    if (normalize_text(s).empty()) throw Error(Errc::ParseError, what + ": empty entry");
    if (!seen.insert(normalize_text(s)).second) throw Error(Errc::ParseError, what + ": duplicate '" + s + "'");
  }
}

}  // namespace

std::vector<std::string> template_slots(std::string_view tmpl) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = tmpl.find('{', pos)) != std::string_view::npos) {
    const auto end = tmpl.find('}', pos);
    if (end == std::string_view::npos) throw Error(Errc::ParseError, "unterminated slot in template");
    out.emplace_back(tmpl.substr(pos + 1, end - pos - 1));
    pos = end + 1;
  }
  return out;
}

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const auto close = tmpl.find('}', open);
    if (close == std::string_view::npos) throw Error(Errc::TemplateSlotMissing, "unterminated slot");
    const std::string name(tmpl.substr(open + 1, close - open - 1));
    const auto it = values.find(name);
    if (it == values.end()) throw Error(Errc::TemplateSlotMissing, "no value for {" + name + "}");
    out.append(it->second);
    pos = close + 1;
  }
  return collapse_whitespace(out);
}

const Lexicon& Lexicon::builtin() {
  static const Lexicon lex = [] {
    Lexicon l = from_json(json::parse(embedded::kLexiconJson));
    l.validate();
    return l;
  }();
  return lex;
}

Lexicon Lexicon::from_json(const json& doc) {
  Lexicon lex;
  if (!doc.contains("phenomena")) throw Error(Errc::ParseError, "lexicon: missing 'phenomena'");
  for (const auto& [key, node] : doc.at("phenomena").items()) {
    PhenomenonLexicon pl;
    pl.phenomenon = parse_phenomenon(key);
    if (node.contains("target_subject")) {
      const auto expected = target_subject(pl.phenomenon) == SubjectRole::Theme ? "theme" : "agent";
      if (node.at("target_subject").get<std::string>() != expected)
        throw Error(Errc::ParseError, "lexicon[" + key + "]: target_subject must be '" + expected + "'");
    }
    for (const auto& v : node.at("verbs")) {
      pl.verbs.push_back(VerbEntry{v.at("lemma").get<std::string>(), pl.phenomenon,
                                   v.at("intransitive").get<std::string>(),
                                   v.at("transitive").get<std::string>()});
    }
    pl.agents = strings(node, "agents");
    pl.themes = strings(node, "themes");
    pl.locations = strings(node, "locations");
    pl.cue_action = strings(node, "cue_action");
    pl.cue_state = strings(node, "cue_state");
    lex.entries_[pl.phenomenon] = std::move(pl);
  }
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open lexicon " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, "lexicon " + path.string() + ": " + e.what());
  }
  Lexicon lex = from_json(doc);
  lex.validate();
  return lex;
}

const PhenomenonLexicon& Lexicon::get(Phenomenon p) const {
  const auto it = entries_.find(p);
  if (it == entries_.end())
    throw Error(Errc::ParseError, "lexicon has no entries for " + std::string(to_string(p)));
  return it->second;
}

json Lexicon::to_json() const {
  json phen = json::object();
  for (const auto& [p, pl] : entries_) {
    json verbs = json::array();
    for (const auto& v : pl.verbs)
      verbs.push_back({{"lemma", v.lemma}, {"intransitive", v.intransitive}, {"transitive", v.transitive}});
    phen[std::string(to_string(p))] = {
        {"target_subject", target_subject(p) == SubjectRole::Theme ? "theme" : "agent"},
        {"verbs", verbs},
        {"agents", pl.agents},
        {"themes", pl.themes},
        {"locations", pl.locations},
        {"cue_action", pl.cue_action},
        {"cue_state", pl.cue_state}};
  }
  return {{"version", 1}, {"phenomena", phen}};
}

void Lexicon::validate() const {
  for (const auto& [p, pl] : entries_) {
    const std::string where = "lexicon[" + std::string(to_string(p)) + "]";
    if (pl.verbs.empty()) throw Error(Errc::ParseError, where + ": no verbs");
    std::set<std::string> lemmas;
    for (const auto& v : pl.verbs) {
      if (v.lemma.empty()) throw Error(Errc::ParseError, where + ": empty lemma");
      if (!lemmas.insert(v.lemma).second) throw Error(Errc::ParseError, where + ": duplicate lemma " + v.lemma);
      require_slots(v.intransitive, {"SUBJ", "PP"}, {"SUBJ", "PP"}, where + "." + v.lemma + ".intransitive");
      require_slots(v.transitive, {"SUBJ", "OBJ", "PP"}, {"SUBJ", "OBJ", "PP"}, where + "." + v.lemma + ".transitive");
    }
    require_unique_nonempty(pl.agents, where + ".agents");
    require_unique_nonempty(pl.themes, where + ".themes");
    require_unique_nonempty(pl.locations, where + ".locations");
    for (const auto& a : pl.agents)
      for (const auto& t : pl.themes)
        if (normalize_text(a) == normalize_text(t))
          throw Error(Errc::ParseError, where + ": '" + a + "' is both agent and theme");
    if (pl.agents.size() < 2 || pl.themes.size() < 2 || pl.locations.size() < 2)
      throw Error(Errc::ParseError, where + ": need at least two agents, themes and locations");
    if (pl.cue_action.empty() || pl.cue_state.empty()) throw Error(Errc::ParseError, where + ": no cue templates");
    for (const auto& c : pl.cue_action) require_slots(c, {"AGENT"}, {"AGENT"}, where + ".cue_action");
    for (const auto& c : pl.cue_state) require_slots(c, {"THEME"}, {"THEME"}, where + ".cue_state");
  }
}

void validate(const ParadigmSpec& spec) {
  if (spec.agent.empty() || spec.theme.empty() || spec.location.empty())
    throw Error(Errc::ParseError, "paradigm spec has empty agent, theme or location");
  if (normalize_text(spec.agent) == normalize_text(spec.theme))
    throw Error(Errc::DegenerateParadigm, "agent and theme coincide: '" + spec.agent + "'");
  if (spec.verb.lemma.empty()) throw Error(Errc::ParseError, "paradigm spec has no verb");
  if (spec.cue_action.empty() || spec.cue_state.empty())
    throw Error(Errc::ParseError, "paradigm spec has empty cue sentence");
}

}  // namespace blm
