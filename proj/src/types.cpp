#include "blm/types.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "blm/error.hpp"

namespace blm {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  out.erase(std::remove(out.begin(), out.end(), '-'), out.end());
  out.erase(std::remove(out.begin(), out.end(), '_'), out.end());
  return out;
}

[[noreturn]] void bad(std::string_view what, std::string_view s) {
  throw Error(Errc::ParseError, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

}  // namespace

std::string_view to_string(Phenomenon p) noexcept {
  return p == Phenomenon::RollClass ? "roll" : "bake";
}

std::string_view to_string(DataType t) noexcept { return t == DataType::TypeI ? "I" : "II"; }

std::string_view to_string(Structure s) noexcept {
  switch (s) {
    case Structure::Base: return "base";
    case Structure::Shuffled: return "shuffled";
    case Structure::NoAnalogy: return "noanalogy";
    case Structure::NoSoftCue: return "nosoftcue";
    case Structure::Transposed: return "transposed";
  }
  return "base";
}

std::string_view to_string(CellRole r) noexcept {
  switch (r) {
    case CellRole::TransitiveAnchor: return "transitive_anchor";
    case CellRole::CueAction: return "cue_action";
    case CellRole::CueState: return "cue_state";
    case CellRole::IntransitiveAnchor: return "intransitive_anchor";
    case CellRole::Blank: return "blank";
  }
  return "blank";
}

std::string_view to_string(ErrorLabel l) noexcept {
  switch (l) {
    case ErrorLabel::Correct: return "Correct";
    case ErrorLabel::RR: return "RR";
    case ErrorLabel::SCRR: return "SCRR";
    case ErrorLabel::SCRS: return "SCRS";
    case ErrorLabel::PCRR: return "PCRR";
    case ErrorLabel::PSCRR: return "PSCRR";
    case ErrorLabel::PSCRS: return "PSCRS";
  }
  return "Correct";
}

Phenomenon parse_phenomenon(std::string_view s) {
  const auto k = lower(s);
  if (k == "roll" || k == "rollclass") return Phenomenon::RollClass;
  if (k == "bake" || k == "bakeclass") return Phenomenon::BakeClass;
  bad("phenomenon", s);
}

DataType parse_data_type(std::string_view s) {
  const auto k = lower(s);
  if (k == "i" || k == "typei" || k == "1") return DataType::TypeI;
  if (k == "ii" || k == "typeii" || k == "2") return DataType::TypeII;
  bad("data type", s);
}

Structure parse_structure(std::string_view s) {
  const auto k = lower(s);
  for (Structure st : kAllStructures)
    if (k == to_string(st)) return st;
  bad("structure", s);
}

CellRole parse_cell_role(std::string_view s) {
  for (CellRole r : {CellRole::TransitiveAnchor, CellRole::CueAction, CellRole::CueState,
                     CellRole::IntransitiveAnchor, CellRole::Blank})
    if (s == to_string(r)) return r;
  bad("cell role", s);
}

ErrorLabel parse_error_label(std::string_view s) {
  const auto k = lower(s);
  for (ErrorLabel l : kAllLabels)
    if (k == lower(to_string(l))) return l;
  bad("error label", s);
}

}  // namespace blm
