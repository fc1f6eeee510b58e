#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace blm {

enum class Phenomenon : std::uint8_t { RollClass, BakeClass };
enum class DataType : std::uint8_t { TypeI, TypeII };
enum class Structure : std::uint8_t { Base, Shuffled, NoAnalogy, NoSoftCue, Transposed };
enum class CellRole : std::uint8_t { TransitiveAnchor, CueAction, CueState, IntransitiveAnchor, Blank };

// Distractor taxonomy. Order is the canonical label order used in reports.
enum class ErrorLabel : std::uint8_t { Correct, RR, SCRR, SCRS, PCRR, PSCRR, PSCRS };

inline constexpr std::size_t kNumLabels = 7;
inline constexpr std::array<ErrorLabel, kNumLabels> kAllLabels = {
    ErrorLabel::Correct, ErrorLabel::RR,    ErrorLabel::SCRR, ErrorLabel::SCRS,
    ErrorLabel::PCRR,    ErrorLabel::PSCRR, ErrorLabel::PSCRS};

inline constexpr std::array<Structure, 5> kAllStructures = {
    Structure::Base, Structure::Shuffled, Structure::NoAnalogy, Structure::NoSoftCue,
    Structure::Transposed};

struct ViolationFlags {
  bool paradigm = false;
  bool structure = false;
  bool role = false;

  friend constexpr bool operator==(const ViolationFlags&, const ViolationFlags&) = default;
};

// Paradigm / structure / role violations for each label.
constexpr ViolationFlags label_flags(ErrorLabel label) noexcept {
  switch (label) {
    case ErrorLabel::Correct: return {false, false, false};
    case ErrorLabel::RR: return {false, false, true};
    case ErrorLabel::SCRR: return {false, true, true};
    case ErrorLabel::SCRS: return {false, true, true};
    case ErrorLabel::PCRR: return {true, false, true};
    case ErrorLabel::PSCRR: return {true, true, true};
    case ErrorLabel::PSCRS: return {true, true, true};
  }
  return {};
}

std::string_view to_string(Phenomenon p) noexcept;
std::string_view to_string(DataType t) noexcept;
std::string_view to_string(Structure s) noexcept;
std::string_view to_string(CellRole r) noexcept;
std::string_view to_string(ErrorLabel l) noexcept;

// Parsers accept the canonical spellings plus a few CLI aliases
// ("roll", "RollClass", "I", "TypeI", ...). They throw Error(ParseError).
Phenomenon parse_phenomenon(std::string_view s);
DataType parse_data_type(std::string_view s);
Structure parse_structure(std::string_view s);
CellRole parse_cell_role(std::string_view s);
ErrorLabel parse_error_label(std::string_view s);

inline std::size_t label_index(ErrorLabel l) noexcept { return static_cast<std::size_t>(l); }

}  // namespace blm
