#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "blm/types.hpp"

namespace blm {

struct Cell {
  CellRole role = CellRole::Blank;
  std::optional<std::string> text;  // empty for the Blank and for masked cells
  bool masked = false;

  bool is_blank() const noexcept { return role == CellRole::Blank; }
  bool has_text() const noexcept { return text.has_value(); }

  friend bool operator==(const Cell&, const Cell&) = default;
};

// Row-major grid of cells, 2x4 in Base orientation and 4x2 when transposed.
// Coordinates are zero-based here; the file format uses one-based.
class ContextMatrix {
 public:
  ContextMatrix() : ContextMatrix(2, 4) {}
  ContextMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), cells_(rows * cols) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  Cell& at(std::size_t r, std::size_t c) { return cells_.at(r * cols_ + c); }
  const Cell& at(std::size_t r, std::size_t c) const { return cells_.at(r * cols_ + c); }
  std::vector<Cell>& cells() noexcept { return cells_; }
  const std::vector<Cell>& cells() const noexcept { return cells_; }

  std::size_t count_blank() const;
  std::size_t count_sentences() const;

  friend bool operator==(const ContextMatrix&, const ContextMatrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<Cell> cells_;
};

inline constexpr std::array<CellRole, 4> kRowRoles = {
    CellRole::TransitiveAnchor, CellRole::CueAction, CellRole::CueState, CellRole::IntransitiveAnchor};

struct AnswerOption {
  std::string text;
  ErrorLabel label = ErrorLabel::Correct;

  friend bool operator==(const AnswerOption&, const AnswerOption&) = default;
};

struct AnswerSet {
  std::array<AnswerOption, kNumLabels> options;
  std::size_t correct_index = 0;

  // Exactly one Correct at correct_index, seven distinct labels and texts.
  void validate() const;

  friend bool operator==(const AnswerSet&, const AnswerSet&) = default;
};

// Lexical material a paradigm was built from (provenance).
struct ParadigmLexemes {
  std::string agent;
  std::string theme;
  std::string verb;
  std::string location;

  friend bool operator==(const ParadigmLexemes&, const ParadigmLexemes&) = default;
};

struct Instance {
  std::string id;
  Phenomenon phenomenon = Phenomenon::RollClass;
  DataType data_type = DataType::TypeI;
  Structure structure = Structure::Base;
  ContextMatrix context;
  AnswerSet answers;
  std::uint64_t seed = 0;
  std::optional<std::array<ParadigmLexemes, 2>> lexemes;

  friend bool operator==(const Instance&, const Instance&) = default;
};

// Every distinct sentence an instance references (context and options),
// in first-appearance order.
std::vector<std::string> instance_sentences(const Instance& inst);

nlohmann::ordered_json to_json(const Instance& inst);
Instance instance_from_json(const nlohmann::json& j);

std::string to_jsonl_line(const Instance& inst);
void write_jsonl(const std::filesystem::path& path, const std::vector<Instance>& instances);
std::vector<Instance> read_jsonl(const std::filesystem::path& path);

}  // namespace blm
