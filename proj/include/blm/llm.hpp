#pragma once

// Puzzle prompts for external language models and scoring of their
// free-text answers. Transport is left to an outside driver: prompts go out
// as JSON Lines and responses come back keyed by instance id.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blm/instance.hpp"
#include "blm/train.hpp"

namespace blm {

inline constexpr std::string_view kAnswerMarker = "Final answer:";
inline constexpr std::string_view kPromptTemplateVersion = "v1";
inline constexpr double kLlmTemperature = 0.1;
inline constexpr int kLlmMaxTokens = 2046;

struct PromptSpec {
  int shots = 0;  // 0, 1 or 5
  bool cot = false;
  std::uint64_t seed = 0;  // picks the worked examples from the pool
  std::vector<Instance> shot_pool;

  // Throws UsageError for an unsupported shot count, ShotPoolTooSmall when the
  // pool cannot supply the shots.
  void validate() const;
};

// Deterministic. Shots never include `inst` itself (matched by id).
std::string build_prompt(const Instance& inst, const PromptSpec& spec);

struct PromptRecord {
  std::string id;
  std::string prompt;
};

// Also rejects shot pools sharing ids with `instances` (ConfigError).
std::vector<PromptRecord> build_prompts(const std::vector<Instance>& instances, const PromptSpec& spec,
                                        unsigned jobs = 1);

struct LlmOutcome {
  std::string id;
  std::string raw;
  std::optional<std::size_t> index;  // nullopt = ERR

  bool is_err() const noexcept { return !index.has_value(); }
};

// Case-fold, trim, drop trailing punctuation, collapse whitespace.
std::string normalize_answer(std::string_view text);

// Final segment: the last line starting with the answer marker (text after
// the marker), else the last non-empty line.
std::string final_answer_segment(std::string_view raw);

// Exact match of the normalized final segment against normalized options.
LlmOutcome parse_response(std::string_view raw, const AnswerSet& answers, std::string id = {});

// One outcome per instance, matched by id (IdMismatch otherwise). ERR
// outcomes count as incorrect and populate the ERR slot.
EvalReport score_llm_run(const std::vector<LlmOutcome>& outcomes, const std::vector<Instance>& instances);

struct ResponseRecord {
  std::string id;
  std::string response;
};

void write_prompts_jsonl(const std::filesystem::path& path, const std::vector<PromptRecord>& prompts);
std::vector<PromptRecord> read_prompts_jsonl(const std::filesystem::path& path);
void write_responses_jsonl(const std::filesystem::path& path, const std::vector<ResponseRecord>& responses);
// Duplicate ids raise IdMismatch.
std::vector<ResponseRecord> read_responses_jsonl(const std::filesystem::path& path);

// Parses every response against the instance with the same id.
std::vector<LlmOutcome> resolve_responses(const std::vector<ResponseRecord>& responses,
                                          const std::vector<Instance>& instances);

}  // namespace blm
