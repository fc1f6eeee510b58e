#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "blm/instance.hpp"
#include "blm/lexicon.hpp"

namespace blm {

// Sentence renderers shared by context and answer construction.
std::string render_transitive(const VerbEntry& verb, const std::string& subj, const std::string& obj,
                              const std::string& pp);
std::string render_intransitive(const VerbEntry& verb, const std::string& subj, const std::string& pp);
// "<SUBJ> was <PP>", the only copular frame.
std::string render_copular(const std::string& subj, const std::string& pp);

// Row 1 from spec_a, row 2 from spec_b with its intransitive anchor blank.
ContextMatrix build_context(const ParadigmSpec& spec_a, const ParadigmSpec& spec_b);

// The seven taxonomy options, permuted by rng_seed.
AnswerSet build_answer_set(const ContextMatrix& context, const ParadigmSpec& spec_a, const ParadigmSpec& spec_b,
                           std::uint64_t rng_seed);

struct GenerateOptions {
  bool require_unique = false;  // throw LexiconExhausted instead of relaxing
  unsigned jobs = 1;
};

// Number of distinct lexical tuples available (saturating at UINT64_MAX).
std::uint64_t combination_space(const PhenomenonLexicon& lex, DataType type);

std::vector<Instance> generate_dataset(const Lexicon& lexicon, Phenomenon phenomenon, DataType type,
                                       std::size_t count, std::uint64_t seed, const GenerateOptions& opts = {});

struct DatasetSplit {
  std::vector<Instance> train;
  std::vector<Instance> val;
  std::vector<Instance> test;
};

DatasetSplit split_dataset(const std::vector<Instance>& instances, const std::array<double, 3>& ratios,
                           std::uint64_t seed);

// Structural taxonomy check: every option text is matched back to the unique
// (paradigm, frame, subject) rendering that produces it and the implied
// P/S/R flags are compared with the option's label. Needs instance lexemes.
struct TaxonomyCheck {
  bool ok = true;
  std::vector<std::string> problems;
};

TaxonomyCheck check_taxonomy(const Instance& inst, const Lexicon& lexicon);

}  // namespace blm
