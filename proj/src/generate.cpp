#include "blm/generate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <thread>
#include <unordered_set>

#include "blm/error.hpp"
#include "blm/rng.hpp"
#include "blm/text.hpp"

namespace blm {

namespace {

const std::string& target_entity(const ParadigmSpec& s) {
  return target_subject(s.verb.phenomenon) == SubjectRole::Theme ? s.theme : s.agent;
}

const std::string& other_entity(const ParadigmSpec& s) {
  return target_subject(s.verb.phenomenon) == SubjectRole::Theme ? s.agent : s.theme;
}

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

template <class T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[static_cast<std::size_t>(rng.below(items.size()))];
}

// Two distinct indices into a list of size n >= 2.
std::pair<std::size_t, std::size_t> pick_two(Rng& rng, std::size_t n) {
  const auto i = static_cast<std::size_t>(rng.below(n));
  auto j = static_cast<std::size_t>(rng.below(n - 1));
  if (j >= i) ++j;
  return {i, j};
}

struct Draw {
  std::array<ParadigmSpec, 2> specs;
  std::string key;
};

Draw draw_paradigms(const PhenomenonLexicon& lex, DataType type, std::uint64_t sub_seed) {
  Rng rng(sub_seed);
  std::size_t va = static_cast<std::size_t>(rng.below(lex.verbs.size()));
  std::size_t vb = va;
  if (type == DataType::TypeII) {
    auto [i, j] = pick_two(rng, lex.verbs.size());
    va = i;
    vb = j;
  }
  const auto [ag_a, ag_b] = pick_two(rng, lex.agents.size());
  const auto [th_a, th_b] = pick_two(rng, lex.themes.size());
  const auto [lo_a, lo_b] = pick_two(rng, lex.locations.size());

  Draw d;
  const std::size_t verbs[2] = {va, vb}, agents[2] = {ag_a, ag_b}, themes[2] = {th_a, th_b},
                    locs[2] = {lo_a, lo_b};
  for (std::size_t k = 0; k < 2; ++k) {
    ParadigmSpec& s = d.specs[k];
    s.verb = lex.verbs[verbs[k]];
    s.agent = lex.agents[agents[k]];
    s.theme = lex.themes[themes[k]];
    s.location = lex.locations[locs[k]];
    s.cue_action = finish_sentence(fill_template(pick(rng, lex.cue_action), {{"AGENT", s.agent}}));
    s.cue_state = finish_sentence(fill_template(pick(rng, lex.cue_state), {{"THEME", s.theme}}));
    d.key += std::to_string(verbs[k]) + ',' + std::to_string(agents[k]) + ',' + std::to_string(themes[k]) + ',' +
             std::to_string(locs[k]) + ';';
  }
  return d;
}

std::string instance_id(Phenomenon p, DataType t, std::uint64_t seed, std::size_t index) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s-%s-%llu-%06zu", std::string(to_string(p)).c_str(),
                std::string(to_string(t)).c_str(), static_cast<unsigned long long>(seed), index);
  return buf;
}

std::uint64_t attempt_seed(std::uint64_t seed, std::size_t index, std::uint64_t attempt) {
  return mix_seed(mix_seed(seed, static_cast<std::uint64_t>(index)), attempt);
}

Instance assemble(const Draw& d, Phenomenon p, DataType t, std::uint64_t dataset_seed, std::size_t index,
                  std::uint64_t sub_seed) {
  Instance inst;
  inst.id = instance_id(p, t, dataset_seed, index);
  inst.phenomenon = p;
  inst.data_type = t;
  inst.structure = Structure::Base;
  inst.seed = sub_seed;
  inst.context = build_context(d.specs[0], d.specs[1]);
  inst.answers = build_answer_set(inst.context, d.specs[0], d.specs[1], mix_seed(dataset_seed, inst.id));
  std::array<ParadigmLexemes, 2> lx;
  for (std::size_t k = 0; k < 2; ++k)
    lx[k] = {d.specs[k].agent, d.specs[k].theme, d.specs[k].verb.lemma, d.specs[k].location};
  inst.lexemes = lx;
  return inst;
}

}  // namespace

std::string render_transitive(const VerbEntry& verb, const std::string& subj, const std::string& obj,
                              const std::string& pp) {
  return finish_sentence(fill_template(verb.transitive, {{"SUBJ", subj}, {"OBJ", obj}, {"PP", pp}}));
}

std::string render_intransitive(const VerbEntry& verb, const std::string& subj, const std::string& pp) {
  return finish_sentence(fill_template(verb.intransitive, {{"SUBJ", subj}, {"PP", pp}}));
}

std::string render_copular(const std::string& subj, const std::string& pp) {
  return finish_sentence(fill_template("{SUBJ} was {PP}", {{"SUBJ", subj}, {"PP", pp}}));
}

ContextMatrix build_context(const ParadigmSpec& spec_a, const ParadigmSpec& spec_b) {
  validate(spec_a);
  validate(spec_b);
  if (spec_a.verb.phenomenon != spec_b.verb.phenomenon)
    throw Error(Errc::ParseError, "paradigm specs belong to different phenomena");

  ContextMatrix m(2, 4);
  const ParadigmSpec* rows[2] = {&spec_a, &spec_b};
  for (std::size_t r = 0; r < 2; ++r) {
    const ParadigmSpec& s = *rows[r];
    const std::string texts[4] = {render_transitive(s.verb, s.agent, s.theme, s.location), s.cue_action,
                                  s.cue_state, render_intransitive(s.verb, target_entity(s), s.location)};
    for (std::size_t c = 0; c < 4; ++c) {
      m.at(r, c).role = kRowRoles[c];
      m.at(r, c).text = texts[c];
    }
  }
  m.at(1, 3) = Cell{CellRole::Blank, std::nullopt, false};
  return m;
}

AnswerSet build_answer_set(const ContextMatrix& context, const ParadigmSpec& spec_a, const ParadigmSpec& spec_b,
                           std::uint64_t rng_seed) {
  if (context.rows() != 2 || context.cols() != 4 || !context.at(1, 3).is_blank() || context.count_blank() != 1)
    throw Error(Errc::ShapeError, "answer sets are built from a Base 2x4 context with the blank at (2,4)");

  const auto& a = spec_a;
  const auto& b = spec_b;
  std::array<AnswerOption, kNumLabels> canonical = {{
      {render_intransitive(b.verb, target_entity(b), b.location), ErrorLabel::Correct},
      {render_intransitive(b.verb, other_entity(b), b.location), ErrorLabel::RR},
      {render_copular(other_entity(b), b.location), ErrorLabel::SCRR},
      {render_transitive(b.verb, b.theme, b.agent, ""), ErrorLabel::SCRS},
      {render_intransitive(a.verb, other_entity(a), a.location), ErrorLabel::PCRR},
      {render_copular(other_entity(a), a.location), ErrorLabel::PSCRR},
      {render_transitive(a.verb, a.theme, a.agent, ""), ErrorLabel::PSCRS},
  }};

  std::set<std::string> texts;
  for (const auto& o : canonical)
    if (!texts.insert(normalize_text(o.text)).second)
      throw Error(Errc::DegenerateParadigm, "distractor coincides with another option: '" + o.text + "'");

  std::array<std::size_t, kNumLabels> order;
  std::iota(order.begin(), order.end(), 0);
  Rng rng(rng_seed);
  rng.shuffle(std::span<std::size_t>(order));

  AnswerSet out;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    out.options[i] = canonical[order[i]];
    if (out.options[i].label == ErrorLabel::Correct) out.correct_index = i;
  }
  return out;
}

std::uint64_t combination_space(const PhenomenonLexicon& lex, DataType type) {
  auto perm2 = [](std::size_t n) -> std::uint64_t { return n < 2 ? 0 : sat_mul(n, n - 1); };
  const std::uint64_t verbs = type == DataType::TypeI ? lex.verbs.size() : perm2(lex.verbs.size());
  return sat_mul(sat_mul(sat_mul(verbs, perm2(lex.agents.size())), perm2(lex.themes.size())),
                 perm2(lex.locations.size()));
}

std::vector<Instance> generate_dataset(const Lexicon& lexicon, Phenomenon phenomenon, DataType type,
                                       std::size_t count, std::uint64_t seed, const GenerateOptions& opts) {
  if (count == 0) throw Error(Errc::EmptyDataset, "count must be at least 1");
  const PhenomenonLexicon& lex = lexicon.get(phenomenon);
  if (lex.verbs.empty()) throw Error(Errc::LexiconExhausted, "no verbs for phenomenon");
  if (type == DataType::TypeII && lex.verbs.size() < 2)
    throw Error(Errc::LexiconExhausted, "Type II needs at least two verbs");

  const std::uint64_t space = combination_space(lex, type);
  const bool exhausts = count > space;
  if (exhausts && opts.require_unique)
    throw Error(Errc::LexiconExhausted, "requested " + std::to_string(count) + " instances but only " +
                                            std::to_string(space) + " distinct combinations exist");
  if (exhausts)
    std::cerr << "warning: " << count << " instances exceed " << space
              << " distinct combinations; uniqueness relaxed once exhausted\n";

  // First-attempt draws are independent per instance and can be computed in
  // parallel; collisions are then resolved serially so the result does not
  // depend on the job count.
  std::vector<Draw> first(count);
  const unsigned jobs = std::max(1u, std::min<unsigned>(opts.jobs, static_cast<unsigned>(count)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) first[i] = draw_paradigms(lex, type, attempt_seed(seed, i, 0));
  } else {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t i = w; i < count; i += jobs) first[i] = draw_paradigms(lex, type, attempt_seed(seed, i, 0));
      });
    }
  }

  constexpr std::uint64_t kMaxAttempts = 4096;
  std::unordered_set<std::string> used;
  std::vector<Instance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Draw d = std::move(first[i]);
    std::uint64_t sub_seed = attempt_seed(seed, i, 0);
    const bool unique_possible = used.size() < space;
    for (std::uint64_t attempt = 1; unique_possible && used.count(d.key) && attempt < kMaxAttempts; ++attempt) {
      sub_seed = attempt_seed(seed, i, attempt);
      d = draw_paradigms(lex, type, sub_seed);
    }
    if (used.count(d.key) && unique_possible && opts.require_unique)
      throw Error(Errc::LexiconExhausted, "could not draw a fresh combination for instance " + std::to_string(i));
    used.insert(d.key);
    out.push_back(assemble(d, phenomenon, type, seed, i, sub_seed));
  }
  return out;
}

DatasetSplit split_dataset(const std::vector<Instance>& instances, const std::array<double, 3>& ratios,
                           std::uint64_t seed) {
  if (instances.empty()) throw Error(Errc::EmptyDataset, "cannot split an empty dataset");
  for (double r : ratios)
    if (!(r >= 0.0 && r <= 1.0)) throw Error(Errc::BadRatios, "ratios must lie in [0, 1]");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw Error(Errc::BadRatios, "ratios must sum to 1");

  const std::size_t n = instances.size();
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[1]));
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[2]));
  if (n_val + n_test > n) throw Error(Errc::BadRatios, "rounded split sizes exceed dataset size");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  DatasetSplit out;
  const std::size_t n_train = n - n_val - n_test;
  for (std::size_t k = 0; k < n; ++k) {
    const Instance& inst = instances[order[k]];
    if (k < n_train)
      out.train.push_back(inst);
    else if (k < n_train + n_val)
      out.val.push_back(inst);
    else
      out.test.push_back(inst);
  }
  return out;
}

TaxonomyCheck check_taxonomy(const Instance& inst, const Lexicon& lexicon) {
  TaxonomyCheck res;
  auto fail = [&](std::string msg) {
    res.ok = false;
    res.problems.push_back(inst.id + ": " + std::move(msg));
  };

  try {
    inst.answers.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
  if (!inst.lexemes) {
    fail("instance carries no lexeme provenance");
    return res;
  }

  const PhenomenonLexicon& lex = lexicon.get(inst.phenomenon);
  auto find_verb = [&](const std::string& lemma) -> const VerbEntry* {
    for (const auto& v : lex.verbs)
      if (v.lemma == lemma) return &v;
    return nullptr;
  };

  enum class Frame { Intransitive, Copular, Transitive, TransitiveWithPP };
  struct Derivation {
    int paradigm;  // 0 = A, 1 = B
    Frame frame;
    bool subject_is_theme;
  };
  std::multimap<std::string, Derivation> renderings;
  for (int k = 0; k < 2; ++k) {
    const auto& p = (*inst.lexemes)[static_cast<std::size_t>(k)];
    const VerbEntry* verb = find_verb(p.verb);
    if (!verb) {
      fail("unknown verb '" + p.verb + "'");
      return res;
    }
    for (bool theme_subj : {false, true}) {
      const std::string& subj = theme_subj ? p.theme : p.agent;
      const std::string& obj = theme_subj ? p.agent : p.theme;
      renderings.insert({normalize_text(render_intransitive(*verb, subj, p.location)), {k, Frame::Intransitive, theme_subj}});
      renderings.insert({normalize_text(render_copular(subj, p.location)), {k, Frame::Copular, theme_subj}});
      renderings.insert({normalize_text(render_transitive(*verb, subj, obj, "")), {k, Frame::Transitive, theme_subj}});
      renderings.insert({normalize_text(render_transitive(*verb, subj, obj, p.location)),
                         {k, Frame::TransitiveWithPP, theme_subj}});
    }
  }

  const bool target_is_theme = target_subject(inst.phenomenon) == SubjectRole::Theme;
  for (const auto& opt : inst.answers.options) {
    const auto [lo, hi] = renderings.equal_range(normalize_text(opt.text));
    const auto n = std::distance(lo, hi);
    if (n != 1) {
      fail("option '" + opt.text + "' matches " + std::to_string(n) + " template renderings");
      continue;
    }
    const Derivation& d = lo->second;
    const bool transitive = d.frame == Frame::Transitive || d.frame == Frame::TransitiveWithPP;
    // Transitive options put the theme before the agent: the inverted order is
    // itself the role violation.
    const bool inverted = transitive && d.subject_is_theme;
    ViolationFlags derived;
    derived.paradigm = d.paradigm == 0;
    derived.structure = d.frame != Frame::Intransitive;
    derived.role = inverted || (d.subject_is_theme != target_is_theme);
    if (derived != label_flags(opt.label))
      fail("option '" + opt.text + "' labeled " + std::string(to_string(opt.label)) +
           " has structural flags (P=" + std::to_string(derived.paradigm) + ",S=" + std::to_string(derived.structure) +
           ",R=" + std::to_string(derived.role) + ")");
  }

  // Type I shares the verb across paradigms, Type II does not.
  const bool same_verb = (*inst.lexemes)[0].verb == (*inst.lexemes)[1].verb;
  if ((inst.data_type == DataType::TypeI) != same_verb) fail("verb sharing contradicts data type");
  return res;
}

}  // namespace blm
