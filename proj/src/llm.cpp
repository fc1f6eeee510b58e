#include "blm/llm.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "blm/ablate.hpp"
#include "blm/error.hpp"
#include "blm/rng.hpp"
#include "blm/text.hpp"
#include "embedded_prompt.hpp"

namespace blm {

namespace {

using json = nlohmann::json;

// Named sections of the prompt template asset. Anything before the first
// "[name]" header is commentary and ignored.
class PromptTemplate {
 public:
  explicit PromptTemplate(std::string_view source) {
    std::string* current = nullptr;
    std::size_t pos = 0;
    while (pos <= source.size()) {
      const std::size_t nl = std::min(source.find('\n', pos), source.size());
      const std::string_view line = source.substr(pos, nl - pos);
      pos = nl + 1;
      if (line.size() > 2 && line.front() == '[' && line.back() == ']') {
        current = &sections_[std::string(line.substr(1, line.size() - 2))];
        continue;
      }
      if (current == nullptr) continue;
      current->append(line);
      current->push_back('\n');
    }
    for (auto& [name, body] : sections_)
      while (body.size() >= 2 && body.ends_with("\n\n")) body.pop_back();
  }

  const std::string& section(const std::string& name) const {
    const auto it = sections_.find(name);
    if (it == sections_.end()) throw Error(Errc::ConfigError, "prompt template lacks section [" + name + "]");
    return it->second;
  }

 private:
  std::map<std::string, std::string> sections_;
};

const PromptTemplate& prompt_template() {
  static const PromptTemplate tpl(embedded::kPromptTemplateV1);
  return tpl;
}

std::string substitute(std::string text, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string placeholder = "{{" + key + "}}";
    for (std::size_t at = text.find(placeholder); at != std::string::npos;
         at = text.find(placeholder, at + value.size()))
      text.replace(at, placeholder.size(), value);
  }
  return text;
}

// Displayed context: unmasked slots in traversal order, then the gap.
std::string render_context(const Instance& inst) {
  std::string out;
  std::size_t n = 0;
  for (const Slot& slot : flatten(inst.context)) {
    if (slot.masked()) continue;
    out += std::to_string(++n) + ". " + *slot.text + '\n';
  }
  out += std::to_string(n + 1) + ". ???";
  return out;
}

std::string render_options(const AnswerSet& answers) {
  std::string out;
  for (std::size_t i = 0; i < answers.options.size(); ++i) {
    if (i) out.push_back('\n');
    out += "- " + answers.options[i].text;
  }
  return out;
}

std::vector<const Instance*> pick_shots(const Instance& inst, const PromptSpec& spec) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < spec.shot_pool.size(); ++i)
    if (spec.shot_pool[i].id != inst.id) eligible.push_back(i);
  const auto k = static_cast<std::size_t>(spec.shots);
  if (eligible.size() < k)
    throw Error(Errc::ShotPoolTooSmall, "instance " + inst.id + " needs " + std::to_string(k) + " shots, pool has " +
                                            std::to_string(eligible.size()) + " usable");
  Rng rng(mix_seed(spec.seed, std::string_view("shots")));
  rng.shuffle(std::span<std::size_t>(eligible));
  eligible.resize(k);
  std::sort(eligible.begin(), eligible.end());
  std::vector<const Instance*> shots;
  for (auto i : eligible) shots.push_back(&spec.shot_pool[i]);
  return shots;
}

bool is_terminal_punct(char c) {
  switch (c) {
    case '.': case '!': case '?': case ',': case ';': case ':': case '"': case '\'':
      return true;
    default:
      return false;
  }
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(first, last - first + 1);
}

bool starts_with_marker(std::string_view line) {
  if (line.size() < kAnswerMarker.size()) return false;
  for (std::size_t i = 0; i < kAnswerMarker.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(line[i])) != std::tolower(static_cast<unsigned char>(kAnswerMarker[i])))
      return false;
  return true;
}

template <class Rec, class Fn>
std::vector<Rec> read_records(const std::filesystem::path& path, Fn&& from_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<Rec> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

template <class Rec, class Fn>
void write_records(const std::filesystem::path& path, const std::vector<Rec>& records, Fn&& to_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

}  // namespace

void PromptSpec::validate() const {
  if (shots != 0 && shots != 1 && shots != 5)
    throw Error(Errc::UsageError, "shots must be 0, 1 or 5, got " + std::to_string(shots));
  if (shot_pool.size() < static_cast<std::size_t>(shots))
    throw Error(Errc::ShotPoolTooSmall, "shot pool has " + std::to_string(shot_pool.size()) + " instances, " +
                                            std::to_string(shots) + " needed");
}

std::string build_prompt(const Instance& inst, const PromptSpec& spec) {
  spec.validate();
  inst.answers.validate();
  const PromptTemplate& tpl = prompt_template();
  const std::string marker(kAnswerMarker);

  std::string prompt = tpl.section("framing") + '\n';
  std::size_t index = 0;
  for (const Instance* shot : pick_shots(inst, spec)) {
    const std::string& answer = shot->answers.options[shot->answers.correct_index].text;
    prompt += substitute(tpl.section("example"), {{"index", std::to_string(++index)},
                                                  {"context", render_context(*shot)},
                                                  {"options", render_options(shot->answers)},
                                                  {"answer", answer},
                                                  {"marker", marker}});
    prompt += '\n';
  }
  prompt += substitute(tpl.section("query"),
                       {{"context", render_context(inst)}, {"options", render_options(inst.answers)}});
  prompt += '\n' + substitute(tpl.section("instruction"), {{"marker", marker}});
  if (spec.cot) prompt += '\n' + tpl.section("cot");
  return prompt;
}

std::vector<PromptRecord> build_prompts(const std::vector<Instance>& instances, const PromptSpec& spec,
                                        unsigned jobs) {
  spec.validate();
  std::set<std::string> pool_ids;
  for (const auto& s : spec.shot_pool) pool_ids.insert(s.id);
  for (const auto& inst : instances)
    if (pool_ids.count(inst.id))
      throw Error(Errc::ConfigError, "shot pool contains evaluated instance " + inst.id);

  std::vector<PromptRecord> out(instances.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = {instances[i].id, build_prompt(instances[i], spec)};
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, instances.size()))));
  if (jobs == 1) {
    work(0, instances.size());
    return out;
  }
  std::vector<std::exception_ptr> errors(jobs);
  {
    std::vector<std::jthread> workers;
    const std::size_t chunk = (instances.size() + jobs - 1) / jobs;
    for (unsigned w = 0; w < jobs; ++w)
      workers.emplace_back([&, w] {
        try {
          work(std::min(instances.size(), w * chunk), std::min(instances.size(), (w + 1) * chunk));
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::string normalize_answer(std::string_view text) {
  std::string s = casefold(text);
  while (!s.empty() && is_terminal_punct(s.back())) s.pop_back();
  return collapse_whitespace(s);
}

std::string final_answer_segment(std::string_view raw) {
  std::string_view last_nonempty;
  std::optional<std::string_view> marked;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    const std::size_t nl = std::min(raw.find('\n', pos), raw.size());
    const std::string_view line = trim(raw.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) continue;
    last_nonempty = line;
    if (starts_with_marker(line)) marked = trim(line.substr(kAnswerMarker.size()));
  }
  return std::string(marked ? *marked : last_nonempty);
}

LlmOutcome parse_response(std::string_view raw, const AnswerSet& answers, std::string id) {
  LlmOutcome outcome{std::move(id), std::string(raw), std::nullopt};
  const std::string answer = normalize_answer(final_answer_segment(raw));
  if (answer.empty()) return outcome;
  for (std::size_t i = 0; i < answers.options.size(); ++i) {
    if (normalize_answer(answers.options[i].text) == answer) {
      outcome.index = i;
      break;
    }
  }
  return outcome;
}

EvalReport score_llm_run(const std::vector<LlmOutcome>& outcomes, const std::vector<Instance>& instances) {
  if (outcomes.size() != instances.size())
    throw Error(Errc::IdMismatch, std::to_string(outcomes.size()) + " outcomes for " +
                                      std::to_string(instances.size()) + " instances");
  std::unordered_map<std::string, const LlmOutcome*> by_id;
  for (const auto& o : outcomes)
    if (!by_id.emplace(o.id, &o).second) throw Error(Errc::IdMismatch, "duplicate outcome id " + o.id);

  std::vector<std::optional<ErrorLabel>> predicted;
  predicted.reserve(instances.size());
  for (const auto& inst : instances) {
    const auto it = by_id.find(inst.id);
    if (it == by_id.end()) throw Error(Errc::IdMismatch, "no outcome for instance " + inst.id);
    const LlmOutcome& o = *it->second;
    if (o.index && *o.index >= kNumLabels) throw Error(Errc::IdMismatch, "outcome index out of range for " + o.id);
    predicted.push_back(o.index ? std::optional(inst.answers.options[*o.index].label) : std::nullopt);
  }
  EvalReport r = f1_report(predicted);
  r.model = "llm";
  if (!instances.empty()) {
    r.structure = std::string(to_string(instances.front().structure));
    r.data_type = std::string(to_string(instances.front().data_type));
  }
  return r;
}

void write_prompts_jsonl(const std::filesystem::path& path, const std::vector<PromptRecord>& prompts) {
  write_records(path, prompts, [](const PromptRecord& p) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["prompt"] = p.prompt;
    j["gen_params"] = {{"temperature", kLlmTemperature}, {"max_tokens", kLlmMaxTokens}};
    return j;
  });
}

std::vector<PromptRecord> read_prompts_jsonl(const std::filesystem::path& path) {
  return read_records<PromptRecord>(path, [](const json& j) {
    return PromptRecord{j.at("id").get<std::string>(), j.at("prompt").get<std::string>()};
  });
}

void write_responses_jsonl(const std::filesystem::path& path, const std::vector<ResponseRecord>& responses) {
  write_records(path, responses, [](const ResponseRecord& r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["response"] = r.response;
    return j;
  });
}

std::vector<ResponseRecord> read_responses_jsonl(const std::filesystem::path& path) {
  auto records = read_records<ResponseRecord>(path, [](const json& j) {
    return ResponseRecord{j.at("id").get<std::string>(), j.at("response").get<std::string>()};
  });
  std::set<std::string> seen;
  for (const auto& r : records)
    if (!seen.insert(r.id).second) throw Error(Errc::IdMismatch, "duplicate response id " + r.id);
  return records;
}

std::vector<LlmOutcome> resolve_responses(const std::vector<ResponseRecord>& responses,
                                          const std::vector<Instance>& instances) {
  std::unordered_map<std::string, const Instance*> by_id;
  for (const auto& inst : instances) by_id.emplace(inst.id, &inst);
  std::vector<LlmOutcome> out;
  out.reserve(responses.size());
  for (const auto& r : responses) {
    const auto it = by_id.find(r.id);
    if (it == by_id.end()) throw Error(Errc::IdMismatch, "response for unknown instance " + r.id);
    out.push_back(parse_response(r.response, it->second->answers, r.id));
  }
  return out;
}

}  // namespace blm
