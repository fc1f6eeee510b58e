#include "blm/instance.hpp"

#include <fstream>
#include <set>
#include <unordered_set>

#include "blm/error.hpp"
#include "blm/text.hpp"

namespace blm {

using nlohmann::json;
using nlohmann::ordered_json;

std::size_t ContextMatrix::count_blank() const {
  std::size_t n = 0;
  for (const auto& c : cells_) n += c.is_blank() ? 1 : 0;
  return n;
}

std::size_t ContextMatrix::count_sentences() const {
  std::size_t n = 0;
  for (const auto& c : cells_) n += c.has_text() ? 1 : 0;
  return n;
}

void AnswerSet::validate() const {
  if (correct_index >= options.size())
    throw Error(Errc::ParseError, "correct_index out of range");
  if (options[correct_index].label != ErrorLabel::Correct)
    throw Error(Errc::ParseError, "option at correct_index is not labeled Correct");
  std::set<ErrorLabel> labels;
  std::set<std::string> texts;
  for (const auto& o : options) {
    labels.insert(o.label);
    texts.insert(normalize_text(o.text));
  }
  if (labels.size() != kNumLabels) throw Error(Errc::ParseError, "answer labels are not all distinct");
  if (texts.size() != kNumLabels) throw Error(Errc::DegenerateParadigm, "answer texts are not all distinct");
}

std::vector<std::string> instance_sentences(const Instance& inst) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  auto add = [&](const std::string& s) {
    if (seen.insert(s).second) out.push_back(s);
  };
  for (const auto& c : inst.context.cells())
    if (c.text) add(*c.text);
  for (const auto& o : inst.answers.options) add(o.text);
  return out;
}

ordered_json to_json(const Instance& inst) {
  ordered_json j;
  j["id"] = inst.id;
  j["phenomenon"] = to_string(inst.phenomenon);
  j["data_type"] = to_string(inst.data_type);
  j["structure"] = to_string(inst.structure);
  ordered_json ctx = ordered_json::array();
  for (std::size_t r = 0; r < inst.context.rows(); ++r) {
    for (std::size_t c = 0; c < inst.context.cols(); ++c) {
      const Cell& cell = inst.context.at(r, c);
      ordered_json jc;
      jc["row"] = r + 1;
      jc["col"] = c + 1;
      jc["role"] = to_string(cell.role);
      jc["text"] = cell.text ? ordered_json(*cell.text) : ordered_json(nullptr);
      ctx.push_back(std::move(jc));
    }
  }
  j["context"] = std::move(ctx);
  ordered_json ans = ordered_json::array();
  for (const auto& o : inst.answers.options) {
    ordered_json jo;
    jo["text"] = o.text;
    jo["label"] = to_string(o.label);
    ans.push_back(std::move(jo));
  }
  j["answers"] = std::move(ans);
  j["correct_index"] = inst.answers.correct_index;
  j["seed"] = inst.seed;
  if (inst.lexemes) {
    ordered_json lx;
    const char* keys[2] = {"a", "b"};
    for (int i = 0; i < 2; ++i) {
      const auto& p = (*inst.lexemes)[static_cast<std::size_t>(i)];
      ordered_json jp;
      jp["agent"] = p.agent;
      jp["theme"] = p.theme;
      jp["verb"] = p.verb;
      jp["location"] = p.location;
      lx[keys[i]] = std::move(jp);
    }
    j["lexemes"] = std::move(lx);
  }
  return j;
}

Instance instance_from_json(const json& j) {
  try {
    Instance inst;
    inst.id = j.at("id").get<std::string>();
    inst.phenomenon = parse_phenomenon(j.at("phenomenon").get<std::string>());
    inst.data_type = parse_data_type(j.at("data_type").get<std::string>());
    inst.structure = parse_structure(j.at("structure").get<std::string>());
    const auto& ctx = j.at("context");
    std::size_t rows = 0, cols = 0;
    for (const auto& jc : ctx) {
      rows = std::max(rows, jc.at("row").get<std::size_t>());
      cols = std::max(cols, jc.at("col").get<std::size_t>());
    }
    if (rows * cols != ctx.size() || rows == 0)
      throw Error(Errc::ShapeError, "context cells do not form a full grid");
    inst.context = ContextMatrix(rows, cols);
    for (const auto& jc : ctx) {
      const auto r = jc.at("row").get<std::size_t>(), c = jc.at("col").get<std::size_t>();
      if (r == 0 || c == 0) throw Error(Errc::ShapeError, "context coordinates are one-based");
      Cell& cell = inst.context.at(r - 1, c - 1);
      cell.role = parse_cell_role(jc.at("role").get<std::string>());
      if (jc.contains("text") && !jc.at("text").is_null()) cell.text = jc.at("text").get<std::string>();
      cell.masked = !cell.text && !cell.is_blank();
    }
    const auto& ans = j.at("answers");
    if (ans.size() != kNumLabels) throw Error(Errc::ParseError, "answer set must have 7 options");
    for (std::size_t i = 0; i < kNumLabels; ++i) {
      inst.answers.options[i].text = ans[i].at("text").get<std::string>();
      inst.answers.options[i].label = parse_error_label(ans[i].at("label").get<std::string>());
    }
    inst.answers.correct_index = j.at("correct_index").get<std::size_t>();
    inst.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("lexemes")) {
      std::array<ParadigmLexemes, 2> lx;
      const char* keys[2] = {"a", "b"};
      for (int i = 0; i < 2; ++i) {
        const auto& jp = j.at("lexemes").at(keys[i]);
        lx[static_cast<std::size_t>(i)] = {jp.at("agent").get<std::string>(), jp.at("theme").get<std::string>(),
                                           jp.at("verb").get<std::string>(), jp.at("location").get<std::string>()};
      }
      inst.lexemes = lx;
    }
    return inst;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("instance: ") + e.what());
  }
}

std::string to_jsonl_line(const Instance& inst) { return to_json(inst).dump(); }

void write_jsonl(const std::filesystem::path& path, const std::vector<Instance>& instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  for (const auto& inst : instances) out << to_jsonl_line(inst) << '\n';
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

std::vector<Instance> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<Instance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (collapse_whitespace(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(instance_from_json(j));
  }
  return out;
}

}  // namespace blm
