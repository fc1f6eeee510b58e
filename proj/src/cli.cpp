#include "blm/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "blm/ablate.hpp"
#include "blm/embed.hpp"
#include "blm/error.hpp"
#include "blm/generate.hpp"
#include "blm/lexicon.hpp"
#include "blm/llm.hpp"
#include "blm/manifest.hpp"
#include "blm/nn.hpp"
#include "blm/rng.hpp"
#include "blm/train.hpp"

namespace blm {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// --config: a JSON object whose keys are long option names of the selected
// subcommand, or a run manifest (its "config" block is replayed). Values on
// the command line win over values from the file.
class JsonConfig final : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root) : root_(root) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(input);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::ConfigError, std::string("config is not valid JSON: ") + e.what());
    }
    const std::vector<std::string> parents = selected_path();
    std::string joined;
    for (const auto& p : parents) joined += (joined.empty() ? "" : " ") + p;

    if (doc.is_object() && doc.contains("subcommand") && doc.contains("config")) {
      if (doc["subcommand"] != joined)
        throw Error(Errc::ConfigError, "manifest was written by '" + doc["subcommand"].get<std::string>() +
                                           "', not '" + joined + "'");
      doc = doc["config"];
    }
    if (!doc.is_object()) throw Error(Errc::ConfigError, "config must be a JSON object");

    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : doc.items()) {
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(key, v));
      } else {
        item.inputs.push_back(scalar(key, value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  std::vector<std::string> selected_path() const {
    std::vector<std::string> path;
    const CLI::App* app = root_;
    while (true) {
      const auto subs = app->get_subcommands();
      if (subs.empty()) break;
      app = subs.front();
      path.push_back(app->get_name());
    }
    return path;
  }

  static std::string scalar(const std::string& key, const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw Error(Errc::ConfigError, "config value for '" + key + "' must be a scalar or a list of scalars");
  }

  const CLI::App* root_;
};

template <class F>
auto usage_parse(F&& f, const std::string& what) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(Errc::UsageError, what + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

fs::path sibling_json(const fs::path& out) {
  fs::path p = out;
  if (p.extension() == ".json") p += ".json";
  else p.replace_extension(".json");
  return p;
}

// Collects what a subcommand read and wrote, then stamps the manifest.
struct Stamp {
  RunManifest manifest;

  Stamp(std::string subcommand, ojson config) {
    manifest.tool_version = std::string(tool_version());
    manifest.subcommand = std::move(subcommand);
    manifest.config = std::move(config);
  }
  void seed(const std::string& name, std::uint64_t value) { manifest.seeds[name] = value; }
  void input(const fs::path& p) { manifest.inputs.push_back(digest_file(p)); }
  void output(const fs::path& p) { manifest.outputs.push_back(digest_file(p)); }
  fs::path write(const fs::path& beside) const {
    const fs::path path = manifest_path_for(beside);
    write_manifest(manifest, path);
    return path;
  }
};

EvalReport with_dataset_meta(EvalReport r, const std::vector<Instance>& data) {
  if (!data.empty()) {
    r.structure = std::string(to_string(data.front().structure));
    r.data_type = std::string(to_string(data.front().data_type));
  }
  return r;
}

void write_report(const fs::path& csv_path, const std::vector<EvalReport>& reports, const ojson& extra) {
  std::string csv = report_csv_header() + '\n';
  ojson arr = ojson::array();
  for (const auto& r : reports) {
    csv += to_csv_row(r) + '\n';
    arr.push_back(to_json(r));
  }
  write_text(csv_path, csv);
  ojson doc;
  doc["reports"] = arr;
  for (const auto& [k, v] : extra.items()) doc[k] = v;
  write_text(sibling_json(csv_path), doc.dump(2) + '\n');
}

EmbeddingTable read_embedding_import(const fs::path& path, Pooling pooling) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::optional<EmbeddingTable> table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    std::string text;
    std::vector<float> vec;
    try {
      const auto j = nlohmann::json::parse(line);
      text = j.at("text").get<std::string>();
      vec = j.at("vector").get<std::vector<float>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, where + ": " + e.what());
    }
    if (vec.empty()) throw Error(Errc::ParseError, where + ": empty vector");
    if (!table) table.emplace(static_cast<std::uint32_t>(vec.size()), pooling);
    if (!table->insert(text, vec)) {
      const auto existing = table->at(text);
      if (!std::equal(existing.begin(), existing.end(), vec.begin(), vec.end()))
        throw Error(Errc::ParseError, where + ": conflicting vectors for one sentence");
    }
  }
  if (!table) throw Error(Errc::EmptyDataset, path.string() + " holds no embeddings");
  return std::move(*table);
}

struct SelftestOutcome {
  bool numeric_ok = true;
  bool taxonomy_ok = true;
};

SelftestOutcome selftest(std::size_t dim, std::size_t count, std::uint64_t seed, std::ostream& out) {
  SelftestOutcome result;
  Rng rng(mix_seed(seed, std::string_view("selftest")));
  auto random_vec = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
  };
  const auto input = random_vec(kInputRows * dim);
  const auto correct = random_vec(dim);
  std::vector<std::vector<double>> negatives;
  for (std::size_t i = 0; i + 1 < kNumLabels; ++i) negatives.push_back(random_vec(dim));

  constexpr double kTol = 1e-4;
  for (ModelKind kind : {ModelKind::Cnn, ModelKind::Ffnn}) {
    auto net = make_network<double>(kind, dim, seed);
    const auto g = grad_check(*net, input, correct, negatives, kTol, 200, 1e-5, seed);
    out << "gradcheck " << to_string(kind) << " dim=" << dim << " entries=" << g.checked
        << " max_rel_err=" << g.max_rel_error << (g.passed ? " PASS" : " FAIL") << '\n';
    result.numeric_ok = result.numeric_ok && g.passed;
  }
  const auto g = grad_check_loss(random_vec(dim), correct, negatives, kTol);
  out << "gradcheck margin_loss dim=" << dim << " max_rel_err=" << g.max_rel_error << (g.passed ? " PASS" : " FAIL")
      << '\n';
  result.numeric_ok = result.numeric_ok && g.passed;

  const Lexicon& lex = Lexicon::builtin();
  for (auto [p, t] : {std::pair{Phenomenon::RollClass, DataType::TypeI}, std::pair{Phenomenon::BakeClass, DataType::TypeII}}) {
    const auto data = generate_dataset(lex, p, t, count, seed);
    std::size_t bad = 0;
    for (const auto& inst : data) {
      const auto check = check_taxonomy(inst, lex);
      if (!check.ok) {
        if (bad == 0)
          for (const auto& msg : check.problems) out << "  " << msg << '\n';
        ++bad;
      }
    }
    out << "taxonomy " << to_string(p) << ' ' << to_string(t) << " n=" << data.size() << " violations=" << bad
        << (bad == 0 ? " PASS" : " FAIL") << '\n';
    result.taxonomy_ok = result.taxonomy_ok && bad == 0;
  }
  return result;
}

int exit_code_for(const Error& e) {
  switch (error_class(e.code())) {
    case ErrorClass::Usage: return kExitUsage;
    case ErrorClass::Numeric: return kExitNumeric;
    case ErrorClass::Data: return kExitData;
  }
  return kExitData;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Linguistic-matrix dataset, ablation, training and evaluation toolkit", "blm"};
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.set_config("--config", "", "JSON file of option values, or a run manifest to replay");
  app.set_version_flag("--version", std::string(tool_version()));
  app.require_subcommand(1);
  app.fallthrough();

  // generate
  struct {
    std::string phenomenon, type, out, lexicon;
    std::size_t count = 0;
    std::uint64_t seed = 42;
    bool require_unique = false;
    unsigned jobs = 1;
  } gen;
  auto* generate = app.add_subcommand("generate", "Generate a Base dataset as JSON Lines");
  generate->add_option("--phenomenon", gen.phenomenon, "roll or bake")->required();
  generate->add_option("--type", gen.type, "I (shared verb) or II (different verbs)")->required();
  generate->add_option("--count", gen.count, "Number of instances")->required();
  generate->add_option("--seed", gen.seed, "Dataset seed")->capture_default_str();
  generate->add_option("--out", gen.out, "Output JSONL")->required();
  generate->add_option("--lexicon", gen.lexicon, "Lexicon JSON (default: built-in)");
  generate->add_flag("--require-unique", gen.require_unique, "Fail instead of repeating lexical tuples");
  generate->add_option("--jobs", gen.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  // split
  struct {
    std::string in, out_dir;
    std::vector<double> ratios{0.8, 0.1, 0.1};
    std::uint64_t seed = 42;
  } spl;
  auto* split = app.add_subcommand("split", "Split a dataset into train/val/test");
  split->add_option("--in", spl.in, "Input JSONL")->required();
  split->add_option("--ratios", spl.ratios, "train val test ratios")->expected(3)->capture_default_str();
  split->add_option("--seed", spl.seed, "Split seed")->capture_default_str();
  split->add_option("--out-dir", spl.out_dir, "Directory for train/val/test.jsonl")->required();

  // ablate
  struct {
    std::string structure, in, out;
    std::uint64_t seed = 42;
  } abl;
  auto* ablate = app.add_subcommand("ablate", "Rewrite a Base dataset under a structure condition");
  ablate->add_option("--structure", abl.structure, "base|shuffled|noanalogy|nosoftcue|transposed")->required();
  ablate->add_option("--seed", abl.seed, "Shuffle seed")->capture_default_str();
  ablate->add_option("--in", abl.in, "Base JSONL")->required();
  ablate->add_option("--out", abl.out, "Output JSONL")->required();

  // embed
  auto* embed = app.add_subcommand("embed", "Build embedding caches");
  embed->require_subcommand(1);
  struct {
    std::string in, out, pooling = "mean";
  } imp;
  auto* embed_import = embed->add_subcommand("import", "Convert {text, vector} JSON Lines into a cache");
  embed_import->add_option("--in", imp.in, "JSONL with text and vector fields")->required();
  embed_import->add_option("--out", imp.out, "Cache file")->required();
  embed_import->add_option("--pooling", imp.pooling, "first-token|mean|pseudo")->capture_default_str();
  struct {
    std::vector<std::string> in;
    std::string out;
    std::uint32_t dim = 768;
    std::uint64_t seed = 42;
  } pse;
  auto* embed_pseudo = embed->add_subcommand("pseudo", "Hash-seeded unit vectors for every sentence of the datasets");
  embed_pseudo->add_option("--in", pse.in, "Dataset JSONL files")->required();
  embed_pseudo->add_option("--out", pse.out, "Cache file")->required();
  embed_pseudo->add_option("--dim", pse.dim, "Vector width")->capture_default_str()->check(CLI::PositiveNumber);
  embed_pseudo->add_option("--seed", pse.seed, "Embedding seed")->capture_default_str();

  // train
  struct {
    std::string train, val, embeddings, out, history, model = "cnn";
    TrainConfig cfg;
    std::uint64_t seed = 42;
  } trn;
  auto* train_cmd = app.add_subcommand("train", "Train one model run");
  train_cmd->add_option("--train", trn.train, "Training JSONL")->required();
  train_cmd->add_option("--val", trn.val, "Validation JSONL")->required();
  train_cmd->add_option("--embeddings", trn.embeddings, "Embedding cache")->required();
  train_cmd->add_option("--out", trn.out, "Checkpoint path")->required();
  train_cmd->add_option("--history", trn.history, "Per-epoch CSV (default: <out>.history.csv)");
  train_cmd->add_option("--model", trn.model, "cnn|ffnn")->capture_default_str();
  train_cmd->add_option("--epochs", trn.cfg.epochs, "Maximum epochs")->capture_default_str();
  train_cmd->add_option("--lr", trn.cfg.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--batch-size", trn.cfg.batch_size, "Minibatch size")->capture_default_str();
  train_cmd->add_option("--patience", trn.cfg.patience, "Early-stopping patience")->capture_default_str();
  train_cmd->add_option("--seed", trn.seed, "Initialisation and shuffling seed")->capture_default_str();

  // eval
  struct {
    std::string checkpoint, data, embeddings, out;
    std::size_t size = 0;
    int run = 0;
  } evl;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", evl.checkpoint, "Checkpoint from train")->required();
  eval_cmd->add_option("--data", evl.data, "Dataset JSONL")->required();
  eval_cmd->add_option("--embeddings", evl.embeddings, "Embedding cache")->required();
  eval_cmd->add_option("--out", evl.out, "Report CSV (JSON written beside it)")->required();
  eval_cmd->add_option("--size", evl.size, "Training size recorded in the report");
  eval_cmd->add_option("--run", evl.run, "Run index recorded in the report");

  // sweep
  struct {
    std::string train, val, test, unseen_test, embeddings, out, model = "cnn";
    std::vector<std::size_t> sizes{10, 50, 100, 200, 500, 1000, 1200, 1500, 2000, 2700};
    std::vector<std::string> structures{"base"};
    TrainConfig cfg;
    std::uint64_t structure_seed = 42;
    unsigned jobs = 1;
  } swp;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate over sizes x structures x runs");
  sweep_cmd->add_option("--train", swp.train, "Base training pool JSONL")->required();
  sweep_cmd->add_option("--val", swp.val, "Base validation JSONL")->required();
  sweep_cmd->add_option("--test", swp.test, "Base test JSONL")->required();
  sweep_cmd->add_option("--unseen-test", swp.unseen_test, "Base test JSONL of the other data type");
  sweep_cmd->add_option("--embeddings", swp.embeddings, "Embedding cache")->required();
  sweep_cmd->add_option("--out", swp.out, "Report CSV (summary JSON written beside it)")->required();
  sweep_cmd->add_option("--sizes", swp.sizes, "Training sizes")->capture_default_str();
  sweep_cmd->add_option("--structures", swp.structures, "Structure conditions")->capture_default_str();
  sweep_cmd->add_option("--runs", swp.cfg.runs, "Runs per cell")->capture_default_str();
  sweep_cmd->add_option("--model", swp.model, "cnn|ffnn")->capture_default_str();
  sweep_cmd->add_option("--epochs", swp.cfg.epochs, "Maximum epochs")->capture_default_str();
  sweep_cmd->add_option("--lr", swp.cfg.lr, "Adam learning rate")->capture_default_str();
  sweep_cmd->add_option("--batch-size", swp.cfg.batch_size, "Minibatch size")->capture_default_str();
  sweep_cmd->add_option("--patience", swp.cfg.patience, "Early-stopping patience")->capture_default_str();
  sweep_cmd->add_option("--seed", swp.cfg.base_seed, "Base seed; run r uses seed + r")->capture_default_str();
  sweep_cmd->add_option("--structure-seed", swp.structure_seed, "Seed for Shuffled")->capture_default_str();
  sweep_cmd->add_option("--jobs", swp.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  // llm-prompts
  struct {
    std::string in, out, shot_pool;
    int shots = 0;
    bool cot = false;
    std::uint64_t seed = 42;
    unsigned jobs = 1;
  } lp;
  auto* llm_prompts = app.add_subcommand("llm-prompts", "Emit puzzle prompts as JSON Lines");
  llm_prompts->add_option("--in", lp.in, "Dataset JSONL")->required();
  llm_prompts->add_option("--out", lp.out, "Prompt JSONL")->required();
  llm_prompts->add_option("--shots", lp.shots, "0, 1 or 5")->capture_default_str();
  llm_prompts->add_flag("--cot", lp.cot, "Ask for step-by-step reasoning");
  llm_prompts->add_option("--seed", lp.seed, "Worked-example selection seed")->capture_default_str();
  llm_prompts->add_option("--shot-pool", lp.shot_pool, "Solved instances for worked examples");
  llm_prompts->add_option("--jobs", lp.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  // llm-score
  struct {
    std::string responses, dataset, out;
  } ls;
  auto* llm_score = app.add_subcommand("llm-score", "Score model responses against a dataset");
  llm_score->add_option("--responses", ls.responses, "Response JSONL {id, response}")->required();
  llm_score->add_option("--dataset", ls.dataset, "Dataset JSONL")->required();
  llm_score->add_option("--out", ls.out, "Report CSV (JSON written beside it)")->required();

  // selftest
  struct {
    std::size_t dim = 32, count = 200;
    std::uint64_t seed = 42;
  } st;
  auto* selftest_cmd = app.add_subcommand("selftest", "Gradient checks and the taxonomy property suite");
  selftest_cmd->add_option("--dim", st.dim, "Network width for gradient checks")->capture_default_str();
  selftest_cmd->add_option("--count", st.count, "Instances per taxonomy dataset")->capture_default_str();
  selftest_cmd->add_option("--seed", st.seed, "Seed")->capture_default_str();

  if (!args.empty() && !args.front().starts_with('-') && app.get_subcommand_no_throw(args.front()) == nullptr) {
    err << "blm: unknown subcommand '" << args.front() << "'\nRun with --help for usage.\n";
    return kExitUsage;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().back()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << tool_version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "blm: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "blm: " << e.what() << '\n';
    return exit_code_for(e);
  }

  try {
    if (generate->parsed()) {
      const Phenomenon p = usage_parse([&] { return parse_phenomenon(gen.phenomenon); }, "--phenomenon");
      const DataType t = usage_parse([&] { return parse_data_type(gen.type); }, "--type");
      ojson cfg;
      cfg["phenomenon"] = std::string(to_string(p));
      cfg["type"] = std::string(to_string(t));
      cfg["count"] = gen.count;
      cfg["seed"] = gen.seed;
      cfg["out"] = gen.out;
      if (!gen.lexicon.empty()) cfg["lexicon"] = gen.lexicon;
      cfg["require-unique"] = gen.require_unique;
      cfg["jobs"] = gen.jobs;
      Stamp stamp("generate", cfg);
      stamp.seed("dataset", gen.seed);

      const Lexicon lex = gen.lexicon.empty() ? Lexicon::builtin() : Lexicon::load(gen.lexicon);
      if (!gen.lexicon.empty()) stamp.input(gen.lexicon);
      GenerateOptions opts;
      opts.require_unique = gen.require_unique;
      opts.jobs = gen.jobs;
      const auto data = generate_dataset(lex, p, t, gen.count, gen.seed, opts);
      write_jsonl(gen.out, data);
      stamp.output(gen.out);
      stamp.write(gen.out);
      out << "wrote " << data.size() << " instances to " << gen.out << '\n';
      return kExitOk;
    }

    if (split->parsed()) {
      const std::array<double, 3> ratios{spl.ratios.at(0), spl.ratios.at(1), spl.ratios.at(2)};
      ojson cfg;
      cfg["in"] = spl.in;
      cfg["ratios"] = spl.ratios;
      cfg["seed"] = spl.seed;
      cfg["out-dir"] = spl.out_dir;
      Stamp stamp("split", cfg);
      stamp.seed("split", spl.seed);
      const auto data = read_jsonl(spl.in);
      stamp.input(spl.in);
      const auto parts = split_dataset(data, ratios, spl.seed);
      fs::create_directories(spl.out_dir);
      const fs::path dir(spl.out_dir);
      for (auto [name, part] : {std::pair{"train.jsonl", &parts.train}, std::pair{"val.jsonl", &parts.val},
                                std::pair{"test.jsonl", &parts.test}}) {
        write_jsonl(dir / name, *part);
        stamp.output(dir / name);
      }
      stamp.write(dir / "split");
      out << "split " << data.size() << " instances: train " << parts.train.size() << ", val " << parts.val.size()
          << ", test " << parts.test.size() << '\n';
      return kExitOk;
    }

    if (ablate->parsed()) {
      const Structure s = usage_parse([&] { return parse_structure(abl.structure); }, "--structure");
      ojson cfg;
      cfg["structure"] = std::string(to_string(s));
      cfg["seed"] = abl.seed;
      cfg["in"] = abl.in;
      cfg["out"] = abl.out;
      Stamp stamp("ablate", cfg);
      stamp.seed("structure", abl.seed);
      const auto data = read_jsonl(abl.in);
      stamp.input(abl.in);
      std::vector<Instance> outv;
      outv.reserve(data.size());
      for (const auto& inst : data) outv.push_back(apply_structure(inst, s, abl.seed));
      write_jsonl(abl.out, outv);
      stamp.output(abl.out);
      stamp.write(abl.out);
      out << "wrote " << outv.size() << ' ' << to_string(s) << " instances to " << abl.out << '\n';
      return kExitOk;
    }

    if (embed_import->parsed()) {
      const Pooling pooling = usage_parse([&] { return parse_pooling(imp.pooling); }, "--pooling");
      ojson cfg;
      cfg["in"] = imp.in;
      cfg["out"] = imp.out;
      cfg["pooling"] = std::string(to_string(pooling));
      Stamp stamp("embed import", cfg);
      const auto table = read_embedding_import(imp.in, pooling);
      stamp.input(imp.in);
      save_table(table, imp.out);
      stamp.output(imp.out);
      stamp.write(imp.out);
      out << "wrote " << table.size() << " vectors of dim " << table.dim() << " to " << imp.out << '\n';
      return kExitOk;
    }

    if (embed_pseudo->parsed()) {
      ojson cfg;
      cfg["in"] = pse.in;
      cfg["out"] = pse.out;
      cfg["dim"] = pse.dim;
      cfg["seed"] = pse.seed;
      Stamp stamp("embed pseudo", cfg);
      stamp.seed("embedding", pse.seed);
      EmbeddingTable table(pse.dim, Pooling::Pseudo);
      for (const auto& path : pse.in) {
        for (const auto& inst : read_jsonl(path))
          for (const auto& sentence : instance_sentences(inst))
            if (!table.contains(sentence)) table.insert(sentence, pseudo_embed(sentence, pse.dim, pse.seed));
        stamp.input(path);
      }
      save_table(table, pse.out);
      stamp.output(pse.out);
      stamp.write(pse.out);
      out << "wrote " << table.size() << " vectors of dim " << table.dim() << " to " << pse.out << '\n';
      return kExitOk;
    }

    if (train_cmd->parsed()) {
      trn.cfg.model = usage_parse([&] { return parse_model_kind(trn.model); }, "--model");
      const fs::path history = trn.history.empty() ? fs::path(trn.out + ".history.csv") : fs::path(trn.history);
      ojson cfg;
      cfg["train"] = trn.train;
      cfg["val"] = trn.val;
      cfg["embeddings"] = trn.embeddings;
      cfg["out"] = trn.out;
      cfg["history"] = history.generic_string();
      cfg["model"] = std::string(to_string(trn.cfg.model));
      cfg["epochs"] = trn.cfg.epochs;
      cfg["lr"] = trn.cfg.lr;
      cfg["batch-size"] = trn.cfg.batch_size;
      cfg["patience"] = trn.cfg.patience;
      cfg["seed"] = trn.seed;
      Stamp stamp("train", cfg);
      stamp.seed("run", trn.seed);

      const auto train_data = read_jsonl(trn.train);
      const auto val_data = read_jsonl(trn.val);
      const auto table = load_table(trn.embeddings);
      for (const auto& p : {trn.train, trn.val, trn.embeddings}) stamp.input(p);
      trn.cfg.dim = table.dim();
      trn.cfg.runs = 1;
      const auto result = train(trn.cfg, trn.seed, train_data, val_data, table);
      save_checkpoint(*result.model, trn.out);
      write_text(history, history_csv(result.history));
      stamp.output(trn.out);
      stamp.output(history);
      stamp.write(trn.out);
      out << "trained " << to_string(trn.cfg.model) << " for " << result.history.size() << " epochs; best epoch "
          << result.best_epoch << ", val loss " << result.best_val_loss << '\n';
      return kExitOk;
    }

    if (eval_cmd->parsed()) {
      ojson cfg;
      cfg["checkpoint"] = evl.checkpoint;
      cfg["data"] = evl.data;
      cfg["embeddings"] = evl.embeddings;
      cfg["out"] = evl.out;
      cfg["size"] = evl.size;
      cfg["run"] = evl.run;
      Stamp stamp("eval", cfg);
      const auto net = load_checkpoint(evl.checkpoint);
      const auto data = read_jsonl(evl.data);
      const auto table = load_table(evl.embeddings);
      for (const auto& p : {evl.checkpoint, evl.data, evl.embeddings}) stamp.input(p);
      if (table.dim() != net->dim())
        throw Error(Errc::DimMismatch, "checkpoint dim " + std::to_string(net->dim()) + " vs cache dim " +
                                           std::to_string(table.dim()));
      EvalReport r = with_dataset_meta(evaluate(*net, prepare_all(data, table)), data);
      r.train_size = evl.size;
      r.run = evl.run;
      write_report(evl.out, {r}, ojson::object());
      stamp.output(evl.out);
      stamp.output(sibling_json(evl.out));
      stamp.write(evl.out);
      out << "micro-F1 " << r.micro_f1 << ", macro-F1 " << r.macro_f1 << " on " << r.n << " instances\n";
      return kExitOk;
    }

    if (sweep_cmd->parsed()) {
      SweepSpec spec;
      spec.sizes = swp.sizes;
      spec.structures.clear();
      for (const auto& s : swp.structures)
        spec.structures.push_back(usage_parse([&] { return parse_structure(s); }, "--structures"));
      spec.config = swp.cfg;
      spec.config.model = usage_parse([&] { return parse_model_kind(swp.model); }, "--model");
      spec.structure_seed = swp.structure_seed;
      spec.jobs = swp.jobs;

      ojson cfg;
      cfg["train"] = swp.train;
      cfg["val"] = swp.val;
      cfg["test"] = swp.test;
      if (!swp.unseen_test.empty()) cfg["unseen-test"] = swp.unseen_test;
      cfg["embeddings"] = swp.embeddings;
      cfg["out"] = swp.out;
      cfg["sizes"] = spec.sizes;
      ojson structures = ojson::array();
      for (Structure s : spec.structures) structures.push_back(std::string(to_string(s)));
      cfg["structures"] = structures;
      cfg["runs"] = spec.config.runs;
      cfg["model"] = std::string(to_string(spec.config.model));
      cfg["epochs"] = spec.config.epochs;
      cfg["lr"] = spec.config.lr;
      cfg["batch-size"] = spec.config.batch_size;
      cfg["patience"] = spec.config.patience;
      cfg["seed"] = spec.config.base_seed;
      cfg["structure-seed"] = spec.structure_seed;
      cfg["jobs"] = spec.jobs;
      Stamp stamp("sweep", cfg);
      stamp.seed("base", spec.config.base_seed);
      stamp.seed("structure", spec.structure_seed);
      for (int r = 0; r < spec.config.runs; ++r) stamp.seed("run" + std::to_string(r), spec.config.run_seed(r));

      SweepData data;
      data.train_pool = read_jsonl(swp.train);
      data.val = read_jsonl(swp.val);
      data.test = read_jsonl(swp.test);
      if (!swp.unseen_test.empty()) data.unseen_test = read_jsonl(swp.unseen_test);
      const auto table = load_table(swp.embeddings);
      for (const auto& p : {swp.train, swp.val, swp.test}) stamp.input(p);
      if (!swp.unseen_test.empty()) stamp.input(swp.unseen_test);
      stamp.input(swp.embeddings);
      spec.config.dim = table.dim();

      const SweepResult result = sweep(spec, data, table);
      std::vector<EvalReport> reports;
      ojson cells = ojson::array();
      for (const auto& cell : result.cells) {
        reports.insert(reports.end(), cell.runs.begin(), cell.runs.end());
        reports.insert(reports.end(), cell.unseen_runs.begin(), cell.unseen_runs.end());
        ojson c;
        c["size"] = cell.size;
        c["structure"] = std::string(to_string(cell.structure));
        c["mean_micro_f1"] = cell.mean_micro_f1;
        c["std_micro_f1"] = cell.std_micro_f1;
        c["mean_macro_f1"] = cell.mean_macro_f1;
        c["gen_gap"] = cell.gen_gap ? ojson(*cell.gen_gap) : ojson(nullptr);
        cells.push_back(c);
      }
      write_report(swp.out, reports, ojson{{"cells", cells}});
      stamp.output(swp.out);
      stamp.output(sibling_json(swp.out));
      stamp.write(swp.out);
      for (const auto& cell : result.cells)
        out << to_string(cell.structure) << " size " << cell.size << ": micro-F1 " << cell.mean_micro_f1 << " +- "
            << cell.std_micro_f1 << '\n';
      return kExitOk;
    }

    if (llm_prompts->parsed()) {
      ojson cfg;
      cfg["in"] = lp.in;
      cfg["out"] = lp.out;
      cfg["shots"] = lp.shots;
      cfg["cot"] = lp.cot;
      cfg["seed"] = lp.seed;
      if (!lp.shot_pool.empty()) cfg["shot-pool"] = lp.shot_pool;
      cfg["jobs"] = lp.jobs;
      Stamp stamp("llm-prompts", cfg);
      stamp.seed("shots", lp.seed);
      PromptSpec spec;
      spec.shots = lp.shots;
      spec.cot = lp.cot;
      spec.seed = lp.seed;
      if (!lp.shot_pool.empty()) spec.shot_pool = read_jsonl(lp.shot_pool);
      spec.validate();
      const auto data = read_jsonl(lp.in);
      stamp.input(lp.in);
      if (!lp.shot_pool.empty()) stamp.input(lp.shot_pool);
      const auto prompts = build_prompts(data, spec, lp.jobs);
      write_prompts_jsonl(lp.out, prompts);
      stamp.manifest.config["template"] = std::string(kPromptTemplateVersion);
      stamp.output(lp.out);
      stamp.write(lp.out);
      out << "wrote " << prompts.size() << " prompts to " << lp.out << '\n';
      return kExitOk;
    }

    if (llm_score->parsed()) {
      ojson cfg;
      cfg["responses"] = ls.responses;
      cfg["dataset"] = ls.dataset;
      cfg["out"] = ls.out;
      Stamp stamp("llm-score", cfg);
      const auto data = read_jsonl(ls.dataset);
      const auto responses = read_responses_jsonl(ls.responses);
      stamp.input(ls.responses);
      stamp.input(ls.dataset);
      const EvalReport r = score_llm_run(resolve_responses(responses, data), data);
      write_report(ls.out, {r}, ojson::object());
      stamp.output(ls.out);
      stamp.output(sibling_json(ls.out));
      stamp.write(ls.out);
      out << "micro-F1 " << r.micro_f1 << ", ERR rate " << r.err_rate << " on " << r.n << " responses\n";
      return kExitOk;
    }

    if (selftest_cmd->parsed()) {
      const auto r = selftest(st.dim, st.count, st.seed, out);
      if (!r.numeric_ok) return kExitNumeric;
      if (!r.taxonomy_ok) return kExitData;
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "blm: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "blm: " << e.what() << '\n';
    return kExitData;
  }
  err << "blm: no subcommand\n";
  return kExitUsage;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace blm
