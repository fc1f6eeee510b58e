// Acceptance run: one PASS/FAIL line per criterion.
//
//   blm_acceptance [--only NAME]... [--expect-fail NAME]...
//
// Exits 1 when a criterion fails that was not named with --expect-fail.
// Expected failures still print FAIL; an expected failure that passes is
// reported but does not change the exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <string>
#include <vector>

#include "blm/ablate.hpp"
#include "blm/cli.hpp"
#include "blm/generate.hpp"
#include "blm/lexicon.hpp"
#include "blm/llm.hpp"
#include "blm/manifest.hpp"
#include "blm/nn.hpp"
#include "blm/rng.hpp"
#include "blm/train.hpp"
#include "support.hpp"

using namespace blm;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string summary;
  std::vector<std::string> details;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------- taxonomy

Verdict taxonomy() {
  const auto t0 = Clock::now();
  const Lexicon& lex = Lexicon::builtin();
  std::size_t total = 0, bad = 0;
  Verdict v;
  for (auto [p, t, seed] : {std::tuple{Phenomenon::RollClass, DataType::TypeI, 42u},
                            std::tuple{Phenomenon::BakeClass, DataType::TypeII, 7u}}) {
    const auto data = generate_dataset(lex, p, t, 1000, seed);
    for (const auto& inst : data) {
      ++total;
      const auto check = check_taxonomy(inst, lex);
      // check_taxonomy covers distinct labels, the single Correct and P/S/R
      // consistency; restate the first two directly.
      std::set<ErrorLabel> labels;
      std::size_t correct = 0;
      for (const auto& o : inst.answers.options) {
        labels.insert(o.label);
        correct += o.label == ErrorLabel::Correct ? 1 : 0;
      }
      const bool ok = check.ok && labels.size() == kNumLabels && correct == 1 &&
                      inst.answers.options[inst.answers.correct_index].label == ErrorLabel::Correct;
      if (!ok) {
        if (bad < 3)
          for (const auto& m : check.problems) v.details.push_back(m);
        ++bad;
      }
    }
  }
  const double secs = seconds_since(t0);
  v.pass = bad == 0 && total == 2000 && secs < 30.0;
  v.summary = std::to_string(total) + " answer sets, " + std::to_string(bad) + " violations, " +
              fmt("%.2f", secs) + " s (limit 30 s)";
  return v;
}

// ---------------------------------------------------------------- ablation

Verdict ablation() {
  const auto base = generate_dataset(Lexicon::builtin(), Phenomenon::RollClass, DataType::TypeI, 200, 42);
  std::size_t violations = 0;
  Verdict v;
  auto note = [&](const std::string& what, const Instance& inst) {
    if (violations++ < 5) v.details.push_back(inst.id + ": " + what);
  };
  auto unmasked_slots = [](const Instance& inst) {
    std::vector<std::size_t> out;
    const auto ctx = flatten(inst.context);
    for (std::size_t i = 0; i < ctx.size(); ++i)
      if (!ctx[i].masked()) out.push_back(i + 1);
    return out;
  };
  // Expected masks, written out as grids over the Base layout.
  const std::uint8_t t_af[2][4] = {{0, 0, 0, 0}, {1, 1, 1, 0}};
  const std::uint8_t t_scf[2][4] = {{1, 0, 0, 1}, {1, 0, 0, 0}};
  auto matches_grid = [](const Instance& orig, const Instance& ablated, const std::uint8_t (&g)[2][4]) {
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 4; ++c) {
        const Cell& a = orig.context.at(r, c);
        const Cell& b = ablated.context.at(r, c);
        if (a.is_blank()) {
          if (!(b == a)) return false;
          continue;
        }
        if (b.role != a.role) return false;
        if (g[r][c] == 1 ? b.text != a.text : (b.text.has_value() || !b.masked)) return false;
      }
    return true;
  };

  for (const auto& inst : base) {
    const Instance na = apply_structure(inst, Structure::NoAnalogy, 42);
    if (unmasked_slots(na) != std::vector<std::size_t>{5, 6, 7}) note("NoAnalogy slots", inst);
    if (!matches_grid(inst, na, t_af)) note("NoAnalogy grid", inst);

    const Instance sc = apply_structure(inst, Structure::NoSoftCue, 42);
    if (unmasked_slots(sc) != std::vector<std::size_t>{1, 4, 5}) note("NoSoftCue slots", inst);
    if (!matches_grid(inst, sc, t_scf)) note("NoSoftCue grid", inst);

    const Instance tr = apply_structure(inst, Structure::Transposed, 42);
    if (transpose(tr.context) != inst.context) note("Transposed twice", inst);

    const Instance sh = apply_structure(inst, Structure::Shuffled, 42);
    std::multiset<std::string> a, b;
    for (const auto& c : inst.context.cells())
      if (c.text) a.insert(*c.text);
    for (const auto& c : sh.context.cells())
      if (c.text) b.insert(*c.text);
    if (a != b || !sh.context.at(1, 3).is_blank()) note("Shuffled multiset", inst);

    for (const Instance* out : {&na, &sc, &tr, &sh})
      if (out->answers != inst.answers) note("answer set touched", inst);
  }
  v.pass = violations == 0;
  v.summary = "200 instances x 4 conditions, " + std::to_string(violations) + " violations";
  return v;
}

// ---------------------------------------------------------------- numerics

Verdict numerical_core() {
  const auto t0 = Clock::now();
  Verdict v;
  const std::size_t dim = 32;
  Rng rng(mix_seed(42, std::string_view("acceptance-numerics")));
  auto gaussian = [&](std::size_t n) {
    std::vector<double> x(n);
    for (auto& e : x) e = rng.normal();
    return x;
  };
  const auto correct = gaussian(dim);
  std::vector<std::vector<double>> negs;
  for (int i = 0; i < 6; ++i) negs.push_back(gaussian(dim));

  bool grads_ok = true;
  for (ModelKind kind : {ModelKind::Cnn, ModelKind::Ffnn}) {
    auto net = make_network<double>(kind, dim, 42);
    const auto input = gaussian(net->input_size());
    const auto g = grad_check(*net, input, correct, negs, 1e-4, 200, 1e-5, 42);
    grads_ok = grads_ok && g.passed && g.max_rel_error < 1e-4 && g.checked >= 200;
    v.details.push_back("gradcheck " + std::string(to_string(kind)) + ": max rel err " +
                        fmt("%.3g", g.max_rel_error) + " over " + std::to_string(g.checked) + " entries");
  }
  const auto pred = gaussian(dim);
  const auto gl = grad_check_loss(pred, correct, negs, 1e-4, 1e-5);
  grads_ok = grads_ok && gl.passed && gl.max_rel_error < 1e-4;
  v.details.push_back("gradcheck margin_loss: max rel err " + fmt("%.3g", gl.max_rel_error));

  const std::size_t count = cnn_param_count(768);
  const std::size_t instantiated = CnnNetwork<float>(768).params().count();
  const bool count_ok = count == 586110 && instantiated == 586110;
  v.details.push_back("CNN parameters at dim 768: " + std::to_string(instantiated) + " (required 586110; " +
                      "3*(9+1) + 762*768 + 768 = " + std::to_string(3 * (9 + 1) + 762 * 768 + 768) + ")");

  double worst = 0.0;
  auto loss = [&](const std::vector<double>& p, const std::vector<double>& c, const std::vector<std::vector<double>>& n) {
    std::vector<double> grad(p.size());
    std::vector<std::span<const double>> spans(n.begin(), n.end());
    return margin_loss<double>(p, c, spans, grad);
  };
  const double ref = loss(pred, correct, negs);
  for (double alpha : {1e-6, 1e-3, 0.25, 2.0, 1e3, 1e6}) {
    auto scaled = [alpha](std::vector<double> x) {
      for (auto& e : x) e *= alpha;
      return x;
    };
    worst = std::max(worst, std::abs(loss(scaled(pred), correct, negs) - ref));
    worst = std::max(worst, std::abs(loss(pred, scaled(correct), negs) - ref));
    for (std::size_t k = 0; k < negs.size(); ++k) {
      auto n2 = negs;
      n2[k] = scaled(n2[k]);
      worst = std::max(worst, std::abs(loss(pred, correct, n2) - ref));
    }
  }
  const bool scale_ok = worst <= 1e-9;
  v.details.push_back("scale invariance: max |delta loss| " + fmt("%.3g", worst));

  const double secs = seconds_since(t0);
  v.pass = grads_ok && count_ok && scale_ok && secs < 60.0;
  v.summary = std::string("gradchecks ") + (grads_ok ? "ok" : "FAIL") + ", param count " +
              std::to_string(instantiated) + (count_ok ? " ok" : " != 586110") + ", scale invariance " +
              (scale_ok ? "ok" : "FAIL") + ", " + fmt("%.2f", secs) + " s (limit 60 s)";
  return v;
}

// ---------------------------------------------------------------- synthetic

Verdict synthetic_separability() {
  const auto t0 = Clock::now();
  const auto task = make_separable_task(500, 768, 42);
  SweepData data;
  data.train_pool.assign(task.instances.begin(), task.instances.begin() + 100);
  data.val.assign(task.instances.begin() + 100, task.instances.begin() + 200);
  data.test.assign(task.instances.begin() + 200, task.instances.end());

  SweepSpec spec;
  spec.sizes = {100};
  spec.structures = {Structure::Base, Structure::Shuffled};
  spec.config = TrainConfig{};
  spec.config.dim = 768;
  spec.jobs = 1;
  const SweepResult res = sweep(spec, data, task.table);
  const SweepCell& base = res.cells.at(0);
  const SweepCell& shuf = res.cells.at(1);

  Verdict v;
  for (const auto* cell : {&base, &shuf}) {
    std::string line = std::string(to_string(cell->structure)) + " runs:";
    for (const auto& r : cell->runs) line += " " + fmt("%.3f", r.micro_f1);
    line += "  mean " + fmt("%.3f", cell->mean_micro_f1) + " +/- " + fmt("%.3f", cell->std_micro_f1);
    v.details.push_back(line);
  }
  const double secs = seconds_since(t0);
  const bool reaches = base.mean_micro_f1 >= 0.95;
  const bool ordered = base.mean_micro_f1 >= shuf.mean_micro_f1;
  v.pass = reaches && ordered && secs < 180.0;
  v.summary = "Base mean micro-F1 " + fmt("%.3f", base.mean_micro_f1) + (reaches ? " >= 0.95" : " < 0.95") +
              ", Shuffled " + fmt("%.3f", shuf.mean_micro_f1) + (ordered ? " (Base >= Shuffled)" : " (Base < Shuffled)") +
              ", " + fmt("%.1f", secs) + " s (limit 180 s)";
  return v;
}

// ---------------------------------------------------------------- determinism

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  if (code != kExitOk) std::cerr << "  blm " << args.front() << " failed: " << err.str();
  return code;
}

Verdict determinism() {
  testing::TempDir dir("acceptance");
  Verdict v;
  bool ok = true;
  auto same = [&](const std::string& what, const std::string& a, const std::string& b) {
    const bool eq = fs::exists(a) && fs::exists(b) && testing::slurp(a) == testing::slurp(b);
    v.details.push_back(what + (eq ? ": identical" : ": DIFFERENT"));
    ok = ok && eq;
  };
  auto replay = [&](const std::string& subcommand, const std::string& first, std::vector<std::string> extra) {
    std::vector<std::string> args = {subcommand, "--config", manifest_path_for(first).string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return cli(args);
  };
  auto sub = [&](const std::string& cmd, std::vector<std::string> args) {
    const auto parts = [&] {
      std::vector<std::string> p;
      std::istringstream ss(cmd);
      for (std::string w; ss >> w;) p.push_back(w);
      return p;
    }();
    args.insert(args.begin(), parts.begin(), parts.end());
    return cli(args);
  };

  // generate
  const std::string g1 = dir / "gen1.jsonl", g2 = dir / "gen2.jsonl", g3 = dir / "gen3.jsonl";
  const std::vector<std::string> gen = {"--phenomenon", "roll", "--type", "I", "--count", "300", "--seed", "42"};
  auto with_out = [](std::vector<std::string> a, const std::string& out) {
    a.push_back("--out");
    a.push_back(out);
    return a;
  };
  ok = ok && sub("generate", with_out(gen, g1)) == 0 && sub("generate", with_out(gen, g2)) == 0 &&
       replay("generate", g1, {"--out", g3}) == 0;
  same("generate rerun", g1, g2);
  same("generate manifest replay", g1, g3);

  // ablate
  const std::string a1 = dir / "abl1.jsonl", a2 = dir / "abl2.jsonl", a3 = dir / "abl3.jsonl";
  const std::vector<std::string> abl = {"--structure", "shuffled", "--seed", "5", "--in", g1};
  ok = ok && sub("ablate", with_out(abl, a1)) == 0 && sub("ablate", with_out(abl, a2)) == 0 &&
       replay("ablate", a1, {"--out", a3}) == 0;
  same("ablate rerun", a1, a2);
  same("ablate manifest replay", a1, a3);

  // shared inputs for train and sweep
  ok = ok && sub("split", {"--in", g1, "--out-dir", dir / "split", "--seed", "42"}) == 0;
  const std::string tr = dir / "split/train.jsonl", va = dir / "split/val.jsonl", te = dir / "split/test.jsonl";
  const std::string cache = dir / "cache.blme";
  ok = ok && sub("embed pseudo", {"--in", g1, "--out", cache, "--dim", "64", "--seed", "42"}) == 0;

  // train
  const std::string m1 = dir / "m1.blmp", m2 = dir / "m2.blmp", m3 = dir / "m3.blmp";
  const std::vector<std::string> trn = {"--train", tr, "--val", va, "--embeddings", cache, "--epochs", "8",
                                        "--batch-size", "32", "--seed", "43"};
  ok = ok && sub("train", with_out(trn, m1)) == 0 && sub("train", with_out(trn, m2)) == 0 &&
       replay("train", m1, {"--out", m3, "--history", m3 + ".history.csv"}) == 0;
  same("train checkpoint rerun", m1, m2);
  same("train checkpoint manifest replay", m1, m3);
  same("train history rerun", m1 + ".history.csv", m2 + ".history.csv");
  same("train history manifest replay", m1 + ".history.csv", m3 + ".history.csv");

  // sweep, serial and parallel
  const std::string s1 = dir / "s1.csv", s2 = dir / "s2.csv", s3 = dir / "s3.csv";
  const std::vector<std::string> swp = {"--train", tr, "--val", va, "--test", te, "--embeddings", cache,
                                        "--sizes", "20", "60", "--structures", "base", "shuffled", "nosoftcue",
                                        "--runs", "2", "--epochs", "4", "--batch-size", "20"};
  auto swp_jobs = with_out(swp, s2);
  swp_jobs.insert(swp_jobs.end(), {"--jobs", "4"});
  ok = ok && sub("sweep", with_out(swp, s1)) == 0 && sub("sweep", swp_jobs) == 0 &&
       replay("sweep", s1, {"--out", s3}) == 0;
  same("sweep rerun (jobs 1 vs 4)", s1, s2);
  same("sweep manifest replay", s1, s3);
  same("sweep summary manifest replay", dir / "s1.json", dir / "s3.json");

  // Manifests themselves are stable when nothing but the run differs.
  const std::string g4 = dir / "gen4";
  fs::create_directories(g4);
  ok = ok && sub("generate", with_out(gen, g4 + "/gen1.jsonl")) == 0;
  const std::string rerun_manifest = manifest_path_for(g4 + "/gen1.jsonl").string();
  nlohmann::json m_first = nlohmann::json::parse(testing::slurp(manifest_path_for(g1)));
  nlohmann::json m_again = nlohmann::json::parse(testing::slurp(rerun_manifest));
  m_first.erase("outputs");
  m_again.erase("outputs");
  m_first["config"].erase("out");
  m_again["config"].erase("out");
  const bool manifests_equal = m_first == m_again;
  v.details.push_back(std::string("generate manifest (paths aside): ") + (manifests_equal ? "identical" : "DIFFERENT"));
  ok = ok && manifests_equal;

  v.pass = ok;
  v.summary = ok ? "generate, ablate, train, sweep reruns and manifest replays byte-identical"
                 : "some outputs differ or a command failed";
  return v;
}

// ---------------------------------------------------------------- arithmetic

Verdict gengap_f1() {
  Verdict v;
  auto rep = [](const std::string& m, double f1) {
    EvalReport r;
    r.model = m;
    r.micro_f1 = f1;
    r.train_size = 100;
    r.structure = "base";
    return r;
  };
  const std::vector<EvalReport> seen = {rep("cnn", 0.9)}, unseen = {rep("cnn", 0.7)};
  const double identical = generalization_gap(seen, seen, {"cnn"}, 100, "base");
  const double gap = generalization_gap(seen, unseen, {"cnn"}, 100, "base");
  const std::vector<EvalReport> s2 = {rep("cnn", 0.9), rep("ffnn", 0.8)}, u2 = {rep("cnn", 0.7), rep("ffnn", 0.8)};
  const double gap2 = generalization_gap(s2, u2, {"cnn", "ffnn"}, 100, "base");

  // Hand values: 0, 0.9 - 0.7, ((0.9 - 0.7) + (0.8 - 0.8)) / 2, all in double arithmetic.
  const bool gaps_ok = identical == 0.0 && gap == 0.9 - 0.7 && gap2 == ((0.9 - 0.7) + (0.8 - 0.8)) / 2.0;
  v.details.push_back("gen gap: identical " + fmt("%.17g", identical) + ", 0.9/0.7 " + fmt("%.17g", gap) +
                      ", two models " + fmt("%.17g", gap2));

  std::vector<std::optional<ErrorLabel>> all(20, ErrorLabel::Correct), none(20, ErrorLabel::RR), mixed;
  mixed.insert(mixed.end(), 55, ErrorLabel::Correct);
  mixed.insert(mixed.end(), 20, ErrorLabel::RR);
  mixed.insert(mixed.end(), 15, ErrorLabel::SCRS);
  mixed.insert(mixed.end(), 10, ErrorLabel::PSCRR);
  const auto ra = f1_report(all), rn = f1_report(none), rm = f1_report(mixed);
  const bool hist_ok = rm.counts[label_index(ErrorLabel::Correct)] == 55 && rm.counts[label_index(ErrorLabel::RR)] == 20 &&
                       rm.counts[label_index(ErrorLabel::SCRS)] == 15 && rm.counts[label_index(ErrorLabel::PSCRR)] == 10;
  const bool f1_ok = ra.micro_f1 == 1.0 && rn.micro_f1 == 0.0 && rm.micro_f1 == 55.0 / 100.0 && hist_ok;
  v.details.push_back("micro-F1: all Correct " + fmt("%.17g", ra.micro_f1) + ", none " + fmt("%.17g", rn.micro_f1) +
                      ", 55/45 " + fmt("%.17g", rm.micro_f1));
  v.pass = gaps_ok && f1_ok;
  v.summary = std::string("gen gap ") + (gaps_ok ? "exact" : "MISMATCH") + ", F1 " + (f1_ok ? "exact" : "MISMATCH");
  return v;
}

// ---------------------------------------------------------------- llm

Verdict llm_roundtrip() {
  const auto data = generate_dataset(Lexicon::builtin(), Phenomenon::RollClass, DataType::TypeI, 100, 42);
  std::size_t echoes = 0, echo_hits = 0, junk = 0, junk_err = 0;
  const std::vector<std::string> non_options = {"option d", "D", "The answer is the fourth one.", "",
                                                "I cannot decide.", "Final answer: 3"};
  for (const auto& inst : data) {
    for (std::size_t i = 0; i < kNumLabels; ++i) {
      const std::string& text = inst.answers.options[i].text;
      for (const std::string& raw : {text, "Reasoning first.\n" + std::string(kAnswerMarker) + " " + text,
                                     "Provisional answer: something\n" + text + "\n"}) {
        ++echoes;
        echo_hits += parse_response(raw, inst.answers, inst.id).index == std::optional<std::size_t>(i) ? 1 : 0;
      }
    }
    for (const auto& raw : non_options) {
      ++junk;
      junk_err += parse_response(raw, inst.answers, inst.id).is_err() ? 1 : 0;
    }
  }
  Verdict v;
  v.pass = echo_hits == echoes && junk_err == junk;
  v.summary = std::to_string(echo_hits) + "/" + std::to_string(echoes) + " echoes resolved, " +
              std::to_string(junk_err) + "/" + std::to_string(junk) + " non-options flagged ERR";
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> expect_fail, only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if ((a == "--expect-fail" || a == "--only") && i + 1 < argc) {
      (a == "--only" ? only : expect_fail).insert(argv[++i]);
    } else {
      std::cerr << "usage: blm_acceptance [--only NAME]... [--expect-fail NAME]...\n";
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"taxonomy", taxonomy},
      {"ablation", ablation},
      {"numerical-core", numerical_core},
      {"synthetic-separability", synthetic_separability},
      {"determinism", determinism},
      {"gengap-f1", gengap_f1},
      {"llm-roundtrip", llm_roundtrip},
  };

  int unexpected = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v.pass = false;
      v.summary = std::string("threw: ") + e.what();
    }
    const bool expected = expect_fail.count(name) > 0;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << "  " << v.summary;
    if (!v.pass && expected) std::cout << "  [expected]";
    if (v.pass && expected) std::cout << "  [unexpected pass]";
    std::cout << '\n';
    for (const auto& d : v.details) std::cout << "     " << d << '\n';
    std::cout.flush();
    if (!v.pass && !expected) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
