#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <vector>

#include "blm/error.hpp"
#include "blm/generate.hpp"
#include "blm/lexicon.hpp"
#include "blm/rng.hpp"
#include "blm/train.hpp"

using namespace blm;

namespace {

EvalReport report(const std::string& model, double f1, std::size_t size = 100, const std::string& s = "base") {
  EvalReport r;
  r.model = model;
  r.micro_f1 = f1;
  r.train_size = size;
  r.structure = s;
  return r;
}

std::vector<std::optional<ErrorLabel>> labels(std::initializer_list<std::pair<ErrorLabel, int>> spread) {
  std::vector<std::optional<ErrorLabel>> out;
  for (auto [l, k] : spread) out.insert(out.end(), static_cast<std::size_t>(k), l);
  return out;
}

std::array<std::vector<float>, kNumLabels> axis_options(std::size_t dim) {
  std::array<std::vector<float>, kNumLabels> opts;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    opts[i].assign(dim, 0.f);
    opts[i][i] = 1.f;
  }
  return opts;
}

TrainConfig small_config() {
  TrainConfig c;
  c.dim = 16;
  c.epochs = 4;
  c.runs = 2;
  return c;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("config defaults and validation") {
    TrainConfig c;
    CHECK(c.epochs == 120);
    CHECK(c.lr == 0.001);
    CHECK(c.batch_size == 100);
    CHECK(c.patience == 10);
    CHECK(c.runs == 3);
    CHECK(c.base_seed == 42);
    CHECK(c.run_seed(0) == 42);
    CHECK(c.run_seed(2) == 44);
    CHECK_NOTHROW(c.validate());
    c.runs = 0;
    CHECK_THROWS_AS(c.validate(), Error);
  }

  TEST_CASE("early stopping on a flat loss stops at epoch 11") {
    EarlyStopping es(10);
    int epoch = 0;
    while (!es.should_stop()) {
      ++epoch;
      es.update(0.5);
    }
    CHECK(epoch == 11);
    CHECK(es.best_epoch() == 1);
  }

  TEST_CASE("early stopping tracks the best epoch") {
    EarlyStopping es(2);
    CHECK(es.update(3.0));
    CHECK(es.update(2.0));
    CHECK_FALSE(es.update(2.0));
    CHECK_FALSE(es.should_stop());
    CHECK_FALSE(es.update(2.5));
    CHECK(es.should_stop());
    CHECK(es.best_epoch() == 2);
    CHECK(es.best() == 2.0);
  }

  TEST_CASE("choose_option picks the aligned option and breaks ties low") {
    const auto opts = axis_options(8);
    std::vector<float> pred(8, 0.f);
    pred[4] = 2.f;
    CHECK(choose_option(pred, opts).chosen == 4);

    std::array<std::vector<float>, kNumLabels> same;
    same.fill({1.f, 1.f, 0.f});
    CHECK(choose_option(std::vector<float>{0.3f, 0.1f, 5.f}, same).chosen == 0);
  }

  TEST_CASE("choose_option agrees with a brute-force scan and ignores scale") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
      std::array<std::vector<float>, kNumLabels> opts;
      for (auto& o : opts) {
        o.resize(10);
        for (auto& x : o) x = static_cast<float>(rng.normal());
      }
      std::vector<float> pred(10);
      for (auto& x : pred) x = static_cast<float>(rng.normal());
      std::size_t best = 0;
      double best_cos = -2;
      for (std::size_t i = 0; i < kNumLabels; ++i) {
        double ab = 0, aa = 0, bb = 0;
        for (std::size_t d = 0; d < 10; ++d) {
          ab += double(opts[i][d]) * pred[d];
          aa += double(opts[i][d]) * opts[i][d];
          bb += double(pred[d]) * pred[d];
        }
        const double c = ab / std::sqrt(aa * bb);
        if (c > best_cos) {
          best_cos = c;
          best = i;
        }
      }
      CHECK(choose_option(pred, opts).chosen == best);
      auto scaled = pred;
      for (auto& x : scaled) x *= 37.f;
      CHECK(choose_option(scaled, opts).chosen == best);
    }
  }

  TEST_CASE("f1 on hand-computed spreads") {
    const auto all = labels({{ErrorLabel::Correct, 20}});
    CHECK(f1_report(all).micro_f1 == 1.0);
    CHECK(f1_report(all).macro_f1 == 1.0);

    const auto none = labels({{ErrorLabel::RR, 10}, {ErrorLabel::PSCRS, 10}});
    CHECK(f1_report(none).micro_f1 == 0.0);
    CHECK(f1_report(none).macro_f1 == 0.0);

    // 55 Correct, 45 over three distractors.
    const auto mixed = labels({{ErrorLabel::Correct, 55}, {ErrorLabel::RR, 20}, {ErrorLabel::SCRR, 15},
                               {ErrorLabel::PCRR, 10}});
    const EvalReport r = f1_report(mixed);
    CHECK(r.n == 100);
    CHECK(r.micro_f1 == 0.55);
    CHECK(r.counts[label_index(ErrorLabel::Correct)] == 55);
    CHECK(r.counts[label_index(ErrorLabel::RR)] == 20);
    CHECK(r.counts[label_index(ErrorLabel::SCRR)] == 15);
    CHECK(r.counts[label_index(ErrorLabel::PCRR)] == 10);
    CHECK(r.counts[label_index(ErrorLabel::SCRS)] == 0);
    // Correct: P = 1, R = 0.55, F1 = 1.1 / 1.55; three distractors at 0.
    CHECK(r.macro_f1 == doctest::Approx((1.1 / 1.55) / 4.0).epsilon(1e-15));
    std::size_t total = 0;
    for (auto c : r.counts) total += c;
    CHECK(total == r.n);

    std::vector<std::optional<ErrorLabel>> with_err = {ErrorLabel::Correct, std::nullopt};
    const EvalReport e = f1_report(with_err);
    CHECK(e.err_rate == 0.5);
    CHECK(e.counts[kErrSlot] == 1);

    CHECK_THROWS_AS(f1_report({}), Error);
  }

  TEST_CASE("generalization gap arithmetic") {
    const std::vector<EvalReport> seen = {report("cnn", 0.9)}, unseen = {report("cnn", 0.7)};
    CHECK(generalization_gap(seen, seen, {"cnn"}, 100, "base") == 0.0);
    CHECK(generalization_gap(seen, unseen, {"cnn"}, 100, "base") == doctest::Approx(0.2).epsilon(1e-15));

    const std::vector<EvalReport> s2 = {report("cnn", 0.9), report("ffnn", 0.8)};
    const std::vector<EvalReport> u2 = {report("cnn", 0.7), report("ffnn", 0.8)};
    CHECK(generalization_gap(s2, u2, {"cnn", "ffnn"}, 100, "base") == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(generalization_gap(u2, s2, {"cnn", "ffnn"}, 100, "base") < 0.0);

    // Per-model F1 is the run mean.
    const std::vector<EvalReport> runs = {report("cnn", 0.8), report("cnn", 1.0)};
    CHECK(generalization_gap(runs, unseen, {"cnn"}, 100, "base") == doctest::Approx(0.2).epsilon(1e-15));

    CHECK_THROWS_AS(generalization_gap(seen, unseen, {"ffnn"}, 100, "base"), Error);
    CHECK_THROWS_AS(generalization_gap(seen, unseen, {"cnn"}, 10, "base"), Error);
  }

  TEST_CASE("sample standard deviation") {
    const std::vector<double> one = {0.4};
    CHECK(sample_stddev(one) == 0.0);
    const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
    CHECK(sample_stddev(v) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  }

  TEST_CASE("nested subsamples are prefixes") {
    const auto order = nested_sample_order(2400, 42);
    CHECK(order == nested_sample_order(2400, 42));
    std::vector<std::size_t> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) REQUIRE(sorted[i] == i);
    const std::set<std::size_t> s10(order.begin(), order.begin() + 10), s100(order.begin(), order.begin() + 100);
    CHECK(std::includes(s100.begin(), s100.end(), s10.begin(), s10.end()));
  }

  TEST_CASE("synthetic task: loss falls over the first epochs and reruns are identical") {
    const auto task = make_separable_task(200, 768, 1);
    const std::span<const Instance> all(task.instances);
    TrainConfig c;
    c.epochs = 5;
    const auto a = train(c, c.run_seed(0), all.subspan(0, 100), all.subspan(100, 100), task.table);
    REQUIRE(a.history.size() == 5);
    for (std::size_t e = 1; e < 5; ++e) CHECK(a.history[e].train_loss < a.history[e - 1].train_loss);
    const auto b = train(c, c.run_seed(0), all.subspan(0, 100), all.subspan(100, 100), task.table);
    for (std::size_t i = 0; i < a.model->params().blobs.size(); ++i)
      CHECK(a.model->params().blobs[i].data == b.model->params().blobs[i].data);
    for (std::size_t e = 0; e < 5; ++e) CHECK(a.history[e].val_loss == b.history[e].val_loss);
  }

  TEST_CASE("best epoch parameters are restored") {
    const auto task = make_separable_task(60, 16, 3);
    const std::span<const Instance> all(task.instances);
    TrainConfig c = small_config();
    c.epochs = 30;
    c.batch_size = 10;
    const auto r = train(c, 5, all.subspan(0, 40), all.subspan(40, 20), task.table);
    double best = r.history.front().val_loss;
    for (const auto& h : r.history) best = std::min(best, h.val_loss);
    CHECK(r.best_val_loss == best);
    const auto val = prepare_all(all.subspan(40, 20), task.table);
    CHECK(mean_loss(*r.model, val) == doctest::Approx(best).epsilon(1e-12));
  }

  TEST_CASE("train rejects empty and mis-sized inputs") {
    const auto task = make_separable_task(10, 16, 3);
    const std::span<const Instance> all(task.instances);
    TrainConfig c = small_config();
    CHECK_THROWS_AS(train(c, 1, all.subspan(0, 0), all, task.table), Error);
    c.dim = 32;
    CHECK_THROWS_AS(train(c, 1, all, all, task.table), Error);
  }

  TEST_CASE("sweep shape, nesting and aggregation") {
    const auto task = make_separable_task(80, 16, 4);
    SweepData data;
    data.train_pool.assign(task.instances.begin(), task.instances.begin() + 50);
    data.val.assign(task.instances.begin() + 50, task.instances.begin() + 60);
    data.test.assign(task.instances.begin() + 60, task.instances.begin() + 70);
    data.unseen_test.assign(task.instances.begin() + 70, task.instances.end());
    SweepSpec spec;
    spec.sizes = {10, 40};
    spec.structures = {Structure::Base};
    spec.config = small_config();
    spec.config.runs = 3;
    const SweepResult res = sweep(spec, data, task.table);
    REQUIRE(res.cells.size() == 2);
    std::size_t runs = 0;
    for (const auto& cell : res.cells) {
      runs += cell.runs.size();
      std::vector<double> micro;
      for (const auto& r : cell.runs) micro.push_back(r.micro_f1);
      double mean = 0;
      for (double m : micro) mean += m;
      mean /= 3.0;
      CHECK(cell.mean_micro_f1 == doctest::Approx(mean).epsilon(1e-15));
      CHECK(cell.std_micro_f1 == doctest::Approx(sample_stddev(micro)).epsilon(1e-15));
      CHECK(cell.std_micro_f1 >= 0.0);
      REQUIRE(cell.gen_gap.has_value());
      CHECK(cell.runs[1].seed == 43);
      CHECK(cell.runs[0].train_size == cell.size);
    }
    CHECK(runs == 6);

    spec.jobs = 4;
    const SweepResult par = sweep(spec, data, task.table);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t r = 0; r < 3; ++r) CHECK(par.cells[c].runs[r].micro_f1 == res.cells[c].runs[r].micro_f1);

    spec.sizes = {60};
    CHECK_THROWS_AS(sweep(spec, data, task.table), Error);
  }

  TEST_CASE("csv rows carry the label histogram") {
    const auto r = f1_report(labels({{ErrorLabel::Correct, 3}, {ErrorLabel::RR, 1}}));
    const std::string header = report_csv_header();
    const std::string row = to_csv_row(r);
    CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
    CHECK(header.find("count_ERR") != std::string::npos);
  }
}
