#include "blm/train.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "blm/ablate.hpp"
#include "blm/error.hpp"
#include "blm/rng.hpp"

namespace blm {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::span<const float>> negatives_of(const PreparedExample& ex) {
  std::vector<std::span<const float>> negs;
  negs.reserve(kNumLabels - 1);
  for (std::size_t i = 0; i < kNumLabels; ++i)
    if (i != ex.correct_index) negs.emplace_back(ex.options[i]);
  return negs;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs <= 0 || lr <= 0.0 || batch_size == 0 || patience <= 0 || runs < 1 || dim == 0)
    throw Error(Errc::ConfigError, "train config values must be positive and runs >= 1");
}

PreparedExample prepare(const Instance& inst, const EmbeddingTable& table) {
  PreparedExample ex;
  ex.id = inst.id;
  ex.input = assemble_input(table, flatten(inst.context)).data;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    const auto v = table.at(inst.answers.options[i].text);
    ex.options[i].assign(v.begin(), v.end());
    ex.labels[i] = inst.answers.options[i].label;
  }
  ex.correct_index = inst.answers.correct_index;
  return ex;
}

std::vector<PreparedExample> prepare_all(std::span<const Instance> instances, const EmbeddingTable& table) {
  std::vector<PreparedExample> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(prepare(inst, table));
  return out;
}

bool EarlyStopping::update(double loss) {
  ++epochs_;
  if (epochs_ == 1 || loss < best_) {
    best_ = loss;
    best_epoch_ = epochs_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

double mean_loss(const Network<float>& net, std::span<const PreparedExample> examples) {
  if (examples.empty()) return 0.0;
  Workspace<float> ws;
  std::vector<float> pred(net.dim()), grad(net.dim());
  double total = 0.0;
  for (const auto& ex : examples) {
    net.forward(ex.input, ws, pred);
    const auto negs = negatives_of(ex);
    total += margin_loss<float>(pred, ex.options[ex.correct_index], negs, grad);
  }
  return total / static_cast<double>(examples.size());
}

TrainResult train(const TrainConfig& config, std::uint64_t seed, std::span<const PreparedExample> train_set,
                  std::span<const PreparedExample> val_set) {
  config.validate();
  if (train_set.empty()) throw Error(Errc::EmptyDataset, "training set is empty");
  if (val_set.empty()) throw Error(Errc::EmptyDataset, "validation set is empty");
  for (const auto* set : {&train_set, &val_set})
    for (const auto& ex : *set)
      if (ex.input.size() != kInputRows * config.dim)
        throw Error(Errc::DimMismatch, "example " + ex.id + " does not match model dim " + std::to_string(config.dim));

  TrainResult result;
  result.model = make_network<float>(config.model, config.dim, seed);
  Network<float>& net = *result.model;
  Adam<float> adam(net.params(), AdamConfig<float>{static_cast<float>(config.lr)});
  ParamSet<float> grads = net.params().zeros_like();
  ParamSet<float> best = net.params();

  Rng shuffle_rng(mix_seed(seed, std::string_view("epoch-shuffle")));
  std::vector<std::size_t> order(train_set.size());
  Workspace<float> ws;
  std::vector<float> pred(config.dim), dpred(config.dim);
  EarlyStopping stopper(config.patience);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const float scale = 1.0f / static_cast<float>(end - start);
      grads.zero();
      for (std::size_t k = start; k < end; ++k) {
        const PreparedExample& ex = train_set[order[k]];
        net.forward(ex.input, ws, pred);
        const auto negs = negatives_of(ex);
        epoch_loss += margin_loss<float>(pred, ex.options[ex.correct_index], negs, dpred);
        for (auto& g : dpred) g *= scale;
        net.backward(ex.input, ws, dpred, grads);
      }
      adam.step(net.params(), grads);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(train_set.size());
    rec.val_loss = mean_loss(net, val_set);
    rec.val_micro_f1 = evaluate(net, val_set).micro_f1;
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss))
      throw Error(Errc::NonFinite, "loss diverged at epoch " + std::to_string(epoch));
    result.history.push_back(rec);

    if (stopper.update(rec.val_loss)) best = net.params();
    if (stopper.should_stop()) break;
  }
  net.params() = std::move(best);
  result.best_epoch = stopper.best_epoch();
  result.best_val_loss = stopper.best();
  return result;
}

TrainResult train(const TrainConfig& config, std::uint64_t seed, std::span<const Instance> train_set,
                  std::span<const Instance> val_set, const EmbeddingTable& table) {
  if (train_set.empty()) throw Error(Errc::EmptyDataset, "training set is empty");
  const auto tr = prepare_all(train_set, table);
  const auto va = prepare_all(val_set, table);
  return train(config, seed, tr, va);
}

Prediction choose_option(std::span<const float> pred, const std::array<std::vector<float>, kNumLabels>& options) {
  Prediction p;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    p.scores[i] = static_cast<double>(cosine<float>(options[i], pred));
    if (p.scores[i] > p.scores[p.chosen]) p.chosen = i;
  }
  return p;
}

Prediction predict(const Network<float>& net, const PreparedExample& ex) {
  const auto pred = net.forward(ex.input);
  return choose_option(pred, ex.options);
}

Prediction predict(const Network<float>& net, const Instance& inst, const EmbeddingTable& table) {
  return predict(net, prepare(inst, table));
}

EvalReport f1_report(std::span<const std::optional<ErrorLabel>> predicted) {
  if (predicted.empty()) throw Error(Errc::EmptyPredictions, "no predictions to score");
  EvalReport r;
  r.n = predicted.size();
  for (const auto& p : predicted) ++r.counts[p ? label_index(*p) : kErrSlot];

  const double n = static_cast<double>(r.n);
  const double correct = static_cast<double>(r.counts[label_index(ErrorLabel::Correct)]);
  r.micro_f1 = correct / n;
  r.err_rate = static_cast<double>(r.counts[kErrSlot]) / n;

  // Per-label F1 with constant gold Correct: Correct has precision 1 (when
  // predicted at all) and recall correct/n; any other predicted label has no
  // true positives and F1 0. Averaged over labels in predictions and gold.
  double sum = 0.0;
  std::size_t labels = 0;
  for (std::size_t i = 0; i <= kErrSlot; ++i) {
    const bool is_gold = i == label_index(ErrorLabel::Correct);
    if (!is_gold && r.counts[i] == 0) continue;
    ++labels;
    if (is_gold) sum += 2.0 * correct / (n + correct);
  }
  r.macro_f1 = sum / static_cast<double>(labels);
  return r;
}

EvalReport evaluate(const Network<float>& net, std::span<const PreparedExample> examples) {
  std::vector<std::optional<ErrorLabel>> labels;
  labels.reserve(examples.size());
  for (const auto& ex : examples) labels.emplace_back(ex.labels[predict(net, ex).chosen]);
  EvalReport r = f1_report(labels);
  r.model = std::string(to_string(net.kind()));
  return r;
}

double generalization_gap(std::span<const EvalReport> seen, std::span<const EvalReport> unseen,
                          const std::set<std::string>& models, std::size_t t, std::string_view s) {
  if (models.empty()) throw Error(Errc::ModelSetMismatch, "empty model set");
  auto mean_f1 = [&](std::span<const EvalReport> reports, const std::string& m) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : reports) {
      if (r.model == m && r.train_size == t && r.structure == s) {
        sum += r.micro_f1;
        ++n;
      }
    }
    if (n == 0) throw Error(Errc::ModelSetMismatch, "no report for model '" + m + "'");
    return sum / static_cast<double>(n);
  };
  double gap = 0.0;
  for (const auto& m : models) gap += mean_f1(seen, m) - mean_f1(unseen, m);
  return gap / static_cast<double>(models.size());
}

std::string report_csv_header() {
  std::string h = "model,structure,data_type,size,run,seed,n,micro_f1,macro_f1,err_rate";
  for (ErrorLabel l : kAllLabels) h += ",count_" + std::string(to_string(l));
  h += ",count_ERR";
  return h;
}

std::string to_csv_row(const EvalReport& r) {
  std::string row = r.model + ',' + r.structure + ',' + r.data_type + ',' + std::to_string(r.train_size) + ',' +
                    std::to_string(r.run) + ',' + std::to_string(r.seed) + ',' + std::to_string(r.n) + ',' +
                    fmt_double(r.micro_f1) + ',' + fmt_double(r.macro_f1) + ',' + fmt_double(r.err_rate);
  for (auto c : r.counts) row += ',' + std::to_string(c);
  return row;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["structure"] = r.structure;
  j["data_type"] = r.data_type;
  j["size"] = r.train_size;
  j["run"] = r.run;
  j["seed"] = r.seed;
  j["n"] = r.n;
  j["micro_f1"] = r.micro_f1;
  j["macro_f1"] = r.macro_f1;
  j["err_rate"] = r.err_rate;
  nlohmann::ordered_json counts;
  for (ErrorLabel l : kAllLabels) counts[std::string(to_string(l))] = r.counts[label_index(l)];
  counts["ERR"] = r.counts[kErrSlot];
  j["counts"] = counts;
  return j;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss,val_micro_f1\n";
  for (const auto& e : history)
    out += std::to_string(e.epoch) + ',' + fmt_double(e.train_loss) + ',' + fmt_double(e.val_loss) + ',' +
           fmt_double(e.val_micro_f1) + '\n';
  return out;
}

double sample_stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

std::vector<std::size_t> nested_sample_order(std::size_t pool_size, std::uint64_t seed) {
  std::vector<std::size_t> order(pool_size);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, std::string_view("nested-subsample")));
  rng.shuffle(std::span<std::size_t>(order));
  return order;
}

SweepResult sweep(const SweepSpec& spec, const SweepData& data, const EmbeddingTable& table) {
  spec.config.validate();
  if (spec.sizes.empty() || spec.structures.empty()) throw Error(Errc::ConfigError, "sweep needs sizes and structures");
  if (data.test.empty()) throw Error(Errc::EmptyDataset, "sweep test set is empty");
  const std::size_t max_size = *std::max_element(spec.sizes.begin(), spec.sizes.end());
  if (max_size > data.train_pool.size())
    throw Error(Errc::SizeExceedsData, "size " + std::to_string(max_size) + " exceeds " +
                                           std::to_string(data.train_pool.size()) + " training instances");
  for (auto s : spec.sizes)
    if (s == 0) throw Error(Errc::SizeExceedsData, "training size must be positive");

  const auto order = nested_sample_order(data.train_pool.size(), spec.config.base_seed);
  const std::string data_type(to_string(data.test.front().data_type));

  struct Prepared {
    std::vector<PreparedExample> train, val, test, unseen;
  };
  auto ablate_all = [&](const std::vector<Instance>& in, Structure s, std::size_t limit,
                        const std::vector<std::size_t>* idx) {
    std::vector<Instance> out;
    const std::size_t n = std::min(limit, in.size());
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) out.push_back(apply_structure(in[idx ? (*idx)[k] : k], s, spec.structure_seed));
    return prepare_all(out, table);
  };
  std::map<Structure, Prepared> prepared;
  for (Structure s : spec.structures) {
    Prepared p;
    p.train = ablate_all(data.train_pool, s, max_size, &order);
    p.val = ablate_all(data.val, s, data.val.size(), nullptr);
    p.test = ablate_all(data.test, s, data.test.size(), nullptr);
    p.unseen = ablate_all(data.unseen_test, s, data.unseen_test.size(), nullptr);
    prepared.emplace(s, std::move(p));
  }

  SweepResult result;
  for (auto size : spec.sizes)
    for (Structure s : spec.structures) {
      SweepCell cell;
      cell.size = size;
      cell.structure = s;
      cell.runs.resize(static_cast<std::size_t>(spec.config.runs));
      if (!data.unseen_test.empty()) cell.unseen_runs.resize(static_cast<std::size_t>(spec.config.runs));
      result.cells.push_back(std::move(cell));
    }

  struct Task {
    std::size_t cell;
    int run;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < result.cells.size(); ++c)
    for (int r = 0; r < spec.config.runs; ++r) tasks.push_back({c, r});

  auto run_task = [&](const Task& t) {
    SweepCell& cell = result.cells[t.cell];
    const Prepared& p = prepared.at(cell.structure);
    const std::uint64_t seed = spec.config.run_seed(t.run);
    const std::span<const PreparedExample> train_span(p.train.data(), cell.size);
    TrainResult tr = train(spec.config, seed, train_span, p.val);
    auto stamp = [&](EvalReport r) {
      r.structure = std::string(to_string(cell.structure));
      r.data_type = data_type;
      r.train_size = cell.size;
      r.run = t.run;
      r.seed = seed;
      return r;
    };
    cell.runs[static_cast<std::size_t>(t.run)] = stamp(evaluate(*tr.model, p.test));
    if (!p.unseen.empty()) {
      EvalReport u = stamp(evaluate(*tr.model, p.unseen));
      u.data_type = std::string(to_string(data.unseen_test.front().data_type));
      cell.unseen_runs[static_cast<std::size_t>(t.run)] = u;
    }
  };

  const unsigned jobs = std::max(1u, std::min<unsigned>(spec.jobs, static_cast<unsigned>(tasks.size())));
  if (jobs == 1) {
    for (const auto& t : tasks) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(jobs);
    {
      std::vector<std::jthread> workers;
      for (unsigned w = 0; w < jobs; ++w)
        workers.emplace_back([&, w] {
          try {
            for (std::size_t i = next++; i < tasks.size(); i = next++) run_task(tasks[i]);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  for (auto& cell : result.cells) {
    std::vector<double> micro, macro;
    for (const auto& r : cell.runs) {
      micro.push_back(r.micro_f1);
      macro.push_back(r.macro_f1);
    }
    cell.mean_micro_f1 = std::accumulate(micro.begin(), micro.end(), 0.0) / static_cast<double>(micro.size());
    cell.mean_macro_f1 = std::accumulate(macro.begin(), macro.end(), 0.0) / static_cast<double>(macro.size());
    cell.std_micro_f1 = sample_stddev(micro);
    if (!cell.unseen_runs.empty())
      cell.gen_gap = generalization_gap(cell.runs, cell.unseen_runs, {std::string(to_string(spec.config.model))},
                                        cell.size, to_string(cell.structure));
  }
  return result;
}

SyntheticTask make_separable_task(std::size_t n, std::size_t dim, std::uint64_t seed, double noise) {
  if (dim == 0) throw Error(Errc::ShapeError, "synthetic task needs dim > 0");
  SyntheticTask task{{}, EmbeddingTable(static_cast<std::uint32_t>(dim), Pooling::Pseudo)};
  Rng rng(mix_seed(seed, std::string_view("separable-task")));
  auto gaussian = [&] {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    return v;
  };
  auto to_float = [](const std::vector<double>& v) { return std::vector<float>(v.begin(), v.end()); };

  for (std::size_t i = 0; i < n; ++i) {
    Instance inst;
    inst.id = "syn-" + std::to_string(seed) + "-" + std::to_string(i);
    inst.seed = mix_seed(seed, i);
    inst.context = ContextMatrix(2, 4);
    std::vector<std::vector<double>> rows;
    std::size_t slot = 0;
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 4; ++c) {
        Cell& cell = inst.context.at(r, c);
        cell.role = kRowRoles[c];
        if (r == 1 && c == 3) {
          cell = Cell{CellRole::Blank, std::nullopt, false};
          continue;
        }
        cell.text = inst.id + " context " + std::to_string(++slot);
        rows.push_back(gaussian());
        task.table.insert(*cell.text, to_float(rows.back()));
      }
    std::vector<double> target(dim, 0.0);
    for (std::size_t k = 4; k < 7; ++k)
      for (std::size_t d = 0; d < dim; ++d) target[d] += rows[k][d] / 3.0;
    for (auto& x : target) x += noise * rng.normal();

    std::array<std::size_t, kNumLabels> order;
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      const ErrorLabel label = kAllLabels[order[k]];
      auto& opt = inst.answers.options[k];
      opt.label = label;
      opt.text = inst.id + " option " + std::string(to_string(label));
      task.table.insert(opt.text, to_float(label == ErrorLabel::Correct ? target : gaussian()));
      if (label == ErrorLabel::Correct) inst.answers.correct_index = k;
    }
    task.instances.push_back(std::move(inst));
  }
  return task;
}

}  // namespace blm
