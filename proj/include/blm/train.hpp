#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "blm/embed.hpp"
#include "blm/instance.hpp"
#include "blm/nn.hpp"

namespace blm {

struct TrainConfig {
  int epochs = 120;
  double lr = 0.001;
  std::size_t batch_size = 100;
  int patience = 10;
  int runs = 3;
  std::uint64_t base_seed = 42;
  ModelKind model = ModelKind::Cnn;
  std::size_t dim = 768;

  void validate() const;
  // Seed of run r.
  std::uint64_t run_seed(int run) const noexcept { return base_seed + static_cast<std::uint64_t>(run); }
};

// An instance resolved against an embedding table.
struct PreparedExample {
  std::string id;
  std::vector<float> input;                         // 7 x dim
  std::array<std::vector<float>, kNumLabels> options;
  std::array<ErrorLabel, kNumLabels> labels{};
  std::size_t correct_index = 0;
};

PreparedExample prepare(const Instance& inst, const EmbeddingTable& table);
std::vector<PreparedExample> prepare_all(std::span<const Instance> instances, const EmbeddingTable& table);

// Stops after `patience` consecutive epochs without a strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Returns true when `loss` is a new best.
  bool update(double loss);
  bool should_stop() const noexcept { return since_best_ >= patience_; }
  int best_epoch() const noexcept { return best_epoch_; }
  double best() const noexcept { return best_; }
  int epochs() const noexcept { return epochs_; }

 private:
  int patience_;
  int epochs_ = 0;
  int best_epoch_ = 0;
  int since_best_ = 0;
  double best_ = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_micro_f1 = 0.0;
};

struct TrainResult {
  std::unique_ptr<Network<float>> model;  // parameters of the best validation epoch
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

TrainResult train(const TrainConfig& config, std::uint64_t seed, std::span<const PreparedExample> train_set,
                  std::span<const PreparedExample> val_set);
TrainResult train(const TrainConfig& config, std::uint64_t seed, std::span<const Instance> train_set,
                  std::span<const Instance> val_set, const EmbeddingTable& table);

struct Prediction {
  std::size_t chosen = 0;
  std::array<double, kNumLabels> scores{};
};

// argmax of cos(option, pred), ties to the lowest index.
Prediction choose_option(std::span<const float> pred, const std::array<std::vector<float>, kNumLabels>& options);
Prediction predict(const Network<float>& net, const PreparedExample& ex);
Prediction predict(const Network<float>& net, const Instance& inst, const EmbeddingTable& table);

// Mean per-example margin loss.
double mean_loss(const Network<float>& net, std::span<const PreparedExample> examples);

inline constexpr std::size_t kErrSlot = kNumLabels;  // histogram slot for unparseable LLM answers

struct EvalReport {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double err_rate = 0.0;
  std::size_t n = 0;
  std::array<std::size_t, kNumLabels + 1> counts{};  // predicted label histogram, then ERR
  // metadata
  std::string model;
  std::string structure;
  std::string data_type;
  std::size_t train_size = 0;
  int run = 0;
  std::uint64_t seed = 0;
};

// Gold is always Correct; nullopt marks an ERR prediction.
EvalReport f1_report(std::span<const std::optional<ErrorLabel>> predicted);
EvalReport evaluate(const Network<float>& net, std::span<const PreparedExample> examples);

// Mean over models of (seen F1 - unseen F1) at training size t and structure
// s; each model's F1 is its mean micro-F1 over runs.
double generalization_gap(std::span<const EvalReport> seen, std::span<const EvalReport> unseen,
                          const std::set<std::string>& models, std::size_t t, std::string_view s);

std::string report_csv_header();
std::string to_csv_row(const EvalReport& r);
nlohmann::ordered_json to_json(const EvalReport& r);
std::string history_csv(const std::vector<EpochRecord>& history);

struct SweepData {
  std::vector<Instance> train_pool;  // Base
  std::vector<Instance> val;         // Base
  std::vector<Instance> test;        // Base, seen type
  std::vector<Instance> unseen_test; // Base, optional
};

struct SweepCell {
  std::size_t size = 0;
  Structure structure = Structure::Base;
  std::vector<EvalReport> runs;
  std::vector<EvalReport> unseen_runs;
  double mean_micro_f1 = 0.0;
  double std_micro_f1 = 0.0;
  double mean_macro_f1 = 0.0;
  std::optional<double> gen_gap;
};

struct SweepResult {
  std::vector<SweepCell> cells;
};

struct SweepSpec {
  std::vector<std::size_t> sizes{10, 50, 100, 200, 500, 1000, 1200, 1500, 2000, 2700};
  std::vector<Structure> structures{Structure::Base};
  TrainConfig config;
  std::uint64_t structure_seed = 42;
  unsigned jobs = 1;
};

// First n instances of the seeded permutation of the pool; smaller samples are
// prefixes of larger ones.
std::vector<std::size_t> nested_sample_order(std::size_t pool_size, std::uint64_t seed);

SweepResult sweep(const SweepSpec& spec, const SweepData& data, const EmbeddingTable& table);

// Sample standard deviation (n-1); 0 for fewer than two values.
double sample_stddev(std::span<const double> values);

// Oracle-constructed task: context rows and distractors are vectors of
// independent N(0, 1) components; the correct option is the mean of rows 5-7
// plus N(0, noise^2) per component. Texts are unique per instance.
struct SyntheticTask {
  std::vector<Instance> instances;
  EmbeddingTable table;
};

SyntheticTask make_separable_task(std::size_t n, std::size_t dim, std::uint64_t seed, double noise = 0.1);

}  // namespace blm
