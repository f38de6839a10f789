#pragma once

// Scenario runners (GG, GNu, NNs, HopSupSup, ABatchE), the evaluation
// protocol and storage accounting.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "supsup/batche.hpp"
#include "supsup/data.hpp"
#include "supsup/hopfield.hpp"
#include "supsup/infer.hpp"
#include "supsup/mask.hpp"
#include "supsup/mask_train.hpp"
#include "supsup/metrics.hpp"
#include "supsup/net.hpp"

namespace supsup {

enum class Scenario { GG, GNu, NNs };
enum class InferAlg { OneShot, Binary, Gamma, AlphaDescent };
enum class Granularity { SingleImage, FullBatch };

struct ScenarioConfig {
  Scenario scenario = Scenario::GNu;
  InferAlg infer_alg = InferAlg::OneShot;
  double gamma = 0.5;
  Objective objective = Objective::GSumExp;
  Granularity granularity = Granularity::SingleImage;
  TrainConfig train;
  BinarizeRule rule = BinarizeRule::Threshold0;
  double keep_frac = 0.5;
  bool transfer = false;
  std::size_t eval_batch = 128;
  double eps = 0.125;
  std::size_t cadence = 100;
  std::size_t mask_budget = 2500;
  double alpha_lr = 1.0;
  std::size_t alpha_steps = 10;
  /// Labels are shared across tasks: no zero-on-wrong-task rule.
  bool shared_labels = false;
  bool record_time = false;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

/// What evaluate() needs from a continual learner.
class TaskModel {
 public:
  virtual ~TaskModel() = default;
  virtual std::size_t infer_task(const Matrix& x) const = 0;
  /// Predicted classes (over the first l outputs) for every row of x.
  virtual std::vector<int> classify(std::size_t task, const Matrix& x) const = 0;
};

struct EvalOptions {
  Granularity granularity = Granularity::SingleImage;
  std::size_t batch = 128;
  /// Use the true task instead of inferring it.
  bool task_given = false;
  bool shared_labels = false;
  /// Model task expected for each dataset; empty means dataset t -> task t.
  std::vector<std::size_t> owner;
};

struct EvalResult {
  std::vector<double> accuracy;
  std::vector<double> id_accuracy;
};

/// Test-set evaluation in fixed task order. Per batch the task is inferred
/// from its first image (SingleImage) or all of it (FullBatch); a wrongly
/// inferred batch scores 0 unless labels are shared.
EvalResult evaluate(const TaskModel& model, std::span<const TaskDataset> tasks, const EvalOptions& opts);

/// SupSup model over a fixed net and a bank of masks.
class SupSupModel : public TaskModel {
 public:
  SupSupModel(const FixedNet& net, std::vector<Supermask> masks, const ScenarioConfig& cfg);
  std::size_t infer_task(const Matrix& x) const override;
  std::vector<int> classify(std::size_t task, const Matrix& x) const override;
  const MaskBank& bank() const { return bank_; }

 private:
  const FixedNet* net_;
  MaskBank bank_;
  ScenarioConfig cfg_;
};

struct RunResult {
  MetricsRecord metrics;
  std::vector<Supermask> masks;
  /// GG only: accuracy of each task right after its own training.
  std::vector<double> immediate_accuracy;
};

/// Trains one mask per task; each task is evaluated with its own mask.
RunResult run_gg(const FixedNet& net, std::span<const TaskDataset> tasks, const ScenarioConfig& cfg);
/// Trains like GG, then evaluates with task identity inferred per batch.
RunResult run_gnu(const FixedNet& net, std::span<const TaskDataset> tasks, const ScenarioConfig& cfg);
/// Streams `batches_per_task` training batches from each task in turn with no
/// boundary signal; masks are allocated or reused every `cadence` batches.
RunResult run_nns(const FixedNet& net, std::span<const TaskDataset> tasks,
                  std::size_t batches_per_task, const ScenarioConfig& cfg);

struct StorageReport {
  std::size_t masks = 0;
  std::size_t bytes = 0;
  std::string csv_row;  ///< "storage,,,masks,bytes,"
};
StorageReport storage_report(std::span<const Supermask> masks);

struct HopfieldRunConfig {
  TrainConfig train;
  HopfieldRule rule = HopfieldRule::Storkey;
  RecoveryConfig recovery;
  std::size_t eval_batch = 64;
  bool record_time = false;
};

struct HopfieldRunResult {
  MetricsRecord metrics;
  HopfieldStore store;
  std::vector<Supermask> stored;  ///< kept only to score recovery
  std::vector<std::size_t> selected;  ///< nearest stored mask to each recovery
  std::vector<bool> exact;
  std::vector<bool> diverged;
};

/// Trains a layer-output mask per task, stores it in the Hopfield network,
/// then recovers a mask for every task from its test batches alone.
HopfieldRunResult run_hopfield(const FixedNet& net, std::span<const TaskDataset> tasks,
                               const HopfieldRunConfig& cfg);

/// Nearest mask by Hamming distance, lowest index on ties.
std::size_t nearest_mask(const Supermask& probe, std::span<const Supermask> stored);

struct AbatcheRunConfig {
  BatchETrainConfig train;
  BatchEObjective objective = BatchEObjective::EntropyH;
  std::size_t eval_batch = 16;
  std::size_t row_cap = kDefaultRowCap;
  bool record_time = false;
};

struct AbatcheRunResult {
  MetricsRecord metrics;
  SharedTrunk trunk;
  std::vector<FastWeights> bank;
};

/// BatchE training per task, then GNu evaluation with ABatchE inference.
AbatcheRunResult run_abatche(SharedTrunk trunk, std::span<const TaskDataset> tasks,
                             const AbatcheRunConfig& cfg);

}  // namespace supsup
