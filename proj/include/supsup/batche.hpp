#pragma once

// BatchE baseline: a shared trunk W modulated per task by rank-one fast
// weights r s^T, and ABatchE task inference over a batch replicated k times.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "supsup/data.hpp"
#include "supsup/infer.hpp"
#include "supsup/mask_train.hpp"
#include "supsup/net.hpp"
#include "supsup/objectives.hpp"
#include "supsup/tensor.hpp"

namespace supsup {

/// One (r, s) pair per layer: r has the layer's fan_in, s its fan_out.
struct FastWeights {
  std::vector<std::vector<double>> r;
  std::vector<std::vector<double>> s;
};

enum class TrunkProvenance { TrainedOnFirstTask, Random };

/// Shared ReLU trunk without biases. Frozen once `frozen` is set.
struct SharedTrunk {
  FixedNet net;
  TrunkProvenance provenance = TrunkProvenance::Random;
  bool frozen = false;
};

/// Kaiming-normal weights N(0, 2 / fan_in) drawn from config.seed. The config
/// must use ReLU, weight placement and no normalization.
SharedTrunk make_trunk(const NetConfig& config, TrunkProvenance provenance);

/// r, s = 1 + N(0, 0.1^2) per entry.
FastWeights init_fast_weights(const FixedNet& net, std::uint64_t seed);
/// Throws DimensionError unless the vectors fit the trunk.
void check_fast_weights(const FixedNet& net, const FastWeights& fast);

/// Per layer ((X (*) R) W) (*) S with R, S the broadcast r, s; ReLU between
/// layers; softmax at the end.
Matrix batche_forward(const Matrix& x, const FixedNet& net, const FastWeights& fast);
/// Logits of batche_forward.
Matrix batche_logits(const Matrix& x, const FixedNet& net, const FastWeights& fast);

struct BatchETrainConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 128;
  double lr = 0.01;
  /// Trunk learning rate while training on the first task.
  double trunk_lr = 1e-4;
  double decay = 0.99;
  double eps = 1e-8;
  std::uint64_t seed = 0;
};

/// Trains fresh fast weights by cross-entropy with RMSProp. An unfrozen
/// TrainedOnFirstTask trunk is trained alongside and frozen afterwards; any
/// other trunk is left untouched (and marked frozen).
FastWeights batche_train_task(SharedTrunk& trunk, const TaskDataset& data,
                              const BatchETrainConfig& cfg);

enum class BatchEObjective { EntropyH, MaxConf };

inline constexpr std::size_t kDefaultRowCap = 65536;

/// Stacked forward over X~ = [X; ...; X] with per-block R~, S~: row
/// b*i + w is row w of task i's output. Throws ResourceError when b*k > row_cap.
Matrix abatche_forward(const Matrix& x, const FixedNet& net, std::span<const FastWeights> bank,
                       std::size_t row_cap = kDefaultRowCap);

/// argmin_i sum over the rows of block i of the objective.
InferenceResult abatche_infer(const Matrix& x, const FixedNet& net,
                              std::span<const FastWeights> bank, BatchEObjective objective,
                              std::size_t row_cap = kDefaultRowCap);

/// Modulation mix_l = sum_i alpha_i r_i s_i^T for every layer.
MaskMix batche_superposition(const FixedNet& net, std::span<const FastWeights> bank,
                             std::span<const double> alpha);

/// One-shot inference with an alpha attached to each rank-one modulation:
/// argmax_i(-dObjective/dalpha_i) at alpha = 1/k, ties to the lowest index.
InferenceResult batche_oneshot(const FixedNet& net, std::span<const FastWeights> bank,
                               const Matrix& x, Objective objective);

}  // namespace supsup
