#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "supsup/data.hpp"
#include "supsup/mask.hpp"
#include "supsup/net.hpp"
#include "supsup/rng.hpp"
#include "supsup/tensor.hpp"

namespace supsup {

enum class BinarizeRule {
  Threshold0,  ///< M = 1 iff S > 0
  TopK,        ///< keep the round(keep_frac * n) largest scores per layer
};

/// Real-valued scores, one matrix per mask layer.
struct ScoreTensor {
  std::vector<Matrix> layers;
  BinarizeRule rule = BinarizeRule::Threshold0;
  double keep_frac = 1.0;

  std::vector<Shape> shapes() const;
};

struct RmspropConfig {
  double lr = 1e-4;
  double decay = 0.99;
  double eps = 1e-8;
};

struct RmspropState {
  RmspropConfig config;
  std::vector<Matrix> square_avg;  ///< >= 0 elementwise
};

RmspropState make_rmsprop(const ScoreTensor& scores, RmspropConfig config);

Supermask binarize_threshold(const ScoreTensor& scores);
/// Exactly round(keep_frac * n) ones per layer; ties go to the lowest flat index.
/// Throws ConfigError unless 0 < keep_frac <= 1.
Supermask binarize_topk(const ScoreTensor& scores, double keep_frac);
/// Dispatches on scores.rule.
Supermask binarize(const ScoreTensor& scores);

/// Straight-through gradient of mean cross-entropy (over all outputs) w.r.t.
/// the scores: binarization is treated as the identity on the backward pass.
std::vector<Matrix> score_gradient(const FixedNet& net, const ScoreTensor& scores, const Matrix& x,
                                   std::span<const int> labels);

/// v <- decay v + (1-decay) g^2;  S <- S - lr g / (sqrt(v) + eps).
void rmsprop_step(RmspropState& state, ScoreTensor& scores, const std::vector<Matrix>& grads);

/// Seeded uniform(-b, b) scores with b = sqrt(1 / fan_in) per layer.
ScoreTensor default_scores(const FixedNet& net, std::uint64_t seed);

/// Scores from the running mean of earlier masks, scaled by each layer's
/// signed-Kaiming constant. Falls back to default_scores(net, fallback_seed)
/// when `priors` is empty.
ScoreTensor transfer_init(std::span<const Supermask> priors, const FixedNet& net,
                          std::uint64_t fallback_seed = 0);

/// Epoch-wise shuffled minibatch indices, deterministic in the seed.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed);
  std::vector<std::size_t> next();

 private:
  void reshuffle();

  std::size_t n_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

/// Score tensor plus optimizer state for one mask being trained.
class MaskTrainer {
 public:
  MaskTrainer(const FixedNet& net, ScoreTensor init, RmspropConfig optimizer);

  /// One straight-through RMSProp step; returns the batch loss.
  double step(const Matrix& x, std::span<const int> labels);

  const ScoreTensor& scores() const { return scores_; }
  Supermask mask() const { return binarize(scores_); }

 private:
  const FixedNet* net_;
  ScoreTensor scores_;
  RmspropState state_;
};

struct TrainConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 128;
  RmspropConfig optimizer;
  std::uint64_t seed = 0;
};

/// Trains a mask on `data` for cfg.steps minibatches starting from `init`.
/// The network is never modified.
Supermask train_task(const FixedNet& net, const TaskDataset& data, const TrainConfig& cfg,
                     ScoreTensor init);

}  // namespace supsup
