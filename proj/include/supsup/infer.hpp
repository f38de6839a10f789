#pragma once

// Task-identity inference over a superposition of masks.

#include <cstddef>
#include <span>
#include <vector>

#include "supsup/mask.hpp"
#include "supsup/net.hpp"
#include "supsup/objectives.hpp"

namespace supsup {

struct InferenceResult {
  std::size_t task = 0;
  /// Superposed forward/backward passes performed.
  std::size_t rounds = 0;
};

/// argmax_i(-dObjective/dalpha_i) at alpha = 1/k, from a single gradient.
/// Ties go to the lowest index. Ignores the bank's current alpha.
InferenceResult one_shot(const FixedNet& net, const MaskBank& bank, const Matrix& x,
                         Objective objective);

/// Median elimination: each round zeroes the surviving alpha_i whose
/// g_i = -dObjective/dalpha_i is <= the lower median of the survivors, then
/// renormalizes. ceil(log2 k) rounds for distinct gradients and k a power of two.
InferenceResult binary_infer(const FixedNet& net, const MaskBank& bank, const Matrix& x,
                             Objective objective);

/// Like binary_infer but each round keeps the top ceil(gamma * survivors)
/// entries. gamma = 1/2 matches binary_infer, gamma = 1/k matches one_shot.
/// Throws ConfigError unless 1/k <= gamma <= 1/2 (any gamma is accepted for k = 1).
InferenceResult gamma_infer(const FixedNet& net, const MaskBank& bank, const Matrix& x,
                            Objective objective, double gamma);

struct AlphaDescentResult {
  std::vector<double> alpha;
  /// Set when clipping zeroed every entry and alpha was reset to uniform.
  bool reset = false;
};

/// alpha <- renormalize(max(alpha - lr * grad, 0)), `steps` times from uniform.
AlphaDescentResult alpha_descent(const FixedNet& net, const MaskBank& bank, const Matrix& x,
                                 Objective objective, double lr, std::size_t steps);

struct AllocationDecision {
  enum class Kind { UseMask, AllocateNew };
  Kind kind = Kind::AllocateNew;
  std::size_t index = 0;  ///< argmax nu for UseMask
  std::vector<double> nu;
};

/// nu = softmax(-g); AllocateNew iff k * max(nu) < 1 + eps, else UseMask(argmax nu).
AllocationDecision nns_decision(std::span<const double> grad, std::size_t k, double eps);

/// Index of the largest value, lowest index on ties.
std::size_t argmax_lowest(std::span<const double> v);

}  // namespace supsup
