#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "supsup/tensor.hpp"

namespace supsup {

/// Confidence objectives minimized during task inference.
enum class Objective {
  Entropy,  ///< H(p), output entropy.
  GSumExp,  ///< G(y) = logsumexp(y), gradient flowing only to s-neurons.
};

/// log(p) is taken on max(p, kProbFloor).
inline constexpr double kProbFloor = 1e-12;

/// Row-wise numerically stable softmax.
Matrix softmax_rows(const Matrix& logits);

/// H(p) = -sum p log p in nats, 0 log 0 := 0. Throws DomainError on negative
/// entries or when the sum is off by more than 1e-6.
double entropy(std::span<const double> p);

/// log sum_v exp(y_v) over all entries.
double g_objective(std::span<const double> logits, std::size_t real_labels);

/// dG/dy: softmax(y)_v for v >= real_labels, exactly 0 on the first
/// `real_labels` entries. Throws ConfigError when no s-neurons exist.
std::vector<double> g_objective_grad(std::span<const double> logits, std::size_t real_labels);

/// M(p) = -max_i p_i.
double max_conf_metric(std::span<const double> p);

struct LossAndGrad {
  double value = 0.0;  ///< mean over rows
  Matrix dlogits;      ///< d value / d logits
};

/// Mean over rows of the chosen objective and its gradient w.r.t. the logits.
/// `real_labels` is only used by GSumExp.
LossAndGrad objective_on_logits(const Matrix& logits, Objective objective, std::size_t real_labels);

/// Mean cross-entropy over all output neurons. Labels must lie in [0, real_labels).
LossAndGrad cross_entropy(const Matrix& logits, std::span<const int> labels,
                          std::size_t real_labels);

/// argmax over the first `real_labels` outputs of each row.
std::vector<int> predict_classes(const Matrix& logits, std::size_t real_labels);

}  // namespace supsup
