#include "supsup/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "supsup/errors.hpp"

namespace supsup {
namespace {

double logsumexp(std::span<const double> y) {
  const double mx = *std::max_element(y.begin(), y.end());
  double s = 0.0;
  for (double v : y) s += std::exp(v - mx);
  return mx + std::log(s);
}

}  // namespace

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto y = logits.row(r);
    auto out = p.row(r);
    const double mx = *std::max_element(y.begin(), y.end());
    double s = 0.0;
    for (std::size_t v = 0; v < y.size(); ++v) {
      out[v] = std::exp(y[v] - mx);
      s += out[v];
    }
    for (double& v : out) v /= s;
  }
  return p;
}

double entropy(std::span<const double> p) {
  double sum = 0.0;
  double h = 0.0;
  for (double v : p) {
    if (v < 0.0) throw DomainError("entropy: negative probability");
    sum += v;
    if (v > 0.0) h -= v * std::log(std::max(v, kProbFloor));
  }
  if (std::abs(sum - 1.0) > 1e-6) throw DomainError("entropy: probabilities do not sum to one");
  return h;
}

double g_objective(std::span<const double> logits, std::size_t real_labels) {
  if (real_labels >= logits.size()) throw ConfigError("G objective needs at least one s-neuron");
  return logsumexp(logits);
}

std::vector<double> g_objective_grad(std::span<const double> logits, std::size_t real_labels) {
  if (real_labels >= logits.size()) throw ConfigError("G objective needs at least one s-neuron");
  const double lse = logsumexp(logits);
  std::vector<double> g(logits.size(), 0.0);
  for (std::size_t v = real_labels; v < logits.size(); ++v) g[v] = std::exp(logits[v] - lse);
  return g;
}

double max_conf_metric(std::span<const double> p) {
  return -*std::max_element(p.begin(), p.end());
}

LossAndGrad objective_on_logits(const Matrix& logits, Objective objective,
                                std::size_t real_labels) {
  const std::size_t b = logits.rows();
  const std::size_t s = logits.cols();
  LossAndGrad out{0.0, Matrix(b, s)};
  const double inv_b = 1.0 / static_cast<double>(b);
  if (objective == Objective::GSumExp) {
    if (real_labels >= s) throw ConfigError("G objective needs at least one s-neuron");
    for (std::size_t r = 0; r < b; ++r) {
      const auto y = logits.row(r);
      const double lse = logsumexp(y);
      out.value += lse * inv_b;
      auto d = out.dlogits.row(r);
      for (std::size_t v = real_labels; v < s; ++v) d[v] = std::exp(y[v] - lse) * inv_b;
    }
    return out;
  }
  const Matrix p = softmax_rows(logits);
  for (std::size_t r = 0; r < b; ++r) {
    const auto pr = p.row(r);
    double h = 0.0;
    for (double v : pr) h -= v * std::log(std::max(v, kProbFloor));
    out.value += h * inv_b;
    // dH/dy_v = -p_v (log p_v + H)
    auto d = out.dlogits.row(r);
    for (std::size_t v = 0; v < s; ++v)
      d[v] = -pr[v] * (std::log(std::max(pr[v], kProbFloor)) + h) * inv_b;
  }
  return out;
}

LossAndGrad cross_entropy(const Matrix& logits, std::span<const int> labels,
                          std::size_t real_labels) {
  const std::size_t b = logits.rows();
  if (labels.size() != b) throw DimensionError("cross_entropy: label count != batch rows");
  LossAndGrad out{0.0, softmax_rows(logits)};
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t r = 0; r < b; ++r) {
    const int c = labels[r];
    if (c < 0 || static_cast<std::size_t>(c) >= real_labels)
      throw DataError("cross_entropy: label " + std::to_string(c) + " outside [0, " +
                      std::to_string(real_labels) + ")");
    auto d = out.dlogits.row(r);
    out.value -= std::log(std::max(d[c], std::numeric_limits<double>::min())) * inv_b;
    d[c] -= 1.0;
    for (double& v : d) v *= inv_b;
  }
  return out;
}

std::vector<int> predict_classes(const Matrix& logits, std::size_t real_labels) {
  const std::size_t l = std::min(real_labels, logits.cols());
  std::vector<int> pred(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto y = logits.row(r);
    pred[r] = static_cast<int>(std::max_element(y.begin(), y.begin() + l) - y.begin());
  }
  return pred;
}

}  // namespace supsup
