#include "supsup/infer.hpp"

#include <algorithm>
#include <cmath>

#include "supsup/errors.hpp"

namespace supsup {
namespace {

std::vector<double> neg_grad(const FixedNet& net, const MaskBank& bank, const Matrix& x,
                             Objective objective) {
  std::vector<double> g = grad_alpha(net, bank, x, objective);
  for (double& v : g) v = -v;
  return g;
}

MaskBank uniform_copy(const MaskBank& bank) {
  if (bank.size() == 0) throw InvalidStateError("task inference on an empty mask bank");
  MaskBank b{bank.masks, {}};
  b.reset_uniform();
  return b;
}

std::vector<std::size_t> survivors(std::span<const double> alpha) {
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    if (alpha[i] > 0.0) s.push_back(i);
  return s;
}

void renormalize(std::vector<double>& alpha) {
  double sum = 0.0;
  for (double a : alpha) sum += a;
  for (double& a : alpha) a /= sum;
}

// Zeroes every survivor with g <= threshold. If that would eliminate all of
// them, only the best survivor (lowest index on ties) is kept.
void eliminate(std::vector<double>& alpha, const std::vector<std::size_t>& alive,
               std::span<const double> g, double threshold) {
  std::size_t best = alive.front();
  for (std::size_t i : alive)
    if (g[i] > g[best]) best = i;
  bool any_left = false;
  for (std::size_t i : alive) {
    if (g[i] <= threshold) alpha[i] = 0.0;
    else any_left = true;
  }
  if (!any_left) alpha[best] = 1.0;
  renormalize(alpha);
}

}  // namespace

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

InferenceResult one_shot(const FixedNet& net, const MaskBank& bank, const Matrix& x,
                         Objective objective) {
  const MaskBank b = uniform_copy(bank);
  if (b.size() == 1) return {0, 0};
  return {argmax_lowest(neg_grad(net, b, x, objective)), 1};
}

InferenceResult binary_infer(const FixedNet& net, const MaskBank& bank, const Matrix& x,
                             Objective objective) {
  MaskBank b = uniform_copy(bank);
  InferenceResult res;
  for (auto alive = survivors(b.alpha); alive.size() > 1; alive = survivors(b.alpha)) {
    const auto g = neg_grad(net, b, x, objective);
    ++res.rounds;
    std::vector<double> vals;
    for (std::size_t i : alive) vals.push_back(g[i]);
    std::sort(vals.begin(), vals.end());
    eliminate(b.alpha, alive, g, vals[(vals.size() - 1) / 2]);
  }
  res.task = argmax_lowest(b.alpha);
  return res;
}

InferenceResult gamma_infer(const FixedNet& net, const MaskBank& bank, const Matrix& x,
                            Objective objective, double gamma) {
  MaskBank b = uniform_copy(bank);
  const double k = static_cast<double>(b.size());
  if (b.size() > 1 && (gamma < 1.0 / k - 1e-12 || gamma > 0.5 + 1e-12))
    throw ConfigError("gamma must lie in [1/k, 1/2]");
  InferenceResult res;
  for (auto alive = survivors(b.alpha); alive.size() > 1; alive = survivors(b.alpha)) {
    const auto g = neg_grad(net, b, x, objective);
    ++res.rounds;
    std::vector<double> vals;
    for (std::size_t i : alive) vals.push_back(g[i]);
    std::sort(vals.begin(), vals.end(), std::greater<>());
    const auto n = static_cast<double>(alive.size());
    auto keep = static_cast<std::size_t>(std::ceil(gamma * n - 1e-9));
    keep = std::clamp<std::size_t>(keep, 1, alive.size() - 1);
    eliminate(b.alpha, alive, g, vals[keep]);
  }
  res.task = argmax_lowest(b.alpha);
  return res;
}

AlphaDescentResult alpha_descent(const FixedNet& net, const MaskBank& bank, const Matrix& x,
                                 Objective objective, double lr, std::size_t steps) {
  if (!(lr > 0.0)) throw ConfigError("alpha_descent: step size must be positive");
  MaskBank b = uniform_copy(bank);
  AlphaDescentResult res;
  for (std::size_t s = 0; s < steps; ++s) {
    const auto g = grad_alpha(net, b, x, objective);
    double sum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      b.alpha[i] = std::max(0.0, b.alpha[i] - lr * g[i]);
      sum += b.alpha[i];
    }
    if (sum <= 0.0) {
      b.reset_uniform();
      res.reset = true;
      continue;
    }
    for (double& a : b.alpha) a /= sum;
  }
  res.alpha = std::move(b.alpha);
  return res;
}

AllocationDecision nns_decision(std::span<const double> grad, std::size_t k, double eps) {
  if (grad.size() != k) throw DimensionError("nns_decision: gradient length != k");
  if (k == 0) return {};
  AllocationDecision d;
  d.nu.resize(k);
  double mx = -grad[0];
  for (double g : grad) mx = std::max(mx, -g);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    d.nu[i] = std::exp(-grad[i] - mx);
    sum += d.nu[i];
  }
  for (double& v : d.nu) v /= sum;
  d.index = argmax_lowest(d.nu);
  d.kind = static_cast<double>(k) * d.nu[d.index] < 1.0 + eps ? AllocationDecision::Kind::AllocateNew
                                                             : AllocationDecision::Kind::UseMask;
  return d;
}

}  // namespace supsup
