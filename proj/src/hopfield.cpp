#include "supsup/hopfield.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "supsup/errors.hpp"
#include "supsup/kernels.hpp"
#include "supsup/objectives.hpp"

namespace supsup {
namespace {

void check_spins(const HopfieldStore& store, std::span<const double> z) {
  if (z.size() != store.dim())
    throw DimensionError("spin vector has length " + std::to_string(z.size()) + ", store expects " +
                         std::to_string(store.dim()));
  for (double v : z)
    if (v != 1.0 && v != -1.0) throw DomainError("spin vector entries must be -1 or +1");
}

std::vector<double> psi_times(const HopfieldStore& store, std::span<const double> z) {
  const std::size_t d = store.dim();
  std::vector<double> h(d);
  const auto& k = kernels::active();
  for (std::size_t u = 0; u < d; ++u) h[u] = k.dot(store.psi.row(u).data(), z.data(), d);
  return h;
}

}  // namespace

void hebbian_update(HopfieldStore& store, std::span<const double> z) {
  check_spins(store, z);
  const std::size_t d = store.dim();
  const double inv_d = 1.0 / static_cast<double>(d);
  for (std::size_t u = 0; u < d; ++u)
    for (std::size_t v = u; v < d; ++v) {
      const double inc = z[u] * z[v] * inv_d;
      store.psi(u, v) += inc;
      if (v != u) store.psi(v, u) = store.psi(u, v);
    }
  ++store.count;
}

void storkey_update(HopfieldStore& store, std::span<const double> z) {
  check_spins(store, z);
  const std::size_t d = store.dim();
  const double inv_d = 1.0 / static_cast<double>(d);
  const std::vector<double> h = psi_times(store, z);
  for (std::size_t u = 0; u < d; ++u)
    for (std::size_t v = u; v < d; ++v) {
      double inc = z[u] * z[v] - (z[u] * h[v] + h[u] * z[v]);
      if (u == v) inc -= 1.0;
      store.psi(u, v) += inc * inv_d;
      if (v != u) store.psi(v, u) = store.psi(u, v);
    }
  ++store.count;
}

void update_mean(HopfieldStore& store, std::span<const double> z) {
  if (z.size() != store.dim()) throw DimensionError("update_mean: length mismatch");
  if (store.count == 0) throw InvalidStateError("update_mean: call after storing the pattern");
  const double k = static_cast<double>(store.count);
  for (std::size_t u = 0; u < z.size(); ++u)
    store.mean[u] = ((k - 1.0) / k) * store.mean[u] + z[u] / k;
}

void store_mask(HopfieldStore& store, const Supermask& mask, HopfieldRule rule) {
  const auto z = spins_from_mask(mask);
  if (rule == HopfieldRule::Storkey) storkey_update(store, z);
  else hebbian_update(store, z);
  update_mean(store, z);
}

double energy(const HopfieldStore& store, std::span<const double> z) {
  if (z.size() != store.dim()) throw DimensionError("energy: length mismatch");
  const auto h = psi_times(store, z);
  return -kernels::active().dot(z.data(), h.data(), z.size());
}

std::vector<double> energy_grad(const HopfieldStore& store, std::span<const double> z) {
  if (z.size() != store.dim()) throw DimensionError("energy_grad: length mismatch");
  auto h = psi_times(store, z);
  for (double& v : h) v *= -2.0;
  return h;
}

std::vector<double> spins_from_mask(const Supermask& mask) {
  std::vector<double> z;
  z.reserve(mask.total_units());
  for (std::size_t l = 0; l < mask.num_layers(); ++l)
    for (std::uint8_t b : mask.layer(l)) z.push_back(b ? 1.0 : -1.0);
  return z;
}

Supermask mask_from_spins(std::span<const double> z, const std::vector<Shape>& shapes) {
  Supermask mask(shapes);
  if (z.size() != mask.total_units()) throw DimensionError("mask_from_spins: length mismatch");
  std::size_t i = 0;
  for (std::size_t l = 0; l < shapes.size(); ++l)
    for (std::uint8_t& b : mask.layer(l)) b = z[i++] >= 0.0 ? 1 : 0;
  return mask;
}

RecoveryResult recover_mask(const HopfieldStore& store, const FixedNet& net,
                            std::span<const Matrix> batches, const RecoveryConfig& cfg) {
  if (net.config().placement != MaskPlacement::LayerOutputs)
    throw ConfigError("Hopfield recovery needs a network with layer-output masks");
  if (store.count == 0) throw InvalidStateError("Hopfield store is empty");
  const auto shapes = net.mask_shapes();
  std::size_t units = 0;
  for (const Shape& s : shapes) units += s.size();
  if (units != store.dim()) throw DimensionError("Hopfield store size != maskable units of the net");
  if (cfg.steps > 0 && batches.empty()) throw DataError("Hopfield recovery needs evaluation batches");

  const std::size_t d = store.dim();
  const double limit = 10.0 * std::sqrt(static_cast<double>(d));
  RecoveryResult res;
  res.z = store.mean;
  std::vector<double> velocity(d, 0.0);
  const double T = static_cast<double>(cfg.steps);
  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    const double frac = static_cast<double>(t) / T;
    // Relaxed mask m = (z + 1) / 2 laid out per hidden layer.
    MaskMix mix;
    std::size_t off = 0;
    for (const Shape& s : shapes) {
      Matrix m(s.rows, s.cols);
      for (std::size_t i = 0; i < s.size(); ++i) m.data()[i] = 0.5 * (res.z[off + i] + 1.0);
      off += s.size();
      mix.layers.push_back(std::move(m));
    }
    std::vector<double> grad = energy_grad(store, res.z);
    for (double& g : grad) g *= cfg.gamma * frac;
    const double h_weight = cfg.entropy_weight * (1.0 - frac);
    if (h_weight != 0.0) {
      const Matrix& x = batches[(t - 1) % batches.size()];
      const ForwardCache cache = forward(net, mix, x);
      const LossAndGrad h = objective_on_logits(cache.logits, Objective::Entropy, net.real_labels());
      const MaskMix dm = backward_mix(net, mix, cache, h.dlogits);
      off = 0;
      for (const Matrix& layer : dm.layers) {
        for (std::size_t i = 0; i < layer.size(); ++i) grad[off + i] += h_weight * 0.5 * layer.data()[i];
        off += layer.size();
      }
    }
    double norm2 = 0.0;
    for (std::size_t u = 0; u < d; ++u) {
      const double g = grad[u] + cfg.weight_decay * res.z[u];
      velocity[u] = t == 1 ? g : cfg.momentum * velocity[u] + g;
      double z = res.z[u] - cfg.lr * velocity[u];
      if (cfg.clamp) z = std::clamp(z, -1.0, 1.0);
      res.z[u] = z;
      norm2 += z * z;
    }
    res.steps_run = t;
    res.energy_trace.push_back(energy(store, res.z));
    if (!std::isfinite(norm2) || std::sqrt(norm2) > limit) {
      res.diverged = true;
      break;
    }
  }
  res.mask = mask_from_spins(res.z, shapes);
  return res;
}

}  // namespace supsup
