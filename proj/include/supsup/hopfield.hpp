#pragma once

// Hopfield storage of layer-output masks: patterns z = 2m - 1 are attractors
// of the energy E(z) = -z^T Psi z, and masks are recovered by descending a
// scheduled mix of that energy and the output entropy.

#include <cstddef>
#include <span>
#include <vector>

#include "supsup/mask.hpp"
#include "supsup/net.hpp"
#include "supsup/tensor.hpp"

namespace supsup {

struct HopfieldStore {
  HopfieldStore() = default;
  explicit HopfieldStore(std::size_t d) : psi(d, d), mean(d, 0.0) {}

  std::size_t dim() const { return mean.size(); }

  Matrix psi;                 ///< symmetric d x d
  std::vector<double> mean;   ///< running mean of stored spins, in [-1, 1]
  std::size_t count = 0;      ///< stored patterns
};

enum class HopfieldRule { Hebbian, Storkey };

/// Psi += z z^T / d; count += 1.
void hebbian_update(HopfieldStore& store, std::span<const double> z);
/// Psi += (z z^T - z h^T - h z^T - I) / d with h = Psi z; count += 1.
void storkey_update(HopfieldStore& store, std::span<const double> z);
/// mean <- ((k-1)/k) mean + z / k with k the already-incremented count.
void update_mean(HopfieldStore& store, std::span<const double> z);
/// Applies the rule and the mean update for one mask.
void store_mask(HopfieldStore& store, const Supermask& mask, HopfieldRule rule);

/// E(z) = -z^T Psi z.
double energy(const HopfieldStore& store, std::span<const double> z);
/// dE/dz = -2 Psi z.
std::vector<double> energy_grad(const HopfieldStore& store, std::span<const double> z);

/// Concatenates the mask layers in network order and maps m -> 2m - 1.
std::vector<double> spins_from_mask(const Supermask& mask);
/// Sign binarization (ties -> +1) back into mask layers of the given shapes.
Supermask mask_from_spins(std::span<const double> z, const std::vector<Shape>& shapes);

struct RecoveryConfig {
  std::size_t steps = 30;      ///< T
  double gamma = 1.5e-3;       ///< strength of the Hopfield term
  double lr = 0.5e3;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  /// Project z onto [-1, 1]^d after each step.
  bool clamp = true;
  /// Scales the entropy term; 0 leaves a pure energy descent.
  double entropy_weight = 1.0;
};

struct RecoveryResult {
  Supermask mask;
  std::vector<double> z;
  /// ||z|| exceeded 10 sqrt(d); the returned mask is not trustworthy.
  bool diverged = false;
  std::size_t steps_run = 0;
  /// E(z) after each step.
  std::vector<double> energy_trace;
};

/// Hopfield recovery. z starts at the stored mean; step t (1..T) uses batch
/// (t-1) mod n and the objective (gamma t/T) E(z) + (1 - t/T) H(p) with
/// mask m = (z + 1) / 2. Momentum SGD with weight decay on z.
/// Requires a LayerOutputs net and a non-empty store.
RecoveryResult recover_mask(const HopfieldStore& store, const FixedNet& net,
                            std::span<const Matrix> batches, const RecoveryConfig& cfg);

}  // namespace supsup
