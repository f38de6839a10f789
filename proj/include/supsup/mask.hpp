#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "supsup/tensor.hpp"

namespace supsup {

/// Binary mask over the maskable units of a FixedNet: one 0/1 byte matrix per
/// mask layer (weight matrices, or 1 x width rows for layer-output masks).
class Supermask {
 public:
  Supermask() = default;
  explicit Supermask(std::vector<Shape> shapes, std::uint8_t fill = 0);

  std::size_t num_layers() const { return shapes_.size(); }
  const std::vector<Shape>& shapes() const { return shapes_; }
  const Shape& shape(std::size_t l) const { return shapes_[l]; }

  std::span<std::uint8_t> layer(std::size_t l) { return layers_[l]; }
  std::span<const std::uint8_t> layer(std::size_t l) const { return layers_[l]; }

  std::uint8_t at(std::size_t l, std::size_t r, std::size_t c) const {
    return layers_[l][r * shapes_[l].cols + c];
  }
  void set(std::size_t l, std::size_t r, std::size_t c, bool on) {
    layers_[l][r * shapes_[l].cols + c] = on ? 1 : 0;
  }

  std::size_t count_ones(std::size_t l) const;
  /// Fraction of ones in layer l.
  double density(std::size_t l) const;
  std::size_t total_units() const;

  friend bool operator==(const Supermask&, const Supermask&) = default;

 private:
  std::vector<Shape> shapes_;
  std::vector<std::vector<std::uint8_t>> layers_;
};

/// Real-valued per-layer mask values: a relaxed or superposed mask.
struct MaskMix {
  std::vector<Matrix> layers;
};

MaskMix mix_of(const Supermask& mask);

/// Sum_i alpha_i * masks[i]. Shapes must agree.
MaskMix superpose(std::span<const Supermask> masks, std::span<const double> alpha);

/// Ordered masks plus simplex coefficients over them.
struct MaskBank {
  std::vector<Supermask> masks;
  std::vector<double> alpha;

  std::size_t size() const { return masks.size(); }
  void add(Supermask mask);
  /// alpha = 1/k everywhere.
  void reset_uniform();
  /// Throws InvalidStateError for an empty bank and DomainError when alpha is
  /// off the simplex (negative entries or |sum - 1| > 1e-9).
  void check_simplex() const;
};

}  // namespace supsup
