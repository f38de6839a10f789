#include "supsup/mask.hpp"

#include <algorithm>
#include <cmath>

#include "supsup/errors.hpp"
#include "supsup/kernels.hpp"

namespace supsup {

Supermask::Supermask(std::vector<Shape> shapes, std::uint8_t fill) : shapes_(std::move(shapes)) {
  layers_.reserve(shapes_.size());
  for (const Shape& s : shapes_) layers_.emplace_back(s.size(), fill ? 1 : 0);
}

std::size_t Supermask::count_ones(std::size_t l) const {
  return static_cast<std::size_t>(std::count(layers_[l].begin(), layers_[l].end(), 1));
}

double Supermask::density(std::size_t l) const {
  const std::size_t n = shapes_[l].size();
  return n == 0 ? 0.0 : static_cast<double>(count_ones(l)) / static_cast<double>(n);
}

std::size_t Supermask::total_units() const {
  std::size_t n = 0;
  for (const Shape& s : shapes_) n += s.size();
  return n;
}

MaskMix mix_of(const Supermask& mask) {
  MaskMix mix;
  mix.layers.reserve(mask.num_layers());
  for (std::size_t l = 0; l < mask.num_layers(); ++l) {
    const Shape& s = mask.shape(l);
    Matrix m(s.rows, s.cols);
    const auto bits = mask.layer(l);
    for (std::size_t i = 0; i < bits.size(); ++i) m.data()[i] = bits[i];
    mix.layers.push_back(std::move(m));
  }
  return mix;
}

MaskMix superpose(std::span<const Supermask> masks, std::span<const double> alpha) {
  if (masks.empty()) throw InvalidStateError("superpose: no masks");
  if (masks.size() != alpha.size()) throw DimensionError("superpose: alpha length != mask count");
  const auto& k = kernels::active();
  MaskMix mix;
  for (const Shape& s : masks[0].shapes()) mix.layers.emplace_back(s.rows, s.cols);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].shapes() != masks[0].shapes()) throw DimensionError("superpose: mask shapes differ");
    if (alpha[i] == 0.0) continue;
    for (std::size_t l = 0; l < mix.layers.size(); ++l) {
      k.axpy_mask(alpha[i], masks[i].layer(l).data(), mix.layers[l].data(), mix.layers[l].size());
    }
  }
  return mix;
}

void MaskBank::add(Supermask mask) {
  if (!masks.empty() && mask.shapes() != masks.front().shapes())
    throw DimensionError("MaskBank::add: mask shape differs from bank");
  masks.push_back(std::move(mask));
  reset_uniform();
}

void MaskBank::reset_uniform() {
  alpha.assign(masks.size(), masks.empty() ? 0.0 : 1.0 / static_cast<double>(masks.size()));
}

void MaskBank::check_simplex() const {
  if (masks.empty()) throw InvalidStateError("mask bank is empty");
  if (alpha.size() != masks.size()) throw DimensionError("alpha length != mask count");
  double sum = 0.0;
  for (double a : alpha) {
    if (!(a >= 0.0)) throw DomainError("alpha has a negative or NaN entry");
    sum += a;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DomainError("alpha does not sum to one");
}

}  // namespace supsup
