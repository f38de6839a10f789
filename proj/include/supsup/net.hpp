#pragma once

// Fixed random multilayer perceptron with signed-Kaiming-constant weights and
// no biases. Only masks are ever learned on top of it.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "supsup/mask.hpp"
#include "supsup/objectives.hpp"
#include "supsup/tensor.hpp"

namespace supsup {

enum class Nonlinearity { ReLU, Swish };

/// Where masks act: on individual weights, or on hidden-layer outputs.
enum class MaskPlacement { Weights, LayerOutputs };

/// Non-affine, per-batch statistics when enabled.
enum class Normalization { None, BatchNorm };

inline constexpr double kBatchNormEps = 1e-5;

struct NetConfig {
  /// Input width, hidden widths..., output size s.
  std::vector<std::size_t> layer_dims;
  std::uint64_t seed = 0;
  Nonlinearity nonlinearity = Nonlinearity::ReLU;
  MaskPlacement placement = MaskPlacement::Weights;
  Normalization normalization = Normalization::None;
  /// Number of real classes; neurons past it are s-neurons. 0 means "all".
  std::size_t real_labels = 0;

  std::size_t num_layers() const { return layer_dims.size() - 1; }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t effective_real_labels() const { return real_labels == 0 ? output_dim() : real_labels; }

  /// Throws ConfigError when dims are too few or zero, or real_labels > output size.
  void validate() const;
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

class FixedNet {
 public:
  const NetConfig& config() const { return config_; }
  std::size_t num_layers() const { return weights_.size(); }
  /// fan_in x fan_out, entries exactly +-constant(l).
  const Matrix& weight(std::size_t l) const { return weights_[l]; }
  /// sqrt(2 / fan_in) of layer l.
  double constant(std::size_t l) const { return constants_[l]; }
  std::size_t real_labels() const { return config_.effective_real_labels(); }
  std::size_t output_dim() const { return config_.output_dim(); }
  std::size_t input_dim() const { return config_.input_dim(); }

  /// Shapes of the mask layers for this net's placement.
  std::vector<Shape> mask_shapes() const;
  /// Fan-in of the weights feeding mask layer l.
  std::size_t mask_fan_in(std::size_t l) const { return config_.layer_dims[l]; }

  /// A net over caller-provided weights (e.g. a trained BatchE trunk). The
  /// signed-constant invariant does not hold for such nets.
  static FixedNet with_weights(const NetConfig& config, std::vector<Matrix> weights);

  friend FixedNet build_fixed_net(const NetConfig& config);
  friend bool operator==(const FixedNet&, const FixedNet&) = default;

 private:
  NetConfig config_;
  std::vector<Matrix> weights_;
  std::vector<double> constants_;
};

/// Builds W from the seed: each entry is +c_l or -c_l with equal probability.
FixedNet build_fixed_net(const NetConfig& config);

struct LayerCache {
  Matrix input;       ///< activations entering the layer
  Matrix pre;         ///< input * W_eff
  Matrix normalized;  ///< batch-normalized pre (BatchNorm only)
  std::vector<double> inv_std;
  Matrix gated;       ///< value fed to the nonlinearity (hidden layers)
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  /// W_l (*) mix_l per layer; empty for LayerOutputs placement.
  std::vector<Matrix> effective_weights;
  Matrix logits;
  Matrix probs;
};

/// Forward pass with real-valued mask values `mix` (one layer per mask shape).
ForwardCache forward(const FixedNet& net, const MaskMix& mix, const Matrix& x);

/// Gradient of a scalar loss w.r.t. every entry of `mix`, given dLoss/dlogits.
MaskMix backward_mix(const FixedNet& net, const MaskMix& mix, const ForwardCache& cache,
                     const Matrix& dlogits);

/// p = softmax(f(x, W (*) M)).
ForwardCache forward_masked(const FixedNet& net, const Supermask& mask, const Matrix& x);

/// p = softmax(f(x, W (*) sum_i alpha_i M^i)).
ForwardCache forward_superposed(const FixedNet& net, const MaskBank& bank, const Matrix& x);

/// d Objective / d alpha_i at bank.alpha; objective averaged over the rows of x.
std::vector<double> grad_alpha(const FixedNet& net, const MaskBank& bank, const Matrix& x,
                               Objective objective);

/// Throws DimensionError unless mask layers match the net's mask shapes.
void check_mask_shapes(const FixedNet& net, const std::vector<Shape>& shapes);

}  // namespace supsup
