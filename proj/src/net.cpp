#include "supsup/net.hpp"

#include <cmath>
#include <string>

#include "supsup/errors.hpp"
#include "supsup/kernels.hpp"
#include "supsup/rng.hpp"

namespace supsup {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double activate(Nonlinearity f, double x) {
  return f == Nonlinearity::ReLU ? (x > 0.0 ? x : 0.0) : x * sigmoid(x);
}

double activate_grad(Nonlinearity f, double x) {
  if (f == Nonlinearity::ReLU) return x > 0.0 ? 1.0 : 0.0;
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

void batch_norm(const Matrix& z, Matrix& out, std::vector<double>& inv_std) {
  const std::size_t b = z.rows();
  const std::size_t n = z.cols();
  out = Matrix(b, n);
  inv_std.assign(n, 0.0);
  std::vector<double> mean(n, 0.0);
  for (std::size_t r = 0; r < b; ++r)
    for (std::size_t c = 0; c < n; ++c) mean[c] += z(r, c);
  for (double& m : mean) m /= static_cast<double>(b);
  std::vector<double> var(n, 0.0);
  for (std::size_t r = 0; r < b; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const double d = z(r, c) - mean[c];
      var[c] += d * d;
    }
  for (std::size_t c = 0; c < n; ++c)
    inv_std[c] = 1.0 / std::sqrt(var[c] / static_cast<double>(b) + kBatchNormEps);
  for (std::size_t r = 0; r < b; ++r)
    for (std::size_t c = 0; c < n; ++c) out(r, c) = (z(r, c) - mean[c]) * inv_std[c];
}

// dz = inv_std / B * (B dy - sum(dy) - y * sum(dy * y)), columnwise.
Matrix batch_norm_backward(const Matrix& dy, const Matrix& y, const std::vector<double>& inv_std) {
  const std::size_t b = dy.rows();
  const std::size_t n = dy.cols();
  std::vector<double> sum_dy(n, 0.0), sum_dyy(n, 0.0);
  for (std::size_t r = 0; r < b; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      sum_dy[c] += dy(r, c);
      sum_dyy[c] += dy(r, c) * y(r, c);
    }
  const double bd = static_cast<double>(b);
  Matrix dz(b, n);
  for (std::size_t r = 0; r < b; ++r)
    for (std::size_t c = 0; c < n; ++c)
      dz(r, c) = inv_std[c] / bd * (bd * dy(r, c) - sum_dy[c] - y(r, c) * sum_dyy[c]);
  return dz;
}

}  // namespace

void NetConfig::validate() const {
  if (layer_dims.size() < 2) throw ConfigError("layer_dims needs at least input and output sizes");
  for (std::size_t d : layer_dims)
    if (d == 0) throw ConfigError("layer_dims entries must be >= 1");
  if (real_labels > output_dim())
    throw ConfigError("real_labels (" + std::to_string(real_labels) + ") exceeds output size (" +
                      std::to_string(output_dim()) + ")");
}

std::vector<Shape> FixedNet::mask_shapes() const {
  std::vector<Shape> shapes;
  if (config_.placement == MaskPlacement::Weights) {
    for (const Matrix& w : weights_) shapes.push_back({w.rows(), w.cols()});
  } else {
    for (std::size_t l = 0; l + 1 < weights_.size(); ++l) shapes.push_back({1, weights_[l].cols()});
  }
  return shapes;
}

FixedNet build_fixed_net(const NetConfig& config) {
  config.validate();
  FixedNet net;
  net.config_ = config;
  for (std::size_t l = 0; l < config.num_layers(); ++l) {
    const std::size_t fan_in = config.layer_dims[l];
    const std::size_t fan_out = config.layer_dims[l + 1];
    const double c = std::sqrt(2.0 / static_cast<double>(fan_in));
    Rng rng(derive_seed(config.seed, seed_tag::kWeights, l));
    Matrix w(fan_in, fan_out);
    for (double& v : w.flat()) v = (rng() >> 63) ? c : -c;
    net.weights_.push_back(std::move(w));
    net.constants_.push_back(c);
  }
  return net;
}

FixedNet FixedNet::with_weights(const NetConfig& config, std::vector<Matrix> weights) {
  config.validate();
  if (weights.size() != config.num_layers()) throw DimensionError("with_weights: layer count mismatch");
  FixedNet net;
  net.config_ = config;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != config.layer_dims[l] || weights[l].cols() != config.layer_dims[l + 1])
      throw DimensionError("with_weights: layer " + std::to_string(l) + " has the wrong shape");
    net.constants_.push_back(std::sqrt(2.0 / static_cast<double>(config.layer_dims[l])));
  }
  net.weights_ = std::move(weights);
  return net;
}

void check_mask_shapes(const FixedNet& net, const std::vector<Shape>& shapes) {
  if (shapes != net.mask_shapes()) throw DimensionError("mask shapes do not match the network");
}

ForwardCache forward(const FixedNet& net, const MaskMix& mix, const Matrix& x) {
  const NetConfig& cfg = net.config();
  if (x.cols() != cfg.input_dim())
    throw DimensionError("forward: input width " + std::to_string(x.cols()) + " != " +
                         std::to_string(cfg.input_dim()));
  const auto shapes = net.mask_shapes();
  if (mix.layers.size() != shapes.size()) throw DimensionError("forward: mask layer count mismatch");
  for (std::size_t l = 0; l < shapes.size(); ++l)
    if (mix.layers[l].rows() != shapes[l].rows || mix.layers[l].cols() != shapes[l].cols)
      throw DimensionError("forward: mask layer " + std::to_string(l) + " has the wrong shape");

  const bool weight_masks = cfg.placement == MaskPlacement::Weights;
  const bool bn = cfg.normalization == Normalization::BatchNorm;
  const std::size_t L = net.num_layers();
  ForwardCache cache;
  cache.layers.resize(L);
  Matrix a = x;
  for (std::size_t l = 0; l < L; ++l) {
    LayerCache& lc = cache.layers[l];
    if (weight_masks) {
      cache.effective_weights.push_back(kernels::hadamard(net.weight(l), mix.layers[l]));
      lc.pre = kernels::matmul(a, cache.effective_weights.back());
    } else {
      lc.pre = kernels::matmul(a, net.weight(l));
    }
    lc.input = std::move(a);
    if (l + 1 == L) {
      cache.logits = lc.pre;
      break;
    }
    Matrix h;
    if (bn) {
      batch_norm(lc.pre, lc.normalized, lc.inv_std);
      h = lc.normalized;
    } else {
      h = lc.pre;
    }
    if (!weight_masks) {
      const auto gate = mix.layers[l].row(0);
      for (std::size_t r = 0; r < h.rows(); ++r) {
        auto hr = h.row(r);
        for (std::size_t c = 0; c < hr.size(); ++c) hr[c] *= gate[c];
      }
    }
    lc.gated = std::move(h);
    a = Matrix(lc.gated.rows(), lc.gated.cols());
    for (std::size_t i = 0; i < a.size(); ++i)
      a.data()[i] = activate(cfg.nonlinearity, lc.gated.data()[i]);
  }
  cache.probs = softmax_rows(cache.logits);
  return cache;
}

MaskMix backward_mix(const FixedNet& net, const MaskMix& mix, const ForwardCache& cache,
                     const Matrix& dlogits) {
  const NetConfig& cfg = net.config();
  const bool weight_masks = cfg.placement == MaskPlacement::Weights;
  const bool bn = cfg.normalization == Normalization::BatchNorm;
  const std::size_t L = net.num_layers();
  if (!dlogits.same_shape(cache.logits)) throw DimensionError("backward: dlogits shape mismatch");

  MaskMix grad;
  grad.layers.resize(mix.layers.size());
  Matrix dz = dlogits;
  for (std::size_t l = L; l-- > 0;) {
    const LayerCache& lc = cache.layers[l];
    if (weight_masks) {
      // d/dmix = (a^T dz) (*) W
      Matrix dw = kernels::matmul_tn(lc.input, dz);
      kernels::active().hadamard(dw.data(), net.weight(l).data(), dw.data(), dw.size());
      grad.layers[l] = std::move(dw);
    }
    if (l == 0) break;
    const Matrix& w_eff = weight_masks ? cache.effective_weights[l] : net.weight(l);
    Matrix dg = kernels::matmul_nt(dz, w_eff);
    const LayerCache& prev = cache.layers[l - 1];
    for (std::size_t i = 0; i < dg.size(); ++i)
      dg.data()[i] *= activate_grad(cfg.nonlinearity, prev.gated.data()[i]);
    Matrix dh;
    if (!weight_masks) {
      const Matrix& h = bn ? prev.normalized : prev.pre;
      const auto gate = mix.layers[l - 1].row(0);
      Matrix dgate(1, gate.size());
      dh = dg;
      for (std::size_t r = 0; r < dg.rows(); ++r) {
        for (std::size_t c = 0; c < gate.size(); ++c) {
          dgate(0, c) += dg(r, c) * h(r, c);
          dh(r, c) = dg(r, c) * gate[c];
        }
      }
      grad.layers[l - 1] = std::move(dgate);
    } else {
      dh = std::move(dg);
    }
    dz = bn ? batch_norm_backward(dh, prev.normalized, prev.inv_std) : std::move(dh);
  }
  return grad;
}

ForwardCache forward_masked(const FixedNet& net, const Supermask& mask, const Matrix& x) {
  check_mask_shapes(net, mask.shapes());
  return forward(net, mix_of(mask), x);
}

ForwardCache forward_superposed(const FixedNet& net, const MaskBank& bank, const Matrix& x) {
  bank.check_simplex();
  check_mask_shapes(net, bank.masks.front().shapes());
  return forward(net, superpose(bank.masks, bank.alpha), x);
}

std::vector<double> grad_alpha(const FixedNet& net, const MaskBank& bank, const Matrix& x,
                               Objective objective) {
  bank.check_simplex();
  check_mask_shapes(net, bank.masks.front().shapes());
  const MaskMix mix = superpose(bank.masks, bank.alpha);
  const ForwardCache cache = forward(net, mix, x);
  const LossAndGrad loss = objective_on_logits(cache.logits, objective, net.real_labels());
  const MaskMix dmix = backward_mix(net, mix, cache, loss.dlogits);
  // dObjective/dalpha_i = sum_l <dObjective/dmix_l, M^i_l>
  const auto& k = kernels::active();
  std::vector<double> g(bank.size(), 0.0);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    for (std::size_t l = 0; l < dmix.layers.size(); ++l) {
      g[i] += k.masked_sum(dmix.layers[l].data(), bank.masks[i].layer(l).data(),
                           dmix.layers[l].size());
    }
  }
  return g;
}

}  // namespace supsup
