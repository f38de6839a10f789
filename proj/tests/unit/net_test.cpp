#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "supsup/errors.hpp"
#include "supsup/net.hpp"

using namespace supsup;

namespace {

NetConfig config(std::vector<std::size_t> dims, MaskPlacement placement = MaskPlacement::Weights,
                 Nonlinearity f = Nonlinearity::ReLU, Normalization norm = Normalization::None) {
  NetConfig c;
  c.layer_dims = std::move(dims);
  c.seed = 42;
  c.placement = placement;
  c.nonlinearity = f;
  c.normalization = norm;
  c.real_labels = 3;
  return c;
}

std::vector<Matrix> random_mix(const FixedNet& net, Rng& rng) {
  std::vector<Matrix> mix;
  for (const Shape& s : net.mask_shapes()) mix.push_back(oracle::random_matrix(s.rows, s.cols, rng, 0.0, 1.0));
  return mix;
}

}  // namespace

TEST(FixedNet, SignedKaimingConstant) {
  const FixedNet net = build_fixed_net(config({50, 40, 10}));
  for (std::size_t l = 0; l < 2; ++l) {
    const double c = std::sqrt(2.0 / static_cast<double>(net.weight(l).rows()));
    EXPECT_EQ(net.constant(l), c);
    std::size_t pos = 0;
    for (double w : net.weight(l).flat()) {
      ASSERT_TRUE(w == c || w == -c);
      pos += w > 0;
    }
    const double frac = static_cast<double>(pos) / static_cast<double>(net.weight(l).size());
    EXPECT_NEAR(frac, 0.5, 0.05);
  }
  EXPECT_EQ(net, build_fixed_net(config({50, 40, 10})));
  NetConfig other = config({50, 40, 10});
  other.seed = 43;
  EXPECT_NE(net.weight(0), build_fixed_net(other).weight(0));
}

TEST(FixedNet, ConfigValidation) {
  EXPECT_THROW(build_fixed_net(config({5})), ConfigError);
  EXPECT_THROW(build_fixed_net(config({5, 0, 3})), ConfigError);
  EXPECT_THROW(build_fixed_net(config({5, 2})), ConfigError);  // real_labels 3 > 2 outputs
}

TEST(FixedNet, MaskShapesPerPlacement) {
  const FixedNet w = build_fixed_net(config({6, 5, 4, 3}));
  EXPECT_EQ(w.mask_shapes(), (std::vector<Shape>{{6, 5}, {5, 4}, {4, 3}}));
  const FixedNet o = build_fixed_net(config({6, 5, 4, 3}, MaskPlacement::LayerOutputs));
  EXPECT_EQ(o.mask_shapes(), (std::vector<Shape>{{1, 5}, {1, 4}}));
}

TEST(Forward, MatchesExplicitProduct) {
  Rng rng(1);
  for (auto placement : {MaskPlacement::Weights, MaskPlacement::LayerOutputs})
    for (auto f : {Nonlinearity::ReLU, Nonlinearity::Swish})
      for (auto norm : {Normalization::None, Normalization::BatchNorm}) {
        const FixedNet net = build_fixed_net(config({7, 6, 5, 4}, placement, f, norm));
        const auto mix = random_mix(net, rng);
        const Matrix x = oracle::random_matrix(5, 7, rng);
        const ForwardCache cache = forward(net, MaskMix{mix}, x);
        EXPECT_LE(max_abs_diff(cache.logits, oracle::forward_logits(net, mix, x)), 1e-12);
      }
}

TEST(Forward, AllOnesMaskIsDenseNetwork) {
  const FixedNet net = build_fixed_net(config({4, 3, 3}));
  Rng rng(2);
  const Matrix x = oracle::random_matrix(2, 4, rng);
  const ForwardCache c = forward_masked(net, Supermask(net.mask_shapes(), 1), x);
  Matrix h = oracle::naive_matmul(x, net.weight(0));
  for (double& v : h.flat()) v = oracle::relu(v);
  EXPECT_LE(max_abs_diff(c.logits, oracle::naive_matmul(h, net.weight(1))), 1e-14);
}

TEST(Forward, RejectsBadShapes) {
  const FixedNet net = build_fixed_net(config({4, 3, 3}));
  EXPECT_THROW(forward_masked(net, Supermask(net.mask_shapes()), Matrix(2, 5)), DimensionError);
  EXPECT_THROW(forward_masked(net, Supermask({{4, 3}}), Matrix(2, 4)), DimensionError);
}

TEST(BackwardMix, MatchesFiniteDifferences) {
  Rng rng(3);
  for (auto placement : {MaskPlacement::Weights, MaskPlacement::LayerOutputs})
    for (auto norm : {Normalization::None, Normalization::BatchNorm}) {
      const FixedNet net = build_fixed_net(config({5, 4, 4, 6}, placement, Nonlinearity::Swish, norm));
      const auto mix = random_mix(net, rng);
      const Matrix x = oracle::random_matrix(4, 5, rng);
      const ForwardCache cache = forward(net, MaskMix{mix}, x);
      const LossAndGrad lg = objective_on_logits(cache.logits, Objective::Entropy, 3);
      const MaskMix grad = backward_mix(net, MaskMix{mix}, cache, lg.dlogits);
      for (std::size_t l = 0; l < mix.size(); ++l)
        for (std::size_t j = 0; j < mix[l].size(); ++j) {
          auto f = [&](double v) {
            auto m = mix;
            m[l].data()[j] = v;
            return oracle::mean_objective(oracle::forward_logits(net, m, x), Objective::Entropy);
          };
          const double fd = oracle::central_difference(f, mix[l].data()[j], 1e-5);
          EXPECT_NEAR(grad.layers[l].data()[j], fd, 1e-7 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST(Superposition, CornerEqualsSingleMask) {
  Rng rng(4);
  const FixedNet net = build_fixed_net(config({8, 6, 5}));
  MaskBank bank;
  for (int i = 0; i < 3; ++i) bank.add(oracle::random_mask(net.mask_shapes(), rng));
  const Matrix x = oracle::random_matrix(3, 8, rng);
  for (std::size_t j = 0; j < 3; ++j) {
    bank.alpha = {0.0, 0.0, 0.0};
    bank.alpha[j] = 1.0;
    const Matrix single = forward_masked(net, bank.masks[j], x).probs;
    EXPECT_LE(max_abs_diff(forward_superposed(net, bank, x).probs, single), 1e-12);
  }
}

TEST(GradAlpha, MatchesFiniteDifferences) {
  Rng rng(5);
  for (Objective obj : {Objective::Entropy, Objective::GSumExp}) {
    const FixedNet net = build_fixed_net(config({6, 5, 8}));
    MaskBank bank;
    for (int i = 0; i < 4; ++i) bank.add(oracle::random_mask(net.mask_shapes(), rng));
    const Matrix x = oracle::random_matrix(3, 6, rng);
    const auto g = grad_alpha(net, bank, x, obj);
    ASSERT_EQ(g.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
      auto f = [&](double v) {
        auto a = bank.alpha;
        a[i] = v;
        if (obj == Objective::Entropy) return oracle::superposed_objective(net, bank.masks, a, x, obj);
        // G's gradient treats the real neurons as constants: FD with their
        // logits frozen at the base point.
        std::vector<Matrix> mix;
        for (const Shape& s : net.mask_shapes()) mix.emplace_back(s.rows, s.cols);
        for (std::size_t m = 0; m < 4; ++m)
          for (std::size_t l = 0; l < mix.size(); ++l)
            for (std::size_t j = 0; j < mix[l].size(); ++j) mix[l].data()[j] += a[m] * bank.masks[m].layer(l)[j];
        Matrix y = oracle::forward_logits(net, mix, x);
        const Matrix y0 = forward_superposed(net, bank, x).logits;
        for (std::size_t r = 0; r < y.rows(); ++r)
          for (std::size_t c = 0; c < 3; ++c) y(r, c) = y0(r, c);
        return oracle::mean_objective(y, obj);
      };
      const double fd = oracle::central_difference(f, bank.alpha[i], 1e-4);
      EXPECT_LE(std::abs(g[i] - fd), 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(WithWeights, UsesGivenMatrices) {
  NetConfig c = config({3, 2});
  c.real_labels = 0;
  Matrix w(3, 2, 0.5);
  const FixedNet net = FixedNet::with_weights(c, {w});
  EXPECT_EQ(net.weight(0), w);
  EXPECT_THROW(FixedNet::with_weights(c, {Matrix(2, 2)}), DimensionError);
}
