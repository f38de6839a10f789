#include "supsup/batche.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "supsup/errors.hpp"
#include "supsup/kernels.hpp"
#include "supsup/rng.hpp"

namespace supsup {
namespace {

struct Trace {
  std::vector<Matrix> inputs;     // a_l
  std::vector<Matrix> modulated;  // a_l (*) r_l
  std::vector<Matrix> projected;  // (a_l (*) r_l) W_l
  Matrix logits;
};

void scale_columns(Matrix& m, std::span<const double> v) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) row[j] *= v[j];
  }
}

Trace run_forward(const Matrix& x, const FixedNet& net, const FastWeights& fast) {
  check_fast_weights(net, fast);
  if (x.cols() != net.input_dim())
    throw DimensionError("batche_forward: input has " + std::to_string(x.cols()) +
                         " columns, trunk expects " + std::to_string(net.input_dim()));
  Trace t;
  Matrix a = x;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Matrix u = a;
    scale_columns(u, fast.r[l]);
    Matrix z = kernels::matmul(u, net.weight(l));
    t.inputs.push_back(std::move(a));
    t.modulated.push_back(std::move(u));
    t.projected.push_back(z);
    scale_columns(z, fast.s[l]);
    if (l + 1 < net.num_layers())
      for (double& v : z.flat()) v = std::max(v, 0.0);
    a = std::move(z);
  }
  t.logits = std::move(a);
  return t;
}

double row_objective(std::span<const double> p, BatchEObjective objective) {
  return objective == BatchEObjective::EntropyH ? entropy(p) : max_conf_metric(p);
}

void rmsprop(std::span<double> param, std::span<double> sq, std::span<const double> grad, double lr,
             const BatchETrainConfig& cfg) {
  kernels::active().rmsprop(param.data(), sq.data(), grad.data(), param.size(), lr, cfg.decay,
                            cfg.eps);
}

}  // namespace

SharedTrunk make_trunk(const NetConfig& config, TrunkProvenance provenance) {
  config.validate();
  if (config.nonlinearity != Nonlinearity::ReLU || config.placement != MaskPlacement::Weights ||
      config.normalization != Normalization::None)
    throw ConfigError("BatchE trunk must be a plain ReLU network");
  std::vector<Matrix> weights;
  for (std::size_t l = 0; l < config.num_layers(); ++l) {
    const std::size_t fan_in = config.layer_dims[l];
    Rng rng(derive_seed(config.seed, seed_tag::kWeights, l));
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    Matrix w(fan_in, config.layer_dims[l + 1]);
    for (double& v : w.flat()) v = normal(rng);
    weights.push_back(std::move(w));
  }
  return SharedTrunk{FixedNet::with_weights(config, std::move(weights)), provenance, false};
}

FastWeights init_fast_weights(const FixedNet& net, std::uint64_t seed) {
  Rng rng(derive_seed(seed, seed_tag::kFastWeights, 0));
  std::normal_distribution<double> normal(1.0, 0.1);
  FastWeights fw;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    std::vector<double> r(net.weight(l).rows()), s(net.weight(l).cols());
    for (double& v : r) v = normal(rng);
    for (double& v : s) v = normal(rng);
    fw.r.push_back(std::move(r));
    fw.s.push_back(std::move(s));
  }
  return fw;
}

void check_fast_weights(const FixedNet& net, const FastWeights& fast) {
  if (fast.r.size() != net.num_layers() || fast.s.size() != net.num_layers())
    throw DimensionError("fast weights have the wrong number of layers");
  for (std::size_t l = 0; l < net.num_layers(); ++l)
    if (fast.r[l].size() != net.weight(l).rows() || fast.s[l].size() != net.weight(l).cols())
      throw DimensionError("fast weights of layer " + std::to_string(l) + " do not fit the trunk");
}

Matrix batche_logits(const Matrix& x, const FixedNet& net, const FastWeights& fast) {
  return run_forward(x, net, fast).logits;
}

Matrix batche_forward(const Matrix& x, const FixedNet& net, const FastWeights& fast) {
  return softmax_rows(batche_logits(x, net, fast));
}

FastWeights batche_train_task(SharedTrunk& trunk, const TaskDataset& data,
                              const BatchETrainConfig& cfg) {
  if (data.size(Part::Train) == 0) throw DataError("batche_train_task: empty training set");
  if (data.num_classes() > trunk.net.real_labels())
    throw DataError("batche_train_task: task has more classes than the trunk's real outputs");
  const FixedNet& net0 = trunk.net;
  FastWeights fw = init_fast_weights(net0, cfg.seed);
  const bool train_trunk = !trunk.frozen && trunk.provenance == TrunkProvenance::TrainedOnFirstTask;
  trunk.frozen = true;
  if (cfg.steps == 0) return fw;

  const std::size_t layers = net0.num_layers();
  std::vector<Matrix> weights;
  for (std::size_t l = 0; l < layers; ++l) weights.push_back(net0.weight(l));
  FixedNet working = net0;
  std::vector<std::vector<double>> sq_r, sq_s;
  std::vector<Matrix> sq_w;
  for (std::size_t l = 0; l < layers; ++l) {
    sq_r.emplace_back(fw.r[l].size(), 0.0);
    sq_s.emplace_back(fw.s[l].size(), 0.0);
    sq_w.emplace_back(weights[l].rows(), weights[l].cols());
  }

  BatchSampler sampler(data.size(Part::Train), cfg.batch_size, derive_seed(cfg.seed, seed_tag::kBatches, 0));
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto rows = sampler.next();
    const Matrix x = data.images(Part::Train, rows);
    const auto labels = data.labels(Part::Train, rows);
    const Trace t = run_forward(x, working, fw);
    Matrix dz = cross_entropy(t.logits, labels, working.real_labels()).dlogits;
    for (std::size_t l = layers; l-- > 0;) {
      // z = P (*) s with P = U W, U = A (*) r.
      std::vector<double> ds(fw.s[l].size(), 0.0);
      Matrix dp = dz;
      for (std::size_t i = 0; i < dz.rows(); ++i) {
        const auto dzr = dz.row(i);
        const auto pr = t.projected[l].row(i);
        for (std::size_t j = 0; j < ds.size(); ++j) ds[j] += dzr[j] * pr[j];
      }
      scale_columns(dp, fw.s[l]);
      Matrix du = kernels::matmul_nt(dp, working.weight(l));
      if (train_trunk) {
        const Matrix dw = kernels::matmul_tn(t.modulated[l], dp);
        rmsprop(weights[l].flat(), sq_w[l].flat(), dw.flat(), cfg.trunk_lr, cfg);
      }
      std::vector<double> dr(fw.r[l].size(), 0.0);
      for (std::size_t i = 0; i < du.rows(); ++i) {
        const auto dur = du.row(i);
        const auto ar = t.inputs[l].row(i);
        for (std::size_t j = 0; j < dr.size(); ++j) dr[j] += dur[j] * ar[j];
      }
      if (l > 0) {
        Matrix da = std::move(du);
        scale_columns(da, fw.r[l]);
        // ReLU of the previous layer: a > 0 exactly where it was active.
        for (std::size_t i = 0; i < da.size(); ++i)
          if (t.inputs[l].data()[i] <= 0.0) da.data()[i] = 0.0;
        dz = std::move(da);
      }
      rmsprop(fw.r[l], sq_r[l], dr, cfg.lr, cfg);
      rmsprop(fw.s[l], sq_s[l], ds, cfg.lr, cfg);
    }
    if (train_trunk) working = FixedNet::with_weights(working.config(), weights);
  }
  if (train_trunk) trunk.net = std::move(working);
  return fw;
}

Matrix abatche_forward(const Matrix& x, const FixedNet& net, std::span<const FastWeights> bank,
                       std::size_t row_cap) {
  const std::size_t b = x.rows(), k = bank.size();
  if (b == 0 || k == 0) throw InvalidStateError("abatche_forward: needs a non-empty batch and bank");
  if (b * k > row_cap)
    throw ResourceError("ABatchE needs " + std::to_string(b * k) + " rows, cap is " +
                        std::to_string(row_cap));
  if (x.cols() != net.input_dim()) throw DimensionError("abatche_forward: input width mismatch");
  for (const FastWeights& fw : bank) check_fast_weights(net, fw);

  Matrix a = repeat_rows(x, k);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const Matrix& w = net.weight(l);
    Matrix r_tilde(b * k, w.rows()), s_tilde(b * k, w.cols());
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t row = b * i; row < b * (i + 1); ++row) {
        std::copy(bank[i].r[l].begin(), bank[i].r[l].end(), r_tilde.row(row).begin());
        std::copy(bank[i].s[l].begin(), bank[i].s[l].end(), s_tilde.row(row).begin());
      }
    Matrix z = kernels::matmul(kernels::hadamard(a, r_tilde), w);
    z = kernels::hadamard(z, s_tilde);
    if (l + 1 < net.num_layers())
      for (double& v : z.flat()) v = std::max(v, 0.0);
    a = std::move(z);
  }
  return softmax_rows(a);
}

InferenceResult abatche_infer(const Matrix& x, const FixedNet& net,
                              std::span<const FastWeights> bank, BatchEObjective objective,
                              std::size_t row_cap) {
  if (bank.size() == 1) return {0, 0};
  const Matrix p = abatche_forward(x, net, bank, row_cap);
  const std::size_t b = x.rows();
  std::vector<double> neg(bank.size(), 0.0);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    double sum = 0.0;
    for (std::size_t w = 0; w < b; ++w) sum += row_objective(p.row(b * i + w), objective);
    neg[i] = -sum;
  }
  return {argmax_lowest(neg), 1};
}

MaskMix batche_superposition(const FixedNet& net, std::span<const FastWeights> bank,
                             std::span<const double> alpha) {
  if (alpha.size() != bank.size()) throw DimensionError("batche_superposition: alpha size mismatch");
  MaskMix mix;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Matrix m(net.weight(l).rows(), net.weight(l).cols());
    for (std::size_t i = 0; i < bank.size(); ++i) {
      check_fast_weights(net, bank[i]);
      for (std::size_t u = 0; u < m.rows(); ++u) {
        const double ar = alpha[i] * bank[i].r[l][u];
        kernels::active().axpy(ar, bank[i].s[l].data(), m.row(u).data(), m.cols());
      }
    }
    mix.layers.push_back(std::move(m));
  }
  return mix;
}

InferenceResult batche_oneshot(const FixedNet& net, std::span<const FastWeights> bank,
                               const Matrix& x, Objective objective) {
  if (bank.empty()) throw InvalidStateError("batche_oneshot: empty bank");
  if (bank.size() == 1) return {0, 0};
  const std::vector<double> alpha(bank.size(), 1.0 / static_cast<double>(bank.size()));
  const MaskMix mix = batche_superposition(net, bank, alpha);
  const ForwardCache cache = forward(net, mix, x);
  const LossAndGrad loss = objective_on_logits(cache.logits, objective, net.real_labels());
  const MaskMix dmix = backward_mix(net, mix, cache, loss.dlogits);
  std::vector<double> neg(bank.size(), 0.0);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    double g = 0.0;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      const Matrix& d = dmix.layers[l];
      for (std::size_t u = 0; u < d.rows(); ++u)
        g += bank[i].r[l][u] * kernels::active().dot(d.row(u).data(), bank[i].s[l].data(), d.cols());
    }
    neg[i] = -g;
  }
  return {argmax_lowest(neg), 1};
}

}  // namespace supsup
