#pragma once

// Small trained banks on separable synthetic tasks, shared by the unit and
// acceptance tests.

#include <limits>
#include <vector>

#include "oracles.hpp"
#include "supsup/data.hpp"
#include "supsup/mask_train.hpp"
#include "supsup/net.hpp"

namespace supsup::fixture {

struct SeparableBank {
  std::vector<TaskDataset> tasks;
  FixedNet net;
  std::vector<Supermask> masks;
};

struct BankParams {
  std::size_t tasks = 3;
  std::size_t dim = 20;
  std::size_t classes = 4;
  std::size_t hidden = 64;
  std::size_t outputs = 10;
  std::size_t steps = 300;
  std::uint64_t seed = 1;
};

inline SeparableBank make_separable_bank(const BankParams& params) {
  SyntheticConfig sc;
  sc.tasks = params.tasks;
  sc.dim = params.dim;
  sc.classes = params.classes;
  sc.train_per_class = 300;
  sc.test_per_class = 100;
  sc.seed = params.seed;
  sc.sigma = 0.3;
  sc.center_scale = 0.3;
  NetConfig nc;
  nc.layer_dims = {params.dim, params.hidden, params.hidden, params.outputs};
  nc.seed = params.seed + 100;
  nc.real_labels = params.classes;
  SeparableBank bank{make_synthetic(sc), build_fixed_net(nc), {}};
  TrainConfig tc;
  tc.steps = params.steps;
  tc.batch_size = 64;
  tc.optimizer.lr = 1e-2;
  for (std::size_t t = 0; t < params.tasks; ++t) {
    tc.seed = params.seed * 1000 + t;
    bank.masks.push_back(train_task(bank.net, bank.tasks[t], tc, default_scores(bank.net, tc.seed)));
  }
  return bank;
}

/// Exhaustive scan: the mask whose own forward pass gives the lowest mean
/// objective on x (lowest index on ties).
inline std::size_t min_objective_task(const FixedNet& net, const std::vector<Supermask>& masks,
                                      const Matrix& x, Objective obj) {
  std::size_t best = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < masks.size(); ++i) {
    std::vector<Matrix> mix;
    for (std::size_t l = 0; l < masks[i].num_layers(); ++l) {
      Matrix m(masks[i].shape(l).rows, masks[i].shape(l).cols);
      for (std::size_t j = 0; j < m.size(); ++j) m.data()[j] = masks[i].layer(l)[j];
      mix.push_back(std::move(m));
    }
    const double v = oracle::mean_objective(oracle::forward_logits(net, mix, x), obj);
    if (v < best_v) {
      best_v = v;
      best = i;
    }
  }
  return best;
}

inline MaskBank bank_of(const std::vector<Supermask>& masks) {
  MaskBank b;
  for (const Supermask& m : masks) b.add(m);
  return b;
}

}  // namespace supsup::fixture
