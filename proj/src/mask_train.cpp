#include "supsup/mask_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "supsup/errors.hpp"
#include "supsup/kernels.hpp"
#include "supsup/rng.hpp"

namespace supsup {

std::vector<Shape> ScoreTensor::shapes() const {
  std::vector<Shape> s;
  for (const Matrix& m : layers) s.push_back({m.rows(), m.cols()});
  return s;
}

RmspropState make_rmsprop(const ScoreTensor& scores, RmspropConfig config) {
  RmspropState st{config, {}};
  for (const Matrix& m : scores.layers) st.square_avg.emplace_back(m.rows(), m.cols());
  return st;
}

Supermask binarize_threshold(const ScoreTensor& scores) {
  Supermask mask(scores.shapes());
  for (std::size_t l = 0; l < scores.layers.size(); ++l) {
    const auto s = scores.layers[l].flat();
    auto m = mask.layer(l);
    for (std::size_t i = 0; i < s.size(); ++i) m[i] = s[i] > 0.0 ? 1 : 0;
  }
  return mask;
}

Supermask binarize_topk(const ScoreTensor& scores, double keep_frac) {
  if (!(keep_frac > 0.0 && keep_frac <= 1.0)) throw ConfigError("keep_frac must lie in (0, 1]");
  Supermask mask(scores.shapes());
  for (std::size_t l = 0; l < scores.layers.size(); ++l) {
    const auto s = scores.layers[l].flat();
    const auto keep = static_cast<std::size_t>(std::llround(keep_frac * static_cast<double>(s.size())));
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto before = [&s](std::size_t a, std::size_t b) { return s[a] > s[b] || (s[a] == s[b] && a < b); };
    if (keep < idx.size()) std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(), before);
    auto m = mask.layer(l);
    for (std::size_t i = 0; i < std::min(keep, idx.size()); ++i) m[idx[i]] = 1;
  }
  return mask;
}

Supermask binarize(const ScoreTensor& scores) {
  return scores.rule == BinarizeRule::TopK ? binarize_topk(scores, scores.keep_frac)
                                           : binarize_threshold(scores);
}

std::vector<Matrix> score_gradient(const FixedNet& net, const ScoreTensor& scores, const Matrix& x,
                                   std::span<const int> labels) {
  check_mask_shapes(net, scores.shapes());
  const MaskMix mix = mix_of(binarize(scores));
  const ForwardCache cache = forward(net, mix, x);
  const LossAndGrad loss = cross_entropy(cache.logits, labels, net.real_labels());
  return backward_mix(net, mix, cache, loss.dlogits).layers;
}

void rmsprop_step(RmspropState& state, ScoreTensor& scores, const std::vector<Matrix>& grads) {
  if (grads.size() != scores.layers.size() || state.square_avg.size() != scores.layers.size())
    throw DimensionError("rmsprop_step: layer count mismatch");
  const auto& k = kernels::active();
  for (std::size_t l = 0; l < grads.size(); ++l) {
    if (!grads[l].same_shape(scores.layers[l]) || !state.square_avg[l].same_shape(scores.layers[l]))
      throw DimensionError("rmsprop_step: shape mismatch");
    k.rmsprop(scores.layers[l].data(), state.square_avg[l].data(), grads[l].data(), grads[l].size(),
              state.config.lr, state.config.decay, state.config.eps);
  }
}

ScoreTensor default_scores(const FixedNet& net, std::uint64_t seed) {
  ScoreTensor scores;
  const auto shapes = net.mask_shapes();
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const double b = std::sqrt(1.0 / static_cast<double>(net.mask_fan_in(l)));
    Rng rng(derive_seed(seed, seed_tag::kScores, l));
    Matrix m(shapes[l].rows, shapes[l].cols);
    for (double& v : m.flat()) v = (2.0 * uniform01(rng) - 1.0) * b;
    scores.layers.push_back(std::move(m));
  }
  return scores;
}

ScoreTensor transfer_init(std::span<const Supermask> priors, const FixedNet& net,
                          std::uint64_t fallback_seed) {
  if (priors.empty()) return default_scores(net, fallback_seed);
  const auto shapes = net.mask_shapes();
  ScoreTensor scores;
  const double inv = 1.0 / static_cast<double>(priors.size());
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    Matrix m(shapes[l].rows, shapes[l].cols);
    for (const Supermask& p : priors) {
      check_mask_shapes(net, p.shapes());
      const auto bits = p.layer(l);
      for (std::size_t i = 0; i < bits.size(); ++i) m.data()[i] += bits[i];
    }
    const double scale = inv * net.constant(l);
    for (double& v : m.flat()) v *= scale;
    scores.layers.push_back(std::move(m));
  }
  return scores;
}

BatchSampler::BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : n_(n), batch_size_(batch_size), rng_(derive_seed(seed, seed_tag::kBatches, 0)), order_(n) {
  if (n == 0) throw DataError("cannot sample batches from an empty dataset");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::iota(order_.begin(), order_.end(), 0);
  reshuffle();
}

void BatchSampler::reshuffle() {
  for (std::size_t i = n_; i > 1; --i) {
    const auto j = std::min(static_cast<std::size_t>(uniform01(rng_) * static_cast<double>(i)), i - 1);
    std::swap(order_[i - 1], order_[j]);
  }
  cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next() {
  std::vector<std::size_t> batch;
  batch.reserve(batch_size_);
  while (batch.size() < batch_size_) {
    if (cursor_ == n_) reshuffle();
    batch.push_back(order_[cursor_++]);
  }
  return batch;
}

MaskTrainer::MaskTrainer(const FixedNet& net, ScoreTensor init, RmspropConfig optimizer)
    : net_(&net), scores_(std::move(init)), state_(make_rmsprop(scores_, optimizer)) {
  check_mask_shapes(net, scores_.shapes());
}

double MaskTrainer::step(const Matrix& x, std::span<const int> labels) {
  const MaskMix mix = mix_of(binarize(scores_));
  const ForwardCache cache = forward(*net_, mix, x);
  const LossAndGrad loss = cross_entropy(cache.logits, labels, net_->real_labels());
  const MaskMix grad = backward_mix(*net_, mix, cache, loss.dlogits);
  rmsprop_step(state_, scores_, grad.layers);
  return loss.value;
}

Supermask train_task(const FixedNet& net, const TaskDataset& data, const TrainConfig& cfg,
                     ScoreTensor init) {
  if (data.size(Part::Train) == 0) throw DataError("train_task: empty training set");
  if (data.num_classes() > net.real_labels())
    throw DataError("train_task: task has more classes than the network's real outputs");
  MaskTrainer trainer(net, std::move(init), cfg.optimizer);
  if (cfg.steps == 0) return trainer.mask();
  BatchSampler sampler(data.size(Part::Train), cfg.batch_size, cfg.seed);
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    const auto rows = sampler.next();
    trainer.step(data.images(Part::Train, rows), data.labels(Part::Train, rows));
  }
  return trainer.mask();
}

}  // namespace supsup
