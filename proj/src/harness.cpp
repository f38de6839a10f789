#include "supsup/harness.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <optional>

#include "supsup/errors.hpp"
#include "supsup/rng.hpp"
#include "supsup/serialize.hpp"

namespace supsup {
namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::size_t> range(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> v(end - begin);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

ScoreTensor initial_scores(const FixedNet& net, std::span<const Supermask> priors, std::size_t index,
                           const ScenarioConfig& cfg) {
  const std::uint64_t seed = derive_seed(cfg.train.seed, seed_tag::kScores, index);
  ScoreTensor s = cfg.transfer ? transfer_init(priors, net, seed) : default_scores(net, seed);
  s.rule = cfg.rule;
  s.keep_frac = cfg.keep_frac;
  return s;
}

TrainConfig task_train_config(const TrainConfig& base, std::size_t index) {
  TrainConfig tc = base;
  tc.seed = derive_seed(base.seed, seed_tag::kBatches, index);
  return tc;
}

class GivenMaskModel : public TaskModel {
 public:
  GivenMaskModel(const FixedNet& net, std::span<const Supermask> masks) : net_(&net), masks_(masks) {}
  std::size_t infer_task(const Matrix&) const override {
    throw InvalidStateError("task identity is given in this scenario");
  }
  std::vector<int> classify(std::size_t task, const Matrix& x) const override {
    return predict_classes(forward_masked(*net_, masks_[task], x).logits, net_->real_labels());
  }

 private:
  const FixedNet* net_;
  std::span<const Supermask> masks_;
};

void check_tasks(const FixedNet& net, std::span<const TaskDataset> tasks) {
  if (tasks.empty()) throw ConfigError("at least one task is required");
  for (const TaskDataset& t : tasks) {
    if (t.input_dim() != net.input_dim())
      throw DimensionError("task input width " + std::to_string(t.input_dim()) + " != network input " +
                           std::to_string(net.input_dim()));
    if (t.num_classes() > net.real_labels())
      throw ConfigError("task has " + std::to_string(t.num_classes()) + " classes but the network has " +
                        std::to_string(net.real_labels()) + " real outputs");
  }
}

RunResult train_all(const FixedNet& net, std::span<const TaskDataset> tasks, const ScenarioConfig& cfg,
                    bool immediate_eval) {
  cfg.validate();
  check_tasks(net, tasks);
  RunResult res;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto start = Clock::now();
    ScoreTensor init = initial_scores(net, res.masks, t, cfg);
    res.masks.push_back(train_task(net, tasks[t], task_train_config(cfg.train, t), std::move(init)));
    if (immediate_eval) {
      GivenMaskModel model(net, res.masks);
      EvalOptions opts;
      opts.batch = cfg.eval_batch;
      opts.task_given = true;
      opts.owner = {t};
      res.immediate_accuracy.push_back(evaluate(model, tasks.subspan(t, 1), opts).accuracy[0]);
    }
    res.metrics.seconds.push_back(cfg.record_time ? since(start) : 0.0);
  }
  return res;
}

void fill_storage(MetricsRecord& m, std::span<const Supermask> masks) {
  m.masks = masks.size();
  m.bytes = bank_storage_bytes(masks);
}

}  // namespace

void ScenarioConfig::validate() const {
  if (scenario == Scenario::NNs && infer_alg != InferAlg::OneShot)
    throw ConfigError("NNs allocation is defined on the One-Shot gradient; use the one-shot algorithm");
  if (eval_batch == 0) throw ConfigError("evaluation batch size must be positive");
  if (train.batch_size == 0) throw ConfigError("training batch size must be positive");
  if (cadence == 0) throw ConfigError("decision cadence must be positive");
  if (mask_budget == 0) throw ConfigError("mask budget must be positive");
  if (!(eps >= 0.0)) throw ConfigError("epsilon must be non-negative");
  if (rule == BinarizeRule::TopK && !(keep_frac > 0.0 && keep_frac <= 1.0))
    throw ConfigError("top-k fraction must lie in (0, 1]");
  if (infer_alg == InferAlg::AlphaDescent && !(alpha_lr > 0.0))
    throw ConfigError("alpha learning rate must be positive");
  if (infer_alg == InferAlg::Gamma && !(gamma > 0.0 && gamma <= 0.5))
    throw ConfigError("gamma must lie in (0, 1/2]");
}

EvalResult evaluate(const TaskModel& model, std::span<const TaskDataset> tasks, const EvalOptions& opts) {
  if (opts.batch == 0) throw ConfigError("evaluation batch size must be positive");
  if (!opts.owner.empty() && opts.owner.size() != tasks.size())
    throw ConfigError("owner map must cover every task");
  EvalResult res;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const TaskDataset& data = tasks[t];
    const std::size_t expected = opts.owner.empty() ? t : opts.owner[t];
    const std::size_t n = data.size(Part::Test);
    std::size_t correct = 0, batches = 0, id_hits = 0;
    for (std::size_t start = 0; start < n; start += opts.batch) {
      const auto rows = range(start, std::min(n, start + opts.batch));
      const Matrix x = data.images(Part::Test, rows);
      const auto labels = data.labels(Part::Test, rows);
      std::size_t task = expected;
      if (!opts.task_given) {
        task = opts.granularity == Granularity::SingleImage ? model.infer_task(gather_rows(x, std::vector<std::size_t>{0}))
                                                            : model.infer_task(x);
      }
      ++batches;
      const bool hit = task == expected;
      id_hits += hit;
      if (!hit && !opts.shared_labels) continue;
      const auto pred = model.classify(task, x);
      for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
    }
    res.accuracy.push_back(n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n));
    res.id_accuracy.push_back(batches == 0 ? 0.0 : static_cast<double>(id_hits) / static_cast<double>(batches));
  }
  return res;
}

SupSupModel::SupSupModel(const FixedNet& net, std::vector<Supermask> masks, const ScenarioConfig& cfg)
    : net_(&net), cfg_(cfg) {
  for (Supermask& m : masks) {
    check_mask_shapes(net, m.shapes());
    bank_.add(std::move(m));
  }
}

std::size_t SupSupModel::infer_task(const Matrix& x) const {
  switch (cfg_.infer_alg) {
    case InferAlg::OneShot:
      return one_shot(*net_, bank_, x, cfg_.objective).task;
    case InferAlg::Binary:
      return binary_infer(*net_, bank_, x, cfg_.objective).task;
    case InferAlg::Gamma:
      return gamma_infer(*net_, bank_, x, cfg_.objective, std::max(cfg_.gamma, 1.0 / static_cast<double>(bank_.size()))).task;
    case InferAlg::AlphaDescent: {
      const auto r = alpha_descent(*net_, bank_, x, cfg_.objective, cfg_.alpha_lr, cfg_.alpha_steps);
      return argmax_lowest(r.alpha);
    }
  }
  throw ConfigError("unknown inference algorithm");
}

std::vector<int> SupSupModel::classify(std::size_t task, const Matrix& x) const {
  return predict_classes(forward_masked(*net_, bank_.masks.at(task), x).logits, net_->real_labels());
}

RunResult run_gg(const FixedNet& net, std::span<const TaskDataset> tasks, const ScenarioConfig& cfg) {
  RunResult res = train_all(net, tasks, cfg, true);
  const auto start = Clock::now();
  GivenMaskModel model(net, res.masks);
  EvalOptions opts;
  opts.batch = cfg.eval_batch;
  opts.task_given = true;
  const EvalResult ev = evaluate(model, tasks, opts);
  res.metrics.accuracy = ev.accuracy;
  res.metrics.id_accuracy = ev.id_accuracy;
  if (cfg.record_time && !res.metrics.seconds.empty()) res.metrics.seconds.back() += since(start);
  fill_storage(res.metrics, res.masks);
  res.metrics.finalize();
  return res;
}

RunResult run_gnu(const FixedNet& net, std::span<const TaskDataset> tasks, const ScenarioConfig& cfg) {
  RunResult res = train_all(net, tasks, cfg, false);
  const auto start = Clock::now();
  SupSupModel model(net, res.masks, cfg);
  EvalOptions opts;
  opts.granularity = cfg.granularity;
  opts.batch = cfg.eval_batch;
  opts.shared_labels = cfg.shared_labels;
  const EvalResult ev = evaluate(model, tasks, opts);
  res.metrics.accuracy = ev.accuracy;
  res.metrics.id_accuracy = ev.id_accuracy;
  if (cfg.record_time && !res.metrics.seconds.empty()) res.metrics.seconds.back() += since(start);
  fill_storage(res.metrics, res.masks);
  res.metrics.finalize();
  return res;
}

RunResult run_nns(const FixedNet& net, std::span<const TaskDataset> tasks, std::size_t batches_per_task,
                  const ScenarioConfig& cfg) {
  cfg.validate();
  check_tasks(net, tasks);
  std::vector<MaskTrainer> trainers;
  std::vector<Supermask> masks;
  // With one mask the criterion is degenerate (nu = [1]). Until a second
  // mask exists, mask 0 is compared against a reference mask trained in
  // lockstep on pixel-permuted copies of the same batches.
  std::optional<MaskTrainer> reference;
  const auto ref_perm = permutation_for_seed(net.input_dim(), derive_seed(cfg.train.seed, seed_tag::kReference, 0));
  MetricsRecord metrics;
  std::vector<std::vector<std::size_t>> usage(tasks.size());
  std::size_t current = 0;
  std::size_t global = 0;

  auto allocate = [&](std::size_t fallback) {
    if (trainers.size() >= cfg.mask_budget) {
      metrics.budget_exhausted = true;
      return fallback;
    }
    ScoreTensor init = initial_scores(net, masks, trainers.size(), cfg);
    trainers.emplace_back(net, std::move(init), cfg.train.optimizer);
    masks.push_back(trainers.back().mask());
    return trainers.size() - 1;
  };

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto start = Clock::now();
    usage[t].assign(cfg.mask_budget, 0);
    BatchSampler sampler(tasks[t].size(Part::Train), cfg.train.batch_size,
                         derive_seed(cfg.train.seed, seed_tag::kBatches, t));
    for (std::size_t b = 0; b < batches_per_task; ++b, ++global) {
      const auto rows = sampler.next();
      const Matrix x = tasks[t].images(Part::Train, rows);
      if (global % cfg.cadence == 0) {
        if (trainers.empty()) {
          current = allocate(0);
        } else {
          for (std::size_t i = 0; i < trainers.size(); ++i) masks[i] = trainers[i].mask();
          MaskBank bank;
          for (const Supermask& m : masks) bank.add(m);
          if (bank.size() == 1) bank.add(reference->mask());
          const auto grad = grad_alpha(net, bank, x, cfg.objective);
          const AllocationDecision d = nns_decision(grad, bank.size(), cfg.eps);
          const std::size_t best = argmax_lowest(d.nu);
          if (d.kind == AllocationDecision::Kind::UseMask && best < trainers.size()) current = best;
          else current = allocate(std::min(best, trainers.size() - 1));
        }
      }
      const auto labels = tasks[t].labels(Part::Train, rows);
      trainers[current].step(x, labels);
      if (trainers.size() == 1) {
        if (!reference) {
          ScoreTensor init = default_scores(net, derive_seed(cfg.train.seed, seed_tag::kReference, 1));
          init.rule = cfg.rule;
          init.keep_frac = cfg.keep_frac;
          reference.emplace(net, std::move(init), cfg.train.optimizer);
        }
        Matrix xp(x.rows(), x.cols());
        for (std::size_t r = 0; r < x.rows(); ++r)
          for (std::size_t c = 0; c < x.cols(); ++c) xp(r, c) = x(r, ref_perm[c]);
        reference->step(xp, labels);
      } else {
        reference.reset();
      }
      ++usage[t][current];
    }
    metrics.seconds.push_back(cfg.record_time ? since(start) : 0.0);
  }
  for (std::size_t i = 0; i < trainers.size(); ++i) masks[i] = trainers[i].mask();

  std::vector<std::size_t> owner(tasks.size());
  for (std::size_t t = 0; t < tasks.size(); ++t)
    owner[t] = static_cast<std::size_t>(std::max_element(usage[t].begin(), usage[t].end()) - usage[t].begin());
  const auto start = Clock::now();
  SupSupModel model(net, masks, cfg);
  EvalOptions opts;
  opts.granularity = cfg.granularity;
  opts.batch = cfg.eval_batch;
  opts.shared_labels = true;
  opts.owner = owner;
  const EvalResult ev = evaluate(model, tasks, opts);
  metrics.accuracy = ev.accuracy;
  metrics.id_accuracy = ev.id_accuracy;
  if (cfg.record_time && !metrics.seconds.empty()) metrics.seconds.back() += since(start);
  fill_storage(metrics, masks);
  metrics.finalize();
  return RunResult{std::move(metrics), std::move(masks), {}};
}

StorageReport storage_report(std::span<const Supermask> masks) {
  StorageReport r;
  r.masks = masks.size();
  r.bytes = bank_storage_bytes(masks);
  r.csv_row = "storage,,," + std::to_string(r.masks) + "," + std::to_string(r.bytes) + ",";
  return r;
}

std::size_t nearest_mask(const Supermask& probe, std::span<const Supermask> stored) {
  if (stored.empty()) throw InvalidStateError("nearest_mask: nothing stored");
  std::size_t best = 0, best_dist = SIZE_MAX;
  for (std::size_t i = 0; i < stored.size(); ++i) {
    if (stored[i].shapes() != probe.shapes()) throw DimensionError("nearest_mask: shape mismatch");
    std::size_t dist = 0;
    for (std::size_t l = 0; l < probe.num_layers(); ++l) {
      const auto a = probe.layer(l), b = stored[i].layer(l);
      for (std::size_t j = 0; j < a.size(); ++j) dist += a[j] != b[j];
    }
    if (dist < best_dist) {
      best = i;
      best_dist = dist;
    }
  }
  return best;
}

HopfieldRunResult run_hopfield(const FixedNet& net, std::span<const TaskDataset> tasks,
                               const HopfieldRunConfig& cfg) {
  if (net.config().placement != MaskPlacement::LayerOutputs)
    throw ConfigError("HopSupSup needs a network with layer-output masks");
  check_tasks(net, tasks);
  if (cfg.eval_batch == 0) throw ConfigError("evaluation batch size must be positive");
  const auto shapes = net.mask_shapes();
  std::size_t d = 0;
  for (const Shape& s : shapes) d += s.size();

  HopfieldRunResult res;
  res.store = HopfieldStore(d);
  ScenarioConfig sc;
  sc.train = cfg.train;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto start = Clock::now();
    ScoreTensor init = initial_scores(net, {}, t, sc);
    res.stored.push_back(train_task(net, tasks[t], task_train_config(cfg.train, t), std::move(init)));
    store_mask(res.store, res.stored.back(), cfg.rule);
    res.metrics.seconds.push_back(cfg.record_time ? since(start) : 0.0);
  }

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto start = Clock::now();
    const std::size_t n = tasks[t].size(Part::Test);
    std::vector<Matrix> batches;
    for (std::size_t s = 0; s < n; s += cfg.eval_batch)
      batches.push_back(tasks[t].images(Part::Test, range(s, std::min(n, s + cfg.eval_batch))));
    RecoveryResult rec = recover_mask(res.store, net, batches, cfg.recovery);
    const std::size_t sel = nearest_mask(rec.mask, res.stored);
    res.selected.push_back(sel);
    res.exact.push_back(rec.mask == res.stored[t]);
    res.diverged.push_back(rec.diverged);

    std::size_t correct = 0;
    for (std::size_t s = 0; s < n; s += cfg.eval_batch) {
      const auto rows = range(s, std::min(n, s + cfg.eval_batch));
      const auto pred =
          predict_classes(forward_masked(net, rec.mask, tasks[t].images(Part::Test, rows)).logits, net.real_labels());
      const auto labels = tasks[t].labels(Part::Test, rows);
      for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
    }
    res.metrics.accuracy.push_back(n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n));
    res.metrics.id_accuracy.push_back(sel == t ? 1.0 : 0.0);
    if (cfg.record_time) res.metrics.seconds[t] += since(start);
  }
  res.metrics.masks = tasks.size();
  // Psi and mean as f64 plus the network seed.
  res.metrics.bytes = 8 * (d * d + d) + 8;
  res.metrics.finalize();
  return res;
}

namespace {

class BatchEModel : public TaskModel {
 public:
  BatchEModel(const FixedNet& net, std::span<const FastWeights> bank, const AbatcheRunConfig& cfg)
      : net_(&net), bank_(bank), cfg_(&cfg) {}
  std::size_t infer_task(const Matrix& x) const override {
    return abatche_infer(x, *net_, bank_, cfg_->objective, cfg_->row_cap).task;
  }
  std::vector<int> classify(std::size_t task, const Matrix& x) const override {
    return predict_classes(batche_logits(x, *net_, bank_[task]), net_->real_labels());
  }

 private:
  const FixedNet* net_;
  std::span<const FastWeights> bank_;
  const AbatcheRunConfig* cfg_;
};

}  // namespace

AbatcheRunResult run_abatche(SharedTrunk trunk, std::span<const TaskDataset> tasks,
                             const AbatcheRunConfig& cfg) {
  check_tasks(trunk.net, tasks);
  if (cfg.eval_batch == 0) throw ConfigError("evaluation batch size must be positive");
  AbatcheRunResult res{{}, std::move(trunk), {}};
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto start = Clock::now();
    BatchETrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.train.seed, seed_tag::kFastWeights, t);
    res.bank.push_back(batche_train_task(res.trunk, tasks[t], tc));
    res.metrics.seconds.push_back(cfg.record_time ? since(start) : 0.0);
  }
  BatchEModel model(res.trunk.net, res.bank, cfg);
  EvalOptions opts;
  opts.granularity = Granularity::FullBatch;
  opts.batch = cfg.eval_batch;
  const EvalResult ev = evaluate(model, tasks, opts);
  res.metrics.accuracy = ev.accuracy;
  res.metrics.id_accuracy = ev.id_accuracy;
  res.metrics.masks = res.bank.size();
  std::size_t floats = 0;
  for (const FastWeights& fw : res.bank)
    for (std::size_t l = 0; l < fw.r.size(); ++l) floats += fw.r[l].size() + fw.s[l].size();
  // A trained trunk is not reproducible from its seed and is stored in full.
  if (res.trunk.provenance == TrunkProvenance::TrainedOnFirstTask)
    for (std::size_t l = 0; l < res.trunk.net.num_layers(); ++l) floats += res.trunk.net.weight(l).size();
  res.metrics.bytes = 8 * floats + 8;
  res.metrics.finalize();
  return res;
}

}  // namespace supsup
