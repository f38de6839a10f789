#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "supsup/errors.hpp"
#include "supsup/harness.hpp"
#include "supsup/serialize.hpp"

namespace supsup::cli {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::string dataset;
  std::size_t tasks = 10;
  std::uint64_t seed = 1;
  std::string arch = "lenet-300-100";
  std::size_t outputs = 0;
  std::size_t classes = 0;
  std::string objective;
  std::string infer = "oneshot";
  double gamma = 0.5;
  double eps = 0.125;
  std::size_t steps = 1000;
  std::size_t batch = 128;
  double lr = 1e-4;
  std::string data_dir;
  std::string out = "supsup_out";
  std::string mask_alg = "threshold0";
  double topk_frac = 0.5;
  bool transfer = false;
  std::string granularity = "single";
  std::size_t eval_batch = 128;
  std::size_t cadence = 100;
  std::size_t budget = 2500;
  std::size_t batches_per_task = 1000;
  double rotation_step = 10.0;
  bool record_time = false;
  std::string rule = "storkey";
  std::size_t recovery_steps = 30;
  double recovery_lr = 500.0;
  std::string trunk = "trained-first";
  std::string config;
  std::string in;
  std::string mask_out;
  std::size_t task = 0;
};

template <class T>
T pick(const std::string& key, const std::string& value, std::initializer_list<std::pair<const char*, T>> table) {
  for (const auto& [name, v] : table)
    if (value == name) return v;
  throw ConfigError("unknown " + key + " '" + value + "'");
}

std::vector<std::size_t> arch_dims(const Options& o, std::size_t classes) {
  std::vector<std::size_t> dims;
  std::size_t default_s = 0;
  if (o.arch == "lenet-300-100") {
    dims = {784, 300, 100};
    default_s = 100;
  } else if (o.arch == "fc-1024-1024") {
    dims = {784, 1024, 1024};
    default_s = 500;
  } else {
    throw ConfigError("unknown arch '" + o.arch + "' (lenet-300-100 or fc-1024-1024)");
  }
  dims.push_back(o.outputs == 0 ? std::max(default_s, classes) : o.outputs);
  return dims;
}

std::shared_ptr<const BaseDataset> mnist(const Options& o) {
  const auto files = find_mnist(o.data_dir);
  if (!files)
    throw DataError("MNIST files not found in " + (o.data_dir.empty() ? std::string("$SUPSUP_DATA_DIR") : o.data_dir));
  return std::make_shared<const BaseDataset>(load_mnist(*files));
}

std::vector<TaskDataset> build_tasks(const Options& o, std::size_t default_classes, std::size_t& classes) {
  if (o.tasks == 0) throw ConfigError("--tasks must be at least 1");
  std::vector<TaskDataset> tasks;
  if (o.dataset == "synthetic") {
    SyntheticConfig sc;
    sc.tasks = o.tasks;
    sc.dim = 784;
    sc.classes = o.classes == 0 ? default_classes : o.classes;
    sc.train_per_class = 500;
    sc.test_per_class = 100;
    sc.sigma = 0.3;
    sc.center_scale = 0.3;
    sc.seed = o.seed;
    classes = sc.classes;
    return make_synthetic(sc);
  }
  if (o.dataset == "mnist-permuted") {
    const auto base = mnist(o);
    for (std::size_t t = 0; t < o.tasks; ++t)
      tasks.push_back(make_permuted(base, derive_seed(o.seed, seed_tag::kPermutation, t)));
    classes = 10;
  } else if (o.dataset == "mnist-rotated") {
    const auto base = mnist(o);
    for (std::size_t t = 0; t < o.tasks; ++t) tasks.push_back(make_rotated(base, o.rotation_step * static_cast<double>(t)));
    classes = 10;
  } else if (o.dataset == "mnist-split") {
    if (o.tasks > 5) throw ConfigError("mnist-split has at most 5 tasks");
    const auto base = mnist(o);
    for (int t = 0; t < static_cast<int>(o.tasks); ++t) tasks.push_back(make_split(base, {2 * t, 2 * t + 1}));
    classes = 2;
  } else {
    throw ConfigError("unknown dataset '" + o.dataset + "'");
  }
  return tasks;
}

TrainConfig train_config(const Options& o) {
  if (o.batch == 0) throw ConfigError("--batch must be positive");
  if (!(o.lr > 0.0)) throw ConfigError("--lr must be positive");
  TrainConfig tc;
  tc.steps = o.steps;
  tc.batch_size = o.batch;
  tc.optimizer.lr = o.lr;
  tc.seed = o.seed;
  return tc;
}

ScenarioConfig scenario_config(const Options& o, Scenario s) {
  ScenarioConfig c;
  c.scenario = s;
  c.infer_alg = pick<InferAlg>("infer algorithm", o.infer,
                               {{"oneshot", InferAlg::OneShot},
                                {"binary", InferAlg::Binary},
                                {"gamma", InferAlg::Gamma},
                                {"alpha", InferAlg::AlphaDescent}});
  c.gamma = o.gamma;
  const std::string obj = o.objective.empty() ? (s == Scenario::NNs ? "H" : "G") : o.objective;
  c.objective = pick<Objective>("objective", obj, {{"H", Objective::Entropy}, {"G", Objective::GSumExp}});
  c.granularity = pick<Granularity>("granularity", o.granularity,
                                    {{"single", Granularity::SingleImage}, {"batch", Granularity::FullBatch}});
  c.train = train_config(o);
  c.rule = pick<BinarizeRule>("mask-alg", o.mask_alg, {{"threshold0", BinarizeRule::Threshold0}, {"topk", BinarizeRule::TopK}});
  c.keep_frac = o.topk_frac;
  c.transfer = o.transfer;
  c.eval_batch = o.eval_batch;
  c.eps = o.eps;
  c.cadence = o.cadence;
  c.mask_budget = o.budget;
  c.record_time = o.record_time;
  c.validate();
  return c;
}

fs::path prepare_out(const Options& o) {
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw DataError("cannot create output directory " + o.out + ": " + ec.message());
  return fs::path(o.out);
}

void write_csv(const fs::path& dir, const MetricsRecord& m) {
  std::ofstream f(dir / "metrics.csv", std::ios::binary);
  if (!f) throw DataError("cannot write " + (dir / "metrics.csv").string());
  write_metrics_csv(f, m);
}

void summarize(std::ostream& out, const MetricsRecord& m, const fs::path& dir) {
  out << "mean accuracy " << csv_number(m.mean_accuracy) << ", task id accuracy " << csv_number(m.mean_id_accuracy)
      << ", masks " << m.masks << ", bytes " << m.bytes;
  if (m.budget_exhausted) out << ", mask budget exhausted";
  out << "\nwrote " << (dir / "metrics.csv").string() << "\n";
}

int run_scenario(const Options& o, Scenario s, std::ostream& out) {
  const ScenarioConfig cfg = scenario_config(o, s);
  arch_dims(o, 0);
  std::size_t classes = 0;
  const auto tasks = build_tasks(o, 10, classes);
  NetConfig nc;
  nc.layer_dims = arch_dims(o, classes);
  nc.seed = derive_seed(o.seed, seed_tag::kWeights, 0);
  nc.real_labels = classes;
  const FixedNet net = build_fixed_net(nc);
  const fs::path dir = prepare_out(o);
  RunResult r;
  switch (s) {
    case Scenario::GG: r = run_gg(net, tasks, cfg); break;
    case Scenario::GNu: r = run_gnu(net, tasks, cfg); break;
    case Scenario::NNs: r = run_nns(net, tasks, o.batches_per_task, cfg); break;
  }
  write_csv(dir, r.metrics);
  write_file(dir / "snapshot.bin", serialize_snapshot(Snapshot{nc, r.masks, std::nullopt}));
  summarize(out, r.metrics, dir);
  out << storage_report(r.masks).csv_row << "\n";
  return kExitOk;
}

int run_hopfield_cmd(const Options& o, std::ostream& out) {
  arch_dims(o, 0);
  std::size_t classes = 0;
  const auto tasks = build_tasks(o, 2, classes);
  NetConfig nc;
  nc.layer_dims = arch_dims(o, classes);
  nc.seed = derive_seed(o.seed, seed_tag::kWeights, 0);
  nc.real_labels = classes;
  nc.nonlinearity = Nonlinearity::Swish;
  nc.placement = MaskPlacement::LayerOutputs;
  nc.normalization = Normalization::BatchNorm;
  const FixedNet net = build_fixed_net(nc);
  HopfieldRunConfig cfg;
  cfg.train = train_config(o);
  cfg.rule = pick<HopfieldRule>("rule", o.rule, {{"storkey", HopfieldRule::Storkey}, {"hebbian", HopfieldRule::Hebbian}});
  cfg.recovery.steps = o.recovery_steps;
  cfg.recovery.lr = o.recovery_lr;
  cfg.eval_batch = o.eval_batch;
  cfg.record_time = o.record_time;
  const fs::path dir = prepare_out(o);
  const HopfieldRunResult r = run_hopfield(net, tasks, cfg);
  write_csv(dir, r.metrics);
  write_file(dir / "snapshot.bin", serialize_snapshot(Snapshot{nc, {}, r.store}));
  for (std::size_t t = 0; t < tasks.size(); ++t)
    out << "task " << t << ": recovered mask nearest to " << r.selected[t] << (r.exact[t] ? " (exact)" : "")
        << (r.diverged[t] ? " (diverged)" : "") << "\n";
  summarize(out, r.metrics, dir);
  return kExitOk;
}

int run_abatche_cmd(const Options& o, std::ostream& out) {
  arch_dims(o, 0);
  std::size_t classes = 0;
  const auto tasks = build_tasks(o, 10, classes);
  NetConfig nc;
  nc.layer_dims = arch_dims(o, classes);
  nc.seed = derive_seed(o.seed, seed_tag::kWeights, 0);
  nc.real_labels = classes;
  const auto provenance = pick<TrunkProvenance>(
      "trunk", o.trunk, {{"trained-first", TrunkProvenance::TrainedOnFirstTask}, {"random", TrunkProvenance::Random}});
  AbatcheRunConfig cfg;
  cfg.train.steps = o.steps;
  cfg.train.batch_size = o.batch;
  cfg.train.seed = o.seed;
  cfg.objective = pick<BatchEObjective>("objective", o.objective.empty() ? "H" : o.objective,
                                        {{"H", BatchEObjective::EntropyH}, {"M", BatchEObjective::MaxConf}});
  cfg.eval_batch = o.eval_batch;
  cfg.record_time = o.record_time;
  if (o.batch == 0 || o.eval_batch == 0) throw ConfigError("batch sizes must be positive");
  const fs::path dir = prepare_out(o);
  const AbatcheRunResult r = run_abatche(make_trunk(nc, provenance), tasks, cfg);
  write_csv(dir, r.metrics);
  summarize(out, r.metrics, dir);
  return kExitOk;
}

int run_export(const Options& o, std::ostream& out) {
  if (o.in.empty()) throw ConfigError("--in is required");
  const Snapshot snap = deserialize_snapshot(read_file(o.in));
  if (o.task >= snap.masks.size())
    throw ConfigError("--task " + std::to_string(o.task) + " out of range: snapshot holds " +
                      std::to_string(snap.masks.size()) + " masks");
  const fs::path path = o.mask_out.empty() ? fs::path("mask_" + std::to_string(o.task) + ".ssup") : fs::path(o.mask_out);
  write_file(path, serialize_mask(snap.masks[o.task]));
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

void describe_mask(std::ostream& out, const Supermask& m) {
  for (std::size_t l = 0; l < m.num_layers(); ++l)
    out << "  layer " << l << ": " << m.shape(l).rows << " x " << m.shape(l).cols << ", density "
        << csv_number(m.density(l)) << "\n";
}

int run_inspect(const Options& o, std::ostream& out) {
  if (o.in.empty()) throw ConfigError("--in is required");
  const auto bytes = read_file(o.in);
  const std::string magic(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(4, bytes.size())));
  if (magic == "SSUP") {
    const Supermask m = deserialize_mask(bytes);
    out << "mask, " << m.num_layers() << " layers, " << bytes.size() << " bytes\n";
    describe_mask(out, m);
    return kExitOk;
  }
  const Snapshot s = deserialize_snapshot(bytes);
  out << "snapshot, net [";
  for (std::size_t i = 0; i < s.config.layer_dims.size(); ++i) out << (i ? "," : "") << s.config.layer_dims[i];
  out << "], seed " << s.config.seed << ", " << s.masks.size() << " masks, " << bank_storage_bytes(s.masks) << " bytes\n";
  for (std::size_t i = 0; i < s.masks.size(); ++i) {
    out << "mask " << i << ":\n";
    describe_mask(out, s.masks[i]);
  }
  if (s.hopfield) out << "hopfield store: d " << s.hopfield->dim() << ", " << s.hopfield->count << " patterns\n";
  return kExitOk;
}

// "key = value" lines become "--key=value" tokens placed before the command
// line flags, so flags win.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path);
  std::vector<std::string> tokens;
  std::string line;
  std::size_t n = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(f, line)) {
    ++n;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(n) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty() || key == "config") throw ConfigError(path + ":" + std::to_string(n) + ": bad key");
    tokens.push_back("--" + key + "=" + value);
  }
  return tokens;
}

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    if (path.empty()) continue;
    std::vector<std::string> out;
    out.push_back(args.front());
    for (auto& t : config_tokens(path)) out.push_back(std::move(t));
    out.insert(out.end(), args.begin() + 1, args.end());
    return out;
  }
  return args;
}

void add_run_options(CLI::App& c, Options& o, const std::string& default_dataset) {
  o.dataset = default_dataset;
  c.add_option("--config", o.config, "key = value file; flags override it");
  c.add_option("--dataset", o.dataset, "mnist-permuted, mnist-rotated, mnist-split or synthetic")->capture_default_str();
  c.add_option("--tasks", o.tasks, "Number of tasks")->capture_default_str();
  c.add_option("--seed", o.seed, "Master seed")->capture_default_str();
  c.add_option("--arch", o.arch, "lenet-300-100 or fc-1024-1024")->capture_default_str();
  c.add_option("--outputs", o.outputs, "Output size s (0: 100 for lenet, 500 for fc)")->capture_default_str();
  c.add_option("--classes", o.classes, "Classes per synthetic task (0: command default)");
  c.add_option("--steps", o.steps, "Training steps per task")->capture_default_str();
  c.add_option("--batch", o.batch, "Training batch size")->capture_default_str();
  c.add_option("--lr", o.lr, "RMSProp learning rate")->capture_default_str();
  c.add_option("--eval-batch", o.eval_batch, "Test batch size")->capture_default_str();
  c.add_option("--data-dir", o.data_dir, "MNIST directory (default $SUPSUP_DATA_DIR)");
  c.add_option("--out", o.out, "Output directory")->capture_default_str();
  c.add_option("--rotation-step", o.rotation_step, "Degrees between mnist-rotated tasks")->capture_default_str();
  c.add_flag("--record-time", o.record_time, "Record wall time in the CSV");
}

void add_supsup_options(CLI::App& c, Options& o) {
  c.add_option("--objective", o.objective, "H or G (default G; H for nns)");
  c.add_option("--infer", o.infer, "oneshot, binary, gamma or alpha")->capture_default_str();
  c.add_option("--gamma", o.gamma, "Kept fraction per round for --infer gamma")->capture_default_str();
  c.add_option("--granularity", o.granularity, "single (first image) or batch")->capture_default_str();
  c.add_option("--mask-alg", o.mask_alg, "threshold0 or topk")->capture_default_str();
  c.add_option("--topk-frac", o.topk_frac, "Kept fraction for topk")->capture_default_str();
  c.add_flag("--transfer", o.transfer, "Initialize scores from earlier masks");
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"SupSup: supermasks in superposition for continual learning"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* gg = app.add_subcommand("gg", "Task identity given at train and test time");
  auto* gnu = app.add_subcommand("gnu", "Task identity inferred at test time");
  auto* nns = app.add_subcommand("nns", "No task boundaries; masks allocated on the fly");
  auto* hop = app.add_subcommand("hopfield", "Masks stored in and recovered from a Hopfield network");
  auto* abe = app.add_subcommand("abatche", "BatchE baseline with ABatchE task inference");
  auto* exp = app.add_subcommand("export-mask", "Write one mask of a snapshot to a mask file");
  auto* ins = app.add_subcommand("inspect", "Describe a mask or snapshot file");

  for (auto* c : {gg, gnu, nns}) {
    add_run_options(*c, o, "mnist-permuted");
    add_supsup_options(*c, o);
  }
  nns->add_option("--eps", o.eps, "Allocation threshold")->capture_default_str();
  nns->add_option("--cadence", o.cadence, "Batches between allocation decisions")->capture_default_str();
  nns->add_option("--budget", o.budget, "Maximum number of masks")->capture_default_str();
  nns->add_option("--batches-per-task", o.batches_per_task, "Stream length per task")->capture_default_str();

  add_run_options(*hop, o, "mnist-split");
  hop->add_option("--rule", o.rule, "storkey or hebbian")->capture_default_str();
  hop->add_option("--recovery-steps", o.recovery_steps, "Recovery gradient steps")->capture_default_str();
  hop->add_option("--recovery-lr", o.recovery_lr, "Recovery learning rate")->capture_default_str();

  add_run_options(*abe, o, "mnist-permuted");
  abe->add_option("--objective", o.objective, "H (entropy) or M (max confidence)");
  abe->add_option("--trunk", o.trunk, "trained-first or random")->capture_default_str();

  for (auto* c : {exp, ins}) c->add_option("--in", o.in, "Input file")->required();
  exp->add_option("--task", o.task, "Mask index")->required();
  exp->add_option("--out", o.mask_out, "Output mask file (default mask_<task>.ssup)");

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (gg->parsed()) return run_scenario(o, Scenario::GG, out);
    if (gnu->parsed()) return run_scenario(o, Scenario::GNu, out);
    if (nns->parsed()) return run_scenario(o, Scenario::NNs, out);
    if (hop->parsed()) return run_hopfield_cmd(o, out);
    if (abe->parsed()) return run_abatche_cmd(o, out);
    if (exp->parsed()) return run_export(o, out);
    if (ins->parsed()) return run_inspect(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const FormatError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitConfig;
}

}  // namespace supsup::cli
