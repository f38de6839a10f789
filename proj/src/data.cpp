#include "supsup/data.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <sstream>

#include "supsup/errors.hpp"
#include "supsup/kernels.hpp"
#include "supsup/rng.hpp"

namespace supsup {
namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > bytes.size())
    throw DataError(path.string() + ": truncated header at offset " + std::to_string(offset));
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void check_magic(std::uint32_t got, std::uint32_t want, const std::filesystem::path& path) {
  if (got != want)
    throw DataError(path.string() + ": bad magic " + hex32(got) + " at offset 0 (expected " +
                    hex32(want) + ")");
}

Matrix haar_rotation(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(dim, dim);
  for (Eigen::Index r = 0; r < g.rows(); ++r)
    for (Eigen::Index c = 0; c < g.cols(); ++c) g(r, c) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < q.cols(); ++c)
    if (r(c, c) < 0) q.col(c) *= -1.0;
  Matrix out(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) out(i, j) = q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

Matrix blob_centers(const SyntheticConfig& cfg, Rng& rng) {
  std::normal_distribution<double> normal;
  const double min_dist = cfg.min_separation * cfg.sigma;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Matrix centers(cfg.classes, cfg.dim);
    for (double& v : centers.flat()) v = cfg.center_scale * normal(rng);
    bool ok = true;
    for (std::size_t a = 0; a < cfg.classes && ok; ++a)
      for (std::size_t b = a + 1; b < cfg.classes && ok; ++b) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < cfg.dim; ++j) {
          const double d = centers(a, j) - centers(b, j);
          d2 += d * d;
        }
        ok = std::sqrt(d2) >= min_dist;
      }
    if (ok) return centers;
  }
  throw ConfigError("synthetic: cannot place class centers at the requested separation");
}

LabeledSet sample_blobs(const Matrix& centers, std::size_t per_class, double sigma, Rng& rng) {
  std::normal_distribution<double> normal;
  const std::size_t classes = centers.rows();
  LabeledSet set{Matrix(classes * per_class, centers.cols()), {}};
  set.labels.reserve(classes * per_class);
  // Interleave classes so that any prefix is roughly balanced.
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      auto row = set.images.row(set.labels.size());
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = centers(c, j) + sigma * normal(rng);
      set.labels.push_back(static_cast<int>(c));
    }
  }
  return set;
}

}  // namespace

std::uint64_t dataset_checksum(const BaseDataset& base) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ b[i]) * 1099511628211ULL;
  };
  for (const LabeledSet* s : {&base.train, &base.test}) {
    feed(s->images.data(), s->images.size() * sizeof(double));
    feed(s->labels.data(), s->labels.size() * sizeof(int));
  }
  return h;
}

LabeledSet load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto ib = read_file(images);
  const auto lb = read_file(labels);
  check_magic(read_be32(ib, 0, images), kImagesMagic, images);
  check_magic(read_be32(lb, 0, labels), kLabelsMagic, labels);
  const std::size_t n = read_be32(ib, 4, images);
  const std::size_t rows = read_be32(ib, 8, images);
  const std::size_t cols = read_be32(ib, 12, images);
  const std::size_t nl = read_be32(lb, 4, labels);
  if (n != nl)
    throw DataError("count mismatch: " + images.string() + " has " + std::to_string(n) +
                    " images (offset 4) but " + labels.string() + " has " + std::to_string(nl) +
                    " labels (offset 4)");
  const std::size_t dim = rows * cols;
  if (ib.size() < 16 + n * dim)
    throw DataError(images.string() + ": truncated at offset " + std::to_string(ib.size()) +
                    " (expected " + std::to_string(16 + n * dim) + " bytes)");
  if (lb.size() < 8 + n)
    throw DataError(labels.string() + ": truncated at offset " + std::to_string(lb.size()) +
                    " (expected " + std::to_string(8 + n) + " bytes)");
  LabeledSet set{Matrix(n, dim), std::vector<int>(n)};
  for (std::size_t i = 0; i < n * dim; ++i) set.images.data()[i] = ib[16 + i] / 255.0;
  for (std::size_t i = 0; i < n; ++i) set.labels[i] = lb[8 + i];
  return set;
}

std::optional<MnistFiles> find_mnist(const std::filesystem::path& dir) {
  std::filesystem::path root = dir;
  if (root.empty()) {
    const char* env = std::getenv("SUPSUP_DATA_DIR");
    if (env == nullptr || *env == '\0') return std::nullopt;
    root = env;
  }
  auto pick = [&root](const char* stem, const char* kind) -> std::optional<std::filesystem::path> {
    for (const char* sep : {"-", "."}) {
      auto p = root / (std::string(stem) + sep + kind + "-ubyte");
      if (std::filesystem::exists(p)) return p;
    }
    return std::nullopt;
  };
  auto ti = pick("train-images", "idx3");
  auto tl = pick("train-labels", "idx1");
  auto vi = pick("t10k-images", "idx3");
  auto vl = pick("t10k-labels", "idx1");
  if (!ti || !tl || !vi || !vl) return std::nullopt;
  return MnistFiles{*ti, *tl, *vi, *vl};
}

BaseDataset load_mnist(const MnistFiles& files) {
  BaseDataset base;
  base.train = load_idx(files.train_images, files.train_labels);
  base.test = load_idx(files.test_images, files.test_labels);
  base.num_classes = 10;
  for (const LabeledSet* s : {&base.train, &base.test})
    for (int l : s->labels)
      if (l < 0 || l >= 10) throw DataError("MNIST label outside [0,10)");
  base.checksum = dataset_checksum(base);
  return base;
}

std::string describe(const TaskTransform& t) {
  std::ostringstream os;
  std::visit(
      [&os](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PermuteTransform>) os << "permute(" << v.seed << ")";
        else if constexpr (std::is_same_v<T, RotateTransform>) os << "rotate(" << v.degrees << ")";
        else if constexpr (std::is_same_v<T, SplitTransform>) {
          os << "split(";
          for (std::size_t i = 0; i < v.classes.size(); ++i) os << (i ? "," : "") << v.classes[i];
          os << ")";
        } else os << "synthetic(" << v.task << ")";
      },
      t);
  return os.str();
}

PixelMap PixelMap::identity(std::size_t n) {
  PixelMap m;
  m.identity_ = true;
  m.offsets_.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) m.offsets_[i] = i;
  m.sources_.resize(n);
  std::iota(m.sources_.begin(), m.sources_.end(), 0u);
  m.weights_.assign(n, 1.0);
  return m;
}

PixelMap PixelMap::permutation(std::span<const std::size_t> perm) {
  PixelMap m;
  m.offsets_.resize(perm.size() + 1);
  for (std::size_t i = 0; i <= perm.size(); ++i) m.offsets_[i] = i;
  for (std::size_t p : perm) m.sources_.push_back(static_cast<std::uint32_t>(p));
  m.weights_.assign(perm.size(), 1.0);
  m.identity_ = std::is_sorted(perm.begin(), perm.end()) &&
                (perm.empty() || (perm.front() == 0 && perm.back() == perm.size() - 1));
  return m;
}

PixelMap PixelMap::rotation(std::size_t side, double degrees) {
  PixelMap m;
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  const double center = (static_cast<double>(side) - 1.0) / 2.0;
  const auto s = static_cast<long>(side);
  for (long i = 0; i < s; ++i) {
    for (long j = 0; j < s; ++j) {
      // Inverse mapping: sample the source at the output position rotated by -theta.
      const double x = static_cast<double>(j) - center;
      const double y = static_cast<double>(i) - center;
      const double xs = cs * x + sn * y + center;
      const double ys = -sn * x + cs * y + center;
      const double fx = std::floor(xs);
      const double fy = std::floor(ys);
      const double tx = xs - fx;
      const double ty = ys - fy;
      const long x0 = static_cast<long>(fx);
      const long y0 = static_cast<long>(fy);
      const long xs4[4] = {x0, x0 + 1, x0, x0 + 1};
      const long ys4[4] = {y0, y0, y0 + 1, y0 + 1};
      const double w4[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
      for (int t = 0; t < 4; ++t) {
        if (w4[t] == 0.0 || xs4[t] < 0 || ys4[t] < 0 || xs4[t] >= s || ys4[t] >= s) continue;
        m.sources_.push_back(static_cast<std::uint32_t>(ys4[t] * s + xs4[t]));
        m.weights_.push_back(w4[t]);
      }
      m.offsets_.push_back(m.sources_.size());
    }
  }
  return m;
}

void PixelMap::apply(std::span<const double> in, std::span<double> out) const {
  if (identity_) {
    std::copy(in.begin(), in.end(), out.begin());
    return;
  }
  for (std::size_t p = 0; p + 1 < offsets_.size(); ++p) {
    double v = 0.0;
    for (std::size_t t = offsets_[p]; t < offsets_[p + 1]; ++t) v += weights_[t] * in[sources_[t]];
    out[p] = v;
  }
}

TaskDataset::TaskDataset(std::shared_ptr<const BaseDataset> base, TaskTransform transform,
                         PixelMap map, std::vector<std::size_t> train_rows,
                         std::vector<std::size_t> test_rows, std::vector<int> label_map,
                         std::size_t num_classes)
    : base_(std::move(base)),
      transform_(std::move(transform)),
      map_(std::move(map)),
      train_rows_(std::move(train_rows)),
      test_rows_(std::move(test_rows)),
      label_map_(std::move(label_map)),
      num_classes_(num_classes) {
  if (map_.size() != base_->input_dim()) throw DimensionError("pixel map size != input width");
}

Matrix TaskDataset::images(Part part, std::span<const std::size_t> task_rows) const {
  const LabeledSet& s = set(part);
  const auto& idx = rows(part);
  Matrix out(task_rows.size(), input_dim());
  for (std::size_t i = 0; i < task_rows.size(); ++i)
    map_.apply(s.images.row(idx.at(task_rows[i])), out.row(i));
  return out;
}

std::vector<int> TaskDataset::labels(Part part, std::span<const std::size_t> task_rows) const {
  std::vector<int> out(task_rows.size());
  for (std::size_t i = 0; i < task_rows.size(); ++i) out[i] = label(part, task_rows[i]);
  return out;
}

int TaskDataset::label(Part part, std::size_t i) const {
  return label_map_[static_cast<std::size_t>(set(part).labels[rows(part).at(i)])];
}

Matrix TaskDataset::all_images(Part part) const {
  std::vector<std::size_t> all(size(part));
  std::iota(all.begin(), all.end(), 0);
  return images(part, all);
}

std::vector<int> TaskDataset::all_labels(Part part) const {
  std::vector<std::size_t> all(size(part));
  std::iota(all.begin(), all.end(), 0);
  return labels(part, all);
}

namespace {

std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

std::vector<int> identity_labels(std::size_t classes) {
  std::vector<int> v(classes);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

std::vector<std::size_t> permutation_for_seed(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm = iota_rows(n);
  if (seed == 0) return perm;
  Rng rng(derive_seed(seed, seed_tag::kPermutation, 0));
  // Fisher-Yates with explicit index draws (std::shuffle is not portable across libraries).
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(perm[i - 1], perm[std::min(j, i - 1)]);
  }
  return perm;
}

TaskDataset make_permuted(std::shared_ptr<const BaseDataset> base, std::uint64_t task_seed) {
  const auto perm = permutation_for_seed(base->input_dim(), task_seed);
  const std::size_t classes = base->num_classes;
  auto train = iota_rows(base->train.size());
  auto test = iota_rows(base->test.size());
  return TaskDataset(std::move(base), PermuteTransform{task_seed}, PixelMap::permutation(perm),
                     std::move(train), std::move(test), identity_labels(classes), classes);
}

TaskDataset make_rotated(std::shared_ptr<const BaseDataset> base, double degrees) {
  const std::size_t dim = base->input_dim();
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(dim))));
  if (side * side != dim) throw DimensionError("make_rotated: input width is not a square image");
  const std::size_t classes = base->num_classes;
  auto train = iota_rows(base->train.size());
  auto test = iota_rows(base->test.size());
  return TaskDataset(std::move(base), RotateTransform{degrees}, PixelMap::rotation(side, degrees),
                     std::move(train), std::move(test), identity_labels(classes), classes);
}

TaskDataset make_split(std::shared_ptr<const BaseDataset> base, std::vector<int> classes) {
  std::vector<int> label_map(base->num_classes, -1);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const int c = classes[i];
    if (c < 0 || static_cast<std::size_t>(c) >= base->num_classes)
      throw DataError("make_split: class " + std::to_string(c) + " out of range");
    label_map[static_cast<std::size_t>(c)] = static_cast<int>(i);
  }
  auto select = [&label_map](const LabeledSet& s) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (label_map[static_cast<std::size_t>(s.labels[i])] >= 0) rows.push_back(i);
    return rows;
  };
  auto train = select(base->train);
  auto test = select(base->test);
  for (int c : classes) {
    auto has = [c](const LabeledSet& s) { return std::find(s.labels.begin(), s.labels.end(), c) != s.labels.end(); };
    if (!has(base->train) || !has(base->test))
      throw DataError("make_split: class " + std::to_string(c) + " has no images");
  }
  const std::size_t n = classes.size();
  const std::size_t dim = base->input_dim();
  return TaskDataset(std::move(base), SplitTransform{std::move(classes)}, PixelMap::identity(dim),
                     std::move(train), std::move(test), std::move(label_map), n);
}

std::shared_ptr<const BaseDataset> make_synthetic_base(const SyntheticConfig& cfg) {
  if (cfg.dim < cfg.classes) throw ConfigError("synthetic: dim must be >= number of classes");
  if (cfg.classes == 0 || cfg.train_per_class == 0 || cfg.test_per_class == 0)
    throw ConfigError("synthetic: empty configuration");
  Rng rng(derive_seed(cfg.seed, seed_tag::kSynthetic, 0));
  const Matrix centers = blob_centers(cfg, rng);
  auto base = std::make_shared<BaseDataset>();
  base->train = sample_blobs(centers, cfg.train_per_class, cfg.sigma, rng);
  base->test = sample_blobs(centers, cfg.test_per_class, cfg.sigma, rng);
  base->num_classes = cfg.classes;
  base->checksum = dataset_checksum(*base);
  return base;
}

std::vector<TaskDataset> make_synthetic(const SyntheticConfig& cfg) {
  const auto shared = make_synthetic_base(cfg);
  std::vector<TaskDataset> tasks;
  for (std::size_t t = 0; t < cfg.tasks; ++t) {
    const Matrix q = haar_rotation(cfg.dim, derive_seed(cfg.seed, seed_tag::kSynthetic, t + 1));
    auto rotated = std::make_shared<BaseDataset>();
    rotated->num_classes = cfg.classes;
    rotated->train.labels = shared->train.labels;
    rotated->test.labels = shared->test.labels;
    // x -> Q x for every row, i.e. X Q^T.
    rotated->train.images = kernels::matmul_nt(shared->train.images, q);
    rotated->test.images = kernels::matmul_nt(shared->test.images, q);
    rotated->checksum = dataset_checksum(*rotated);
    const std::size_t ntrain = rotated->train.size();
    const std::size_t ntest = rotated->test.size();
    tasks.emplace_back(std::move(rotated), SyntheticTransform{t, cfg.seed}, PixelMap::identity(cfg.dim),
                       iota_rows(ntrain), iota_rows(ntest), identity_labels(cfg.classes), cfg.classes);
  }
  return tasks;
}

}  // namespace supsup
