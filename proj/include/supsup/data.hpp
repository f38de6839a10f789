#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "supsup/tensor.hpp"

namespace supsup {

/// Images (rows, values in [0,1] for MNIST) and their labels.
struct LabeledSet {
  Matrix images;
  std::vector<int> labels;
  std::size_t size() const { return labels.size(); }
};

struct BaseDataset {
  LabeledSet train;
  LabeledSet test;
  std::size_t num_classes = 10;
  /// FNV-1a over pixels and labels; identifies the source data in task streams.
  std::uint64_t checksum = 0;

  std::size_t input_dim() const { return train.images.cols(); }
};

std::uint64_t dataset_checksum(const BaseDataset& base);

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Pixels are scaled by 1/255. Throws DataError naming the byte offset of the
/// first problem (bad magic, truncation, count mismatch).
LabeledSet load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Standard MNIST file names inside a directory (dash or dot before "idx").
struct MnistFiles {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};

/// Locates the four MNIST files under `dir`, falling back to $SUPSUP_DATA_DIR
/// when `dir` is empty. Returns nullopt when any file is missing.
std::optional<MnistFiles> find_mnist(const std::filesystem::path& dir = {});

BaseDataset load_mnist(const MnistFiles& files);

enum class Part { Train, Test };

struct PermuteTransform {
  std::uint64_t seed = 0;  ///< 0 is the identity permutation
};
struct RotateTransform {
  double degrees = 0.0;
};
struct SplitTransform {
  std::vector<int> classes;
};
struct SyntheticTransform {
  std::size_t task = 0;
  std::uint64_t seed = 0;
};
using TaskTransform = std::variant<PermuteTransform, RotateTransform, SplitTransform, SyntheticTransform>;

std::string describe(const TaskTransform& t);

/// Per-output-pixel gather with up to a few weighted taps. Expresses identity,
/// permutations, and bilinear rotations.
class PixelMap {
 public:
  static PixelMap identity(std::size_t n);
  static PixelMap permutation(std::span<const std::size_t> perm);  // out[j] = in[perm[j]]
  /// Bilinear rotation of a side x side image about its center, zero fill.
  static PixelMap rotation(std::size_t side, double degrees);

  std::size_t size() const { return offsets_.size() - 1; }
  bool is_identity() const { return identity_; }
  void apply(std::span<const double> in, std::span<double> out) const;

 private:
  bool identity_ = false;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> sources_;
  std::vector<double> weights_;
};

/// One task: a view over a base dataset with a pixel transform, an index
/// subset, and labels remapped to [0, num_classes).
class TaskDataset {
 public:
  TaskDataset(std::shared_ptr<const BaseDataset> base, TaskTransform transform, PixelMap map,
              std::vector<std::size_t> train_rows, std::vector<std::size_t> test_rows,
              std::vector<int> label_map, std::size_t num_classes);

  const TaskTransform& transform() const { return transform_; }
  const BaseDataset& base() const { return *base_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t input_dim() const { return map_.size(); }
  std::size_t size(Part part) const { return rows(part).size(); }
  /// Index into the base split for task row i.
  std::size_t base_index(Part part, std::size_t i) const { return rows(part)[i]; }

  Matrix images(Part part, std::span<const std::size_t> task_rows) const;
  std::vector<int> labels(Part part, std::span<const std::size_t> task_rows) const;
  int label(Part part, std::size_t i) const;
  /// Every row of the part, in order.
  Matrix all_images(Part part) const;
  std::vector<int> all_labels(Part part) const;

 private:
  const std::vector<std::size_t>& rows(Part p) const { return p == Part::Train ? train_rows_ : test_rows_; }
  const LabeledSet& set(Part p) const { return p == Part::Train ? base_->train : base_->test; }

  std::shared_ptr<const BaseDataset> base_;
  TaskTransform transform_;
  PixelMap map_;
  std::vector<std::size_t> train_rows_;
  std::vector<std::size_t> test_rows_;
  std::vector<int> label_map_;
  std::size_t num_classes_;
};

/// Pixel permutation for a task seed; seed 0 gives the identity.
std::vector<std::size_t> permutation_for_seed(std::size_t n, std::uint64_t seed);

TaskDataset make_permuted(std::shared_ptr<const BaseDataset> base, std::uint64_t task_seed);
TaskDataset make_rotated(std::shared_ptr<const BaseDataset> base, double degrees);
/// Keeps the listed classes and relabels them 0..n-1 in the given order.
/// Throws DataError if a class has no training or test images.
TaskDataset make_split(std::shared_ptr<const BaseDataset> base, std::vector<int> classes);

struct SyntheticConfig {
  std::size_t tasks = 1;
  std::size_t dim = 20;
  std::size_t classes = 2;
  std::size_t train_per_class = 500;
  std::size_t test_per_class = 200;
  std::uint64_t seed = 0;
  double sigma = 1.0;
  /// Standard deviation of the class-center coordinates.
  double center_scale = 1.0;
  /// Minimum pairwise center distance in units of sigma.
  double min_separation = 6.0;
};

/// Gaussian blobs shared by all tasks, with an independent Haar-random
/// rotation of feature space per task.
std::vector<TaskDataset> make_synthetic(const SyntheticConfig& cfg);

/// Unrotated blob dataset; combine with make_permuted for permuted streams.
std::shared_ptr<const BaseDataset> make_synthetic_base(const SyntheticConfig& cfg);

}  // namespace supsup
