#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "supsup/data.hpp"
#include "supsup/errors.hpp"

using namespace supsup;
namespace fs = std::filesystem;

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

fs::path write_bytes(const std::string& name, const std::vector<std::uint8_t>& bytes) {
  const fs::path p = fs::temp_directory_path() / ("supsup_data_test_" + name);
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                           static_cast<std::streamsize>(bytes.size()));
  return p;
}

std::vector<std::uint8_t> idx_images(std::uint32_t magic, std::uint32_t n, std::size_t pixels_written) {
  std::vector<std::uint8_t> b;
  put_be32(b, magic);
  put_be32(b, n);
  put_be32(b, 28);
  put_be32(b, 28);
  for (std::size_t i = 0; i < pixels_written; ++i) b.push_back(static_cast<std::uint8_t>(i % 256));
  return b;
}

std::vector<std::uint8_t> idx_labels(std::uint32_t n) {
  std::vector<std::uint8_t> b;
  put_be32(b, 0x801);
  put_be32(b, n);
  for (std::uint32_t i = 0; i < n; ++i) b.push_back(static_cast<std::uint8_t>(i % 10));
  return b;
}

// 28x28 images with a bright block near the center, labels cycling 0..9.
std::shared_ptr<BaseDataset> square_base(std::size_t n_train, std::size_t n_test) {
  auto base = std::make_shared<BaseDataset>();
  Rng rng(9);
  auto fill = [&](LabeledSet& set, std::size_t n) {
    set.images = Matrix(n, 784);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t r = 8; r < 20; ++r)
        for (std::size_t c = 6 + i % 5; c < 18 + i % 5; ++c) set.images(i, r * 28 + c) = uniform01(rng);
      set.labels.push_back(static_cast<int>(i % 10));
    }
  };
  fill(base->train, n_train);
  fill(base->test, n_test);
  base->checksum = dataset_checksum(*base);
  return base;
}

}  // namespace

TEST(LoadIdx, ReadsFixture) {
  const auto img = write_bytes("ok_img", idx_images(0x803, 3, 3 * 784));
  const auto lbl = write_bytes("ok_lbl", idx_labels(3));
  const LabeledSet set = load_idx(img, lbl);
  ASSERT_EQ(set.images.rows(), 3u);
  ASSERT_EQ(set.images.cols(), 784u);
  EXPECT_EQ(set.labels, (std::vector<int>{0, 1, 2}));
  for (double v : set.images.flat()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_EQ(set.images.data()[255], 1.0);
  EXPECT_EQ(set.images.data()[0], 0.0);
}

TEST(LoadIdx, RejectsBadMagicTruncationAndMismatch) {
  const auto lbl = write_bytes("lbl3", idx_labels(3));
  const auto bad = write_bytes("bad_magic", idx_images(0x802, 3, 3 * 784));
  try {
    load_idx(bad, lbl);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos);
  }
  const auto trunc = write_bytes("trunc", idx_images(0x803, 3, 2 * 784 + 5));
  try {
    load_idx(trunc, lbl);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
  }
  const auto img2 = write_bytes("img2", idx_images(0x803, 2, 2 * 784));
  EXPECT_THROW(load_idx(img2, lbl), DataError);
  EXPECT_THROW(load_idx("/nonexistent/file", lbl), DataError);
}

TEST(FindMnist, MissingDirectory) {
  EXPECT_FALSE(find_mnist(fs::temp_directory_path() / "supsup_no_such_dir").has_value());
}

TEST(Permuted, SeedZeroIsIdentity) {
  auto base = square_base(20, 10);
  const TaskDataset t = make_permuted(base, 0);
  EXPECT_EQ(t.all_images(Part::Train), base->train.images);
  EXPECT_EQ(t.all_labels(Part::Test), base->test.labels);
}

TEST(Permuted, PreservesPixelMultisetAndIsDeterministic) {
  auto base = square_base(20, 10);
  const TaskDataset t = make_permuted(base, 17);
  const Matrix x = t.all_images(Part::Test);
  EXPECT_NE(x, base->test.images);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::vector<double> a(x.row(i).begin(), x.row(i).end());
    std::vector<double> b(base->test.images.row(i).begin(), base->test.images.row(i).end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
  }
  EXPECT_EQ(permutation_for_seed(784, 17), permutation_for_seed(784, 17));
  EXPECT_NE(permutation_for_seed(784, 17), permutation_for_seed(784, 18));
  auto p = permutation_for_seed(784, 17);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
}

TEST(Rotated, ZeroAndFullTurn) {
  auto base = square_base(10, 10);
  const Matrix x0 = make_rotated(base, 0.0).all_images(Part::Test);
  EXPECT_EQ(x0, base->test.images);
  EXPECT_LE(max_abs_diff(make_rotated(base, 360.0).all_images(Part::Test), x0), 1e-6);
}

TEST(Rotated, QuarterTurnConservesMass) {
  auto base = square_base(10, 10);
  const Matrix x = make_rotated(base, 90.0).all_images(Part::Test);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double a = 0.0, b = 0.0;
    for (double v : x.row(i)) a += v;
    for (double v : base->test.images.row(i)) b += v;
    EXPECT_NEAR(a, b, 0.02 * b);
  }
  // On a 28x28 grid a quarter turn about the center maps pixels onto pixels.
  double cw = 0.0, ccw = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t r = 0; r < 28; ++r)
      for (std::size_t c = 0; c < 28; ++c) {
        cw = std::max(cw, std::abs(x(i, r * 28 + c) - base->test.images(i, (27 - c) * 28 + r)));
        ccw = std::max(ccw, std::abs(x(i, r * 28 + c) - base->test.images(i, c * 28 + (27 - r))));
      }
  EXPECT_LE(std::min(cw, ccw), 1e-9);
}

TEST(Split, RelabelsAndPartitions) {
  auto base = square_base(100, 50);
  std::vector<std::size_t> hist(10, 0);
  for (int l : base->train.labels) ++hist[l];
  std::multiset<std::size_t> covered;
  for (int p = 0; p < 5; ++p) {
    const TaskDataset t = make_split(base, {2 * p, 2 * p + 1});
    EXPECT_EQ(t.num_classes(), 2u);
    for (int l : t.all_labels(Part::Train)) EXPECT_TRUE(l == 0 || l == 1);
    EXPECT_EQ(t.size(Part::Train), hist[2 * p] + hist[2 * p + 1]);
    for (std::size_t i = 0; i < t.size(Part::Train); ++i) covered.insert(t.base_index(Part::Train, i));
  }
  ASSERT_EQ(covered.size(), base->train.size());
  std::size_t expect = 0;
  for (std::size_t v : covered) EXPECT_EQ(v, expect++);
  EXPECT_THROW(make_split(base, {10, 1}), DataError);
}

TEST(Split, EmptyClassIsDataError) {
  auto base = square_base(5, 5);  // classes 5..9 have no images
  EXPECT_THROW(make_split(base, {6, 7}), DataError);
}

TEST(Synthetic, LinearlySeparableDeterministicAndPerTask) {
  SyntheticConfig cfg;
  cfg.tasks = 2;
  cfg.dim = 10;
  cfg.classes = 2;
  cfg.seed = 5;
  const auto tasks = make_synthetic(cfg);
  ASSERT_EQ(tasks.size(), 2u);
  EXPECT_GE(oracle::centroid_accuracy(tasks[0]), 0.99);
  EXPECT_GE(oracle::centroid_accuracy(tasks[1]), 0.99);

  const auto again = make_synthetic(cfg);
  EXPECT_EQ(tasks[0].all_images(Part::Train), again[0].all_images(Part::Train));
  EXPECT_EQ(tasks[1].all_labels(Part::Test), again[1].all_labels(Part::Test));
  // Same underlying points, different rotation per task.
  EXPECT_NE(tasks[0].images(Part::Train, std::vector<std::size_t>{0}),
            tasks[1].images(Part::Train, std::vector<std::size_t>{0}));
}

TEST(Synthetic, RotationIsOrthogonal) {
  SyntheticConfig cfg;
  cfg.dim = 6;
  cfg.seed = 2;
  const auto t = make_synthetic(cfg);
  const Matrix raw = make_synthetic_base(cfg)->train.images;
  const Matrix rot = t[0].all_images(Part::Train);
  for (std::size_t i = 0; i < 20; ++i) {
    double a = 0.0, b = 0.0;
    for (double v : raw.row(i)) a += v * v;
    for (double v : rot.row(i)) b += v * v;
    EXPECT_NEAR(a, b, 1e-10 * a);
  }
}

TEST(Synthetic, InvalidConfig) {
  SyntheticConfig cfg;
  cfg.dim = 1;
  cfg.classes = 2;
  EXPECT_THROW(make_synthetic(cfg), ConfigError);
}

TEST(Checksum, DependsOnContent) {
  auto a = square_base(4, 2);
  auto b = square_base(4, 2);
  EXPECT_EQ(dataset_checksum(*a), dataset_checksum(*b));
  b->train.labels[0] = 3;
  EXPECT_NE(dataset_checksum(*a), dataset_checksum(*b));
}
