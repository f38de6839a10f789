#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "supsup/errors.hpp"
#include "supsup/infer.hpp"

using namespace supsup;

namespace {

FixedNet random_net(std::uint64_t seed) {
  NetConfig c;
  c.layer_dims = {12, 16, 10};
  c.seed = seed;
  c.real_labels = 4;
  return build_fixed_net(c);
}

MaskBank random_bank(const FixedNet& net, std::size_t k, Rng& rng) {
  MaskBank b;
  for (std::size_t i = 0; i < k; ++i) b.add(oracle::random_mask(net.mask_shapes(), rng));
  return b;
}

class Separable : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fixture::BankParams params;
    params.tasks = 4;
    bank_ = new fixture::SeparableBank(fixture::make_separable_bank(params));
  }
  static void TearDownTestSuite() { delete bank_; }
  static Matrix batch(std::size_t task, std::size_t start, std::size_t n) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) rows.push_back(start + i);
    return bank_->tasks[task].images(Part::Test, rows);
  }
  static fixture::SeparableBank* bank_;
};
fixture::SeparableBank* Separable::bank_ = nullptr;

}  // namespace

TEST(OneShot, SingleMaskAndEmptyBank) {
  const FixedNet net = random_net(1);
  Rng rng(1);
  const Matrix x = oracle::random_matrix(2, 12, rng);
  const InferenceResult r = one_shot(net, random_bank(net, 1, rng), x, Objective::Entropy);
  EXPECT_EQ(r.task, 0u);
  EXPECT_EQ(r.rounds, 0u);
  EXPECT_THROW(one_shot(net, MaskBank{}, x, Objective::Entropy), InvalidStateError);
}

TEST(OneShot, DuplicateMasksTieToLowestIndex) {
  const FixedNet net = random_net(2);
  Rng rng(2);
  const Supermask m = oracle::random_mask(net.mask_shapes(), rng);
  MaskBank b;
  b.add(m);
  b.add(m);
  const Matrix x = oracle::random_matrix(3, 12, rng);
  const auto g = grad_alpha(net, b, x, Objective::Entropy);
  EXPECT_EQ(g[0], g[1]);
  EXPECT_EQ(one_shot(net, b, x, Objective::Entropy).task, 0u);
}

TEST(BinaryInfer, RoundCountIsCeilLog2) {
  const FixedNet net = random_net(3);
  Rng rng(3);
  const Matrix x = oracle::random_matrix(4, 12, rng);
  for (std::size_t k : {1, 2, 4, 8, 16}) {
    const InferenceResult r = binary_infer(net, random_bank(net, k, rng), x, Objective::GSumExp);
    EXPECT_EQ(r.rounds, static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(k))))) << k;
    EXPECT_LT(r.task, k);
  }
}

TEST(GammaInfer, EndpointsMatchBinaryAndOneShot) {
  const FixedNet net = random_net(4);
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const MaskBank b = random_bank(net, 8, rng);
    const Matrix x = oracle::random_matrix(3, 12, rng);
    const InferenceResult bin = binary_infer(net, b, x, Objective::Entropy);
    const InferenceResult half = gamma_infer(net, b, x, Objective::Entropy, 0.5);
    EXPECT_EQ(half.task, bin.task);
    EXPECT_EQ(half.rounds, bin.rounds);
    const InferenceResult one = gamma_infer(net, b, x, Objective::Entropy, 1.0 / 8.0);
    EXPECT_EQ(one.task, one_shot(net, b, x, Objective::Entropy).task);
    EXPECT_EQ(one.rounds, 1u);
  }
  const MaskBank b = random_bank(net, 4, rng);
  const Matrix x = oracle::random_matrix(1, 12, rng);
  EXPECT_THROW(gamma_infer(net, b, x, Objective::Entropy, 0.6), ConfigError);
  EXPECT_THROW(gamma_infer(net, b, x, Objective::Entropy, 0.1), ConfigError);
}

TEST(GammaInfer, RetentionSchedule) {
  // Simulated schedule: survivors n -> ceil(gamma n) until one remains.
  std::size_t n = 16, rounds = 0;
  while (n > 1) {
    n = std::max<std::size_t>(1, std::min(n - 1, static_cast<std::size_t>(std::ceil(0.25 * n))));
    ++rounds;
  }
  const FixedNet net = random_net(5);
  Rng rng(5);
  const InferenceResult r =
      gamma_infer(net, random_bank(net, 16, rng), oracle::random_matrix(2, 12, rng), Objective::Entropy, 0.25);
  EXPECT_EQ(r.rounds, rounds);
  EXPECT_LE(r.rounds, 4u);
}

TEST(AlphaDescent, EdgeCases) {
  const FixedNet net = random_net(6);
  Rng rng(6);
  const Matrix x = oracle::random_matrix(2, 12, rng);
  const MaskBank b = random_bank(net, 3, rng);
  EXPECT_EQ(alpha_descent(net, b, x, Objective::Entropy, 1.0, 0).alpha, std::vector<double>(3, 1.0 / 3.0));
  EXPECT_EQ(alpha_descent(net, random_bank(net, 1, rng), x, Objective::Entropy, 10.0, 5).alpha,
            std::vector<double>{1.0});
  EXPECT_THROW(alpha_descent(net, b, x, Objective::Entropy, 0.0, 1), ConfigError);
  const auto r = alpha_descent(net, b, x, Objective::Entropy, 0.5, 10);
  double s = 0.0;
  for (double a : r.alpha) {
    EXPECT_GE(a, 0.0);
    s += a;
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(NnsDecision, CriterionArithmetic) {
  const std::vector<double> same(5, 0.3);
  const AllocationDecision d = nns_decision(same, 5, 0.125);
  EXPECT_EQ(d.kind, AllocationDecision::Kind::AllocateNew);
  for (double v : d.nu) EXPECT_NEAR(v, 0.2, 1e-15);

  // nu = (0.97, 0.01, 0.01, 0.01) from g = -log nu.
  const std::vector<double> g{-std::log(0.97), -std::log(0.01), -std::log(0.01), -std::log(0.01)};
  const AllocationDecision u = nns_decision(g, 4, 0.125);
  EXPECT_EQ(u.kind, AllocationDecision::Kind::UseMask);
  EXPECT_EQ(u.index, 0u);
  EXPECT_NEAR(4.0 * u.nu[0], 3.88, 1e-12);

  // eps chosen so that k max nu == 1 + eps exactly.
  const std::vector<double> g2{-0.2, 0.1};
  const AllocationDecision probe = nns_decision(g2, 2, 0.0);
  const double eps = 2.0 * probe.nu[0] - 1.0;
  ASSERT_EQ(1.0 + eps, 2.0 * probe.nu[0]);
  EXPECT_EQ(nns_decision(g2, 2, eps).kind, AllocationDecision::Kind::UseMask);
  const double eps_up = std::nextafter(2.0 * probe.nu[0], 2.0) - 1.0;
  EXPECT_EQ(nns_decision(g2, 2, eps_up).kind, AllocationDecision::Kind::AllocateNew);
  EXPECT_THROW(nns_decision(g2, 3, 0.1), DimensionError);
}

TEST_F(Separable, MasksSolveTheirTasks) {
  for (std::size_t t = 0; t < bank_->tasks.size(); ++t)
    EXPECT_GE(oracle::centroid_accuracy(bank_->tasks[t]), 0.99);
}

TEST_F(Separable, OneShotAgreesWithExhaustiveScan) {
  const MaskBank b = fixture::bank_of(bank_->masks);
  std::size_t agree = 0, correct = 0, trials = 0;
  for (std::size_t t = 0; t < bank_->tasks.size(); ++t)
    for (std::size_t s = 0; s < 64; s += 16, ++trials) {
      const Matrix x = batch(t, s, 16);
      const std::size_t got = one_shot(bank_->net, b, x, Objective::Entropy).task;
      agree += got == fixture::min_objective_task(bank_->net, bank_->masks, x, Objective::Entropy);
      correct += got == t;
    }
  EXPECT_GE(static_cast<double>(agree) / trials, 0.9);
  EXPECT_GE(static_cast<double>(correct) / trials, 0.9);
}

TEST_F(Separable, BinaryAndAlphaDescentAgreeWithExhaustiveScan) {
  const MaskBank b = fixture::bank_of(bank_->masks);
  std::size_t bin = 0, ad = 0, trials = 0;
  for (std::size_t t = 0; t < bank_->tasks.size(); ++t)
    for (std::size_t s = 0; s < 64; s += 16, ++trials) {
      const Matrix x = batch(t, s, 16);
      const std::size_t want = fixture::min_objective_task(bank_->net, bank_->masks, x, Objective::Entropy);
      bin += binary_infer(bank_->net, b, x, Objective::Entropy).task == want;
      ad += argmax_lowest(alpha_descent(bank_->net, b, x, Objective::Entropy, 1e3, 20).alpha) == want;
    }
  EXPECT_GE(static_cast<double>(bin) / trials, 0.9);
  EXPECT_GE(static_cast<double>(ad) / trials, 0.9);
}
