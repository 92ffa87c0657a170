#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "tandem/losses.hpp"

namespace {

using namespace tandem;

LLRTrajectory constant(int length, double value) {
  LLRTrajectory llr;
  llr.values = Eigen::VectorXd::Constant(length, value);
  return llr;
}

PosteriorTable filled(int order, int length, double value) {
  PosteriorTable table(order, length, 0.0);
  for (int k = 1; k <= order + 1; ++k) {
    for (int s = k; s <= length; ++s) table(k, s) = value;
  }
  return table;
}

TEST(Lllr, ZeroLlrGivesHalf) {
  const std::vector<LLRTrajectory> llrs{constant(4, 0.0)};
  const std::vector<int> labels{1};
  EXPECT_DOUBLE_EQ(lllr(llrs, labels).value, 0.5);
}

TEST(Lllr, PerfectSeparationLimit) {
  const double big = std::numeric_limits<double>::infinity();
  const std::vector<LLRTrajectory> llrs{constant(3, big), constant(3, -big), constant(3, 40.0)};
  const std::vector<int> labels{1, 0, 1};
  const auto loss = lllr(llrs, labels);
  EXPECT_LT(loss.value, 1e-17);
  for (const auto& g : loss.grad) EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-17);
}

TEST(Lllr, GradientMatchesFiniteDifferences) {
  std::vector<LLRTrajectory> llrs{constant(5, 0.0), constant(5, 0.0), constant(5, 0.0)};
  for (int i = 0; i < 3; ++i) {
    for (int t = 0; t < 5; ++t) llrs[i].values(t) = 2.0 * std::sin(1.7 * i + 0.9 * t);
  }
  const std::vector<int> labels{1, 0, 1};
  const auto loss = lllr(llrs, labels);
  for (int i = 0; i < 3; ++i) {
    const auto numeric = oracle::central_difference(
        [&](const Eigen::VectorXd& x) {
          auto probe = llrs;
          probe[i].values = x;
          return lllr(probe, labels).value;
        },
        llrs[i].values, 1e-5);
    EXPECT_LT(oracle::relative_error(loss.grad[i], numeric), 1e-8) << "sample " << i;
  }
}

TEST(Lllr, RejectsBadBatches) {
  EXPECT_THROW(lllr({}, {}), std::invalid_argument);
  const std::vector<LLRTrajectory> ragged{constant(2, 0.0), constant(3, 0.0)};
  const std::vector<int> labels{0, 1};
  EXPECT_THROW(lllr(ragged, labels), std::invalid_argument);
}

TEST(MultipletCe, ConfidentAndCorrectIsZero) {
  const std::vector<PosteriorTable> tables{filled(1, 4, 800.0), filled(1, 4, -800.0)};
  const std::vector<int> labels{1, 0};
  EXPECT_EQ(multiplet_ce(tables, labels).value, 0.0);
}

TEST(MultipletCe, UninformativeGivesLog2PerOrder) {
  for (int order = 0; order <= 3; ++order) {
    const std::vector<PosteriorTable> tables{filled(order, 6, 0.0)};
    const std::vector<int> labels{1};
    const auto loss = multiplet_ce(tables, labels);
    EXPECT_NEAR(loss.value, (order + 1) * std::log(2.0), 1e-15);
    for (int k = 1; k <= order + 1; ++k) EXPECT_NEAR(loss.per_k(k), std::log(2.0), 1e-15);
  }
}

TEST(MultipletCe, TermCountAudit) {
  // N=2, T=10: each k contributes exactly 8 end times, k..T-(N+1-k).
  const std::vector<PosteriorTable> tables{filled(2, 10, 1.0)};
  const std::vector<int> labels{0};
  const auto loss = multiplet_ce(tables, labels);
  const auto& g = loss.grad.front();
  for (int k = 1; k <= 3; ++k) {
    int count = 0;
    for (int s = 1; s <= 10; ++s) {
      if (g(k, s) != 0.0) {
        ++count;
        EXPECT_GE(s, k);
        EXPECT_LE(s, 10 - (3 - k));
      }
    }
    EXPECT_EQ(count, 8) << "k=" << k;
  }
}

TEST(MultipletCe, StableForExtremeLogits) {
  const std::vector<PosteriorTable> tables{filled(1, 3, -1e6)};
  const std::vector<int> labels{1};
  const auto loss = multiplet_ce(tables, labels);
  EXPECT_TRUE(std::isfinite(loss.value));
  EXPECT_NEAR(loss.value, 2.0 * 1e6, 1e-3);
}

TEST(MultipletCe, RequiresLengthAboveOrder) {
  const std::vector<PosteriorTable> tables{filled(2, 2, 0.0)};
  const std::vector<int> labels{1};
  EXPECT_THROW(multiplet_ce(tables, labels), std::invalid_argument);
}

TEST(KliepSymBounded, ZeroLlrGivesZero) {
  const std::vector<LLRTrajectory> llrs{constant(3, 0.0), constant(3, 0.0)};
  const std::vector<int> labels{1, 0};
  EXPECT_EQ(kliep_sym_bounded(llrs, labels).value, 0.0);
}

TEST(KliepSymBounded, DirectEvaluation) {
  const std::vector<LLRTrajectory> llrs{constant(1, 5.0), constant(1, -5.0)};
  const std::vector<int> labels{1, 0};
  EXPECT_DOUBLE_EQ(kliep_sym_bounded(llrs, labels).value, -10.0);
}

TEST(KliepSymBounded, ClampSaturates) {
  const std::vector<LLRTrajectory> llrs{constant(2, 100.0), constant(2, 0.0)};
  const std::vector<int> labels{1, 0};
  const auto loss = kliep_sym_bounded(llrs, labels);
  EXPECT_NEAR(loss.value, -kDefaultKliepClamp, 1e-12);
  EXPECT_EQ(loss.grad[0].cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(kDefaultKliepClamp, std::log(1e5 / 1e-5), 1e-12);
}

TEST(KliepSymBounded, SingleClassRejected) {
  const std::vector<LLRTrajectory> llrs{constant(2, 1.0)};
  const std::vector<int> labels{1};
  EXPECT_THROW(kliep_sym_bounded(llrs, labels), std::invalid_argument);
}

TEST(TotalLoss, DefaultWeightsSumLllrAndMultiplet) {
  const std::vector<LLRTrajectory> llrs{constant(3, 0.4)};
  const std::vector<PosteriorTable> tables{filled(1, 3, 0.3)};
  const std::vector<int> labels{1};
  LossComponents c;
  c.lllr = lllr(llrs, labels);
  c.multiplet = multiplet_ce(tables, labels);
  const auto total = total_loss(c, LossWeights{});
  EXPECT_DOUBLE_EQ(total.total, c.lllr->value + c.multiplet->value);
  const auto only_multiplet = total_loss(c, LossWeights{0.0, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(only_multiplet.total, c.multiplet->value);
}

TEST(TotalLoss, LllrOnlyWithZeroLoss) {
  const std::vector<LLRTrajectory> llrs{constant(2, std::numeric_limits<double>::infinity())};
  const std::vector<int> labels{1};
  LossComponents c;
  c.lllr = lllr(llrs, labels);
  EXPECT_EQ(total_loss(c, LossWeights{1.0, 0.0, 0.0}).total, 0.0);
}

TEST(TotalLoss, RejectsZeroOrMissingWeights) {
  LossComponents c;
  EXPECT_THROW(total_loss(c, LossWeights{0.0, 0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(total_loss(c, LossWeights{1.0, 0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW((LossWeights{-1.0, 1.0, 0.0}.validate()), std::invalid_argument);
}

TEST(Sigmoid, StableAtExtremes) {
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_DOUBLE_EQ(softplus(1000.0), 1000.0);
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-16);
}

}  // namespace
