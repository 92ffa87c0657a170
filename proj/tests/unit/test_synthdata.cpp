#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "tandem/errors.hpp"
#include "tandem/synthdata.hpp"

namespace {

using namespace tandem;

GaussPairSpec appendix_spec() { return GaussPairSpec::density_ratio_default(); }

LabeledSequence frames_of(std::initializer_list<std::initializer_list<double>> rows) {
  LabeledSequence s;
  s.frames.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index t = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) s.frames(t, j++) = v;
    ++t;
  }
  return s;
}

LabeledSequence symbols(std::initializer_list<int> xs) {
  LabeledSequence s;
  s.frames.resize(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index t = 0;
  for (int x : xs) s.frames(t++, 0) = x;
  return s;
}

TEST(GenIidGauss, ShapeContract) {
  const auto seqs = gen_iid_gauss(appendix_spec(), 1, 1, 0.5, 7);
  ASSERT_EQ(seqs.size(), 1u);
  EXPECT_EQ(seqs[0].length(), 1);
  EXPECT_EQ(seqs[0].dim(), 2);
}

TEST(GenIidGauss, ClassMeansWithinThreeSem) {
  const auto spec = appendix_spec();
  const auto seqs = gen_iid_gauss(spec, 10000, 1, 0.5, 11);
  for (int y = 0; y < 2; ++y) {
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    int n = 0;
    for (const auto& s : seqs) {
      if (s.label != y) continue;
      sum += s.frames.row(0).transpose();
      ++n;
    }
    ASSERT_GT(n, 1000);
    const Eigen::Vector2d mean = sum / n;
    const Eigen::VectorXd& mu = y == 1 ? spec.mu1 : spec.mu0;
    const double sem = 1.0 / std::sqrt(static_cast<double>(n));
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(mean(j), mu(j), 3.0 * sem) << "class " << y << " coordinate " << j;
  }
}

TEST(GenIidGauss, SameSeedIsBitIdentical) {
  const auto a = gen_iid_gauss(appendix_spec(), 20, 5, 0.3, 42);
  const auto b = gen_iid_gauss(appendix_spec(), 20, 5, 0.3, 42);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].label, b[i].label);
    EXPECT_EQ(a[i].frames, b[i].frames);
  }
}

TEST(GenIidGauss, DifferentSeedsDiffer) {
  const auto a = gen_iid_gauss(appendix_spec(), 5, 5, 0.5, 1);
  const auto b = gen_iid_gauss(appendix_spec(), 5, 5, 0.5, 2);
  EXPECT_NE(a[0].frames, b[0].frames);
}

TEST(GenIidGauss, PrefixStableAcrossCounts) {
  // Sequence i depends only on (seed, i), not on n.
  const auto small = gen_iid_gauss(appendix_spec(), 3, 4, 0.5, 9);
  const auto large = gen_iid_gauss(appendix_spec(), 10, 4, 0.5, 9);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(small[i].frames, large[i].frames);
}

TEST(GenIidGauss, RejectsInvalidArguments) {
  EXPECT_THROW(gen_iid_gauss(appendix_spec(), 1, 1, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(gen_iid_gauss(appendix_spec(), 1, 1, 1.0, 1), std::invalid_argument);
  EXPECT_THROW(gen_iid_gauss(appendix_spec(), -1, 1, 0.5, 1), std::invalid_argument);
  EXPECT_THROW(gen_iid_gauss(appendix_spec(), 1, 0, 0.5, 1), std::invalid_argument);
}

TEST(GenRampGauss, EmptyRequest) { EXPECT_TRUE(gen_ramp_gauss(appendix_spec(), 0, 5, 0.5, 1).empty()); }

TEST(GenRampGauss, FinalFrameFollowsIidLaw) {
  const auto spec = appendix_spec();
  const int length = 4;
  const auto seqs = gen_ramp_gauss(spec, 8000, length, 0.5, 3);
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  int n = 0;
  for (const auto& s : seqs) {
    if (s.label != 1) continue;
    sum += s.frames.row(length - 1).transpose();
    ++n;
  }
  const double sem = 1.0 / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(sum(0) / n, spec.mu1(0), 3.0 * sem);
  EXPECT_NEAR(sum(1) / n, spec.mu1(1), 3.0 * sem);
}

TEST(GenRampGauss, PerFrameKlShrinksQuadratically) {
  // Mean LLR increment under class 1 at frame t is (t/T)^2 ||mu1 - mu0||^2 / 2.
  const auto spec = appendix_spec();
  const int length = 5;
  const auto seqs = gen_ramp_gauss(spec, 20000, length, 0.5, 5);
  for (int t = 1; t <= length; ++t) {
    std::vector<double> inc;
    for (const auto& s : seqs) {
      if (s.label != 1) continue;
      const auto llr = analytic_llr_ramp(s, spec);
      inc.push_back(llr.at(t) - (t > 1 ? llr.at(t - 1) : 0.0));
    }
    double mean = 0.0;
    for (double v : inc) mean += v / inc.size();
    double var = 0.0;
    for (double v : inc) var += (v - mean) * (v - mean) / (inc.size() - 1);
    const double w = static_cast<double>(t) / length;
    const double expected = w * w * spec.kl_per_step();
    EXPECT_NEAR(mean, expected, 3.0 * std::sqrt(var / inc.size())) << "t=" << t;
  }
}

TEST(GenAr1Gauss, RhoZeroMatchesIidLaw) {
  Ar1Spec spec;
  spec.rho = 0.0;
  spec.sigma = 1.0;
  spec.mu0 = appendix_spec().mu0;
  spec.mu1 = appendix_spec().mu1;
  const auto seqs = gen_ar1_gauss(spec, 2000, 5, 0.5, 17);
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  double sq = 0.0;
  int n = 0;
  for (const auto& s : seqs) {
    const Eigen::VectorXd& mu = s.label == 1 ? spec.mu1 : spec.mu0;
    for (int t = 0; t < s.length(); ++t) {
      const Eigen::Vector2d dev = s.frames.row(t).transpose() - mu;
      sum += dev;
      sq += dev.squaredNorm();
      n += 2;
    }
  }
  EXPECT_NEAR(sum.sum() / n, 0.0, 3.0 / std::sqrt(n));
  EXPECT_NEAR(sq / n, 1.0, 3.0 * std::sqrt(2.0 / n));
}

TEST(GenAr1Gauss, LagOneAutocorrelationAndStationaryVariance) {
  Ar1Spec spec;
  spec.rho = 0.6;
  spec.sigma = 1.0;
  spec.mu0 = Eigen::VectorXd::Constant(1, 0.0);
  spec.mu1 = Eigen::VectorXd::Constant(1, 1.0);
  const auto seqs = gen_ar1_gauss(spec, 2000, 50, 0.5, 23);
  double num = 0.0;
  double var = 0.0;
  long pairs = 0;
  long samples = 0;
  for (const auto& s : seqs) {
    const double mu = s.label == 1 ? 1.0 : 0.0;
    for (int t = 0; t < s.length(); ++t) {
      const double dev = s.frames(t, 0) - mu;
      var += dev * dev;
      ++samples;
      if (t > 0) {
        num += dev * (s.frames(t - 1, 0) - mu);
        ++pairs;
      }
    }
  }
  ASSERT_GE(samples, 100000);
  const double v = var / samples;
  EXPECT_NEAR((num / pairs) / v, spec.rho, 0.01);
  EXPECT_NEAR(v / spec.stationary_variance(), 1.0, 0.02);
}

TEST(GenAr1Gauss, RejectsUnitRoot) {
  Ar1Spec spec;
  spec.rho = 1.0;
  spec.mu0 = Eigen::VectorXd::Zero(1);
  spec.mu1 = Eigen::VectorXd::Ones(1);
  EXPECT_THROW(gen_ar1_gauss(spec, 1, 3, 0.5, 1), std::invalid_argument);
  spec.rho = -1.5;
  EXPECT_THROW(gen_ar1_gauss(spec, 1, 3, 0.5, 1), std::invalid_argument);
}

DiscreteMarkovSpec uniform_chain() {
  DiscreteMarkovSpec spec;
  spec.order = 0;
  spec.alphabet = 2;
  spec.cond0 = Eigen::MatrixXd::Constant(1, 2, 0.5);
  spec.cond1 = spec.cond0;
  spec.init0 = Eigen::VectorXd::Ones(1);
  spec.init1 = spec.init0;
  return spec;
}

TEST(GenDiscreteMarkov, UniformChainFrequency) {
  const auto seqs = gen_discrete_markov(uniform_chain(), 1000, 10, 1);
  double ones = 0.0;
  for (const auto& s : seqs) ones += s.frames.col(0).sum();
  const double n = 10000.0;
  EXPECT_NEAR(ones / n, 0.5, 3.0 * std::sqrt(0.25 / n));
}

TEST(GenDiscreteMarkov, TwoStateOccupancyMatchesStationaryPmf) {
  // P = [[0.9, 0.1], [0.3, 0.7]] has stationary pmf (0.75, 0.25); start in it.
  DiscreteMarkovSpec spec;
  spec.order = 1;
  spec.alphabet = 2;
  spec.cond0.resize(2, 2);
  spec.cond0 << 0.9, 0.1, 0.3, 0.7;
  spec.cond1 = spec.cond0;
  spec.init0 = Eigen::Vector2d(0.75, 0.25);
  spec.init1 = spec.init0;
  const auto seqs = gen_discrete_markov(spec, 4000, 20, 2);
  double ones = 0.0;
  for (const auto& s : seqs) ones += s.frames.col(0).sum();
  const double n = 80000.0;
  // Positive autocorrelation inflates the variance by (1 + r)/(1 - r), r = 0.6.
  const double sem = std::sqrt(0.25 * 0.75 * 4.0 / n);
  EXPECT_NEAR(ones / n, 0.25, 3.0 * sem);
}

TEST(GenDiscreteMarkov, RejectsShortSequencesAndBadPmfs) {
  const auto spec = DiscreteMarkovSpec::random(2, 2, 0.5, 1);
  EXPECT_THROW(gen_discrete_markov(spec, 1, 1, 1), std::invalid_argument);
  auto broken = uniform_chain();
  broken.cond1(0, 0) = 0.7;
  EXPECT_THROW(gen_discrete_markov(broken, 1, 3, 1), SpecError);
}

TEST(AnalyticLlrIid, IncrementOnSymmetryAxisIsZero) {
  auto seq = frames_of({{1.0, 1.0}});
  EXPECT_DOUBLE_EQ(analytic_llr_iid(seq, appendix_spec()).at(1), 0.0);
}

TEST(AnalyticLlrIid, IncrementAtMu1) {
  auto seq = frames_of({{0.0, 2.0}});
  EXPECT_DOUBLE_EQ(analytic_llr_iid(seq, appendix_spec()).at(1), 4.0);
}

TEST(AnalyticLlrIid, FinalValueIsSumOfIncrements) {
  const auto spec = appendix_spec();
  const auto seq = gen_iid_gauss(spec, 1, 30, 0.5, 4).front();
  const auto llr = analytic_llr_iid(seq, spec);
  const Eigen::VectorXd diff = spec.mu1 - spec.mu0;
  const double offset = 0.5 * (spec.mu1.squaredNorm() - spec.mu0.squaredNorm());
  double sum = 0.0;
  for (int t = 0; t < seq.length(); ++t) sum += diff.dot(seq.frames.row(t).transpose()) - offset;
  EXPECT_NEAR(llr.at(seq.length()), sum, 1e-12);
}

TEST(AnalyticLlrIid, RejectsDimensionMismatch) {
  EXPECT_THROW(analytic_llr_iid(frames_of({{1.0, 2.0, 3.0}}), appendix_spec()), std::invalid_argument);
}

TEST(AnalyticLlrRamp, SingleFrameRampMatchesIid) {
  const auto spec = appendix_spec();
  for (const auto& s : gen_iid_gauss(spec, 10, 1, 0.5, 8)) {
    EXPECT_DOUBLE_EQ(analytic_llr_ramp(s, spec).at(1), analytic_llr_iid(s, spec).at(1));
  }
}

TEST(AnalyticLlrAr1, RhoZeroMatchesIid) {
  Ar1Spec spec;
  spec.mu0 = appendix_spec().mu0;
  spec.mu1 = appendix_spec().mu1;
  for (const auto& s : gen_iid_gauss(appendix_spec(), 5, 12, 0.5, 31)) {
    const auto a = analytic_llr_ar1(s, spec).values;
    const auto b = analytic_llr_iid(s, appendix_spec()).values;
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(AnalyticLlrAr1, MatchesQuadratureOnThreeStepChain) {
  Ar1Spec spec;
  spec.rho = 0.6;
  spec.sigma = 0.8;
  spec.mu0 = Eigen::VectorXd::Constant(1, -0.5);
  spec.mu1 = Eigen::VectorXd::Constant(1, 0.7);
  const auto seq = frames_of({{0.3}, {-0.2}, {1.1}});
  const std::vector<double> x{0.3, -0.2, 1.1};
  const double expected = oracle::ar1_logdensity_quadrature(x, 0.7, 0.6, 0.8) -
                          oracle::ar1_logdensity_quadrature(x, -0.5, 0.6, 0.8);
  EXPECT_NEAR(analytic_llr_ar1(seq, spec).at(3), expected, 1e-6);
}

TEST(ExactPosteriors, UninformativeWindowGivesPriorLogOdds) {
  auto spec = uniform_chain();
  spec.prior = 0.8;
  const auto table = exact_posteriors_discrete(symbols({0, 1, 1}), spec, 1);
  const double prior = std::log(0.8 / 0.2);
  for (int k = 0; k <= 2; ++k) {
    for (int s = std::max(k, 1); s <= 3; ++s) EXPECT_NEAR(table(k, s), prior, 1e-12) << k << "," << s;
  }
}

TEST(ExactPosteriors, HandEnumeratedThreeStepChain) {
  // Class 1 flips the previous symbol with probability 0.8, class 0 with 0.3;
  // both start uniformly.
  DiscreteMarkovSpec spec;
  spec.order = 1;
  spec.alphabet = 2;
  spec.cond1.resize(2, 2);
  spec.cond1 << 0.2, 0.8, 0.8, 0.2;
  spec.cond0.resize(2, 2);
  spec.cond0 << 0.7, 0.3, 0.3, 0.7;
  spec.init0 = Eigen::Vector2d(0.5, 0.5);
  spec.init1 = spec.init0;
  const auto table = exact_posteriors_discrete(symbols({0, 1, 1}), spec, 1);
  // Singlets are uninformative: marginals stay uniform under both chains.
  for (int s = 1; s <= 3; ++s) EXPECT_NEAR(table(1, s), 0.0, 1e-12);
  // Doublet (0,1): 0.5*0.8 vs 0.5*0.3. Doublet (1,1): 0.5*0.2 vs 0.5*0.7.
  EXPECT_NEAR(table(2, 2), std::log(0.8 / 0.3), 1e-12);
  EXPECT_NEAR(table(2, 3), std::log(0.2 / 0.7), 1e-12);
}

TEST(ExactPosteriors, FlatPriorRowIsZero) {
  const auto spec = DiscreteMarkovSpec::random(1, 3, 0.5, 5);
  const auto seq = gen_discrete_markov(spec, 1, 6, 2).front();
  const auto table = exact_posteriors_discrete(seq, spec, 2);
  for (int s = 1; s <= 6; ++s) EXPECT_EQ(table(0, s), 0.0);
}

TEST(ExactPosteriors, EnumerationCapRaisesFeasibilityError) {
  const auto spec = DiscreteMarkovSpec::random(2, 3, 0.5, 5);
  const auto seq = gen_discrete_markov(spec, 1, 6, 2).front();
  EXPECT_THROW(exact_posteriors_discrete(seq, spec, 2, 4), FeasibilityError);
}

TEST(ExactPosteriors, MatchesEnumerationOracle) {
  const auto spec = DiscreteMarkovSpec::random(2, 2, 0.35, 12);
  const oracle::ChainEnumeration all(spec, 6);
  const auto seq = gen_discrete_markov(spec, 1, 6, 3).front();
  const auto table = exact_posteriors_discrete(seq, spec, 3);
  const auto expected = all.posteriors(symbols_of(seq), 3, std::log(0.35 / 0.65));
  for (int k = 0; k <= 4; ++k) {
    for (int s = std::max(k, 1); s <= 6; ++s) EXPECT_NEAR(table(k, s), expected(k, s), 1e-12) << k << "," << s;
  }
}

TEST(BruteForceLlr, IdenticalTablesGiveZero) {
  const auto seq = gen_discrete_markov(uniform_chain(), 1, 5, 1).front();
  EXPECT_EQ(brute_force_llr_discrete(seq, uniform_chain()).values, Eigen::VectorXd::Zero(5));
}

TEST(BruteForceLlr, SupportMismatchGivesSentinel) {
  // Class 0 never emits symbol 1.
  auto spec = uniform_chain();
  spec.cond0 << 1.0, 0.0;
  const auto llr = brute_force_llr_discrete(symbols({0, 0, 1, 0}), spec);
  EXPECT_TRUE(llr.has_sentinel);
  EXPECT_NEAR(llr.at(2), 2.0 * std::log(0.5), 1e-12);
  EXPECT_EQ(llr.at(3), std::numeric_limits<double>::infinity());
  EXPECT_EQ(llr.at(4), std::numeric_limits<double>::infinity());
}

TEST(BruteForceLlr, MatchesFullJointEnumeration) {
  const auto spec = DiscreteMarkovSpec::random(2, 3, 0.5, 77);
  const oracle::ChainEnumeration all(spec, 6);
  for (const auto& seq : gen_discrete_markov(spec, 10, 6, 4)) {
    const Eigen::VectorXd expected = all.joint_llr(symbols_of(seq));
    EXPECT_LE((brute_force_llr_discrete(seq, spec).values - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(OneHot, EncodesIndices) {
  const auto encoded = one_hot(symbols({2, 0}), 3);
  Eigen::MatrixXd expected(2, 3);
  expected << 0, 0, 1, 1, 0, 0;
  EXPECT_EQ(encoded.frames, expected);
}

}  // namespace
