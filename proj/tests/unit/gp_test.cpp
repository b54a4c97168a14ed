#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "dense_oracle.hpp"
#include "gnp/gp/kernel.hpp"
#include "gnp/gp/posterior.hpp"
#include "gnp/ndiff/linalg.hpp"
#include "gnp/rng.hpp"

using namespace gnp;
using gp::KernelKind;
using gp::KernelSpec;

namespace {

constexpr double kNoise = 0.05 * 0.05;

std::vector<double> uniform_points(std::size_t n, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  CounterRng rng(seed, 0, Purpose::sample);
  std::vector<double> xs(n);
  for (double& x : xs) x = rng.uniform(lo, hi);
  return xs;
}

const KernelKind kAllKinds[] = {KernelKind::eq, KernelKind::matern52, KernelKind::noisy_mixture,
                                KernelKind::weakly_periodic};

}  // namespace

TEST(Kernel, UnitEqValues) {
  const auto spec = KernelSpec::preset(KernelKind::eq);
  EXPECT_DOUBLE_EQ(gp::kernel_eval(spec, 0.3, 0.3), 1.0);
  EXPECT_NEAR(gp::kernel_eval(spec, 0.0, 1.0), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(gp::kernel_eval(spec, 0.0, 1.0), 0.60653, 1e-5);
}

TEST(Kernel, MixtureVarianceIsSum) {
  const auto spec = KernelSpec::preset(KernelKind::noisy_mixture);
  EXPECT_DOUBLE_EQ(gp::kernel_eval(spec, -1.2, -1.2), 2.0);
  EXPECT_DOUBLE_EQ(spec.total_variance(), 2.0);
}

TEST(Kernel, MaternAtOneLengthscale) {
  const auto spec = KernelSpec::preset(KernelKind::matern52);
  EXPECT_NEAR(gp::kernel_eval(spec, 0.0, 1.0), (1.0 + 1.0 + 1.0 / 3.0) * std::exp(-1.0), 1e-15);
}

TEST(Kernel, SymmetricWithTotalVarianceOnDiagonal) {
  const auto xs = uniform_points(20, 3);
  for (auto kind : kAllKinds) {
    const auto spec = KernelSpec::preset(kind);
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      EXPECT_EQ(gp::kernel_eval(spec, xs[i], xs[i + 1]), gp::kernel_eval(spec, xs[i + 1], xs[i]));
      EXPECT_DOUBLE_EQ(gp::kernel_eval(spec, xs[i], xs[i]), spec.total_variance());
    }
  }
}

TEST(Kernel, PeriodicFactorIsPeriodic) {
  const auto spec = KernelSpec::preset(KernelKind::weakly_periodic);
  for (double d : {0.0, 0.013, 0.1, 0.37, 1.4, 3.9}) {
    for (int m = 1; m <= 4; ++m) {
      EXPECT_NEAR(gp::periodic_factor(spec, d), gp::periodic_factor(spec, d + m * spec.period), 1e-12) << d;
    }
  }
}

TEST(Kernel, ParseAndValidate) {
  for (auto kind : kAllKinds) EXPECT_EQ(gp::parse_kernel_kind(gp::to_string(kind)), kind);
  EXPECT_THROW(gp::parse_kernel_kind("rbf"), std::invalid_argument);
  KernelSpec bad = KernelSpec::preset(KernelKind::weakly_periodic);
  bad.period = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = KernelSpec::preset(KernelKind::eq);
  bad.lengthscale = -1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  EXPECT_NO_THROW(KernelSpec::preset(KernelKind::noisy_mixture).validate());
}

TEST(Gram, SinglePointAndDistantPair) {
  const auto mix = KernelSpec::preset(KernelKind::noisy_mixture);
  const std::vector<double> zero{0.0};
  const auto g = gp::gram(mix, zero, zero);
  ASSERT_EQ(g.rows(), 1u);
  EXPECT_DOUBLE_EQ(g(0, 0), 2.0);

  const auto eq = KernelSpec::preset(KernelKind::eq);
  const std::vector<double> far{0.0, 20.0};
  EXPECT_LT(gp::gram(eq, far, far)(0, 1), 1e-10);
}

TEST(Gram, MatchesPairwiseLoop) {
  const auto xs = uniform_points(5, 11);
  const auto ys = uniform_points(3, 12);
  for (auto kind : kAllKinds) {
    const auto spec = KernelSpec::preset(kind);
    const auto g = gp::gram(spec, xs, ys);
    ASSERT_EQ(g.rows(), 5u);
    ASSERT_EQ(g.cols(), 3u);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(g(i, j), gp::kernel_eval(spec, xs[i], ys[j]));
  }
}

TEST(Posterior, EmptyContextIsPrior) {
  const auto spec = KernelSpec::preset(KernelKind::matern52);
  const auto tx = uniform_points(6, 4);
  const auto post = gp::posterior(spec, kNoise, {}, {}, tx);
  const auto prior = gp::gram(spec, tx, tx);
  for (double m : post.mean) EXPECT_EQ(m, 0.0);
  EXPECT_EQ(nd::max_abs_diff(post.covariance, prior), 0.0);
}

TEST(Posterior, InterpolatesNoiseFreeObservation) {
  const auto spec = KernelSpec::preset(KernelKind::eq);
  const std::vector<double> cx{0.0}, cy{1.0}, tx{0.0};
  const auto post = gp::posterior(spec, 0.0, cx, cy, tx);
  EXPECT_NEAR(post.mean[0], 1.0, 1e-12);
  EXPECT_NEAR(post.covariance(0, 0), 0.0, 1e-12);
}

TEST(Posterior, MatchesBlockInverseConditioning) {
  for (auto kind : kAllKinds) {
    const auto spec = KernelSpec::preset(kind);
    const auto cx = uniform_points(3, 21);
    const auto cy = uniform_points(3, 22, -1.0, 1.0);
    const auto tx = uniform_points(4, 23);

    // Joint covariance of (y_c, f_t); condition via an explicit inverse.
    gnp::testing::Dense kcc = gnp::testing::dense_zeros(3, 3), ktc = gnp::testing::dense_zeros(4, 3),
                   ktt = gnp::testing::dense_zeros(4, 4);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) kcc[i][j] = gp::kernel_eval(spec, cx[i], cx[j]) + (i == j ? kNoise : 0.0);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 3; ++j) ktc[i][j] = gp::kernel_eval(spec, tx[i], cx[j]);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) ktt[i][j] = gp::kernel_eval(spec, tx[i], tx[j]);
    const auto a = gnp::testing::dense_mul(ktc, gnp::testing::gauss_jordan_inverse(kcc));

    const auto post = gp::posterior(spec, kNoise, cx, cy, tx);
    double worst = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      double m = 0.0;
      for (std::size_t j = 0; j < 3; ++j) m += a[i][j] * cy[j];
      worst = std::max(worst, std::abs(m - post.mean[i]));
      for (std::size_t k = 0; k < 4; ++k) {
        double c = ktt[i][k];
        for (std::size_t j = 0; j < 3; ++j) c -= a[i][j] * ktc[k][j];
        worst = std::max(worst, std::abs(c - post.covariance(i, k)));
      }
    }
    EXPECT_LT(worst, 1e-8) << gp::to_string(kind);
  }
}

TEST(Posterior, CovarianceSymmetricWithNonNegativeDiagonal) {
  const auto spec = KernelSpec::preset(KernelKind::noisy_mixture);
  const auto cx = uniform_points(30, 31);
  const auto cy = uniform_points(30, 32);
  const auto tx = uniform_points(50, 33);
  const auto post = gp::posterior(spec, kNoise, cx, cy, tx);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_GE(post.covariance(i, i), 0.0);
    for (std::size_t j = 0; j < 50; ++j) EXPECT_LE(std::abs(post.covariance(i, j) - post.covariance(j, i)), 1e-10);
  }
}

TEST(Posterior, VarianceNeverExceedsPrior) {
  for (auto kind : kAllKinds) {
    const auto spec = KernelSpec::preset(kind);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto cx = uniform_points(1 + seed % 10, 100 + seed);
      const auto cy = uniform_points(cx.size(), 200 + seed);
      const auto tx = uniform_points(15, 300 + seed);
      const double noise = seed % 2 == 0 ? kNoise : 0.0;
      const auto post = gp::posterior(spec, noise, cx, cy, tx);
      for (std::size_t i = 0; i < tx.size(); ++i)
        EXPECT_LE(post.covariance(i, i), spec.total_variance() + 1e-8);
    }
  }
}

TEST(Posterior, InvariantToContextPermutation) {
  const auto spec = KernelSpec::preset(KernelKind::weakly_periodic);
  auto cx = uniform_points(12, 41);
  auto cy = uniform_points(12, 42);
  const auto tx = uniform_points(9, 43);
  const auto a = gp::posterior(spec, kNoise, cx, cy, tx);
  std::vector<std::size_t> perm(cx.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[2], perm[7]);
  std::vector<double> px, py;
  for (auto p : perm) {
    px.push_back(cx[p]);
    py.push_back(cy[p]);
  }
  const auto b = gp::posterior(spec, kNoise, px, py, tx);
  for (std::size_t i = 0; i < tx.size(); ++i) EXPECT_NEAR(a.mean[i], b.mean[i], 1e-10);
  EXPECT_LT(nd::max_abs_diff(a.covariance, b.covariance), 1e-10);
}

TEST(Posterior, NestedContextsImproveAverageLoglik) {
  // Sampled tasks from the true prior: conditioning on a superset of the
  // context cannot lower the expected predictive log-likelihood.
  const auto spec = KernelSpec::preset(KernelKind::eq);
  double small_total = 0.0, large_total = 0.0;
  const int tasks = 1000;
  for (int t = 0; t < tasks; ++t) {
    CounterRng rng(5, static_cast<std::uint64_t>(t), Purpose::test_task);
    std::vector<double> xs(14);
    for (double& x : xs) x = rng.uniform(-2.0, 2.0);
    const auto ys = gp::prior_sample(spec, kNoise, xs, rng);
    const std::span<const double> all_x(xs), all_y(ys);
    const auto tx = all_x.subspan(10), ty = all_y.subspan(10);
    const auto small = gp::with_noise(gp::posterior(spec, kNoise, all_x.first(3), all_y.first(3), tx), kNoise);
    const auto large = gp::with_noise(gp::posterior(spec, kNoise, all_x.first(10), all_y.first(10), tx), kNoise);
    small_total += gp::oracle_loglik(small, ty, false) / 4.0;
    large_total += gp::oracle_loglik(large, ty, false) / 4.0;
  }
  EXPECT_GE(large_total / tasks, small_total / tasks);
}

TEST(PriorSample, DeterministicPerSeed) {
  const auto spec = KernelSpec::preset(KernelKind::matern52);
  const auto xs = uniform_points(40, 51);
  const auto a = gp::prior_sample(spec, kNoise, xs, 99);
  const auto b = gp::prior_sample(spec, kNoise, xs, 99);
  const auto c = gp::prior_sample(spec, kNoise, xs, 100);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(PriorSample, MonteCarloVarianceAtOnePoint) {
  const auto spec = KernelSpec::preset(KernelKind::eq);
  const std::vector<double> xs{0.4};
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    CounterRng rng(17, static_cast<std::uint64_t>(i), Purpose::sample);
    const double y = gp::prior_sample(spec, kNoise, xs, rng)[0];
    sum += y;
    sum2 += y * y;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  EXPECT_NEAR(var, 1.0025, 0.02);
}

TEST(PriorSample, CoincidentInputsAgreeWithoutNoise) {
  const auto spec = KernelSpec::preset(KernelKind::eq);
  const std::vector<double> xs{0.7, 0.7};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto y = gp::prior_sample(spec, 0.0, xs, seed);
    EXPECT_NEAR(y[0], y[1], 1e-8);
  }
}

TEST(PriorSample, EmpiricalCovarianceMatchesGram) {
  const auto spec = KernelSpec::preset(KernelKind::weakly_periodic);
  const std::vector<double> xs{-0.5, -0.4, 0.3};
  const auto k = gp::gram(spec, xs, xs);
  const int n = 40000;
  gnp::testing::Dense acc = gnp::testing::dense_zeros(3, 3);
  for (int s = 0; s < n; ++s) {
    CounterRng rng(23, static_cast<std::uint64_t>(s), Purpose::sample);
    const auto y = gp::prior_sample(spec, 0.0, xs, rng);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) acc[i][j] += y[i] * y[j] / n;
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(acc[i][j], k(i, j), 0.04) << i << "," << j;
}

TEST(OracleLoglik, StandardNormalAtMode) {
  gp::GaussianMoments g{{0.0}, nd::Tensor::identity(1)};
  const std::vector<double> y{0.0};
  EXPECT_NEAR(gp::oracle_loglik(g, y, false), -0.5 * std::log(2.0 * M_PI), 1e-14);
  EXPECT_NEAR(gp::oracle_loglik(g, y, false), -0.91894, 1e-5);
  EXPECT_NEAR(gp::oracle_loglik(g, y, true), -0.91894, 1e-5);
}

TEST(OracleLoglik, DiagonalMatchesFullOnDiagonalCovariance) {
  gp::GaussianMoments g{{0.1, -0.3, 2.0}, nd::Tensor::matrix(3, 3)};
  g.covariance(0, 0) = 0.5;
  g.covariance(1, 1) = 2.0;
  g.covariance(2, 2) = 0.01;
  const std::vector<double> y{0.4, 0.0, 2.05};
  EXPECT_NEAR(gp::oracle_loglik(g, y, true), gp::oracle_loglik(g, y, false), 1e-12);
}

TEST(OracleLoglik, MatchesExplicitInverseFormula) {
  const auto spec = KernelSpec::preset(KernelKind::matern52);
  const auto xs = uniform_points(6, 61);
  auto g = gp::with_noise(gp::GaussianMoments{uniform_points(6, 62), gp::gram(spec, xs, xs)}, kNoise);
  const auto y = uniform_points(6, 63);
  gnp::testing::Dense k = gnp::testing::dense_zeros(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) k[i][j] = g.covariance(i, j);
  EXPECT_NEAR(gp::oracle_loglik(g, y, false), gnp::testing::dense_gaussian_logpdf(y, g.mean, k), 1e-8);
}

TEST(OracleLoglik, FullBeatsDiagonalOnAverage) {
  const auto spec = KernelSpec::preset(KernelKind::eq);
  const std::vector<double> xs{-0.3, -0.1, 0.0, 0.2, 0.5};
  const auto g = gp::with_noise(gp::GaussianMoments{std::vector<double>(5, 0.0), gp::gram(spec, xs, xs)}, kNoise);
  double full = 0.0, diag = 0.0;
  for (int s = 0; s < 1000; ++s) {
    const auto y = gp::prior_sample(spec, kNoise, xs, static_cast<std::uint64_t>(s));
    full += gp::oracle_loglik(g, y, false);
    diag += gp::oracle_loglik(g, y, true);
  }
  EXPECT_GT(full, diag);
}

TEST(OracleLoglik, Errors) {
  gp::GaussianMoments g{{0.0, 0.0}, nd::Tensor::identity(2)};
  const std::vector<double> y{0.0};
  EXPECT_THROW(gp::oracle_loglik(g, y, false), std::invalid_argument);
  gp::GaussianMoments bad{{0.0, 0.0}, nd::Tensor::matrix(2, 2, -1.0)};
  bad.covariance(0, 1) = bad.covariance(1, 0) = 0.0;
  const std::vector<double> y2{0.0, 0.0};
  EXPECT_THROW(gp::oracle_loglik(bad, y2, false), nd::NotPositiveDefinite);
  EXPECT_THROW(gp::oracle_loglik(bad, y2, true), nd::NotPositiveDefinite);
}
