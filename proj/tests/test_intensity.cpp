#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "critlab/intensity.hpp"
#include "oracles.hpp"

using namespace critlab;

namespace {

const KernelModel kPlane = normalize(KernelModel::plane_wave());
const KernelModel kGauss = KernelModel::bargmann_fock();

double combined(double a, double b) { return std::sqrt(a * a + b * b); }

double product_se(const IntensityValue& a, const IntensityValue& b) {
  return combined(a.std_error * b.estimate, b.std_error * a.estimate);
}

}  // namespace

TEST(IntensityI3, DensityFactorAtZero) {
  const auto v = intensity_I3(kGauss, 0.0, McConfig{2000, 1, 1000, 1});
  EXPECT_NEAR(v.density, std::pow(2 * std::numbers::pi, -1.5), 1e-16);
}

TEST(IntensityI3, PositiveAndEvenInHeight) {
  const McConfig mc{20000, 5, 5000, 1};
  for (const auto& model : {kPlane, kGauss}) {
    for (double s : {0.0, 0.4, 1.3, 2.5}) {
      const auto up = intensity_I3(model, s, mc);
      const auto down = intensity_I3(model, -s, mc);
      EXPECT_GT(up.estimate, 0);
      // antithetic pairs make the estimator exactly even under common draws
      EXPECT_NEAR(up.estimate, down.estimate, 1e-14 * up.estimate);
      const auto other = intensity_I3(model, -s, McConfig{20000, 6, 5000, 1});
      EXPECT_NEAR(up.estimate, other.estimate, 3 * combined(up.std_error, other.std_error));
    }
  }
}

// For the Gaussian kernel, (h11, h12, h22) | f = 0, grad f = 0 has covariance
// diag(2, 1, 2) (from Sigma_6 and Cov[H, f] = (-1, 0, -1)). The h12 integral
// is closed-form and the rest goes to a 2D Gauss-Hermite rule.
TEST(IntensityI3, GaussianKernelMatchesHermiteQuadrature) {
  Eigen::VectorXd x, w;
  oracle::gauss_hermite(80, x, w);
  double expect_abs_det = 0;
  for (int i = 0; i < x.size(); ++i)
    for (int j = 0; j < x.size(); ++j)
      expect_abs_det += w(i) * w(j) * oracle::abs_c_minus_z2(2 * x(i) * x(j));
  const double want = expect_abs_det * std::pow(2 * std::numbers::pi, -1.5);
  const auto v = intensity_I3(kGauss, 0.0, McConfig{200000, 9, 10000, 1});
  EXPECT_NEAR(v.estimate, want, 3 * v.std_error);
  EXPECT_LT(v.std_error, 0.01 * want);
}

TEST(IntensityI3, StandardErrorShrinksWithSamples) {
  const auto small = intensity_I3(kGauss, 0.5, McConfig{40000, 3, 10000, 1});
  const auto large = intensity_I3(kGauss, 0.5, McConfig{80000, 3, 10000, 1});
  const double ratio = small.std_error / large.std_error;
  EXPECT_NEAR(ratio, std::sqrt(2.0), 0.2 * std::sqrt(2.0));
}

TEST(IntensityI3, ThreadCountDoesNotChangeTheResult) {
  const McConfig one{40000, 21, 4000, 1};
  McConfig four = one;
  four.threads = 4;
  const auto a = intensity_I3(kPlane, 0.7, one);
  const auto b = intensity_I3(kPlane, 0.7, four);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.std_error, b.std_error);
}

TEST(IntensityI1, FactorizesAtLargeSeparationForGaussianKernel) {
  const McConfig mc{200000, 13, 10000, 1};
  for (double s : {0.0, 1.0}) {
    for (double t : {0.0, -1.0}) {
      const auto pair = intensity_I1(kGauss, 50.0, s, t, mc);
      const auto a = intensity_I3(kGauss, s, McConfig{200000, 31, 10000, 1});
      const auto b = intensity_I3(kGauss, t, McConfig{200000, 32, 10000, 1});
      EXPECT_NEAR(pair.estimate, a.estimate * b.estimate, 3 * combined(pair.std_error, product_se(a, b)));
    }
  }
}

// J0 correlations are still ~0.07 at r = 50; the first-order correction
// vanishes at s = t = 0 by the sign symmetry of the conditional law.
TEST(IntensityI1, PlaneWaveFactorizesAtZeroHeights) {
  const auto pair = intensity_I1(kPlane, 50.0, 0.0, 0.0, McConfig{200000, 13, 10000, 1});
  const auto a = intensity_I3(kPlane, 0.0, McConfig{200000, 31, 10000, 1});
  const auto b = intensity_I3(kPlane, 0.0, McConfig{200000, 32, 10000, 1});
  EXPECT_NEAR(pair.estimate, a.estimate * b.estimate, 3 * combined(pair.std_error, product_se(a, b)));
}

TEST(IntensityI1, ExchangeSymmetry) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ur(0.2, 6.0), uh(-2.0, 2.0);
  for (int k = 0; k < 20; ++k) {
    const double r = ur(rng), s = uh(rng), t = uh(rng);
    const auto& model = k % 2 ? kPlane : kGauss;
    const auto st = intensity_I1(model, r, s, t, McConfig{40000, 100 + static_cast<std::uint64_t>(k), 10000, 1});
    const auto ts = intensity_I1(model, r, t, s, McConfig{40000, 200 + static_cast<std::uint64_t>(k), 10000, 1});
    EXPECT_GE(st.estimate, 0);
    EXPECT_NEAR(st.estimate, ts.estimate, 3 * combined(st.std_error, ts.std_error))
        << model.id() << " r=" << r << " s=" << s << " t=" << t;
  }
}

TEST(IntensityI1, SeedsAgreeForPlaneWaveAtUnitSeparation) {
  const auto a = intensity_I1(kPlane, 1.0, 0.0, 0.0, McConfig{100000, 1, 10000, 1});
  const auto b = intensity_I1(kPlane, 1.0, 0.0, 0.0, McConfig{100000, 2, 10000, 1});
  EXPECT_NEAR(a.estimate, b.estimate, 3 * combined(a.std_error, b.std_error));
}

// Equal heights: for s != t the pair density falls off steeply as r -> 0.
TEST(IntensityI1, ContinuousInSeparation) {
  for (const auto& model : {kPlane, kGauss}) {
    for (double r : {0.5, 1.0, 5.0}) {
      const auto a = intensity_I1(model, r, 0.3, 0.3, McConfig{100000, 41, 10000, 1});
      const auto b = intensity_I1(model, r * (1 + 1e-3), 0.3, 0.3, McConfig{100000, 42, 10000, 1});
      EXPECT_GT(a.estimate, 0);
      EXPECT_LT(std::abs(a.estimate - b.estimate), 5 * combined(a.std_error, b.std_error));
    }
  }
}

TEST(IntensityI1, DegeneratePairIsAnError) {
  try {
    intensity_I1(kGauss, 1e-8, 0, 0, McConfig{2000, 1, 1000, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
  }
}

TEST(IntensityI2, BoundedNearTheDiagonal) {
  const McConfig mc{200000, 17, 10000, 1};
  for (double s : {0.0, 1.0, -1.0}) {
    const auto a = intensity_I2(kGauss, 1e-2, s, mc);
    const auto b = intensity_I2(kGauss, 1e-3, s, mc);
    EXPECT_GT(a.estimate, 0);
    EXPECT_LT(std::max(a.estimate, b.estimate) / std::min(a.estimate, b.estimate), 2.0);
  }
  for (double s : {1.0, -1.0}) {
    const auto a = intensity_I2(kPlane, 1e-2, s, mc);
    const auto b = intensity_I2(kPlane, 1e-3, s, mc);
    EXPECT_LT(std::max(a.estimate, b.estimate) / std::min(a.estimate, b.estimate), 2.0);
  }
}

// The plane wave satisfies Laplacian f = -2 f, so at height 0 both Hessian
// determinants are O(r^2) near the diagonal and I2 vanishes like r^2.
TEST(IntensityI2, PlaneWaveVanishesAtZeroHeight) {
  const McConfig mc{100000, 17, 10000, 1};
  const auto a = intensity_I2(kPlane, 1e-2, 0.0, mc);
  const auto b = intensity_I2(kPlane, 1e-3, 0.0, mc);
  EXPECT_NEAR(a.estimate / b.estimate, 100.0, 2.0);
}

TEST(IntensityI4, FactorizesAtLargeSeparation) {
  for (const auto& model : {kPlane, kGauss}) {
    const auto i4 = intensity_I4(model, 50.0, McConfig{200000, 51, 10000, 1});
    const auto i5 = intensity_I5(model, McConfig{200000, 52, 10000, 1});
    const double p = i5.estimate * i5.estimate;
    EXPECT_NEAR(i4.estimate, p, 3 * combined(i4.std_error, 2 * i5.estimate * i5.std_error)) << model.id();
  }
}

TEST(IntensityI5, EqualsIntegralOfI3) {
  // same draws on both sides: the quadrature of the I3 estimator reproduces
  // the exact height integral inside mean_count
  const McConfig mc{20000, 77, 10000, 1};
  for (const auto& model : {kPlane, kGauss}) {
    auto f = [&](double s) { return intensity_I3(model, s, mc).estimate; };
    // phi(9) ~ 1e-18 relative to the bulk
    const double quadrature = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -9, 9, 4, 1e-9);
    const double R = 1 / std::sqrt(std::numbers::pi);  // pi R^2 = 1
    const auto exact = mean_count(model, R, -9, 9, mc);
    EXPECT_NEAR(quadrature, exact.value, 1e-6 * exact.value);
    const auto i5 = intensity_I5(model, McConfig{200000, 78, 10000, 1});
    const auto big = mean_count(model, R, -INFINITY, INFINITY, McConfig{200000, 79, 10000, 1});
    EXPECT_NEAR(big.value, i5.estimate, 3 * combined(big.std_error, i5.std_error)) << model.id();
  }
}

TEST(MeanCount, EmptyWindowAndWindowAlgebra) {
  const McConfig mc{20000, 3, 10000, 1};
  const auto empty = mean_count(kPlane, 10, 0.25, 0.25, mc);
  EXPECT_EQ(empty.value, 0.0);
  EXPECT_EQ(empty.std_error, 0.0);
  // adjacent windows add up under common draws
  const double left = mean_count(kGauss, 10, -1, 0.2, mc).value;
  const double right = mean_count(kGauss, 10, 0.2, 1.5, mc).value;
  const double both = mean_count(kGauss, 10, -1, 1.5, mc).value;
  EXPECT_NEAR(left + right, both, 1e-10 * both);
  EXPECT_THROW(mean_count(kGauss, 10, 1, 0, mc), Error);
}

TEST(MeanCount, ScalesWithArea) {
  const McConfig mc{20000, 3, 10000, 1};
  const double r5 = mean_count(kPlane, 5, -0.5, 0.5, mc).value;
  const double r10 = mean_count(kPlane, 10, -0.5, 0.5, mc).value;
  EXPECT_NEAR(r10, 4 * r5, 1e-12 * r10);
}

TEST(MeanCount, HeightIntegralAgainstKronrod) {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> g;
  for (int k = 0; k < 200; ++k) {
    const double A = g(rng), B = g(rng), C = g(rng);
    double a = 2 * g(rng), b = 2 * g(rng);
    if (a > b) std::swap(a, b);
    auto f = [&](double s) { return std::abs(A * s * s + B * s + C) * std::exp(-s * s / 2) / std::sqrt(2 * M_PI); };
    // split the oracle at the roots too, so the Kronrod rule sees smooth pieces
    std::vector<double> cuts{a, b};
    const double disc = B * B - 4 * A * C;
    if (disc > 0) {
      for (double root : {(-B + std::sqrt(disc)) / (2 * A), (-B - std::sqrt(disc)) / (2 * A)})
        if (root > a && root < b) cuts.push_back(root);
    }
    std::sort(cuts.begin(), cuts.end());
    double want = 0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
      want += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, cuts[i], cuts[i + 1], 10, 1e-13);
    EXPECT_NEAR(gaussian_abs_quadratic_integral(A, B, C, a, b), want, 1e-11 * std::max(1.0, want));
  }
  // total mass: E|Z^2 - 1|
  EXPECT_NEAR(gaussian_abs_quadratic_integral(1, 0, -1, -INFINITY, INFINITY), oracle::abs_c_minus_z2(1.0), 1e-14);
}

TEST(BoundPredict, FinitePositiveTermsAndMonotoneInWidth) {
  BoundConfig cfg;
  cfg.r_grid = 16;
  cfg.heights = 9;
  cfg.golden_iterations = 6;
  cfg.delta = 1.0;
  cfg.mc = McConfig{4000, 5, 4000, 1};
  const auto rep = bound_predict(kPlane, 10, 0, 0.1, cfg);
  for (double v : {rep.off_diagonal, rep.near_diagonal, rep.on_diagonal, rep.unwindowed}) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(v, 0);
  }
  EXPECT_EQ(rep.prediction, std::min(rep.windowed, rep.unwindowed));
  double last = 0;
  for (double w : {0.01, 0.05, 0.2, 0.5}) {
    const auto r = bound_predict(kGauss, 5, -w / 2, w / 2, cfg);
    EXPECT_GE(r.windowed, last);
    last = r.windowed;
  }
}

TEST(BoundPredict, CrossoverSeparatesTheTwoBranches) {
  BoundConfig cfg;
  cfg.r_grid = 12;
  cfg.heights = 5;
  cfg.golden_iterations = 0;
  cfg.delta = 0.5;
  cfg.mc = McConfig{4000, 5, 4000, 1};
  const auto rep = bound_predict(kGauss, 3, -0.05, 0.05, cfg);
  const double w = rep.crossover_width;
  ASSERT_GT(w, 0);
  const double a2 = rep.area * rep.area;
  const double at = a2 * w * w * rep.sup_I1.value + rep.area * w * (rep.sup_I2.value + rep.sup_I3.value);
  EXPECT_NEAR(at, rep.unwindowed, 1e-9 * rep.unwindowed);
}

TEST(DefaultDelta, LargestCleanCandidate) {
  EXPECT_EQ(default_delta(kGauss, BoundConfig{}), 1.0);
  EXPECT_EQ(default_delta(kPlane, BoundConfig{}), 1.0);
}

TEST(Asymptotics, LimitsMatchSpectralMoments) {
  const std::vector<double> rs{0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001};
  struct Case {
    KernelModel model;
    double det4, sigma1;
  };
  for (const auto& c : {Case{kPlane, 0.25, 1.0 / 3}, Case{kGauss, 2.0, 2.0 / 3}}) {
    const auto rep = near_diagonal_asymptotics(c.model, rs);
    EXPECT_NEAR(rep.predicted_det4, c.det4, 1e-12);
    EXPECT_NEAR(rep.predicted_sigma1, c.sigma1, 1e-12);
    EXPECT_NEAR(rep.limit_det4, c.det4, 0.02 * c.det4);
    EXPECT_NEAR(rep.limit_sigma1, c.sigma1, 0.02 * c.sigma1);
    EXPECT_LT(rep.fit_residual, 0.02);
    double lo = INFINITY, hi = 0;
    for (const auto& row : rep.rows) {
      lo = std::min(lo, row.n_over_r2);
      hi = std::max(hi, row.n_over_r2);
    }
    EXPECT_LE(hi / lo, 3.0);
  }
}

TEST(Asymptotics, TinySeparationsAreFlagged) {
  const auto rep = near_diagonal_asymptotics(kGauss, {1e-2, 1e-3, 1e-5});
  EXPECT_FALSE(rep.rows[1].flagged);
  EXPECT_TRUE(rep.rows[2].flagged);
  EXPECT_THROW(near_diagonal_asymptotics(kGauss, {1e-3, 1e-2}), Error);
  EXPECT_THROW(near_diagonal_asymptotics(kGauss, {0.7}), Error);
}
