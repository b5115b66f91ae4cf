#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "critlab/gauss.hpp"
#include "oracles.hpp"

using namespace critlab;

namespace {

std::vector<double> log_spaced(double lo, double hi, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return out;
}

}  // namespace

TEST(GaussianRegression, IndependentBlocksLeaveYUnchanged) {
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(4, 4);
  joint.topLeftCorner(2, 2) << 2.0, 0.3, 0.3, 1.0;
  joint.bottomRightCorner(2, 2) << 1.0, 0.5, 0.5, 3.0;
  const auto law = gaussian_regression<double>(joint, 2);
  EXPECT_TRUE(law.cov.isApprox(joint.topLeftCorner(2, 2), 1e-15));
  EXPECT_TRUE(law.coeff.isZero());
}

TEST(GaussianRegression, PerfectConditioningGivesZero) {
  Eigen::MatrixXd joint = Eigen::MatrixXd::Ones(2, 2);
  // Y = Z makes the joint singular only in (Y, Z); Z alone is fine.
  const auto law = gaussian_regression<double>(joint, 1);
  EXPECT_NEAR(law.cov(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(law.coeff(0, 0), 1.0, 1e-15);
}

TEST(GaussianRegression, SingularConditioningBlockIsRejected) {
  Eigen::MatrixXd joint = Eigen::MatrixXd::Identity(3, 3);
  joint.bottomRightCorner(2, 2) = Eigen::MatrixXd::Ones(2, 2);
  try {
    gaussian_regression<double>(joint, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
  }
}

TEST(GaussianRegression, IndefiniteResultIsRejected) {
  Eigen::MatrixXd joint(2, 2);
  joint << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(gaussian_regression<double>(joint, 1), Error);
}

// Empirical residual covariance of least-squares regression on samples.
TEST(GaussianRegression, MatchesSamplingOracle) {
  std::mt19937_64 rng(2024);
  const Eigen::MatrixXd joint = oracle::random_spd(6, rng);
  const auto law = gaussian_regression<double>(joint, 2);

  const Eigen::MatrixXd chol = joint.llt().matrixL();
  const int n = 1'000'000;
  std::normal_distribution<double> g;
  Eigen::MatrixXd samples(6, n);
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd e(6);
    for (int i = 0; i < 6; ++i) e(i) = g(rng);
    samples.col(k) = chol * e;
  }
  const Eigen::MatrixXd y = samples.topRows(2);
  const Eigen::MatrixXd z = samples.bottomRows(4);
  const Eigen::MatrixXd beta = (z * z.transpose()).ldlt().solve(z * y.transpose()).transpose();
  const Eigen::MatrixXd resid = y - beta * z;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j <= i; ++j) {
      const Eigen::ArrayXd prod = resid.row(i).array() * resid.row(j).array();
      const double mean = prod.mean();
      const double se = std::sqrt((prod - mean).square().sum() / (n - 1) / n);
      EXPECT_NEAR(mean, law.cov(i, j), 3 * se) << i << "," << j;
    }
  }
}

TEST(GaussianRegression, ConditioningNeverIncreasesVariance) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int ny = 1 + trial % 3;
    const Eigen::MatrixXd joint = oracle::random_spd(ny + 4, rng, 0.01, 3.0);
    const auto law = gaussian_regression<double>(joint, ny);
    for (int i = 0; i < ny; ++i) EXPECT_LE(law.cov(i, i), joint(i, i) + 1e-14);
  }
}

TEST(GaussianDensity, StandardCases) {
  EXPECT_NEAR(gaussian_density<double>(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3)),
              std::pow(2 * std::numbers::pi, -1.5), 1e-16);
  EXPECT_NEAR(gaussian_density<double>(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3)), 0.0634936,
              1e-7);
  for (double s : {-2.0, -0.3, 0.0, 1.7}) {
    EXPECT_NEAR(gaussian_density<double>(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Constant(1, s)),
                std::exp(-s * s / 2) / std::sqrt(2 * std::numbers::pi), 1e-16);
  }
  EXPECT_THROW(gaussian_density<double>(Eigen::MatrixXd::Ones(2, 2), Eigen::VectorXd::Zero(2)), Error);
}

TEST(GaussianDensity, MatchesEigendecompositionOracle) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 6;
    const Eigen::MatrixXd cov = oracle::random_spd(n, rng);
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = g(rng);
    const double want = oracle::density_by_eigen(cov, x);
    EXPECT_NEAR(gaussian_density<double>(cov, x), want, 1e-12 * std::max(1.0, want));
  }
}

TEST(SigmaSet, DiagonalStructureFromNormalization) {
  for (const auto& model : {normalize(KernelModel::plane_wave()), KernelModel::bargmann_fock()}) {
    for (double r : {0.01, 0.7, 3.0, 20.0}) {
      const auto set = assemble_sigma(model, Point(0.3, -0.2), Point(0.3 + r * 0.6, -0.2 + r * 0.8));
      ASSERT_TRUE(set.pair_valid);
      for (int i = 0; i < 4; ++i) EXPECT_NEAR(set.sigma2(i, i), 1.0, 1e-14);
      EXPECT_TRUE(set.sigma7.isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-14));
      EXPECT_NEAR(set.sigma2_sq, 1.0, 1e-14);
      EXPECT_TRUE(set.sigma3.isApprox(set.sigma3.transpose()));
    }
  }
}

TEST(SigmaSet, CoincidentPointsFillOnlyOnDiagonalBlocks) {
  const auto set = assemble_sigma(KernelModel::bargmann_fock(), Point(1, 1), Point(1, 1));
  EXPECT_FALSE(set.pair_valid);
  EXPECT_TRUE(set.degenerate);
  EXPECT_EQ(set.sigma3.size(), 0);
  EXPECT_TRUE(set.sigma7.isApprox(Eigen::MatrixXd::Identity(3, 3)));
  // Hessian covariance for the Gaussian kernel: (3, 1, 3) diagonal, 1 off.
  Eigen::Matrix3d want;
  want << 3, 0, 1, 0, 1, 0, 1, 0, 3;
  EXPECT_TRUE(set.sigma6.isApprox(want, 1e-14));
}

TEST(SigmaSet, FarPairsDecorrelate) {
  const auto bf = assemble_sigma(KernelModel::bargmann_fock(), Point(0, 0), Point(50, 0));
  EXPECT_NEAR(bf.sigma1.determinant(), 1.0, 1e-3);
  EXPECT_NEAR(bf.sigma2.determinant(), 1.0, 1e-3);
  // J0 decays like r^{-1/2}; the limit is visible at much larger separations.
  const auto pw_model = normalize(KernelModel::plane_wave());
  const auto pw = assemble_sigma(pw_model, Point(0, 0), Point(5000, 0));
  EXPECT_NEAR(pw.sigma1.determinant(), 1.0, 1e-3);
  EXPECT_NEAR(pw.sigma2.determinant(), 1.0, 1e-3);
  const auto pw50 = assemble_sigma(pw_model, Point(0, 0), Point(50, 0));
  EXPECT_NEAR(pw50.sigma1.determinant(), 1.0, 5e-2);
}

TEST(SigmaSet, DegenerateFlagNearTheDiagonal) {
  const auto model = KernelModel::bargmann_fock();
  EXPECT_FALSE(assemble_sigma(model, Point(0, 0), Point(0.5, 0)).degenerate);
  // the small Sigma_2 eigenvalues scale like r^2
  EXPECT_FALSE(assemble_sigma(model, Point(0, 0), Point(1e-3, 0)).degenerate);
  EXPECT_TRUE(assemble_sigma(model, Point(0, 0), Point(1e-7, 0)).degenerate);
}

// Determinant identities from the regression, evaluated in quad precision.
TEST(SigmaSet, RegressionDeterminantIdentities) {
  for (const auto& model : {normalize(KernelModel::plane_wave()), KernelModel::bargmann_fock()}) {
    for (double r : log_spaced(1e-3, 50.0, 40)) {
      const auto set = assemble_sigma<quad>(model, Point(0, 0), Point(r, 0));
      const quad d1 = set.sigma1.determinant();
      const quad d2 = set.sigma2.determinant();
      const quad d3 = set.sigma3.determinant();
      const quad d4 = set.sigma4.determinant();
      EXPECT_LT(to_double(abs(d1 * d2 - d3) / abs(d3)), 1e-8) << model.id() << " r=" << r;
      EXPECT_LT(to_double(abs(set.sigma1_sq * d2 - d4) / abs(d4)), 1e-8) << model.id() << " r=" << r;
    }
  }
}

TEST(SigmaSet, JsonCarriesDeterminants) {
  const auto set = assemble_sigma(KernelModel::bargmann_fock(), Point(0, 0), Point(1, 0));
  const auto j = to_json(set);
  EXPECT_TRUE(j.contains("det_sigma3"));
  EXPECT_EQ(j["sigma5"].size(), 4u);
  EXPECT_EQ(j["sigma5"][0].size(), 3u);
}

TEST(MatrixLemma, ClosedFormExamples) {
  auto [z1, z2] = matrix_lemma_dets<double>({0, 0, 0, 0, 0});
  EXPECT_EQ(z1, 0.0);
  EXPECT_EQ(z2, 0.0);
  auto [i1, i2] = matrix_lemma_dets<double>({0, 1, 1, 0, 0});
  EXPECT_EQ(i1, 1.0);
  EXPECT_EQ(i2, 1.0);
  auto [d1, d2] = matrix_lemma_dets<double>({0.1, 0.2, 0.3, 0, 0});
  EXPECT_NEAR(d1, 0.1785, 1e-15);
  EXPECT_NEAR(d2, 0.1836, 1e-15);
}

TEST(MatrixLemma, DirectDeterminantOfHandAssembledMatrices) {
  // written out independently of lemma_matrix_a1 / a2
  Eigen::Matrix<double, 5, 5> a1;
  a1 << 1, 0, 0, -0.1, 0,
        0, 1, 0, 0.8, 0,
        0, 0, 1, 0, 0.7,
        -0.1, 0.8, 0, 1, 0,
        0, 0, 0.7, 0, 1;
  Eigen::Matrix4d a2;
  a2 << 1, 0, 0.8, 0,
        0, 1, 0, 0.7,
        0.8, 0, 1, 0,
        0, 0.7, 0, 1;
  EXPECT_NEAR(a1.determinant(), 0.1785, 1e-14);
  EXPECT_NEAR(a2.determinant(), 0.1836, 1e-14);
  const LemmaMatrixParams<double> p{0.1, 0.2, 0.3, 0, 0};
  EXPECT_TRUE(lemma_matrix_a1(p).isApprox(a1));
  EXPECT_TRUE(lemma_matrix_a2(p).isApprox(a2));
}

TEST(MatrixLemma, DiagonalExamples) {
  EXPECT_TRUE(matrix_lemma_diag<double>({0.3, 0.5, 0.7, 0, 0}).isZero());
  EXPECT_TRUE(matrix_lemma_diag<double>({0, 1, 1, 1, 1}).isApprox(Eigen::Vector3d(1, 1, 1)));
  for (double bad : {0.0, 2.0}) {
    try {
      matrix_lemma_diag<double>({0, bad, 1, 1, 1});
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
    }
    EXPECT_THROW(matrix_lemma_diag<double>({0, 1, bad, 1, 1}), Error);
  }
}

TEST(MatrixLemma, RandomDrawsAgreeWithDenseComputation) {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> ua(-1.0, 1.0), u2(0.05, 1.95), ub(-2.0, 2.0);
  double worst = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const LemmaMatrixParams<double> p{ua(rng), u2(rng), u2(rng), ub(rng), ub(rng)};
    const auto [c1, c2] = matrix_lemma_dets(p);
    const double e1 = lemma_matrix_a1(p).determinant();
    const double e2 = lemma_matrix_a2(p).determinant();
    const Eigen::Matrix<double, 4, 3> a3 = lemma_matrix_a3(p);
    const Eigen::Matrix3d full = a3.transpose() * lemma_matrix_a2(p).partialPivLu().solve(a3);
    const Eigen::Vector3d diag = matrix_lemma_diag(p);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); };
    worst = std::max({worst, rel(c1, e1), rel(c2, e2)});
    for (int k = 0; k < 3; ++k)
      if (full(k, k) != 0) worst = std::max(worst, rel(diag(k), full(k, k)));
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(MatrixLemma, ParametersReadOffTheCovariance) {
  // The lemma's block structure: Sigma_4 and Sigma_2 equal A1 and A2.
  for (const auto& model : {normalize(KernelModel::plane_wave()), KernelModel::bargmann_fock()}) {
    const auto set = assemble_sigma(model, Point(0, 0), Point(0.4, 0));
    const auto p = lemma_params(set);
    EXPECT_TRUE(lemma_matrix_a2(p).isApprox(Eigen::Matrix4d(set.sigma2), 1e-12));
    const auto [d1, d2] = matrix_lemma_dets(p);
    EXPECT_NEAR(d2, set.sigma2.determinant(), 1e-12);
    EXPECT_NEAR(d1, set.sigma4.determinant(), 1e-12);
  }
}

TEST(DetBound, IndependentStandardCase) {
  std::mt19937_64 rng(5);
  for (int d : {1, 2}) {
    for (int n : {1, 2}) {
      Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(8 + d, 8 + d);
      const Eigen::MatrixXd x = oracle::random_spd(4, rng);
      cov.topLeftCorner(4, 4) = x;
      std::vector<double> diag{x(0, 0), x(1, 1), x(2, 2), x(3, 3)};
      std::sort(diag.rbegin(), diag.rend());
      const double want = det_bound_default_constant(n) * std::pow(diag[0] * diag[1], n / 2.0);
      EXPECT_NEAR(det_bound({cov, d}, n, DetBoundForm::Conditional), want, 1e-12 * want);
      EXPECT_NEAR(det_bound({cov, d}, n, DetBoundForm::Conditional, 1.0),
                  std::pow(diag[0] * diag[1], n / 2.0), 1e-12);
    }
  }
}

TEST(DetBound, ConditionalFormNeverExceedsMarginalForm) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 1 + trial % 2;
    const int n = 1 + (trial / 2) % 2;
    const DetBoundSetup setup{oracle::random_spd(8 + d, rng, 0.05, 3.0), d};
    EXPECT_LE(det_bound(setup, n, DetBoundForm::Conditional),
              det_bound(setup, n, DetBoundForm::Marginal) * (1 + 1e-12));
  }
}

TEST(DetBound, RejectsUnsupportedShapes) {
  EXPECT_THROW(det_bound({Eigen::MatrixXd::Identity(11, 11), 3}, 1, DetBoundForm::Marginal), Error);
  EXPECT_THROW(det_bound({Eigen::MatrixXd::Identity(9, 9), 1}, 3, DetBoundForm::Marginal), Error);
}

TEST(QuadraticExpSup, OneDimensionalExample) {
  const auto sup = quadratic_exp_sup(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1), 1);
  EXPECT_NEAR(sup.value, 2 / std::numbers::e, 1e-15);
  EXPECT_NEAR(std::abs(sup.argmax(0)), std::sqrt(2.0), 1e-15);
  double coarse = 0;
  const double grid = oracle::zoomed_grid_max(
      [](const Eigen::VectorXd& y) { return y(0) * y(0) * std::exp(-y(0) * y(0) / 2); },
      Eigen::VectorXd::Constant(1, -4), Eigen::VectorXd::Constant(1, 4), 6, &coarse);
  EXPECT_LE(coarse, sup.value);
  EXPECT_NEAR(grid, sup.value, 1e-6 * sup.value);
}

TEST(QuadraticExpSup, RandomInstancesMatchZoomedGrid) {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> us(-2.0, 2.0), ul(0.1, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 2;
    const int n = 1 + (trial / 2) % 2;
    Eigen::VectorXd s(d), lam(d);
    for (int k = 0; k < d; ++k) {
      s(k) = us(rng);
      lam(k) = ul(rng);
    }
    const auto sup = quadratic_exp_sup(s, lam, n);
    EXPECT_NEAR(quadratic_exp_objective(s, lam, n, sup.argmax), sup.value, 1e-12 * sup.value);
    const Eigen::VectorXd half = (1.5 * (2.0 * n * lam.array()).sqrt()).matrix();
    const double grid = oracle::zoomed_grid_max(
        [&](const Eigen::VectorXd& y) { return quadratic_exp_objective(s, lam, n, y); }, -half, half, 8);
    EXPECT_LE(grid, sup.value * (1 + 1e-12));
    EXPECT_NEAR(grid, sup.value, 1e-6 * sup.value);
  }
}

TEST(LemmaSuites, MatrixSuitePassesQuickly) {
  const auto r = matrix_lemma_suite(10000, 1);
  EXPECT_TRUE(r.pass);
  EXPECT_LE(r.max_rel_error, 1e-10);
  EXPECT_LT(r.runtime_s, 5);
}

TEST(LemmaSuites, DetBoundSuitePasses) {
  const auto r = det_bound_suite(1000, 1);
  EXPECT_TRUE(r.pass) << r.to_json().dump();
}

TEST(LemmaSuites, GridSearchNeverBeatsTheClosedForm) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> us(-2.0, 2.0), ul(0.1, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd s(2), lam(2);
    s << us(rng), us(rng);
    lam << ul(rng), ul(rng);
    const double sup = quadratic_exp_sup(s, lam, 2).value;
    EXPECT_LE(grid_search_sup(s, lam, 2), sup * (1 + 1e-12));
  }
}
