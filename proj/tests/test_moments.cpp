#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "critlab/moments.hpp"
#include "oracles.hpp"

using namespace critlab;

namespace {

const KernelModel kPlane = normalize(KernelModel::plane_wave());
const KernelModel kGauss = KernelModel::bargmann_fock();
const double kInf = std::numeric_limits<double>::infinity();

Replications synthetic(std::vector<std::vector<double>> heights, double R = 5, int dim = 2) {
  Replications r;
  r.dim = dim;
  r.kernel = "synthetic";
  r.R = R;
  r.M = 500;
  r.heights = std::move(heights);
  return r;
}

// A study table whose second moments follow m2(R, lambda) exactly.
template <class Law>
BoundStudy power_law_study(int dim, Law&& m2) {
  BoundStudy s;
  s.dim = dim;
  for (double R : {5.0, 10.0, 20.0, 40.0}) {
    for (double l : {0.01, 0.1, 1.0}) {
      BoundCell c;
      c.R = R;
      c.lambda = l;
      c.m2 = m2(R, l);
      c.bound_value = bound_value(dim, R, l);
      c.ratio = c.m2 / c.bound_value;
      s.cells.push_back(c);
    }
  }
  return s;
}

}  // namespace

TEST(BoundValue, BothBranches) {
  EXPECT_DOUBLE_EQ(bound_value(2, 10, 2), 1e4);
  EXPECT_DOUBLE_EQ(bound_value(2, 10, 0.02), 1e4 * 4e-4 + 100 * 0.02);
  EXPECT_DOUBLE_EQ(bound_value(2, 10, kInf), 1e4);
  EXPECT_DOUBLE_EQ(bound_value(1, 20, 2), 400);
  EXPECT_DOUBLE_EQ(bound_value(1, 20, 0.01), 400 * 1e-4 + 0.2);
}

TEST(Summarize, HandCountedReplications) {
  const auto reps = synthetic({{0.1, 0.3, 2.0}, {}, {0.2}, {-0.7, 0.5}});
  const auto m = summarize(reps, 0, 0.5);
  // counts 2, 0, 1, 1
  EXPECT_DOUBLE_EQ(m.mean, 1.0);
  EXPECT_DOUBLE_EQ(m.second_moment, 6.0 / 4);
  EXPECT_DOUBLE_EQ(m.variance, 0.5);
  EXPECT_DOUBLE_EQ(m.p_ge1, 0.75);
  EXPECT_DOUBLE_EQ(m.p_ge2, 0.25);
  EXPECT_DOUBLE_EQ(summarize(reps, -kInf, kInf).mean, 6.0 / 4);
}

TEST(Jackknife, MeanMatchesClassicalStandardError) {
  std::mt19937_64 rng(4);
  std::poisson_distribution<int> pois(3.5);
  std::vector<double> x(300), y(300);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = pois(rng);
    y[i] = x[i] * x[i];
  }
  const auto classic = oracle::mean_se(x);
  EXPECT_NEAR(jackknife_se(x, y, [](double s, double, double n) { return s / n; }), classic.se, 1e-12);
  EXPECT_NEAR(jackknife_se(y, x, [](double s, double, double n) { return s / n; }), oracle::mean_se(y).se, 1e-12);
}

TEST(EstimateMoments, ZeroWidthWindowIsEmpty) {
  const auto m = estimate_moments(kPlane, 5, 0.3, 0.3, 50, 2);
  EXPECT_EQ(m.mean, 0);
  EXPECT_EQ(m.second_moment, 0);
}

TEST(EstimateMoments, RejectsFewReplications) {
  EXPECT_THROW(estimate_moments(kPlane, 5, -1, 1, 49, 2), Error);
}

TEST(EstimateMoments, FullWindowMatchesAreaTimesI5) {
  const auto m = estimate_moments(kPlane, 5, -kInf, kInf, 400, 3);
  const auto i5 = intensity_I5(kPlane, McConfig{200000, 3, 10000, 1});
  const double area = std::numbers::pi * 25;
  const double se = std::hypot(m.se_mean, area * i5.std_error);
  EXPECT_NEAR(m.mean, area * i5.estimate, 3 * se);
  EXPECT_FALSE(m.flagged);
}

TEST(EstimateMoments, WideningTheWindowNeverDecreasesMoments) {
  const auto reps = replicate(kGauss, 5, 60, 8);
  const std::vector<std::pair<double, double>> nested{{0, 0.01}, {-0.05, 0.1}, {-0.5, 0.5}, {-1, 2}, {-kInf, kInf}};
  double mean = 0, m2 = 0;
  for (const auto& [a, b] : nested) {
    const auto m = summarize(reps, a, b);
    EXPECT_GE(m.mean, mean);
    EXPECT_GE(m.second_moment, m2);
    EXPECT_GE(m.second_moment, m.mean);
    EXPECT_GE(m.second_moment, m.mean * m.mean - 3 * m.se_second_moment);
    mean = m.mean;
    m2 = m.second_moment;
  }
}

TEST(EstimateMoments, BitReproducibleAndThreadInvariant) {
  StudyConfig one, three;
  three.threads = 3;
  const auto a = estimate_moments(kPlane, 5, -0.5, 0.5, 60, 11, one).to_json().dump();
  const auto b = estimate_moments(kPlane, 5, -0.5, 0.5, 60, 11, one).to_json().dump();
  auto c = estimate_moments(kPlane, 5, -0.5, 0.5, 60, 11, three).to_json();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c.dump());
  EXPECT_NE(a, estimate_moments(kPlane, 5, -0.5, 0.5, 60, 12, one).to_json().dump());
}

TEST(VerifyFirstMoment, PlaneWaveNarrowWindow) {
  const auto r = verify_first_moment(kPlane, 10, -0.5, 0.5, 400, 7);
  EXPECT_TRUE(r.pass) << r.to_json().dump();
}

TEST(VerifyFirstMoment, BargmannFockFullWindow) {
  const auto r = verify_first_moment(kGauss, 10, -kInf, kInf, 150, 7);
  EXPECT_TRUE(r.pass) << r.to_json().dump();
}

TEST(VerifyFirstMoment, MisScaledKernelFails) {
  const auto r = verify_first_moment(KernelModel::bargmann_fock(1.0, 2.0), 10, -0.5, 0.5, 100, 7);
  EXPECT_FALSE(r.pass) << r.to_json().dump();
}

TEST(ScalingFit, ExactPowerLaws) {
  const auto quartic = scaling_fit(power_law_study(2, [](double R, double l) { return std::pow(R, 4) * l * l; }));
  ASSERT_EQ(quartic.in_R.size(), 3u);
  ASSERT_EQ(quartic.in_lambda.size(), 4u);
  for (const auto& f : quartic.in_R) {
    EXPECT_NEAR(f.slope, 4, 1e-12);
    EXPECT_NEAR(f.ci_low, 4, 1e-6);
    EXPECT_NEAR(f.ci_high, 4, 1e-6);
  }
  for (const auto& f : quartic.in_lambda) EXPECT_NEAR(f.slope, 2, 1e-12);
  const auto linear = scaling_fit(power_law_study(2, [](double R, double l) { return R * R * l; }));
  for (const auto& f : linear.in_R) EXPECT_NEAR(f.slope, 2, 1e-12);
  for (const auto& f : linear.in_lambda) EXPECT_NEAR(f.slope, 1, 1e-12);
}

TEST(ScalingFit, DropsZeroRowsAndNeedsThreeRadii) {
  auto study = power_law_study(2, [](double R, double l) { return R * l; });
  study.cells[0].m2 = 0;
  const auto fit = scaling_fit(study);
  EXPECT_EQ(fit.in_R.front().points, 3);
  BoundStudy small;
  small.cells = {study.cells[0], study.cells[5]};
  EXPECT_THROW(scaling_fit(small), Error);
}

TEST(AssembleStudy, FittedConstantDominatesEveryCell) {
  std::mt19937_64 rng(5);
  std::poisson_distribution<int> pois(4.0);
  std::uniform_real_distribution<double> height(-2, 2);
  std::vector<Replications> per_R;
  for (double R : {5.0, 10.0, 20.0}) {
    std::vector<std::vector<double>> hs(200);
    for (auto& h : hs) {
      const int n = pois(rng) * static_cast<int>(R / 5);
      for (int i = 0; i < n; ++i) h.push_back(height(rng));
    }
    per_R.push_back(synthetic(hs, R));
  }
  const auto study = assemble_study(per_R, {0.02, 0.5, 2.0, 0.1}, 0.0);
  ASSERT_EQ(study.cells.size(), 12u);
  for (const auto& c : study.cells) {
    if (c.excluded) {
      EXPECT_TRUE(c.m2 == 0 || c.se_m2 > 0.3 * c.m2);
      continue;
    }
    EXPECT_GT(c.ratio, 0);
    EXPECT_LE(c.ratio, study.c_star);
  }
  EXPECT_EQ(study.cells[3].lambda, 2.0);
}

TEST(BoundStudy, RealStudyIsMonotoneInLambda) {
  const auto study = verify_second_moment_bound(kPlane, {5, 7, 10}, {0.05, 0.5, 2}, 60, 3);
  for (std::size_t i = 0; i + 1 < study.cells.size(); ++i) {
    if (study.cells[i].R != study.cells[i + 1].R) continue;
    EXPECT_LE(study.cells[i].m2, study.cells[i + 1].m2);
    EXPECT_LE(study.cells[i].mean, study.cells[i + 1].mean);
  }
  std::ostringstream os;
  study.write_csv(os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "dim,R,lambda,mean,m2,se_mean,se_m2,bound_value,ratio,excluded");
  EXPECT_EQ(study.to_json()["cells"].size(), 9u);
}

TEST(Crossover, TinyWindowHasAtMostOnePoint) {
  const auto reps = replicate(kPlane, 5, 1500, 21);
  const auto c = crossover_check(reps, -5e-4, 5e-4);
  ASSERT_GT(c.moments.mean, 0);
  EXPECT_TRUE(c.pass) << c.to_json().dump();
  EXPECT_LT(c.moments.p_ge2, 0.01);
}

TEST(Crossover, RatioOfSyntheticCounts) {
  // counts 1, 0, 2, 0: E N^2 / E N = 5 / 3
  const auto c = crossover_check(synthetic({{0.0}, {}, {0.0, 0.0}, {}}), -1, 1);
  EXPECT_NEAR(c.ratio, 5.0 / 3, 1e-15);
  EXPECT_FALSE(c.pass);
}

TEST(WaveRefinement, MeanCountAgreesWithKacRiceAcrossM) {
  for (int M : {64, 500, 2000}) {
    StudyConfig cfg;
    cfg.M = M;
    const auto r = verify_first_moment(kPlane, 5, -0.5, 0.5, 200, 19, cfg, 100000);
    EXPECT_TRUE(r.pass) << "M=" << M << " " << r.to_json().dump();
  }
}
