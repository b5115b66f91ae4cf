// Acceptance run: one [PASS]/[FAIL] line per criterion. Pass criterion
// numbers as arguments to run a subset.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "critlab/critpoints.hpp"
#include "critlab/gauss.hpp"
#include "critlab/intensity.hpp"
#include "critlab/kernel.hpp"
#include "critlab/moments.hpp"
#include "critlab/oned.hpp"
#include "critlab/simulate.hpp"

using namespace critlab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const KernelModel& plane() {
  static const KernelModel m = normalize(KernelModel::plane_wave());
  return m;
}
const KernelModel& gauss() {
  static const KernelModel m = KernelModel::bargmann_fock();
  return m;
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome lemma_matrix() {
  const auto r = matrix_lemma_suite(10000, 1);
  return {r.pass && r.runtime_s < 5,
          "10000 draws, max rel err " + fmt(r.max_rel_error, 3) + ", " + fmt(r.runtime_s, 3) + " s"};
}

Outcome lemma_maximizer() {
  const auto r = det_bound_suite(1000, 1);
  return {r.pass, "1000 draws, sup rel err " + fmt(r.max_sup_rel_error, 3) + ", " +
                      std::to_string(r.bound_order_violations) + " bound-order violations"};
}

Outcome regression_identities() {
  double worst = 0;
  for (const auto* model : {&plane(), &gauss()}) {
    for (int i = 0; i < 40; ++i) {
      const double r = 1e-3 * std::pow(50 / 1e-3, i / 39.0);
      const auto set = assemble_sigma<quad>(*model, Point(0, 0), Point(r, 0));
      const quad d1 = set.sigma1.determinant(), d2 = set.sigma2.determinant();
      const quad d3 = set.sigma3.determinant(), d4 = set.sigma4.determinant();
      worst = std::max({worst, to_double(abs(d1 * d2 - d3) / abs(d3)),
                        to_double(abs(set.sigma1_sq * d2 - d4) / abs(d4))});
    }
  }
  return {worst <= 1e-8, "80 (kernel, r) points, max rel err " + fmt(worst, 3)};
}

Outcome asymptotics() {
  const std::vector<double> rs{0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001};
  struct Case {
    const KernelModel* model;
    double det4, sigma1;
  };
  bool pass = true;
  std::string detail;
  for (const auto& c : {Case{&plane(), 0.25, 1.0 / 3}, Case{&gauss(), 2.0, 2.0 / 3}}) {
    const auto rep = near_diagonal_asymptotics(*c.model, rs);
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (const auto& row : rep.rows) {
      lo = std::min(lo, row.n_over_r2);
      hi = std::max(hi, row.n_over_r2);
    }
    const bool ok = std::abs(rep.limit_det4 - c.det4) <= 0.02 * c.det4 &&
                    std::abs(rep.limit_sigma1 - c.sigma1) <= 0.02 * c.sigma1 && hi / lo <= 3;
    pass = pass && ok;
    detail += c.model->id() + ": det4/r^4 -> " + fmt(rep.limit_det4) + " (target " + fmt(c.det4) + "), sigma1^2 -> " +
              fmt(rep.limit_sigma1) + " (target " + fmt(c.sigma1) + "), N/r^2 max/min " + fmt(hi / lo, 3) + "; ";
  }
  return {pass, detail};
}

Outcome intensity_boundedness() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::int64_t n = 200000;
  bool pass = true;
  double worst_ratio = 0, worst_z1 = 0, worst_z4 = 0;
  for (double s : {0.0, 1.0, -1.0}) {
    const auto a = intensity_I2(gauss(), 1e-2, s, McConfig{n, 17, 10000, 1});
    const auto b = intensity_I2(gauss(), 1e-3, s, McConfig{n, 17, 10000, 1});
    const double ratio = std::max(a.estimate, b.estimate) / std::min(a.estimate, b.estimate);
    worst_ratio = std::max(worst_ratio, ratio);
    pass = pass && a.estimate > 0 && ratio <= 2;
  }
  for (double s : {0.0, 1.0}) {
    for (double t : {0.0, -1.0}) {
      const auto pair = intensity_I1(gauss(), 50, s, t, McConfig{n, 13, 10000, 1});
      const auto a = intensity_I3(gauss(), s, McConfig{n, 31, 10000, 1});
      const auto b = intensity_I3(gauss(), t, McConfig{n, 32, 10000, 1});
      const double se = std::hypot(pair.std_error, std::hypot(a.estimate * b.std_error, b.estimate * a.std_error));
      const double z = std::abs(pair.estimate - a.estimate * b.estimate) / se;
      worst_z1 = std::max(worst_z1, z);
      pass = pass && z <= 3;
    }
  }
  for (const auto* model : {&plane(), &gauss()}) {
    const auto i4 = intensity_I4(*model, 50, McConfig{n, 51, 10000, 1});
    const auto i5 = intensity_I5(*model, McConfig{n, 52, 10000, 1});
    const double se = std::hypot(i4.std_error, 2 * i5.estimate * i5.std_error);
    const double z = std::abs(i4.estimate - i5.estimate * i5.estimate) / se;
    worst_z4 = std::max(worst_z4, z);
    pass = pass && z <= 3;
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 600;
  return {pass, "bargmann-fock I2 ratio r=1e-2 vs 1e-3 max " + fmt(worst_ratio, 3) + "; I1 vs I3 I3 at r=50 max " +
                    fmt(worst_z1, 3) + " SE; I4 vs I5^2 max " + fmt(worst_z4, 3) + " SE; " + fmt(secs, 3) + " s"};
}

Outcome first_moment() {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  std::string detail;
  for (const auto* model : {&plane(), &gauss()}) {
    const auto r = verify_first_moment(*model, 10, -0.5, 0.5, 400, 7);
    pass = pass && r.pass && !r.empirical.flagged;
    detail += model->id() + " " + fmt(r.empirical.mean) + " vs " + fmt(r.predicted) + " (|diff| " +
              fmt(std::abs(r.difference), 3) + " <= " + fmt(r.tolerance, 3) + "); ";
  }
  const double secs = seconds_since(t0);
  return {pass && secs < 900, detail + fmt(secs, 3) + " s"};
}

Outcome bound_shape() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto study = verify_second_moment_bound(plane(), {5, 10, 20}, {0.02, 0.1, 0.5, 2}, 400, 7);
  const double secs = seconds_since(t0);
  return {study.pass && !study.flagged && secs < 1800,
          "plane-wave ratio span " + fmt(study.span, 3) + " (<= 10), slope in R at lambda=2 " +
              fmt(study.slope_at_max_lambda) + " (4 +- 0.3), c* " + fmt(study.c_star, 3) + "; " + fmt(secs, 3) + " s"};
}

Outcome crossover() {
  const double lambda = 1e-4;
  const auto reps = replicate(plane(), 10, 10000, 7);
  const auto c = crossover_check(reps, -lambda / 2, lambda / 2);
  return {c.pass && !c.moments.flagged, "plane-wave E N " + fmt(c.moments.mean, 3) + ", E N^2 / E N " + fmt(c.ratio) +
                                            " (SE " + fmt(c.ratio_se, 3) + "), P[N>=2] " + fmt(c.moments.p_ge2, 3)};
}

Outcome lattice() {
  Eigen::Matrix2Xd s(2, 2);
  s << 1, 0, 0, 1;
  const auto set = find_critical_points(WaveEnsemble::from_waves(s, Eigen::VectorXd::Zero(2), 1.0), 5.0);
  const auto in_window = count_in_window(set, -0.5, 0.5);
  return {set.points.size() == 9 && in_window == 4,
          std::to_string(set.points.size()) + " critical points, " + std::to_string(in_window) + " in [-0.5, 0.5]"};
}

Outcome one_dimensional() {
  bool pass = true;
  std::string detail;
  const auto study = verify_bound_1d(plane(), {20, 40, 80}, {0.02, 0.1, 0.5, 2}, 400, 7);
  const bool slope_ok = std::abs(study.slope_at_max_lambda - 2) <= 0.3 && !study.flagged;
  pass = pass && slope_ok;
  detail += "slope in R at lambda=2 " + fmt(study.slope_at_max_lambda) + " (2 +- 0.3); ";
  for (const auto* model : {&plane(), &gauss()}) {
    const auto r = verify_first_moment_1d(*model, 20, -0.5, 0.5, 400, 7);
    pass = pass && r.pass && !r.empirical.flagged;
    detail += model->id() + " mean " + fmt(r.empirical.mean) + " vs " + fmt(r.predicted) + " (tol " +
              fmt(r.tolerance, 3) + "); ";
  }
  const auto cosine = WaveEnsemble1d::from_waves(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), 1.0);
  const auto full = count_critical_1d(cosine, 5, -std::numeric_limits<double>::infinity(),
                                      std::numeric_limits<double>::infinity());
  const auto window = count_critical_1d(cosine, 5, 0.5, 1.5);
  const auto empty = count_critical_1d(cosine, 5, 0.3, 0.3);
  pass = pass && full.count == 3 && window.count == 1 && empty.count == 0;
  detail += "cos on [-5, 5]: " + std::to_string(full.count) + " total, " + std::to_string(window.count) +
            " in [0.5, 1.5], " + std::to_string(empty.count) + " in [0.3, 0.3]";
  return {pass, detail};
}

std::string run_cli(const std::string& args, int& status) {
  const std::string cmd = std::string(CRITLAB_CLI_PATH) + " " + args + " --threads 1 2>/dev/null";
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) {
    status = -1;
    return out;
  }
  std::array<char, 4096> buf;
  std::size_t got;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), got);
  status = pclose(pipe);
  return out;
}

Outcome determinism() {
  const std::vector<std::string> commands{
      "lemma check --trials 2000 --sup-trials 50 --seed 3",
      "intensity eval --which 3 --s 0.5 --samples 20000 --seed 3",
      "intensity eval --which 1 --kernel bargmann-fock --r 2 --s 0 --t 0.5 --samples 20000 --seed 3",
      "bound predict --kernel bargmann-fock --R 5 --a -0.5 --b 0.5 --samples 2000 --seed 3",
      "simulate count --R 10 --seed 3",
      "simulate count --dim 1 --R 40 --seed 3",
      "moments estimate --kernel plane-wave --R 10 --a -0.5 --b 0.5 --reps 400 --seed 7",
      "moments estimate --dim 1 --kernel bargmann-fock --R 20 --reps 100 --seed 7",
      "verify first-moment --kernel bargmann-fock --R 5 --reps 60 --mc-samples 20000 --seed 7",
      "verify bound --R-list 3,4,5 --lambda-list 0.1,2 --reps 50 --seed 7",
      "verify bound-1d --R-list 10,20,40 --lambda-list 0.1,2 --reps 50 --seed 7",
  };
  int identical = 0;
  std::string mismatched;
  for (const auto& c : commands) {
    int s1 = 0, s2 = 0;
    const auto a = run_cli(c, s1);
    const auto b = run_cli(c, s2);
    if (!a.empty() && a == b && s1 == s2 && a.find("\"outputs\"") != std::string::npos) {
      ++identical;
    } else {
      mismatched += " [" + c + "]";
    }
  }
  return {identical == static_cast<int>(commands.size()),
          std::to_string(identical) + "/" + std::to_string(commands.size()) +
              " stochastic commands bit-identical across two runs" + mismatched};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "closed-form lemma suite", lemma_matrix},
      {2, "maximizer suite", lemma_maximizer},
      {3, "regression identities", regression_identities},
      {4, "near-diagonal asymptotics", asymptotics},
      {5, "intensity boundedness", intensity_boundedness},
      {6, "first-moment consistency", first_moment},
      {7, "bound-shape study", bound_shape},
      {8, "crossover", crossover},
      {9, "deterministic detector", lattice},
      {10, "1D study", one_dimensional},
      {11, "determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    if (!out.pass) ++failed;
    while (!out.detail.empty() && (out.detail.back() == ' ' || out.detail.back() == ';')) out.detail.pop_back();
    std::cout << (out.pass ? "[PASS] " : "[FAIL] ") << c.id << " " << c.name << ": " << out.detail << " ("
              << fmt(seconds_since(t0), 3) << " s)" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
