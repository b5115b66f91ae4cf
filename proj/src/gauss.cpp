#include "critlab/gauss.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <random>

#include "critlab/seeding.hpp"

namespace critlab {

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[j] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

nlohmann::json to_json(const SigmaSet<double>& set) {
  nlohmann::json j{{"x", {set.x.x(), set.x.y()}},
                   {"y", {set.y.x(), set.y.y()}},
                   {"pair_valid", set.pair_valid},
                   {"sigma6", matrix_json(set.sigma6)},
                   {"sigma7", matrix_json(set.sigma7)},
                   {"sigma2_sq", set.sigma2_sq}};
  if (set.pair_valid) {
    j["sigma2"] = matrix_json(set.sigma2);
    j["sigma3"] = matrix_json(set.sigma3);
    j["sigma4"] = matrix_json(set.sigma4);
    j["sigma5"] = matrix_json(set.sigma5);
    j["m11"] = matrix_json(set.m11);
    j["m12"] = matrix_json(set.m12);
    j["m22"] = matrix_json(set.m22);
    j["det_sigma2"] = set.sigma2.determinant();
    j["det_sigma3"] = set.sigma3.determinant();
    j["det_sigma4"] = set.sigma4.determinant();
    j["sigma2_condition"] = set.sigma2_condition;
    if (set.sigma1.size() > 0) {
      j["sigma1"] = matrix_json(set.sigma1);
      j["sigma1_sq"] = set.sigma1_sq;
      j["det_sigma1"] = set.sigma1.determinant();
    }
  }
  j["degenerate"] = set.degenerate;
  return j;
}

double det_bound_default_constant(int n) {
  return std::pow(2.0 * n / std::numbers::e, n) * 8.0;
}

double det_bound(const DetBoundSetup& setup, int n, DetBoundForm form, std::optional<double> constant) {
  const int d = setup.d;
  if (d != 1 && d != 2) throw Error(ErrorKind::Config, "det_bound supports dim(Y) in {1, 2}");
  if (n != 1 && n != 2) throw Error(ErrorKind::Config, "det_bound supports n in {1, 2}");
  const int total = 4 + d + 4;
  if (setup.cov.rows() != total || setup.cov.cols() != total)
    throw Error(ErrorKind::Config, "det_bound covariance must be (8 + d) square");

  std::vector<int> x_idx{0, 1, 2, 3};
  std::vector<int> y_idx, z_idx;
  for (int k = 0; k < d; ++k) y_idx.push_back(4 + k);
  for (int k = 0; k < 4; ++k) z_idx.push_back(4 + d + k);
  std::vector<int> yz_idx = y_idx;
  yz_idx.insert(yz_idx.end(), z_idx.begin(), z_idx.end());
  std::vector<int> xz_idx = x_idx;
  xz_idx.insert(xz_idx.end(), z_idx.begin(), z_idx.end());

  const Eigen::MatrixXd sigma = select<double>(setup.cov, yz_idx);
  const double det_sigma = sigma.determinant();
  if (!(det_sigma > 0)) throw Error(ErrorKind::Degenerate, "(Y, Z) is degenerate");
  const Eigen::MatrixXd y_given_z = gaussian_regression<double>(sigma, d).cov;
  const double det_y_given_z = y_given_z.determinant();

  double max_y2 = 0;
  for (int k : y_idx) max_y2 = std::max(max_y2, setup.cov(k, k));
  const double ratio = std::pow(max_y2, 2 * n) / std::pow(det_y_given_z, n);

  double x_factor = 0;
  if (form == DetBoundForm::Conditional) {
    const Eigen::MatrixXd x_given_z = gaussian_regression<double>(select<double>(setup.cov, xz_idx), 4).cov;
    std::vector<double> second(4);
    for (int k = 0; k < 4; ++k) second[k] = x_given_z(k, k);
    std::sort(second.begin(), second.end(), std::greater<>());
    x_factor = std::pow(second[0], n / 2.0) * std::pow(second[1], n / 2.0);
  } else {
    double max_x2 = 0;
    for (int k : x_idx) max_x2 = std::max(max_x2, setup.cov(k, k));
    x_factor = std::pow(max_x2, n);
  }
  const double c = constant.value_or(det_bound_default_constant(n));
  return c / std::sqrt(det_sigma) * x_factor * std::max(1.0, ratio);
}

QuadraticExpSup quadratic_exp_sup(const Eigen::VectorXd& s, const Eigen::VectorXd& lambda, int n) {
  if (s.size() != lambda.size() || s.size() == 0) throw Error(ErrorKind::Config, "s and lambda sizes differ");
  if (!(lambda.minCoeff() > 0)) throw Error(ErrorKind::Config, "lambda must be positive");
  if (n < 1) throw Error(ErrorKind::Config, "n must be positive");
  const double t2 = s.cwiseAbs2().cwiseQuotient(lambda).sum();
  QuadraticExpSup out;
  out.value = std::pow(2.0 * n / std::numbers::e, n) * std::pow(t2, n);
  out.argmax = t2 > 0 ? Eigen::VectorXd(std::sqrt(2.0 * n / t2) * s) : Eigen::VectorXd::Zero(s.size());
  return out;
}

nlohmann::json MatrixLemmaSuite::to_json() const {
  return {{"trials", trials}, {"max_rel_error", max_rel_error}, {"runtime_s", runtime_s}, {"pass", pass}};
}

MatrixLemmaSuite matrix_lemma_suite(int trials, std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorKind::Config, "trials must be positive");
  const auto start = std::chrono::steady_clock::now();
  Engine rng(derive_seed(seed, stream::kLemma, 0));
  std::uniform_real_distribution<double> ua(-1.0, 1.0), u2(0.05, 1.95), ub(-2.0, 2.0);
  auto rel = [](double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0 ? 0.0 : std::abs(a - b) / scale;
  };
  MatrixLemmaSuite out;
  out.trials = trials;
  for (int t = 0; t < trials; ++t) {
    const double a1 = ua(rng), a2 = u2(rng), a3 = u2(rng), b1 = ub(rng), b2 = ub(rng);
    const LemmaMatrixParams<double> p{a1, a2, a3, b1, b2};
    const auto [det1, det2] = matrix_lemma_dets(p);
    const Eigen::Matrix4d m2 = lemma_matrix_a2(p);
    const Eigen::Matrix<double, 4, 3> m3 = lemma_matrix_a3(p);
    const Eigen::Matrix3d full = m3.transpose() * m2.partialPivLu().solve(m3);
    const Eigen::Vector3d diag = matrix_lemma_diag(p);
    out.max_rel_error = std::max({out.max_rel_error, rel(det1, lemma_matrix_a1(p).determinant()),
                                  rel(det2, m2.determinant())});
    for (int k = 0; k < 3; ++k) out.max_rel_error = std::max(out.max_rel_error, rel(diag(k), full(k, k)));
  }
  out.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.pass = out.max_rel_error <= 1e-10;
  return out;
}

nlohmann::json DetBoundSuite::to_json() const {
  return {{"trials", trials},
          {"max_sup_rel_error", max_sup_rel_error},
          {"bound_order_violations", bound_order_violations},
          {"pass", pass}};
}

double grid_search_sup(const Eigen::VectorXd& s, const Eigen::VectorXd& lambda, int n) {
  constexpr int kPoints = 201;
  const auto d = s.size();
  Eigen::VectorXd lo = -(3.0 * n * lambda.array()).sqrt().matrix();
  Eigen::VectorXd hi = -lo;
  double best = 0;
  Eigen::VectorXd best_y = Eigen::VectorXd::Zero(d);
  for (int round = 0; round < 8; ++round) {
    const Eigen::VectorXd step = (hi - lo) / (kPoints - 1);
    const int rows = d == 1 ? 1 : kPoints;
    for (int j = 0; j < rows; ++j) {
      const double y1 = d == 2 ? lo(1) + j * step(1) : 0.0;
      const double lin1 = d == 2 ? s(1) * y1 / lambda(1) : 0.0;
      const double quad1 = d == 2 ? y1 * y1 / lambda(1) : 0.0;
      for (int i = 0; i < kPoints; ++i) {
        const double y0 = lo(0) + i * step(0);
        const double lin = s(0) * y0 / lambda(0) + lin1;
        const double v = std::pow(lin * lin, n) * std::exp(-0.5 * (y0 * y0 / lambda(0) + quad1));
        if (v > best) {
          best = v;
          best_y(0) = y0;
          if (d == 2) best_y(1) = y1;
        }
      }
    }
    lo = best_y - 2 * step;
    hi = best_y + 2 * step;
  }
  return best;
}

DetBoundSuite det_bound_suite(int trials, std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorKind::Config, "trials must be positive");
  Engine rng(derive_seed(seed, stream::kLemma, 1));
  std::uniform_real_distribution<double> us(-2.0, 2.0), ul(0.1, 3.0), ue(0.05, 3.0);
  std::normal_distribution<double> g;
  DetBoundSuite out;
  out.trials = trials;
  for (int t = 0; t < trials; ++t) {
    const int d = 1 + t % 2;
    const int n = 1 + (t / 2) % 2;
    Eigen::VectorXd s(d), lam(d);
    for (int k = 0; k < d; ++k) {
      s(k) = us(rng);
      lam(k) = ul(rng);
    }
    const double closed = quadratic_exp_sup(s, lam, n).value;
    const double grid = grid_search_sup(s, lam, n);
    out.max_sup_rel_error = std::max(out.max_sup_rel_error, std::abs(closed - grid) / closed);

    const int dim = 8 + d;
    Eigen::MatrixXd a(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) a(i, j) = g(rng);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
    Eigen::VectorXd ev(dim);
    for (int i = 0; i < dim; ++i) ev(i) = ue(rng);
    const DetBoundSetup setup{q * ev.asDiagonal() * q.transpose(), d};
    if (det_bound(setup, n, DetBoundForm::Conditional) > det_bound(setup, n, DetBoundForm::Marginal) * (1 + 1e-12))
      ++out.bound_order_violations;
  }
  out.pass = out.max_sup_rel_error <= 1e-6 && out.bound_order_violations == 0;
  return out;
}

}  // namespace critlab
