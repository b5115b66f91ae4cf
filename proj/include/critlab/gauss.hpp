#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/constants/constants.hpp>
#include <Eigen/Dense>
#include <json.hpp>

#include "critlab/error.hpp"
#include "critlab/kernel.hpp"
#include "critlab/scalar.hpp"

namespace critlab {

template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// One coordinate of a Gaussian vector built from the field: d^alpha f(point).
struct FieldItem {
  Point point;
  MultiIndex alpha;
};

/// Cov[d^a f(p), d^b f(q)] = (-1)^{|a|} d^{a+b} kappa(q - p).
template <class S = double>
Matrix<S> joint_covariance(const KernelModel& model, std::span<const FieldItem> items) {
  const auto n = static_cast<Eigen::Index>(items.size());
  Matrix<S> cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const auto& p = items[i];
      const auto& q = items[j];
      const S dx1 = S(q.point.x()) - S(p.point.x());
      const S dx2 = S(q.point.y()) - S(p.point.y());
      S v = kernel_derivative<S>(model, p.alpha + q.alpha, dx1, dx2);
      if (p.alpha.order() % 2 != 0) v = -v;
      cov(i, j) = v;
      cov(j, i) = v;
    }
  }
  return cov;
}

/// Y | Z for a centred Gaussian (Y, Z): the first `ny` coordinates are Y.
template <class S>
struct ConditionalLaw {
  Matrix<S> cov;    // Sigma_YY - Sigma_YZ Sigma_ZZ^{-1} Sigma_ZY
  Matrix<S> coeff;  // E[Y | Z = z] = coeff * z
  S z_condition;    // spectral condition number of Sigma_ZZ
};

/// Symmetrize and clip eigenvalues in [-tol, 0) to zero; anything more
/// negative is a real indefiniteness and is rejected.
template <class S>
Matrix<S> psd_project(const Matrix<S>& a, S tol = S(1e-10)) {
  Matrix<S> sym = (a + a.transpose()) / S(2);
  if (sym.rows() == 0) return sym;
  Eigen::SelfAdjointEigenSolver<Matrix<S>> es(sym);
  const S lo = es.eigenvalues().minCoeff();
  using std::abs;
  S scale(1);
  for (Eigen::Index i = 0; i < sym.rows(); ++i) scale = std::max<S>(scale, abs(sym(i, i)));
  if (lo < -tol * scale)
    throw Error(ErrorKind::Numerical,
                "conditional covariance is indefinite (eigenvalue " + std::to_string(to_double(lo)) + ")");
  if (lo >= S(0)) return sym;
  Vector<S> ev = es.eigenvalues().cwiseMax(S(0));
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

template <class S>
S spectral_condition(const Matrix<S>& spd) {
  Eigen::SelfAdjointEigenSolver<Matrix<S>> es(spd, Eigen::EigenvaluesOnly);
  const S lo = es.eigenvalues().minCoeff();
  const S hi = es.eigenvalues().maxCoeff();
  if (!(lo > S(0))) return std::numeric_limits<S>::infinity();
  return hi / lo;
}

template <class S>
ConditionalLaw<S> gaussian_regression(const Matrix<S>& joint, Eigen::Index ny) {
  const Eigen::Index nz = joint.rows() - ny;
  if (ny < 0 || nz < 0 || joint.rows() != joint.cols())
    throw Error(ErrorKind::Config, "regression split does not fit the joint covariance");
  ConditionalLaw<S> out;
  if (nz == 0) {
    out.cov = psd_project<S>(joint);
    out.coeff = Matrix<S>(ny, 0);
    out.z_condition = S(1);
    return out;
  }
  const Matrix<S> zz = joint.bottomRightCorner(nz, nz);
  const Matrix<S> yz = joint.topRightCorner(ny, nz);
  out.z_condition = spectral_condition<S>(zz);
  if (!(out.z_condition < S(1e-2) / scalar_epsilon<S>()))
    throw Error(ErrorKind::Degenerate, "singular conditioning block (condition number " +
                                           std::to_string(to_double(out.z_condition)) + ")");
  const auto ldlt = zz.ldlt();
  out.coeff = ldlt.solve(yz.transpose()).transpose();
  out.cov = psd_project<S>(Matrix<S>(joint.topLeftCorner(ny, ny) - out.coeff * yz.transpose()));
  return out;
}

template <class S>
S log_det_spd(const Matrix<S>& cov) {
  const auto ldlt = cov.ldlt();
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > S(0)))
    throw Error(ErrorKind::Degenerate, "covariance is not positive definite");
  using std::log;
  S out(0);
  for (Eigen::Index i = 0; i < cov.rows(); ++i) out += log(ldlt.vectorD()(i));
  return out;
}

/// Centred multivariate normal density.
template <class S>
S gaussian_density(const Matrix<S>& cov, const Vector<S>& x) {
  const auto ldlt = cov.ldlt();
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > S(0)))
    throw Error(ErrorKind::Degenerate, "density of a singular covariance");
  using std::exp;
  using std::log;
  S log_det(0);
  for (Eigen::Index i = 0; i < cov.rows(); ++i) log_det += log(ldlt.vectorD()(i));
  const S quad_form = x.dot(ldlt.solve(x));
  const S two_pi = S(2) * boost::math::constants::pi<S>();
  return exp(-quad_form / S(2) - log_det / S(2) - S(cov.rows()) * log(two_pi) / S(2));
}

template <class S>
Matrix<S> select(const Matrix<S>& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  return m(rows, cols);
}

template <class S>
Matrix<S> select(const Matrix<S>& m, const std::vector<int>& idx) {
  return m(idx, idx);
}

/// Covariance structure at a point pair (x, y). Vector orderings:
///   Sigma_3: (f(x), f(y), grad f(x), grad f(y))
///   Sigma_4: (f(x), grad f(x), grad f(y))
///   Sigma_2: (grad f(x), grad f(y))
///   Sigma_5: Cov of (grad f(x), grad f(y)) with (f_11, f_12, f_22)(x), 4 x 3
///   Sigma_6: Cov of (f_11, f_12, f_22)(x)
///   Sigma_7: Cov of (f(x), grad f(x))
/// Sigma_1 is (f(x), f(y)) | (grad f(x), grad f(y)) = M11 - M12 M22^{-1} M12^T.
template <class S = double>
struct SigmaSet {
  Point x;
  Point y;
  bool pair_valid = false;  // false when x == y: only Sigma_6, Sigma_7, sigma2_sq are filled
  Matrix<S> sigma1, sigma2, sigma3, sigma4, sigma5, sigma6, sigma7;
  Matrix<S> m11, m12, m22;
  S sigma1_sq = S(0);  // Var f(x) | (grad f(x), grad f(y))
  S sigma2_sq = S(0);  // Var f(x) | grad f(x)
  S sigma2_condition = S(1);
  bool degenerate = false;  // Sigma_2 condition number above kDegenerateCondition

  static constexpr double kDegenerateCondition = 1e12;
};

namespace detail {
inline std::vector<FieldItem> sigma_items(const Point& x, const Point& y) {
  return {{x, {0, 0}}, {y, {0, 0}}, {x, {1, 0}}, {x, {0, 1}}, {y, {1, 0}},
          {y, {0, 1}}, {x, {2, 0}}, {x, {1, 1}}, {x, {0, 2}}};
}
}  // namespace detail

template <class S = double>
SigmaSet<S> assemble_sigma(const KernelModel& model, const Point& x, const Point& y) {
  const auto items = detail::sigma_items(x, y);
  const Matrix<S> joint = joint_covariance<S>(model, items);
  SigmaSet<S> out;
  out.x = x;
  out.y = y;
  out.sigma6 = select<S>(joint, {6, 7, 8});
  out.sigma7 = select<S>(joint, {0, 2, 3});
  out.sigma2_sq = gaussian_regression<S>(out.sigma7, 1).cov(0, 0);
  if (x == y) {
    out.degenerate = true;
    return out;
  }
  out.pair_valid = true;
  out.sigma3 = select<S>(joint, {0, 1, 2, 3, 4, 5});
  out.sigma2 = select<S>(joint, {2, 3, 4, 5});
  out.sigma4 = select<S>(joint, {0, 2, 3, 4, 5});
  out.sigma5 = select<S>(joint, {2, 3, 4, 5}, {6, 7, 8});
  out.m11 = select<S>(joint, {0, 1});
  out.m12 = select<S>(joint, {0, 1}, {2, 3, 4, 5});
  out.m22 = out.sigma2;
  out.sigma2_condition = spectral_condition<S>(out.sigma2);
  out.degenerate = !(out.sigma2_condition <= S(SigmaSet<S>::kDegenerateCondition));
  if (out.degenerate) return out;  // sigma1, sigma1_sq left empty
  out.sigma1 =gaussian_regression<S>(out.sigma3, 2).cov;
  out.sigma1_sq = gaussian_regression<S>(out.sigma4, 1).cov(0, 0);
  return out;
}

nlohmann::json to_json(const SigmaSet<double>& set);

template <class S>
SigmaSet<double> to_double(const SigmaSet<S>& in) {
  SigmaSet<double> out;
  out.x = in.x;
  out.y = in.y;
  out.pair_valid = in.pair_valid;
  auto cast = [](const Matrix<S>& m) { return m.unaryExpr([](const S& v) { return static_cast<double>(v); }).eval(); };
  out.sigma1 = cast(in.sigma1);
  out.sigma2 = cast(in.sigma2);
  out.sigma3 = cast(in.sigma3);
  out.sigma4 = cast(in.sigma4);
  out.sigma5 = cast(in.sigma5);
  out.sigma6 = cast(in.sigma6);
  out.sigma7 = cast(in.sigma7);
  out.m11 = cast(in.m11);
  out.m12 = cast(in.m12);
  out.m22 = cast(in.m22);
  out.sigma1_sq = static_cast<double>(in.sigma1_sq);
  out.sigma2_sq = static_cast<double>(in.sigma2_sq);
  out.sigma2_condition = static_cast<double>(in.sigma2_condition);
  out.degenerate = in.degenerate;
  return out;
}

// ---------------------------------------------------------------------------
// Block structure of Sigma_4, Sigma_2, Sigma_5 for y = x + (r, 0).

template <class S = double>
struct LemmaMatrixParams {
  S a1 = S(0), a2 = S(0), a3 = S(0), b1 = S(0), b2 = S(0);
};

template <class S = double>
Eigen::Matrix<S, 5, 5> lemma_matrix_a1(const LemmaMatrixParams<S>& p) {
  Eigen::Matrix<S, 5, 5> m = Eigen::Matrix<S, 5, 5>::Identity();
  m(0, 3) = m(3, 0) = -p.a1;
  m(1, 3) = m(3, 1) = S(1) - p.a2;
  m(2, 4) = m(4, 2) = S(1) - p.a3;
  return m;
}

template <class S = double>
Eigen::Matrix<S, 4, 4> lemma_matrix_a2(const LemmaMatrixParams<S>& p) {
  Eigen::Matrix<S, 4, 4> m = Eigen::Matrix<S, 4, 4>::Identity();
  m(0, 2) = m(2, 0) = S(1) - p.a2;
  m(1, 3) = m(3, 1) = S(1) - p.a3;
  return m;
}

template <class S = double>
Eigen::Matrix<S, 4, 3> lemma_matrix_a3(const LemmaMatrixParams<S>& p) {
  Eigen::Matrix<S, 4, 3> m = Eigen::Matrix<S, 4, 3>::Zero();
  m(2, 0) = p.b1;
  m(2, 2) = p.b2;
  m(3, 1) = p.b2;
  return m;
}

/// (det A1, det A2) in closed form.
template <class S = double>
std::pair<S, S> matrix_lemma_dets(const LemmaMatrixParams<S>& p) {
  const S det1 = (S(2) * p.a2 - p.a1 * p.a1 - p.a2 * p.a2) * (S(2) * p.a3 - p.a3 * p.a3);
  const S det2 = p.a2 * p.a3 * (S(2) - p.a2) * (S(2) - p.a3);
  return {det1, det2};
}

/// Diagonal of A3^T A2^{-1} A3 in closed form.
template <class S = double>
Eigen::Matrix<S, 3, 1> matrix_lemma_diag(const LemmaMatrixParams<S>& p) {
  const S den2 = S(2) * p.a2 - p.a2 * p.a2;
  const S den3 = S(2) * p.a3 - p.a3 * p.a3;
  if (den2 == S(0) || den3 == S(0))
    throw Error(ErrorKind::Degenerate, "singular lemma denominator: a2 or a3 in {0, 2}");
  return {p.b1 * p.b1 / den2, p.b2 * p.b2 / den3, p.b2 * p.b2 / den2};
}

/// Reads (a1, a2, a3, b1, b2) off a pair with y - x along the first axis.
template <class S>
LemmaMatrixParams<S> lemma_params(const SigmaSet<S>& set) {
  if (!set.pair_valid) throw Error(ErrorKind::Config, "lemma parameters need a proper pair");
  LemmaMatrixParams<S> p;
  p.a1 = -set.sigma4(0, 3);
  p.a2 = S(1) - set.sigma2(0, 2);
  p.a3 = S(1) - set.sigma2(1, 3);
  p.b1 = set.sigma5(2, 0);
  p.b2 = set.sigma5(2, 2);
  return p;
}

// ---------------------------------------------------------------------------
// Determinant-moment bound for sup_y phi(y, 0) E[|det X|^n | Y = y, Z = 0].

enum class DetBoundForm {
  Conditional,  // largest-two product of E[X_ij^2 | Z = 0]
  Marginal      // max_ij E[X_ij^2]^n
};

/// Joint covariance of (X11, X12, X21, X22, Y_1..Y_d, Z_1..Z_4).
struct DetBoundSetup {
  Eigen::MatrixXd cov;
  int d = 1;
};

/// (2n/e)^n * 8.
double det_bound_default_constant(int n);

double det_bound(const DetBoundSetup& setup, int n, DetBoundForm form,
                 std::optional<double> constant = std::nullopt);

/// sup_y (S^T Lambda^{-1} y)^{2n} exp(-y^T Lambda^{-1} y / 2) for diagonal Lambda.
struct QuadraticExpSup {
  double value = 0;
  Eigen::VectorXd argmax;  // one of the two symmetric maximizers
};
QuadraticExpSup quadratic_exp_sup(const Eigen::VectorXd& s, const Eigen::VectorXd& lambda, int n);

inline double quadratic_exp_objective(const Eigen::VectorXd& s, const Eigen::VectorXd& lambda, int n,
                                      const Eigen::VectorXd& y) {
  const Eigen::VectorXd scaled = y.cwiseQuotient(lambda);
  return std::pow(s.dot(scaled), 2 * n) * std::exp(-0.5 * y.dot(scaled));
}

struct MatrixLemmaSuite {
  int trials = 0;
  double max_rel_error = 0;  // closed forms against dense determinants and solves
  double runtime_s = 0;
  bool pass = false;         // max_rel_error <= 1e-10
  nlohmann::json to_json() const;
};

/// Random (a1, a2, a3, b1, b2) with a1 in [-1, 1], a2, a3 in [0.05, 1.95],
/// b1, b2 in [-2, 2].
MatrixLemmaSuite matrix_lemma_suite(int trials, std::uint64_t seed);

struct DetBoundSuite {
  int trials = 0;
  double max_sup_rel_error = 0;  // closed-form supremum against refined grid search
  int bound_order_violations = 0;  // draws with Conditional > Marginal
  bool pass = false;
  nlohmann::json to_json() const;
};

/// Grid search: 201 points per axis over a box around the maximizer scale,
/// re-centred and shrunk until the spacing stops mattering.
double grid_search_sup(const Eigen::VectorXd& s, const Eigen::VectorXd& lambda, int n);

DetBoundSuite det_bound_suite(int trials, std::uint64_t seed);

}  // namespace critlab
