#include "critlab/intensity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "critlab/parallel.hpp"
#include "critlab/seeding.hpp"

namespace critlab {

namespace {

constexpr double kPi = std::numbers::pi;

double std_normal_pdf(double s) { return std::exp(-0.5 * s * s) / std::sqrt(2 * kPi); }
double std_normal_cdf(double s) { return 0.5 * std::erfc(-s / std::numbers::sqrt2); }

std::vector<FieldItem> hessian_items(const Point& p) {
  return {{p, {2, 0}}, {p, {1, 1}}, {p, {0, 2}}};
}

std::vector<FieldItem> gradient_items(const Point& p) { return {{p, {1, 0}}, {p, {0, 1}}}; }

template <class... Lists>
std::vector<FieldItem> concat(const Lists&... lists) {
  std::vector<FieldItem> out;
  (out.insert(out.end(), lists.begin(), lists.end()), ...);
  return out;
}

// Welford accumulator; batches are merged in index order.
struct Moments {
  double n = 0, mean = 0, m2 = 0;
  void add(double v) {
    n += 1;
    const double d = v - mean;
    mean += d / n;
    m2 += d * (v - mean);
  }
  void merge(const Moments& o) {
    if (o.n == 0) return;
    const double total = n + o.n;
    const double d = o.mean - mean;
    mean += d * o.n / total;
    m2 += o.m2 + d * d * n * o.n / total;
    n = total;
  }
  Estimate estimate() const {
    if (n < 2) return {mean, std::numeric_limits<double>::infinity()};
    return {mean, std::sqrt(m2 / (n - 1) / n)};
  }
};

inline double abs_det_block(const double* h) { return std::abs(h[0] * h[2] - h[1] * h[1]); }

Eigen::MatrixXd cast_to_double(const Matrix<quad>& m) {
  return m.unaryExpr([](const quad& v) { return static_cast<double>(v); });
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> out;
  if (n <= 1 || hi <= lo) return {lo};
  for (int i = 0; i < n; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return out;
}

std::vector<double> lobatto_heights(double a, double b, int n) {
  if (a == b || n <= 1) return {0.5 * (a + b)};
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) out[k] = 0.5 * (a + b) + 0.5 * (b - a) * std::cos(kPi * k / (n - 1));
  std::sort(out.begin(), out.end());
  return out;
}

// Antithetic draw loop shared by the estimators: body(w, moments) for each
// pair, where w = factor * e.
template <class Body>
std::vector<Moments> run_batches(const Eigen::MatrixXd& factor, std::size_t slots, const McConfig& mc,
                                 Body&& body) {
  if (mc.samples < 2) throw Error(ErrorKind::Config, "Monte Carlo needs at least 2 samples");
  const std::int64_t pairs = mc.samples / 2;
  const std::int64_t per_batch = std::max<std::int64_t>(1, mc.batch / 2);
  const std::int64_t batches = (pairs + per_batch - 1) / per_batch;
  const auto n = factor.rows();
  std::vector<std::vector<Moments>> partial(batches, std::vector<Moments>(slots));
  parallel_for(static_cast<std::size_t>(batches), mc.threads, [&](std::size_t b) {
    Engine rng(derive_seed(mc.seed, stream::kIntensity, b));
    std::normal_distribution<double> gauss;
    const std::int64_t count = std::min(per_batch, pairs - static_cast<std::int64_t>(b) * per_batch);
    Eigen::VectorXd e(n), w(n);
    for (std::int64_t k = 0; k < count; ++k) {
      for (Eigen::Index i = 0; i < n; ++i) e(i) = gauss(rng);
      w.noalias() = factor * e;
      body(w, partial[b]);
    }
  });
  std::vector<Moments> out(slots);
  for (const auto& p : partial)
    for (std::size_t i = 0; i < slots; ++i) out[i].merge(p[i]);
  return out;
}

HessianLaw single_point_law(const KernelModel& model, bool with_value) {
  const Point o(0, 0);
  std::vector<FieldItem> cond = gradient_items(o);
  if (with_value) cond.insert(cond.begin(), FieldItem{o, {0, 0}});
  return hessian_law(model, {o}, cond);
}

HessianLaw pair_law(const KernelModel& model, double r, int which) {
  const Point x(0, 0), y(r, 0);
  if (!(r > 0)) throw Error(ErrorKind::Config, "pair separation must be positive");
  std::vector<FieldItem> cond;
  switch (which) {
    case 1:
      cond = concat(std::vector<FieldItem>{{x, {0, 0}}, {y, {0, 0}}}, gradient_items(x), gradient_items(y));
      break;
    case 2:
      cond = concat(std::vector<FieldItem>{{x, {0, 0}}}, gradient_items(x), gradient_items(y));
      break;
    default:
      cond = concat(gradient_items(x), gradient_items(y));
  }
  const auto set = assemble_sigma<quad>(model, x, y);
  if (set.degenerate)
    throw Error(ErrorKind::Degenerate, "degenerate pair at r = " + std::to_string(r));
  return hessian_law(model, {x, y}, cond);
}

IntensityValue finish(int which, const KernelModel& model, const McConfig& mc, double density, Estimate e) {
  IntensityValue v;
  v.which = which;
  v.density = density;
  v.estimate = density * e.value;
  v.std_error = density * e.std_error;
  v.samples = 2 * (mc.samples / 2);
  v.seed = mc.seed;
  v.kernel = model.id();
  return v;
}

// Antiderivatives of phi(s) s^k, with their limits at +-infinity.
double partial0(double s) { return std_normal_cdf(s); }
double partial1(double s) { return std::isinf(s) ? 0.0 : -std_normal_pdf(s); }
double partial2(double s) {
  if (std::isinf(s)) return s > 0 ? 1.0 : 0.0;
  return std_normal_cdf(s) - s * std_normal_pdf(s);
}

}  // namespace

nlohmann::json McConfig::to_json() const {
  return {{"samples", samples}, {"seed", seed}, {"batch", batch}};
}

nlohmann::json IntensityValue::to_json() const {
  nlohmann::json j{{"kernel", kernel},   {"which", which},       {"estimate", estimate},
                   {"std_error", std_error}, {"density", density}, {"samples", samples},
                   {"seed", seed}};
  j["r"] = std::isnan(r) ? nlohmann::json() : nlohmann::json(r);
  j["s"] = std::isnan(s) ? nlohmann::json() : nlohmann::json(s);
  j["t"] = std::isnan(t) ? nlohmann::json() : nlohmann::json(t);
  return j;
}

double HessianLaw::density(const Eigen::VectorXd& z) const {
  Vector<quad> zq(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) zq(i) = quad(z(i));
  return static_cast<double>(gaussian_density<quad>(z_cov, zq));
}

HessianLaw hessian_law(const KernelModel& model, const std::vector<Point>& hessian_points,
                       const std::vector<FieldItem>& conditioning) {
  std::vector<FieldItem> items;
  for (const auto& p : hessian_points) {
    const auto h = hessian_items(p);
    items.insert(items.end(), h.begin(), h.end());
  }
  const auto ny = static_cast<Eigen::Index>(items.size());
  items.insert(items.end(), conditioning.begin(), conditioning.end());
  const Matrix<quad> joint = joint_covariance<quad>(model, items);
  const auto law = gaussian_regression<quad>(joint, ny);

  Eigen::SelfAdjointEigenSolver<Matrix<quad>> es(law.cov);
  const Vector<quad> ev = es.eigenvalues().cwiseMax(quad(0));
  const quad top = ev.maxCoeff();
  HessianLaw out;
  out.blocks = static_cast<int>(hessian_points.size());
  out.mean_map = cast_to_double(law.coeff);
  out.factor = cast_to_double(es.eigenvectors() * ev.cwiseSqrt().asDiagonal());
  out.z_cov = joint.bottomRightCorner(joint.rows() - ny, joint.rows() - ny);
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > top * quad(1e-24)) ++out.rank;
  return out;
}

std::vector<Estimate> mc_abs_det(const HessianLaw& law, const std::vector<Eigen::VectorXd>& zs,
                                 const McConfig& mc) {
  const auto n = law.factor.rows();
  std::vector<Eigen::VectorXd> means;
  means.reserve(zs.size());
  for (const auto& z : zs) {
    if (z.size() != law.mean_map.cols()) throw Error(ErrorKind::Config, "conditioning value has wrong size");
    means.push_back(law.mean_map * z);
  }
  const bool two = law.blocks == 2;
  auto moments = run_batches(law.factor, zs.size(), mc, [&](const Eigen::VectorXd& w, std::vector<Moments>& acc) {
    std::array<double, 6> hp{}, hm{};
    for (std::size_t iz = 0; iz < means.size(); ++iz) {
      for (Eigen::Index i = 0; i < n; ++i) {
        hp[i] = means[iz](i) + w(i);
        hm[i] = means[iz](i) - w(i);
      }
      double vp = abs_det_block(hp.data());
      double vm = abs_det_block(hm.data());
      if (two) {
        vp *= abs_det_block(hp.data() + 3);
        vm *= abs_det_block(hm.data() + 3);
      }
      acc[iz].add(0.5 * (vp + vm));
    }
  });
  std::vector<Estimate> out;
  out.reserve(moments.size());
  for (const auto& m : moments) out.push_back(m.estimate());
  return out;
}

IntensityValue intensity_I3(const KernelModel& model, double s, const McConfig& mc) {
  const auto law = single_point_law(model, true);
  const Eigen::Vector3d z(s, 0, 0);
  // (f, grad f) is standard normal under the normalization
  const double density = std_normal_pdf(s) / (2 * kPi);
  auto v = finish(3, model, mc, density, mc_abs_det(law, {z}, mc).front());
  v.s = s;
  return v;
}

IntensityValue intensity_I5(const KernelModel& model, const McConfig& mc) {
  const auto law = single_point_law(model, false);
  const Eigen::Vector2d z(0, 0);
  return finish(5, model, mc, law.density(z), mc_abs_det(law, {z}, mc).front());
}

IntensityValue intensity_I1(const KernelModel& model, double r, double s, double t, const McConfig& mc) {
  const auto law = pair_law(model, r, 1);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(6);
  z(0) = s;
  z(1) = t;
  auto v = finish(1, model, mc, law.density(z), mc_abs_det(law, {z}, mc).front());
  v.r = r;
  v.s = s;
  v.t = t;
  return v;
}

IntensityValue intensity_I2(const KernelModel& model, double r, double s, const McConfig& mc) {
  const auto law = pair_law(model, r, 2);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(5);
  z(0) = s;
  auto v = finish(2, model, mc, law.density(z), mc_abs_det(law, {z}, mc).front());
  v.r = r;
  v.s = s;
  return v;
}

IntensityValue intensity_I4(const KernelModel& model, double r, const McConfig& mc) {
  const auto law = pair_law(model, r, 4);
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(4);
  auto v = finish(4, model, mc, law.density(z), mc_abs_det(law, {z}, mc).front());
  v.r = r;
  return v;
}

double gaussian_abs_quadratic_integral(double A, double B, double C, double a, double b) {
  if (!(a <= b)) throw Error(ErrorKind::Config, "height window needs a <= b");
  if (a == b) return 0.0;
  std::vector<double> cuts{a};
  auto add_root = [&](double x) {
    if (x > a && x < b) cuts.push_back(x);
  };
  if (A != 0) {
    const double disc = B * B - 4 * A * C;
    if (disc > 0) {
      const double q = -0.5 * (B + std::copysign(std::sqrt(disc), B));
      add_root(q / A);
      if (q != 0) add_root(C / q);
    }
  } else if (B != 0) {
    add_root(-C / B);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  double total = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double u = cuts[i], v = cuts[i + 1];
    total += std::abs(A * (partial2(v) - partial2(u)) + B * (partial1(v) - partial1(u)) +
                      C * (partial0(v) - partial0(u)));
  }
  return total;
}

Estimate mean_count(const KernelModel& model, double R, double a, double b, const McConfig& mc) {
  if (!(a <= b)) throw Error(ErrorKind::Config, "height window needs a <= b");
  if (!(R > 0)) throw Error(ErrorKind::Config, "radius must be positive");
  if (a == b) return {0.0, 0.0};
  const auto law = single_point_law(model, true);
  const Eigen::Vector3d c = law.mean_map.col(0);
  const double A = c(0) * c(2) - c(1) * c(1);
  auto moments = run_batches(law.factor, 1, mc, [&](const Eigen::VectorXd& w, std::vector<Moments>& acc) {
    const double B = c(0) * w(2) + c(2) * w(0) - 2 * c(1) * w(1);
    const double C = w(0) * w(2) - w(1) * w(1);
    acc[0].add(0.5 * (gaussian_abs_quadratic_integral(A, B, C, a, b) +
                      gaussian_abs_quadratic_integral(A, -B, C, a, b)));
  });
  // pi R^2 * (2 pi)^{-1} * E[int phi |det|]
  const double scale = R * R / 2;
  const auto e = moments.front().estimate();
  return {scale * e.value, scale * e.std_error};
}

nlohmann::json SupEstimate::to_json() const {
  auto opt = [](double v) { return std::isnan(v) ? nlohmann::json() : nlohmann::json(v); };
  return {{"value", value}, {"std_error", std_error}, {"r", opt(r)}, {"s", opt(s)}, {"t", opt(t)}};
}

nlohmann::json BoundReport::to_json() const {
  return {{"R", R},
          {"a", a},
          {"b", b},
          {"delta", delta},
          {"area", area},
          {"sup_I1", sup_I1.to_json()},
          {"sup_I2", sup_I2.to_json()},
          {"sup_I3", sup_I3.to_json()},
          {"sup_I4", sup_I4.to_json()},
          {"I5", {{"value", I5.value}, {"std_error", I5.std_error}}},
          {"off_diagonal", off_diagonal},
          {"near_diagonal", near_diagonal},
          {"on_diagonal", on_diagonal},
          {"windowed", windowed},
          {"unwindowed", unwindowed},
          {"prediction", prediction},
          {"crossover_width", crossover_width},
          {"caveat", caveat}};
}

double default_delta(const KernelModel& model, const BoundConfig& cfg) {
  for (double delta : {1.0, 0.5, 0.25}) {
    bool clean = true;
    for (double r : log_grid(cfg.r_min, delta, cfg.r_grid)) {
      if (assemble_sigma<quad>(model, Point(0, 0), Point(r, 0)).degenerate) {
        clean = false;
        break;
      }
    }
    if (clean) return delta;
  }
  return 0.25;
}

namespace {

// Grid maximum of density(z) * E|det| over r and a list of conditioning
// values, followed by golden-section refinement in log r at the best z.
struct PairSearch {
  const KernelModel& model;
  int which;
  const McConfig& mc;

  struct Hit {
    double value = -1, se = 0, r = 0;
    Eigen::VectorXd z;
  };

  Hit at_r(double r, const std::vector<Eigen::VectorXd>& zs) const {
    const auto law = pair_law(model, r, which);
    const auto est = mc_abs_det(law, zs, mc);
    Hit best;
    for (std::size_t i = 0; i < zs.size(); ++i) {
      const double d = law.density(zs[i]);
      if (d * est[i].value > best.value) best = {d * est[i].value, d * est[i].std_error, r, zs[i]};
    }
    return best;
  }

  Hit search(const std::vector<double>& rs, const std::vector<Eigen::VectorXd>& zs, int golden) const {
    Hit best;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      Hit h;
      try {
        h = at_r(rs[i], zs);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Degenerate) throw;
        continue;
      }
      if (h.value > best.value) {
        best = h;
        best_i = i;
      }
    }
    if (best.value < 0 || rs.size() < 3 || golden <= 0) return best;
    double lo = std::log(rs[best_i == 0 ? 0 : best_i - 1]);
    double hi = std::log(rs[std::min(best_i + 1, rs.size() - 1)]);
    const double g = (std::sqrt(5.0) - 1) / 2;
    const std::vector<Eigen::VectorXd> one{best.z};
    auto f = [&](double lr) { return at_r(std::exp(lr), one); };
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    Hit f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < golden; ++it) {
      if (f1.value > f2.value) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = f(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = f(x2);
      }
    }
    for (const auto& h : {f1, f2})
      if (h.value > best.value) best = h;
    return best;
  }
};

}  // namespace

BoundReport bound_predict(const KernelModel& model, double R, double a, double b, const BoundConfig& cfg) {
  if (!(R > 0)) throw Error(ErrorKind::Config, "radius must be positive");
  if (!(a <= b) || !std::isfinite(a) || !std::isfinite(b))
    throw Error(ErrorKind::Config, "bound prediction needs a finite window a <= b");
  BoundReport rep;
  rep.R = R;
  rep.a = a;
  rep.b = b;
  rep.delta = cfg.delta > 0 ? cfg.delta : default_delta(model, cfg);
  rep.area = kPi * R * R;
  const double width = b - a;

  const auto full = log_grid(cfg.r_min, std::max(2 * R, rep.delta), cfg.r_grid);
  std::vector<double> near, off;
  for (double r : full) (r <= rep.delta ? near : off).push_back(r);
  if (near.empty() || near.back() < rep.delta) near.push_back(rep.delta);
  if (off.empty() || off.front() > rep.delta) off.insert(off.begin(), rep.delta);

  const auto hs = lobatto_heights(a, b, cfg.heights);

  std::vector<Eigen::VectorXd> z1;
  for (std::size_t i = 0; i < hs.size(); ++i)
    for (std::size_t j = i; j < hs.size(); ++j) {
      Eigen::VectorXd z = Eigen::VectorXd::Zero(6);
      z(0) = hs[i];
      z(1) = hs[j];
      z1.push_back(z);
    }
  const auto h1 = PairSearch{model, 1, cfg.mc}.search(off, z1, cfg.golden_iterations);
  rep.sup_I1 = {h1.value, h1.se, h1.r, h1.z.size() ? h1.z(0) : NAN, h1.z.size() ? h1.z(1) : NAN};

  std::vector<Eigen::VectorXd> z2;
  for (double s : hs) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(5);
    z(0) = s;
    z2.push_back(z);
  }
  const auto h2 = PairSearch{model, 2, cfg.mc}.search(near, z2, cfg.golden_iterations);
  rep.sup_I2 = {h2.value, h2.se, h2.r, h2.z.size() ? h2.z(0) : NAN, NAN};

  {
    const auto law = single_point_law(model, true);
    std::vector<Eigen::VectorXd> z3;
    for (double s : hs) z3.push_back(Eigen::Vector3d(s, 0, 0));
    const auto est = mc_abs_det(law, z3, cfg.mc);
    for (std::size_t i = 0; i < hs.size(); ++i) {
      const double d = std_normal_pdf(hs[i]) / (2 * kPi);
      if (d * est[i].value > rep.sup_I3.value) rep.sup_I3 = {d * est[i].value, d * est[i].std_error, NAN, hs[i], NAN};
    }
  }

  const auto h4 = PairSearch{model, 4, cfg.mc}.search(full, {Eigen::VectorXd::Zero(4)}, cfg.golden_iterations);
  rep.sup_I4 = {h4.value, h4.se, h4.r, NAN, NAN};
  const auto i5 = intensity_I5(model, cfg.mc);
  rep.I5 = {i5.estimate, i5.std_error};

  rep.off_diagonal = rep.area * rep.area * width * width * rep.sup_I1.value;
  rep.near_diagonal = rep.area * width * rep.sup_I2.value;
  rep.on_diagonal = rep.area * width * rep.sup_I3.value;
  rep.windowed = rep.off_diagonal + rep.near_diagonal + rep.on_diagonal;
  rep.unwindowed = rep.area * rep.area * rep.sup_I4.value + rep.area * rep.I5.value;
  rep.prediction = std::min(rep.windowed, rep.unwindowed);

  const double q2 = rep.area * rep.area * rep.sup_I1.value;
  const double q1 = rep.area * (rep.sup_I2.value + rep.sup_I3.value);
  rep.crossover_width = q2 > 0 ? (-q1 + std::sqrt(q1 * q1 + 4 * q2 * rep.unwindowed)) / (2 * q2)
                               : rep.unwindowed / q1;
  rep.caveat =
      "suprema are maxima over a log-spaced r-grid with golden-section refinement and " +
      std::to_string(hs.size()) + " Chebyshev heights; they are lower bounds on the true suprema";
  return rep;
}

double conditional_hessian_product(const KernelModel& model, double r) {
  const Point x(0, 0), y(r, 0);
  const auto items = concat(hessian_items(x), gradient_items(x), gradient_items(y));
  const auto law = gaussian_regression<quad>(joint_covariance<quad>(model, items), 3);
  // entries of the symmetric 2x2 Hessian: h11, h12, h21, h22
  std::array<quad, 4> second{law.cov(0, 0), law.cov(1, 1), law.cov(1, 1), law.cov(2, 2)};
  std::sort(second.begin(), second.end(), [](const quad& l, const quad& r2) { return l > r2; });
  return static_cast<double>(second[0] * second[1]);
}

nlohmann::json AsymptoticsReport::to_json() const {
  nlohmann::json rows_j = nlohmann::json::array();
  for (const auto& row : rows)
    rows_j.push_back({{"r", row.r},
                      {"det_sigma4_over_r4", row.det4_over_r4},
                      {"n_over_r2", row.n_over_r2},
                      {"sigma1_sq", row.sigma1_sq},
                      {"flagged", row.flagged}});
  return {{"rows", rows_j},
          {"limit_det_sigma4_over_r4", limit_det4},
          {"limit_sigma1_sq", limit_sigma1},
          {"limit_n_over_r2", limit_n},
          {"predicted_det_sigma4_over_r4", predicted_det4},
          {"predicted_sigma1_sq", predicted_sigma1},
          {"fit", {{"c3", fit_c3}, {"c5", fit_c5}, {"max_residual_over_c3", fit_residual}}}};
}

AsymptoticsReport near_diagonal_asymptotics(const KernelModel& model, const std::vector<double>& r_list) {
  for (std::size_t i = 0; i < r_list.size(); ++i) {
    if (!(r_list[i] > 0 && r_list[i] <= 0.5)) throw Error(ErrorKind::Config, "r_list must lie in (0, 0.5]");
    if (i > 0 && !(r_list[i] < r_list[i - 1])) throw Error(ErrorKind::Config, "r_list must be decreasing");
  }
  AsymptoticsReport rep;
  for (double r : r_list) {
    const Point x(0, 0), y(r, 0);
    const std::vector<FieldItem> items{{x, {0, 0}}, {x, {1, 0}}, {x, {0, 1}}, {y, {1, 0}}, {y, {0, 1}}};
    const Matrix<quad> sigma4 = joint_covariance<quad>(model, items);
    const quad r2 = quad(r) * quad(r);
    AsymptoticsRow row;
    row.r = r;
    row.flagged = r < 1e-4;
    try {
      row.det4_over_r4 = static_cast<double>(sigma4.determinant() / (r2 * r2));
      row.sigma1_sq = static_cast<double>(gaussian_regression<quad>(sigma4, 1).cov(0, 0));
      row.n_over_r2 = conditional_hessian_product(model, r) / (r * r);
    } catch (const Error&) {
      row.flagged = true;
    }
    rep.rows.push_back(row);
  }

  std::vector<const AsymptoticsRow*> fine;
  for (auto it = rep.rows.rbegin(); it != rep.rows.rend(); ++it)
    if (!it->flagged) fine.push_back(&*it);
  auto richardson = [&](auto field) {
    if (fine.size() < 2) return fine.empty() ? NAN : field(*fine[0]);
    const double r1 = fine[0]->r, r2 = fine[1]->r;
    return (r2 * r2 * field(*fine[0]) - r1 * r1 * field(*fine[1])) / (r2 * r2 - r1 * r1);
  };
  rep.limit_det4 = richardson([](const AsymptoticsRow& w) { return w.det4_over_r4; });
  rep.limit_sigma1 = richardson([](const AsymptoticsRow& w) { return w.sigma1_sq; });
  rep.limit_n = richardson([](const AsymptoticsRow& w) { return w.n_over_r2; });

  if (fine.size() >= 3) {
    Eigen::Matrix<double, 3, 2> design;
    Eigen::Vector3d rhs;
    for (int i = 0; i < 3; ++i) {
      design(i, 0) = 1;
      design(i, 1) = fine[i]->r * fine[i]->r;
      rhs(i) = fine[i]->det4_over_r4;
    }
    const Eigen::Vector2d c = design.colPivHouseholderQr().solve(rhs);
    rep.fit_c3 = c(0);
    rep.fit_c5 = c(1);
    rep.fit_residual = (design * c - rhs).cwiseAbs().maxCoeff() / std::abs(c(0));
  }

  const double m40 = kernel_derivative(model, {4, 0}, Point(0, 0));
  const double m22 = kernel_derivative(model, {2, 2}, Point(0, 0));
  rep.predicted_det4 = (m40 - 1) * m22;
  rep.predicted_sigma1 = (m40 - 1) / m40;
  return rep;
}

}  // namespace critlab
