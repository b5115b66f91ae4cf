#include "critlab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace critlab {

namespace {

double double_factorial(int n) {
  double out = 1;
  for (int k = n; k > 1; k -= 2) out *= k;
  return out;
}

// (1/2pi) int cos^a sin^b over the circle, a and b even.
double circle_average(int a, int b) {
  return double_factorial(a - 1) * double_factorial(b - 1) / double_factorial(a + b);
}

// Coefficients of prod_i (p_i . s) as poly[k] for s1^k s2^(deg-k).
std::vector<double> expand_linear_forms(const std::vector<Eigen::Vector2d>& forms) {
  std::vector<double> poly{1.0};
  for (const auto& f : forms) {
    std::vector<double> next(poly.size() + 1, 0.0);
    // multiplying by f.x() s1 raises the s1 power
    for (std::size_t k = 0; k < poly.size(); ++k) {
      next[k + 1] += poly[k] * f.x();
      next[k] += poly[k] * f.y();
    }
    poly = std::move(next);
  }
  return poly;
}

double directional_variance(const SpectralMeasure& measure, const std::vector<Eigen::Vector2d>& forms) {
  const auto poly = expand_linear_forms(forms);
  const int deg = static_cast<int>(poly.size()) - 1;
  double v = 0;
  for (int k = 0; k <= deg; ++k) {
    if (poly[k] != 0.0) v += poly[k] * measure.moment(k, deg - k);
  }
  return v;
}

double atoms_kernel_derivative(const SpectralMeasure& measure, MultiIndex alpha, const Point& x) {
  double total = 0;
  for (const auto& atom : measure.atom_list()) {
    const double phase = atom.s.dot(x) + alpha.order() * std::numbers::pi / 2;
    total += atom.weight * std::pow(atom.s.x(), alpha.a) * std::pow(atom.s.y(), alpha.b) * std::cos(phase);
  }
  return total;
}

}  // namespace

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::PlaneWave: return "plane-wave";
    case KernelKind::BargmannFock: return "bargmann-fock";
    case KernelKind::UserRadial: return "user-radial";
  }
  return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "plane-wave") return KernelKind::PlaneWave;
  if (name == "bargmann-fock") return KernelKind::BargmannFock;
  if (name == "user-radial") return KernelKind::UserRadial;
  throw Error(ErrorKind::Config, "unknown kernel kind '" + name + "'");
}

KernelModel KernelModel::plane_wave(double length_scale, double amplitude) {
  if (!(length_scale > 0) || !(amplitude > 0))
    throw Error(ErrorKind::Config, "length_scale and amplitude must be positive");
  KernelModel m;
  m.kind_ = KernelKind::PlaneWave;
  m.length_ = length_scale;
  m.amplitude_ = amplitude;
  return m;
}

KernelModel KernelModel::bargmann_fock(double length_scale, double amplitude) {
  KernelModel m = plane_wave(length_scale, amplitude);
  m.kind_ = KernelKind::BargmannFock;
  return m;
}

KernelModel KernelModel::user_radial(std::vector<double> series, double length_scale, double amplitude) {
  if (series.empty() || !(series[0] > 0))
    throw Error(ErrorKind::Config, "profile_series must start with a positive constant term");
  if (series.size() > 16) throw Error(ErrorKind::Config, "profile_series longer than 16 terms");
  KernelModel m = plane_wave(length_scale, amplitude);
  m.kind_ = KernelKind::UserRadial;
  const double c0 = series[0];
  for (auto& c : series) c /= c0;
  m.series_ = std::move(series);
  m.amplitude_ = amplitude * c0;
  return m;
}

KernelModel KernelModel::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw Error(ErrorKind::Config, "kernel config needs an object with 'kind'");
  for (const auto& [key, _] : j.items()) {
    if (key != "kind" && key != "length_scale" && key != "amplitude" && key != "profile_series")
      throw Error(ErrorKind::Config, "unknown kernel config key '" + key + "'");
  }
  const auto kind = kernel_kind_from_string(j.at("kind").get<std::string>());
  const double ell = j.value("length_scale", 1.0);
  const double amp = j.value("amplitude", 1.0);
  switch (kind) {
    case KernelKind::PlaneWave: return plane_wave(ell, amp);
    case KernelKind::BargmannFock: return bargmann_fock(ell, amp);
    case KernelKind::UserRadial:
      if (!j.contains("profile_series"))
        throw Error(ErrorKind::Config, "user-radial kernel requires profile_series");
      return user_radial(j.at("profile_series").get<std::vector<double>>(), ell, amp);
  }
  return plane_wave();
}

nlohmann::json KernelModel::to_json() const {
  nlohmann::json j{{"kind", to_string(kind_)},
                   {"length_scale", length_},
                   {"amplitude", amplitude_},
                   {"normalized", normalized_},
                   {"rescale_factor", rescale_}};
  if (kind_ == KernelKind::UserRadial) j["profile_series"] = series_;
  return j;
}

std::string KernelModel::id() const {
  std::ostringstream os;
  os.precision(6);
  os << to_string(kind_) << "(l=" << length_ << ",A=" << amplitude_ << ")";
  return os.str();
}

SpectralMeasure KernelModel::spectral_measure() const {
  switch (kind_) {
    case KernelKind::PlaneWave: return SpectralMeasure::circle(1.0 / length_, amplitude_);
    case KernelKind::BargmannFock: return SpectralMeasure::gaussian(1.0 / length_, amplitude_);
    case KernelKind::UserRadial: return SpectralMeasure::from_kernel(*this);
  }
  return SpectralMeasure::from_kernel(*this);
}

KernelModel normalize(const KernelModel& model) {
  const double k0 = model.amplitude() * model.base_derivative<double>(0, 0.0);
  const double d2 = -kernel_derivative<double>(model, {2, 0}, 0.0, 0.0);
  if (!(k0 > 0)) throw Error(ErrorKind::Degenerate, "kernel variance kappa(0) must be positive");
  if (!(d2 > 0)) throw Error(ErrorKind::Degenerate, "gradient variance -d^(2,0) kappa(0) must be positive");
  const double q = d2 / k0;
  KernelModel out = model;
  out.amplitude_ = model.amplitude_ / k0;
  out.length_ = model.length_ * std::sqrt(q);
  out.rescale_ = model.rescale_ * model.length_ / out.length_;
  out.normalized_ = true;
  return out;
}

SpectralMeasure SpectralMeasure::circle(double radius, double mass) {
  SpectralMeasure m;
  m.kind_ = Kind::Circle;
  m.radius_ = radius;
  m.mass_ = mass;
  return m;
}

SpectralMeasure SpectralMeasure::gaussian(double sigma, double mass) {
  SpectralMeasure m = circle(sigma, mass);
  m.kind_ = Kind::Gaussian;
  return m;
}

SpectralMeasure SpectralMeasure::atoms(std::vector<Atom> atoms) {
  SpectralMeasure m;
  m.kind_ = Kind::Atoms;
  m.mass_ = 0;
  for (const auto& a : atoms) {
    if (!(a.weight > 0)) throw Error(ErrorKind::Config, "atom weights must be positive");
    for (int sx : {1, -1}) {
      for (int sy : {1, -1}) {
        m.atoms_.push_back({Eigen::Vector2d(sx * a.s.x(), sy * a.s.y()), a.weight / 4});
      }
    }
    m.mass_ += a.weight;
  }
  return m;
}

SpectralMeasure SpectralMeasure::from_kernel(const KernelModel& model) {
  SpectralMeasure m;
  m.kind_ = Kind::Moments;
  m.mass_ = model.amplitude() * model.base_derivative<double>(0, 0.0);
  m.kernel_moments_.assign(49, 0.0);
  for (int a = 0; a <= kMaxDerivativeOrder; a += 2) {
    for (int b = 0; a + b <= kMaxDerivativeOrder; b += 2) {
      // d^alpha kappa(0) = i^{|alpha|} int s^alpha d rho
      const double sign = ((a + b) / 2) % 2 == 0 ? 1.0 : -1.0;
      m.kernel_moments_[a * 7 + b] = sign * kernel_derivative<double>(model, {a, b}, 0.0, 0.0);
    }
  }
  return m;
}

double SpectralMeasure::moment(int a, int b) const {
  if (a < 0 || b < 0 || a + b > kMaxDerivativeOrder)
    throw Error(ErrorKind::UnsupportedOrder, "spectral moment order above 6");
  if (a % 2 != 0 || b % 2 != 0) return 0.0;
  const int n = a + b;
  switch (kind_) {
    case Kind::Circle:
      return mass_ * std::pow(radius_, n) * circle_average(a, b);
    case Kind::Gaussian: {
      const double sigma = radius_;
      auto radial = [&](double r) {
        return std::pow(r, n + 1) * std::exp(-r * r / (2 * sigma * sigma)) / (2 * std::numbers::pi * sigma * sigma);
      };
      double err = 0;
      const double radial_part = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
          radial, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-14, &err);
      // trapezoid is exact for trigonometric polynomials of degree < nodes
      constexpr int nodes = 64;
      double angular = 0;
      for (int k = 0; k < nodes; ++k) {
        const double t = 2 * std::numbers::pi * k / nodes;
        angular += std::pow(std::cos(t), a) * std::pow(std::sin(t), b);
      }
      angular *= 2 * std::numbers::pi / nodes;
      return mass_ * radial_part * angular;
    }
    case Kind::Atoms: {
      double total = 0;
      for (const auto& atom : atoms_) total += atom.weight * std::pow(atom.s.x(), a) * std::pow(atom.s.y(), b);
      return total;
    }
    case Kind::Moments:
      return kernel_moments_[a * 7 + b];
  }
  return 0.0;
}

Eigen::Vector2d SpectralMeasure::sample(Engine& rng) const {
  switch (kind_) {
    case Kind::Circle: {
      std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
      const double t = angle(rng);
      return radius_ * Eigen::Vector2d(std::cos(t), std::sin(t));
    }
    case Kind::Gaussian: {
      std::normal_distribution<double> normal(0.0, radius_);
      const double s1 = normal(rng);
      const double s2 = normal(rng);
      return {s1, s2};
    }
    case Kind::Atoms: {
      std::uniform_real_distribution<double> u(0.0, mass_);
      double target = u(rng);
      for (const auto& atom : atoms_) {
        target -= atom.weight;
        if (target <= 0) return atom.s;
      }
      return atoms_.back().s;
    }
    case Kind::Moments:
      break;
  }
  throw Error(ErrorKind::NotSampleable, "spectral measure is only known through its moments");
}

nlohmann::json ConditionReport::to_json() const {
  return {{"v_grid", v_grid},
          {"far_radius", far_radius},
          {"margin_20", margin_20},
          {"margin_11", margin_11},
          {"argmin_20", argmin_20},
          {"argmin_11", argmin_11},
          {"gradient_variance_deviation", gradient_variance_deviation},
          {"far_max_derivative", far_max_derivative},
          {"decay_tolerance", decay_tolerance},
          {"condition1_decay", condition1_decay},
          {"condition2_support", condition2_support},
          {"pass", pass()}};
}

ConditionReport check_conditions(const SpectralMeasure& measure, const KernelModel* model, int v_grid,
                                 double far_radius, double decay_tolerance) {
  if (v_grid < 1) throw Error(ErrorKind::Config, "v_grid must be positive");
  ConditionReport rep;
  rep.v_grid = v_grid;
  rep.far_radius = far_radius;
  rep.decay_tolerance = decay_tolerance;
  rep.margin_20 = std::numeric_limits<double>::infinity();
  rep.margin_11 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < v_grid; ++k) {
    const double t = 2 * std::numbers::pi * k / v_grid;
    const Eigen::Vector2d v(std::cos(t), std::sin(t));
    const Eigen::Vector2d w(-v.y(), v.x());
    const double var10 = directional_variance(measure, {v, v});
    const double var20 = directional_variance(measure, {v, v, v, v});
    const double var11 = directional_variance(measure, {v, v, w, w});
    rep.gradient_variance_deviation = std::max(rep.gradient_variance_deviation, std::abs(var10 - 1.0));
    if (var20 - 1.0 < rep.margin_20) {
      rep.margin_20 = var20 - 1.0;
      rep.argmin_20 = t;
    }
    if (var11 < rep.margin_11) {
      rep.margin_11 = var11;
      rep.argmin_11 = t;
    }
  }
  // margins equal to zero up to roundoff are the excluded equality case
  constexpr double margin_floor = 1e-9;
  rep.condition2_support = rep.margin_20 > margin_floor && rep.margin_11 > margin_floor;

  constexpr MultiIndex low_orders[] = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  constexpr int directions = 16;
  for (int k = 0; k < directions; ++k) {
    const double t = 2 * std::numbers::pi * (k + 0.5) / directions;
    const Point x = far_radius * Point(std::cos(t), std::sin(t));
    for (auto alpha : low_orders) {
      double d = 0;
      if (model) {
        d = kernel_derivative(*model, alpha, x);
      } else if (measure.kind() == SpectralMeasure::Kind::Atoms) {
        d = atoms_kernel_derivative(measure, alpha, x);
      } else {
        throw Error(ErrorKind::Config, "decay check needs a kernel model");
      }
      rep.far_max_derivative = std::max(rep.far_max_derivative, std::abs(d));
    }
  }
  rep.condition1_decay = rep.far_max_derivative <= decay_tolerance;
  return rep;
}

ConditionReport check_conditions(const KernelModel& model, int v_grid, double far_radius,
                                 double decay_tolerance) {
  return check_conditions(model.spectral_measure(), &model, v_grid, far_radius, decay_tolerance);
}

}  // namespace critlab
