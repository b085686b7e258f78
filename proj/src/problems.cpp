#include "hjinr/problems.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>

#include "hjinr/error.hpp"
#include "hjinr/tape.hpp"

namespace hjinr {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> filled(std::size_t d, double v) { return std::vector<double>(d, v); }

Box cube(std::size_t d, double lo, double hi) { return Box{filled(d, lo), filled(d, hi)}; }

struct Entry {
  std::string_view name;
  std::string_view title;
  std::size_t default_dim;
  bool any_dim;
  std::size_t min_dim;
  std::size_t max_dim;
  std::function<ProblemSpec(std::size_t)> build;
};

ProblemSpec base(std::size_t d, HamiltonianId h, InitialId g, Box box, double horizon,
                 BoundaryKind bc) {
  ProblemSpec p;
  p.dim = d;
  p.hamiltonian = h;
  p.initial = g;
  p.domain = std::move(box);
  p.horizon = horizon;
  p.boundary = bc;
  p.state_dependent = reads_state(h);
  return p;
}

const std::vector<Entry>& registry() {
  using H = HamiltonianId;
  using G = InitialId;
  using B = BoundaryKind;
  static const std::vector<Entry> entries = {
      {"burgers", "quadratic Hamiltonian, l1 initial data", 1, true, 1, 1000,
       [](std::size_t d) { return base(d, H::Quad, G::L1Norm, cube(d, -1, 1), 1.0, B::None); }},
      {"concave", "concave quadratic Hamiltonian, l1 initial data", 1, true, 1, 1000,
       [](std::size_t d) { return base(d, H::NegQuad, G::L1Norm, cube(d, -1, 1), 1.0, B::None); }},
      {"collision", "level-set collision of two spheres", 2, true, 1, 1000,
       [](std::size_t d) { return base(d, H::Norm, G::TwoSpheres, cube(d, -1, 1), 1.0, B::None); }},
      {"cos", "nonconvex -cos(sum p + 1), periodic", 1, true, 1, 2,
       [](std::size_t d) {
         Box box = d == 1 ? cube(1, 0, 2) : cube(d, -2, 2);
         return base(d, H::Cos, G::CosSum, std::move(box), 0.2, B::Periodic);
       }},
      {"riemann-sin", "two-dimensional Riemann problem, sin(p1 + p2)", 2, false, 2, 2,
       [](std::size_t d) { return base(d, H::Sin, G::Riemann, cube(d, -1, 1), 1.0, B::None); }},
      {"product", "fully two-dimensional p1 p2", 2, false, 2, 2,
       [](std::size_t d) {
         return base(d, H::Prod, G::SinCos, cube(d, 0, 2 * kPi), 1.5, B::Periodic);
       }},
      {"eikonal", "geometric optics sqrt(p1 + p2 + 1)", 2, false, 2, 2,
       [](std::size_t d) { return base(d, H::Sqrt, G::CosProduct, cube(d, 0, 1), 0.45, B::Periodic); }},
      {"eikonal-squared", "geometric optics sqrt(p1^2 + p2^2 + 1)", 2, false, 2, 2,
       [](std::size_t d) {
         auto p = base(d, H::Sqrt, G::CosProduct, cube(d, 0, 1), 0.45, B::Periodic);
         p.squared_radicand = true;
         return p;
       }},
      {"combustion", "combustion -sqrt(p1 + p2 + 1)", 2, false, 2, 2,
       [](std::size_t d) { return base(d, H::NegSqrt, G::CosDiff, cube(d, 0, 1), 0.27, B::Periodic); }},
      {"combustion-squared", "combustion -sqrt(p1^2 + p2^2 + 1)", 2, false, 2, 2,
       [](std::size_t d) {
         auto p = base(d, H::NegSqrt, G::CosDiff, cube(d, 0, 1), 0.27, B::Periodic);
         p.squared_radicand = true;
         return p;
       }},
      {"cubic", "one-dimensional nonconvex p^3 - p", 1, false, 1, 1,
       [](std::size_t d) { return base(d, H::Cubic, G::CubicCos, cube(d, -kPi, kPi), 0.7, B::Periodic); }},
      {"advect-sin", "variable coefficient linear advection sin(x) p", 1, false, 1, 1,
       [](std::size_t d) { return base(d, H::AdvectSin, G::Sin, cube(d, 0, 2 * kPi), 1.0, B::Periodic); }},
      {"rotation", "solid body rotation", 2, false, 2, 2,
       [](std::size_t d) {
         return base(d, H::Rotation, G::ConePlateau, cube(d, -1, 1), 1.0, B::Periodic);
       }},
      {"cost-oc", "optimal control cost determination", 2, false, 2, 2,
       [](std::size_t d) {
         return base(d, H::OptimalCost, G::Zero, cube(d, 0, 2 * kPi), 1.0, B::Periodic);
       }},
      {"osc-plus", "harmonic oscillator +", 2, false, 2, 2,
       [](std::size_t d) { return base(d, H::OscPlus, G::Ellipse, cube(d, -1, 1), 0.4, B::None); }},
      {"osc-minus", "harmonic oscillator -", 2, false, 2, 2,
       [](std::size_t d) { return base(d, H::OscMinus, G::Ellipse, cube(d, -1, 1), 0.4, B::None); }},
      {"nonconvex1", "state-dependent nonconvex -c(x) p1 + 2|p2| + |p| - 1", 2, false, 2, 2,
       [](std::size_t d) { return base(d, H::Nonconvex1, G::Ellipse, cube(d, -1, 1), 1.0, B::None); }},
      {"nonconvex2", "state-dependent nonconvex -c(x)|p1| - c(-x)|p2|", 2, false, 2, 2,
       [](std::size_t d) { return base(d, H::Nonconvex2, G::Ellipse, cube(d, -1, 1), 0.3, B::None); }},
      {"speed-min", "state-dependent speed f(x)|p| (minimization)", 2, false, 2, 2,
       [](std::size_t d) { return base(d, H::SpeedPlus, G::QuadForm, cube(d, -1, 1), 0.2, B::None); }},
      {"speed-max", "state-dependent speed -f(x)|p| (maximization)", 2, false, 2, 2,
       [](std::size_t d) { return base(d, H::SpeedMinus, G::QuadForm, cube(d, -1, 1), 0.5, B::None); }},
      {"ocquad-g1", "quadratic optimal control, quadratic initial cost", 10, true, 1, 1000,
       [](std::size_t d) { return base(d, H::OcQuad, G::ShiftedQuad, cube(d, -1, 1), 0.5, B::None); }},
      {"ocquad-g2", "quadratic optimal control, nonconvex initial cost", 10, true, 1, 1000,
       [](std::size_t d) { return base(d, H::OcQuad, G::MinQuad, cube(d, -1, 1), 0.5, B::None); }},
      {"viscosity-zero", "u_t + u_x^2 = 0 with zero data", 1, false, 1, 1,
       [](std::size_t d) { return base(d, H::QuadUnit, G::Zero, cube(d, -1, 1), 1.0, B::None); }},
  };
  return entries;
}

// c(x) = 2 (1 + 3 exp(-4 |x - (1,1)|^2)),  f(x) = c(x) / 2.
double bump(std::span<const double> x, double sign_flip) {
  double r2 = 0.0;
  for (double xi : x) {
    const double v = sign_flip * xi - 1.0;
    r2 += v * v;
  }
  return 1.0 + 3.0 * std::exp(-4.0 * r2);
}

double psi_term(std::size_t i, double xi) {
  const double a = i == 0 ? 4.0 : (i == 1 ? 6.0 : 5.0);
  const double b = i == 0 ? 3.0 : (i == 1 ? 9.0 : 6.0);
  return xi >= 0.0 ? -a * xi : b * xi;
}

template <class T>
T norm2(std::span<const T> p) {
  T s(0.0);
  for (const T& v : p) {
    s = s + v * v;
  }
  return s;
}

template <class T>
T sum(std::span<const T> p) {
  T s(0.0);
  for (const T& v : p) {
    s = s + v;
  }
  return s;
}

template <class T>
T sqrt_radicand(const ProblemSpec& problem, std::span<const T> p) {
  if (problem.squared_radicand) {
    return p[0] * p[0] + p[1] * p[1] + T(1.0);
  }
  return p[0] + p[1] + T(1.0);
}

}  // namespace

bool Box::contains(std::span<const double> x, double tol) const {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) {
      return false;
    }
  }
  return true;
}

void ProblemSpec::validate() const {
  if (dim == 0 || domain.lower.size() != dim || domain.upper.size() != dim) {
    throw ConfigError("problem '" + id + "': domain dimension mismatch");
  }
  for (std::size_t i = 0; i < dim; ++i) {
    if (!(domain.lower[i] < domain.upper[i])) {
      throw ConfigError("problem '" + id + "': empty domain along axis " + std::to_string(i));
    }
  }
  if (!(horizon > 0.0)) {
    throw ConfigError("problem '" + id + "': horizon must be positive");
  }
  if (state_dependent != reads_state(hamiltonian)) {
    throw ConfigError("problem '" + id + "': state_dependent flag disagrees with Hamiltonian");
  }
}

ProblemSpec make_problem(std::string_view id) {
  std::string_view name = id;
  std::optional<std::size_t> dim;
  if (const auto pos = id.rfind("-d"); pos != std::string_view::npos && pos + 2 < id.size()) {
    const std::string_view digits = id.substr(pos + 2);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec == std::errc() && ptr == digits.data() + digits.size()) {
      name = id.substr(0, pos);
      dim = v;
    }
  }
  for (const Entry& e : registry()) {
    if (e.name != name) {
      continue;
    }
    const std::size_t d = dim.value_or(e.default_dim);
    if (d < e.min_dim || d > e.max_dim) {
      throw ConfigError("problem '" + std::string(id) + "': dimension " + std::to_string(d) +
                        " not supported (allowed " + std::to_string(e.min_dim) + ".." +
                        std::to_string(e.max_dim) + ")");
    }
    ProblemSpec p = e.build(d);
    p.id = std::string(e.name) + "-d" + std::to_string(d);
    p.title = std::string(e.title);
    p.validate();
    return p;
  }
  throw ConfigError("unknown problem id '" + std::string(id) + "'");
}

std::vector<std::string> catalog_ids() {
  std::vector<std::string> ids;
  for (const Entry& e : registry()) {
    ids.push_back(std::string(e.name) + "-d" + std::to_string(e.default_dim));
  }
  return ids;
}

std::string_view hamiltonian_name(HamiltonianId id) {
  switch (id) {
    case HamiltonianId::Quad: return "quad";
    case HamiltonianId::NegQuad: return "negquad";
    case HamiltonianId::QuadUnit: return "quad-unit";
    case HamiltonianId::Norm: return "norm";
    case HamiltonianId::Cos: return "cos";
    case HamiltonianId::Sin: return "sin";
    case HamiltonianId::Prod: return "prod";
    case HamiltonianId::Sqrt: return "sqrt";
    case HamiltonianId::NegSqrt: return "negsqrt";
    case HamiltonianId::Cubic: return "cubic";
    case HamiltonianId::AdvectSin: return "adv-sin";
    case HamiltonianId::Rotation: return "rot";
    case HamiltonianId::OptimalCost: return "oc";
    case HamiltonianId::OscPlus: return "osc+";
    case HamiltonianId::OscMinus: return "osc-";
    case HamiltonianId::Nonconvex1: return "nc1";
    case HamiltonianId::Nonconvex2: return "nc2";
    case HamiltonianId::SpeedPlus: return "speed+";
    case HamiltonianId::SpeedMinus: return "speed-";
    case HamiltonianId::OcQuad: return "ocquad";
  }
  return "?";
}

std::string_view boundary_name(BoundaryKind kind) {
  switch (kind) {
    case BoundaryKind::None: return "none";
    case BoundaryKind::Periodic: return "periodic";
    case BoundaryKind::Dirichlet: return "dirichlet";
  }
  return "?";
}

BoundaryKind parse_boundary(std::string_view name) {
  if (name == "none") return BoundaryKind::None;
  if (name == "periodic") return BoundaryKind::Periodic;
  if (name == "dirichlet") return BoundaryKind::Dirichlet;
  throw ConfigError("unknown boundary kind '" + std::string(name) + "'");
}

Convexity convexity(HamiltonianId id) {
  switch (id) {
    case HamiltonianId::Quad:
    case HamiltonianId::QuadUnit:
    case HamiltonianId::Norm:
      return Convexity::Convex;
    case HamiltonianId::NegQuad:
      return Convexity::Concave;
    default:
      return Convexity::Neither;
  }
}

bool reads_state(HamiltonianId id) {
  switch (id) {
    case HamiltonianId::AdvectSin:
    case HamiltonianId::Rotation:
    case HamiltonianId::OptimalCost:
    case HamiltonianId::OscPlus:
    case HamiltonianId::OscMinus:
    case HamiltonianId::Nonconvex1:
    case HamiltonianId::Nonconvex2:
    case HamiltonianId::SpeedPlus:
    case HamiltonianId::SpeedMinus:
    case HamiltonianId::OcQuad:
      return true;
    default:
      return false;
  }
}

template <class T>
T hamiltonian_value(const ProblemSpec& problem, std::span<const double> x, std::span<const T> p) {
  using ad::abs;
  using ad::cos;
  using ad::sign;
  using ad::sin;
  using ad::sqrt;
  if (p.size() != problem.dim || (problem.state_dependent && x.size() != problem.dim)) {
    throw ConfigError("hamiltonian: dimension mismatch for '" + problem.id + "'");
  }
  switch (problem.hamiltonian) {
    case HamiltonianId::Quad:
      return T(0.5) * norm2(p);
    case HamiltonianId::NegQuad:
      return T(-0.5) * norm2(p);
    case HamiltonianId::QuadUnit:
      return norm2(p);
    case HamiltonianId::Norm:
      return sqrt(norm2(p));
    case HamiltonianId::Cos:
      return -cos(sum(p) + T(1.0));
    case HamiltonianId::Sin:
      return sin(p[0] + p[1]);
    case HamiltonianId::Prod:
      return p[0] * p[1];
    case HamiltonianId::Sqrt:
      return sqrt(ad::max(sqrt_radicand(problem, p), T(0.0)));
    case HamiltonianId::NegSqrt:
      return -sqrt(ad::max(sqrt_radicand(problem, p), T(0.0)));
    case HamiltonianId::Cubic:
      return p[0] * p[0] * p[0] - p[0];
    case HamiltonianId::AdvectSin:
      return T(std::sin(x[0])) * p[0];
    case HamiltonianId::Rotation:
      return T(-x[1]) * p[0] + T(x[0]) * p[1];
    case HamiltonianId::OptimalCost: {
      const double sy = std::sin(x[1]);
      return p[0] * T(sy) + (T(sy) + sign(p[1])) * p[1] - T(0.5 * sy * sy) -
             T(1.0 - std::cos(x[0]));
    }
    case HamiltonianId::OscPlus:
    case HamiltonianId::OscMinus: {
      double xx = 0.0;
      for (double v : x) xx += v * v;
      const T h = T(0.5) * (T(xx) + norm2(p));
      return problem.hamiltonian == HamiltonianId::OscPlus ? h : -h;
    }
    case HamiltonianId::Nonconvex1: {
      const double c = 2.0 * bump(x, 1.0);
      return T(-c) * p[0] + T(2.0) * abs(p[1]) + sqrt(norm2(p)) - T(1.0);
    }
    case HamiltonianId::Nonconvex2:
      return T(-2.0 * bump(x, 1.0)) * abs(p[0]) - T(2.0 * bump(x, -1.0)) * abs(p[1]);
    case HamiltonianId::SpeedPlus:
      return T(bump(x, 1.0)) * sqrt(norm2(p));
    case HamiltonianId::SpeedMinus:
      return T(-bump(x, 1.0)) * sqrt(norm2(p));
    case HamiltonianId::OcQuad: {
      double psi = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) psi += psi_term(i, x[i]);
      return T(0.5) * norm2(p) + T(psi);
    }
  }
  throw ConfigError("unknown Hamiltonian");
}

template <class T>
void hamiltonian_grad_p(const ProblemSpec& problem, std::span<const double> x,
                        std::span<const T> p, std::span<T> out) {
  using ad::cos;
  using ad::sign;
  using ad::sin;
  using ad::sqrt;
  const std::size_t d = problem.dim;
  if (p.size() != d || out.size() != d || (problem.state_dependent && x.size() != d)) {
    throw ConfigError("hamiltonian gradient: dimension mismatch for '" + problem.id + "'");
  }
  auto regularized_unit = [&](double scale) {
    const T n = sqrt(norm2(p) + T(kNormEpsilon * kNormEpsilon));
    for (std::size_t i = 0; i < d; ++i) out[i] = T(scale) * p[i] / n;
  };
  switch (problem.hamiltonian) {
    case HamiltonianId::Quad:
    case HamiltonianId::OcQuad:
      for (std::size_t i = 0; i < d; ++i) out[i] = p[i];
      return;
    case HamiltonianId::NegQuad:
      for (std::size_t i = 0; i < d; ++i) out[i] = -p[i];
      return;
    case HamiltonianId::QuadUnit:
      for (std::size_t i = 0; i < d; ++i) out[i] = T(2.0) * p[i];
      return;
    case HamiltonianId::Norm:
      regularized_unit(1.0);
      return;
    case HamiltonianId::Cos: {
      const T s = sin(sum(p) + T(1.0));
      for (std::size_t i = 0; i < d; ++i) out[i] = s;
      return;
    }
    case HamiltonianId::Sin: {
      const T c = cos(p[0] + p[1]);
      out[0] = c;
      out[1] = c;
      return;
    }
    case HamiltonianId::Prod:
      out[0] = p[1];
      out[1] = p[0];
      return;
    case HamiltonianId::Sqrt:
    case HamiltonianId::NegSqrt: {
      const T r = sqrt_radicand(problem, p);
      const double sgn = problem.hamiltonian == HamiltonianId::Sqrt ? 1.0 : -1.0;
      if (ad::value_of(r) <= 0.0) {
        out[0] = T(0.0);
        out[1] = T(0.0);
        return;
      }
      const T k = T(0.5 * sgn) / sqrt(r);
      if (problem.squared_radicand) {
        out[0] = T(2.0) * k * p[0];
        out[1] = T(2.0) * k * p[1];
      } else {
        out[0] = k;
        out[1] = k;
      }
      return;
    }
    case HamiltonianId::Cubic:
      out[0] = T(3.0) * p[0] * p[0] - T(1.0);
      return;
    case HamiltonianId::AdvectSin:
      out[0] = T(std::sin(x[0]));
      return;
    case HamiltonianId::Rotation:
      out[0] = T(-x[1]);
      out[1] = T(x[0]);
      return;
    case HamiltonianId::OptimalCost: {
      const double sy = std::sin(x[1]);
      out[0] = T(sy);
      out[1] = T(sy) + sign(p[1]);
      return;
    }
    case HamiltonianId::OscPlus:
      for (std::size_t i = 0; i < d; ++i) out[i] = p[i];
      return;
    case HamiltonianId::OscMinus:
      for (std::size_t i = 0; i < d; ++i) out[i] = -p[i];
      return;
    case HamiltonianId::Nonconvex1: {
      const double c = 2.0 * bump(x, 1.0);
      const T n = sqrt(norm2(p) + T(kNormEpsilon * kNormEpsilon));
      out[0] = T(-c) + p[0] / n;
      out[1] = T(2.0) * sign(p[1]) + p[1] / n;
      return;
    }
    case HamiltonianId::Nonconvex2:
      out[0] = T(-2.0 * bump(x, 1.0)) * sign(p[0]);
      out[1] = T(-2.0 * bump(x, -1.0)) * sign(p[1]);
      return;
    case HamiltonianId::SpeedPlus:
      regularized_unit(bump(x, 1.0));
      return;
    case HamiltonianId::SpeedMinus:
      regularized_unit(-bump(x, 1.0));
      return;
  }
  throw ConfigError("unknown Hamiltonian");
}

template <class T>
T initial_value(const ProblemSpec& problem, std::span<const T> x) {
  using ad::abs;
  using ad::cos;
  using ad::min;
  using ad::sin;
  using ad::sqrt;
  const std::size_t d = problem.dim;
  if (x.size() != d) {
    throw ConfigError("initial value: dimension mismatch for '" + problem.id + "'");
  }
  switch (problem.initial) {
    case InitialId::L1Norm: {
      T s(0.0);
      for (const T& v : x) s = s + abs(v);
      return s;
    }
    case InitialId::TwoSpheres: {
      T r1(0.0);
      T r2(0.0);
      for (std::size_t i = 0; i < d; ++i) {
        const double c = i == 0 ? 0.3 : 0.0;
        r1 = r1 + ad::square(x[i] + T(c));
        r2 = r2 + ad::square(x[i] - T(c));
      }
      return min(sqrt(r1), sqrt(r2)) - T(0.2);
    }
    case InitialId::CosSum:
      return -cos(T(kPi / static_cast<double>(d)) * sum(x));
    case InitialId::Riemann:
      return T(kPi) * (abs(x[1]) - abs(x[0]));
    case InitialId::SinCos:
      return sin(x[0]) + cos(x[1]);
    case InitialId::CosProduct:
      return T(0.25) * (cos(T(2 * kPi) * x[0]) - T(1.0)) * (cos(T(2 * kPi) * x[1]) - T(1.0)) -
             T(1.0);
    case InitialId::CosDiff:
      return cos(T(2 * kPi) * x[0]) - cos(T(2 * kPi) * x[1]);
    case InitialId::CubicCos:
      return T(-0.1) * cos(T(5.0) * x[0]);
    case InitialId::Sin:
      return sin(x[0]);
    case InitialId::ConePlateau: {
      const T r = sqrt(ad::square(x[0] - T(0.4)) + ad::square(x[1] - T(0.4)));
      const double rv = ad::value_of(r);
      if (rv >= 0.3) return T(0.0);
      if (rv > 0.1) return T(0.3) - r;
      return T(0.2);
    }
    case InitialId::Zero:
      return T(0.0);
    case InitialId::Ellipse:
      return T(0.5) * (x[0] * x[0] / T(2.5 * 2.5) + x[1] * x[1] - T(1.0));
    case InitialId::QuadForm:
      return T(0.5) * (T(0.25) * x[0] * x[0] + x[1] * x[1] - T(1.0));
    case InitialId::ShiftedQuad: {
      T s(0.0);
      for (const T& v : x) s = s + ad::square(v - T(1.0));
      return T(0.5) * s;
    }
    case InitialId::MinQuad: {
      static constexpr double centers[3][3] = {{-2, 0, 0}, {2, -2, -1}, {0, 2, 0}};
      static constexpr double alpha[3] = {-0.5, 0.0, -1.0};
      T best(0.0);
      for (int j = 0; j < 3; ++j) {
        T s(0.0);
        for (std::size_t i = 0; i < d; ++i) {
          const double c = i < 3 ? centers[j][i] : 0.0;
          s = s + ad::square(x[i] - T(c));
        }
        const T gj = T(0.5) * s - T(alpha[j]);
        best = j == 0 ? gj : min(best, gj);
      }
      return best;
    }
  }
  throw ConfigError("unknown initial condition");
}

template double hamiltonian_value<double>(const ProblemSpec&, std::span<const double>,
                                          std::span<const double>);
template ad::Var hamiltonian_value<ad::Var>(const ProblemSpec&, std::span<const double>,
                                            std::span<const ad::Var>);
template void hamiltonian_grad_p<double>(const ProblemSpec&, std::span<const double>,
                                         std::span<const double>, std::span<double>);
template void hamiltonian_grad_p<ad::Var>(const ProblemSpec&, std::span<const double>,
                                          std::span<const ad::Var>, std::span<ad::Var>);
template double initial_value<double>(const ProblemSpec&, std::span<const double>);
template ad::Var initial_value<ad::Var>(const ProblemSpec&, std::span<const ad::Var>);

double hamiltonian_value(const ProblemSpec& problem, std::span<const double> x,
                         std::span<const double> p) {
  return hamiltonian_value<double>(problem, x, p);
}

std::vector<double> hamiltonian_grad_p(const ProblemSpec& problem, std::span<const double> x,
                                       std::span<const double> p) {
  std::vector<double> out(problem.dim);
  hamiltonian_grad_p<double>(problem, x, p, out);
  return out;
}

double initial_value(const ProblemSpec& problem, std::span<const double> x) {
  return initial_value<double>(problem, x);
}

bool has_exact_solution(const ProblemSpec& problem) {
  using H = HamiltonianId;
  using G = InitialId;
  const auto h = problem.hamiltonian;
  const auto g = problem.initial;
  return (h == H::Quad && g == G::L1Norm) || (h == H::NegQuad && g == G::L1Norm) ||
         (h == H::Norm && g == G::TwoSpheres) || (h == H::AdvectSin && g == G::Sin) ||
         (h == H::Rotation && g == G::ConePlateau) || (h == H::QuadUnit && g == G::Zero);
}

std::optional<double> exact_solution(const ProblemSpec& problem, std::span<const double> x, double t) {
  using H = HamiltonianId;
  if (!has_exact_solution(problem)) {
    return std::nullopt;
  }
  if (x.size() != problem.dim) {
    throw ConfigError("exact solution: dimension mismatch for '" + problem.id + "'");
  }
  switch (problem.hamiltonian) {
    case H::Quad: {
      double u = 0.0;
      for (double xi : x) {
        const double a = std::abs(xi);
        u += (t > 0.0 && a <= t) ? xi * xi / (2.0 * t) : a - 0.5 * t;
      }
      return u;
    }
    case H::NegQuad: {
      double u = 0.0;
      for (double xi : x) u += std::abs(xi) + 0.5 * t;
      return u;
    }
    case H::Norm: {
      // inf of the signed distance over the ball of radius t around x.
      double r1 = 0.0;
      double r2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double c = i == 0 ? 0.3 : 0.0;
        r1 += (x[i] + c) * (x[i] + c);
        r2 += (x[i] - c) * (x[i] - c);
      }
      const double d1 = std::max(std::sqrt(r1) - t, 0.0);
      const double d2 = std::max(std::sqrt(r2) - t, 0.0);
      return std::min(d1, d2) - 0.2;
    }
    case H::AdvectSin:
      return std::sin(2.0 * std::atan(std::exp(-t) * std::tan(0.5 * x[0])));
    case H::Rotation: {
      const double c = std::cos(t);
      const double s = std::sin(t);
      const double y[2] = {x[0] * c + x[1] * s, -x[0] * s + x[1] * c};
      return initial_value<double>(problem, std::span<const double>(y, 2));
    }
    case H::QuadUnit:
      return 0.0;
    default:
      return std::nullopt;
  }
}

double boundary_value(const ProblemSpec& problem, std::span<const double> x, double t) {
  if (const auto u = exact_solution(problem, x, t)) {
    return *u;
  }
  throw ContractViolation("problem '" + problem.id + "' has no Dirichlet data");
}

}  // namespace hjinr
