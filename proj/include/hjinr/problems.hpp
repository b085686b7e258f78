#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hjinr {

enum class HamiltonianId {
  Quad,          // 1/2 |p|^2
  NegQuad,       // -1/2 |p|^2
  QuadUnit,      // |p|^2
  Norm,          // |p|
  Cos,           // -cos(sum p + 1)
  Sin,           // sin(p1 + p2)
  Prod,          // p1 p2
  Sqrt,          // sqrt(p1 + p2 + 1)
  NegSqrt,       // -sqrt(p1 + p2 + 1)
  Cubic,         // p^3 - p
  AdvectSin,     // sin(x) p
  Rotation,      // -y p1 + x p2
  OptimalCost,   // p1 sin y + (sin y + sign p2) p2 - sin^2 y / 2 - (1 - cos x)
  OscPlus,       // (|x|^2 + |p|^2) / 2
  OscMinus,      // -(|x|^2 + |p|^2) / 2
  Nonconvex1,    // -c(x) p1 + 2|p2| + |p| - 1
  Nonconvex2,    // -c(x)|p1| - c(-x)|p2|
  SpeedPlus,     // f(x) |p|
  SpeedMinus,    // -f(x) |p|
  OcQuad,        // |p|^2 / 2 + psi(x)
};

enum class InitialId {
  L1Norm,
  TwoSpheres,
  CosSum,
  Riemann,
  SinCos,
  CosProduct,
  CosDiff,
  CubicCos,
  Sin,
  ConePlateau,
  Zero,
  Ellipse,
  QuadForm,
  ShiftedQuad,
  MinQuad,
};

enum class BoundaryKind { None, Periodic, Dirichlet };

enum class Convexity { Convex, Concave, Neither };

/// Axis-aligned box.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const { return lower.size(); }
  double length(std::size_t i) const { return upper[i] - lower[i]; }
  bool contains(std::span<const double> x, double tol = 0.0) const;
};

struct ProblemSpec {
  std::string id;
  std::string title;
  std::size_t dim = 1;
  HamiltonianId hamiltonian = HamiltonianId::Quad;
  InitialId initial = InitialId::L1Norm;
  Box domain;
  double horizon = 1.0;
  BoundaryKind boundary = BoundaryKind::None;
  bool state_dependent = false;
  bool squared_radicand = false;

  /// Throws ConfigError when the box, horizon or flags are inconsistent.
  void validate() const;
};

/// Resolves "<name>" or "<name>-d<N>", e.g. "burgers-d10", "collision-d2",
/// "osc-plus". Throws ConfigError naming the key when it is unknown.
ProblemSpec make_problem(std::string_view id);

/// Every catalog entry at its default dimension.
std::vector<std::string> catalog_ids();

std::string_view hamiltonian_name(HamiltonianId id);
std::string_view boundary_name(BoundaryKind kind);
BoundaryKind parse_boundary(std::string_view name);

Convexity convexity(HamiltonianId id);
bool reads_state(HamiltonianId id);

/// Regularization of the Euclidean norm in gradients: p / sqrt(|p|^2 + eps^2).
inline constexpr double kNormEpsilon = 1e-8;

// Formulas are templated on the scalar type (double or ad::Var) and
// instantiated for both.

template <class T>
T hamiltonian_value(const ProblemSpec& problem, std::span<const double> x, std::span<const T> p);

template <class T>
void hamiltonian_grad_p(const ProblemSpec& problem, std::span<const double> x,
                        std::span<const T> p, std::span<T> out);

template <class T>
T initial_value(const ProblemSpec& problem, std::span<const T> x);

double hamiltonian_value(const ProblemSpec& problem, std::span<const double> x,
                         std::span<const double> p);
std::vector<double> hamiltonian_grad_p(const ProblemSpec& problem, std::span<const double> x,
                                       std::span<const double> p);
double initial_value(const ProblemSpec& problem, std::span<const double> x);

/// Closed-form viscosity solution when the catalog has one.
std::optional<double> exact_solution(const ProblemSpec& problem, std::span<const double> x, double t);
bool has_exact_solution(const ProblemSpec& problem);

/// Dirichlet data h(x, t); the closed form is used when available.
double boundary_value(const ProblemSpec& problem, std::span<const double> x, double t);

}  // namespace hjinr
