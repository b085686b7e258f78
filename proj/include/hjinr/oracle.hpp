#pragma once

// Reference solvers used to check trained networks: the Hopf-Lax formula for
// convex or concave state-independent Hamiltonians, and a first-order
// Lax-Friedrichs grid scheme in one or two dimensions.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "hjinr/problems.hpp"

namespace hjinr {

struct HopfLaxOptions {
  std::size_t starts = 16;    // Halton multi-starts besides x itself
  double tolerance = 1e-10;   // final coordinate step
  double guard = 0.05;        // added to the search radius
  bool numeric_legendre = false;  // force the inner numerical maximization
  double p_bound = 50.0;      // box for the inner maximization
};

/// inf_y t L((x - y) / t) + g(y) for convex H (sup and the conjugate of -H
/// for concave H). Throws UnsupportedOracle for other Hamiltonians and
/// ContractViolation for t <= 0.
double hopf_lax_eval(const ProblemSpec& problem, std::span<const double> x, double t,
                     const HopfLaxOptions& opts = {});

/// Legendre transform sup_p p.q - H(p) by coordinate ascent on |p_i| <= p_bound.
double numeric_legendre(const ProblemSpec& problem, std::span<const double> q,
                        const HopfLaxOptions& opts = {});

enum class GridBoundary { Auto, Periodic, Outflow };

struct GridSpec {
  std::size_t nodes = 201;  // per axis, both ends included
  std::optional<double> horizon;  // defaults to the problem horizon
  double cfl = 0.5;
  std::size_t slices = 11;  // evenly spaced output times including 0 and the horizon
  GridBoundary boundary = GridBoundary::Auto;
  std::optional<double> p_bound;  // fixed |p_i| range for the dissipation
  double alpha_floor = 1e-8;
  std::optional<double> fixed_dt;
  std::vector<double> initial;  // nodal initial data; empty means g
};

struct GridSolution {
  std::size_t dim = 1;
  std::vector<double> lower;
  std::vector<double> upper;
  std::size_t nodes = 0;
  std::vector<double> spacing;
  double max_dt = 0.0;  // largest step taken
  std::size_t steps = 0;
  std::vector<double> times;
  std::vector<std::vector<double>> values;  // per slice, x fastest

  double coordinate(std::size_t axis, std::size_t i) const;
  std::size_t size() const;
  /// Node coordinates of flat index `k`.
  std::vector<double> point(std::size_t k) const;
  /// Linear (d = 1) or bilinear (d = 2) interpolation in slice `s`.
  double interpolate(std::size_t s, std::span<const double> x) const;
};

/// Throws UnsupportedOracle for d > 2 and ConfigError for a CFL violation.
GridSolution lax_friedrichs_solve(const ProblemSpec& problem, const GridSpec& spec = {});

/// Rows x[,y],t,u.
void write_grid_csv(const std::filesystem::path& path, const GridSolution& grid);

}  // namespace hjinr
