#include "hjinr/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>

#include "hjinr/error.hpp"

namespace hjinr {

namespace {

constexpr std::array<int, 16> kPrimes = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

double radical_inverse(std::size_t index, int base) {
  double f = 1.0;
  double r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % static_cast<std::size_t>(base));
    index /= static_cast<std::size_t>(base);
  }
  return r;
}

// Halton point in [0, 1)^d; index starts at 1 to skip the origin.
std::vector<double> halton(std::size_t index, std::size_t d) {
  std::vector<double> h(d);
  for (std::size_t i = 0; i < d; ++i) {
    h[i] = radical_inverse(index, kPrimes[i % kPrimes.size()] + static_cast<int>(i / kPrimes.size()));
  }
  return h;
}

using Objective = std::function<double(std::span<const double>)>;
using Projection = std::function<void(std::span<double>)>;

// Coordinate pattern search with halving steps.
double pattern_search(const Objective& f, std::vector<double> y, double step, double tol,
                      const Projection& project) {
  if (project) project(y);
  double best = f(y);
  std::vector<double> trial(y.size());
  while (step > tol) {
    bool moved = false;
    for (std::size_t i = 0; i < y.size(); ++i) {
      for (double dir : {1.0, -1.0}) {
        trial = y;
        trial[i] += dir * step;
        if (project) project(trial);
        const double v = f(trial);
        if (v < best) {
          best = v;
          y = trial;
          moved = true;
        }
      }
    }
    if (!moved) step *= 0.5;
  }
  return best;
}

double multistart_min(const Objective& f, const std::vector<double>& center, double radius,
                      const HopfLaxOptions& opts, const Projection& project) {
  const std::size_t d = center.size();
  double best = pattern_search(f, center, radius / 2.0, opts.tolerance, project);
  for (std::size_t s = 1; s <= opts.starts; ++s) {
    const std::vector<double> h = halton(s, d);
    std::vector<double> y(d);
    for (std::size_t i = 0; i < d; ++i) y[i] = center[i] + radius * (2.0 * h[i] - 1.0);
    best = std::min(best, pattern_search(f, std::move(y), radius / 4.0, opts.tolerance, project));
  }
  return best;
}

bool hopf_lax_supported(const ProblemSpec& problem) {
  return !problem.state_dependent && convexity(problem.hamiltonian) != Convexity::Neither;
}

// Convex part K: K = H for convex H, K(p) = -H(-p) for concave H.
double k_value(const ProblemSpec& problem, std::span<const double> p) {
  if (convexity(problem.hamiltonian) == Convexity::Convex) {
    return hamiltonian_value(problem, {}, p);
  }
  std::vector<double> m(p.begin(), p.end());
  for (double& v : m) v = -v;
  return -hamiltonian_value(problem, {}, m);
}

double gradient_norm(const ProblemSpec& problem, std::span<const double> p) {
  double s = 0.0;
  for (double v : hamiltonian_grad_p(problem, {}, p)) s += v * v;
  return std::sqrt(s);
}

// Lipschitz estimate of g near the domain from central differences.
double initial_lipschitz(const ProblemSpec& problem, double t) {
  const std::size_t d = problem.dim;
  const double h = 1e-6;
  double lip = 0.0;
  for (std::size_t s = 1; s <= 512; ++s) {
    std::vector<double> x = halton(s, d);
    for (std::size_t i = 0; i < d; ++i) {
      const double lo = problem.domain.lower[i] - t - 1.0;
      const double hi = problem.domain.upper[i] + t + 1.0;
      x[i] = lo + (hi - lo) * x[i];
    }
    double g2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      std::vector<double> a = x;
      std::vector<double> b = x;
      a[i] += h;
      b[i] -= h;
      const double gi = (initial_value(problem, a) - initial_value(problem, b)) / (2.0 * h);
      g2 += gi * gi;
    }
    lip = std::max(lip, std::sqrt(g2));
  }
  return lip;
}

double analytic_conjugate(const ProblemSpec& problem, std::span<const double> q) {
  double q2 = 0.0;
  for (double v : q) q2 += v * v;
  switch (problem.hamiltonian) {
    case HamiltonianId::Quad:
    case HamiltonianId::NegQuad:
      return 0.5 * q2;
    case HamiltonianId::QuadUnit:
      return 0.25 * q2;
    default:
      throw UnsupportedOracle("no closed-form conjugate for '" + problem.id + "'");
  }
}

}  // namespace

double numeric_legendre(const ProblemSpec& problem, std::span<const double> q,
                        const HopfLaxOptions& opts) {
  if (!hopf_lax_supported(problem)) {
    throw UnsupportedOracle("Legendre transform needs a convex or concave Hamiltonian");
  }
  const double bound = opts.p_bound;
  Objective neg = [&](std::span<const double> p) {
    double dot = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * q[i];
    return k_value(problem, p) - dot;
  };
  Projection clip = [bound](std::span<double> p) {
    for (double& v : p) v = std::clamp(v, -bound, bound);
  };
  std::vector<double> p0(q.size(), 0.0);
  return -pattern_search(neg, p0, bound / 2.0, opts.tolerance, clip);
}

double hopf_lax_eval(const ProblemSpec& problem, std::span<const double> x, double t,
                     const HopfLaxOptions& opts) {
  if (!hopf_lax_supported(problem)) {
    throw UnsupportedOracle("Hopf-Lax needs a convex or concave state-independent Hamiltonian; '" +
                            problem.id + "' is neither");
  }
  if (!(t > 0.0)) throw ContractViolation("hopf_lax_eval: t must be positive");
  const std::size_t d = problem.dim;
  if (x.size() != d) throw ConfigError("hopf_lax_eval: point dimension mismatch");
  const double sign = convexity(problem.hamiltonian) == Convexity::Convex ? 1.0 : -1.0;
  const std::vector<double> center(x.begin(), x.end());

  if (problem.hamiltonian == HamiltonianId::Norm && !opts.numeric_legendre) {
    // Unit-ball conjugate: y = x + t z with |z| <= 1.
    Projection ball = [](std::span<double> z) {
      double n2 = 0.0;
      for (double v : z) n2 += v * v;
      if (n2 > 1.0) {
        const double s = 1.0 / std::sqrt(n2);
        for (double& v : z) v *= s;
      }
    };
    Objective f = [&](std::span<const double> z) {
      std::vector<double> y(d);
      for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + t * z[i];
      return initial_value(problem, y);
    };
    return multistart_min(f, std::vector<double>(d, 0.0), 1.0 / std::sqrt(static_cast<double>(d)),
                          opts, ball);
  }

  // Minimizers satisfy (x - y) / t = grad K(p) with |p| no larger than the
  // Lipschitz constant of g.
  const double lip = 1.5 * initial_lipschitz(problem, t) + 1e-3;
  double gmax = 0.0;
  for (std::size_t s = 1; s <= 256; ++s) {
    std::vector<double> p = halton(s, d);
    for (double& v : p) v = lip * (2.0 * v - 1.0);
    gmax = std::max(gmax, gradient_norm(problem, p));
  }
  {
    std::vector<double> p(d, lip / std::sqrt(static_cast<double>(d)));
    gmax = std::max(gmax, gradient_norm(problem, p));
  }
  const double radius = t * gmax + opts.guard;

  Objective f = [&](std::span<const double> y) {
    std::vector<double> q(d);
    for (std::size_t i = 0; i < d; ++i) q[i] = (x[i] - y[i]) / t;
    const double l = opts.numeric_legendre ? numeric_legendre(problem, q, opts)
                                           : analytic_conjugate(problem, q);
    return t * l + sign * initial_value(problem, y);
  };
  return sign * multistart_min(f, center, radius, opts, {});
}

double GridSolution::coordinate(std::size_t axis, std::size_t i) const {
  return lower[axis] + spacing[axis] * static_cast<double>(i);
}

std::size_t GridSolution::size() const { return dim == 1 ? nodes : nodes * nodes; }

std::vector<double> GridSolution::point(std::size_t k) const {
  std::vector<double> x(dim);
  x[0] = coordinate(0, k % nodes);
  if (dim == 2) x[1] = coordinate(1, k / nodes);
  return x;
}

double GridSolution::interpolate(std::size_t s, std::span<const double> x) const {
  const std::vector<double>& u = values.at(s);
  auto locate = [&](std::size_t axis, double v, std::size_t& i, double& w) {
    const double q = std::clamp((v - lower[axis]) / spacing[axis], 0.0, static_cast<double>(nodes - 1));
    i = std::min(static_cast<std::size_t>(q), nodes - 2);
    w = q - static_cast<double>(i);
  };
  std::size_t i = 0;
  double wx = 0.0;
  locate(0, x[0], i, wx);
  if (dim == 1) return (1.0 - wx) * u[i] + wx * u[i + 1];
  std::size_t j = 0;
  double wy = 0.0;
  locate(1, x[1], j, wy);
  const auto at = [&](std::size_t a, std::size_t b) { return u[b * nodes + a]; };
  return (1.0 - wy) * ((1.0 - wx) * at(i, j) + wx * at(i + 1, j)) +
         wy * ((1.0 - wx) * at(i, j + 1) + wx * at(i + 1, j + 1));
}

GridSolution lax_friedrichs_solve(const ProblemSpec& problem, const GridSpec& spec) {
  const std::size_t d = problem.dim;
  if (d > 2) {
    throw UnsupportedOracle("grid oracle supports d <= 2; '" + problem.id + "' has d = " +
                            std::to_string(d));
  }
  if (!(spec.cfl > 0.0 && spec.cfl <= 0.5)) {
    throw ConfigError("grid CFL number must lie in (0, 0.5]");
  }
  if (spec.nodes < 3) throw ConfigError("grid needs at least 3 nodes per axis");
  const double horizon = spec.horizon.value_or(problem.horizon);
  if (!(horizon >= 0.0)) throw ConfigError("grid horizon must be non-negative");
  const bool periodic = spec.boundary == GridBoundary::Periodic ||
                        (spec.boundary == GridBoundary::Auto && problem.boundary == BoundaryKind::Periodic);

  GridSolution grid;
  grid.dim = d;
  grid.lower = problem.domain.lower;
  grid.upper = problem.domain.upper;
  grid.nodes = spec.nodes;
  const std::size_t n = spec.nodes;
  for (std::size_t a = 0; a < d; ++a) {
    grid.spacing.push_back(problem.domain.length(a) / static_cast<double>(n - 1));
  }
  const std::size_t total = grid.size();

  std::vector<double> u(total);
  if (!spec.initial.empty()) {
    if (spec.initial.size() != total) throw ConfigError("grid initial data has the wrong size");
    u = spec.initial;
  } else {
    for (std::size_t k = 0; k < total; ++k) u[k] = initial_value(problem, grid.point(k));
  }

  const std::size_t stride[2] = {1, n};
  // Neighbor value along `axis` at offset +-1 with periodic wrap or linear
  // extrapolation ghosts.
  auto neighbor = [&](const std::vector<double>& v, std::size_t k, std::size_t axis, int dir) {
    const std::size_t idx = axis == 0 ? k % n : k / n;
    const std::size_t base = k - idx * stride[axis];
    if (dir < 0 && idx == 0) {
      if (periodic) return v[base + (n - 2) * stride[axis]];
      return 2.0 * v[k] - v[k + stride[axis]];
    }
    if (dir > 0 && idx == n - 1) {
      if (periodic) return v[base + 1 * stride[axis]];
      return 2.0 * v[k] - v[k - stride[axis]];
    }
    return dir < 0 ? v[k - stride[axis]] : v[k + stride[axis]];
  };

  // Dissipation per axis: max |dH/dp_i| over the p-range, and over x for
  // state-dependent Hamiltonians.
  std::vector<std::vector<double>> x_samples;
  if (problem.state_dependent) {
    const std::size_t m = d == 1 ? std::min<std::size_t>(n, 101) : 17;
    const std::size_t cnt = d == 1 ? m : m * m;
    for (std::size_t k = 0; k < cnt; ++k) {
      std::vector<double> x(d);
      x[0] = grid.lower[0] + problem.domain.length(0) * static_cast<double>(k % m) / static_cast<double>(m - 1);
      if (d == 2) {
        x[1] = grid.lower[1] + problem.domain.length(1) * static_cast<double>(k / m) / static_cast<double>(m - 1);
      }
      x_samples.push_back(std::move(x));
    }
  } else {
    x_samples.push_back(std::vector<double>(d, 0.0));
  }
  auto dissipation = [&](const std::array<double, 2>& lo, const std::array<double, 2>& hi) {
    std::array<double, 2> alpha{0.0, 0.0};
    const std::size_t m = d == 1 ? 201 : 41;
    std::array<double, 2> p{};
    std::array<double, 2> g{};
    for (const auto& x : x_samples) {
      for (std::size_t a = 0; a < m; ++a) {
        p[0] = lo[0] + (hi[0] - lo[0]) * static_cast<double>(a) / static_cast<double>(m - 1);
        for (std::size_t b = 0; b < (d == 2 ? m : 1); ++b) {
          if (d == 2) p[1] = lo[1] + (hi[1] - lo[1]) * static_cast<double>(b) / static_cast<double>(m - 1);
          hamiltonian_grad_p<double>(problem, x, std::span<const double>(p.data(), d),
                                     std::span<double>(g.data(), d));
          for (std::size_t i = 0; i < d; ++i) alpha[i] = std::max(alpha[i], std::abs(g[i]));
        }
      }
    }
    for (std::size_t i = 0; i < d; ++i) alpha[i] = std::max(alpha[i], spec.alpha_floor);
    return alpha;
  };

  const std::size_t slices = std::max<std::size_t>(spec.slices, 1);
  std::vector<double> out_times;
  if (slices == 1) {
    out_times.push_back(horizon);
  } else {
    for (std::size_t s = 0; s < slices; ++s) {
      out_times.push_back(horizon * static_cast<double>(s) / static_cast<double>(slices - 1));
    }
  }

  std::vector<double> pm(total * d);
  std::vector<double> pp(total * d);
  std::vector<double> next(total);
  double t = 0.0;
  std::size_t next_out = 0;
  auto record = [&]() {
    while (next_out < out_times.size() && out_times[next_out] <= t + 1e-12 * std::max(1.0, horizon)) {
      grid.times.push_back(out_times[next_out]);
      grid.values.push_back(u);
      ++next_out;
    }
  };
  record();
  std::array<double, 2> pbar{};
  std::array<double, 2> x{};
  while (next_out < out_times.size()) {
    std::array<double, 2> lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    std::array<double, 2> hi{-lo[0], -lo[1]};
    for (std::size_t k = 0; k < total; ++k) {
      for (std::size_t a = 0; a < d; ++a) {
        const double h = grid.spacing[a];
        const double minus = (u[k] - neighbor(u, k, a, -1)) / h;
        const double plus = (neighbor(u, k, a, 1) - u[k]) / h;
        pm[k * d + a] = minus;
        pp[k * d + a] = plus;
        lo[a] = std::min({lo[a], minus, plus});
        hi[a] = std::max({hi[a], minus, plus});
      }
    }
    if (spec.p_bound) {
      for (std::size_t a = 0; a < d; ++a) {
        lo[a] = -*spec.p_bound;
        hi[a] = *spec.p_bound;
      }
    }
    const std::array<double, 2> alpha = dissipation(lo, hi);
    double rate = 0.0;
    for (std::size_t a = 0; a < d; ++a) rate += alpha[a] / grid.spacing[a];
    double dt = spec.cfl / rate;
    if (spec.fixed_dt) {
      if (*spec.fixed_dt * rate > 0.5 * (1.0 + 1e-12)) {
        throw ConfigError("grid time step " + std::to_string(*spec.fixed_dt) +
                          " violates the CFL bound 0.5");
      }
      dt = *spec.fixed_dt;
    }
    dt = std::min(dt, out_times[next_out] - t);
    grid.max_dt = std::max(grid.max_dt, dt);
    for (std::size_t k = 0; k < total; ++k) {
      double visc = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        pbar[a] = 0.5 * (pm[k * d + a] + pp[k * d + a]);
        visc += 0.5 * alpha[a] * (pp[k * d + a] - pm[k * d + a]);
      }
      double h = 0.0;
      if (problem.state_dependent) {
        x[0] = grid.coordinate(0, k % n);
        if (d == 2) x[1] = grid.coordinate(1, k / n);
        h = hamiltonian_value<double>(problem, std::span<const double>(x.data(), d),
                                      std::span<const double>(pbar.data(), d));
      } else {
        h = hamiltonian_value<double>(problem, {}, std::span<const double>(pbar.data(), d));
      }
      next[k] = u[k] - dt * (h - visc);
    }
    if (periodic) {
      // The last node on each axis duplicates the first.
      for (std::size_t k = 0; k < total; ++k) {
        const std::size_t ix = k % n;
        const std::size_t iy = d == 2 ? k / n : 0;
        std::size_t src = k;
        if (ix == n - 1) src -= (n - 1);
        if (d == 2 && iy == n - 1) src -= (n - 1) * n;
        next[k] = next[src];
      }
    }
    for (double v : next) {
      if (!std::isfinite(v)) throw NumericalError("grid solution became non-finite");
    }
    u.swap(next);
    t += dt;
    ++grid.steps;
    if (out_times[next_out] - t <= 1e-12 * std::max(1.0, horizon)) t = out_times[next_out];
    record();
  }
  return grid;
}

void write_grid_csv(const std::filesystem::path& path, const GridSolution& grid) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << (grid.dim == 1 ? "x,t,u\n" : "x,y,t,u\n");
  for (std::size_t s = 0; s < grid.times.size(); ++s) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const std::vector<double> x = grid.point(k);
      for (double v : x) out << v << ',';
      out << grid.times[s] << ',' << grid.values[s][k] << '\n';
    }
  }
  if (!out) throw IoError("failed while writing " + path.string());
}

}  // namespace hjinr
