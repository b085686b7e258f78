#include <cmath>
#include <random>

#include <doctest.h>

#include "helpers.hpp"
#include "hjinr/error.hpp"
#include "hjinr/loss.hpp"
#include "hjinr/mlp_jet.hpp"
#include "hjinr/timemarch.hpp"
#include "hjinr/trainer.hpp"

using namespace hjinr;

namespace {

MlpParams constant_network(std::size_t d, double c) {
  const auto cfg = NetworkConfig::for_dimension(d, 2, 8);
  MlpParams p = testing::random_params(cfg, 5);
  p.weight(cfg.depth).setZero();
  p.bias(cfg.depth)(0) = c;
  return p;
}

// u(x, t) = x on the real line, as a one-unit identity network.
MlpParams coordinate_network() {
  NetworkConfig cfg;
  cfg.input_dim = 2;
  cfg.depth = 1;
  cfg.width = 1;
  cfg.activation = Activation::Identity;
  MlpParams p(cfg);
  p.weight(0)(0, 0) = 1.0;
  p.weight(1)(0, 0) = 1.0;
  return p;
}

Eigen::MatrixXd column(std::initializer_list<double> v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST_CASE("residual reduces to u - g at t = 0") {
  const auto prob = make_problem("burgers-d2");
  const MlpParams p = testing::random_params(NetworkConfig::for_dimension(2, 3, 8), 3);
  const double x[] = {0.3, -0.6};
  CHECK(residual(p, prob, x, 0.0) == doctest::Approx(forward(p, x, 0.0) - 0.9).epsilon(1e-14));
}

TEST_CASE("residual of the zero network is -g") {
  const auto prob = make_problem("burgers");
  const double x[] = {2.0};
  CHECK(residual(constant_network(1, 0.0), prob, x, 0.7) == -2.0);
}

TEST_CASE("closed form has zero residual at a smooth point") {
  const auto prob = make_problem("burgers");
  const PointValue exact = [&](std::span<const double> x, double t) { return *exact_solution(prob, x, t); };
  // Outside the fan |x| > t the solution is |x| - t/2 with gradient sign(x).
  const PointGradient grad = [](std::span<const double> x, double t) {
    return std::vector<double>{std::abs(x[0]) <= t ? x[0] / t : (x[0] > 0 ? 1.0 : -1.0)};
  };
  const PointValue g = [&](std::span<const double> x, double) { return initial_value(prob, x); };
  const double x[] = {2.0};
  CHECK(std::abs(residual_step(exact, grad, g, 1.0, prob, x, 1.0)) <= 1e-9);
  const double xin[] = {0.4};
  CHECK(std::abs(residual_step(exact, grad, g, 1.0, prob, xin, 1.0)) <= 1e-9);
}

TEST_CASE("state-dependent problems are rejected by the single-shot residual") {
  const double x[] = {0.1};
  CHECK_THROWS_AS(residual(constant_network(1, 0.0), make_problem("advect-sin"), x, 0.1), ContractViolation);
}

TEST_CASE("empirical loss") {
  const auto prob = make_problem("burgers");
  CollocationBatch one;
  one.interior = column({2.0, 0.5});
  const MlpParams zero = constant_network(1, 0.0);
  CHECK(empirical_loss(zero, prob, one) == 4.0);

  const MlpParams p = testing::random_params(NetworkConfig::for_dimension(1, 2, 8), 8);
  std::mt19937_64 rng(1);
  CollocationBatch b = sample_collocation(prob, 64, 0, rng);
  CollocationBatch twice = b;
  twice.interior.resize(2, 128);
  twice.interior << b.interior, b.interior;
  CHECK(empirical_loss(p, prob, twice) == doctest::Approx(empirical_loss(p, prob, b)).epsilon(1e-14));

  CollocationBatch empty;
  empty.interior.resize(2, 0);
  CHECK_THROWS_AS(empirical_loss(p, prob, empty), ContractViolation);
}

TEST_CASE("boundary loss") {
  ProblemSpec per = make_problem("burgers");
  per.domain = Box{{0.0}, {1.0}};
  per.boundary = BoundaryKind::Periodic;
  CollocationBatch b;
  b.interior = column({0.5, 0.5});
  b.boundary.resize(2, 2);
  b.boundary << 0.0, 0.0, 0.2, 0.9;
  b.partners.resize(2, 2);
  b.partners << 1.0, 1.0, 0.2, 0.9;
  CHECK(boundary_loss(coordinate_network(), per, b) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(boundary_loss(constant_network(1, 0.3), per, b) == 0.0);

  CollocationBatch missing = b;
  missing.partners.resize(2, 0);
  CHECK_THROWS_AS(boundary_loss(coordinate_network(), per, missing), ContractViolation);

  // Dirichlet data equal to a constant network.
  ProblemSpec dir = make_problem("viscosity-zero");
  dir.boundary = BoundaryKind::Dirichlet;
  CollocationBatch db;
  db.interior = column({0.0, 0.5});
  db.boundary.resize(2, 2);
  db.boundary << -1.0, 1.0, 0.3, 0.8;
  CHECK(boundary_loss(constant_network(1, 0.0), dir, db) == 0.0);
  CHECK(boundary_loss(constant_network(1, 0.5), dir, db) == doctest::Approx(0.25));

  CHECK_THROWS_AS(boundary_loss(constant_network(1, 0.0), make_problem("burgers"), db), ContractViolation);
}

TEST_CASE("total loss composition") {
  ProblemSpec dir = make_problem("viscosity-zero");
  dir.boundary = BoundaryKind::Dirichlet;
  const MlpParams p = testing::random_params(NetworkConfig::for_dimension(1, 2, 8), 12);
  std::mt19937_64 rng(4);
  const CollocationBatch b = sample_collocation(dir, 32, 8, rng);
  const double a = empirical_loss(p, dir, b);
  const double c = boundary_loss(p, dir, b);
  CHECK(total_loss(p, dir, b, 0.0) == a);
  CHECK(total_loss(p, dir, b, 0.1) == doctest::Approx(a + 0.1 * c).epsilon(1e-15));
  const auto none = make_problem("burgers");
  std::mt19937_64 rng2(4);
  const CollocationBatch nb = sample_collocation(none, 32, 8, rng2);
  CHECK(total_loss(p, none, nb, 5.0) == empirical_loss(p, none, nb));
}

TEST_CASE("non-finite residual names the point") {
  // Finite network whose slope overflows H = |p|^2 / 2.
  MlpParams p = coordinate_network();
  p.weight(0)(0, 0) = 1e200;
  const double x[] = {0.25};
  CHECK_THROWS_WITH_AS(residual(p, make_problem("burgers"), x, 0.5), doctest::Contains("0.25"), NumericalError);
}

TEST_CASE("loss gradient matches central differences") {
  struct Case {
    const char* id;
    std::optional<BoundaryKind> boundary;
  };
  const Case cases[] = {{"burgers", std::nullopt},
                        {"burgers-d3", BoundaryKind::Dirichlet},
                        {"collision", std::nullopt},
                        {"eikonal", std::nullopt},
                        {"cos-d2", std::nullopt},
                        {"concave-d2", BoundaryKind::Dirichlet}};
  std::uint64_t seed = 0;
  for (const Case& c : cases) {
    CAPTURE(c.id);
    ProblemSpec prob = make_problem(c.id);
    if (c.boundary) prob.boundary = *c.boundary;
    MlpParams p = testing::random_params(NetworkConfig::for_dimension(prob.dim, 2, 6, 10.0), ++seed);
    std::mt19937_64 rng(seed);
    const CollocationBatch b = sample_collocation(prob, 12, 4, rng);
    const LossEvaluation ev = loss_and_gradient(p, prob, b, 0.1);
    CHECK(ev.terms.total == doctest::Approx(total_loss(p, prob, b, 0.1)).epsilon(1e-13));
    std::vector<double> numeric(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double keep = p.flat()[i];
      p.flat()[i] = keep + 1e-6;
      const double fp = total_loss(p, prob, b, 0.1);
      p.flat()[i] = keep - 1e-6;
      const double fm = total_loss(p, prob, b, 0.1);
      p.flat()[i] = keep;
      numeric[i] = (fp - fm) / 2e-6;
    }
    CHECK(testing::rel_error(ev.gradient, numeric) <= 1e-5);
  }
}

TEST_CASE("loss gradient with a frozen prior network") {
  const auto prob = make_problem("advect-sin");
  const auto cfg = NetworkConfig::for_dimension(1, 2, 6, 10.0);
  MlpParams live = testing::random_params(cfg, 21);
  const MlpParams prev = testing::random_params(cfg, 22);
  const ResidualContext ctx{PriorLevel{&prev, 0.1}, 0.3};
  std::mt19937_64 rng(3);
  const CollocationBatch b = sample_collocation(prob, 10, 4, rng, 0.1);
  const LossEvaluation ev = loss_and_gradient(live, prob, b, 0.1, ctx);
  std::vector<double> numeric(live.size());
  for (std::size_t i = 0; i < live.size(); ++i) {
    const double keep = live.flat()[i];
    live.flat()[i] = keep + 1e-6;
    const double fp = total_loss(live, prob, b, 0.1, ctx);
    live.flat()[i] = keep - 1e-6;
    const double fm = total_loss(live, prob, b, 0.1, ctx);
    live.flat()[i] = keep;
    numeric[i] = (fp - fm) / 2e-6;
  }
  CHECK(testing::rel_error(ev.gradient, numeric) <= 1e-5);
}
