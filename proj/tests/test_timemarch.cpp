#include <cmath>
#include <numbers>

#include <doctest.h>

#include "helpers.hpp"
#include "hjinr/error.hpp"
#include "hjinr/loss.hpp"
#include "hjinr/timemarch.hpp"

using namespace hjinr;

namespace {

TrainConfig quick(std::size_t epochs, std::uint64_t seed = 3) {
  TrainConfig c;
  c.epochs = epochs;
  c.interior_points = 64;
  c.boundary_points = 16;
  c.optimizer = Optimizer::Adam;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("march config") {
  MarchConfig c;
  c.dt = 0.1;
  CHECK(c.steps(1.0) == 10);
  c.dt = 0.25;
  CHECK(c.steps(1.0) == 4);
  c.dt = 0.3;
  CHECK_THROWS_AS(c.steps(1.0), ConfigError);
  c.dt = 0.0;
  CHECK_THROWS_AS(c.steps(1.0), ConfigError);
  CHECK(interval_seed(7, 1) == interval_seed(7, 1));
  CHECK(interval_seed(7, 1) != interval_seed(7, 2));
  CHECK(interval_seed(7, 1) != interval_seed(8, 1));
}

TEST_CASE("residual_step at tau = 0 compares the two levels") {
  const auto prob = make_problem("advect-sin");
  const auto cfg = NetworkConfig::for_dimension(1, 2, 8, 10.0);
  const MlpParams live = testing::random_params(cfg, 1);
  const MlpParams prev = testing::random_params(cfg, 2);
  const double x[] = {1.3};
  CHECK(residual_step(live, PriorLevel{&prev, 0.1}, prob, x, 0.0) ==
        doctest::Approx(forward(live, x, 0.0) - forward(prev, x, 0.1)).epsilon(1e-14));
  CHECK(residual_step(live, PriorLevel{}, prob, x, 0.0) ==
        doctest::Approx(forward(live, x, 0.0) - std::sin(1.3)).epsilon(1e-14));
}

TEST_CASE("residual_step is second order in tau for the exact solution") {
  const auto prob = make_problem("advect-sin");
  const double tk = 0.5;
  const PointValue live = [&](std::span<const double> x, double tau) { return *exact_solution(prob, x, tk + tau); };
  const PointGradient grad = [&](std::span<const double> x, double tau) {
    const double h = 1e-6;
    const double xp[] = {x[0] + h};
    const double xm[] = {x[0] - h};
    return std::vector<double>{(*exact_solution(prob, xp, tk + tau) - *exact_solution(prob, xm, tk + tau)) /
                               (2 * h)};
  };
  const PointValue prev = [&](std::span<const double> y, double) { return *exact_solution(prob, y, tk); };
  auto ratios = [&](double x0) {
    const double x[] = {x0};
    const double s1 = residual_step(live, grad, prev, 0.1, prob, x, 0.05);
    const double s2 = residual_step(live, grad, prev, 0.1, prob, x, 0.025);
    const double s3 = residual_step(live, grad, prev, 0.1, prob, x, 0.0125);
    MESSAGE("x = " << x0 << ": S(0.05) = " << s1 << ", halving ratios " << s1 / s2 << " " << s2 / s3);
    return std::pair{s1 / s2, s2 / s3};
  };
  // Generic point: the tau^2 term dominates.
  const auto [a1, a2] = ratios(1.0);
  CHECK(a1 == doctest::Approx(4.0).epsilon(0.05));
  CHECK(a2 == doctest::Approx(4.0).epsilon(0.05));
  // At x = pi/2 the characteristic speed sin(x) is stationary and the tau^2
  // coefficient vanishes, so the residual decays at least as fast.
  const auto [b1, b2] = ratios(std::numbers::pi / 2);
  CHECK(b1 >= 3.8);
  CHECK(b2 >= 3.8);
  const double x[] = {1.0};
  CHECK_THROWS_AS(residual_step(live, grad, prev, 0.1, prob, x, 0.2), ContractViolation);
}

TEST_CASE("residual_step with g matches the single-shot residual") {
  const auto prob = make_problem("burgers-d2");
  const MlpParams p = testing::random_params(NetworkConfig::for_dimension(2, 2, 8), 4);
  const double x[] = {0.2, -0.5};
  CHECK(residual_step(p, PriorLevel{}, prob, x, 0.37) == doctest::Approx(residual(p, prob, x, 0.37)).epsilon(1e-14));
}

TEST_CASE("locate maps global time to intervals") {
  const auto cfg = NetworkConfig::for_dimension(1, 1, 2);
  std::vector<MlpParams> steps(4, MlpParams(cfg));
  const MarchedSolution sol(steps, 0.25);
  CHECK(sol.locate(0.0) == std::pair<std::size_t, double>{1, 0.0});
  CHECK(sol.locate(0.1).first == 1);
  CHECK(sol.locate(0.25).first == 2);
  CHECK(sol.locate(0.25).second == 0.0);
  CHECK(sol.locate(0.6).first == 3);
  CHECK(sol.locate(0.6).second == doctest::Approx(0.1));
  CHECK(sol.locate(1.0) == std::pair<std::size_t, double>{4, 0.25});
  CHECK_THROWS_AS(MarchedSolution({}, 0.1), ContractViolation);
}

TEST_CASE("march writes checkpoints and a manifest; load_march reproduces values") {
  const auto dir = testing::scratch_dir("march");
  const auto prob = make_problem("advect-sin");
  MarchConfig mc;
  mc.dt = 0.25;
  mc.train = quick(20);
  mc.checkpoint_dir = dir;
  std::vector<std::size_t> seen;
  MarchHooks hooks;
  hooks.on_interval = [&](const IntervalReport& r) { seen.push_back(r.k); };
  const MarchResult res = march(prob, NetworkConfig::for_dimension(1, 2, 8), mc, hooks);
  CHECK(seen == std::vector<std::size_t>{1, 2, 3, 4});
  CHECK(res.solution.steps() == 4);
  for (std::size_t k = 1; k <= 4; ++k) CHECK(std::filesystem::exists(step_path(dir, k)));
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  for (const auto& r : res.intervals) {
    CHECK(std::isfinite(r.seam_gap));
    CHECK(r.epochs == 20);
  }
  const MarchedSolution loaded = load_march(dir);
  Eigen::MatrixXd pts = Eigen::MatrixXd::Random(2, 40);
  pts.row(1) = (pts.row(1).array() + 1.0) / 2.0;
  CHECK(loaded.values(pts) == res.solution.values(pts));
  for (Eigen::Index j = 0; j < 5; ++j) {
    const double x[] = {pts(0, j)};
    CHECK(loaded.value(x, pts(1, j)) == doctest::Approx(res.solution.values(pts)(j)).epsilon(1e-13));
  }
}

TEST_CASE("march guards") {
  MarchConfig mc;
  mc.dt = 0.5;
  mc.train = quick(1);
  CHECK_THROWS_AS(march(make_problem("burgers"), NetworkConfig::for_dimension(1, 1, 4), mc), ConfigError);
  mc.force = true;
  CHECK_NOTHROW(march(make_problem("burgers"), NetworkConfig::for_dimension(1, 1, 4), mc));
  CHECK_THROWS_AS(march(make_problem("advect-sin"), NetworkConfig::for_dimension(2, 1, 4), mc), ConfigError);
  mc.dt = 0.3;
  CHECK_THROWS_AS(march(make_problem("advect-sin"), NetworkConfig::for_dimension(1, 1, 4), mc), ConfigError);
}

TEST_CASE("a single interval reproduces single-shot training") {
  const auto prob = make_problem("burgers");
  const auto net = NetworkConfig::for_dimension(1, 3, 32);
  TrainConfig tc = quick(400);
  tc.interior_points = 256;
  const TrainReport single = train(prob, net, tc);
  MarchConfig mc;
  mc.dt = 1.0;
  mc.force = true;
  mc.train = tc;
  const MarchResult marched = march(prob, net, mc);
  const double a = evaluate_mse(single.params, prob).mse;
  const double b = evaluate_mse(marched.solution.step(1), prob).mse;
  MESSAGE("single-shot MSE " << a << ", one-interval march MSE " << b);
  CHECK(b <= 2.0 * a);
  CHECK(a <= 2.0 * b);
}
