#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "helpers.hpp"
#include "hjinr/error.hpp"
#include "hjinr/mlp_jet.hpp"
#include "hjinr/tape.hpp"

using namespace hjinr;
using ad::Tape;
using ad::Var;

TEST_CASE("tape: elementary operations and adjoints") {
  Tape tape;
  Var x = tape.input(0.7);
  Var y = tape.input(-1.3);
  Var f = ad::sin(x) * y + ad::exp(x / y) - ad::square(y) + ad::atan(x * x);
  auto adj = tape.backward(f);
  const double dx = std::cos(0.7) * -1.3 + std::exp(0.7 / -1.3) / -1.3 + 2 * 0.7 / (1 + std::pow(0.7, 4));
  const double dy = std::sin(0.7) - std::exp(0.7 / -1.3) * 0.7 / (1.3 * 1.3) + 2 * 1.3;
  CHECK(adj[static_cast<std::size_t>(x.index())] == doctest::Approx(dx).epsilon(1e-14));
  CHECK(adj[static_cast<std::size_t>(y.index())] == doctest::Approx(dy).epsilon(1e-14));
  auto replayed = tape.replay();
  CHECK(replayed[static_cast<std::size_t>(f.index())] == f.value());
}

TEST_CASE("tape: kinks use the documented subgradients") {
  Tape tape;
  Var z = tape.input(0.0);
  Var f = ad::abs(z) + ad::sign(z) + ad::sqrt(z);
  auto adj = tape.backward(f);
  CHECK(adj[static_cast<std::size_t>(z.index())] == 0.0);
  CHECK(f.value() == 0.0);
}

TEST_CASE("tape: constants combine with taped values") {
  Tape tape;
  Var x = tape.input(2.0);
  Var f = 3.0 * x + 1.0;
  CHECK(f.value() == 7.0);
  CHECK(tape.backward(f)[static_cast<std::size_t>(x.index())] == 3.0);
  Var c = Var(5.0) * Var(2.0);
  CHECK(c.is_constant());
  CHECK(c.value() == 10.0);
}

TEST_CASE("fd_check examples") {
  const double three[] = {3.0};
  CHECK(ad::fd_check([](std::span<const Var> v) { return v[0] * v[0]; }, three, 1e-5) <= 1e-9);
  const double zero[] = {0.0};
  CHECK(ad::fd_check([](std::span<const Var> v) { return ad::softplus(v[0], 100.0); }, zero, 1e-5) <=
        1e-6);
  CHECK(ad::fd_check([](std::span<const Var>) { return Var(4.0); }, three, 1e-5) == 0.0);
  CHECK_THROWS_AS(ad::fd_check([](std::span<const Var> v) { return v[0]; }, three, 0.0),
                  ContractViolation);
}

TEST_CASE("softplus is overflow safe and its derivative is the sigmoid") {
  CHECK(ad::softplus(0.0, 100.0) == doctest::Approx(std::log(2.0) / 100.0).epsilon(1e-15));
  CHECK(ad::softplus(50.0, 100.0) == doctest::Approx(50.0).epsilon(1e-15));
  CHECK(ad::softplus(-50.0, 100.0) >= 0.0);
  CHECK(std::isfinite(ad::softplus(1e6, 100.0)));
  Tape tape;
  Var z = tape.input(0.013);
  Var s = ad::softplus(z, 100.0);
  CHECK(tape.backward(s)[static_cast<std::size_t>(z.index())] ==
        doctest::Approx(ad::sigmoid(1.3)).epsilon(1e-14));
}

TEST_CASE("input jet: linear identity network") {
  NetworkConfig cfg;
  cfg.input_dim = 2;
  cfg.depth = 1;
  cfg.width = 1;
  cfg.activation = Activation::Identity;
  MlpParams p(cfg);
  p.weight(0)(0, 0) = 2.0;
  p.weight(0)(0, 1) = 3.0;
  p.bias(0)(0) = 1.0;
  p.weight(1)(0, 0) = 1.0;
  const double x[] = {1.0};
  const auto jet = ad::eval_with_input_grad(p, x, 1.0);
  CHECK(jet.value == 6.0);
  REQUIRE(jet.grad_x.size() == 1);
  CHECK(jet.grad_x[0] == 2.0);
  CHECK(jet.grad_t == 3.0);
}

TEST_CASE("input jet: constant network") {
  const auto cfg = NetworkConfig::for_dimension(3, 2, 8);
  MlpParams p = testing::random_params(cfg, 4);
  p.weight(cfg.depth).setZero();
  p.bias(cfg.depth)(0) = -0.25;
  const double x[] = {0.1, 0.2, 0.3};
  const auto jet = ad::eval_with_input_grad(p, x, 0.4);
  CHECK(jet.value == -0.25);
  for (double g : jet.grad_x) CHECK(g == 0.0);
  CHECK(jet.grad_t == 0.0);
}

TEST_CASE("input jet agrees with forward and with the batch") {
  const auto cfg = NetworkConfig::for_dimension(2, 3, 16);
  const MlpParams p = testing::random_params(cfg, 9);
  Eigen::MatrixXd pts = Eigen::MatrixXd::Random(3, 7);
  const ad::JetBatch batch(p, pts);
  const Eigen::RowVectorXd fb = forward_batch(p, pts);
  for (Eigen::Index j = 0; j < pts.cols(); ++j) {
    const double x[] = {pts(0, j), pts(1, j)};
    const auto jet = ad::eval_with_input_grad(p, x, pts(2, j));
    CHECK(jet.value == forward(p, x, pts(2, j)));
    CHECK(batch.values()(j) == fb(j));
    CHECK(jet.value == doctest::Approx(batch.values()(j)).epsilon(1e-13));
    CHECK(jet.grad_x[0] == doctest::Approx(batch.input_grads()(0, j)).epsilon(1e-12));
    CHECK(jet.grad_t == doctest::Approx(batch.input_grads()(2, j)).epsilon(1e-12));
  }
}

TEST_CASE("input gradient matches central differences over random draws") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_int_distribution<int> depth(1, 4);
  std::uniform_int_distribution<int> width(2, 24);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double betas[] = {1.0, 10.0, 100.0};
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const auto d = static_cast<std::size_t>(dim(rng));
    auto cfg = NetworkConfig::for_dimension(d, static_cast<std::size_t>(depth(rng)),
                                            static_cast<std::size_t>(width(rng)), betas[draw % 3]);
    const MlpParams p = testing::random_params(cfg, static_cast<std::uint64_t>(draw));
    std::vector<double> x(d);
    for (double& v : x) v = u(rng);
    const double t = 0.5 * (u(rng) + 1.0);
    const auto jet = ad::eval_with_input_grad(p, x, t);
    std::vector<double> numeric(d);
    const double h = 1e-5;
    for (std::size_t i = 0; i < d; ++i) {
      auto xp = x;
      auto xm = x;
      xp[i] += h;
      xm[i] -= h;
      numeric[i] = (forward(p, xp, t) - forward(p, xm, t)) / (2 * h);
    }
    worst = std::max(worst, testing::rel_error(jet.grad_x, numeric));
  }
  MESSAGE("worst relative error " << worst);
  CHECK(worst <= 1e-6);
}

TEST_CASE("parameter gradient: quadratic of a constant network") {
  const auto cfg = NetworkConfig::for_dimension(1, 2, 4);
  MlpParams p = testing::random_params(cfg, 1);
  p.weight(cfg.depth).setZero();
  p.bias(cfg.depth)(0) = 0.75;
  Eigen::MatrixXd pt(2, 1);
  pt << 0.3, 0.2;
  const auto g = ad::param_gradient(
      [&](Tape& tape, const ad::ParamBinding& b) {
        auto out = ad::record_network(tape, b, pt);
        return out.value(0) * out.value(0);
      },
      p);
  CHECK(g.loss == doctest::Approx(0.5625));
  CHECK(g.gradient[p.bias_offset(cfg.depth)] == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("parameter gradient: empty loss is zero") {
  const auto cfg = NetworkConfig::for_dimension(2, 2, 4);
  const MlpParams p = testing::random_params(cfg, 2);
  const auto g = ad::param_gradient([](Tape&, const ad::ParamBinding&) { return Var(0.0); }, p);
  CHECK(g.loss == 0.0);
  REQUIRE(g.gradient.size() == p.size());
  for (double v : g.gradient) CHECK(v == 0.0);
}

namespace {

double grad_norm_loss(const MlpParams& p, const Eigen::MatrixXd& pts) {
  const ad::JetBatch jet(p, pts);
  const auto d = static_cast<Eigen::Index>(p.config().spatial_dim());
  return jet.input_grads().topRows(d).squaredNorm();
}

}  // namespace

TEST_CASE("nested parameter gradient matches central differences over random draws") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> dim(1, 3);
  std::uniform_int_distribution<int> depth(1, 3);
  std::uniform_int_distribution<int> width(2, 10);
  const double betas[] = {1.0, 10.0, 100.0};
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const auto d = static_cast<std::size_t>(dim(rng));
    auto cfg = NetworkConfig::for_dimension(d, static_cast<std::size_t>(depth(rng)),
                                            static_cast<std::size_t>(width(rng)), betas[draw % 3]);
    MlpParams p = testing::random_params(cfg, 1000 + static_cast<std::uint64_t>(draw));
    Eigen::MatrixXd pts = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(d + 1), 2);
    const auto g = ad::param_gradient(
        [&](Tape& tape, const ad::ParamBinding& b) {
          auto out = ad::record_network(tape, b, pts);
          Var s = 0.0;
          for (std::size_t j = 0; j < out.size(); ++j) {
            for (const Var& gi : out.grad_x(j)) s += gi * gi;
          }
          return s;
        },
        p);
    CHECK(g.loss == doctest::Approx(grad_norm_loss(p, pts)).epsilon(1e-12));
    std::vector<double> numeric(p.size());
    const double h = 1e-6;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double keep = p.flat()[i];
      p.flat()[i] = keep + h;
      const double fp = grad_norm_loss(p, pts);
      p.flat()[i] = keep - h;
      const double fm = grad_norm_loss(p, pts);
      p.flat()[i] = keep;
      numeric[i] = (fp - fm) / (2 * h);
    }
    worst = std::max(worst, testing::rel_error(g.gradient, numeric));
  }
  MESSAGE("worst relative error " << worst);
  CHECK(worst <= 1e-5);
}

TEST_CASE("frozen network on taped points passes adjoints to the points only") {
  const auto cfg = NetworkConfig::for_dimension(1, 2, 6, 10.0);
  const MlpParams live = testing::random_params(cfg, 5);
  const MlpParams frozen = testing::random_params(cfg, 6);
  Eigen::MatrixXd pt(2, 1);
  pt << 0.2, 0.4;
  // L = v(x - u(x,t), 0.3) with v frozen: dL/dtheta = -v_x * du/dtheta.
  auto loss_at = [&](const MlpParams& p) {
    const double x[] = {0.2};
    const double y[] = {0.2 - forward(p, x, 0.4)};
    return forward(frozen, y, 0.3);
  };
  const auto g = ad::param_gradient(
      [&](Tape& tape, const ad::ParamBinding& b) {
        auto out = ad::record_network(tape, b, pt);
        Var q[] = {Var(0.2) - out.value(0), Var(0.3)};
        auto prev = ad::record_network(tape, ad::ParamBinding{&frozen, -1}, q);
        return prev.value(0);
      },
      live);
  MlpParams p = live;
  std::vector<double> numeric(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p.flat()[i];
    p.flat()[i] = keep + 1e-6;
    const double fp = loss_at(p);
    p.flat()[i] = keep - 1e-6;
    const double fm = loss_at(p);
    p.flat()[i] = keep;
    numeric[i] = (fp - fm) / 2e-6;
  }
  CHECK(testing::rel_error(g.gradient, numeric) <= 1e-6);
}
