#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <doctest.h>

#include "helpers.hpp"
#include "hjinr/error.hpp"
#include "hjinr/trainer.hpp"

using namespace hjinr;

namespace {

TrainConfig small(std::size_t epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.interior_points = 64;
  c.boundary_points = 16;
  c.seed = 5;
  return c;
}

NetworkConfig tiny(std::size_t d) { return NetworkConfig::for_dimension(d, 2, 16); }

}  // namespace

TEST_CASE("collocation sampling: moments, support and determinism") {
  ProblemSpec prob = make_problem("burgers");
  std::mt19937_64 rng(123);
  const CollocationBatch b = sample_collocation(prob, 1000000, 0, rng);
  const double mx = b.interior.row(0).mean();
  const double mt = b.interior.row(1).mean();
  // sigma of the mean: sqrt(1/3 / n) for x, sqrt(1/12 / n) for t.
  CHECK(std::abs(mx) <= 3.0 * std::sqrt(1.0 / 3.0 / 1e6));
  CHECK(std::abs(mt - 0.5) <= 3.0 * std::sqrt(1.0 / 12.0 / 1e6));
  CHECK(b.interior.row(0).minCoeff() >= -1.0);
  CHECK(b.interior.row(0).maxCoeff() <= 1.0);
  CHECK(b.interior.row(1).minCoeff() >= 0.0);
  CHECK(b.interior.row(1).maxCoeff() <= prob.horizon);

  std::mt19937_64 r1(9);
  std::mt19937_64 r2(9);
  for (int i = 0; i < 3; ++i) {
    CHECK(sample_collocation(prob, 10, 4, r1).interior == sample_collocation(prob, 10, 4, r2).interior);
  }
}

TEST_CASE("collocation sampling: boundary faces and periodic partners") {
  const ProblemSpec prob = make_problem("eikonal");
  REQUIRE(prob.boundary == BoundaryKind::Periodic);
  std::mt19937_64 rng(1);
  const CollocationBatch b = sample_collocation(prob, 8, 500, rng);
  REQUIRE(b.partners.cols() == b.boundary.cols());
  for (Eigen::Index j = 0; j < b.boundary.cols(); ++j) {
    int differing = 0;
    for (Eigen::Index i = 0; i < 2; ++i) {
      const double diff = std::abs(b.boundary(i, j) - b.partners(i, j));
      if (diff != 0.0) {
        ++differing;
        CHECK(diff == doctest::Approx(prob.domain.length(static_cast<std::size_t>(i))));
      }
    }
    CHECK(differing == 1);
    CHECK(b.boundary(2, j) == b.partners(2, j));
  }
  std::mt19937_64 r(2);
  const CollocationBatch shorter = sample_collocation(prob, 100, 0, r, 0.1);
  CHECK(shorter.interior.row(2).maxCoeff() <= 0.1);
}

TEST_CASE("zero epochs return the initialization") {
  const auto prob = make_problem("burgers");
  const TrainReport r = train(prob, tiny(1), small(0));
  CHECK(r.params == init_network(tiny(1), 5));
  CHECK(r.losses.empty());
  CHECK(r.alphas.empty());
  CHECK(r.epochs_run == 0);
}

TEST_CASE("gamma = 1 keeps the step size constant") {
  TrainConfig c = small(30);
  c.decay = 1.0;
  const TrainReport r = train(make_problem("burgers"), tiny(1), c);
  REQUIRE(r.alphas.size() == 30);
  for (double a : r.alphas) CHECK(a == c.learning_rate);
}

TEST_CASE("step size decays on each new best loss") {
  for (Optimizer opt : {Optimizer::GradientDescent, Optimizer::Adam}) {
    TrainConfig c = small(60);
    c.optimizer = opt;
    c.learning_rate = opt == Optimizer::Adam ? 1e-3 : 1e-2;
    const TrainReport r = train(make_problem("burgers"), tiny(1), c);
    double best = std::numeric_limits<double>::infinity();
    int k = 0;
    for (std::size_t n = 0; n < r.losses.size(); ++n) {
      CHECK(r.alphas[n] == doctest::Approx(c.learning_rate * std::pow(c.decay, k)).epsilon(1e-12));
      if (n > 0) CHECK(r.alphas[n] <= r.alphas[n - 1]);
      if (r.losses[n] < best) {
        best = r.losses[n];
        ++k;
      }
    }
  }
}

TEST_CASE("training is deterministic") {
  TrainConfig c = small(25);
  c.optimizer = Optimizer::Adam;
  const auto prob = make_problem("collision");
  const TrainReport a = train(prob, tiny(2), c);
  const TrainReport b = train(prob, tiny(2), c);
  CHECK(a.losses == b.losses);
  CHECK(a.params == b.params);
}

TEST_CASE("training reduces the loss") {
  TrainConfig c = small(300);
  c.optimizer = Optimizer::Adam;
  c.interior_points = 256;
  const TrainReport r = train(make_problem("burgers"), tiny(1), c);
  double head = 0.0;
  double tail = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    head += r.losses[i];
    tail += r.losses[r.losses.size() - 1 - i];
  }
  CHECK(tail < 0.2 * head);
  CHECK(r.peak_memory_bytes > 0);
}

TEST_CASE("early stop") {
  TrainConfig c = small(500);
  c.optimizer = Optimizer::Adam;
  c.stop_loss = 1e30;
  const TrainReport r = train(make_problem("burgers"), tiny(1), c);
  CHECK(r.epochs_run == 1);
  CHECK(r.epochs_to(1e30) == std::optional<std::size_t>(0));
}

TEST_CASE("divergence keeps the last finite parameters") {
  TrainConfig c = small(200);
  c.learning_rate = 1e12;
  c.decay = 1.0;
  try {
    train(make_problem("burgers"), tiny(1), c);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(e.last_good().all_finite());
    CHECK(e.epoch() >= 1);
  }
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.decay = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.interior_points = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.lambda = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_optimizer("adam") == Optimizer::Adam);
  CHECK_THROWS_AS(parse_optimizer("lbfgs"), ConfigError);
}

TEST_CASE("evaluation points") {
  const auto p1 = evaluation_points(make_problem("burgers"), EvalSpec{});
  CHECK(p1.cols() == 201 * 11);
  CHECK(p1(0, 0) == -1.0);
  CHECK(p1(0, 200) == 1.0);
  CHECK(p1(1, p1.cols() - 1) == 1.0);
  const auto p2 = evaluation_points(make_problem("collision"), EvalSpec{});
  CHECK(p2.cols() == 201 * 201 * 11);
  const auto p10 = evaluation_points(make_problem("burgers-d10"), EvalSpec{});
  CHECK(p10.cols() == 100000);
  CHECK(p10 == evaluation_points(make_problem("burgers-d10"), EvalSpec{}));
}

TEST_CASE("MSE of the zero model on the concave problem") {
  const auto prob = make_problem("concave");
  const BatchModel zero = [](const Eigen::MatrixXd& pts) { return Eigen::RowVectorXd::Zero(pts.cols()).eval(); };
  const EvalResult r = evaluate_model(zero, prob, EvalSpec{});
  // Grid quadrature of (|x| + t/2)^2 over 201 x 11 nodes.
  CHECK(r.mse == doctest::Approx(0.6754104477611941).epsilon(1e-13));
  CHECK(r.rmse == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(r.points == 201 * 11);

  const BatchModel exact = [&](const Eigen::MatrixXd& pts) {
    Eigen::RowVectorXd v(pts.cols());
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      const double x[] = {pts(0, j)};
      v(j) = *exact_solution(prob, x, pts(1, j));
    }
    return v;
  };
  const EvalResult e = evaluate_model(exact, prob, EvalSpec{});
  CHECK(e.mse == 0.0);
  CHECK(e.rmse == 0.0);

  CHECK_THROWS_AS(evaluate_model(zero, make_problem("cubic"), EvalSpec{}), ContractViolation);
}

TEST_CASE("epoch CSV") {
  const auto dir = testing::scratch_dir("trainer_csv");
  TrainConfig c = small(3);
  const TrainReport r = train(make_problem("burgers"), tiny(1), c);
  write_epoch_csv(dir / "e.csv", r);
  std::ifstream in(dir / "e.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,loss,alpha,wall_ms");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 3);
}
