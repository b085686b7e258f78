#include <cmath>
#include <cstring>
#include <fstream>

#include <doctest.h>

#include "helpers.hpp"
#include "hjinr/error.hpp"
#include "hjinr/network.hpp"

using namespace hjinr;

TEST_CASE("parameter count") {
  CHECK(NetworkConfig::for_dimension(1).param_count() == 16897);
  CHECK(NetworkConfig::for_dimension(1).param_count() == init_network(NetworkConfig::for_dimension(1), 0).size());
  // Only the input layer depends on d.
  CHECK(NetworkConfig::for_dimension(10).param_count() - NetworkConfig::for_dimension(1).param_count() ==
        9 * 64);
}

TEST_CASE("config validation") {
  NetworkConfig c = NetworkConfig::for_dimension(2);
  c.depth = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = NetworkConfig::for_dimension(2);
  c.beta = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = NetworkConfig::for_dimension(2);
  c.input_dim = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("initialization is seeded, bounded, with zero biases") {
  const auto cfg = NetworkConfig::for_dimension(3, 3, 16);
  const MlpParams a = init_network(cfg, 42);
  const MlpParams b = init_network(cfg, 42);
  const MlpParams c = init_network(cfg, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  for (std::size_t l = 0; l <= cfg.depth; ++l) {
    CHECK(a.bias(l).cwiseAbs().maxCoeff() == 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(a.layer_cols(l)));
    CHECK(a.weight(l).cwiseAbs().maxCoeff() <= bound);
  }
}

TEST_CASE("identity composition") {
  NetworkConfig cfg;
  cfg.input_dim = 2;
  cfg.depth = 3;
  cfg.width = 2;
  cfg.activation = Activation::Identity;
  MlpParams p(cfg);
  p.weight(0).setIdentity();
  p.weight(1).setIdentity();
  p.weight(2).setIdentity();
  p.weight(3)(0, 0) = 1.0;
  const double x[] = {0.7};
  CHECK(forward(p, x, 0.2) == 0.7);
}

TEST_CASE("softplus at zero pre-activation") {
  CHECK(activation::value(Activation::Softplus, 100.0, 0.0) == doctest::Approx(std::log(2.0) / 100.0));
  CHECK(activation::slope(Activation::Softplus, 100.0, 0.0) == doctest::Approx(0.5));
  CHECK(activation::curvature(Activation::Softplus, 100.0, 0.0) == doctest::Approx(25.0));
  // A single zero-weight hidden unit feeding a unit output weight.
  NetworkConfig cfg = NetworkConfig::for_dimension(1, 1, 1);
  MlpParams p(cfg);
  p.weight(1)(0, 0) = 1.0;
  const double x[] = {0.3};
  CHECK(forward(p, x, 0.1) == doctest::Approx(std::log(2.0) / 100.0));
}

TEST_CASE("forward agrees with forward_batch") {
  const auto cfg = NetworkConfig::for_dimension(2, 4, 32);
  const MlpParams p = testing::random_params(cfg, 3);
  Eigen::MatrixXd pts = Eigen::MatrixXd::Random(3, 50);
  const Eigen::RowVectorXd v = forward_batch(p, pts);
  for (Eigen::Index j = 0; j < pts.cols(); ++j) {
    const double x[] = {pts(0, j), pts(1, j)};
    CHECK(forward(p, x, pts(2, j)) == doctest::Approx(v(j)).epsilon(1e-13));
  }
  CHECK(std::isfinite(lipschitz_bound(p)));
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto dir = testing::scratch_dir("network");
  const auto cfg = NetworkConfig::for_dimension(2, 3, 8, 37.5);
  const MlpParams p = testing::random_params(cfg, 11);
  const CheckpointMeta meta{123, 4.5e-6, 99, "collision-d2"};
  save_checkpoint(dir / "a.hjin", p, meta);
  auto [q, m] = load_checkpoint(dir / "a.hjin");
  CHECK(q == p);
  CHECK(m == meta);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(std::memcmp(&p.flat()[i], &q.flat()[i], sizeof(double)) == 0);
  }
  // Re-encoding the decoded checkpoint reproduces the same bytes.
  CHECK(encode_checkpoint(q, m) == encode_checkpoint(p, meta));
}

TEST_CASE("checkpoint layout") {
  const auto cfg = NetworkConfig::for_dimension(1, 1, 2);
  const MlpParams p = testing::random_params(cfg, 1);
  const auto bytes = encode_checkpoint(p, CheckpointMeta{7, 0.5, 3, "ab"});
  REQUIRE(bytes.size() > 8);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "HJIN");
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  CHECK(version == kCheckpointVersion);
  // The string id closes the file.
  CHECK(bytes[bytes.size() - 2] == 'a');
  CHECK(bytes[bytes.size() - 1] == 'b');
}

TEST_CASE("checkpoint error paths") {
  const auto dir = testing::scratch_dir("network_err");
  const auto cfg = NetworkConfig::for_dimension(1, 2, 4);
  const MlpParams p = testing::random_params(cfg, 2);
  save_checkpoint(dir / "ok.hjin", p, CheckpointMeta{});
  const auto size = std::filesystem::file_size(dir / "ok.hjin");
  std::filesystem::copy_file(dir / "ok.hjin", dir / "short.hjin");
  std::filesystem::resize_file(dir / "short.hjin", size / 2);
  CHECK_THROWS_AS(load_checkpoint(dir / "short.hjin"), CorruptCheckpoint);
  {
    std::ofstream bad(dir / "magic.hjin", std::ios::binary);
    bad << "NOPE and more bytes";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.hjin"), CorruptCheckpoint);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.hjin"), IoError);
  CHECK_THROWS_AS(load_checkpoint(dir / "ok.hjin", NetworkConfig::for_dimension(2, 2, 4)), ShapeMismatch);
  CHECK_NOTHROW(load_checkpoint(dir / "ok.hjin", cfg));
}
