#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hjinr/network.hpp"

namespace testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hjinr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Random parameters with biases filled in too, so every entry matters.
inline hjinr::MlpParams random_params(const hjinr::NetworkConfig& cfg, std::uint64_t seed,
                                      double scale = 1.0) {
  hjinr::MlpParams p(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t l = 0; l <= cfg.depth; ++l) {
    const double s = scale / std::sqrt(static_cast<double>(p.layer_cols(l)));
    auto w = p.weight(l);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = s * n(rng);
    auto b = p.bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.3 * n(rng);
  }
  return p;
}

// Norm-wise relative error; `floor` bounds the denominator for near-zero references.
inline double rel_error(std::span<const double> a, std::span<const double> b, double floor = 1e-300) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), floor);
}

}  // namespace testing
