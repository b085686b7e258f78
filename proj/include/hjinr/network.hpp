#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace hjinr {

enum class Activation : std::uint32_t {
  Softplus = 0,
  Identity = 1,  // test networks only
};

/// Shape of the coordinate MLP u(x, t). depth counts hidden layers.
struct NetworkConfig {
  std::size_t input_dim = 2;  // spatial dimension + 1
  std::size_t depth = 5;
  std::size_t width = 64;
  Activation activation = Activation::Softplus;
  double beta = 100.0;

  static NetworkConfig for_dimension(std::size_t spatial_dim, std::size_t depth = 5,
                                     std::size_t width = 64, double beta = 100.0);

  std::size_t spatial_dim() const { return input_dim - 1; }
  std::size_t param_count() const;
  /// Throws ConfigError unless depth >= 1, width >= 1, beta > 0, input_dim >= 2.
  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

using RowMatrixMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMatrixMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

/// All weights and biases, stored flat in checkpoint order:
/// W_0, b_0, ..., W_{depth-1}, b_{depth-1}, W_out, b_out (matrices row-major).
/// Layer index `depth` addresses the output layer.
class MlpParams {
 public:
  MlpParams() = default;
  explicit MlpParams(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }
  std::size_t size() const { return data_.size(); }
  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  std::size_t layer_rows(std::size_t layer) const;
  std::size_t layer_cols(std::size_t layer) const;
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;

  RowMatrixMap weight(std::size_t layer);
  ConstRowMatrixMap weight(std::size_t layer) const;
  VectorMap bias(std::size_t layer);
  ConstVectorMap bias(std::size_t layer) const;

  bool all_finite() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;

 private:
  NetworkConfig config_;
  std::vector<double, Eigen::aligned_allocator<double>> data_;
};

/// Uniform weights on [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases.
MlpParams init_network(const NetworkConfig& config, std::uint64_t seed);

namespace activation {
double value(Activation a, double beta, double z);
double slope(Activation a, double beta, double z);
double curvature(Activation a, double beta, double z);
}  // namespace activation

/// u(x, t).
double forward(const MlpParams& params, std::span<const double> x, double t);

/// Values at the columns of `points` ((d+1) x M, last row is time).
Eigen::RowVectorXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& points);

/// Product of layer spectral-norm bounds (Frobenius) times the activation
/// slope bound; a finite Lipschitz constant of (x, t) -> u.
double lipschitz_bound(const MlpParams& params);

struct CheckpointMeta {
  std::uint64_t epoch = 0;
  double final_loss = 0.0;
  std::uint64_t seed = 0;
  std::string problem_id;

  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params,
                     const CheckpointMeta& meta);

/// Throws IoError, CorruptCheckpoint, or ShapeMismatch when `expected` is
/// given and differs from the embedded configuration.
std::pair<MlpParams, CheckpointMeta> load_checkpoint(
    const std::filesystem::path& path, const std::optional<NetworkConfig>& expected = std::nullopt);

std::vector<std::uint8_t> encode_checkpoint(const MlpParams& params, const CheckpointMeta& meta);
std::pair<MlpParams, CheckpointMeta> decode_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace hjinr
