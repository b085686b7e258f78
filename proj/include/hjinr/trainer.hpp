#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hjinr/error.hpp"
#include "hjinr/loss.hpp"
#include "hjinr/network.hpp"
#include "hjinr/problems.hpp"

namespace hjinr {

enum class Optimizer { GradientDescent, Adam };

std::string_view optimizer_name(Optimizer opt);
Optimizer parse_optimizer(std::string_view name);

struct TrainConfig {
  std::size_t epochs = 20000;
  std::size_t interior_points = 5000;  // M
  std::size_t boundary_points = 200;   // M_b
  double learning_rate = 1e-3;
  double decay = 0.99;  // applied on every strict improvement of the best loss
  double lambda = 0.1;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::GradientDescent;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t log_every = 0;   // 0 disables the log hook
  std::size_t eval_every = 0;  // 0 disables the evaluation hook
  double stop_loss = 0.0;      // stop once an epoch loss falls below; 0 disables

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double alpha = 0.0;
  double wall_ms = 0.0;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_log;
  std::function<void(std::size_t epoch, const MlpParams&)> on_eval;
};

struct TrainReport {
  MlpParams params;
  std::vector<double> losses;  // loss at the start of each epoch, on its batch
  std::vector<double> alphas;  // step size used in each epoch
  std::vector<double> epoch_ms;
  std::size_t epochs_run = 0;
  std::size_t peak_memory_bytes = 0;  // parameters, optimizer state and tape

  double sec_per_epoch() const;
  /// First epoch whose loss is below `threshold`.
  std::optional<std::size_t> epochs_to(double threshold) const;
  std::vector<EpochRecord> records() const;
};

/// NaN or infinite loss during training. Carries the last finite parameters.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, std::size_t epoch, MlpParams last_good)
      : NumericalError(what), epoch_(epoch), last_good_(std::move(last_good)) {}
  std::size_t epoch() const { return epoch_; }
  const MlpParams& last_good() const { return last_good_; }

 private:
  std::size_t epoch_;
  MlpParams last_good_;
};

/// Interior points uniform on the box times [0, horizon]; boundary points on
/// a face picked with probability proportional to its measure; periodic
/// partners are the images on the opposite face.
CollocationBatch sample_collocation(const ProblemSpec& problem, std::size_t m, std::size_t m_b,
                                    std::mt19937_64& rng);
CollocationBatch sample_collocation(const ProblemSpec& problem, std::size_t m, std::size_t m_b,
                                    std::mt19937_64& rng, double horizon);

/// Fresh network from `config` seeded with train.seed.
TrainReport train(const ProblemSpec& problem, const NetworkConfig& net, const TrainConfig& train,
                  const TrainHooks& hooks = {});

/// Continues from `initial`. `horizon` bounds sampled times and `ctx` picks
/// the initial data of the residual.
TrainReport train_from(MlpParams initial, const ProblemSpec& problem, const TrainConfig& train,
                       double horizon, const ResidualContext& ctx, const TrainHooks& hooks = {});

struct EvalSpec {
  std::size_t grid_per_axis = 201;
  std::size_t time_slices = 11;
  std::size_t random_points = 100000;  // used when d > 2
  std::uint64_t seed = 0;
};

/// Grid (d <= 2) or seeded random points over the box times [0, T].
Eigen::MatrixXd evaluation_points(const ProblemSpec& problem, const EvalSpec& spec);

struct EvalResult {
  double mse = 0.0;
  double rmse = 0.0;  // mse / max(mean(u*^2), 1e-12)
  double max_abs_error = 0.0;
  std::size_t points = 0;
};

using BatchModel = std::function<Eigen::RowVectorXd(const Eigen::MatrixXd&)>;
using PointReference = std::function<double(std::span<const double> x, double t)>;

/// Compares `model` against `reference`, or the closed form when `reference`
/// is empty. Throws ContractViolation when neither exists.
EvalResult evaluate_model(const BatchModel& model, const ProblemSpec& problem,
                          const EvalSpec& spec, const PointReference& reference = {});

EvalResult evaluate_mse(const MlpParams& params, const ProblemSpec& problem,
                        const EvalSpec& spec = {}, const PointReference& reference = {});

/// Header epoch,loss,alpha,wall_ms.
void write_epoch_csv(const std::filesystem::path& path, const TrainReport& report);

}  // namespace hjinr
