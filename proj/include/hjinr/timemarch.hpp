#pragma once

// Time marching for Hamiltonians that depend on x. The horizon is split into
// N intervals of length dt; on interval k the network u^k(x, tau) satisfies
//
//   u^k(x, tau) = u^{k-1}(x - tau grad_p H(x, p), dt)
//                 + tau p . grad_p H(x, p) - tau H(x, p),   p = grad u^k(x, tau),
//
// with u^0 = g. One network is trained interval after interval, each time
// warm-started from the previous interval's parameters.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hjinr/error.hpp"
#include "hjinr/loss.hpp"
#include "hjinr/network.hpp"
#include "hjinr/problems.hpp"
#include "hjinr/trainer.hpp"

namespace hjinr {

struct MarchConfig {
  double dt = 0.1;
  TrainConfig train;  // per interval; train.stop_loss enables early stopping
  std::filesystem::path checkpoint_dir;  // empty: keep checkpoints in memory only
  bool force = false;  // allow state-independent problems

  /// Number of intervals; throws ConfigError unless dt divides the horizon.
  std::size_t steps(double horizon) const;
};

/// Seed used for interval k (1-based).
std::uint64_t interval_seed(std::uint64_t seed, std::size_t k);

using PointValue = std::function<double(std::span<const double> x, double t)>;
using PointGradient = std::function<std::vector<double>(std::span<const double> x, double t)>;

/// S[u^k, u^{k-1}] at (x, tau) for arbitrary level functions.
double residual_step(const PointValue& live, const PointGradient& live_grad, const PointValue& prev,
                     double dt, const ProblemSpec& problem, std::span<const double> x, double tau);

/// Network version; prev.network == nullptr stands for g.
double residual_step(const MlpParams& live, const PriorLevel& prev, const ProblemSpec& problem,
                     std::span<const double> x, double tau);

struct IntervalReport {
  std::size_t k = 0;
  std::size_t epochs = 0;
  double final_loss = 0.0;
  double seam_gap = 0.0;      // max |u^k(x, 0) - u^{k-1}(x, dt)| on a probe set
  double residual_rms = 0.0;  // on a fresh batch after training
  std::optional<std::size_t> epochs_to_threshold;
  double sec_per_epoch = 0.0;
  std::filesystem::path checkpoint;
};

/// Piecewise network solution; interval k answers t in [(k-1) dt, k dt).
class MarchedSolution {
 public:
  MarchedSolution() = default;
  MarchedSolution(std::vector<MlpParams> steps, double dt);

  std::size_t steps() const { return steps_.size(); }
  double dt() const { return dt_; }
  const MlpParams& step(std::size_t k) const { return steps_.at(k - 1); }

  /// (k, tau) for global time t; an interval boundary maps to the later
  /// interval at tau = 0, the final time to the last interval at tau = dt.
  std::pair<std::size_t, double> locate(double t) const;

  double value(std::span<const double> x, double t) const;
  Eigen::RowVectorXd values(const Eigen::MatrixXd& points) const;

 private:
  std::vector<MlpParams> steps_;
  double dt_ = 0.0;
};

struct MarchResult {
  MarchedSolution solution;
  std::vector<IntervalReport> intervals;
  std::filesystem::path manifest;
};

/// Per-interval training divergence. Earlier intervals stay on disk.
class MarchDiverged : public NumericalError {
 public:
  MarchDiverged(const std::string& what, std::size_t interval, std::vector<std::filesystem::path> done)
      : NumericalError(what), interval_(interval), completed_(std::move(done)) {}
  std::size_t interval() const { return interval_; }
  const std::vector<std::filesystem::path>& completed() const { return completed_; }

 private:
  std::size_t interval_;
  std::vector<std::filesystem::path> completed_;
};

struct MarchHooks {
  std::function<void(const IntervalReport&)> on_interval;
  TrainHooks train;
};

MarchResult march(const ProblemSpec& problem, const NetworkConfig& net, const MarchConfig& cfg,
                  const MarchHooks& hooks = {});

/// Loads step_<k>.hjin from cfg.checkpoint_dir and runs intervals k+1..N.
/// Earlier steps are reloaded so the returned solution is complete.
MarchResult resume_march(const ProblemSpec& problem, const MarchConfig& cfg, std::size_t k,
                         const MarchHooks& hooks = {});

std::filesystem::path step_path(const std::filesystem::path& dir, std::size_t k);

/// Reads manifest.json and every checkpoint it lists.
MarchedSolution load_march(const std::filesystem::path& dir);

}  // namespace hjinr
