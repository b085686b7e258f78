#pragma once

// Implicit-formula residual and the Monte-Carlo training objective.
//
//   S(u)(x, t) = u + t H(x, p) - t p . grad_p H(x, p) - u0(x - t grad_p H(x, p)),
//   p = grad_x u(x, t),
//
// where u0 is the initial data g, or a frozen network at a fixed time when
// the objective is used by the time marcher.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hjinr/network.hpp"
#include "hjinr/problems.hpp"

namespace hjinr {

/// Columns are points (x, t); the last row is time.
struct CollocationBatch {
  Eigen::MatrixXd interior;  // (d+1) x M
  Eigen::MatrixXd boundary;  // (d+1) x M_b on the faces of the box
  Eigen::MatrixXd partners;  // (d+1) x M_b, periodic images of `boundary`

  std::size_t interior_size() const { return static_cast<std::size_t>(interior.cols()); }
  std::size_t boundary_size() const { return static_cast<std::size_t>(boundary.cols()); }
};

/// Initial data used in the pull-back term: g when `network` is null,
/// otherwise the frozen network evaluated at time `time`.
struct PriorLevel {
  const MlpParams* network = nullptr;
  double time = 0.0;
};

struct ResidualContext {
  PriorLevel prior;
  double time_offset = 0.0;  // global time at t = 0, used for Dirichlet data
};

/// S at one point. Problems whose Hamiltonian reads x are rejected here; the
/// time marcher owns that residual.
double residual(const MlpParams& params, const ProblemSpec& problem, std::span<const double> x,
                double t);

/// S at every column of `points`.
Eigen::RowVectorXd residuals(const MlpParams& params, const ProblemSpec& problem,
                             const Eigen::MatrixXd& points, const ResidualContext& ctx = {});

double empirical_loss(const MlpParams& params, const ProblemSpec& problem,
                      const CollocationBatch& batch, const ResidualContext& ctx = {});

double boundary_loss(const MlpParams& params, const ProblemSpec& problem,
                     const CollocationBatch& batch, const ResidualContext& ctx = {});

double total_loss(const MlpParams& params, const ProblemSpec& problem,
                  const CollocationBatch& batch, double lambda, const ResidualContext& ctx = {});

struct LossTerms {
  double total = 0.0;
  double empirical = 0.0;
  double boundary = 0.0;
};

struct LossEvaluation {
  LossTerms terms;
  std::vector<double> gradient;  // flat checkpoint order
  std::size_t tape_bytes = 0;
};

/// Total loss and its parameter gradient through the nested tape.
LossEvaluation loss_and_gradient(const MlpParams& params, const ProblemSpec& problem,
                                 const CollocationBatch& batch, double lambda,
                                 const ResidualContext& ctx = {});

}  // namespace hjinr
