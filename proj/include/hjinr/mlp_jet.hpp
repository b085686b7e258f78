#pragma once

// Exact input derivatives of the network and parameter gradients of scalar
// functionals built from them.
//
// A JetBatch evaluates u and grad_{(x,t)} u at many points at once. Its
// backward pass takes adjoints for both u and grad u and returns the
// parameter gradient: the grad-u adjoint is pushed through as a single
// forward tangent, so the cost does not grow with the input dimension.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hjinr/network.hpp"
#include "hjinr/tape.hpp"

namespace hjinr::ad {

/// u, grad_x u and u_t at one point.
struct InputJet {
  double value = 0.0;
  std::vector<double> grad_x;
  double grad_t = 0.0;
};

InputJet eval_with_input_grad(const MlpParams& params, std::span<const double> x, double t);

class JetBatch {
 public:
  /// points: (d+1) x M, time in the last row.
  JetBatch(const MlpParams& params, Eigen::MatrixXd points);

  const MlpParams& params() const { return *params_; }
  Eigen::Index size() const { return points_.cols(); }
  const Eigen::MatrixXd& points() const { return points_; }
  const Eigen::RowVectorXd& values() const { return values_; }
  /// (d+1) x M; row d holds u_t.
  const Eigen::MatrixXd& input_grads() const { return grads_; }

  /// Adds d/dtheta [sum_j value_adj_j u_j + grad_adj_j . grad u_j] into
  /// param_grad (flat checkpoint order) and, when input_adj is non-null,
  /// writes the corresponding adjoint of the points.
  void backward(const Eigen::RowVectorXd& value_adj, const Eigen::MatrixXd& grad_adj,
                std::span<double> param_grad, Eigen::MatrixXd* input_adj) const;

  std::size_t memory_bytes() const;

 private:
  const MlpParams* params_;
  Eigen::MatrixXd points_;
  std::vector<Eigen::MatrixXd> acts_;    // post-activation per hidden layer
  std::vector<Eigen::MatrixXd> slope_;   // sigma'(z)
  std::vector<Eigen::MatrixXd> curv_;    // sigma''(z)
  std::vector<Eigen::MatrixXd> back_;    // d u / d a_l (reverse input pass)
  Eigen::RowVectorXd values_;
  Eigen::MatrixXd grads_;
};

/// Handle to a parameter block whose gradient is collected on a tape.
struct ParamBinding {
  const MlpParams* params = nullptr;
  int slot = -1;
};

ParamBinding bind(Tape& tape, const MlpParams& params);

/// Tape view of a recorded network evaluation. Output layout per point j:
/// [u, du/dx_1 .. du/dx_d, du/dt].
class NetworkOutputs {
 public:
  NetworkOutputs() = default;
  NetworkOutputs(std::vector<Var> vars, std::size_t input_dim)
      : vars_(std::move(vars)), stride_(input_dim + 1) {}

  std::size_t size() const { return stride_ == 0 ? 0 : vars_.size() / stride_; }
  const Var& value(std::size_t j) const { return vars_[j * stride_]; }
  const Var& grad(std::size_t j, std::size_t i) const { return vars_[j * stride_ + 1 + i]; }
  /// Spatial gradient entries of point j.
  std::span<const Var> grad_x(std::size_t j) const {
    return std::span<const Var>(vars_).subspan(j * stride_ + 1, stride_ - 2);
  }

 private:
  std::vector<Var> vars_;
  std::size_t stride_ = 0;
};

/// Network evaluated at fixed data points; gradients flow to the bound
/// parameters only.
NetworkOutputs record_network(Tape& tape, const ParamBinding& binding, const Eigen::MatrixXd& points);

/// Network evaluated at taped points (column-major, (d+1) per point). With
/// slot < 0 the parameters are frozen and only the points receive adjoints.
NetworkOutputs record_network(Tape& tape, const ParamBinding& binding, std::span<const Var> points);

using LossBuilder = std::function<Var(Tape&, const ParamBinding&)>;

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;
  std::size_t tape_bytes = 0;
};

/// dL/dtheta for a loss composed of taped primitives, including network
/// evaluations recorded against the supplied binding.
LossGradient param_gradient(const LossBuilder& build, const MlpParams& params);

}  // namespace hjinr::ad
