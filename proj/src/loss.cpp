#include "hjinr/loss.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "hjinr/error.hpp"
#include "hjinr/mlp_jet.hpp"
#include "hjinr/tape.hpp"

namespace hjinr {

namespace {

using ad::Var;

std::string echo_point(const Eigen::MatrixXd& points, Eigen::Index j) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    os << (i ? ", " : "") << points(i, j);
  }
  os << ")";
  return os.str();
}

void check_points(const ProblemSpec& problem, const MlpParams& params, const Eigen::MatrixXd& points) {
  if (static_cast<std::size_t>(points.rows()) != problem.dim + 1 ||
      params.config().input_dim != problem.dim + 1) {
    throw ConfigError("loss: problem '" + problem.id + "' has dimension " +
                      std::to_string(problem.dim) + " but the network takes " +
                      std::to_string(params.config().input_dim) + " inputs");
  }
}

// u + t H(x, p) - t p . grad_p H(x, p), and the pulled-back point y.
template <class T>
T characteristic_part(const ProblemSpec& problem, std::span<const double> x, double t, const T& u,
                      std::span<const T> p, std::span<T> y) {
  const std::size_t d = problem.dim;
  std::vector<T> gp(d);
  hamiltonian_grad_p<T>(problem, x, p, gp);
  const T h = hamiltonian_value<T>(problem, x, p);
  T dot(0.0);
  for (std::size_t i = 0; i < d; ++i) {
    dot = dot + p[i] * gp[i];
    y[i] = T(x[i]) - T(t) * gp[i];
  }
  return u + T(t) * (h - dot);
}

std::span<const double> spatial(const Eigen::MatrixXd& points, Eigen::Index j, std::size_t d) {
  return std::span<const double>(points.col(j).data(), d);
}

double sum_squares_mean(const Eigen::RowVectorXd& r) {
  return r.size() == 0 ? 0.0 : r.squaredNorm() / static_cast<double>(r.size());
}

void check_boundary_batch(const ProblemSpec& problem, const CollocationBatch& batch) {
  if (problem.boundary == BoundaryKind::None) {
    throw ContractViolation("boundary loss requested for '" + problem.id +
                            "', which has no boundary condition");
  }
  if (problem.boundary == BoundaryKind::Periodic &&
      (batch.partners.cols() != batch.boundary.cols() ||
       batch.partners.rows() != batch.boundary.rows())) {
    throw ContractViolation("periodic boundary loss needs one partner per boundary point");
  }
}

Eigen::RowVectorXd dirichlet_data(const ProblemSpec& problem, const Eigen::MatrixXd& pts,
                                  double time_offset) {
  Eigen::RowVectorXd h(pts.cols());
  for (Eigen::Index j = 0; j < pts.cols(); ++j) {
    h(j) = boundary_value(problem, spatial(pts, j, problem.dim), time_offset + pts(problem.dim, j));
  }
  return h;
}

}  // namespace

double residual(const MlpParams& params, const ProblemSpec& problem, std::span<const double> x,
                double t) {
  if (problem.state_dependent) {
    throw ContractViolation("residual: '" + problem.id +
                            "' has a state-dependent Hamiltonian; use the time marcher");
  }
  if (x.size() != problem.dim) {
    throw ConfigError("residual: point dimension does not match problem '" + problem.id + "'");
  }
  Eigen::MatrixXd pt(static_cast<Eigen::Index>(problem.dim + 1), 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    pt(static_cast<Eigen::Index>(i), 0) = x[i];
  }
  pt(static_cast<Eigen::Index>(problem.dim), 0) = t;
  return residuals(params, problem, pt)(0);
}

Eigen::RowVectorXd residuals(const MlpParams& params, const ProblemSpec& problem,
                             const Eigen::MatrixXd& points, const ResidualContext& ctx) {
  check_points(problem, params, points);
  const std::size_t d = problem.dim;
  const Eigen::Index m = points.cols();
  const ad::JetBatch jet(params, points);
  Eigen::RowVectorXd partial(m);
  Eigen::MatrixXd pulled(static_cast<Eigen::Index>(d + 1), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double* g = jet.input_grads().col(j).data();
    partial(j) = characteristic_part<double>(problem, spatial(points, j, d), points(d, j),
                                             jet.values()(j), std::span<const double>(g, d),
                                             std::span<double>(pulled.col(j).data(), d));
    pulled(static_cast<Eigen::Index>(d), j) = ctx.prior.time;
  }
  Eigen::RowVectorXd prior(m);
  if (ctx.prior.network == nullptr) {
    for (Eigen::Index j = 0; j < m; ++j) {
      prior(j) = initial_value(problem, spatial(pulled, j, d));
    }
  } else {
    prior = forward_batch(*ctx.prior.network, pulled);
  }
  Eigen::RowVectorXd s = partial - prior;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (!std::isfinite(s(j))) {
      throw NumericalError("residual is not finite at " + echo_point(points, j));
    }
  }
  return s;
}

double empirical_loss(const MlpParams& params, const ProblemSpec& problem,
                      const CollocationBatch& batch, const ResidualContext& ctx) {
  if (batch.interior.cols() == 0) {
    throw ContractViolation("empirical loss of an empty batch");
  }
  return sum_squares_mean(residuals(params, problem, batch.interior, ctx));
}

double boundary_loss(const MlpParams& params, const ProblemSpec& problem,
                     const CollocationBatch& batch, const ResidualContext& ctx) {
  check_boundary_batch(problem, batch);
  if (batch.boundary.cols() == 0) {
    return 0.0;
  }
  check_points(problem, params, batch.boundary);
  const Eigen::RowVectorXd u = forward_batch(params, batch.boundary);
  if (problem.boundary == BoundaryKind::Periodic) {
    return sum_squares_mean(u - forward_batch(params, batch.partners));
  }
  return sum_squares_mean(u - dirichlet_data(problem, batch.boundary, ctx.time_offset));
}

double total_loss(const MlpParams& params, const ProblemSpec& problem,
                  const CollocationBatch& batch, double lambda, const ResidualContext& ctx) {
  if (!(lambda >= 0.0)) {
    throw ConfigError("boundary weight lambda must be non-negative");
  }
  double loss = empirical_loss(params, problem, batch, ctx);
  if (problem.boundary != BoundaryKind::None && lambda > 0.0) {
    loss += lambda * boundary_loss(params, problem, batch, ctx);
  }
  return loss;
}

LossEvaluation loss_and_gradient(const MlpParams& params, const ProblemSpec& problem,
                                 const CollocationBatch& batch, double lambda,
                                 const ResidualContext& ctx) {
  if (batch.interior.cols() == 0) {
    throw ContractViolation("empirical loss of an empty batch");
  }
  if (!(lambda >= 0.0)) {
    throw ConfigError("boundary weight lambda must be non-negative");
  }
  check_points(problem, params, batch.interior);
  const bool with_boundary =
      problem.boundary != BoundaryKind::None && lambda > 0.0 && batch.boundary.cols() > 0;
  if (with_boundary) {
    check_boundary_batch(problem, batch);
    check_points(problem, params, batch.boundary);
  }
  const std::size_t d = problem.dim;

  LossTerms terms;
  auto build = [&](ad::Tape& tape, const ad::ParamBinding& binding) -> Var {
    const Eigen::Index m = batch.interior.cols();
    const ad::NetworkOutputs out = ad::record_network(tape, binding, batch.interior);
    std::vector<Var> partial(static_cast<std::size_t>(m));
    std::vector<Var> pulled(static_cast<std::size_t>(m) * (d + 1));
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      std::span<Var> y(pulled.data() + jj * (d + 1), d);
      partial[jj] = characteristic_part<Var>(problem, spatial(batch.interior, j, d),
                                             batch.interior(d, j), out.value(jj), out.grad_x(jj), y);
      pulled[jj * (d + 1) + d] = Var(ctx.prior.time);
    }
    std::vector<Var> prior(static_cast<std::size_t>(m));
    if (ctx.prior.network == nullptr) {
      for (std::size_t j = 0; j < prior.size(); ++j) {
        prior[j] = initial_value<Var>(problem, std::span<const Var>(pulled.data() + j * (d + 1), d));
      }
    } else {
      const ad::ParamBinding frozen{ctx.prior.network, -1};
      const ad::NetworkOutputs prev = ad::record_network(tape, frozen, std::span<const Var>(pulled));
      for (std::size_t j = 0; j < prior.size(); ++j) {
        prior[j] = prev.value(j);
      }
    }
    Var sum(0.0);
    for (std::size_t j = 0; j < partial.size(); ++j) {
      const Var s = partial[j] - prior[j];
      if (!std::isfinite(s.value())) {
        throw NumericalError("residual is not finite at " +
                             echo_point(batch.interior, static_cast<Eigen::Index>(j)));
      }
      sum = sum + ad::square(s);
    }
    const Var empirical = sum * Var(1.0 / static_cast<double>(m));
    terms.empirical = empirical.value();
    if (!with_boundary) {
      terms.total = terms.empirical;
      return empirical;
    }

    const Eigen::Index mb = batch.boundary.cols();
    const ad::NetworkOutputs ub = ad::record_network(tape, binding, batch.boundary);
    Var bsum(0.0);
    if (problem.boundary == BoundaryKind::Periodic) {
      const ad::NetworkOutputs up = ad::record_network(tape, binding, batch.partners);
      for (Eigen::Index j = 0; j < mb; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        bsum = bsum + ad::square(ub.value(jj) - up.value(jj));
      }
    } else {
      const Eigen::RowVectorXd h = dirichlet_data(problem, batch.boundary, ctx.time_offset);
      for (Eigen::Index j = 0; j < mb; ++j) {
        bsum = bsum + ad::square(ub.value(static_cast<std::size_t>(j)) - Var(h(j)));
      }
    }
    const Var boundary = bsum * Var(1.0 / static_cast<double>(mb));
    terms.boundary = boundary.value();
    const Var total = empirical + Var(lambda) * boundary;
    terms.total = total.value();
    return total;
  };

  ad::LossGradient g = ad::param_gradient(build, params);
  LossEvaluation out;
  out.terms = terms;
  out.terms.total = g.loss;
  out.gradient = std::move(g.gradient);
  out.tape_bytes = g.tape_bytes;
  return out;
}

}  // namespace hjinr
