#include "hjinr/mlp_jet.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "hjinr/error.hpp"
#include "mlp_core.hpp"

namespace hjinr::ad {

JetBatch::JetBatch(const MlpParams& params, Eigen::MatrixXd points)
    : params_(&params), points_(std::move(points)) {
  const NetworkConfig& cfg = params.config();
  if (static_cast<std::size_t>(points_.rows()) != cfg.input_dim) {
    throw ConfigError("jet: point dimension " + std::to_string(points_.rows()) +
                      " does not match network input " + std::to_string(cfg.input_dim));
  }
  const std::size_t depth = cfg.depth;
  const Eigen::Index m = points_.cols();
  acts_.resize(depth);
  slope_.resize(depth);
  curv_.resize(depth);
  back_.resize(depth);

  const Eigen::MatrixXd* in = &points_;
  for (std::size_t l = 0; l < depth; ++l) {
    const Eigen::MatrixXd z = detail::affine(params, l, *in);
    Eigen::MatrixXd& a = acts_[l];
    detail::activate(cfg.activation, cfg.beta, z, a, &slope_[l], &curv_[l]);
    detail::check_finite(a, l, "activation");
    in = &a;
  }
  const Eigen::MatrixXd u = detail::affine(params, depth, *in);
  detail::check_finite(u, depth, "output");
  values_ = u.row(0);

  const auto w_out = params.weight(depth);
  back_[depth - 1] = w_out.transpose().replicate(1, m);
  for (std::size_t l = depth - 1; l > 0; --l) {
    const Eigen::MatrixXd delta = back_[l].cwiseProduct(slope_[l]);
    back_[l - 1] = params.weight(l).transpose() * delta;
  }
  const Eigen::MatrixXd delta0 = back_[0].cwiseProduct(slope_[0]);
  grads_ = params.weight(0).transpose() * delta0;
  detail::check_finite(grads_, 0, "input gradient");
}

void JetBatch::backward(const Eigen::RowVectorXd& value_adj, const Eigen::MatrixXd& grad_adj,
                        std::span<double> param_grad, Eigen::MatrixXd* input_adj) const {
  const MlpParams& params = *params_;
  const NetworkConfig& cfg = params.config();
  const std::size_t depth = cfg.depth;
  const Eigen::Index m = points_.cols();
  const bool want_params = !param_grad.empty();
  if (want_params && param_grad.size() != params.size()) {
    throw ContractViolation("jet backward: gradient buffer has wrong size");
  }
  if (value_adj.cols() != m || grad_adj.cols() != m ||
      static_cast<std::size_t>(grad_adj.rows()) != cfg.input_dim) {
    throw ContractViolation("jet backward: adjoint shape mismatch");
  }

  auto gw = [&](std::size_t l) {
    return RowMatrixMap(param_grad.data() + params.weight_offset(l),
                        static_cast<Eigen::Index>(params.layer_rows(l)),
                        static_cast<Eigen::Index>(params.layer_cols(l)));
  };
  auto gb = [&](std::size_t l) {
    return VectorMap(param_grad.data() + params.bias_offset(l),
                     static_cast<Eigen::Index>(params.layer_rows(l)));
  };

  std::vector<Eigen::MatrixXd> zbar(depth);
  const bool tangent = !grad_adj.isZero(0.0);
  if (tangent) {
    // Forward tangent seeded with grad_adj: the adjoint of the reverse input
    // pass. tdot is d(delta_l)bar, adot the tangent of the activations.
    Eigen::MatrixXd adot;
    for (std::size_t l = 0; l < depth; ++l) {
      const Eigen::MatrixXd& prev = l == 0 ? grad_adj : adot;
      const Eigen::MatrixXd tdot = params.weight(l) * prev;
      if (want_params) {
        const Eigen::MatrixXd delta = back_[l].cwiseProduct(slope_[l]);
        gw(l).noalias() += delta * prev.transpose();
      }
      zbar[l] = tdot.cwiseProduct(back_[l]).cwiseProduct(curv_[l]);
      adot = tdot.cwiseProduct(slope_[l]);
    }
    if (want_params) {
      gw(depth).row(0) += adot.rowwise().sum().transpose();
    }
  } else {
    for (std::size_t l = 0; l < depth; ++l) {
      zbar[l] = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cfg.width), m);
    }
  }

  if (want_params) {
    gw(depth).row(0) += (acts_[depth - 1] * value_adj.transpose()).transpose();
    gb(depth)(0) += value_adj.sum();
  }
  Eigen::MatrixXd abar = params.weight(depth).transpose() * value_adj;
  for (std::size_t l = depth; l-- > 0;) {
    zbar[l] += abar.cwiseProduct(slope_[l]);
    const Eigen::MatrixXd& in = l == 0 ? points_ : acts_[l - 1];
    if (want_params) {
      gw(l).noalias() += zbar[l] * in.transpose();
      gb(l) += zbar[l].rowwise().sum();
    }
    if (l > 0 || input_adj != nullptr) {
      abar = params.weight(l).transpose() * zbar[l];
    }
  }
  if (input_adj != nullptr) {
    *input_adj = std::move(abar);
  }
}

std::size_t JetBatch::memory_bytes() const {
  std::size_t n = static_cast<std::size_t>(points_.size() + values_.size() + grads_.size());
  for (std::size_t l = 0; l < acts_.size(); ++l) {
    n += static_cast<std::size_t>(acts_[l].size() + slope_[l].size() + curv_[l].size() +
                                  back_[l].size());
  }
  return n * sizeof(double);
}

InputJet eval_with_input_grad(const MlpParams& params, std::span<const double> x, double t) {
  Eigen::MatrixXd p(static_cast<Eigen::Index>(x.size() + 1), 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    p(static_cast<Eigen::Index>(i), 0) = x[i];
  }
  p(static_cast<Eigen::Index>(x.size()), 0) = t;
  const JetBatch jet(params, std::move(p));
  InputJet out;
  out.value = jet.values()(0);
  out.grad_x.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.grad_x[i] = jet.input_grads()(static_cast<Eigen::Index>(i), 0);
  }
  out.grad_t = jet.input_grads()(static_cast<Eigen::Index>(x.size()), 0);
  return out;
}

namespace {

class NetworkCall final : public Primitive {
 public:
  NetworkCall(const MlpParams& params, Eigen::MatrixXd points, int slot, bool taped_points)
      : jet_(params, std::move(points)), slot_(slot), taped_points_(taped_points) {}

  std::string_view name() const override { return "network"; }

  const JetBatch& jet() const { return jet_; }

  void backward(Tape& tape, std::span<const double> out_adjoints,
                std::span<double> in_adjoints) override {
    const Eigen::Index p = jet_.points().rows();
    const Eigen::Index m = jet_.size();
    const Eigen::Index stride = p + 1;
    Eigen::RowVectorXd vadj(m);
    Eigen::MatrixXd gadj(p, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      vadj(j) = out_adjoints[static_cast<std::size_t>(j * stride)];
      for (Eigen::Index i = 0; i < p; ++i) {
        gadj(i, j) = out_adjoints[static_cast<std::size_t>(j * stride + 1 + i)];
      }
    }
    Eigen::MatrixXd xadj;
    std::span<double> pgrad = slot_ >= 0 ? tape.param_grad(slot_) : std::span<double>{};
    if (pgrad.empty() && !taped_points_) {
      return;
    }
    jet_.backward(vadj, gadj, pgrad, taped_points_ ? &xadj : nullptr);
    if (taped_points_) {
      for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index i = 0; i < p; ++i) {
          in_adjoints[static_cast<std::size_t>(j * p + i)] += xadj(i, j);
        }
      }
    }
  }

  void replay(std::span<const double> in_values, std::span<double> out_values) const override {
    Eigen::MatrixXd pts = jet_.points();
    if (taped_points_) {
      for (Eigen::Index j = 0; j < pts.cols(); ++j) {
        for (Eigen::Index i = 0; i < pts.rows(); ++i) {
          pts(i, j) = in_values[static_cast<std::size_t>(j * pts.rows() + i)];
        }
      }
    }
    const JetBatch again(jet_.params(), std::move(pts));
    write_outputs(again, out_values);
  }

  std::size_t memory_bytes() const override { return jet_.memory_bytes(); }

  static void write_outputs(const JetBatch& jet, std::span<double> out) {
    const Eigen::Index p = jet.points().rows();
    for (Eigen::Index j = 0; j < jet.size(); ++j) {
      out[static_cast<std::size_t>(j * (p + 1))] = jet.values()(j);
      for (Eigen::Index i = 0; i < p; ++i) {
        out[static_cast<std::size_t>(j * (p + 1) + 1 + i)] = jet.input_grads()(i, j);
      }
    }
  }

 private:
  JetBatch jet_;
  int slot_;
  bool taped_points_;
};

NetworkOutputs finish(Tape& tape, std::unique_ptr<NetworkCall> call, std::span<const Var> inputs) {
  const std::size_t p = static_cast<std::size_t>(call->jet().points().rows());
  std::vector<double> outputs(static_cast<std::size_t>(call->jet().size()) * (p + 1));
  NetworkCall::write_outputs(call->jet(), outputs);
  auto vars = tape.record(std::move(call), inputs, outputs);
  return NetworkOutputs(std::move(vars), p);
}

}  // namespace

ParamBinding bind(Tape& tape, const MlpParams& params) {
  return ParamBinding{&params, tape.bind_params(params.size())};
}

NetworkOutputs record_network(Tape& tape, const ParamBinding& binding, const Eigen::MatrixXd& points) {
  if (binding.params == nullptr) {
    throw ContractViolation("record_network: empty parameter binding");
  }
  auto call = std::make_unique<NetworkCall>(*binding.params, points, binding.slot, false);
  return finish(tape, std::move(call), {});
}

NetworkOutputs record_network(Tape& tape, const ParamBinding& binding, std::span<const Var> points) {
  if (binding.params == nullptr) {
    throw ContractViolation("record_network: empty parameter binding");
  }
  const std::size_t p = binding.params->config().input_dim;
  if (points.size() % p != 0) {
    throw ConfigError("record_network: point buffer is not a multiple of the input dimension");
  }
  const auto m = static_cast<Eigen::Index>(points.size() / p);
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(p), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < p; ++i) {
      pts(static_cast<Eigen::Index>(i), j) = points[static_cast<std::size_t>(j) * p + i].value();
    }
  }
  auto call = std::make_unique<NetworkCall>(*binding.params, std::move(pts), binding.slot, true);
  return finish(tape, std::move(call), points);
}

LossGradient param_gradient(const LossBuilder& build, const MlpParams& params) {
  Tape tape;
  const ParamBinding binding = bind(tape, params);
  const Var loss = build(tape, binding);
  if (!std::isfinite(loss.value())) {
    throw NumericalError("loss is not finite");
  }
  if (!loss.is_constant() && loss.tape() != &tape) {
    throw UnsupportedOperation("loss was not recorded on the differentiation tape");
  }
  tape.backward(loss);
  LossGradient out;
  out.loss = loss.value();
  const auto g = tape.param_grad(binding.slot);
  out.gradient.assign(g.begin(), g.end());
  out.tape_bytes = tape.memory_bytes();
  return out;
}

}  // namespace hjinr::ad
