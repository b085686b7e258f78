#include "hjinr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

namespace hjinr {

namespace {

constexpr std::uint64_t kSamplerSalt = 0x9E3779B97F4A7C15ULL;

void check_finite_vector(std::span<const double> v, bool& ok) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      ok = false;
      return;
    }
  }
}

class Stepper {
 public:
  Stepper(const TrainConfig& cfg, std::size_t n) : cfg_(cfg) {
    if (cfg.optimizer == Optimizer::Adam) {
      m_.assign(n, 0.0);
      v_.assign(n, 0.0);
    }
  }

  void apply(std::span<double> theta, std::span<const double> grad, double alpha) {
    if (cfg_.optimizer == Optimizer::GradientDescent) {
      for (std::size_t i = 0; i < theta.size(); ++i) {
        theta[i] -= alpha * grad[i];
      }
      return;
    }
    ++step_;
    const double b1 = cfg_.adam_beta1;
    const double b2 = cfg_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
      v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
      const double mh = m_[i] / c1;
      const double vh = v_[i] / c2;
      theta[i] -= alpha * mh / (std::sqrt(vh) + cfg_.adam_epsilon);
    }
  }

  std::size_t state_bytes() const { return (m_.size() + v_.size()) * sizeof(double); }

 private:
  const TrainConfig& cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t step_ = 0;
};

}  // namespace

std::string_view optimizer_name(Optimizer opt) {
  return opt == Optimizer::Adam ? "adam" : "gd";
}

Optimizer parse_optimizer(std::string_view name) {
  if (name == "gd" || name == "sgd") return Optimizer::GradientDescent;
  if (name == "adam") return Optimizer::Adam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (interior_points < 1) throw ConfigError("train.M must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("train.gamma must lie in (0, 1]");
  if (!(lambda >= 0.0)) throw ConfigError("train.lambda must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(stop_loss >= 0.0)) throw ConfigError("train.stop_loss must be non-negative");
}

double TrainReport::sec_per_epoch() const {
  if (epoch_ms.empty()) return 0.0;
  return std::accumulate(epoch_ms.begin(), epoch_ms.end(), 0.0) / 1000.0 /
         static_cast<double>(epoch_ms.size());
}

std::optional<std::size_t> TrainReport::epochs_to(double threshold) const {
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i] < threshold) return i;
  }
  return std::nullopt;
}

std::vector<EpochRecord> TrainReport::records() const {
  std::vector<EpochRecord> out(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    out[i] = EpochRecord{i, losses[i], alphas[i], epoch_ms[i]};
  }
  return out;
}

CollocationBatch sample_collocation(const ProblemSpec& problem, std::size_t m, std::size_t m_b,
                                    std::mt19937_64& rng) {
  return sample_collocation(problem, m, m_b, rng, problem.horizon);
}

CollocationBatch sample_collocation(const ProblemSpec& problem, std::size_t m, std::size_t m_b,
                                    std::mt19937_64& rng, double horizon) {
  if (m < 1) throw ContractViolation("sample_collocation: M must be at least 1");
  if (!(horizon > 0.0)) throw ContractViolation("sample_collocation: horizon must be positive");
  const std::size_t d = problem.dim;
  const Box& box = problem.domain;
  const auto rows = static_cast<Eigen::Index>(d + 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  CollocationBatch batch;
  batch.interior.resize(rows, static_cast<Eigen::Index>(m));
  for (Eigen::Index j = 0; j < batch.interior.cols(); ++j) {
    for (std::size_t i = 0; i < d; ++i) {
      batch.interior(static_cast<Eigen::Index>(i), j) = box.lower[i] + box.length(i) * unit(rng);
    }
    batch.interior(rows - 1, j) = horizon * unit(rng);
  }
  if (problem.boundary == BoundaryKind::None || m_b == 0) {
    return batch;
  }

  // Face 2i is x_i = lower, 2i+1 is x_i = upper; both have the same measure.
  std::vector<double> weight(2 * d);
  for (std::size_t i = 0; i < d; ++i) {
    double w = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      if (k != i) w *= box.length(k);
    }
    weight[2 * i] = w;
    weight[2 * i + 1] = w;
  }
  std::discrete_distribution<std::size_t> face(weight.begin(), weight.end());
  batch.boundary.resize(rows, static_cast<Eigen::Index>(m_b));
  const bool periodic = problem.boundary == BoundaryKind::Periodic;
  if (periodic) batch.partners.resize(rows, static_cast<Eigen::Index>(m_b));
  for (Eigen::Index j = 0; j < batch.boundary.cols(); ++j) {
    const std::size_t f = face(rng);
    const std::size_t axis = f / 2;
    const bool upper = f % 2 == 1;
    for (std::size_t i = 0; i < d; ++i) {
      batch.boundary(static_cast<Eigen::Index>(i), j) =
          i == axis ? (upper ? box.upper[i] : box.lower[i]) : box.lower[i] + box.length(i) * unit(rng);
    }
    batch.boundary(rows - 1, j) = horizon * unit(rng);
    if (periodic) {
      batch.partners.col(j) = batch.boundary.col(j);
      batch.partners(static_cast<Eigen::Index>(axis), j) = upper ? box.lower[axis] : box.upper[axis];
    }
  }
  return batch;
}

TrainReport train(const ProblemSpec& problem, const NetworkConfig& net, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  net.validate();
  if (net.input_dim != problem.dim + 1) {
    throw ConfigError("network input dimension " + std::to_string(net.input_dim) +
                      " does not match problem '" + problem.id + "'");
  }
  return train_from(init_network(net, cfg.seed), problem, cfg, problem.horizon, ResidualContext{},
                    hooks);
}

TrainReport train_from(MlpParams initial, const ProblemSpec& problem, const TrainConfig& cfg,
                       double horizon, const ResidualContext& ctx, const TrainHooks& hooks) {
  cfg.validate();
  if (initial.config().input_dim != problem.dim + 1) {
    throw ConfigError("network input dimension does not match problem '" + problem.id + "'");
  }
  TrainReport report;
  report.params = std::move(initial);
  report.losses.reserve(cfg.epochs);
  report.alphas.reserve(cfg.epochs);
  report.epoch_ms.reserve(cfg.epochs);

  std::mt19937_64 rng(cfg.seed ^ kSamplerSalt);
  Stepper stepper(cfg, report.params.size());
  double alpha = cfg.learning_rate;
  double best = std::numeric_limits<double>::infinity();
  std::size_t tape_peak = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const CollocationBatch batch =
        sample_collocation(problem, cfg.interior_points, cfg.boundary_points, rng, horizon);
    LossEvaluation eval;
    try {
      eval = loss_and_gradient(report.params, problem, batch, cfg.lambda, ctx);
    } catch (const NumericalError& e) {
      throw TrainingDiverged(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")",
                             epoch, report.params);
    }
    bool ok = std::isfinite(eval.terms.total);
    check_finite_vector(eval.gradient, ok);
    if (!ok) {
      throw TrainingDiverged("loss or gradient is not finite at epoch " + std::to_string(epoch),
                             epoch, report.params);
    }
    tape_peak = std::max(tape_peak, eval.tape_bytes);
    const double loss = eval.terms.total;
    const bool stop = cfg.stop_loss > 0.0 && loss < cfg.stop_loss;
    if (!stop) {
      MlpParams before = report.params;
      stepper.apply(report.params.flat(), eval.gradient, alpha);
      if (!report.params.all_finite()) {
        throw TrainingDiverged("parameters became non-finite at epoch " + std::to_string(epoch),
                               epoch, std::move(before));
      }
    }
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    report.losses.push_back(loss);
    report.alphas.push_back(alpha);
    report.epoch_ms.push_back(ms);
    report.epochs_run = epoch + 1;

    if (hooks.on_log && cfg.log_every > 0 && (epoch % cfg.log_every == 0 || epoch + 1 == cfg.epochs)) {
      hooks.on_log(EpochRecord{epoch, loss, alpha, ms});
    }
    if (hooks.on_eval && cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) {
      hooks.on_eval(epoch, report.params);
    }
    if (loss < best) {
      best = loss;
      alpha *= cfg.decay;
    }
    if (stop) break;
  }
  report.peak_memory_bytes =
      report.params.size() * sizeof(double) * 2 + stepper.state_bytes() + tape_peak;
  return report;
}

Eigen::MatrixXd evaluation_points(const ProblemSpec& problem, const EvalSpec& spec) {
  const std::size_t d = problem.dim;
  const auto rows = static_cast<Eigen::Index>(d + 1);
  const Box& box = problem.domain;
  if (d > 2) {
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::MatrixXd pts(rows, static_cast<Eigen::Index>(spec.random_points));
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      for (std::size_t i = 0; i < d; ++i) {
        pts(static_cast<Eigen::Index>(i), j) = box.lower[i] + box.length(i) * unit(rng);
      }
      pts(rows - 1, j) = problem.horizon * unit(rng);
    }
    return pts;
  }
  if (spec.grid_per_axis < 2 || spec.time_slices < 1) {
    throw ConfigError("evaluation grid needs at least 2 nodes per axis and 1 time slice");
  }
  const std::size_t n = spec.grid_per_axis;
  const std::size_t per_slice = d == 1 ? n : n * n;
  Eigen::MatrixXd pts(rows, static_cast<Eigen::Index>(per_slice * spec.time_slices));
  Eigen::Index col = 0;
  for (std::size_t s = 0; s < spec.time_slices; ++s) {
    const double t = spec.time_slices == 1
                         ? problem.horizon
                         : problem.horizon * static_cast<double>(s) /
                               static_cast<double>(spec.time_slices - 1);
    for (std::size_t k = 0; k < per_slice; ++k, ++col) {
      const std::size_t ix = k % n;
      pts(0, col) = box.lower[0] + box.length(0) * static_cast<double>(ix) / static_cast<double>(n - 1);
      if (d == 2) {
        const std::size_t iy = k / n;
        pts(1, col) =
            box.lower[1] + box.length(1) * static_cast<double>(iy) / static_cast<double>(n - 1);
      }
      pts(rows - 1, col) = t;
    }
  }
  return pts;
}

EvalResult evaluate_model(const BatchModel& model, const ProblemSpec& problem,
                          const EvalSpec& spec, const PointReference& reference) {
  if (!reference && !has_exact_solution(problem)) {
    throw ContractViolation("no reference solution available for '" + problem.id + "'");
  }
  const Eigen::MatrixXd pts = evaluation_points(problem, spec);
  const Eigen::RowVectorXd u = model(pts);
  const std::size_t d = problem.dim;
  double se = 0.0;
  double ref2 = 0.0;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < pts.cols(); ++j) {
    const std::span<const double> x(pts.col(j).data(), d);
    const double t = pts(static_cast<Eigen::Index>(d), j);
    const double ref = reference ? reference(x, t) : *exact_solution(problem, x, t);
    const double e = u(j) - ref;
    se += e * e;
    ref2 += ref * ref;
    worst = std::max(worst, std::abs(e));
  }
  EvalResult r;
  r.points = static_cast<std::size_t>(pts.cols());
  const double n = static_cast<double>(r.points);
  r.mse = se / n;
  r.rmse = r.mse / std::max(ref2 / n, 1e-12);
  r.max_abs_error = worst;
  return r;
}

EvalResult evaluate_mse(const MlpParams& params, const ProblemSpec& problem, const EvalSpec& spec,
                        const PointReference& reference) {
  if (params.config().input_dim != problem.dim + 1) {
    throw ConfigError("network input dimension does not match problem '" + problem.id + "'");
  }
  return evaluate_model([&](const Eigen::MatrixXd& pts) { return forward_batch(params, pts); },
                        problem, spec, reference);
}

void write_epoch_csv(const std::filesystem::path& path, const TrainReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "epoch,loss,alpha,wall_ms\n";
  for (std::size_t i = 0; i < report.losses.size(); ++i) {
    out << i << ',' << report.losses[i] << ',' << report.alphas[i] << ',' << report.epoch_ms[i]
        << '\n';
  }
  if (!out) throw IoError("failed while writing " + path.string());
}

}  // namespace hjinr
