#include "hjinr/timemarch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace hjinr {

namespace {

using json = nlohmann::json;

constexpr double kBoundaryTol = 1e-9;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Probe set for seam gaps: a grid in d <= 2, seeded random points otherwise.
Eigen::MatrixXd seam_probe(const ProblemSpec& problem) {
  EvalSpec spec;
  spec.grid_per_axis = 101;
  spec.time_slices = 1;
  spec.random_points = 2000;
  spec.seed = 17;
  return evaluation_points(problem, spec);
}

double seam_gap(const ProblemSpec& problem, const MlpParams& live, const PriorLevel& prev) {
  Eigen::MatrixXd pts = seam_probe(problem);
  const auto d = static_cast<Eigen::Index>(problem.dim);
  pts.row(d).setZero();
  const Eigen::RowVectorXd now = forward_batch(live, pts);
  Eigen::RowVectorXd before(pts.cols());
  if (prev.network == nullptr) {
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      before(j) = initial_value(problem, std::span<const double>(pts.col(j).data(), problem.dim));
    }
  } else {
    pts.row(d).setConstant(prev.time);
    before = forward_batch(*prev.network, pts);
  }
  return (now - before).cwiseAbs().maxCoeff();
}

void write_manifest(const std::filesystem::path& dir, const ProblemSpec& problem, double dt,
                    std::size_t steps, std::size_t done) {
  json j;
  j["problem"] = problem.id;
  j["dt"] = dt;
  j["steps"] = steps;
  j["horizon"] = problem.horizon;
  j["completed"] = done;
  json list = json::array();
  for (std::size_t k = 1; k <= done; ++k) {
    list.push_back(step_path({}, k).string());
  }
  j["checkpoints"] = list;
  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

MarchResult run_intervals(const ProblemSpec& problem, const MarchConfig& cfg,
                          std::vector<MlpParams> done, MlpParams initial,
                          const MarchHooks& hooks) {
  const std::size_t n = cfg.steps(problem.horizon);
  const bool persist = !cfg.checkpoint_dir.empty();
  if (persist) {
    std::filesystem::create_directories(cfg.checkpoint_dir);
  }
  MarchResult result;
  std::vector<std::filesystem::path> written;
  for (std::size_t k = 1; k <= done.size(); ++k) {
    if (persist) written.push_back(step_path(cfg.checkpoint_dir, k));
  }
  for (std::size_t k = done.size() + 1; k <= n; ++k) {
    TrainConfig tc = cfg.train;
    tc.seed = interval_seed(cfg.train.seed, k);
    PriorLevel prior;
    if (k > 1) {
      prior.network = &done.back();
      prior.time = cfg.dt;
    }
    ResidualContext ctx{prior, static_cast<double>(k - 1) * cfg.dt};
    // Interval 1 starts from a fresh network, later ones from u^{k-1}.
    MlpParams start = done.empty() ? initial : done.back();
    TrainReport rep;
    try {
      rep = train_from(std::move(start), problem, tc, cfg.dt, ctx, hooks.train);
    } catch (const TrainingDiverged& e) {
      throw MarchDiverged("interval " + std::to_string(k) + ": " + e.what(), k, written);
    }
    IntervalReport info;
    info.k = k;
    info.epochs = rep.epochs_run;
    info.final_loss = rep.losses.empty() ? 0.0 : rep.losses.back();
    info.sec_per_epoch = rep.sec_per_epoch();
    if (cfg.train.stop_loss > 0.0) info.epochs_to_threshold = rep.epochs_to(cfg.train.stop_loss);
    info.seam_gap = seam_gap(problem, rep.params, prior);
    std::mt19937_64 rng(splitmix64(tc.seed));
    const CollocationBatch probe =
        sample_collocation(problem, std::max<std::size_t>(tc.interior_points, 1), 0, rng, cfg.dt);
    const Eigen::RowVectorXd s = residuals(rep.params, problem, probe.interior, ctx);
    info.residual_rms = std::sqrt(s.squaredNorm() / static_cast<double>(s.size()));

    if (persist) {
      info.checkpoint = step_path(cfg.checkpoint_dir, k);
      CheckpointMeta meta{rep.epochs_run, info.final_loss, cfg.train.seed, problem.id};
      save_checkpoint(info.checkpoint, rep.params, meta);
      written.push_back(info.checkpoint);
      write_manifest(cfg.checkpoint_dir, problem, cfg.dt, n, k);
    }
    done.push_back(std::move(rep.params));
    if (hooks.on_interval) hooks.on_interval(info);
    result.intervals.push_back(std::move(info));
  }
  if (persist) result.manifest = cfg.checkpoint_dir / "manifest.json";
  result.solution = MarchedSolution(std::move(done), cfg.dt);
  return result;
}

void check_problem(const ProblemSpec& problem, const MarchConfig& cfg) {
  if (!problem.state_dependent && !cfg.force) {
    throw ConfigError("problem '" + problem.id +
                      "' is state-independent; set march.force to march it anyway");
  }
}

}  // namespace

std::size_t MarchConfig::steps(double horizon) const {
  if (!(dt > 0.0)) throw ConfigError("march.dt must be positive");
  const double q = horizon / dt;
  const double n = std::round(q);
  if (n < 1.0 || std::abs(n * dt - horizon) > 1e-12 * std::max(1.0, horizon)) {
    throw ConfigError("march.dt = " + std::to_string(dt) + " does not divide the horizon " +
                      std::to_string(horizon));
  }
  return static_cast<std::size_t>(n);
}

std::uint64_t interval_seed(std::uint64_t seed, std::size_t k) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(k)));
}

double residual_step(const PointValue& live, const PointGradient& live_grad, const PointValue& prev,
                     double dt, const ProblemSpec& problem, std::span<const double> x, double tau) {
  if (tau < 0.0 || tau > dt + kBoundaryTol) {
    throw ContractViolation("residual_step: tau outside [0, dt]");
  }
  const std::size_t d = problem.dim;
  if (x.size() != d) throw ConfigError("residual_step: point dimension mismatch");
  const std::vector<double> p = live_grad(x, tau);
  const std::vector<double> gp = hamiltonian_grad_p(problem, x, p);
  const double h = hamiltonian_value(problem, x, p);
  std::vector<double> y(d);
  double dot = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    dot += p[i] * gp[i];
    y[i] = x[i] - tau * gp[i];
  }
  const double s = live(x, tau) - tau * dot + tau * h - prev(y, dt);
  if (!std::isfinite(s)) throw NumericalError("residual_step is not finite");
  return s;
}

double residual_step(const MlpParams& live, const PriorLevel& prev, const ProblemSpec& problem,
                     std::span<const double> x, double tau) {
  if (x.size() != problem.dim) throw ConfigError("residual_step: point dimension mismatch");
  Eigen::MatrixXd pt(static_cast<Eigen::Index>(problem.dim + 1), 1);
  for (std::size_t i = 0; i < x.size(); ++i) pt(static_cast<Eigen::Index>(i), 0) = x[i];
  pt(static_cast<Eigen::Index>(problem.dim), 0) = tau;
  return residuals(live, problem, pt, ResidualContext{prev, 0.0})(0);
}

MarchedSolution::MarchedSolution(std::vector<MlpParams> steps, double dt)
    : steps_(std::move(steps)), dt_(dt) {
  if (steps_.empty()) throw ContractViolation("marched solution needs at least one interval");
}

std::pair<std::size_t, double> MarchedSolution::locate(double t) const {
  const std::size_t n = steps_.size();
  const double q = t / dt_;
  std::size_t k = static_cast<std::size_t>(std::max(0.0, std::floor(q + kBoundaryTol))) + 1;
  k = std::min(k, n);
  const double tau = std::clamp(t - static_cast<double>(k - 1) * dt_, 0.0, dt_);
  return {k, tau};
}

double MarchedSolution::value(std::span<const double> x, double t) const {
  const auto [k, tau] = locate(t);
  return forward(steps_[k - 1], x, tau);
}

Eigen::RowVectorXd MarchedSolution::values(const Eigen::MatrixXd& points) const {
  const Eigen::Index tr = points.rows() - 1;
  std::vector<std::vector<Eigen::Index>> groups(steps_.size());
  std::vector<double> taus(static_cast<std::size_t>(points.cols()));
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    const auto [k, tau] = locate(points(tr, j));
    groups[k - 1].push_back(j);
    taus[static_cast<std::size_t>(j)] = tau;
  }
  Eigen::RowVectorXd out(points.cols());
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (groups[k].empty()) continue;
    Eigen::MatrixXd sub(points.rows(), static_cast<Eigen::Index>(groups[k].size()));
    for (std::size_t c = 0; c < groups[k].size(); ++c) {
      const Eigen::Index j = groups[k][c];
      sub.col(static_cast<Eigen::Index>(c)) = points.col(j);
      sub(tr, static_cast<Eigen::Index>(c)) = taus[static_cast<std::size_t>(j)];
    }
    const Eigen::RowVectorXd v = forward_batch(steps_[k], sub);
    for (std::size_t c = 0; c < groups[k].size(); ++c) out(groups[k][c]) = v(static_cast<Eigen::Index>(c));
  }
  return out;
}

std::filesystem::path step_path(const std::filesystem::path& dir, std::size_t k) {
  return dir / ("step_" + std::to_string(k) + ".hjin");
}

MarchResult march(const ProblemSpec& problem, const NetworkConfig& net, const MarchConfig& cfg,
                  const MarchHooks& hooks) {
  check_problem(problem, cfg);
  net.validate();
  if (net.input_dim != problem.dim + 1) {
    throw ConfigError("network input dimension does not match problem '" + problem.id + "'");
  }
  cfg.steps(problem.horizon);
  cfg.train.validate();
  return run_intervals(problem, cfg, {}, init_network(net, cfg.train.seed), hooks);
}

MarchResult resume_march(const ProblemSpec& problem, const MarchConfig& cfg, std::size_t k,
                         const MarchHooks& hooks) {
  check_problem(problem, cfg);
  if (cfg.checkpoint_dir.empty()) throw ConfigError("resume needs a checkpoint directory");
  const std::size_t n = cfg.steps(problem.horizon);
  if (k < 1 || k > n) throw ConfigError("resume step out of range");
  std::vector<MlpParams> done;
  for (std::size_t i = 1; i <= k; ++i) {
    auto [params, meta] = load_checkpoint(step_path(cfg.checkpoint_dir, i));
    if (params.config().input_dim != problem.dim + 1) {
      throw ShapeMismatch("checkpoint " + std::to_string(i) + " does not match problem '" +
                          problem.id + "'");
    }
    done.push_back(std::move(params));
  }
  return run_intervals(problem, cfg, std::move(done), MlpParams{}, hooks);
}

MarchedSolution load_march(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest " + path.string() + ": " + e.what());
  }
  std::vector<MlpParams> steps;
  for (const auto& name : j.at("checkpoints")) {
    steps.push_back(load_checkpoint(dir / name.get<std::string>()).first);
  }
  return MarchedSolution(std::move(steps), j.at("dt").get<double>());
}

}  // namespace hjinr
