#include "hjinr/app.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "hjinr/error.hpp"
#include "hjinr/oracle.hpp"

namespace hjinr {

namespace {

using json = nlohmann::json;

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) {
      throw ConfigError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& into, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + (where.empty() ? std::string(key) : where + "." + key) + "'");
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::optional<EvalResult> try_evaluate(const BatchModel& model, const ProblemSpec& problem,
                                       const EvalSpec& spec) {
  if (!has_exact_solution(problem)) return std::nullopt;
  return evaluate_model(model, problem, spec);
}

void fill_errors(Metrics& m, const std::optional<EvalResult>& e) {
  if (e) {
    m.mse = e->mse;
    m.rmse = e->rmse;
  }
}

std::string format_value(const std::optional<double>& v, int precision = 3) {
  if (!v) return "-";
  std::ostringstream os;
  os << std::scientific << std::setprecision(precision) << *v;
  return os.str();
}

// Slice grid over the first two axes; remaining coordinates sit at the box
// centre.
Eigen::MatrixXd slice_points(const ProblemSpec& problem, std::size_t nodes, double t) {
  const std::size_t d = problem.dim;
  const Box& box = problem.domain;
  const std::size_t count = d == 1 ? nodes : nodes * nodes;
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(d + 1), static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    for (std::size_t i = 0; i < d; ++i) {
      pts(static_cast<Eigen::Index>(i), c) = 0.5 * (box.lower[i] + box.upper[i]);
    }
    pts(0, c) = box.lower[0] + box.length(0) * static_cast<double>(k % nodes) / static_cast<double>(nodes - 1);
    if (d >= 2) {
      pts(1, c) = box.lower[1] + box.length(1) * static_cast<double>(k / nodes) / static_cast<double>(nodes - 1);
    }
    pts(static_cast<Eigen::Index>(d), c) = t;
  }
  return pts;
}

// Linear zero crossings along grid edges of a nodes x nodes slice.
std::vector<std::array<double, 2>> zero_crossings(const Eigen::MatrixXd& pts, const Eigen::RowVectorXd& u,
                                                  std::size_t nodes) {
  std::vector<std::array<double, 2>> out;
  auto add = [&](Eigen::Index a, Eigen::Index b) {
    const double ua = u(a);
    const double ub = u(b);
    if ((ua < 0.0) == (ub < 0.0)) return;
    const double w = ua / (ua - ub);
    out.push_back({pts(0, a) + w * (pts(0, b) - pts(0, a)), pts(1, a) + w * (pts(1, b) - pts(1, a))});
  };
  for (std::size_t j = 0; j < nodes; ++j) {
    for (std::size_t i = 0; i < nodes; ++i) {
      const auto k = static_cast<Eigen::Index>(j * nodes + i);
      if (i + 1 < nodes) add(k, k + 1);
      if (j + 1 < nodes) add(k, k + static_cast<Eigen::Index>(nodes));
    }
  }
  return out;
}

template <class Fn>
int guarded(std::ostream& log, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ShapeMismatch& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UnsupportedOracle& e) {
    log << "error: " << e.what() << '\n';
    return kExitUnsupported;
  } catch (const NumericalError& e) {
    log << "error: " << e.what() << '\n';
    return kExitAborted;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

RunConfig prepare(const CommandOptions& opts) {
  RunConfig cfg = load_run_config(opts.config);
  if (opts.seed) cfg.train.seed = *opts.seed;
  if (opts.out) cfg.out = *opts.out;
  return cfg;
}

TrainHooks log_hooks(std::ostream& log) {
  TrainHooks hooks;
  hooks.on_log = [&log](const EpochRecord& r) {
    log << "epoch " << r.epoch << " loss " << std::scientific << std::setprecision(4) << r.loss
        << " alpha " << r.alpha << std::defaultfloat << '\n';
  };
  return hooks;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  check_keys(j, "", {"problem", "dim", "boundary", "net", "train", "march", "eval", "out"});
  RunConfig c;
  read(j, "problem", c.problem, "");
  if (j.contains("dim")) {
    std::size_t d = 0;
    read(j, "dim", d, "");
    c.dim = d;
  }
  if (j.contains("boundary")) {
    std::string b;
    read(j, "boundary", b, "");
    c.boundary = parse_boundary(b);
  }
  if (j.contains("net")) {
    const json& n = j.at("net");
    check_keys(n, "net", {"depth", "width", "beta"});
    read(n, "depth", c.depth, "net");
    read(n, "width", c.width, "net");
    read(n, "beta", c.beta, "net");
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train", {"epochs", "M", "M_b", "lr", "gamma", "lambda", "seed", "optimizer",
                            "log_every", "stop_loss"});
    read(t, "epochs", c.train.epochs, "train");
    read(t, "M", c.train.interior_points, "train");
    read(t, "M_b", c.train.boundary_points, "train");
    read(t, "lr", c.train.learning_rate, "train");
    read(t, "gamma", c.train.decay, "train");
    read(t, "lambda", c.train.lambda, "train");
    read(t, "seed", c.train.seed, "train");
    read(t, "log_every", c.train.log_every, "train");
    read(t, "stop_loss", c.train.stop_loss, "train");
    if (t.contains("optimizer")) {
      std::string o;
      read(t, "optimizer", o, "train");
      c.train.optimizer = parse_optimizer(o);
    }
  }
  if (j.contains("march")) {
    const json& m = j.at("march");
    check_keys(m, "march", {"dt", "force"});
    MarchSettings s;
    read(m, "dt", s.dt, "march");
    read(m, "force", s.force, "march");
    c.march = s;
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_keys(e, "eval", {"grid", "times", "random_points", "seed"});
    read(e, "grid", c.eval.grid_per_axis, "eval");
    read(e, "times", c.eval.time_slices, "eval");
    read(e, "random_points", c.eval.random_points, "eval");
    read(e, "seed", c.eval.seed, "eval");
  }
  if (j.contains("out")) {
    std::string o;
    read(j, "out", o, "");
    c.out = o;
  }
  c.train.validate();
  return c;
}

json RunConfig::to_json() const {
  json j;
  j["problem"] = problem;
  if (dim) j["dim"] = *dim;
  if (boundary) j["boundary"] = std::string(boundary_name(*boundary));
  j["net"] = {{"depth", depth}, {"width", width}, {"beta", beta}};
  j["train"] = {{"epochs", train.epochs},
                {"M", train.interior_points},
                {"M_b", train.boundary_points},
                {"lr", train.learning_rate},
                {"gamma", train.decay},
                {"lambda", train.lambda},
                {"seed", train.seed},
                {"optimizer", std::string(optimizer_name(train.optimizer))},
                {"log_every", train.log_every},
                {"stop_loss", train.stop_loss}};
  if (march) j["march"] = {{"dt", march->dt}, {"force", march->force}};
  j["eval"] = {{"grid", eval.grid_per_axis},
               {"times", eval.time_slices},
               {"random_points", eval.random_points},
               {"seed", eval.seed}};
  j["out"] = out.string();
  return j;
}

ProblemSpec RunConfig::resolve_problem() const {
  ProblemSpec p = make_problem(dim ? problem + "-d" + std::to_string(*dim) : problem);
  if (boundary) {
    p.boundary = *boundary;
    if (p.boundary == BoundaryKind::Dirichlet && !has_exact_solution(p)) {
      throw ConfigError("problem '" + p.id + "' has no closed form to use as Dirichlet data");
    }
  }
  return p;
}

NetworkConfig RunConfig::network(const ProblemSpec& problem) const {
  NetworkConfig n = NetworkConfig::for_dimension(problem.dim, depth, width, beta);
  n.validate();
  return n;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return RunConfig::from_json(read_json(path));
}

json Metrics::to_json() const {
  json j;
  j["problem"] = problem;
  j["d"] = d;
  j["seed"] = seed;
  j["epochs"] = epochs;
  j["final_loss"] = final_loss;
  j["mse"] = mse ? json(*mse) : json(nullptr);
  j["rmse"] = rmse ? json(*rmse) : json(nullptr);
  j["sec_per_epoch"] = sec_per_epoch;
  j["param_count"] = param_count;
  return j;
}

Metrics Metrics::from_json(const json& j) {
  Metrics m;
  m.problem = j.at("problem").get<std::string>();
  m.d = j.at("d").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.epochs = j.at("epochs").get<std::size_t>();
  m.final_loss = j.at("final_loss").get<double>();
  if (!j.at("mse").is_null()) m.mse = j.at("mse").get<double>();
  if (!j.at("rmse").is_null()) m.rmse = j.at("rmse").get<double>();
  m.sec_per_epoch = j.at("sec_per_epoch").get<double>();
  m.param_count = j.at("param_count").get<std::size_t>();
  return m;
}

int cmd_train(const CommandOptions& opts, std::ostream& log) {
  return guarded(log, [&] {
    const RunConfig cfg = prepare(opts);
    const ProblemSpec problem = cfg.resolve_problem();
    const NetworkConfig net = cfg.network(problem);
    std::filesystem::create_directories(cfg.out);
    write_json(cfg.out / "config.json", cfg.to_json());
    TrainReport report;
    try {
      report = train(problem, net, cfg.train, log_hooks(log));
    } catch (const TrainingDiverged& e) {
      save_checkpoint(cfg.out / "last_good.hjin", e.last_good(),
                      CheckpointMeta{e.epoch(), 0.0, cfg.train.seed, problem.id});
      log << "training aborted at epoch " << e.epoch() << "; last good parameters in "
          << (cfg.out / "last_good.hjin").string() << '\n';
      throw;
    }
    const double final_loss = report.losses.empty() ? 0.0 : report.losses.back();
    save_checkpoint(cfg.out / "model.hjin", report.params,
                    CheckpointMeta{report.epochs_run, final_loss, cfg.train.seed, problem.id});
    write_epoch_csv(cfg.out / "epochs.csv", report);

    Metrics m;
    m.problem = problem.id;
    m.d = problem.dim;
    m.seed = cfg.train.seed;
    m.epochs = report.epochs_run;
    m.final_loss = final_loss;
    m.sec_per_epoch = report.sec_per_epoch();
    m.param_count = net.param_count();
    fill_errors(m, try_evaluate(
                       [&](const Eigen::MatrixXd& pts) { return forward_batch(report.params, pts); },
                       problem, cfg.eval));
    write_json(cfg.out / "metrics.json", m.to_json());
    write_json(cfg.out / "report.json", {{"peak_memory_bytes", report.peak_memory_bytes},
                                         {"optimizer", optimizer_name(cfg.train.optimizer)}});
    log << "trained " << problem.id << ": loss " << final_loss << ", mse " << format_value(m.mse)
        << '\n';
    return kExitOk;
  });
}

int cmd_march(const CommandOptions& opts, std::ostream& log) {
  return guarded(log, [&] {
    const RunConfig cfg = prepare(opts);
    const ProblemSpec problem = cfg.resolve_problem();
    const NetworkConfig net = cfg.network(problem);
    if (!cfg.march) throw ConfigError("missing 'march' section");
    MarchConfig mc;
    mc.dt = cfg.march->dt;
    mc.force = cfg.march->force;
    mc.train = cfg.train;
    mc.checkpoint_dir = cfg.out;
    mc.steps(problem.horizon);
    std::filesystem::create_directories(cfg.out);
    write_json(cfg.out / "config.json", cfg.to_json());

    MarchHooks hooks;
    hooks.train = log_hooks(log);
    hooks.on_interval = [&log](const IntervalReport& r) {
      log << "interval " << r.k << ": " << r.epochs << " epochs, loss " << r.final_loss
          << ", seam gap " << r.seam_gap << '\n';
    };
    MarchResult result;
    try {
      result = opts.resume ? resume_march(problem, mc, *opts.resume, hooks) : march(problem, net, mc, hooks);
    } catch (const MarchDiverged& e) {
      log << "march aborted in interval " << e.interval() << "; " << e.completed().size()
          << " checkpoints kept\n";
      throw;
    }
    std::ofstream csv(cfg.out / "intervals.csv");
    csv.precision(17);
    csv << "k,epochs,final_loss,seam_gap,residual_rms,sec_per_epoch\n";
    std::size_t epochs = 0;
    double secs = 0.0;
    for (const IntervalReport& r : result.intervals) {
      csv << r.k << ',' << r.epochs << ',' << r.final_loss << ',' << r.seam_gap << ','
          << r.residual_rms << ',' << r.sec_per_epoch << '\n';
      epochs += r.epochs;
      secs += r.sec_per_epoch * static_cast<double>(r.epochs);
    }
    Metrics m;
    m.problem = problem.id;
    m.d = problem.dim;
    m.seed = cfg.train.seed;
    m.epochs = epochs;
    m.final_loss = result.intervals.empty() ? 0.0 : result.intervals.back().final_loss;
    m.sec_per_epoch = epochs == 0 ? 0.0 : secs / static_cast<double>(epochs);
    m.param_count = net.param_count();
    const MarchedSolution& sol = result.solution;
    fill_errors(m, try_evaluate([&](const Eigen::MatrixXd& pts) { return sol.values(pts); },
                                problem, cfg.eval));
    write_json(cfg.out / "metrics.json", m.to_json());
    log << "marched " << problem.id << " over " << sol.steps() << " intervals, mse "
        << format_value(m.mse) << '\n';
    return kExitOk;
  });
}

int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& log) {
  return guarded(log, [&] {
    const bool marched = std::filesystem::is_directory(opts.checkpoint);
    std::optional<MarchedSolution> sol;
    MlpParams params;
    std::string stored_id;
    if (marched) {
      sol = load_march(opts.checkpoint);
      const json manifest = read_json(opts.checkpoint / "manifest.json");
      stored_id = manifest.at("problem").get<std::string>();
      params = sol->step(1);
    } else {
      auto [p, meta] = load_checkpoint(opts.checkpoint);
      params = std::move(p);
      stored_id = meta.problem_id;
    }
    const ProblemSpec problem = make_problem(opts.problem.value_or(stored_id));
    if (params.config().input_dim != problem.dim + 1) {
      throw ConfigError("checkpoint takes " + std::to_string(params.config().input_dim - 1) +
                        " spatial inputs but '" + problem.id + "' has d = " + std::to_string(problem.dim));
    }
    const BatchModel model = [&](const Eigen::MatrixXd& pts) {
      return sol ? sol->values(pts) : forward_batch(params, pts);
    };
    json result;
    result["problem"] = problem.id;
    if (const auto e = try_evaluate(model, problem, opts.eval)) {
      result["mse"] = e->mse;
      result["rmse"] = e->rmse;
      result["max_abs_error"] = e->max_abs_error;
    } else {
      log << "warning: no reference solution for " << problem.id << "; MSE skipped\n";
      result["mse"] = nullptr;
      result["rmse"] = nullptr;
    }
    if (opts.slice_nodes < 2) throw ConfigError("slice grid needs at least 2 nodes");
    std::filesystem::create_directories(opts.out);
    json files = json::array();
    for (std::size_t s = 0; s < opts.times.size(); ++s) {
      const double t = opts.times[s];
      const Eigen::MatrixXd pts = slice_points(problem, opts.slice_nodes, t);
      const Eigen::RowVectorXd u = model(pts);
      const auto path = opts.out / ("slice_" + std::to_string(s) + ".csv");
      std::ofstream csv(path);
      if (!csv) throw IoError("cannot write " + path.string());
      csv.precision(17);
      csv << (problem.dim == 1 ? "x,t,u\n" : "x,y,t,u\n");
      for (Eigen::Index j = 0; j < pts.cols(); ++j) {
        csv << pts(0, j) << ',';
        if (problem.dim >= 2) csv << pts(1, j) << ',';
        csv << t << ',' << u(j) << '\n';
      }
      files.push_back(path.filename().string());
      if (problem.dim >= 2) {
        const auto level = opts.out / ("level_" + std::to_string(s) + ".csv");
        std::ofstream lv(level);
        lv.precision(17);
        lv << "x,y,t\n";
        for (const auto& p : zero_crossings(pts, u, opts.slice_nodes)) {
          lv << p[0] << ',' << p[1] << ',' << t << '\n';
        }
      }
    }
    result["slices"] = files;
    out << result.dump(2) << '\n';
    write_json(opts.out / "eval.json", result);
    return kExitOk;
  });
}

int cmd_oracle(const OracleOptions& opts, std::ostream& out, std::ostream& log) {
  return guarded(log, [&] {
    const ProblemSpec problem = make_problem(opts.problem);
    if (opts.grid_nodes) {
      GridSpec spec;
      spec.nodes = *opts.grid_nodes;
      spec.horizon = opts.horizon;
      spec.slices = opts.slices;
      const GridSolution grid = lax_friedrichs_solve(problem, spec);
      if (opts.out) {
        write_grid_csv(*opts.out, grid);
        log << "wrote " << grid.times.size() << " slices to " << opts.out->string() << '\n';
      } else {
        const auto tmp = std::filesystem::temp_directory_path() / "hjinr_grid.csv";
        write_grid_csv(tmp, grid);
        std::ifstream in(tmp);
        out << in.rdbuf();
        std::filesystem::remove(tmp);
      }
    }
    out.precision(17);
    for (const auto& pt : opts.points) {
      if (pt.size() != problem.dim + 1) {
        throw ConfigError("oracle point needs " + std::to_string(problem.dim + 1) + " values (x..., t)");
      }
      const std::span<const double> x(pt.data(), problem.dim);
      const double t = pt.back();
      const double v = t > 0.0 ? hopf_lax_eval(problem, x, t) : initial_value(problem, x);
      out << v << '\n';
    }
    return kExitOk;
  });
}

int cmd_table(const TableOptions& opts, std::ostream& out, std::ostream& log) {
  return guarded(log, [&] {
    if (opts.layout != "table1" && opts.layout != "table2") {
      throw ConfigError("unknown table layout '" + opts.layout + "'");
    }
    std::vector<std::filesystem::path> runs = opts.runs;
    for (const auto& path : opts.configs) {
      const RunConfig cfg = load_run_config(path);
      CommandOptions co{path, opts.seed, std::nullopt, std::nullopt};
      const int rc = cfg.march ? cmd_march(co, log) : cmd_train(co, log);
      if (rc != kExitOk) return rc;
      runs.push_back(cfg.out);
    }
    std::ostringstream md;
    std::ostringstream csv;
    if (opts.layout == "table1") {
      md << "| Problem | d | MSE | Time/epoch (s) | Memory (MB) | Params |\n";
      md << "|---|---|---|---|---|---|\n";
      csv << "problem,d,mse,sec_per_epoch,memory_mb,param_count\n";
    } else {
      md << "| Problem | dt | MSE | RMSE | Epochs |\n";
      md << "|---|---|---|---|---|\n";
      csv << "problem,dt,mse,rmse,epochs\n";
    }
    for (const auto& dir : runs) {
      const Metrics m = Metrics::from_json(read_json(dir / "metrics.json"));
      if (opts.layout == "table1") {
        double mem = 0.0;
        if (std::filesystem::exists(dir / "report.json")) {
          mem = read_json(dir / "report.json").at("peak_memory_bytes").get<double>() / 1e6;
        }
        std::ostringstream secs;
        secs << std::fixed << std::setprecision(5) << m.sec_per_epoch;
        std::ostringstream mb;
        mb << std::fixed << std::setprecision(2) << mem;
        md << "| " << m.problem << " | " << m.d << " | " << format_value(m.mse) << " | "
           << secs.str() << " | " << mb.str() << " | " << m.param_count << " |\n";
        csv << m.problem << ',' << m.d << ',' << (m.mse ? std::to_string(*m.mse) : "") << ','
            << m.sec_per_epoch << ',' << mem << ',' << m.param_count << '\n';
      } else {
        double dt = 0.0;
        if (std::filesystem::exists(dir / "manifest.json")) {
          dt = read_json(dir / "manifest.json").at("dt").get<double>();
        }
        md << "| " << m.problem << " | " << dt << " | " << format_value(m.mse) << " | "
           << format_value(m.rmse) << " | " << m.epochs << " |\n";
        csv << m.problem << ',' << dt << ',' << (m.mse ? std::to_string(*m.mse) : "") << ','
            << (m.rmse ? std::to_string(*m.rmse) : "") << ',' << m.epochs << '\n';
      }
    }
    out << md.str();
    if (opts.out) {
      std::ofstream(opts.out->string() + ".md") << md.str();
      std::ofstream(opts.out->string() + ".csv") << csv.str();
    }
    return kExitOk;
  });
}

}  // namespace hjinr
