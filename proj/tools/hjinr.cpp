#include <iostream>

#include <CLI11.hpp>

#include "hjinr/app.hpp"
#include "hjinr/runtime.hpp"

int main(int argc, char** argv) {
  hjinr::tune_allocator();
  CLI::App app{"Neural Hamilton-Jacobi solver"};
  app.require_subcommand(1);

  hjinr::CommandOptions train_opts;
  std::uint64_t seed = 0;
  std::string out;
  auto* train = app.add_subcommand("train", "train a network on one problem");
  train->add_option("--config", train_opts.config, "run configuration (JSON)")->required();
  auto* train_seed = train->add_option("--seed", seed, "override train.seed");
  auto* train_out = train->add_option("--out", out, "override the output directory");

  hjinr::CommandOptions march_opts;
  auto* march = app.add_subcommand("march", "time-march a state-dependent problem");
  march->add_option("--config", march_opts.config, "run configuration (JSON)")->required();
  auto* march_seed = march->add_option("--seed", seed, "override train.seed");
  auto* march_out = march->add_option("--out", out, "override the output directory");
  std::size_t resume = 0;
  auto* march_resume = march->add_option("--resume", resume, "continue after step_K.hjin in the output directory");

  hjinr::EvalOptions eval_opts;
  std::string eval_problem;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint or a march directory");
  eval->add_option("--checkpoint", eval_opts.checkpoint, ".hjin file or march directory")->required();
  auto* eval_prob = eval->add_option("--problem", eval_problem, "problem id (default: stored id)");
  eval->add_option("--times", eval_opts.times, "slice times")->delimiter(',');
  eval->add_option("--nodes", eval_opts.slice_nodes, "slice nodes per axis");
  eval->add_option("--out", eval_opts.out, "directory for slice CSVs");

  hjinr::OracleOptions oracle_opts;
  std::vector<std::string> points;
  std::size_t grid = 0;
  double horizon = 0.0;
  std::string oracle_out;
  auto* oracle = app.add_subcommand("oracle", "reference values (Hopf-Lax points or Lax-Friedrichs grid)");
  oracle->add_option("--problem", oracle_opts.problem, "problem id")->required();
  oracle->add_option("--point", points, "x1,...,xd,t (repeatable)");
  auto* oracle_grid = oracle->add_option("--grid", grid, "Lax-Friedrichs nodes per axis");
  auto* oracle_horizon = oracle->add_option("--horizon", horizon, "final time for the grid");
  oracle->add_option("--slices", oracle_opts.slices, "output time slices");
  auto* oracle_o = oracle->add_option("--out", oracle_out, "grid CSV path");

  hjinr::TableOptions table_opts;
  std::string table_out;
  auto* table = app.add_subcommand("table", "run configs and/or collect runs into a results table");
  table->add_option("--config", table_opts.configs, "configs to run first");
  table->add_option("--run", table_opts.runs, "existing run directories");
  table->add_option("--layout", table_opts.layout, "table1 or table2");
  auto* table_seed = table->add_option("--seed", seed, "override train.seed");
  auto* table_o = table->add_option("--out", table_out, "base path for .md and .csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hjinr::kExitConfig;
  }

  if (*train) {
    if (*train_seed) train_opts.seed = seed;
    if (*train_out) train_opts.out = out;
    return hjinr::cmd_train(train_opts, std::cerr);
  }
  if (*march) {
    if (*march_seed) march_opts.seed = seed;
    if (*march_out) march_opts.out = out;
    if (*march_resume) march_opts.resume = resume;
    return hjinr::cmd_march(march_opts, std::cerr);
  }
  if (*eval) {
    if (*eval_prob) eval_opts.problem = eval_problem;
    return hjinr::cmd_eval(eval_opts, std::cout, std::cerr);
  }
  if (*oracle) {
    for (const std::string& p : points) {
      std::vector<double> v;
      std::size_t pos = 0;
      try {
        while (pos <= p.size()) {
          const std::size_t comma = p.find(',', pos);
          v.push_back(std::stod(p.substr(pos, comma - pos)));
          if (comma == std::string::npos) break;
          pos = comma + 1;
        }
      } catch (const std::exception&) {
        std::cerr << "error: cannot parse point '" << p << "'\n";
        return hjinr::kExitConfig;
      }
      oracle_opts.points.push_back(std::move(v));
    }
    if (*oracle_grid) oracle_opts.grid_nodes = grid;
    if (*oracle_horizon) oracle_opts.horizon = horizon;
    if (*oracle_o) oracle_opts.out = oracle_out;
    return hjinr::cmd_oracle(oracle_opts, std::cout, std::cerr);
  }
  if (*table_seed) table_opts.seed = seed;
  if (*table_o) table_opts.out = table_out;
  return hjinr::cmd_table(table_opts, std::cout, std::cerr);
}
