#pragma once

// Subcommands behind the hjinr executable. Each returns a process exit code.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hjinr/network.hpp"
#include "hjinr/problems.hpp"
#include "hjinr/timemarch.hpp"
#include "hjinr/trainer.hpp"

namespace hjinr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAborted = 3;
inline constexpr int kExitUnsupported = 4;

struct MarchSettings {
  double dt = 0.1;
  bool force = false;
};

/// Parsed run configuration (JSON). Unknown keys are rejected.
struct RunConfig {
  std::string problem = "burgers";
  std::optional<std::size_t> dim;
  std::optional<BoundaryKind> boundary;
  std::size_t depth = 5;
  std::size_t width = 64;
  double beta = 100.0;
  TrainConfig train;
  std::optional<MarchSettings> march;
  EvalSpec eval;
  std::filesystem::path out = "runs/default";

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  ProblemSpec resolve_problem() const;
  NetworkConfig network(const ProblemSpec& problem) const;
};

RunConfig load_run_config(const std::filesystem::path& path);

/// Fixed schema: problem, d, seed, epochs, final_loss, mse, rmse,
/// sec_per_epoch, param_count. mse and rmse are null without a reference.
struct Metrics {
  std::string problem;
  std::size_t d = 0;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double final_loss = 0.0;
  std::optional<double> mse;
  std::optional<double> rmse;
  double sec_per_epoch = 0.0;
  std::size_t param_count = 0;

  nlohmann::json to_json() const;
  static Metrics from_json(const nlohmann::json& j);
};

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::size_t> resume;  // march only: continue after step_<k>.hjin
};

/// Writes model.hjin, epochs.csv and metrics.json into the output directory.
int cmd_train(const CommandOptions& opts, std::ostream& log);

/// Writes step_<k>.hjin, manifest.json, intervals.csv and metrics.json. With
/// `resume` set, intervals 1..k are loaded from the output directory and only
/// the remaining ones are trained and listed in intervals.csv.
int cmd_march(const CommandOptions& opts, std::ostream& log);

struct EvalOptions {
  std::filesystem::path checkpoint;  // a .hjin file or a march directory
  std::optional<std::string> problem;  // defaults to the id stored in the checkpoint
  std::vector<double> times;
  std::size_t slice_nodes = 101;
  std::filesystem::path out = ".";
  EvalSpec eval;
};

/// Prints MSE/RMSE when a reference exists and writes slice_<i>.csv
/// (x[,y],t,u) plus level_<i>.csv zero-level-set points for d >= 2.
int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& log);

struct OracleOptions {
  std::string problem;
  std::vector<std::vector<double>> points;  // (x_1, ..., x_d, t)
  std::optional<std::size_t> grid_nodes;
  std::optional<double> horizon;
  std::size_t slices = 11;
  std::optional<std::filesystem::path> out;  // grid CSV path
};

/// Hopf-Lax values for points, Lax-Friedrichs CSV for a grid request.
int cmd_oracle(const OracleOptions& opts, std::ostream& out, std::ostream& log);

struct TableOptions {
  std::vector<std::filesystem::path> configs;  // run these first
  std::vector<std::filesystem::path> runs;     // existing run directories
  std::string layout = "table1";               // table1: timing and memory; table2: marching
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;    // base path for .md and .csv
};

int cmd_table(const TableOptions& opts, std::ostream& out, std::ostream& log);

}  // namespace hjinr
