#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dude/adapters.hpp"
#include "dude/task.hpp"
#include "dude/trainer.hpp"

namespace dude {

/// Invalid or missing configuration value. field() names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument("config field '" + field + "': " + message),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  TaskKind task_kind = TaskKind::teacher_student;
  std::size_t d = 16;
  std::size_t k = 16;
  std::size_t r_true = 2;
  double sigma = 0.01;

  Method method = Method::dude;
  std::size_t rank = 2;
  double scaling = 1.0;
  double lr = 1e-3;
  long steps = 500;
  std::size_t batch = 32;
  double warmup_frac = 0.03;
  SchedulerKind scheduler = SchedulerKind::cosine;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::vector<std::uint64_t> seeds = {42};
  long eval_every = 50;
  std::filesystem::path out_dir = "runs";
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::size_t> rank;
  std::optional<double> lr;
};

/// Parses and validates a config document; throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc, const Overrides& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             const Overrides& overrides = {});
nlohmann::json to_json(const ExperimentConfig& config);

struct RunArtifact {
  std::vector<std::filesystem::path> metrics_files;  // metrics_<seed>.csv
  std::filesystem::path summary_file;                 // summary.json
  nlohmann::json config_echo;
};

/// Trains once per seed (concurrently), writes metrics CSVs and summary.json.
/// Throws ConfigError or NumericError.
RunArtifact run_experiment(const ExperimentConfig& config);

/// Exact bytes of a metrics file: header `step,loss,grad_norm,lr,eval`,
/// floats with 17 significant digits, eval blank when not measured.
std::string format_metrics_csv(const std::vector<MetricsRecord>& records);

struct ComparisonRow {
  std::string method;
  double mean_final_loss = 0.0;
  double std_final_loss = 0.0;  // population std
  double best_final_loss = 0.0;
  double worst_final_loss = 0.0;
  std::size_t n_seeds = 0;
};

/// Aggregates summary.json files by method, rows sorted by method name.
/// Throws ConfigError naming the path of a missing or corrupt summary.
std::vector<ComparisonRow> compare_runs(const std::vector<std::filesystem::path>& run_dirs);
std::string format_comparison_csv(const std::vector<ComparisonRow>& rows);

/// Reads a headerless CSV of decimal floats. Errors name the row/column.
Matrix read_matrix_csv(const std::filesystem::path& path);
std::string format_matrix_csv(const Matrix& m);

/// "%.17g"
std::string format_double(double v);

/// Entry point shared by the `dude` executable and the tests.
/// Exit codes: 0 success, 1 configuration/input error, 2 numeric failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dude
