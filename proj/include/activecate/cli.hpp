#pragma once

#include "activecate/active_loop.hpp"
#include "activecate/dgp.hpp"
#include "activecate/evaluation.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace activecate {

inline constexpr const char* kVersion = "activecate 0.1.0";
inline constexpr const char* kOutputRootEnv = "ACTIVECATE_OUTPUT_ROOT";

struct MethodSpec {
  AcquisitionMethod method = AcquisitionMethod::random;
  std::optional<double> temperature;
  int sundin_samples = 100;
  Index eig_grid_size = 100;

  bool operator==(const MethodSpec&) const = default;
};

struct LoopSettings {
  Index n_init = 50;
  Index batch_size = 20;
  std::optional<Index> budget;  // n_init + 40 batch_size when unset
  bool refit_hyperparams = true;
  Index max_targets = 0;
  int threads = 1;

  Index effective_budget() const { return budget ? *budget : n_init + 40 * batch_size; }
  bool operator==(const LoopSettings&) const = default;
};

struct ExperimentConfig {
  DatasetName dataset = DatasetName::causalbald;
  std::vector<std::string> variants{"standard"};  // standard | shift
  std::optional<Index> pool, validation, test;
  std::string covariates;
  std::vector<EstimatorConfig> estimators;
  std::vector<MethodSpec> methods;
  LoopSettings loop;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::string output;
  int jobs = 1;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Sectioned key = value text; '#' starts a comment. Errors carry
/// "<source>:<line>:" prefixes and unknown keys get a suggestion.
ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "<config>");
ExperimentConfig parse_config(const std::string& path);
/// Every key written explicitly; parses back to an equal config.
std::string serialize_config(const ExperimentConfig& cfg);

/// Levenshtein distance.
std::size_t edit_distance(const std::string& a, const std::string& b);

struct CellId {
  std::string dataset, variant, estimator, method;
  std::uint64_t seed = 0;
  auto operator<=>(const CellId&) const = default;
  std::string str() const;
};

/// Cells in a fixed order: variant, estimator, method, seed.
std::vector<CellId> enumerate_cells(const ExperimentConfig& cfg);

/// Everything needed to run one cell.
LoopConfig loop_config_for(const ExperimentConfig& cfg, const CellId& cell);
BenchmarkSpec benchmark_for(const ExperimentConfig& cfg, const std::string& variant);

/// Runs one cell from scratch. Deterministic in (config, cell).
RunRecord run_cell(const ExperimentConfig& cfg, const CellId& cell);

inline constexpr const char* kResultsHeader =
    "dataset,variant,estimator,method,seed,step,n_labeled,sqrt_pehe_pool,sqrt_pehe_test,acq_seconds,status";

std::string format_number(double v);
/// One results.csv line per step.
std::vector<std::string> format_rows(const RunRecord& r);

struct RunOptions {
  bool append = false;
  std::optional<int> jobs;
  std::optional<std::string> out;
  bool quiet = false;
};

/// Output directory: --out, then the config, then $ACTIVECATE_OUTPUT_ROOT/<dataset>, then ./results.
std::string resolve_output_dir(const ExperimentConfig& cfg, const RunOptions& opt);

/// Runs every cell, appending rows to <out>/results.csv as cells finish and
/// keeping <out>/manifest.json current. Returns 0 iff every cell succeeded.
int run_matrix(const ExperimentConfig& cfg, const RunOptions& opt);

/// Reads results.csv back into run records. Throws InputError with the row
/// number on malformed input.
std::vector<RunRecord> read_results(const std::string& path);

/// Writes summary.csv and relative_improvement.csv into out_dir (the results
/// directory by default).
void emit_summary(const std::string& results_path, const std::string& out_dir = "");

inline constexpr const char* kSummaryHeader =
    "dataset,variant,estimator,method,step,n_labeled,metric,mean,sd,count,failed_runs";
std::string format_summary_row(const SummaryRow& r);

/// Writes to a temporary file next to path, then renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

/// Full dataset dump (covariates, t, y, mu0, mu1, tau_true, propensity_true).
void write_dataset_csv(const Dataset& d, const std::vector<std::string>& covariate_names, const std::string& path);

}  // namespace activecate
