#include "activecate/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace activecate;

namespace {

std::vector<std::string> covariate_names(DatasetName d) {
  if (d == DatasetName::ihdp) return ihdp_columns();
  if (d == DatasetName::actg) return actg_columns();
  if (d == DatasetName::causalbald) return {"x"};
  return {"x1", "x2", "x3", "x4", "x5"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active learning benchmarks for conditional average treatment effects"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run every cell of an experiment config");
  std::string config_path;
  RunOptions opt;
  int jobs = 0;
  std::string out;
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_flag("--append", opt.append, "Resume into an existing output directory, skipping finished cells");
  run->add_option("--jobs", jobs, "Parallel cells (overrides the config)")->check(CLI::PositiveNumber);
  run->add_option("--out", out, std::string("Output directory (default: config, then $") + kOutputRootEnv + ")");
  run->add_flag("--quiet", opt.quiet, "No per-cell progress lines");

  auto* summarize = app.add_subcommand("summarize", "Aggregate a results.csv into summary tables");
  std::string results_path;
  std::string summary_out;
  summarize->add_option("results", results_path, "results.csv")->required()->check(CLI::ExistingFile);
  summarize->add_option("--out", summary_out, "Directory for summary files (default: next to results)");

  auto* gen = app.add_subcommand("gen-data", "Dump a generated dataset as CSV");
  std::string dataset_name;
  std::string data_out;
  bool shift = false;
  std::uint64_t seed = 0;
  Index n = 1000;
  std::string covariates;
  gen->add_option("dataset", dataset_name, "causalbald | hahn_linear | hahn_nonlinear | ihdp | actg")->required();
  gen->add_option("out", data_out, "Output CSV")->required();
  gen->add_flag("--shift", shift, "Shifted covariate law (synthetic) or shifted mechanism (ihdp)");
  gen->add_option("--seed", seed, "Seed");
  gen->add_option("-n,--rows", n, "Rows for synthetic datasets")->check(CLI::PositiveNumber);
  gen->add_option("--covariates", covariates, "Covariate CSV for ihdp/actg (surrogates otherwise)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (jobs > 0) opt.jobs = jobs;
      if (!out.empty()) opt.out = out;
      return run_matrix(parse_config(config_path), opt);
    }
    if (*summarize) {
      emit_summary(results_path, summary_out);
      return 0;
    }
    const DatasetName name = parse_dataset_name(dataset_name);
    Rng rng(stream_seed(seed, "gen-data", dataset_name, shift ? "shift" : "standard"));
    Dataset d;
    switch (name) {
      case DatasetName::causalbald: d = gen_causalbald(n, shift, rng); break;
      case DatasetName::hahn_linear: d = gen_hahn(n, HahnPrognostic::linear, shift, rng); break;
      case DatasetName::hahn_nonlinear: d = gen_hahn(n, HahnPrognostic::nonlinear, shift, rng); break;
      case DatasetName::ihdp:
      case DatasetName::actg: {
        const CovariateSchema schema = name == DatasetName::ihdp ? CovariateSchema::ihdp : CovariateSchema::actg;
        const CovariateTable cov = covariates.empty() ? surrogate_covariates(schema, n, rng)
                                                      : load_covariates_csv(covariates, schema);
        d = name == DatasetName::ihdp ? gen_ihdp_outcomes(cov.x, cov.t, shift, rng) : gen_actg_outcomes(cov.x, cov.t, rng);
        break;
      }
    }
    write_dataset_csv(d, covariate_names(name), data_out);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
