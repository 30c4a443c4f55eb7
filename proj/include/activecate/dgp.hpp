#pragma once

#include "activecate/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace activecate {

/// Observational dataset with ground truth attached.
struct Dataset {
  Matrix x;
  IndexVector t;
  Vector y;
  Vector mu0;
  Vector mu1;
  Vector tau_true;
  Vector propensity_true;  // empty when the DGP does not define one

  Index size() const { return x.rows(); }
  Index dim() const { return x.cols(); }
  void validate() const;
  /// Rows in the given order.
  Dataset subset(const std::vector<Index>& rows) const;
};

struct DgpOptions {
  bool noiseless = false;  // y = mu_t exactly, same random draws otherwise
};

double causalbald_propensity(double x);
double causalbald_mu0(double x);
double causalbald_mu1(double x);

/// x ~ N(0, 1), or U(0.2, 0.5) when shifted.
Dataset gen_causalbald(Index n, bool shift, Rng& rng, DgpOptions opt = {});

enum class HahnPrognostic { linear, nonlinear };

double hahn_g(int level);
double hahn_mu(const Eigen::Ref<const Vector>& x, HahnPrognostic p);
double hahn_tau(const Eigen::Ref<const Vector>& x);

/// x1..x3 ~ N(0,1) (U(0.2, 0.5) when shifted), x4 ~ Bern(0.5), x5 ~ U{1,2,3}.
/// Noise sd is sd(mu + t tau)/3 over the batch.
Dataset gen_hahn(Index n, HahnPrognostic prognostic, bool shift, Rng& rng, DgpOptions opt = {});

inline constexpr int kIhdpColumns = 25;
inline constexpr int kActgColumns = 12;

const std::vector<std::string>& ihdp_columns();
const std::vector<std::string>& actg_columns();

/// Sparse IHDP coefficients: {0, .1, .2, .3, .4} w.p. {.6, .1, .1, .1, .1}.
Vector sample_ihdp_beta(Rng& rng);

enum class IhdpMechanism { standard, shifted };

/// Outcomes for given covariates/treatments and coefficients. The standard
/// mechanism fixes the ATT at 4; the shifted one uses tau = 3 x_bw x_bhead
/// and zeroes the first two coefficients.
Dataset ihdp_outcomes(const Matrix& x, const IndexVector& t, const Vector& beta, IhdpMechanism mechanism, Rng& rng,
                      DgpOptions opt = {});

/// Samples beta and applies the standard mechanism, or for shift, resamples
/// bw and b.head from U(0, 0.5) and applies the shifted mechanism.
Dataset gen_ihdp_outcomes(const Matrix& x, const IndexVector& t, bool shift, Rng& rng, DgpOptions opt = {});

double actg_mu(const Eigen::Ref<const Vector>& x);
double actg_tau(const Eigen::Ref<const Vector>& x);

/// sigma_y = (max mu - min mu) / 8 over the batch.
Dataset gen_actg_outcomes(const Matrix& x, const IndexVector& t, Rng& rng, DgpOptions opt = {});

enum class CovariateSchema { ihdp, actg };

struct CovariateTable {
  Matrix x;
  IndexVector t;
};

/// Comma-separated file with a header row; schema columns plus `t`, any
/// order, extra columns ignored. Continuous columns are standardized.
CovariateTable load_covariates_csv(const std::string& path, CovariateSchema schema);

/// Stand-in covariates with the schema's layout (continuous columns
/// standardized normals, binary columns Bernoulli), for runs without a file.
CovariateTable surrogate_covariates(CovariateSchema schema, Index n, Rng& rng);

struct SplitSpec {
  Index pool = 2000;
  Index validation = 200;
  Index test = 2000;
  bool shift = false;
  std::uint64_t seed = 0;
  void validate() const;
};

struct DatasetSplits {
  Dataset pool;
  Dataset validation;
  Dataset test;
  std::vector<Index> pool_rows, validation_rows, test_rows;
};

/// Random disjoint partition of the dataset rows.
DatasetSplits make_splits(const Dataset& data, const SplitSpec& spec, Rng& rng);

enum class DatasetName { causalbald, hahn_linear, hahn_nonlinear, ihdp, actg };

std::string to_string(DatasetName d);
DatasetName parse_dataset_name(const std::string& s);

struct BenchmarkSpec {
  DatasetName name = DatasetName::causalbald;
  bool shift = false;
  std::optional<Index> pool, validation, test;  // dataset defaults otherwise
  std::string covariates_path;                  // ihdp/actg; empty uses surrogates

  SplitSpec split_spec(std::uint64_t seed) const;
};

/// Pool/validation/test for one seed. Shifted synthetic benchmarks draw the
/// test partition from the shifted covariate law; shifted IHDP resamples the
/// test partition's bw/b.head and switches its outcome mechanism.
DatasetSplits build_benchmark(const BenchmarkSpec& spec, std::uint64_t seed);

}  // namespace activecate
