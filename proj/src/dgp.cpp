#include "activecate/dgp.hpp"

#include "activecate/kernels.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace activecate {

namespace {

constexpr double kPi = 3.14159265358979323846;

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }

double sample_sd(const Vector& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

Dataset empty_dataset(Index n, Index d) {
  Dataset ds;
  ds.x.resize(n, d);
  ds.t.resize(n);
  ds.y.resize(n);
  ds.mu0.resize(n);
  ds.mu1.resize(n);
  ds.tau_true.resize(n);
  return ds;
}

// y = mu_t + scale * z, with z drawn even when noiseless.
void attach_outcomes(Dataset& ds, double noise_sd, Rng& rng, const DgpOptions& opt) {
  std::normal_distribution<double> n01(0.0, 1.0);
  for (Index i = 0; i < ds.size(); ++i) {
    const double eps = noise_sd * n01(rng);
    const double mu = ds.t(i) == 1 ? ds.mu1(i) : ds.mu0(i);
    ds.y(i) = opt.noiseless ? mu : mu + eps;
  }
}

void check_covariates(const Matrix& x, const IndexVector& t, Index columns, const char* what) {
  if (x.cols() != columns)
    throw InputError(std::string(what) + ": expected " + std::to_string(columns) + " covariate columns, got " +
                     std::to_string(x.cols()));
  if (x.rows() != t.size()) throw InputError(std::string(what) + ": covariates and treatments differ in length");
  for (Index i = 0; i < t.size(); ++i) check_treatment(t(i));
}

}  // namespace

void Dataset::validate() const {
  const Index n = size();
  if (t.size() != n || y.size() != n || mu0.size() != n || mu1.size() != n || tau_true.size() != n)
    throw InputError("dataset: field lengths differ");
  if (propensity_true.size() != 0 && propensity_true.size() != n)
    throw InputError("dataset: propensity length differs");
  for (Index i = 0; i < n; ++i) check_treatment(t(i));
  if (!y.allFinite() || !x.allFinite()) throw InputError("dataset: non-finite values");
}

Dataset Dataset::subset(const std::vector<Index>& rows) const {
  Dataset s;
  s.x = x(rows, Eigen::all);
  s.t = t(rows);
  s.y = y(rows);
  s.mu0 = mu0(rows);
  s.mu1 = mu1(rows);
  s.tau_true = tau_true(rows);
  if (propensity_true.size() > 0) s.propensity_true = propensity_true(rows);
  return s;
}

// ---- CausalBALD -------------------------------------------------------------

double causalbald_propensity(double x) { return sigmoid(2.0 * x + 0.5); }
double causalbald_mu0(double x) { return 1.0 + 2.0 * std::sin(2.0 * x); }
double causalbald_mu1(double x) { return 2.0 * x + 3.0 - 2.0 * std::sin(2.0 * x); }

Dataset gen_causalbald(Index n, bool shift, Rng& rng, DgpOptions opt) {
  if (n < 1) throw InputError("causalbald: n must be positive");
  Dataset ds = empty_dataset(n, 1);
  ds.propensity_true.resize(n);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u_shift(0.2, 0.5);
  for (Index i = 0; i < n; ++i) ds.x(i, 0) = shift ? u_shift(rng) : n01(rng);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    const double xi = ds.x(i, 0);
    ds.propensity_true(i) = causalbald_propensity(xi);
    ds.t(i) = u01(rng) < ds.propensity_true(i) ? 1 : 0;
    ds.mu0(i) = causalbald_mu0(xi);
    ds.mu1(i) = causalbald_mu1(xi);
  }
  ds.tau_true = ds.mu1 - ds.mu0;
  attach_outcomes(ds, 1.0, rng, opt);
  return ds;
}

// ---- Hahn -------------------------------------------------------------------

double hahn_g(int level) {
  switch (level) {
    case 1: return 2.0;
    case 2: return -1.0;
    case 3: return -4.0;
    default: throw InputError("hahn: categorical level must be 1, 2 or 3");
  }
}

double hahn_mu(const Eigen::Ref<const Vector>& x, HahnPrognostic p) {
  const double g = hahn_g(static_cast<int>(std::lround(x(4))));
  if (p == HahnPrognostic::linear) return 1.0 + g + x(0) * x(2);
  return -6.0 + g + 6.0 * std::abs(x(2) - 1.0);
}

double hahn_tau(const Eigen::Ref<const Vector>& x) { return 1.0 + 2.0 * x(1) * x(3); }

Dataset gen_hahn(Index n, HahnPrognostic prognostic, bool shift, Rng& rng, DgpOptions opt) {
  if (n < 2) throw InputError("hahn: n must be at least 2");
  Dataset ds = empty_dataset(n, 5);
  ds.propensity_true.resize(n);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u_shift(0.2, 0.5);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<int> level(1, 3);
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) ds.x(i, j) = shift ? u_shift(rng) : n01(rng);
    ds.x(i, 3) = coin(rng) ? 1.0 : 0.0;
    ds.x(i, 4) = level(rng);
  }
  Vector mu(n);
  for (Index i = 0; i < n; ++i) {
    mu(i) = hahn_mu(ds.x.row(i).transpose(), prognostic);
    ds.tau_true(i) = hahn_tau(ds.x.row(i).transpose());
  }
  const double sigma_mu = sample_sd(mu);
  std::uniform_real_distribution<double> u_xi(0.05, 0.15);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    const double scaled = sigma_mu > 0.0 ? 3.0 * mu(i) / sigma_mu : 0.0;
    const double pi = 0.8 * std_normal_pdf(scaled) - 0.5 * ds.x(i, 0) + u_xi(rng);
    ds.propensity_true(i) = std::clamp(pi, 0.01, 0.99);
    ds.t(i) = u01(rng) < ds.propensity_true(i) ? 1 : 0;
  }
  ds.mu0 = mu;
  ds.mu1 = mu + ds.tau_true;
  Vector signal(n);
  for (Index i = 0; i < n; ++i) signal(i) = ds.t(i) == 1 ? ds.mu1(i) : ds.mu0(i);
  attach_outcomes(ds, sample_sd(signal) / 3.0, rng, opt);
  return ds;
}

// ---- IHDP -------------------------------------------------------------------

const std::vector<std::string>& ihdp_columns() {
  static const std::vector<std::string> cols = {
      "bw",       "b.head", "preterm", "birth.o", "nnhealth", "momage", "sex",  "twin",     "b.marr",
      "mom.lths", "mom.hs", "mom.scoll", "cig",   "first",    "booze",  "drugs", "work.dur", "prenatal",
      "ark",      "ein",    "har",     "mia",     "pen",      "tex",    "was"};
  return cols;
}

Vector sample_ihdp_beta(Rng& rng) {
  static const std::array<double, 5> values{0.0, 0.1, 0.2, 0.3, 0.4};
  std::discrete_distribution<int> pick({0.6, 0.1, 0.1, 0.1, 0.1});
  Vector beta(kIhdpColumns);
  for (Index j = 0; j < kIhdpColumns; ++j) beta(j) = values[pick(rng)];
  return beta;
}

Dataset ihdp_outcomes(const Matrix& x, const IndexVector& t, const Vector& beta, IhdpMechanism mechanism, Rng& rng,
                      DgpOptions opt) {
  check_covariates(x, t, kIhdpColumns, "ihdp");
  if (beta.size() != kIhdpColumns) throw InputError("ihdp: coefficient vector must have 25 entries");
  const Index n = x.rows();
  Dataset ds = empty_dataset(n, kIhdpColumns);
  ds.x = x;
  ds.t = t;
  if (mechanism == IhdpMechanism::standard) {
    const Vector z = (x.array() + 0.5).matrix() * beta;
    const Vector e = z.array().exp();
    double sum = 0.0;
    Index treated = 0;
    for (Index i = 0; i < n; ++i)
      if (t(i) == 1) {
        sum += z(i) - e(i);
        ++treated;
      }
    if (treated == 0) throw InputError("ihdp: no treated units to fix the ATT");
    const double omega = sum / static_cast<double>(treated) - 4.0;
    ds.mu0 = e;
    ds.mu1 = z.array() - omega;
  } else {
    Vector b = beta;
    b(0) = 0.0;
    b(1) = 0.0;
    ds.mu0 = ((x.array() + 0.5).matrix() * b).array().exp();
    ds.mu1 = ds.mu0.array() + 3.0 * x.col(0).array() * x.col(1).array();
  }
  ds.tau_true = ds.mu1 - ds.mu0;
  attach_outcomes(ds, 1.0, rng, opt);
  return ds;
}

Dataset gen_ihdp_outcomes(const Matrix& x, const IndexVector& t, bool shift, Rng& rng, DgpOptions opt) {
  check_covariates(x, t, kIhdpColumns, "ihdp");
  const Vector beta = sample_ihdp_beta(rng);
  if (!shift) return ihdp_outcomes(x, t, beta, IhdpMechanism::standard, rng, opt);
  Matrix xs = x;
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (Index i = 0; i < xs.rows(); ++i) {
    xs(i, 0) = u(rng);
    xs(i, 1) = u(rng);
  }
  return ihdp_outcomes(xs, t, beta, IhdpMechanism::shifted, rng, opt);
}

// ---- ACTG -------------------------------------------------------------------

const std::vector<std::string>& actg_columns() {
  static const std::vector<std::string> cols = {"age",     "wtkg", "hemo",   "homo", "drugs", "oprior",
                                                "z30",     "preanti", "race", "gender", "str2", "karnof_hi"};
  return cols;
}

namespace actg {
constexpr int age = 0, wtkg = 1, hemo = 2, z30 = 6, race = 8, gender = 9, karnof_hi = 11;
}

double actg_mu(const Eigen::Ref<const Vector>& x) {
  return 6.0 + 0.3 * x(actg::wtkg) * x(actg::wtkg) - std::sin(x(actg::age)) * (x(actg::gender) + 1.0) +
         0.6 * x(actg::hemo) * x(actg::race) - 0.2 * x(actg::z30);
}

double actg_tau(const Eigen::Ref<const Vector>& x) {
  return 1.0 + 1.5 * std::sin(x(actg::wtkg)) * (x(actg::karnof_hi) + 1.0) + 2.0 * x(actg::age);
}

Dataset gen_actg_outcomes(const Matrix& x, const IndexVector& t, Rng& rng, DgpOptions opt) {
  check_covariates(x, t, kActgColumns, "actg");
  if (x.rows() < 1) throw InputError("actg: no rows");
  const Index n = x.rows();
  Dataset ds = empty_dataset(n, kActgColumns);
  ds.x = x;
  ds.t = t;
  for (Index i = 0; i < n; ++i) {
    ds.mu0(i) = actg_mu(x.row(i).transpose());
    ds.tau_true(i) = actg_tau(x.row(i).transpose());
  }
  ds.mu1 = ds.mu0 + ds.tau_true;
  const double sigma_y = (ds.mu0.maxCoeff() - ds.mu0.minCoeff()) / 8.0;
  attach_outcomes(ds, sigma_y, rng, opt);
  return ds;
}

// ---- covariate files --------------------------------------------------------

namespace {

const std::vector<std::string>& schema_columns(CovariateSchema s) {
  return s == CovariateSchema::ihdp ? ihdp_columns() : actg_columns();
}

std::vector<int> continuous_columns(CovariateSchema s) {
  if (s == CovariateSchema::ihdp) return {0, 1, 2, 3, 4, 5};
  return {0, 1, 7};
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

void standardize_columns(Matrix& x, const std::vector<int>& cols) {
  if (x.rows() < 2) return;
  for (int c : cols) {
    const double m = x.col(c).mean();
    x.col(c).array() -= m;
    const double sd = std::sqrt(x.col(c).squaredNorm() / static_cast<double>(x.rows() - 1));
    if (sd > 0.0) x.col(c) /= sd;
  }
}

}  // namespace

CovariateTable load_covariates_csv(const std::string& path, CovariateSchema schema) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open covariate file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);
  const auto& names = schema_columns(schema);
  std::vector<std::string> wanted = names;
  wanted.emplace_back("t");
  std::vector<Index> position;
  std::string missing;
  for (const auto& w : wanted) {
    const auto it = std::find(header.begin(), header.end(), w);
    if (it == header.end()) {
      missing += (missing.empty() ? "" : ", ") + w;
      position.push_back(-1);
    } else {
      position.push_back(it - header.begin());
    }
  }
  if (!missing.empty()) throw InputError(path + ": missing column(s): " + missing);

  std::vector<std::vector<double>> rows;
  std::vector<int> treatments;
  Index row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw InputError(path + ": row " + std::to_string(row_no) + " has " + std::to_string(cells.size()) +
                       " cells, header has " + std::to_string(header.size()));
    std::vector<double> values(wanted.size());
    for (std::size_t k = 0; k < wanted.size(); ++k) {
      const std::string& cell = cells[position[k]];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw InputError(path + ": row " + std::to_string(row_no) + ", column '" + wanted[k] +
                         "': not a number: '" + cell + "'");
      values[k] = v;
    }
    const double tv = values.back();
    if (tv != 0.0 && tv != 1.0)
      throw InputError(path + ": row " + std::to_string(row_no) + ", column 't': treatment must be 0 or 1, got '" +
                       cells[position.back()] + "'");
    treatments.push_back(static_cast<int>(tv));
    values.pop_back();
    rows.push_back(std::move(values));
  }
  CovariateTable table;
  table.x.resize(static_cast<Index>(rows.size()), static_cast<Index>(names.size()));
  table.t.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < names.size(); ++j) table.x(i, j) = rows[i][j];
    table.t(i) = treatments[i];
  }
  standardize_columns(table.x, continuous_columns(schema));
  return table;
}

CovariateTable surrogate_covariates(CovariateSchema schema, Index n, Rng& rng) {
  const auto& names = schema_columns(schema);
  const std::vector<int> cont = continuous_columns(schema);
  CovariateTable table;
  table.x.resize(n, static_cast<Index>(names.size()));
  table.t.resize(n);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  const double treated_share = schema == CovariateSchema::ihdp ? 139.0 / 747.0 : 281.0 / 813.0;
  std::bernoulli_distribution treat(treated_share);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < table.x.cols(); ++j) {
      const bool is_cont = std::find(cont.begin(), cont.end(), static_cast<int>(j)) != cont.end();
      table.x(i, j) = is_cont ? n01(rng) : (coin(rng) ? 1.0 : 0.0);
    }
    table.t(i) = treat(rng) ? 1 : 0;
  }
  standardize_columns(table.x, cont);
  return table;
}

// ---- splits -----------------------------------------------------------------

void SplitSpec::validate() const {
  if (pool < 1 || test < 1 || validation < 0) throw InputError("split sizes must be positive");
}

DatasetSplits make_splits(const Dataset& data, const SplitSpec& spec, Rng& rng) {
  spec.validate();
  const Index need = spec.pool + spec.validation + spec.test;
  if (need > data.size())
    throw InputError("split sizes (" + std::to_string(need) + ") exceed dataset size (" +
                     std::to_string(data.size()) + ")");
  std::vector<Index> perm(data.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  DatasetSplits s;
  s.pool_rows.assign(perm.begin(), perm.begin() + spec.pool);
  s.validation_rows.assign(perm.begin() + spec.pool, perm.begin() + spec.pool + spec.validation);
  s.test_rows.assign(perm.begin() + spec.pool + spec.validation, perm.begin() + need);
  for (auto* v : {&s.pool_rows, &s.validation_rows, &s.test_rows}) std::sort(v->begin(), v->end());
  s.pool = data.subset(s.pool_rows);
  s.validation = data.subset(s.validation_rows);
  s.test = data.subset(s.test_rows);
  return s;
}

// ---- benchmarks -------------------------------------------------------------

std::string to_string(DatasetName d) {
  switch (d) {
    case DatasetName::causalbald: return "causalbald";
    case DatasetName::hahn_linear: return "hahn_linear";
    case DatasetName::hahn_nonlinear: return "hahn_nonlinear";
    case DatasetName::ihdp: return "ihdp";
    case DatasetName::actg: return "actg";
  }
  return "unknown";
}

DatasetName parse_dataset_name(const std::string& s) {
  for (DatasetName d : {DatasetName::causalbald, DatasetName::hahn_linear, DatasetName::hahn_nonlinear,
                        DatasetName::ihdp, DatasetName::actg})
    if (to_string(d) == s) return d;
  throw InputError("unknown dataset '" + s + "'");
}

SplitSpec BenchmarkSpec::split_spec(std::uint64_t seed) const {
  SplitSpec s;
  s.shift = shift;
  s.seed = seed;
  if (name == DatasetName::ihdp) {
    s.pool = 523;
    s.validation = 0;
    s.test = 224;
  } else if (name == DatasetName::actg) {
    s.pool = 569;
    s.validation = 0;
    s.test = 244;
  }
  if (pool) s.pool = *pool;
  if (validation) s.validation = *validation;
  if (test) s.test = *test;
  s.validate();
  return s;
}

namespace {

Dataset synthetic(DatasetName name, Index n, bool shift, Rng& rng) {
  switch (name) {
    case DatasetName::causalbald: return gen_causalbald(n, shift, rng);
    case DatasetName::hahn_linear: return gen_hahn(n, HahnPrognostic::linear, shift, rng);
    case DatasetName::hahn_nonlinear: return gen_hahn(n, HahnPrognostic::nonlinear, shift, rng);
    default: throw InputError("not a synthetic dataset");
  }
}

CovariateTable semi_synthetic_covariates(const BenchmarkSpec& spec) {
  const CovariateSchema schema = spec.name == DatasetName::ihdp ? CovariateSchema::ihdp : CovariateSchema::actg;
  if (!spec.covariates_path.empty()) return load_covariates_csv(spec.covariates_path, schema);
  // Fixed across seeds, like a real covariate file.
  Rng rng(stream_seed(0, "surrogate", to_string(spec.name)));
  return surrogate_covariates(schema, spec.name == DatasetName::ihdp ? 747 : 813, rng);
}

}  // namespace

DatasetSplits build_benchmark(const BenchmarkSpec& spec, std::uint64_t seed) {
  const SplitSpec split = spec.split_spec(seed);
  const std::string name = to_string(spec.name);
  const std::string variant = spec.shift ? "shift" : "standard";
  Rng data_rng(stream_seed(seed, "dgp", name, variant));
  Rng split_rng(stream_seed(seed, "split", name, variant));

  if (spec.name == DatasetName::causalbald || spec.name == DatasetName::hahn_linear ||
      spec.name == DatasetName::hahn_nonlinear) {
    if (!spec.shift)
      return make_splits(synthetic(spec.name, split.pool + split.validation + split.test, false, data_rng), split,
                         split_rng);
    const Index test_n = split.test;
    const Dataset train = synthetic(spec.name, split.pool + split.validation, false, data_rng);
    Rng test_rng(stream_seed(seed, "dgp-test", name, variant));
    const Dataset test = synthetic(spec.name, test_n, true, test_rng);
    std::vector<Index> perm(train.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), split_rng);
    DatasetSplits s;
    s.pool_rows.assign(perm.begin(), perm.begin() + split.pool);
    s.validation_rows.assign(perm.begin() + split.pool, perm.end());
    std::sort(s.pool_rows.begin(), s.pool_rows.end());
    std::sort(s.validation_rows.begin(), s.validation_rows.end());
    s.test_rows.resize(static_cast<std::size_t>(test_n));
    std::iota(s.test_rows.begin(), s.test_rows.end(), 0);
    s.pool = train.subset(s.pool_rows);
    s.validation = train.subset(s.validation_rows);
    s.test = test;
    return s;
  }

  const CovariateTable cov = semi_synthetic_covariates(spec);
  if (spec.name == DatasetName::actg)
    return make_splits(gen_actg_outcomes(cov.x, cov.t, data_rng), split, split_rng);

  const Vector beta = sample_ihdp_beta(data_rng);
  const Dataset standard = ihdp_outcomes(cov.x, cov.t, beta, IhdpMechanism::standard, data_rng);
  DatasetSplits s = make_splits(standard, split, split_rng);
  if (spec.shift) {
    Matrix xs = cov.x(s.test_rows, Eigen::all);
    std::uniform_real_distribution<double> u(0.0, 0.5);
    for (Index i = 0; i < xs.rows(); ++i) {
      xs(i, 0) = u(data_rng);
      xs(i, 1) = u(data_rng);
    }
    s.test = ihdp_outcomes(xs, cov.t(s.test_rows), beta, IhdpMechanism::shifted, data_rng);
  }
  return s;
}

}  // namespace activecate
