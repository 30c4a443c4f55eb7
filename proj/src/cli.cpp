#include "activecate/cli.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace activecate {

namespace fs = std::filesystem;

// ---- config text ------------------------------------------------------------

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class ConfigError {
 public:
  ConfigError(std::string source, int line) : source_(std::move(source)), line_(line) {}
  [[noreturn]] void fail(const std::string& msg) const {
    throw InputError(source_ + ":" + std::to_string(line_) + ": " + msg);
  }

 private:
  std::string source_;
  int line_;
};

template <typename T>
T parse_number(const std::string& v, const ConfigError& err, const std::string& key) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    err.fail("key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v, const ConfigError& err, const std::string& key) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  err.fail("key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<std::uint64_t> parse_seeds(const std::string& v, const ConfigError& err) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split_list(v)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      seeds.push_back(parse_number<std::uint64_t>(item, err, "seeds"));
      continue;
    }
    const auto lo = parse_number<std::uint64_t>(trim(item.substr(0, dots)), err, "seeds");
    const auto hi = parse_number<std::uint64_t>(trim(item.substr(dots + 2)), err, "seeds");
    if (hi < lo) err.fail("key 'seeds': empty range '" + item + "'");
    for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  return seeds;
}

[[noreturn]] void unknown_key(const ConfigError& err, const std::string& section, const std::string& key,
                              const std::vector<std::string>& known) {
  std::string best;
  std::size_t best_d = std::numeric_limits<std::size_t>::max();
  for (const auto& k : known) {
    const std::size_t d = edit_distance(key, k);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  std::string msg = "unknown key '" + key + "' in [" + section + "]";
  if (!best.empty() && best_d <= std::max<std::size_t>(2, key.size() / 3)) msg += " (did you mean '" + best + "'?)";
  err.fail(msg);
}

const std::vector<std::string> kDatasetKeys = {"name", "variants", "pool", "validation", "test", "covariates"};
const std::vector<std::string> kLoopKeys = {"n_init",         "batch_size", "budget", "refit_hyperparams",
                                            "max_targets",    "threads"};
const std::vector<std::string> kRunKeys = {"estimators", "methods", "seeds", "output", "jobs"};
const std::vector<std::string> kEstimatorKeys = {"kernel", "restarts", "evaluations", "ard", "members", "ridge"};
const std::vector<std::string> kMethodKeys = {"temperature", "samples", "grid_size"};
const std::vector<std::string> kSections = {"dataset", "loop", "run", "estimator.<name>", "method.<name>"};

}  // namespace

void ExperimentConfig::validate() const {
  if (variants.empty()) throw InputError("config: no variants");
  for (const auto& v : variants)
    if (v != "standard" && v != "shift") throw InputError("config: variant must be standard or shift, got '" + v + "'");
  if (estimators.empty()) throw InputError("config: no estimators");
  if (methods.empty()) throw InputError("config: no methods");
  if (seeds.empty()) throw InputError("config: no seeds");
  if (jobs < 1) throw InputError("config: jobs must be at least 1");
  for (const auto& e : estimators) e.validate();
  std::set<EstimatorKind> ek;
  for (const auto& e : estimators)
    if (!ek.insert(e.kind).second) throw InputError("config: estimator listed twice: " + to_string(e.kind));
  std::set<AcquisitionMethod> mk;
  for (const auto& m : methods) {
    if (!mk.insert(m.method).second) throw InputError("config: method listed twice: " + to_string(m.method));
    if (m.temperature && !(*m.temperature >= 0.0)) throw InputError("config: temperature must be non-negative");
    if (m.sundin_samples < 2) throw InputError("config: samples must be at least 2");
    if (m.eig_grid_size < 1) throw InputError("config: grid_size must be positive");
  }
  std::set<std::uint64_t> sk(seeds.begin(), seeds.end());
  if (sk.size() != seeds.size()) throw InputError("config: duplicate seeds");
  if (loop.n_init < 1 || loop.batch_size < 1) throw InputError("config: n_init and batch_size must be positive");
  if (loop.effective_budget() < loop.n_init) throw InputError("config: budget must be at least n_init");
  if (loop.max_targets < 0 || loop.threads < 1) throw InputError("config: invalid max_targets or threads");
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
  ExperimentConfig cfg;
  std::map<std::string, EstimatorConfig> est_sections;
  std::map<std::string, MethodSpec> method_sections;
  std::map<std::string, int> section_lines;
  std::vector<std::string> estimator_names{"cmgp"};
  std::vector<std::string> method_names;
  bool have_methods = false;
  std::set<std::string> seen_keys;

  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const ConfigError err(source, line_no);
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') err.fail("malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      const bool known = section == "dataset" || section == "loop" || section == "run" ||
                         section.rfind("estimator.", 0) == 0 || section.rfind("method.", 0) == 0;
      if (!known) {
        std::string msg = "unknown section [" + section + "]";
        for (const auto& s : {"dataset", "loop", "run"})
          if (edit_distance(section, s) <= 2) msg += std::string(" (did you mean [") + s + "]?)";
        err.fail(msg);
      }
      if (section_lines.count(section)) err.fail("duplicate section [" + section + "]");
      section_lines[section] = line_no;
      if (section.rfind("estimator.", 0) == 0) {
        const std::string name = section.substr(10);
        EstimatorConfig e;
        try {
          e.kind = parse_estimator_kind(name);
        } catch (const InputError& ex) {
          err.fail(ex.what());
        }
        est_sections[name] = e;
      } else if (section.rfind("method.", 0) == 0) {
        const std::string name = section.substr(7);
        MethodSpec m;
        try {
          m.method = parse_acquisition_method(name);
        } catch (const InputError& ex) {
          err.fail(ex.what());
        }
        method_sections[name] = m;
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) err.fail("expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) err.fail("key '" + key + "' outside of any section");
    if (!seen_keys.insert(section + "/" + key).second) err.fail("duplicate key '" + key + "' in [" + section + "]");

    try {
      if (section == "dataset") {
        if (key == "name")
          cfg.dataset = parse_dataset_name(value);
        else if (key == "variants")
          cfg.variants = split_list(value);
        else if (key == "pool")
          cfg.pool = parse_number<Index>(value, err, key);
        else if (key == "validation")
          cfg.validation = parse_number<Index>(value, err, key);
        else if (key == "test")
          cfg.test = parse_number<Index>(value, err, key);
        else if (key == "covariates")
          cfg.covariates = value;
        else
          unknown_key(err, section, key, kDatasetKeys);
      } else if (section == "loop") {
        if (key == "n_init")
          cfg.loop.n_init = parse_number<Index>(value, err, key);
        else if (key == "batch_size")
          cfg.loop.batch_size = parse_number<Index>(value, err, key);
        else if (key == "budget")
          cfg.loop.budget = parse_number<Index>(value, err, key);
        else if (key == "refit_hyperparams")
          cfg.loop.refit_hyperparams = parse_bool(value, err, key);
        else if (key == "max_targets")
          cfg.loop.max_targets = parse_number<Index>(value, err, key);
        else if (key == "threads")
          cfg.loop.threads = parse_number<int>(value, err, key);
        else
          unknown_key(err, section, key, kLoopKeys);
      } else if (section == "run") {
        if (key == "estimators") {
          estimator_names = split_list(value);
        } else if (key == "methods") {
          method_names = split_list(value);
          have_methods = true;
        } else if (key == "seeds") {
          cfg.seeds = parse_seeds(value, err);
        } else if (key == "output") {
          cfg.output = value;
        } else if (key == "jobs") {
          cfg.jobs = parse_number<int>(value, err, key);
        } else {
          unknown_key(err, section, key, kRunKeys);
        }
      } else if (section.rfind("estimator.", 0) == 0) {
        EstimatorConfig& e = est_sections[section.substr(10)];
        if (key == "kernel")
          e.family = parse_kernel_family(value);
        else if (key == "restarts")
          e.restarts = parse_number<int>(value, err, key);
        else if (key == "evaluations")
          e.evaluations = parse_number<int>(value, err, key);
        else if (key == "ard")
          e.ard = parse_bool(value, err, key);
        else if (key == "members")
          e.members = parse_number<int>(value, err, key);
        else if (key == "ridge")
          e.ridge = parse_number<double>(value, err, key);
        else
          unknown_key(err, section, key, kEstimatorKeys);
      } else {
        MethodSpec& m = method_sections[section.substr(7)];
        if (key == "temperature")
          m.temperature = parse_number<double>(value, err, key);
        else if (key == "samples")
          m.sundin_samples = parse_number<int>(value, err, key);
        else if (key == "grid_size")
          m.eig_grid_size = parse_number<Index>(value, err, key);
        else
          unknown_key(err, section, key, kMethodKeys);
      }
    } catch (const InputError& ex) {
      const std::string what = ex.what();
      if (what.rfind(source + ":", 0) == 0) throw;
      err.fail(what);
    }
  }

  const ConfigError end(source, line_no);
  if (!have_methods) end.fail("[run] methods is required");
  for (const auto& n : estimator_names) {
    EstimatorConfig e;
    try {
      e.kind = parse_estimator_kind(n);
    } catch (const InputError& ex) {
      end.fail(ex.what());
    }
    const auto it = est_sections.find(n);
    cfg.estimators.push_back(it != est_sections.end() ? it->second : e);
  }
  for (const auto& [n, e] : est_sections)
    if (std::find(estimator_names.begin(), estimator_names.end(), n) == estimator_names.end())
      ConfigError(source, section_lines["estimator." + n]).fail("[estimator." + n + "] is not listed in [run] estimators");
  for (const auto& n : method_names) {
    MethodSpec m;
    try {
      m.method = parse_acquisition_method(n);
    } catch (const InputError& ex) {
      end.fail(ex.what());
    }
    const auto it = method_sections.find(n);
    cfg.methods.push_back(it != method_sections.end() ? it->second : m);
  }
  for (const auto& [n, m] : method_sections)
    if (std::find(method_names.begin(), method_names.end(), n) == method_names.end())
      ConfigError(source, section_lines["method." + n]).fail("[method." + n + "] is not listed in [run] methods");
  try {
    cfg.validate();
  } catch (const InputError& ex) {
    end.fail(ex.what());
  }
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream o;
  const auto join = [](const auto& items, auto fn) {
    std::string s;
    for (const auto& i : items) s += (s.empty() ? "" : ", ") + fn(i);
    return s;
  };
  o << "[dataset]\n";
  o << "name = " << to_string(cfg.dataset) << "\n";
  o << "variants = " << join(cfg.variants, [](const std::string& s) { return s; }) << "\n";
  if (cfg.pool) o << "pool = " << *cfg.pool << "\n";
  if (cfg.validation) o << "validation = " << *cfg.validation << "\n";
  if (cfg.test) o << "test = " << *cfg.test << "\n";
  if (!cfg.covariates.empty()) o << "covariates = " << cfg.covariates << "\n";
  o << "\n[loop]\n";
  o << "n_init = " << cfg.loop.n_init << "\n";
  o << "batch_size = " << cfg.loop.batch_size << "\n";
  if (cfg.loop.budget) o << "budget = " << *cfg.loop.budget << "\n";
  o << "refit_hyperparams = " << (cfg.loop.refit_hyperparams ? "true" : "false") << "\n";
  o << "max_targets = " << cfg.loop.max_targets << "\n";
  o << "threads = " << cfg.loop.threads << "\n";
  o << "\n[run]\n";
  o << "estimators = " << join(cfg.estimators, [](const EstimatorConfig& e) { return to_string(e.kind); }) << "\n";
  o << "methods = " << join(cfg.methods, [](const MethodSpec& m) { return to_string(m.method); }) << "\n";
  o << "seeds = " << join(cfg.seeds, [](std::uint64_t s) { return std::to_string(s); }) << "\n";
  if (!cfg.output.empty()) o << "output = " << cfg.output << "\n";
  o << "jobs = " << cfg.jobs << "\n";
  for (const auto& e : cfg.estimators) {
    o << "\n[estimator." << to_string(e.kind) << "]\n";
    o << "kernel = " << to_string(e.family) << "\n";
    o << "restarts = " << e.restarts << "\n";
    o << "evaluations = " << e.evaluations << "\n";
    o << "ard = " << (e.ard ? "true" : "false") << "\n";
    o << "members = " << e.members << "\n";
    o << "ridge = " << format_number(e.ridge) << "\n";
  }
  for (const auto& m : cfg.methods) {
    o << "\n[method." << to_string(m.method) << "]\n";
    if (m.temperature) o << "temperature = " << format_number(*m.temperature) << "\n";
    o << "samples = " << m.sundin_samples << "\n";
    o << "grid_size = " << m.eig_grid_size << "\n";
  }
  return o.str();
}

// ---- cells ------------------------------------------------------------------

std::string CellId::str() const {
  return dataset + "/" + variant + "/" + estimator + "/" + method + "/" + std::to_string(seed);
}

std::vector<CellId> enumerate_cells(const ExperimentConfig& cfg) {
  std::vector<CellId> cells;
  for (const auto& v : cfg.variants)
    for (const auto& e : cfg.estimators)
      for (const auto& m : cfg.methods)
        for (std::uint64_t s : cfg.seeds) cells.push_back({to_string(cfg.dataset), v, to_string(e.kind), to_string(m.method), s});
  return cells;
}

BenchmarkSpec benchmark_for(const ExperimentConfig& cfg, const std::string& variant) {
  BenchmarkSpec b;
  b.name = cfg.dataset;
  b.shift = variant == "shift";
  b.pool = cfg.pool;
  b.validation = cfg.validation;
  b.test = cfg.test;
  b.covariates_path = cfg.covariates;
  return b;
}

LoopConfig loop_config_for(const ExperimentConfig& cfg, const CellId& cell) {
  LoopConfig lc;
  lc.n_init = cfg.loop.n_init;
  lc.batch_size = cfg.loop.batch_size;
  lc.budget = cfg.loop.effective_budget();
  lc.refit_hyperparams = cfg.loop.refit_hyperparams;
  const auto est = std::find_if(cfg.estimators.begin(), cfg.estimators.end(),
                                [&](const EstimatorConfig& e) { return to_string(e.kind) == cell.estimator; });
  const auto met = std::find_if(cfg.methods.begin(), cfg.methods.end(),
                                [&](const MethodSpec& m) { return to_string(m.method) == cell.method; });
  if (est == cfg.estimators.end() || met == cfg.methods.end()) throw InputError("cell not in config: " + cell.str());
  lc.estimator = *est;
  lc.method = met->method;
  lc.temperature = met->temperature;
  lc.acquisition.sundin_samples = met->sundin_samples;
  lc.acquisition.eig_grid_size = met->eig_grid_size;
  lc.acquisition.max_targets = cfg.loop.max_targets;
  lc.acquisition.threads = cfg.loop.threads;
  lc.target = cell.variant == "shift" ? TargetMode::test : TargetMode::pool;
  lc.seed = cell.seed;
  return lc;
}

RunRecord run_cell(const ExperimentConfig& cfg, const CellId& cell) {
  RunRecord record;
  try {
    const DatasetSplits splits = build_benchmark(benchmark_for(cfg, cell.variant), cell.seed);
    const FactualOracle oracle(splits.pool.x, splits.pool.t, splits.pool.y);
    const GroundTruthOracle pool_truth(splits.pool.x, splits.pool.mu0, splits.pool.mu1, splits.pool.tau_true);
    const GroundTruthOracle test_truth(splits.test.x, splits.test.mu0, splits.test.mu1, splits.test.tau_true);
    const Evaluator evaluate = [&](const CateModel& m) { return evaluate_model(m, pool_truth, test_truth); };
    record = run_active_learning(loop_config_for(cfg, cell), oracle, splits.test.x, splits.test.t, evaluate);
  } catch (const std::exception& e) {
    record.failed = true;
    record.failure = e.what();
  }
  record.dataset = cell.dataset;
  record.variant = cell.variant;
  record.estimator = cell.estimator;
  record.method = cell.method;
  record.seed = cell.seed;
  return record;
}

std::vector<std::string> format_rows(const RunRecord& r) {
  const std::string prefix =
      r.dataset + "," + r.variant + "," + r.estimator + "," + r.method + "," + std::to_string(r.seed) + ",";
  const std::string status = r.failed ? "failed" : "ok";
  std::vector<std::string> rows;
  for (const auto& s : r.steps)
    rows.push_back(prefix + std::to_string(s.step) + "," + std::to_string(s.n_labeled) + "," +
                   format_number(s.sqrt_pehe_pool) + "," + format_number(s.sqrt_pehe_test) + "," +
                   format_number(s.acq_seconds) + "," + status);
  if (rows.empty()) rows.push_back(prefix + ",,,,," + status);
  return rows;
}

// ---- files ------------------------------------------------------------------

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw InputError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw InputError("cannot rename '" + tmp.string() + "' to '" + path + "': " + ec.message());
}

std::string resolve_output_dir(const ExperimentConfig& cfg, const RunOptions& opt) {
  if (opt.out) return *opt.out;
  if (!cfg.output.empty()) return cfg.output;
  if (const char* root = std::getenv(kOutputRootEnv); root != nullptr && *root != '\0')
    return (fs::path(root) / to_string(cfg.dataset)).string();
  return "results";
}

namespace {

using nlohmann::json;

struct ManifestState {
  std::map<CellId, std::pair<std::string, std::string>> status;  // status, failure
};

std::string manifest_text(const ExperimentConfig& cfg, const std::vector<CellId>& cells, const ManifestState& st) {
  json j;
  j["version"] = kVersion;
  j["config"] = serialize_config(cfg);
  j["results"] = "results.csv";
  j["columns"] = kResultsHeader;
  json arr = json::array();
  for (const auto& c : cells) {
    json e;
    e["dataset"] = c.dataset;
    e["variant"] = c.variant;
    e["estimator"] = c.estimator;
    e["method"] = c.method;
    e["seed"] = c.seed;
    const auto it = st.status.find(c);
    e["status"] = it == st.status.end() ? "pending" : it->second.first;
    if (it != st.status.end() && !it->second.second.empty()) e["failure"] = it->second.second;
    arr.push_back(e);
  }
  j["cells"] = arr;
  return j.dump(2) + "\n";
}

ManifestState load_manifest(const fs::path& path) {
  ManifestState st;
  std::ifstream in(path);
  if (!in) return st;
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw InputError("cannot parse manifest '" + path.string() + "': " + e.what());
  }
  for (const auto& e : j.value("cells", json::array())) {
    const std::string status = e.value("status", "pending");
    if (status == "pending") continue;
    CellId c{e.at("dataset"), e.at("variant"), e.at("estimator"), e.at("method"), e.at("seed").get<std::uint64_t>()};
    st.status[c] = {status, e.value("failure", "")};
  }
  return st;
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

CellId cell_of_row(const std::vector<std::string>& f) {
  CellId c{f[0], f[1], f[2], f[3], 0};
  std::from_chars(f[4].data(), f[4].data() + f[4].size(), c.seed);
  return c;
}

}  // namespace

int run_matrix(const ExperimentConfig& cfg, const RunOptions& opt) {
  cfg.validate();
  const fs::path out_dir = resolve_output_dir(cfg, opt);
  fs::create_directories(out_dir);
  const fs::path results = out_dir / "results.csv";
  const fs::path manifest = out_dir / "manifest.json";
  const std::vector<CellId> cells = enumerate_cells(cfg);

  ManifestState state;
  if (fs::exists(results) && !opt.append)
    throw InputError("output '" + out_dir.string() + "' already has results.csv; use --append to resume");
  if (opt.append) {
    state = load_manifest(manifest);
    // keep only rows of cells the manifest records as finished
    std::string kept = std::string(kResultsHeader) + "\n";
    if (std::ifstream in(results); in) {
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_row(line);
        if (f.size() == 11 && state.status.count(cell_of_row(f))) kept += line + "\n";
      }
    }
    write_file_atomic(results.string(), kept);
  } else {
    write_file_atomic(results.string(), std::string(kResultsHeader) + "\n");
  }

  std::vector<CellId> todo;
  for (const auto& c : cells)
    if (!state.status.count(c)) todo.push_back(c);
  write_file_atomic(manifest.string(), manifest_text(cfg, cells, state));

  std::ofstream sink(results, std::ios::app);
  if (!sink) throw InputError("cannot open '" + results.string() + "' for appending");
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  const int jobs = std::max(1, opt.jobs.value_or(cfg.jobs));
  const auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      const RunRecord r = run_cell(cfg, todo[i]);
      std::lock_guard<std::mutex> lock(mu);
      for (const auto& row : format_rows(r)) {
        sink << row << "\n";
        sink.flush();
      }
      state.status[todo[i]] = {r.failed ? "failed" : "ok", r.failure};
      write_file_atomic(manifest.string(), manifest_text(cfg, cells, state));
      if (!opt.quiet)
        std::cerr << (r.failed ? "FAILED " : "done   ") << todo[i].str()
                  << (r.failed ? ": " + r.failure : std::string()) << "\n";
    }
  };
  std::vector<std::thread> pool;
  for (int k = 1; k < std::min<int>(jobs, static_cast<int>(todo.size())); ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (!sink) throw InputError("write failed for '" + results.string() + "'");

  for (const auto& [c, s] : state.status)
    if (s.first != "ok") return 1;
  return 0;
}

// ---- summaries --------------------------------------------------------------

std::vector<RunRecord> read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open results '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != kResultsHeader)
    throw InputError(path + ": row 1: header does not match the results schema");
  std::map<CellId, RunRecord> runs;
  std::vector<CellId> order;
  Index row = 1;
  const auto num = [&](const std::string& s, const char* col) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
      throw InputError(path + ": row " + std::to_string(row) + ": column " + col + ": not a number: '" + s + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_row(line);
    if (f.size() != 11)
      throw InputError(path + ": row " + std::to_string(row) + ": expected 11 columns, got " + std::to_string(f.size()));
    const std::string& status = f[10];
    if (status != "ok" && status != "failed")
      throw InputError(path + ": row " + std::to_string(row) + ": unknown status '" + status + "'");
    const CellId c = cell_of_row(f);
    if (std::to_string(c.seed) != f[4])
      throw InputError(path + ": row " + std::to_string(row) + ": column seed: not an integer: '" + f[4] + "'");
    auto [it, inserted] = runs.try_emplace(c);
    RunRecord& r = it->second;
    if (inserted) {
      order.push_back(c);
      r.dataset = c.dataset;
      r.variant = c.variant;
      r.estimator = c.estimator;
      r.method = c.method;
      r.seed = c.seed;
    }
    if (status == "failed") r.failed = true;
    if (f[5].empty() && status == "failed") continue;
    StepEntry e;
    e.step = static_cast<int>(num(f[5], "step"));
    e.n_labeled = static_cast<Index>(num(f[6], "n_labeled"));
    e.sqrt_pehe_pool = num(f[7], "sqrt_pehe_pool");
    e.sqrt_pehe_test = num(f[8], "sqrt_pehe_test");
    e.acq_seconds = num(f[9], "acq_seconds");
    if (!r.steps.empty() && e.n_labeled <= r.steps.back().n_labeled)
      throw InputError(path + ": row " + std::to_string(row) + ": n_labeled does not increase within " + c.str());
    r.steps.push_back(e);
  }
  std::vector<RunRecord> out;
  for (const auto& c : order) out.push_back(runs[c]);
  return out;
}

std::string format_summary_row(const SummaryRow& r) {
  std::string s = r.key.dataset + "," + r.key.variant + "," + r.key.estimator + "," + r.key.method + "," +
                  std::to_string(r.key.step) + ",";
  if (r.key.step >= 0) s += std::to_string(r.n_labeled);
  s += "," + r.metric + ",";
  if (r.moments.count > 0) s += format_number(r.moments.mean) + "," + format_number(r.moments.sd());
  else s += ",";
  s += "," + std::to_string(r.moments.count) + "," + std::to_string(r.failed_runs);
  return s;
}

void emit_summary(const std::string& results_path, const std::string& out_dir) {
  const std::vector<RunRecord> runs = read_results(results_path);
  const fs::path dir = out_dir.empty() ? fs::path(results_path).parent_path() : fs::path(out_dir);
  if (!dir.empty()) fs::create_directories(dir);
  std::string summary = std::string(kSummaryHeader) + "\n";
  for (const auto& r : aggregate_runs(runs)) summary += format_summary_row(r) + "\n";
  write_file_atomic((dir / "summary.csv").string(), summary);
  std::string rel = std::string(kSummaryHeader) + "\n";
  for (const auto& r : relative_improvement_rows(runs)) rel += format_summary_row(r) + "\n";
  write_file_atomic((dir / "relative_improvement.csv").string(), rel);
}

void write_dataset_csv(const Dataset& d, const std::vector<std::string>& covariate_names, const std::string& path) {
  if (static_cast<Index>(covariate_names.size()) != d.dim()) throw InputError("dataset dump: column names mismatch");
  std::ostringstream o;
  for (const auto& n : covariate_names) o << n << ",";
  o << "t,y,mu0,mu1,tau_true,propensity_true\n";
  for (Index i = 0; i < d.size(); ++i) {
    for (Index j = 0; j < d.dim(); ++j) o << format_number(d.x(i, j)) << ",";
    o << d.t(i) << "," << format_number(d.y(i)) << "," << format_number(d.mu0(i)) << "," << format_number(d.mu1(i))
      << "," << format_number(d.tau_true(i)) << ",";
    if (d.propensity_true.size() > 0) o << format_number(d.propensity_true(i));
    o << "\n";
  }
  write_file_atomic(path, o.str());
}

}  // namespace activecate
