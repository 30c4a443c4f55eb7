#include "activecate/evaluation.hpp"

#include "activecate/cate_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace activecate {

void RunRecord::validate() const {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0 && steps[i].n_labeled <= steps[i - 1].n_labeled)
      throw InputError("run record: n_labeled must be strictly increasing");
    if (steps[i].sqrt_pehe_pool < 0.0 || steps[i].sqrt_pehe_test < 0.0)
      throw InputError("run record: negative PEHE");
  }
}

double sqrt_pehe(const Vector& tau_hat, const Vector& tau_true) {
  if (tau_hat.size() == 0) throw InputError("sqrt_pehe: empty input");
  if (tau_hat.size() != tau_true.size()) throw InputError("sqrt_pehe: length mismatch");
  return std::sqrt((tau_hat - tau_true).squaredNorm() / static_cast<double>(tau_hat.size()));
}

std::vector<std::optional<double>> relative_improvement(const std::vector<double>& method_curve,
                                                        const std::vector<double>& random_curve) {
  if (method_curve.size() != random_curve.size()) throw InputError("relative improvement: curves differ in length");
  std::vector<std::optional<double>> out(method_curve.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    if (random_curve[k] != 0.0) out[k] = (random_curve[k] - method_curve[k]) / random_curve[k];
  return out;
}

// ---- moments ----------------------------------------------------------------

void Moments::add(double v) {
  ++count;
  const double delta = v - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (v - mean);
}

Moments Moments::merge(const Moments& a, const Moments& b) {
  if (a.count == 0) return b;
  if (b.count == 0) return a;
  Moments m;
  m.count = a.count + b.count;
  const double delta = b.mean - a.mean;
  const double na = static_cast<double>(a.count);
  const double nb = static_cast<double>(b.count);
  m.mean = a.mean + delta * nb / static_cast<double>(m.count);
  m.m2 = a.m2 + b.m2 + delta * delta * na * nb / static_cast<double>(m.count);
  return m;
}

double Moments::sd() const {
  if (count < 2) return 0.0;
  return std::sqrt(std::max(0.0, m2 / static_cast<double>(count - 1)));
}

// ---- aggregation ------------------------------------------------------------

namespace {

struct GroupKey {
  std::string dataset, variant, estimator, method;
  auto operator<=>(const GroupKey&) const = default;
};

GroupKey group_of(const RunRecord& r) { return {r.dataset, r.variant, r.estimator, r.method}; }

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"sqrt_pehe_pool", "sqrt_pehe_test", "acq_seconds"};
  return names;
}

double metric_value(const StepEntry& e, std::size_t m) {
  return m == 0 ? e.sqrt_pehe_pool : m == 1 ? e.sqrt_pehe_test : e.acq_seconds;
}

// Records sorted by seed so that accumulation order is independent of input order.
std::map<GroupKey, std::vector<const RunRecord*>> group_records(const std::vector<RunRecord>& records) {
  std::map<GroupKey, std::vector<const RunRecord*>> groups;
  for (const auto& r : records) groups[group_of(r)].push_back(&r);
  for (auto& [k, v] : groups)
    std::stable_sort(v.begin(), v.end(), [](const RunRecord* a, const RunRecord* b) { return a->seed < b->seed; });
  return groups;
}

void check_grid(const std::vector<const RunRecord*>& runs) {
  const RunRecord* ref = nullptr;
  for (const RunRecord* r : runs) {
    if (r->failed) continue;
    if (ref == nullptr) {
      ref = r;
      continue;
    }
    bool same = r->steps.size() == ref->steps.size();
    for (std::size_t k = 0; same && k < r->steps.size(); ++k)
      same = r->steps[k].n_labeled == ref->steps[k].n_labeled && r->steps[k].step == ref->steps[k].step;
    if (!same)
      throw InputError("aggregate: runs of " + r->dataset + "/" + r->variant + "/" + r->estimator + "/" + r->method +
                       " have different step grids (seeds " + std::to_string(ref->seed) + " and " +
                       std::to_string(r->seed) + ")");
  }
}

bool row_less(const SummaryRow& a, const SummaryRow& b) {
  if (a.key != b.key) return a.key < b.key;
  return a.metric < b.metric;
}

}  // namespace

std::vector<SummaryRow> aggregate_runs(const std::vector<RunRecord>& records) {
  std::vector<SummaryRow> out;
  for (const auto& [g, runs] : group_records(records)) {
    check_grid(runs);
    Index failed = 0;
    const RunRecord* ref = nullptr;
    for (const RunRecord* r : runs) {
      if (r->failed)
        ++failed;
      else if (ref == nullptr)
        ref = r;
    }
    if (ref == nullptr) {
      SummaryRow row;
      row.key = {g.dataset, g.variant, g.estimator, g.method, 0};
      row.metric = metric_names()[0];
      row.failed_runs = failed;
      out.push_back(row);
      continue;
    }
    for (std::size_t k = 0; k < ref->steps.size(); ++k) {
      for (std::size_t m = 0; m < metric_names().size(); ++m) {
        SummaryRow row;
        row.key = {g.dataset, g.variant, g.estimator, g.method, ref->steps[k].step};
        row.n_labeled = ref->steps[k].n_labeled;
        row.metric = metric_names()[m];
        row.failed_runs = failed;
        for (const RunRecord* r : runs)
          if (!r->failed) row.moments.add(metric_value(r->steps[k], m));
        out.push_back(row);
      }
    }
  }
  std::sort(out.begin(), out.end(), row_less);
  return out;
}

std::vector<SummaryRow> merge_summaries(const std::vector<SummaryRow>& a, const std::vector<SummaryRow>& b) {
  std::map<std::pair<SummaryKey, std::string>, SummaryRow> rows;
  for (const auto* side : {&a, &b})
    for (const auto& r : *side) {
      auto [it, inserted] = rows.try_emplace({r.key, r.metric}, r);
      if (inserted) continue;
      SummaryRow& dst = it->second;
      if (dst.n_labeled != r.n_labeled && dst.moments.count > 0 && r.moments.count > 0)
        throw InputError("merge: step grids differ");
      if (dst.moments.count == 0) dst.n_labeled = r.n_labeled;
      dst.moments = Moments::merge(dst.moments, r.moments);
      dst.failed_runs += r.failed_runs;
    }
  std::vector<SummaryRow> out;
  for (auto& [k, v] : rows) out.push_back(v);
  std::sort(out.begin(), out.end(), row_less);
  return out;
}

std::vector<SummaryRow> relative_improvement_rows(const std::vector<RunRecord>& records) {
  const auto groups = group_records(records);
  std::vector<SummaryRow> out;
  for (const auto& [g, runs] : groups) {
    const auto rnd = groups.find(GroupKey{g.dataset, g.variant, g.estimator, "random"});
    if (rnd == groups.end()) continue;
    check_grid(runs);
    std::map<std::uint64_t, const RunRecord*> random_by_seed;
    for (const RunRecord* r : rnd->second)
      if (!r->failed) random_by_seed.emplace(r->seed, r);
    if (random_by_seed.empty()) continue;
    const RunRecord* ref = random_by_seed.begin()->second;

    for (int which = 0; which < 2; ++which) {
      const std::string base = which == 0 ? "rel_improvement_pool" : "rel_improvement_test";
      const auto pick = [which](const StepEntry& e) { return which == 0 ? e.sqrt_pehe_pool : e.sqrt_pehe_test; };
      const std::size_t n_steps = ref->steps.size();
      std::vector<Moments> paired(n_steps), method_mean(n_steps), random_mean(n_steps);
      Moments paired_all;
      for (const RunRecord* r : runs) {
        if (r->failed) continue;
        if (r->steps.size() != n_steps) throw InputError("relative improvement: step grids differ from random");
        for (std::size_t k = 0; k < n_steps; ++k) method_mean[k].add(pick(r->steps[k]));
        const auto it = random_by_seed.find(r->seed);
        if (it == random_by_seed.end()) continue;
        Moments per_seed;
        for (std::size_t k = 0; k < n_steps; ++k) {
          const double rv = pick(it->second->steps[k]);
          if (rv == 0.0) continue;
          const double ri = (rv - pick(r->steps[k])) / rv;
          paired[k].add(ri);
          per_seed.add(ri);
        }
        if (per_seed.count > 0) paired_all.add(per_seed.mean);
      }
      for (const auto& [seed, r] : random_by_seed)
        for (std::size_t k = 0; k < n_steps; ++k) random_mean[k].add(pick(r->steps[k]));

      Moments of_means_all;
      for (std::size_t k = 0; k < n_steps; ++k) {
        SummaryRow row;
        row.key = {g.dataset, g.variant, g.estimator, g.method, ref->steps[k].step};
        row.n_labeled = ref->steps[k].n_labeled;
        row.metric = base;
        row.moments = paired[k];
        out.push_back(row);
        if (random_mean[k].mean != 0.0 && method_mean[k].count > 0) {
          SummaryRow om = row;
          om.metric = base + "_of_means";
          om.moments = Moments{};
          const double v = (random_mean[k].mean - method_mean[k].mean) / random_mean[k].mean;
          om.moments.add(v);
          of_means_all.add(v);
          out.push_back(om);
        }
      }
      SummaryRow all;
      all.key = {g.dataset, g.variant, g.estimator, g.method, -1};
      all.metric = base;
      all.moments = paired_all;
      out.push_back(all);
      SummaryRow all_means = all;
      all_means.metric = base + "_of_means";
      all_means.moments = Moments{};
      if (of_means_all.count > 0) all_means.moments.add(of_means_all.mean);
      out.push_back(all_means);
    }
  }
  std::sort(out.begin(), out.end(), row_less);
  return out;
}

// ---- ground truth -----------------------------------------------------------

GroundTruthOracle::GroundTruthOracle(Matrix x, Vector mu0, Vector mu1, Vector tau_true)
    : x_(std::move(x)), mu0_(std::move(mu0)), mu1_(std::move(mu1)), tau_(std::move(tau_true)) {
  if (mu0_.size() != x_.rows() || mu1_.size() != x_.rows() || tau_.size() != x_.rows())
    throw InputError("ground truth: field lengths differ");
}

void GroundTruthOracle::log(const std::string& tag, const char* field) const { log_.push_back({tag, field}); }

const Vector& GroundTruthOracle::tau_true(const std::string& tag) const {
  log(tag, "tau_true");
  return tau_;
}

const Vector& GroundTruthOracle::mu0(const std::string& tag) const {
  log(tag, "mu0");
  return mu0_;
}

const Vector& GroundTruthOracle::mu1(const std::string& tag) const {
  log(tag, "mu1");
  return mu1_;
}

std::vector<GroundTruthOracle::Access> GroundTruthOracle::accesses() const { return log_; }

PeheScores evaluate_model(const CateModel& model, const GroundTruthOracle& pool, const GroundTruthOracle& test) {
  PeheScores s;
  s.pool = sqrt_pehe(model.cate_mean(pool.covariates()), pool.tau_true(kEvaluationTag));
  s.test = sqrt_pehe(model.cate_mean(test.covariates()), test.tau_true(kEvaluationTag));
  return s;
}

}  // namespace activecate
