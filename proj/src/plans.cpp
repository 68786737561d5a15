#include "hrc/plans.hpp"

#include <algorithm>
#include <cmath>

#include "hrc/log.hpp"

namespace hrc::plans {

AppendOutcome appendAction(ObservedActionLog& log, const PlanLibrary& lib, const Action& a,
                           double t) {
  if (!lib.feasible(a)) {
    logging::debug("observed action rejected as infeasible: " + lib.actionName(a));
    return AppendOutcome::RejectedInfeasible;
  }
  if (!log.entries.empty() && log.entries.back().action == a) {
    auto& e = log.entries.back();
    e.repeats += 1;
    e.last_t = t;
    log.pending_count = 0;
    return AppendOutcome::MergedRepeat;
  }
  if (log.pending_count > 0 && log.pending == a) {
    log.pending_count += 1;
  } else {
    log.pending = a;
    log.pending_count = 1;
    log.pending_first_t = t;
  }
  if (log.pending_count < log.hold) return AppendOutcome::Pending;
  log.entries.push_back({a, log.pending_count, log.pending_first_t, t});
  log.pending_count = 0;
  return AppendOutcome::Appended;
}

namespace {

void finalizeBelief(PlanBelief& b, const PlanLibrary& lib, const std::vector<double>& dist) {
  const size_t n = lib.plans.size();
  b.p.assign(n, 0.0);
  double sum = 0.0;
  for (size_t g = 0; g < n; ++g) {
    b.p[g] = lib.prior[g] * std::exp(-b.lambda * dist[g]);
    sum += b.p[g];
  }
  if (sum <= 0.0) {
    // All plans exponentially far away; fall back to the prior.
    logging::warn("plan posterior underflowed; falling back to the prior");
    b.p = lib.prior;
    sum = 1.0;
  } else {
    for (double& v : b.p) v /= sum;
  }
  b.top = 0;
  b.top_tied = false;
  for (size_t g = 1; g < n; ++g)
    if (b.p[g] > b.p[static_cast<size_t>(b.top)]) b.top = static_cast<int>(g);
  for (size_t g = 0; g < n; ++g)
    if (static_cast<int>(g) != b.top && b.p[g] == b.p[static_cast<size_t>(b.top)])
      b.top_tied = true;
  b.second = -1;
  for (size_t g = 0; g < n; ++g) {
    if (static_cast<int>(g) == b.top) continue;
    if (b.second < 0 || b.p[g] > b.p[static_cast<size_t>(b.second)]) b.second = static_cast<int>(g);
  }
}

}  // namespace

PlanBelief inferPlan(const std::vector<Action>& dedup_log, const PlanLibrary& lib,
                     double lambda_d, const align::LocalCost& cost,
                     const align::StepPattern& steps) {
  PlanBelief b;
  b.lambda = lambda_d;
  if (dedup_log.empty()) {
    std::vector<double> zero(lib.plans.size(), 0.0);
    finalizeBelief(b, lib, zero);
    b.p = lib.prior;  // exp(0) path above already yields the prior; keep exact
    return b;
  }
  std::vector<double> dist(lib.plans.size(), 0.0);
  b.alignments.resize(lib.plans.size());
  for (size_t g = 0; g < lib.plans.size(); ++g) {
    b.alignments[g] = align::openEndDtw(dedup_log, lib.plans[g].reference, cost, steps);
    dist[g] = b.alignments[g].distance;
  }
  finalizeBelief(b, lib, dist);
  return b;
}

Action correctAction(const PlanBelief& belief, const PlanLibrary& lib) {
  if (belief.top < 0 || belief.alignments.empty()) return Action{};
  const auto& al = belief.alignments[static_cast<size_t>(belief.top)];
  if (!al.feasible || al.matched_length < 1) return Action{};
  return lib.plans[static_cast<size_t>(belief.top)]
      .reference[static_cast<size_t>(al.matched_length - 1)];
}

PlanInferenceEngine::PlanInferenceEngine(const PlanLibrary& lib, double lambda_d,
                                         align::LocalCost cost, align::StepPattern steps)
    : lib_(&lib), lambda_(lambda_d) {
  rows_.reserve(lib.plans.size());
  for (const auto& p : lib.plans) rows_.emplace_back(p.reference, cost, steps);
}

void PlanInferenceEngine::observe(const Action& dedup_symbol) {
  for (auto& r : rows_) r.append(dedup_symbol);
  ++observed_;
}

void PlanInferenceEngine::reset() {
  for (auto& r : rows_) r.reset();
  observed_ = 0;
}

PlanBelief PlanInferenceEngine::belief() const {
  PlanBelief b;
  b.lambda = lambda_;
  if (observed_ == 0) {
    std::vector<double> zero(lib_->plans.size(), 0.0);
    finalizeBelief(b, *lib_, zero);
    b.p = lib_->prior;
    return b;
  }
  std::vector<double> dist(rows_.size(), 0.0);
  b.alignments.resize(rows_.size());
  for (size_t g = 0; g < rows_.size(); ++g) {
    const auto best = rows_[g].best();
    dist[g] = best.distance;
    align::AlignmentResult r;
    r.feasible = best.feasible;
    r.distance = best.distance;
    r.raw_cost = best.raw_cost;
    r.weight_sum = best.weight_sum;
    r.matched_length = best.matched_length;
    b.alignments[g] = std::move(r);
  }
  finalizeBelief(b, *lib_, dist);
  return b;
}

Action PlanInferenceEngine::correctedAction() const { return correctAction(belief(), *lib_); }

std::vector<int> consistentPlans(const PlanLibrary& lib, const std::vector<Action>& prefix) {
  std::vector<int> out;
  for (const auto& plan : lib.plans) {
    if (prefix.size() > plan.reference.size()) continue;
    if (std::equal(prefix.begin(), prefix.end(), plan.reference.begin()))
      out.push_back(plan.id);
  }
  return out;
}

}  // namespace hrc::plans
