#pragma once

#include <vector>

#include "hrc/alignment.hpp"
#include "hrc/domain.hpp"

namespace hrc::plans {

// Append-only log of estimated human actions with consecutive duplicates
// merged. `hold` > 1 additionally requires that many consecutive identical
// observations before a *new* entry is accepted (debounces per-tick label
// flicker from a noisy recognizer; repeats of the current entry always merge
// immediately and clear any pending candidate).
struct ObservedActionLog {
  struct Entry {
    Action action;
    int repeats = 1;
    double first_t = 0.0;
    double last_t = 0.0;
  };
  std::vector<Entry> entries;
  int hold = 1;

  Action pending{};
  int pending_count = 0;
  double pending_first_t = 0.0;

  std::vector<Action> sequence() const {
    std::vector<Action> s;
    s.reserve(entries.size());
    for (const auto& e : entries) s.push_back(e.action);
    return s;
  }
  void clear() {
    entries.clear();
    pending_count = 0;
  }
};

enum class AppendOutcome { Appended, MergedRepeat, Pending, RejectedInfeasible };

// Folds one estimated (motion, object) pair into the log. Infeasible pairs
// are rejected (recognizer fault signalled to the caller, logged at debug).
AppendOutcome appendAction(ObservedActionLog& log, const PlanLibrary& lib, const Action& a,
                           double t);

struct PlanBelief {
  std::vector<double> p;        // posterior over library plans
  int top = -1;                 // argmax; ties resolve to the lowest plan id
  bool top_tied = false;        // true when the argmax was a tie
  int second = -1;              // runner-up (for the agreement branch)
  double lambda = 0.0;
  // Per-plan open-end alignments of the dedup log against the plan reference.
  // Empty when the log is empty (belief is then the prior).
  std::vector<align::AlignmentResult> alignments;
};

// Posterior over plans: p(g) ∝ prior(g) * exp(-lambda_d * D_oe(log, ref_g)).
// Empty log yields the prior.
PlanBelief inferPlan(const std::vector<Action>& dedup_log, const PlanLibrary& lib,
                     double lambda_d,
                     const align::LocalCost& cost = align::LocalCost::discrete01(),
                     const align::StepPattern& steps = align::StepPattern{});

// Posterior-corrected current action: the reference action of the most likely
// plan at that plan's matched open-end index. Invalid action when the log is
// empty.
Action correctAction(const PlanBelief& belief, const PlanLibrary& lib);

// Streaming twin of inferPlan: one incremental DP row per plan, updated per
// appended dedup symbol. Distances and posteriors are identical to the
// recompute-from-scratch path (asserted in tests); alignment paths are not
// materialized here.
class PlanInferenceEngine {
 public:
  PlanInferenceEngine(const PlanLibrary& lib, double lambda_d,
                      align::LocalCost cost = align::LocalCost::discrete01(),
                      align::StepPattern steps = align::StepPattern{});

  void observe(const Action& dedup_symbol);
  void reset();
  int observedCount() const { return observed_; }

  PlanBelief belief() const;
  Action correctedAction() const;

 private:
  const PlanLibrary* lib_;
  double lambda_;
  std::vector<align::IncrementalOpenEnd> rows_;
  int observed_ = 0;
};

// Plans whose reference sequence starts with the given executed prefix;
// the ground-truth consistency set used by recognition metrics.
std::vector<int> consistentPlans(const PlanLibrary& lib, const std::vector<Action>& prefix);

}  // namespace hrc::plans
