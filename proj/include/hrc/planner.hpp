#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "hrc/domain.hpp"
#include "hrc/plans.hpp"

namespace hrc::planner {

enum class DecideBranch { Commit, Agreement, Wait };

// Logical robot-side state. Timing (tick advancement, durations) is driven by
// the caller; this module owns the decision and reconciliation rules.
struct PlannerState {
  double threshold = 0.70;

  std::optional<Action> doing;   // in-flight robot action
  double progress_s = 0.0;       // elapsed execution time of `doing`
  double duration_s = 0.0;       // nominal duration of `doing`
  bool recovering = false;       // undoing `doing` instead of executing it
  double recovery_remaining_s = 0.0;

  std::deque<Action> buffer;           // pending deliveries, front executes next
  std::vector<Action> delivered;       // completed (not recovered) deliveries, in order

  struct Event {
    double t = 0.0;
    std::string kind;  // start | delivered | recovery_start | recovery_end | error
    Action action;
  };
  std::vector<Event> events;

  bool idle() const { return !doing.has_value(); }
};

// Robot actions of `plan` not yet covered by `delivered` (multiset semantics:
// each completed delivery consumes one matching step), in plan order.
std::vector<Action> remainingRobotActions(const Plan& plan, const std::vector<Action>& delivered);

// One decision pass over a fresh plan posterior:
//   - argmax probability above threshold: buffer := remaining robot actions
//     of that plan (replaces previous buffer);
//   - else if the top two plans agree on the next robot action: buffer := that
//     single action;
//   - else: wait (buffer untouched).
DecideBranch decide(PlannerState& st, const plans::PlanBelief& belief, const PlanLibrary& lib,
                    double now);

// Aborts the in-flight action when it contradicts the buffer head. The undo
// costs the time already invested (progress so far); a recovered delivery is
// *not* recorded as delivered. Returns true when a recovery was initiated.
// An in-flight action equal to the buffer head is reabsorbed (popped) instead.
bool reconcile(PlannerState& st, double now);

// Completion bookkeeping for the in-flight action (normal finish -> delivered;
// recovery finish -> action dropped). A finish event while idle is an error:
// logged, state unchanged.
void onActionFinished(PlannerState& st, double now);

// Starts the buffer head if idle. Returns the started action, if any.
std::optional<Action> startNextIfIdle(PlannerState& st, double duration_s, double now);

}  // namespace hrc::planner
