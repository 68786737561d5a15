#include "hrc/planner.hpp"

#include <algorithm>

#include "hrc/log.hpp"

namespace hrc::planner {

std::vector<Action> remainingRobotActions(const Plan& plan,
                                          const std::vector<Action>& delivered) {
  std::vector<Action> pool = delivered;
  std::vector<Action> out;
  for (const auto& step : plan.robot_sequence) {
    auto it = std::find(pool.begin(), pool.end(), step.action);
    if (it != pool.end()) {
      pool.erase(it);  // this delivery is already on the table
    } else {
      out.push_back(step.action);
    }
  }
  return out;
}

namespace {

std::optional<Action> nextRobotAction(const PlanLibrary& lib, int plan_id,
                                      const std::vector<Action>& delivered) {
  const auto remaining = remainingRobotActions(lib.plans[static_cast<size_t>(plan_id)], delivered);
  if (remaining.empty()) return std::nullopt;
  return remaining.front();
}

}  // namespace

DecideBranch decide(PlannerState& st, const plans::PlanBelief& belief, const PlanLibrary& lib,
                    double now) {
  (void)now;
  if (belief.top < 0 || belief.p.empty()) return DecideBranch::Wait;

  if (!belief.top_tied && belief.p[static_cast<size_t>(belief.top)] > st.threshold) {
    const auto remaining =
        remainingRobotActions(lib.plans[static_cast<size_t>(belief.top)], st.delivered);
    st.buffer.assign(remaining.begin(), remaining.end());
    return DecideBranch::Commit;
  }

  if (belief.second >= 0) {
    const auto a1 = nextRobotAction(lib, belief.top, st.delivered);
    const auto a2 = nextRobotAction(lib, belief.second, st.delivered);
    if (a1 && a2 && *a1 == *a2) {
      st.buffer.assign(1, *a1);
      return DecideBranch::Agreement;
    }
  }
  return DecideBranch::Wait;
}

bool reconcile(PlannerState& st, double now) {
  if (!st.doing || st.recovering || st.buffer.empty()) return false;
  if (st.buffer.front() == *st.doing) {
    // The plan still wants what is already in flight; don't deliver it twice.
    st.buffer.pop_front();
    return false;
  }
  st.recovering = true;
  st.recovery_remaining_s = st.progress_s;
  st.events.push_back({now, "recovery_start", *st.doing});
  return true;
}

void onActionFinished(PlannerState& st, double now) {
  if (!st.doing) {
    logging::error("robot finish event while idle; ignored");
    st.events.push_back({now, "error", Action{}});
    return;
  }
  if (st.recovering) {
    st.events.push_back({now, "recovery_end", *st.doing});
    st.recovering = false;
    st.recovery_remaining_s = 0.0;
  } else {
    st.delivered.push_back(*st.doing);
    st.events.push_back({now, "delivered", *st.doing});
  }
  st.doing.reset();
  st.progress_s = 0.0;
  st.duration_s = 0.0;
}

std::optional<Action> startNextIfIdle(PlannerState& st, double duration_s, double now) {
  if (st.doing || st.buffer.empty()) return std::nullopt;
  st.doing = st.buffer.front();
  st.buffer.pop_front();
  st.progress_s = 0.0;
  st.duration_s = duration_s;
  st.events.push_back({now, "start", *st.doing});
  return st.doing;
}

}  // namespace hrc::planner
