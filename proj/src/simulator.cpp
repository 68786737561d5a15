#include "hrc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "hrc/log.hpp"
#include "hrc/plans.hpp"
#include "hrc/rng.hpp"
#include "hrc/synth.hpp"

namespace hrc::sim {

using nlohmann::json;

std::string modeName(RecognitionMode m) {
  switch (m) {
    case RecognitionMode::Reactive: return "reactive";
    case RecognitionMode::Oracle: return "oracle";
    case RecognitionMode::Predictive: return "predictive";
  }
  return "?";
}

RecognitionMode modeFromName(const std::string& name) {
  if (name == "reactive") return RecognitionMode::Reactive;
  if (name == "oracle") return RecognitionMode::Oracle;
  if (name == "predictive") return RecognitionMode::Predictive;
  throw ValidationError("unknown recognition mode '" + name + "'");
}

ScenarioConfig defaultScenario() {
  ScenarioConfig cfg;
  cfg.channel_rates = {{"screwing", 0.834}, {"fetching", 0.642}, {"receiving", 0.591},
                       {"taping", 0.842}};
  return cfg;
}

namespace {

json vec3ToJson(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }
Eigen::Vector3d vec3FromJson(const json& j) {
  return Eigen::Vector3d(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

json actionToJson(const Action& a) {
  if (!a.valid()) return nullptr;
  return json::array({a.motion, a.object});
}
Action actionFromJson(const json& j) {
  if (j.is_null()) return Action{};
  return Action{j.at(0).get<int>(), j.at(1).get<int>()};
}

}  // namespace

json scenarioToJson(const ScenarioConfig& cfg) {
  json j;
  j["dt"] = cfg.dt;
  j["max_sim_s"] = cfg.max_sim_s;
  j["seed"] = cfg.seed;
  j["plan_id"] = cfg.plan_id;
  if (cfg.plan_switch)
    j["plan_switch"] = {{"to_plan", cfg.plan_switch->to_plan},
                        {"after_actions", cfg.plan_switch->after_actions}};
  else
    j["plan_switch"] = nullptr;
  j["behavior"] = cfg.behavior == HumanBehavior::Task ? "task" : "adversarial";
  j["human_action_s"] = cfg.human_action_s;
  j["robot_action_s"] = cfg.robot_action_s;
  j["human_jitter_sigma_s"] = cfg.human_jitter_sigma_s;
  j["duration_overrides"] = json::array();
  for (const auto& o : cfg.overrides)
    j["duration_overrides"].push_back(
        {{"robot", o.robot}, {"motion", o.motion}, {"object", o.object}, {"seconds", o.seconds}});
  j["lambda_d"] = cfg.lambda_d;
  j["threshold"] = cfg.threshold;
  j["dedup_hold_ticks"] = cfg.dedup_hold_ticks;
  j["use_classifier"] = cfg.use_classifier;
  j["channel_rates"] = cfg.channel_rates;
  j["channel_delta"] = cfg.channel_delta;
  j["channel_min_rate"] = cfg.channel_min_rate;
  j["perfect_objects"] = cfg.perfect_objects;
  j["motion_stickiness"] = cfg.motion_stickiness;
  j["object_stickiness"] = cfg.object_stickiness;
  j["value_beta"] = cfg.value.beta;
  j["value_dist_weight"] = cfg.value.base.dist;
  j["value_heading_weight"] = cfg.value.base.heading;
  j["classifier_window"] = cfg.classifier_window;
  j["robot_enabled"] = cfg.robot_enabled;
  j["safe_radius_m"] = cfg.safe_radius_m;
  j["handover_radius_m"] = cfg.handover_radius_m;
  j["robot_flee_speed"] = cfg.robot_flee_speed;
  j["adversarial_speed"] = cfg.adversarial_speed;
  j["adversarial_duration_s"] = cfg.adversarial_duration_s;
  j["pose_noise_sigma"] = cfg.pose_noise_sigma;
  j["robot_home"] = vec3ToJson(cfg.robot_home);
  j["shelf_base"] = vec3ToJson(cfg.shelf_base);
  j["shelf_spacing"] = cfg.shelf_spacing;
  j["wrist_start"] = vec3ToJson(cfg.wrist_start);
  return j;
}

ScenarioConfig scenarioFromJson(const json& doc, const ScenarioConfig& base) {
  ScenarioConfig cfg = base;
  auto get = [&](const char* key, auto& into) {
    if (doc.contains(key) && !doc.at(key).is_null())
      into = doc.at(key).get<std::decay_t<decltype(into)>>();
  };
  get("dt", cfg.dt);
  get("max_sim_s", cfg.max_sim_s);
  get("seed", cfg.seed);
  get("plan_id", cfg.plan_id);
  if (doc.contains("plan_switch")) {
    if (doc.at("plan_switch").is_null()) {
      cfg.plan_switch.reset();
    } else {
      PlanSwitch sw;
      sw.to_plan = doc.at("plan_switch").at("to_plan").get<int>();
      sw.after_actions = doc.at("plan_switch").at("after_actions").get<int>();
      cfg.plan_switch = sw;
    }
  }
  if (doc.contains("behavior"))
    cfg.behavior = doc.at("behavior").get<std::string>() == "adversarial"
                       ? HumanBehavior::Adversarial
                       : HumanBehavior::Task;
  get("human_action_s", cfg.human_action_s);
  get("robot_action_s", cfg.robot_action_s);
  get("human_jitter_sigma_s", cfg.human_jitter_sigma_s);
  if (doc.contains("duration_overrides")) {
    cfg.overrides.clear();
    for (const auto& o : doc.at("duration_overrides")) {
      DurationOverride ov;
      ov.robot = o.value("robot", false);
      ov.motion = o.at("motion").get<std::string>();
      ov.object = o.at("object").get<std::string>();
      ov.seconds = o.at("seconds").get<double>();
      cfg.overrides.push_back(std::move(ov));
    }
  }
  get("lambda_d", cfg.lambda_d);
  get("threshold", cfg.threshold);
  get("dedup_hold_ticks", cfg.dedup_hold_ticks);
  get("use_classifier", cfg.use_classifier);
  if (doc.contains("channel_rates"))
    cfg.channel_rates = doc.at("channel_rates").get<std::map<std::string, double>>();
  get("channel_delta", cfg.channel_delta);
  get("channel_min_rate", cfg.channel_min_rate);
  get("perfect_objects", cfg.perfect_objects);
  get("motion_stickiness", cfg.motion_stickiness);
  get("object_stickiness", cfg.object_stickiness);
  get("value_beta", cfg.value.beta);
  get("value_dist_weight", cfg.value.base.dist);
  get("value_heading_weight", cfg.value.base.heading);
  get("classifier_window", cfg.classifier_window);
  get("robot_enabled", cfg.robot_enabled);
  get("safe_radius_m", cfg.safe_radius_m);
  get("handover_radius_m", cfg.handover_radius_m);
  get("robot_flee_speed", cfg.robot_flee_speed);
  get("adversarial_speed", cfg.adversarial_speed);
  get("adversarial_duration_s", cfg.adversarial_duration_s);
  get("pose_noise_sigma", cfg.pose_noise_sigma);
  if (doc.contains("robot_home")) cfg.robot_home = vec3FromJson(doc.at("robot_home"));
  if (doc.contains("shelf_base")) cfg.shelf_base = vec3FromJson(doc.at("shelf_base"));
  get("shelf_spacing", cfg.shelf_spacing);
  if (doc.contains("wrist_start")) cfg.wrist_start = vec3FromJson(doc.at("wrist_start"));
  return cfg;
}

namespace {

struct QueuedAction {
  int subtask = -1;
  int idx = -1;
  Action action;
};

std::vector<QueuedAction> buildQueue(const PlanLibrary& lib, const Plan& plan,
                                     const std::set<int>& skip_subtasks) {
  std::vector<QueuedAction> q;
  for (int sid : plan.subtask_order) {
    if (skip_subtasks.count(sid)) continue;
    const auto& st = lib.subtasks[static_cast<size_t>(sid)];
    for (size_t i = 0; i < st.human_actions.size(); ++i)
      q.push_back({sid, static_cast<int>(i), st.human_actions[i]});
  }
  return q;
}

// Piecewise-linear position along start -> via -> goal with minimum-jerk time
// scaling over the whole arc.
Eigen::Vector3d polylinePoint(const Eigen::Vector3d& start, const Eigen::Vector3d& via,
                              const Eigen::Vector3d& goal, double tau) {
  const double l1 = (via - start).norm();
  const double l2 = (goal - via).norm();
  const double total = l1 + l2;
  if (total < 1e-12) return goal;
  const double s = synth::minJerkScalar(tau) * total;
  if (s <= l1) return start + (via - start) * (l1 > 1e-12 ? s / l1 : 1.0);
  return via + (goal - via) * (l2 > 1e-12 ? (s - l1) / l2 : 1.0);
}

std::string actionTag(const Action& a) {
  if (!a.valid()) return "-";
  return std::to_string(a.motion) + ":" + std::to_string(a.object);
}

std::string fmtT(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", t);
  return buf;
}

std::string fmtP(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", p);
  return buf;
}

}  // namespace

SimTrace runTrial(const PlanLibrary& lib, const ScenarioConfig& cfg, const ModeSpec& mode,
                  const motion::RecurrentClassifier* classifier,
                  const traj::TrajectoryPredictor* predictor) {
  if (cfg.plan_id < 0 || cfg.plan_id >= static_cast<int>(lib.plans.size()))
    throw ValidationError("scenario plan_id out of range");
  if (cfg.plan_switch &&
      (cfg.plan_switch->to_plan < 0 ||
       cfg.plan_switch->to_plan >= static_cast<int>(lib.plans.size())))
    throw ValidationError("plan_switch target out of range");
  if (mode.recognition == RecognitionMode::Predictive && cfg.use_classifier &&
      classifier == nullptr)
    throw ValidationError("classifier source requested but no classifier provided");
  if (mode.predict_trajectory && predictor == nullptr)
    throw ValidationError("trajectory prediction requested but no predictor provided");

  // Resolve duration overrides once.
  struct ResolvedOverride {
    bool robot;
    Action action;
    double seconds;
  };
  std::vector<ResolvedOverride> overrides;
  for (const auto& o : cfg.overrides) {
    const auto m = lib.motionIdByName(o.motion);
    const auto ob = lib.objectIdByName(o.object);
    if (!m || !ob)
      throw ValidationError("duration override names unknown motion/object '" + o.motion +
                            "/" + o.object + "'");
    overrides.push_back({o.robot, Action{*m, *ob}, o.seconds});
  }
  auto humanBase = [&](const Action& a) {
    for (const auto& o : overrides)
      if (!o.robot && o.action == a) return o.seconds;
    return cfg.human_action_s;
  };
  auto robotDuration = [&](const Action& a) {
    for (const auto& o : overrides)
      if (o.robot && o.action == a) return o.seconds;
    return cfg.robot_action_s;
  };

  // Independent RNG streams; the trial workload (duration jitter) never
  // depends on the mode, so matched seeds are comparable across groups.
  Rng rng_dur(deriveSeed(cfg.seed, 101));
  Rng rng_channel(deriveSeed(cfg.seed, 202));
  Rng rng_pose(deriveSeed(cfg.seed, 303));

  // Jitter is drawn up front per (subtask, action idx) in a fixed order.
  std::map<std::pair<int, int>, double> jitter;
  for (const auto& st : lib.subtasks)
    for (size_t i = 0; i < st.human_actions.size(); ++i) {
      const double j = cfg.human_jitter_sigma_s > 0.0
                           ? rng_dur.normal(0.0, cfg.human_jitter_sigma_s)
                           : 0.0;
      jitter[{st.id, static_cast<int>(i)}] = j;
    }
  auto humanDuration = [&](int sid, int idx, const Action& a) {
    return std::max(0.5, humanBase(a) + jitter.at({sid, idx}));
  };

  const std::vector<int> gated_objects = lib.robotDeliveredObjectIds();
  auto toolGated = [&](const Action& a) {
    return cfg.robot_enabled &&
           std::find(gated_objects.begin(), gated_objects.end(), a.object) !=
               gated_objects.end();
  };

  // --- human state ---
  int true_plan = cfg.plan_id;
  std::vector<QueuedAction> queue =
      buildQueue(lib, lib.plans[static_cast<size_t>(true_plan)], {});
  size_t cursor = 0;
  bool active = false, waiting = false, switched = false, human_done = false;
  double action_start = 0.0, action_duration = 0.0;
  int completed_count = 0, started_count = 0;
  int started_cursor_mark = -1;  // queue index already counted as started
  Eigen::Vector3d wrist = cfg.wrist_start;
  Eigen::Vector3d action_from = wrist;
  double completion_time = 0.0;
  std::map<int, int> subtask_done;
  std::set<int> subtasks_completed;
  struct Completion {
    int subtask, idx;
  };
  std::vector<Completion> fresh_completions;

  // --- robot state ---
  planner::PlannerState rstate;
  rstate.threshold = cfg.threshold;
  Eigen::Vector3d ee = cfg.robot_home;
  Eigen::Vector3d path_start = ee;
  Eigen::Vector3d recovery_from = ee;
  double recovery_total = 0.0;
  int robot_state = 0;

  // --- recognition state ---
  plans::ObservedActionLog log;
  log.hold = std::max(1, cfg.dedup_hold_ticks);
  plans::PlanInferenceEngine engine(lib, cfg.lambda_d);
  plans::PlanBelief belief = engine.belief();
  Action corrected{};
  motion::ConfusionChannel channel =
      motion::makeChannel(lib, cfg.channel_rates, cfg.channel_delta, cfg.channel_min_rate);
  objects::TransitionModels trans;
  objects::ObjectBelief obelief;
  if (!cfg.perfect_objects) {
    trans = objects::TransitionModels::fromLibrary(lib, cfg.motion_stickiness,
                                                   cfg.object_stickiness);
    obelief = objects::initialBelief(static_cast<int>(lib.objects.size()));
  }
  std::deque<Eigen::VectorXd> feat_window;
  Eigen::Vector3d prev_obs_wrist = cfg.wrist_start;
  bool have_prev_obs = false;

  // --- prediction state ---
  std::deque<Eigen::Vector3d> wrist_hist;
  struct PendingScore {
    size_t due_tick;
    Eigen::Vector3d anchor;
    Eigen::MatrixXd track;
    Eigen::VectorXd phi;
  };
  std::deque<PendingScore> pending_scores;
  traj::RlsState rls;  // working copy so a shared predictor stays const
  if (predictor != nullptr) rls = predictor->rls();
  double pred_err_sum = 0.0;
  int pred_err_count = 0;
  std::vector<Eigen::Vector3d> obs_wrist_by_tick;

  SimTrace trace;
  trace.meta["type"] = "meta";
  trace.meta["mode"] = modeName(mode.recognition);
  trace.meta["predict_trajectory"] = mode.predict_trajectory;
  trace.meta["config"] = scenarioToJson(cfg);
  trace.meta["plans"] = static_cast<int>(lib.plans.size());

  TrialSummary& sum = trace.summary;
  sum.plan_id = true_plan;
  sum.mode = modeName(mode.recognition);
  sum.predict_trajectory = mode.predict_trajectory;

  long mc_num = 0, mc_den = 0, pr_num = 0, pr_den = 0;
  std::vector<Action> started_prefix;
  double min_active_sep = std::numeric_limits<double>::infinity();
  bool robot_ever_active = false;

  const bool adversarial = cfg.behavior == HumanBehavior::Adversarial;
  const bool predictive = mode.recognition == RecognitionMode::Predictive;
  const bool oracle = mode.recognition == RecognitionMode::Oracle;
  const bool reactive = mode.recognition == RecognitionMode::Reactive;

  if (cfg.robot_enabled && (oracle || adversarial)) {
    // Full foresight: queue the true plan's remaining deliveries immediately.
    const auto rem = planner::remainingRobotActions(lib.plans[static_cast<size_t>(true_plan)],
                                                    rstate.delivered);
    rstate.buffer.assign(rem.begin(), rem.end());
    trace.decision_log.push_back("t=0.000 buffer n=" + std::to_string(rem.size()));
  }

  auto deliveredHas = [&](int object_id) {
    for (const auto& d : rstate.delivered)
      if (d.object == object_id) return true;
    return false;
  };

  const double end_cap = adversarial ? cfg.adversarial_duration_s : cfg.max_sim_s;
  const size_t max_ticks = static_cast<size_t>(std::llround(end_cap / cfg.dt));

  for (size_t tick = 1; tick <= max_ticks; ++tick) {
    const double t = static_cast<double>(tick) * cfg.dt;
    fresh_completions.clear();

    // ---------- human ----------
    Action true_action{};
    if (adversarial) {
      const Eigen::Vector3d dir = ee - wrist;
      if (dir.norm() > 1e-9) wrist += dir.normalized() * cfg.adversarial_speed * cfg.dt;
    } else if (!human_done) {
      // Process every action boundary that falls inside this tick; boundaries
      // chain exactly (next start == previous end) so completion times carry
      // no tick-grid drift.
      bool moved = true;
      while (moved) {
        moved = false;
        if (cursor >= queue.size()) {
          human_done = true;
          break;
        }
        const QueuedAction& cur = queue[cursor];
        if (!active) {
          if (static_cast<int>(cursor) != started_cursor_mark) {
            started_cursor_mark = static_cast<int>(cursor);
            ++started_count;
            started_prefix.push_back(cur.action);
          }
          if (toolGated(cur.action) && !deliveredHas(cur.action.object)) {
            waiting = true;  // hold position; the blocked action still emits motion
          } else {
            waiting = false;
            active = true;
            double start = action_start + action_duration;  // previous end
            if (start < t - cfg.dt - 1e-9) start = t - cfg.dt;  // resumed after a block
            action_start = start;
            action_duration = humanDuration(cur.subtask, cur.idx, cur.action);
            action_from = wrist;
          }
        }
        if (!active) break;  // still blocked on a tool
        const double tau = (t - action_start) / action_duration;
        wrist = synth::minJerkPoint(
            action_from, lib.objects[static_cast<size_t>(cur.action.object)].position,
            std::min(1.0, tau));
        if (t - action_start >= action_duration - 1e-9) {
          completion_time = action_start + action_duration;
          ++completed_count;
          subtask_done[cur.subtask] += 1;
          if (subtask_done[cur.subtask] ==
              static_cast<int>(
                  lib.subtasks[static_cast<size_t>(cur.subtask)].human_actions.size()))
            subtasks_completed.insert(cur.subtask);
          fresh_completions.push_back({cur.subtask, cur.idx});
          ++cursor;
          active = false;
          if (cfg.plan_switch && !switched &&
              completed_count == cfg.plan_switch->after_actions) {
            // The switch lands at an action boundary; a partially done
            // subtask is abandoned and restarts from scratch later.
            switched = true;
            true_plan = cfg.plan_switch->to_plan;
            for (auto& [sid, done] : subtask_done)
              if (!subtasks_completed.count(sid)) done = 0;
            queue = buildQueue(lib, lib.plans[static_cast<size_t>(true_plan)],
                               subtasks_completed);
            cursor = 0;
            started_cursor_mark = -1;
            trace.decision_log.push_back("t=" + fmtT(t) + " plan_switch to=" +
                                         std::to_string(true_plan));
            if (cfg.robot_enabled && oracle) {
              const auto rem = planner::remainingRobotActions(
                  lib.plans[static_cast<size_t>(true_plan)], rstate.delivered);
              rstate.buffer.assign(rem.begin(), rem.end());
              if (planner::reconcile(rstate, t))
                trace.decision_log.push_back("t=" + fmtT(t) + " recovery " +
                                             actionTag(*rstate.doing));
            }
          }
          moved = true;  // the next action may start within this same tick
        }
      }
    }

    const QueuedAction* cur_action =
        (!adversarial && !human_done && cursor < queue.size()) ? &queue[cursor] : nullptr;
    if (cur_action != nullptr) true_action = cur_action->action;

    // ---------- observation + recognition ----------
    bool has_obs = false;
    Action observed{};
    bool appended = false;
    Eigen::Vector3d wrist_seen = wrist;  // what downstream consumers observe
    if (!adversarial && cur_action != nullptr && (predictive || oracle)) {
      if (oracle) {
        observed = true_action;
        has_obs = true;
      } else {
        // Noisy pose stream feeding the recognizer.
        HumanPose pose;
        pose.timestamp = t;
        pose.wrist = wrist + Eigen::Vector3d(rng_pose.normal(0.0, cfg.pose_noise_sigma),
                                             rng_pose.normal(0.0, cfg.pose_noise_sigma),
                                             rng_pose.normal(0.0, cfg.pose_noise_sigma));
        pose.wrist_velocity = have_prev_obs
                                  ? Eigen::Vector3d((pose.wrist - prev_obs_wrist) / cfg.dt)
                                  : Eigen::Vector3d::Zero();
        const auto& style =
            synth::styleFor(lib.motions[static_cast<size_t>(true_action.motion)].name);
        pose.finger_velocities = synth::fingerVelocities(
            style, t - action_start, synth::kFingerChannels, rng_pose, 0.05);
        prev_obs_wrist = pose.wrist;
        have_prev_obs = true;
        wrist_seen = pose.wrist;

        int m_hat = -1;
        if (cfg.use_classifier) {
          Eigen::VectorXd feat(synth::kFeatureDim);
          feat.head<3>() = pose.wrist;
          feat.tail(synth::kFingerChannels) = pose.finger_velocities;
          feat_window.push_back(std::move(feat));
          if (static_cast<int>(feat_window.size()) > cfg.classifier_window)
            feat_window.pop_front();
          if (static_cast<int>(feat_window.size()) == cfg.classifier_window) {
            Eigen::MatrixXd w(cfg.classifier_window, synth::kFeatureDim);
            for (int r = 0; r < cfg.classifier_window; ++r)
              w.row(r) = feat_window[static_cast<size_t>(r)].transpose();
            m_hat = synth::motionIdOfClass(lib, classifier->classify(w));
          }
        } else {
          m_hat = channel.corrupt(true_action.motion, rng_channel);
        }

        if (m_hat >= 0) {
          int o_hat = true_action.object;
          if (!cfg.perfect_objects) {
            obelief = objects::updateBelief(obelief, pose, m_hat, trans, cfg.value, lib.objects);
            o_hat = objects::mostLikelyObject(obelief);
          }
          observed = Action{m_hat, o_hat};
          has_obs = true;
        }
      }

      if (has_obs) {
        const auto outcome = plans::appendAction(log, lib, observed, t);
        if (outcome == plans::AppendOutcome::RejectedInfeasible) ++sum.rejected_infeasible;
        if (outcome == plans::AppendOutcome::Appended) {
          ++sum.log_appends;
          engine.observe(log.entries.back().action);
          belief = engine.belief();
          corrected = engine.correctedAction();
          appended = true;
        }
      }
    }

    // ---------- trajectory prediction ----------
    bool has_pred = false;
    Eigen::MatrixXd pred_track;
    if (mode.predict_trajectory && predictor != nullptr) {
      wrist_hist.push_back(wrist_seen);
      if (static_cast<int>(wrist_hist.size()) > predictor->config().history)
        wrist_hist.pop_front();
      obs_wrist_by_tick.push_back(wrist_seen);
      if (static_cast<int>(wrist_hist.size()) == predictor->config().history) {
        Action intent = corrected.valid() ? corrected : (has_obs ? observed : Action{});
        if (adversarial) {
          const auto recv = lib.motionIdByName("receiving");
          intent = Action{recv ? *recv : lib.humanMotionIds().front(),
                          rstate.doing ? rstate.doing->object : 0};
        }
        if (oracle) intent = true_action;
        if (intent.valid()) {
          const std::vector<Eigen::Vector3d> hist(wrist_hist.begin(), wrist_hist.end());
          const Eigen::VectorXd input = predictor->inputFromHistory(hist, intent);
          const Eigen::VectorXd phi = predictor->features(input);
          const Eigen::VectorXd out = rls.theta.transpose() * phi;
          const int H = predictor->config().horizon;
          pred_track.resize(H, 3);
          for (int k = 0; k < H; ++k)
            pred_track.row(k) = (hist.back() + out.segment<3>(3 * k)).transpose();
          has_pred = true;
          pending_scores.push_back(
              {tick + static_cast<size_t>(H), hist.back(), pred_track, phi});
        }
      }
      // Score (and adapt on) predictions whose horizon has fully realized.
      while (!pending_scores.empty() && pending_scores.front().due_tick <= tick) {
        const auto& ps = pending_scores.front();
        const int H = predictor->config().horizon;
        const size_t base = ps.due_tick - static_cast<size_t>(H);
        if (obs_wrist_by_tick.size() >= ps.due_tick) {
          Eigen::VectorXd y(H * 3);
          double se = 0.0;
          for (int k = 0; k < H; ++k) {
            const Eigen::Vector3d realized = obs_wrist_by_tick[base + static_cast<size_t>(k)];
            y.segment<3>(3 * k) = realized - ps.anchor;
            se += (realized.transpose() - ps.track.row(k)).squaredNorm();
          }
          pred_err_sum += std::sqrt(se / static_cast<double>(H));
          ++pred_err_count;
          traj::rlsAdapt(rls, ps.phi, y);
        }
        pending_scores.pop_front();
      }
    }

    // ---------- planner decisions ----------
    if (cfg.robot_enabled && predictive && appended) {
      const auto branch = planner::decide(rstate, belief, lib, t);
      const char* bname = branch == planner::DecideBranch::Commit      ? "commit"
                          : branch == planner::DecideBranch::Agreement ? "agree"
                                                                       : "wait";
      std::ostringstream os;
      os << "t=" << fmtT(t) << " " << bname << " top=" << belief.top
         << " p=" << fmtP(belief.top >= 0 ? belief.p[static_cast<size_t>(belief.top)] : 0.0)
         << " buf=[";
      for (size_t i = 0; i < rstate.buffer.size(); ++i)
        os << (i ? "," : "") << actionTag(rstate.buffer[i]);
      os << "]";
      trace.decision_log.push_back(os.str());
      // The wait branch leaves the previous commitment in place, so the
      // in-flight action is only reconciled against a freshly set buffer.
      if (branch != planner::DecideBranch::Wait && planner::reconcile(rstate, t))
        trace.decision_log.push_back("t=" + fmtT(t) + " recovery " + actionTag(*rstate.doing));
    }
    if (cfg.robot_enabled && reactive) {
      for (const auto& c : fresh_completions) {
        const auto& st = lib.subtasks[static_cast<size_t>(c.subtask)];
        for (const auto& spec : st.robot_actions)
          if (spec.trigger_index == c.idx) {
            rstate.buffer.push_back(spec.action);
            trace.decision_log.push_back("t=" + fmtT(t) + " trigger " + actionTag(spec.action));
          }
      }
    }

    // ---------- robot ----------
    double separation = (ee - wrist).norm();
    if (cfg.robot_enabled) {
      bool just_started = false;
      if (rstate.idle() && !rstate.buffer.empty()) {
        const auto started =
            planner::startNextIfIdle(rstate, robotDuration(rstate.buffer.front()), t);
        if (started) {
          path_start = ee;
          just_started = true;
          trace.decision_log.push_back("t=" + fmtT(t) + " start " + actionTag(*started));
        }
      }
      robot_state = 0;
      if (rstate.doing) {
        const Action act = *rstate.doing;
        const Eigen::Vector3d spot = lib.objects[static_cast<size_t>(act.object)].position;
        if (rstate.recovering) {
          robot_state = 2;
          if (recovery_total <= 0.0) {
            recovery_from = ee;
            recovery_total = std::max(rstate.recovery_remaining_s, cfg.dt);
          }
          rstate.recovery_remaining_s -= cfg.dt;
          const double tau = 1.0 - std::max(0.0, rstate.recovery_remaining_s) / recovery_total;
          ee = recovery_from + (cfg.shelfSlot(act.object) - recovery_from) * tau;
          if (rstate.recovery_remaining_s <= 1e-9) {
            planner::onActionFinished(rstate, t);
            trace.decision_log.push_back("t=" + fmtT(t) + " recovered " + actionTag(act));
            recovery_total = 0.0;
            ++sum.recoveries;
          }
        } else if (just_started) {
          robot_state = 1;  // the action occupies (t, t + duration]
        } else {
          // Conflict: a predicted wrist sample outside the handover zone,
          // inside the safe radius, and not merely the parked wrist.
          bool conflict = false;
          if (mode.predict_trajectory && has_pred) {
            for (int k = 0; k < pred_track.rows(); ++k) {
              const Eigen::Vector3d p = pred_track.row(k).transpose();
              if ((p - spot).norm() < cfg.handover_radius_m) continue;
              if ((p - wrist).norm() <= 0.5 * cfg.safe_radius_m) continue;
              if ((ee - p).norm() < cfg.safe_radius_m) {
                conflict = true;
                break;
              }
            }
          }
          if (conflict) {
            robot_state = 3;
            Eigen::Vector3d dir = ee - wrist;
            if (dir.norm() < 1e-9) dir = ee - cfg.robot_home;
            if (dir.norm() < 1e-9) dir = Eigen::Vector3d(-1, 0, 0);
            ee += dir.normalized() * cfg.robot_flee_speed * cfg.dt;
          } else {
            robot_state = 1;
            const Eigen::Vector3d nominal = polylinePoint(
                path_start, cfg.shelfSlot(act.object), spot,
                std::min(1.0, rstate.progress_s / std::max(rstate.duration_s, cfg.dt)));
            if ((ee - nominal).norm() > 0.02) {
              // Rejoin the (frozen) nominal path after an avoidance detour.
              const Eigen::Vector3d dir = nominal - ee;
              ee += dir.normalized() * std::min(dir.norm(), cfg.robot_flee_speed * cfg.dt);
            } else {
              rstate.progress_s += cfg.dt;
              ee = polylinePoint(path_start, cfg.shelfSlot(act.object), spot,
                                 std::min(1.0, rstate.progress_s / rstate.duration_s));
              if (rstate.progress_s >= rstate.duration_s - 1e-9) {
                planner::onActionFinished(rstate, t);
                ++sum.deliveries;
                trace.decision_log.push_back("t=" + fmtT(t) + " delivered " + actionTag(act));
              }
            }
          }
        }
      }
      if (robot_state != 0) {
        robot_ever_active = true;
        separation = (ee - wrist).norm();
        min_active_sep = std::min(min_active_sep, separation);
      }
    }

    // ---------- metrics + record ----------
    TickRecord rec;
    rec.t = t;
    rec.true_plan = true_plan;
    rec.true_action = true_action;
    rec.waiting = waiting && cur_action != nullptr;
    rec.started_count = started_count;
    rec.wrist = wrist;
    rec.robot_ee = ee;
    rec.has_observation = has_obs;
    rec.observed = observed;
    rec.has_estimate = (predictive || oracle) && !adversarial;
    if (oracle && !adversarial) {
      rec.est_plan = true_plan;
      rec.est_plan_p = 1.0;
      rec.corrected = true_action;
    } else if (predictive && !adversarial) {
      rec.est_plan = belief.top;
      rec.est_plan_p = belief.top >= 0 ? belief.p[static_cast<size_t>(belief.top)] : 0.0;
      rec.corrected = corrected;
    }
    rec.log_len = static_cast<int>(log.entries.size());
    rec.robot_state = robot_state;
    rec.robot_action = rstate.doing ? *rstate.doing : Action{};
    rec.separation_m = separation;
    rec.has_prediction = has_pred;
    if (has_pred) {
      double dmin = std::numeric_limits<double>::infinity();
      for (int k = 0; k < pred_track.rows(); ++k)
        dmin = std::min(dmin, (ee - pred_track.row(k).transpose()).norm());
      rec.pred_wrist_min_dist = dmin;
    }

    if (rec.has_observation && true_action.valid()) {
      ++mc_den;
      if (observed.motion == true_action.motion) ++mc_num;
    }
    if (rec.has_estimate && true_action.valid()) {
      ++pr_den;
      const auto consistent = plans::consistentPlans(lib, started_prefix);
      const bool ok = consistent.empty()
                          ? rec.est_plan == true_plan
                          : std::find(consistent.begin(), consistent.end(), rec.est_plan) !=
                                consistent.end();
      if (ok) ++pr_num;
    }

    trace.ticks.push_back(std::move(rec));

    if (!adversarial && human_done) break;
  }

  sum.plan_id = true_plan;
  sum.deadlocked = !adversarial && !human_done;
  sum.completion_s = adversarial ? end_cap : (human_done ? completion_time : cfg.max_sim_s);
  if (mc_den > 0) sum.mc_accuracy = static_cast<double>(mc_num) / static_cast<double>(mc_den);
  if (pr_den > 0) sum.pr_accuracy = static_cast<double>(pr_num) / static_cast<double>(pr_den);
  if (robot_ever_active) sum.min_active_separation_m = min_active_sep;
  if (pred_err_count > 0)
    sum.mean_pred_error_m = pred_err_sum / static_cast<double>(pred_err_count);
  sum.belief_resets = obelief.resets;
  return trace;
}

// ---------------------------------------------------------------------------
// Trace serialization
// ---------------------------------------------------------------------------

namespace {

json tickToJson(const TickRecord& r) {
  json j;
  j["type"] = "tick";
  j["t"] = r.t;
  j["plan"] = r.true_plan;
  j["act"] = actionToJson(r.true_action);
  j["wait"] = r.waiting;
  j["started"] = r.started_count;
  j["wrist"] = vec3ToJson(r.wrist);
  j["ee"] = vec3ToJson(r.robot_ee);
  j["obs"] = r.has_observation ? actionToJson(r.observed) : json(nullptr);
  if (r.has_estimate) {
    j["cor"] = actionToJson(r.corrected);
    j["est_plan"] = r.est_plan;
    j["est_p"] = r.est_plan_p;
  } else {
    j["cor"] = nullptr;
    j["est_plan"] = nullptr;
    j["est_p"] = nullptr;
  }
  j["log_len"] = r.log_len;
  j["robot"] = r.robot_state;
  j["robot_act"] = actionToJson(r.robot_action);
  j["sep"] = r.separation_m;
  j["pred_min_d"] = r.has_prediction ? json(r.pred_wrist_min_dist) : json(nullptr);
  return j;
}

TickRecord tickFromJson(const json& j) {
  TickRecord r;
  r.t = j.at("t").get<double>();
  r.true_plan = j.at("plan").get<int>();
  r.true_action = actionFromJson(j.at("act"));
  r.waiting = j.at("wait").get<bool>();
  r.started_count = j.at("started").get<int>();
  r.wrist = vec3FromJson(j.at("wrist"));
  r.robot_ee = vec3FromJson(j.at("ee"));
  r.has_observation = !j.at("obs").is_null();
  if (r.has_observation) r.observed = actionFromJson(j.at("obs"));
  r.has_estimate = !j.at("est_plan").is_null();
  if (r.has_estimate) {
    r.corrected = actionFromJson(j.at("cor"));
    r.est_plan = j.at("est_plan").get<int>();
    r.est_plan_p = j.at("est_p").get<double>();
  }
  r.log_len = j.at("log_len").get<int>();
  r.robot_state = j.at("robot").get<int>();
  r.robot_action = actionFromJson(j.at("robot_act"));
  r.separation_m = j.at("sep").get<double>();
  r.has_prediction = !j.at("pred_min_d").is_null();
  if (r.has_prediction) r.pred_wrist_min_dist = j.at("pred_min_d").get<double>();
  return r;
}

json summaryToJson(const TrialSummary& s) {
  json j;
  j["type"] = "summary";
  j["plan_id"] = s.plan_id;
  j["mode"] = s.mode;
  j["predict_trajectory"] = s.predict_trajectory;
  j["completion_s"] = s.completion_s;
  j["deadlocked"] = s.deadlocked;
  j["mc_accuracy"] = s.mc_accuracy < 0 ? json(nullptr) : json(s.mc_accuracy);
  j["pr_accuracy"] = s.pr_accuracy < 0 ? json(nullptr) : json(s.pr_accuracy);
  j["deliveries"] = s.deliveries;
  j["recoveries"] = s.recoveries;
  j["log_appends"] = s.log_appends;
  j["rejected_infeasible"] = s.rejected_infeasible;
  j["belief_resets"] = s.belief_resets;
  j["min_active_separation_m"] =
      s.min_active_separation_m < 0 ? json(nullptr) : json(s.min_active_separation_m);
  j["mean_pred_error_m"] = s.mean_pred_error_m < 0 ? json(nullptr) : json(s.mean_pred_error_m);
  return j;
}

TrialSummary summaryFromJson(const json& j) {
  TrialSummary s;
  s.plan_id = j.at("plan_id").get<int>();
  s.mode = j.at("mode").get<std::string>();
  s.predict_trajectory = j.at("predict_trajectory").get<bool>();
  s.completion_s = j.at("completion_s").get<double>();
  s.deadlocked = j.at("deadlocked").get<bool>();
  if (!j.at("mc_accuracy").is_null()) s.mc_accuracy = j.at("mc_accuracy").get<double>();
  if (!j.at("pr_accuracy").is_null()) s.pr_accuracy = j.at("pr_accuracy").get<double>();
  s.deliveries = j.at("deliveries").get<int>();
  s.recoveries = j.at("recoveries").get<int>();
  s.log_appends = j.at("log_appends").get<int>();
  s.rejected_infeasible = j.at("rejected_infeasible").get<int>();
  s.belief_resets = j.at("belief_resets").get<int>();
  if (!j.at("min_active_separation_m").is_null())
    s.min_active_separation_m = j.at("min_active_separation_m").get<double>();
  if (!j.at("mean_pred_error_m").is_null())
    s.mean_pred_error_m = j.at("mean_pred_error_m").get<double>();
  return s;
}

}  // namespace

void SimTrace::writeJsonl(std::ostream& out) const {
  out << meta.dump() << "\n";
  for (const auto& r : ticks) out << tickToJson(r).dump() << "\n";
  json dec;
  dec["type"] = "decisions";
  dec["log"] = decision_log;
  out << dec.dump() << "\n";
  out << summaryToJson(summary).dump() << "\n";
}

void SimTrace::writeJsonl(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  writeJsonl(out);
}

SimTrace SimTrace::readJsonl(std::istream& in) {
  SimTrace trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    const std::string type = j.value("type", "");
    if (type == "meta") {
      trace.meta = j;
    } else if (type == "tick") {
      trace.ticks.push_back(tickFromJson(j));
    } else if (type == "decisions") {
      trace.decision_log = j.at("log").get<std::vector<std::string>>();
    } else if (type == "summary") {
      trace.summary = summaryFromJson(j);
    }
  }
  return trace;
}

SimTrace SimTrace::readJsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read trace file: " + path);
  return readJsonl(in);
}

// ---------------------------------------------------------------------------
// Trace metrics
// ---------------------------------------------------------------------------

AccuracyReport measureAccuracy(const SimTrace& trace, const PlanLibrary& lib) {
  AccuracyReport rep;
  long mc_num = 0, pr_num = 0;
  std::vector<Action> prefix;
  int last_started = 0;
  for (const auto& r : trace.ticks) {
    if (r.started_count > last_started) {
      // started_count moves one action per tick given the minimum action
      // duration; true_action is the freshly started one.
      prefix.push_back(r.true_action);
    }
    last_started = r.started_count;
    if (r.has_observation && r.true_action.valid()) {
      ++rep.observation_ticks;
      if (r.observed.motion == r.true_action.motion) ++mc_num;
    }
    if (r.has_estimate && r.true_action.valid()) {
      ++rep.estimate_ticks;
      const auto consistent = plans::consistentPlans(lib, prefix);
      const bool ok = consistent.empty()
                          ? r.est_plan == r.true_plan
                          : std::find(consistent.begin(), consistent.end(), r.est_plan) !=
                                consistent.end();
      if (ok) ++pr_num;
    }
  }
  if (rep.observation_ticks > 0)
    rep.mc = static_cast<double>(mc_num) / static_cast<double>(rep.observation_ticks);
  if (rep.estimate_ticks > 0)
    rep.pr = static_cast<double>(pr_num) / static_cast<double>(rep.estimate_ticks);
  return rep;
}

double minActiveSeparation(const SimTrace& trace) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& r : trace.ticks)
    if (r.robot_state != 0) d = std::min(d, r.separation_m);
  return d;
}

int editDistance(const std::vector<Action>& a, const std::vector<Action>& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

ActionStreams extractStreams(const SimTrace& trace) {
  ActionStreams s;
  for (const auto& r : trace.ticks) {
    if (!r.has_observation || !r.true_action.valid()) continue;
    s.truth.push_back(r.true_action);
    s.raw.push_back(r.observed);
    s.corrected.push_back(r.corrected.valid() ? r.corrected : r.observed);
  }
  return s;
}

}  // namespace hrc::sim
