#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrc/domain.hpp"
#include "hrc/motion.hpp"
#include "hrc/objects.hpp"
#include "hrc/planner.hpp"
#include "hrc/trajectory.hpp"

namespace hrc::sim {

enum class RecognitionMode { Reactive, Oracle, Predictive };
std::string modeName(RecognitionMode m);
RecognitionMode modeFromName(const std::string& name);

struct ModeSpec {
  RecognitionMode recognition = RecognitionMode::Predictive;
  bool predict_trajectory = false;
};

struct PlanSwitch {
  int to_plan = -1;
  int after_actions = 0;  // human actions completed before the switch lands
};

struct DurationOverride {
  bool robot = false;
  std::string motion;  // names resolved against the library when the trial runs
  std::string object;
  double seconds = 0.0;
};

enum class HumanBehavior { Task, Adversarial };

struct ScenarioConfig {
  double dt = 0.1;
  double max_sim_s = 600.0;
  uint64_t seed = 1;
  int plan_id = 0;
  std::optional<PlanSwitch> plan_switch;
  HumanBehavior behavior = HumanBehavior::Task;

  // Durations. Human actions get truncated-normal jitter drawn per
  // (subtask, action) so the same seed gives identical workloads across
  // modes; robot actions are fixed.
  double human_action_s = 8.0;
  double robot_action_s = 7.0;
  double human_jitter_sigma_s = 0.25;
  std::vector<DurationOverride> overrides;

  // Recognition stack.
  double lambda_d = 10.0;
  double threshold = 0.70;
  int dedup_hold_ticks = 3;
  bool use_classifier = false;  // false: confusion channel on the true motion
  std::map<std::string, double> channel_rates;
  double channel_delta = 0.0;
  double channel_min_rate = 0.01;
  bool perfect_objects = true;  // false: Bayes object filter on the pose stream
  double motion_stickiness = 0.9;
  double object_stickiness = 0.9;
  objects::ValueParams value;
  int classifier_window = 10;

  // Robot / avoidance geometry. A conflict needs a predicted wrist sample
  // that is outside the handover zone, inside the safe radius of the
  // end-effector, and displaced from the current wrist (a parked human is a
  // static obstacle the arm routes around, not a reason to retreat).
  bool robot_enabled = true;  // false: recognition-only scenario, no tool gating
  double safe_radius_m = 0.10;
  double handover_radius_m = 0.25;
  double robot_flee_speed = 0.5;   // m/s while avoiding
  double adversarial_speed = 0.12;  // m/s wrist speed in the adversarial scenario
  double adversarial_duration_s = 8.0;

  // Synthetic observation noise.
  double pose_noise_sigma = 0.002;

  // Workcell geometry.
  Eigen::Vector3d robot_home{-0.55, 0.25, 0.30};
  Eigen::Vector3d shelf_base{-0.45, 0.12, 0.12};
  double shelf_spacing = 0.06;
  Eigen::Vector3d wrist_start{0.05, 0.55, 0.10};

  Eigen::Vector3d shelfSlot(int object_id) const {
    return shelf_base + Eigen::Vector3d(0.0, shelf_spacing * object_id, 0.0);
  }
};

// Baseline scenario with the measured channel rates filled in.
ScenarioConfig defaultScenario();
nlohmann::json scenarioToJson(const ScenarioConfig& cfg);
ScenarioConfig scenarioFromJson(const nlohmann::json& doc, const ScenarioConfig& base);

struct TickRecord {
  double t = 0.0;
  int true_plan = -1;
  Action true_action;       // invalid when the human has finished
  bool waiting = false;     // human blocked on an undelivered tool
  int started_count = 0;    // human actions started so far (incl. blocked ones)
  Eigen::Vector3d wrist = Eigen::Vector3d::Zero();
  Eigen::Vector3d robot_ee = Eigen::Vector3d::Zero();

  bool has_observation = false;
  Action observed;   // recognizer output fed to the log
  bool has_estimate = false;
  Action corrected;  // posterior-corrected action (invalid until the log has content)
  int est_plan = -1;
  double est_plan_p = 0.0;
  int log_len = 0;

  int robot_state = 0;  // 0 idle, 1 executing, 2 recovering, 3 avoiding
  Action robot_action;
  double separation_m = 0.0;
  bool has_prediction = false;
  double pred_wrist_min_dist = 0.0;  // min distance EE to the predicted track
};

struct TrialSummary {
  int plan_id = -1;          // final true plan (after a switch, the new one)
  std::string mode;
  bool predict_trajectory = false;
  double completion_s = 0.0;
  bool deadlocked = false;
  double mc_accuracy = -1.0;  // -1 encodes "not applicable"
  double pr_accuracy = -1.0;
  int deliveries = 0;
  int recoveries = 0;
  int log_appends = 0;
  int rejected_infeasible = 0;
  int belief_resets = 0;
  double min_active_separation_m = -1.0;  // -1: robot never moved
  double mean_pred_error_m = -1.0;        // -1: no predictions scored
};

struct SimTrace {
  nlohmann::json meta;
  std::vector<TickRecord> ticks;
  TrialSummary summary;
  std::vector<std::string> decision_log;  // planner branch/event stream

  void writeJsonl(std::ostream& out) const;
  void writeJsonl(const std::string& path) const;
  static SimTrace readJsonl(std::istream& in);
  static SimTrace readJsonl(const std::string& path);
};

SimTrace runTrial(const PlanLibrary& lib, const ScenarioConfig& cfg, const ModeSpec& mode,
                  const motion::RecurrentClassifier* classifier = nullptr,
                  const traj::TrajectoryPredictor* predictor = nullptr);

// Re-derives the per-tick accuracies from a trace; used to audit the
// simulator's own summary tallies.
struct AccuracyReport {
  double mc = -1.0;
  double pr = -1.0;
  int observation_ticks = 0;
  int estimate_ticks = 0;
};
AccuracyReport measureAccuracy(const SimTrace& trace, const PlanLibrary& lib);

// Minimum human-robot separation over ticks where the end-effector was active.
double minActiveSeparation(const SimTrace& trace);

// Levenshtein distance over action sequences.
int editDistance(const std::vector<Action>& a, const std::vector<Action>& b);

// Per-observation-tick streams for recognition-quality comparisons.
struct ActionStreams {
  std::vector<Action> truth;
  std::vector<Action> raw;
  std::vector<Action> corrected;
};
ActionStreams extractStreams(const SimTrace& trace);

}  // namespace hrc::sim
