#pragma once

#include <Eigen/Core>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace hrc {

// Thrown by loaders/validators; message names the offending field or invariant.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Motion {
  int id = -1;
  std::string name;
};

struct Object {
  int id = -1;
  std::string name;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

// A (motion, object) pair; indices into PlanLibrary::motions / objects.
struct Action {
  int motion = -1;
  int object = -1;

  bool operator==(const Action& o) const { return motion == o.motion && object == o.object; }
  bool operator!=(const Action& o) const { return !(*this == o); }
  bool operator<(const Action& o) const {
    return motion != o.motion ? motion < o.motion : object < o.object;
  }
  bool valid() const { return motion >= 0 && object >= 0; }
};

// One sample of the tracked human state. Wrist velocity is derived from
// consecutive wrist samples by whoever builds the pose stream.
struct HumanPose {
  double timestamp = 0.0;
  Eigen::Vector3d wrist = Eigen::Vector3d::Zero();
  Eigen::Vector3d wrist_velocity = Eigen::Vector3d::Zero();
  Eigen::VectorXd finger_velocities;  // empty when no hand tracking is simulated
};

struct RobotActionSpec {
  Action action;
  // Index into the owning subtask's human action list; the earliest human
  // action whose completion licenses this delivery in reactive mode.
  int trigger_index = 0;
};

struct Subtask {
  int id = -1;
  std::string name;
  std::vector<Action> human_actions;
  std::vector<RobotActionSpec> robot_actions;
};

struct Plan {
  int id = -1;
  std::vector<int> subtask_order;

  // Flattened views derived from subtask_order at load time.
  std::vector<Action> reference;  // human actions in execution order
  struct RobotStep {
    Action action;
    int subtask = -1;
    int trigger_pos = -1;  // index into `reference` of the licensing human action
  };
  std::vector<RobotStep> robot_sequence;
};

struct PlanLibrary {
  std::vector<Motion> motions;
  std::vector<Object> objects;
  std::vector<std::vector<bool>> feasibility;  // [motion.id][object.id]
  std::vector<Subtask> subtasks;
  std::vector<Plan> plans;
  std::vector<double> prior;  // over plans, sums to 1

  bool feasible(const Action& a) const {
    return a.motion >= 0 && a.motion < static_cast<int>(motions.size()) && a.object >= 0 &&
           a.object < static_cast<int>(objects.size()) &&
           feasibility[static_cast<size_t>(a.motion)][static_cast<size_t>(a.object)];
  }

  std::optional<int> motionIdByName(const std::string& name) const;
  std::optional<int> objectIdByName(const std::string& name) const;
  std::string actionName(const Action& a) const;

  // Motions appearing in human action lists; the classifier's label set.
  std::vector<int> humanMotionIds() const;
  // Objects appearing in robot actions; these gate human actions until delivered.
  std::vector<int> robotDeliveredObjectIds() const;
};

// Rebuilds plan.reference / plan.robot_sequence from subtask_order.
void finalizePlan(Plan& plan, const std::vector<Subtask>& subtasks);

// All permutations of the subtask set, ids assigned in lexicographic order.
std::vector<Plan> enumeratePlans(const std::vector<Subtask>& subtasks);

// Throws ValidationError naming the first violated invariant.
void validatePlanLibrary(const PlanLibrary& lib);

PlanLibrary planLibraryFromJson(const nlohmann::json& doc);
nlohmann::json planLibraryToJson(const PlanLibrary& lib);

// File wrappers; parse errors are rethrown with the path and byte context.
PlanLibrary loadPlanLibrary(const std::string& path);
void savePlanLibrary(const PlanLibrary& lib, const std::string& path);

}  // namespace hrc
