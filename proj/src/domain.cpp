#include "hrc/domain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace hrc {

using nlohmann::json;

std::optional<int> PlanLibrary::motionIdByName(const std::string& name) const {
  for (const auto& m : motions)
    if (m.name == name) return m.id;
  return std::nullopt;
}

std::optional<int> PlanLibrary::objectIdByName(const std::string& name) const {
  for (const auto& o : objects)
    if (o.name == name) return o.id;
  return std::nullopt;
}

std::string PlanLibrary::actionName(const Action& a) const {
  if (!a.valid() || a.motion >= static_cast<int>(motions.size()) ||
      a.object >= static_cast<int>(objects.size()))
    return "<invalid>";
  return motions[static_cast<size_t>(a.motion)].name + " " +
         objects[static_cast<size_t>(a.object)].name;
}

std::vector<int> PlanLibrary::humanMotionIds() const {
  std::set<int> ids;
  for (const auto& s : subtasks)
    for (const auto& a : s.human_actions) ids.insert(a.motion);
  return {ids.begin(), ids.end()};
}

std::vector<int> PlanLibrary::robotDeliveredObjectIds() const {
  std::set<int> ids;
  for (const auto& s : subtasks)
    for (const auto& r : s.robot_actions) ids.insert(r.action.object);
  return {ids.begin(), ids.end()};
}

void finalizePlan(Plan& plan, const std::vector<Subtask>& subtasks) {
  plan.reference.clear();
  plan.robot_sequence.clear();
  for (int sid : plan.subtask_order) {
    const auto& st = subtasks.at(static_cast<size_t>(sid));
    const int base = static_cast<int>(plan.reference.size());
    plan.reference.insert(plan.reference.end(), st.human_actions.begin(), st.human_actions.end());
    for (const auto& r : st.robot_actions)
      plan.robot_sequence.push_back({r.action, st.id, base + r.trigger_index});
  }
}

std::vector<Plan> enumeratePlans(const std::vector<Subtask>& subtasks) {
  std::vector<int> order(subtasks.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Plan> plans;
  do {
    Plan p;
    p.id = static_cast<int>(plans.size());
    p.subtask_order = order;
    finalizePlan(p, subtasks);
    plans.push_back(std::move(p));
  } while (std::next_permutation(order.begin(), order.end()));
  return plans;
}

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError("plan library invalid: " + what);
}

template <typename T>
void checkDenseIds(const std::vector<T>& items, const char* kind) {
  for (size_t i = 0; i < items.size(); ++i)
    require(items[i].id == static_cast<int>(i),
            std::string(kind) + " ids must be dense and in declaration order");
}

void checkAction(const PlanLibrary& lib, const Action& a, const std::string& ctx) {
  require(a.motion >= 0 && a.motion < static_cast<int>(lib.motions.size()),
          ctx + ": motion id out of range");
  require(a.object >= 0 && a.object < static_cast<int>(lib.objects.size()),
          ctx + ": object id out of range");
  require(lib.feasible(a), ctx + ": action (" + lib.actionName(a) + ") is not feasible");
}

}  // namespace

void validatePlanLibrary(const PlanLibrary& lib) {
  require(!lib.motions.empty(), "at least one motion required");
  require(!lib.objects.empty(), "at least one object required");
  checkDenseIds(lib.motions, "motion");
  checkDenseIds(lib.objects, "object");

  std::set<std::string> names;
  for (const auto& m : lib.motions) {
    require(!m.name.empty(), "motion name empty");
    require(names.insert("m:" + m.name).second, "duplicate motion name '" + m.name + "'");
  }
  for (const auto& o : lib.objects) {
    require(!o.name.empty(), "object name empty");
    require(names.insert("o:" + o.name).second, "duplicate object name '" + o.name + "'");
    require(o.position.allFinite(), "object '" + o.name + "' position not finite");
  }

  require(lib.feasibility.size() == lib.motions.size(),
          "feasibility must have one row per motion");
  for (const auto& row : lib.feasibility)
    require(row.size() == lib.objects.size(), "feasibility row width must equal object count");

  require(!lib.subtasks.empty(), "at least one subtask required");
  checkDenseIds(lib.subtasks, "subtask");
  for (const auto& st : lib.subtasks) {
    require(!st.human_actions.empty(),
            "subtask '" + st.name + "' needs at least one human action");
    for (const auto& a : st.human_actions) checkAction(lib, a, "subtask '" + st.name + "'");
    for (const auto& r : st.robot_actions) {
      checkAction(lib, r.action, "subtask '" + st.name + "' robot action");
      require(r.trigger_index >= 0 &&
                  r.trigger_index < static_cast<int>(st.human_actions.size()),
              "subtask '" + st.name + "' trigger_index out of range");
    }
  }

  require(!lib.plans.empty(), "at least one plan required");
  checkDenseIds(lib.plans, "plan");
  std::vector<int> all(lib.subtasks.size());
  std::iota(all.begin(), all.end(), 0);
  std::set<std::vector<Action>> refs;
  for (const auto& p : lib.plans) {
    auto sorted = p.subtask_order;
    std::sort(sorted.begin(), sorted.end());
    require(sorted == all, "plan " + std::to_string(p.id) +
                               " order must be a permutation of all subtask ids");
    Plan rebuilt = p;
    finalizePlan(rebuilt, lib.subtasks);
    require(rebuilt.reference == p.reference,
            "plan " + std::to_string(p.id) + " reference out of sync with subtask order");
    require(!p.reference.empty(), "plan " + std::to_string(p.id) + " reference empty");
    require(refs.insert(p.reference).second,
            "plan " + std::to_string(p.id) + " reference duplicates another plan's");
  }

  require(lib.prior.size() == lib.plans.size(), "prior length must equal plan count");
  double sum = 0.0;
  for (double v : lib.prior) {
    require(v >= 0.0, "prior entries must be non-negative");
    sum += v;
  }
  require(std::abs(sum - 1.0) <= 1e-9, "prior must sum to 1 (got " + std::to_string(sum) + ")");
}

namespace {

Action actionFromJson(const json& j, const PlanLibrary& lib, const std::string& ctx) {
  Action a;
  const json& m = j.at("motion");
  const json& o = j.at("object");
  if (m.is_string()) {
    auto id = lib.motionIdByName(m.get<std::string>());
    if (!id) throw ValidationError(ctx + ": unknown motion '" + m.get<std::string>() + "'");
    a.motion = *id;
  } else {
    a.motion = m.get<int>();
  }
  if (o.is_string()) {
    auto id = lib.objectIdByName(o.get<std::string>());
    if (!id) throw ValidationError(ctx + ": unknown object '" + o.get<std::string>() + "'");
    a.object = *id;
  } else {
    a.object = o.get<int>();
  }
  return a;
}

}  // namespace

PlanLibrary planLibraryFromJson(const json& doc) {
  PlanLibrary lib;
  for (const auto& j : doc.at("motions")) {
    Motion m;
    m.id = j.at("id").get<int>();
    m.name = j.at("name").get<std::string>();
    lib.motions.push_back(std::move(m));
  }
  for (const auto& j : doc.at("objects")) {
    Object o;
    o.id = j.at("id").get<int>();
    o.name = j.at("name").get<std::string>();
    const auto& p = j.at("position");
    if (p.size() != 3) throw ValidationError("object '" + o.name + "': position must be [x,y,z]");
    o.position = Eigen::Vector3d(p.at(0).get<double>(), p.at(1).get<double>(),
                                 p.at(2).get<double>());
    lib.objects.push_back(std::move(o));
  }
  for (const auto& row : doc.at("feasibility")) {
    std::vector<bool> r;
    for (const auto& v : row) r.push_back(v.get<bool>());
    lib.feasibility.push_back(std::move(r));
  }
  for (const auto& j : doc.at("subtasks")) {
    Subtask st;
    st.id = j.at("id").get<int>();
    st.name = j.at("name").get<std::string>();
    for (const auto& a : j.at("human_actions"))
      st.human_actions.push_back(actionFromJson(a, lib, "subtask '" + st.name + "'"));
    if (j.contains("robot_actions")) {
      for (const auto& r : j.at("robot_actions")) {
        RobotActionSpec spec;
        spec.action = actionFromJson(r, lib, "subtask '" + st.name + "' robot action");
        spec.trigger_index = r.value("trigger_index", 0);
        st.robot_actions.push_back(spec);
      }
    }
    lib.subtasks.push_back(std::move(st));
  }

  const json& plans = doc.at("plans");
  if (plans.is_string()) {
    if (plans.get<std::string>() != "auto")
      throw ValidationError("plans: expected \"auto\" or an explicit list");
    lib.plans = enumeratePlans(lib.subtasks);
  } else {
    for (const auto& j : plans) {
      Plan p;
      p.id = static_cast<int>(lib.plans.size());
      for (const auto& s : j.at("order")) p.subtask_order.push_back(s.get<int>());
      for (int sid : p.subtask_order)
        if (sid < 0 || sid >= static_cast<int>(lib.subtasks.size()))
          throw ValidationError("plan " + std::to_string(p.id) + ": subtask id out of range");
      finalizePlan(p, lib.subtasks);
      lib.plans.push_back(std::move(p));
    }
  }

  if (doc.contains("prior")) {
    for (const auto& v : doc.at("prior")) lib.prior.push_back(v.get<double>());
  } else {
    lib.prior.assign(lib.plans.size(), 1.0 / static_cast<double>(lib.plans.size()));
  }

  validatePlanLibrary(lib);
  return lib;
}

json planLibraryToJson(const PlanLibrary& lib) {
  json doc;
  doc["motions"] = json::array();
  for (const auto& m : lib.motions) doc["motions"].push_back({{"id", m.id}, {"name", m.name}});
  doc["objects"] = json::array();
  for (const auto& o : lib.objects)
    doc["objects"].push_back({{"id", o.id},
                              {"name", o.name},
                              {"position", {o.position.x(), o.position.y(), o.position.z()}}});
  doc["feasibility"] = json::array();
  for (const auto& row : lib.feasibility) {
    json r = json::array();
    for (bool v : row) r.push_back(v);
    doc["feasibility"].push_back(std::move(r));
  }
  doc["subtasks"] = json::array();
  for (const auto& st : lib.subtasks) {
    json j{{"id", st.id}, {"name", st.name}};
    j["human_actions"] = json::array();
    for (const auto& a : st.human_actions)
      j["human_actions"].push_back({{"motion", a.motion}, {"object", a.object}});
    j["robot_actions"] = json::array();
    for (const auto& r : st.robot_actions)
      j["robot_actions"].push_back({{"motion", r.action.motion},
                                    {"object", r.action.object},
                                    {"trigger_index", r.trigger_index}});
    doc["subtasks"].push_back(std::move(j));
  }
  doc["plans"] = json::array();
  for (const auto& p : lib.plans) doc["plans"].push_back({{"order", p.subtask_order}});
  doc["prior"] = lib.prior;
  return doc;
}

PlanLibrary loadPlanLibrary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open plan library file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  try {
    return planLibraryFromJson(doc);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": malformed plan library: " + e.what());
  }
}

void savePlanLibrary(const PlanLibrary& lib, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write plan library file: " + path);
  out << planLibraryToJson(lib).dump(2) << "\n";
}

}  // namespace hrc
