#include "hrc/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hrc/rng.hpp"

namespace hrc::exp {

namespace {

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmtG(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string fmtHex(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Runs fn(0..n-1), under OpenMP when `parallel`. Cells must only write their
// own slots; callers reduce afterwards in index order so both paths produce
// identical bytes. Cell errors are captured and rethrown after the join.
template <typename Fn>
void forEachCell(size_t n, bool parallel, std::vector<std::string>& errors, const Fn& fn) {
  errors.assign(n, std::string());
  auto guarded = [&](size_t i) {
    try {
      fn(i);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
      guarded(static_cast<size_t>(i));
  } else {
    for (size_t i = 0; i < n; ++i) guarded(i);
  }
  for (const auto& e : errors)
    if (!e.empty()) throw std::runtime_error("experiment trial failed: " + e);
}

}  // namespace

uint64_t fnv1a(const std::string& bytes, uint64_t h) {
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Efficiency
// ---------------------------------------------------------------------------

EfficiencyResult runEfficiency(const PlanLibrary& lib, const sim::ScenarioConfig& base,
                               int trials_per_group,
                               const traj::TrajectoryPredictor* predictor, bool parallel) {
  if (trials_per_group <= 0) throw ValidationError("efficiency needs trials_per_group > 0");
  if (predictor == nullptr)
    throw ValidationError("efficiency needs a trajectory predictor for the prediction groups");

  struct Group {
    sim::RecognitionMode mode;
    bool predict;
  };
  const std::array<Group, 6> groups = {{{sim::RecognitionMode::Reactive, false},
                                        {sim::RecognitionMode::Reactive, true},
                                        {sim::RecognitionMode::Oracle, false},
                                        {sim::RecognitionMode::Oracle, true},
                                        {sim::RecognitionMode::Predictive, false},
                                        {sim::RecognitionMode::Predictive, true}}};

  sim::ScenarioConfig proto = base;
  proto.channel_rates.clear();  // perfect channel; noise belongs to the robustness sweep
  proto.use_classifier = false;
  proto.perfect_objects = true;
  proto.behavior = sim::HumanBehavior::Task;
  proto.plan_switch.reset();
  proto.robot_enabled = true;

  const size_t kn = static_cast<size_t>(trials_per_group);
  const size_t n = groups.size() * kn;
  std::vector<double> completion(n, 0.0);
  std::vector<std::string> errors;
  forEachCell(n, parallel, errors, [&](size_t i) {
    const size_t g = i / kn;
    const size_t k = i % kn;
    sim::ScenarioConfig cfg = proto;
    cfg.plan_id = static_cast<int>(k % lib.plans.size());
    cfg.seed = deriveSeed(base.seed, 10000 + k);  // group-independent: paired samples
    const sim::ModeSpec mode{groups[g].mode, groups[g].predict};
    const auto trace =
        sim::runTrial(lib, cfg, mode, nullptr, groups[g].predict ? predictor : nullptr);
    if (trace.summary.deadlocked)
      throw std::runtime_error("trial deadlocked (mode " + sim::modeName(groups[g].mode) +
                               ", plan " + std::to_string(cfg.plan_id) + ")");
    completion[i] = trace.summary.completion_s;
  });

  EfficiencyResult res;
  for (size_t g = 0; g < groups.size(); ++g) {
    double sum = 0.0;
    for (size_t k = 0; k < kn; ++k) sum += completion[g * kn + k];
    const double mean = sum / static_cast<double>(kn);
    double ss = 0.0;
    for (size_t k = 0; k < kn; ++k) {
      const double d = completion[g * kn + k] - mean;
      ss += d * d;
    }
    const double sd = kn > 1 ? std::sqrt(ss / static_cast<double>(kn - 1)) : 0.0;
    res.rows.push_back({sim::modeName(groups[g].mode), groups[g].predict, mean, sd,
                        trials_per_group});
  }
  return res;
}

std::string EfficiencyResult::csv() const {
  std::ostringstream os;
  os << "plan_recognition,trajectory_prediction,mean_completion_s,std_completion_s,trials\n";
  for (const auto& r : rows)
    os << r.mode << "," << (r.predict_trajectory ? 1 : 0) << "," << fmt6(r.mean_completion_s)
       << "," << fmt6(r.std_completion_s) << "," << r.trials << "\n";
  return os.str();
}

const EfficiencyRow& EfficiencyResult::row(const std::string& mode, bool predict) const {
  for (const auto& r : rows)
    if (r.mode == mode && r.predict_trajectory == predict) return r;
  throw std::out_of_range("no efficiency row for " + mode);
}

// ---------------------------------------------------------------------------
// Robustness
// ---------------------------------------------------------------------------

std::vector<double> defaultDeltas() { return {0, -5, -10, -15, -20, -30, -40, -45}; }

RobustnessResult runRobustnessSweep(const PlanLibrary& lib, const sim::ScenarioConfig& base,
                                    const std::vector<double>& deltas, int trials_per_plan,
                                    bool parallel) {
  if (deltas.empty()) throw ValidationError("robustness needs at least one delta");
  if (trials_per_plan <= 0) throw ValidationError("robustness needs trials_per_plan > 0");

  sim::ScenarioConfig proto = base;
  proto.robot_enabled = false;  // recognition only; no tool gating, no planner
  proto.use_classifier = false;
  proto.perfect_objects = true;
  proto.behavior = sim::HumanBehavior::Task;
  proto.plan_switch.reset();

  const size_t P = lib.plans.size();
  const size_t kn = static_cast<size_t>(trials_per_plan);
  const size_t per_delta = P * kn;
  const size_t n = deltas.size() * per_delta;

  struct Cell {
    double mc_w = 0.0, pr_w = 0.0;
    long mc_t = 0, pr_t = 0;
  };
  std::vector<Cell> cells(n);
  std::vector<std::string> errors;
  forEachCell(n, parallel, errors, [&](size_t i) {
    const size_t di = i / per_delta;
    const size_t pi = (i % per_delta) / kn;
    const size_t ti = i % kn;
    sim::ScenarioConfig cfg = proto;
    cfg.plan_id = static_cast<int>(pi);
    // Percentage points -> fractional TPR shift.
    cfg.channel_delta = deltas[di] / 100.0;
    // Seed ignores the delta: every sweep point sees the same workloads.
    cfg.seed = deriveSeed(base.seed, 20000 + pi * 1000 + ti);
    const auto trace = sim::runTrial(lib, cfg, {sim::RecognitionMode::Predictive, false});
    const auto rep = sim::measureAccuracy(trace, lib);
    Cell& c = cells[i];
    if (rep.observation_ticks > 0) {
      c.mc_w = rep.mc * rep.observation_ticks;
      c.mc_t = rep.observation_ticks;
    }
    if (rep.estimate_ticks > 0) {
      c.pr_w = rep.pr * rep.estimate_ticks;
      c.pr_t = rep.estimate_ticks;
    }
  });

  RobustnessResult res;
  for (size_t di = 0; di < deltas.size(); ++di) {
    double mc_w = 0.0, pr_w = 0.0;
    long mc_t = 0, pr_t = 0;
    for (size_t j = di * per_delta; j < (di + 1) * per_delta; ++j) {
      mc_w += cells[j].mc_w;
      mc_t += cells[j].mc_t;
      pr_w += cells[j].pr_w;
      pr_t += cells[j].pr_t;
    }
    res.rows.push_back({deltas[di], mc_t > 0 ? mc_w / static_cast<double>(mc_t) : 0.0,
                        pr_t > 0 ? pr_w / static_cast<double>(pr_t) : 0.0});
  }
  return res;
}

std::string RobustnessResult::csv() const {
  std::ostringstream os;
  os << "delta,mc_accuracy,pr_accuracy\n";
  for (const auto& r : rows)
    os << fmtG(r.delta) << "," << fmt6(r.mc_accuracy) << "," << fmt6(r.pr_accuracy) << "\n";
  return os.str();
}

const RobustnessRow& RobustnessResult::row(double delta) const {
  for (const auto& r : rows)
    if (r.delta == delta) return r;
  throw std::out_of_range("no robustness row for delta " + fmtG(delta));
}

// ---------------------------------------------------------------------------
// Threshold sensitivity
// ---------------------------------------------------------------------------

std::vector<double> defaultThresholdGrid() {
  return {0.58, 0.60, 0.62, 0.64, 0.66, 0.68, 0.70};
}

ThresholdResult runThresholdStudy(const PlanLibrary& lib, const sim::ScenarioConfig& base,
                                  const std::vector<double>& grid, bool parallel) {
  if (grid.empty()) throw ValidationError("threshold study needs a non-empty grid");

  sim::ScenarioConfig proto = base;
  proto.channel_rates.clear();  // the noiseless scenario is what the study is defined on
  proto.use_classifier = false;
  proto.perfect_objects = true;
  proto.behavior = sim::HumanBehavior::Task;
  proto.plan_switch.reset();
  proto.robot_enabled = true;

  auto digestFor = [&](double theta) {
    uint64_t h = fnv1a(std::string());
    for (size_t plan = 0; plan < lib.plans.size(); ++plan) {
      sim::ScenarioConfig cfg = proto;
      cfg.plan_id = static_cast<int>(plan);
      cfg.threshold = theta;
      cfg.seed = deriveSeed(base.seed, 30000 + plan);
      const auto trace = sim::runTrial(lib, cfg, {sim::RecognitionMode::Predictive, false});
      h = fnv1a("plan " + std::to_string(plan) + "\n", h);
      for (const auto& line : trace.decision_log) h = fnv1a(line + "\n", h);
    }
    return h;
  };

  const uint64_t reference = digestFor(base.threshold);
  std::vector<uint64_t> digests(grid.size(), 0);
  std::vector<std::string> errors;
  forEachCell(grid.size(), parallel, errors,
              [&](size_t i) { digests[i] = digestFor(grid[i]); });

  ThresholdResult res;
  res.all_identical = true;
  for (size_t i = 0; i < grid.size(); ++i) {
    const bool same = digests[i] == reference;
    res.rows.push_back({grid[i], same, digests[i]});
    res.all_identical = res.all_identical && same;
  }
  return res;
}

std::string ThresholdResult::csv() const {
  std::ostringstream os;
  os << "threshold,identical_to_default,decisions_digest\n";
  for (const auto& r : rows)
    os << fmtG(r.threshold) << "," << (r.identical_to_default ? 1 : 0) << ","
       << fmtHex(r.digest) << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Metadata
// ---------------------------------------------------------------------------

nlohmann::json metadataJson(const PlanLibrary& lib, const sim::ScenarioConfig& cfg) {
  nlohmann::json m;
  m["config"] = sim::scenarioToJson(cfg);
  m["library"] = {{"motions", lib.motions.size()},
                  {"objects", lib.objects.size()},
                  {"subtasks", lib.subtasks.size()},
                  {"plans", lib.plans.size()}};
  m["experiment_defaults"] = {{"efficiency_trials_per_group", 30},
                              {"robustness_trials_per_plan", 15},
                              {"robustness_deltas", defaultDeltas()},
                              {"threshold_grid", defaultThresholdGrid()}};
  return m;
}

}  // namespace hrc::exp
