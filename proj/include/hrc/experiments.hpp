#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hrc/domain.hpp"
#include "hrc/simulator.hpp"

namespace hrc::exp {

// Every experiment driver has a `parallel` switch: true runs the trial grid
// under OpenMP, false runs the serial reference path. Both write per-cell
// results into a preallocated grid and reduce in fixed index order, so their
// outputs are byte-identical (asserted in tests and by the bench tool).

// ---------------------------------------------------------------------------
// Efficiency: completion time per coordination mode, prediction on/off.
// ---------------------------------------------------------------------------

struct EfficiencyRow {
  std::string mode;
  bool predict_trajectory = false;
  double mean_completion_s = 0.0;
  double std_completion_s = 0.0;
  int trials = 0;
};

struct EfficiencyResult {
  std::vector<EfficiencyRow> rows;  // fixed order: reactive/oracle/predictive x off/on
  std::string csv() const;
  const EfficiencyRow& row(const std::string& mode, bool predict) const;
};

// Runs `trials_per_group` trials per (mode, prediction) group; trial i uses
// plan i % |plans| and a seed derived from (base seed, i) only, so groups are
// paired sample-by-sample. The observation channel is forced perfect: this
// experiment isolates coordination efficiency, the robustness sweep owns
// recognition noise.
EfficiencyResult runEfficiency(const PlanLibrary& lib, const sim::ScenarioConfig& base,
                               int trials_per_group,
                               const traj::TrajectoryPredictor* predictor,
                               bool parallel = true);

// ---------------------------------------------------------------------------
// Robustness: recognition accuracy vs channel degradation.
// ---------------------------------------------------------------------------

struct RobustnessRow {
  double delta = 0.0;
  double mc_accuracy = 0.0;
  double pr_accuracy = 0.0;
};

struct RobustnessResult {
  std::vector<RobustnessRow> rows;  // one per delta, input order
  std::string csv() const;
  const RobustnessRow& row(double delta) const;
};

std::vector<double> defaultDeltas();  // {0,-5,...,-45} percentage points

// Recognition-only sweep: robot disabled, confusion channel shifted by each
// delta (percentage points), `trials_per_plan` trials for every plan.
// Accuracies are pooled over ticks across all trials of a delta. Seeds depend
// on (plan, trial) only, so deltas share workloads (common random numbers).
RobustnessResult runRobustnessSweep(const PlanLibrary& lib, const sim::ScenarioConfig& base,
                                    const std::vector<double>& deltas, int trials_per_plan,
                                    bool parallel = true);

// ---------------------------------------------------------------------------
// Threshold sensitivity: do planner decisions move with the commit threshold?
// ---------------------------------------------------------------------------

struct ThresholdRow {
  double threshold = 0.0;
  bool identical_to_default = false;
  uint64_t digest = 0;  // FNV-1a over the concatenated decision logs
};

struct ThresholdResult {
  std::vector<ThresholdRow> rows;
  bool all_identical = false;
  std::string csv() const;
};

std::vector<double> defaultThresholdGrid();  // {0.58, 0.60, ..., 0.70}

// Re-simulates the noiseless default scenario for every plan at each
// threshold and digests the decision-log streams; a grid value matches the
// default when its digest equals the digest at base.threshold.
ThresholdResult runThresholdStudy(const PlanLibrary& lib, const sim::ScenarioConfig& base,
                                  const std::vector<double>& grid, bool parallel = true);

// FNV-1a 64-bit over a byte string; `h` chains across calls.
uint64_t fnv1a(const std::string& bytes, uint64_t h = 14695981039346656037ULL);

// Scenario + experiment defaults in one document; every run writes this next
// to its outputs so a result is reproducible from the artifact alone.
nlohmann::json metadataJson(const PlanLibrary& lib, const sim::ScenarioConfig& cfg);

}  // namespace hrc::exp
