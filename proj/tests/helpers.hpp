#pragma once

#include <string>

#include "hrc/domain.hpp"
#include "hrc/synth.hpp"
#include "hrc/trajectory.hpp"

namespace hrc::test {

inline const PlanLibrary& testLibrary() {
  static const PlanLibrary lib = loadPlanLibrary(std::string(HRC_DATA_DIR) +
                                                 "/desktop_assembly.json");
  return lib;
}

// A small trajectory predictor trained once per process. Big enough to aim at
// the reach target (needed by the avoidance scenarios), small enough to train
// in a couple of seconds.
inline const traj::TrajectoryPredictor& tinyPredictor() {
  static const traj::TrajectoryPredictor pred = [] {
    const auto& lib = testLibrary();
    traj::PredictorConfig pc;
    pc.history = 5;
    pc.horizon = 8;
    pc.hidden = 16;
    pc.hidden_layers = 1;
    pc.epochs = 80;
    pc.seed = 11;
    const auto data = synth::predictorDataset(lib, pc, 12, 0.1, 12345, 0.002);
    return traj::TrajectoryPredictor::train(data, static_cast<int>(lib.motions.size()),
                                            static_cast<int>(lib.objects.size()), pc);
  }();
  return pred;
}

}  // namespace hrc::test
