#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "hrc/domain.hpp"
#include "hrc/motion.hpp"
#include "hrc/rng.hpp"
#include "hrc/trajectory.hpp"

namespace hrc::synth {

// Classic minimum-jerk time scaling: s(0)=0, s(1)=1, zero velocity and
// acceleration at both ends.
inline double minJerkScalar(double tau) {
  const double t = std::clamp(tau, 0.0, 1.0);
  const double t3 = t * t * t;
  return t3 * (10.0 + t * (-15.0 + 6.0 * t));
}

inline Eigen::Vector3d minJerkPoint(const Eigen::Vector3d& from, const Eigen::Vector3d& to,
                                    double tau) {
  return from + (to - from) * minJerkScalar(tau);
}

// Hand-articulation style per motion: oscillation amplitude/frequency of the
// finger-velocity channels plus residual wrist wiggle. Values are arbitrary
// but fixed; they only need to make motions separable for the classifier.
struct MotionStyle {
  double amp = 0.3;
  double freq_hz = 1.0;
  double wrist_wiggle = 0.002;
  double phase_step = 0.9;  // phase offset between adjacent finger channels
};

// Deterministic per-name table with a hashed fallback for unknown names.
MotionStyle styleFor(const std::string& motion_name);

// Finger-velocity feature vector at time t within an action of the given style.
Eigen::VectorXd fingerVelocities(const MotionStyle& style, double t, int channels, Rng& rng,
                                 double noise_sigma);

constexpr int kFingerChannels = 6;
// Feature layout used by the classifier: wrist position followed by finger
// velocity channels.
constexpr int kFeatureDim = 3 + kFingerChannels;

// Labels are indices into lib.humanMotionIds() order.
int classIndexOf(const PlanLibrary& lib, int motion_id);
int motionIdOfClass(const PlanLibrary& lib, int class_index);

// Windows sampled from synthetic single-action executions, `per_class` trials
// per human motion.
std::vector<motion::TrainSample> classifierDataset(const PlanLibrary& lib, int per_class,
                                                   int window, double dt, uint64_t seed,
                                                   double noise_sigma);

// (history, future) windows sampled from minimum-jerk reaches toward library
// objects, in the predictor's offset coordinates.
std::vector<traj::TrajectoryPredictor::Sample> predictorDataset(const PlanLibrary& lib,
                                                                const traj::PredictorConfig& cfg,
                                                                int reaches, double dt,
                                                                uint64_t seed,
                                                                double noise_sigma);

}  // namespace hrc::synth
