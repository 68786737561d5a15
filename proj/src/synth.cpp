#include "hrc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hrc::synth {

MotionStyle styleFor(const std::string& motion_name) {
  if (motion_name == "fetching") return {0.15, 0.4, 0.004, 0.3};
  if (motion_name == "receiving") return {0.45, 1.2, 0.001, 1.2};
  if (motion_name == "screwing") return {0.85, 3.0, 0.001, 2.1};
  if (motion_name == "taping") return {0.35, 0.7, 0.003, 0.7};
  if (motion_name == "cutting") return {0.95, 4.2, 0.001, 2.8};
  if (motion_name == "delivering") return {0.05, 0.1, 0.0, 0.0};
  // Unknown names get a stable pseudo-random but separable style.
  uint64_t h = 1469598103934665603ULL;
  for (char c : motion_name) h = (h ^ static_cast<uint64_t>(c)) * 1099511628211ULL;
  MotionStyle s;
  s.amp = 0.2 + 0.8 * static_cast<double>(h % 997) / 997.0;
  s.freq_hz = 0.3 + 4.0 * static_cast<double>((h >> 16) % 997) / 997.0;
  s.wrist_wiggle = 0.002;
  s.phase_step = 0.2 + 2.5 * static_cast<double>((h >> 32) % 997) / 997.0;
  return s;
}

Eigen::VectorXd fingerVelocities(const MotionStyle& style, double t, int channels, Rng& rng,
                                 double noise_sigma) {
  Eigen::VectorXd v(channels);
  const double w = 2.0 * M_PI * style.freq_hz;
  for (int c = 0; c < channels; ++c) {
    const double phase = style.phase_step * static_cast<double>(c);
    v[c] = style.amp * std::sin(w * t + phase) + rng.normal(0.0, noise_sigma);
  }
  return v;
}

int classIndexOf(const PlanLibrary& lib, int motion_id) {
  const auto ids = lib.humanMotionIds();
  const auto it = std::find(ids.begin(), ids.end(), motion_id);
  if (it == ids.end()) throw std::invalid_argument("motion is not a human motion");
  return static_cast<int>(it - ids.begin());
}

int motionIdOfClass(const PlanLibrary& lib, int class_index) {
  const auto ids = lib.humanMotionIds();
  if (class_index < 0 || class_index >= static_cast<int>(ids.size()))
    throw std::invalid_argument("class index out of range");
  return ids[static_cast<size_t>(class_index)];
}

namespace {

// Objects a motion can act on; used to pick plausible reach targets.
std::vector<int> feasibleObjects(const PlanLibrary& lib, int motion) {
  std::vector<int> out;
  for (const auto& o : lib.objects)
    if (lib.feasibility[static_cast<size_t>(motion)][static_cast<size_t>(o.id)])
      out.push_back(o.id);
  return out;
}

}  // namespace

std::vector<motion::TrainSample> classifierDataset(const PlanLibrary& lib, int per_class,
                                                   int window, double dt, uint64_t seed,
                                                   double noise_sigma) {
  const auto human = lib.humanMotionIds();
  std::vector<motion::TrainSample> data;
  data.reserve(human.size() * static_cast<size_t>(per_class));
  for (size_t cls = 0; cls < human.size(); ++cls) {
    const int motion_id = human[cls];
    const auto& style = styleFor(lib.motions[static_cast<size_t>(motion_id)].name);
    const auto targets = feasibleObjects(lib, motion_id);
    for (int trial = 0; trial < per_class; ++trial) {
      Rng rng(deriveSeed(seed, (cls << 20) ^ static_cast<uint64_t>(trial)));
      const Eigen::Vector3d start(rng.uniform(-0.1, 0.2), rng.uniform(0.3, 0.6),
                                  rng.uniform(0.0, 0.2));
      Eigen::Vector3d goal = start;
      if (!targets.empty()) {
        const int obj = targets[static_cast<size_t>(rng.intBelow(
            static_cast<int>(targets.size())))];
        goal = lib.objects[static_cast<size_t>(obj)].position;
      }
      const double duration = rng.uniform(3.0, 8.0);
      const double t0 = rng.uniform(0.0, std::max(0.0, duration - window * dt));
      Eigen::MatrixXd w(window, kFeatureDim);
      for (int k = 0; k < window; ++k) {
        const double t = t0 + k * dt;
        Eigen::Vector3d wrist = minJerkPoint(start, goal, t / duration);
        wrist += Eigen::Vector3d(rng.normal(0.0, style.wrist_wiggle),
                                 rng.normal(0.0, style.wrist_wiggle),
                                 rng.normal(0.0, style.wrist_wiggle));
        w.row(k).head<3>() = wrist.transpose();
        w.row(k).tail(kFingerChannels) =
            fingerVelocities(style, t, kFingerChannels, rng, noise_sigma).transpose();
      }
      data.push_back({std::move(w), static_cast<int>(cls)});
    }
  }
  return data;
}

std::vector<traj::TrajectoryPredictor::Sample> predictorDataset(const PlanLibrary& lib,
                                                                const traj::PredictorConfig& cfg,
                                                                int reaches, double dt,
                                                                uint64_t seed,
                                                                double noise_sigma) {
  const auto human = lib.humanMotionIds();
  std::vector<traj::TrajectoryPredictor::Sample> data;
  const int span = cfg.history + cfg.horizon;
  for (int reach = 0; reach < reaches; ++reach) {
    Rng rng(deriveSeed(seed, 0x9e37 ^ static_cast<uint64_t>(reach)));
    const int motion_id =
        human[static_cast<size_t>(rng.intBelow(static_cast<int>(human.size())))];
    const auto targets = feasibleObjects(lib, motion_id);
    if (targets.empty()) continue;
    const int obj =
        targets[static_cast<size_t>(rng.intBelow(static_cast<int>(targets.size())))];
    const Eigen::Vector3d goal = lib.objects[static_cast<size_t>(obj)].position;
    const Eigen::Vector3d start(rng.uniform(-0.2, 0.3), rng.uniform(0.25, 0.65),
                                rng.uniform(0.0, 0.25));
    const double duration = rng.uniform(1.5, 4.0);
    const int total = static_cast<int>(duration / dt) + 1;
    if (total < span + 1) continue;

    std::vector<Eigen::Vector3d> track(static_cast<size_t>(total));
    for (int k = 0; k < total; ++k) {
      track[static_cast<size_t>(k)] = minJerkPoint(start, goal, (k * dt) / duration) +
                                      Eigen::Vector3d(rng.normal(0.0, noise_sigma),
                                                      rng.normal(0.0, noise_sigma),
                                                      rng.normal(0.0, noise_sigma));
    }
    // A handful of (history -> future) windows per reach.
    const int windows = 4;
    for (int wi = 0; wi < windows; ++wi) {
      const int t0 = rng.intBelow(total - span);
      std::vector<Eigen::Vector3d> hist(track.begin() + t0, track.begin() + t0 + cfg.history);
      const Eigen::Vector3d anchor = hist.back();
      Eigen::VectorXd target(cfg.horizon * 3);
      for (int k = 0; k < cfg.horizon; ++k)
        target.segment<3>(3 * k) =
            track[static_cast<size_t>(t0 + cfg.history + k)] - anchor;
      traj::TrajectoryPredictor::Sample s;
      Action intent{motion_id, obj};
      // Same layout as TrajectoryPredictor::inputFromHistory.
      Eigen::VectorXd in = Eigen::VectorXd::Zero(cfg.history * 3 +
                                                 static_cast<int>(lib.motions.size()) +
                                                 static_cast<int>(lib.objects.size()));
      for (int k = 0; k < cfg.history; ++k)
        in.segment<3>(3 * k) = hist[static_cast<size_t>(k)] - anchor;
      in[cfg.history * 3 + intent.motion] = 1.0;
      in[cfg.history * 3 + static_cast<int>(lib.motions.size()) + intent.object] = 1.0;
      s.input = std::move(in);
      s.target = std::move(target);
      data.push_back(std::move(s));
    }
  }
  return data;
}

}  // namespace hrc::synth
