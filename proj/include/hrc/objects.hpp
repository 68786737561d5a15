#pragma once

#include <vector>

#include "hrc/domain.hpp"

namespace hrc::objects {

// Boltzmann-rational pose likelihood parameters. Per-motion weights fall back
// to (dist, heading) when not listed.
struct ValueParams {
  double beta = 5.0;
  struct Weights {
    double dist = 1.0;
    double heading = 1.0;
  };
  Weights base;
  std::vector<Weights> per_motion;  // indexed by motion id; empty entries use base

  Weights weightsFor(int motion) const {
    if (motion >= 0 && motion < static_cast<int>(per_motion.size())) return per_motion[motion];
    return base;
  }
};

// V(h, o, m) = -w_dist * ||wrist - pos(o)|| + w_heading * cos(angle between
// wrist velocity and the bearing to o). The heading term is zero when the
// wrist speed is below 1e-6 (direction undefined at rest).
double objectValue(const HumanPose& pose, const Eigen::Vector3d& object_pos, int motion,
                   const ValueParams& params);

// exp(beta * V); any factor constant across objects cancels when the filter
// normalizes, so no partition function is needed.
double likelihood(const HumanPose& pose, const Object& object, int motion,
                  const ValueParams& params);

// Conditional tables for the recursive filter:
//   motion[m_prev][o][m]  = P(m_k = m | o_k = o, m_{k-1} = m_prev)
//   object[m_prev][op][o] = P(o_k = o | o_{k-1} = op, m_{k-1} = m_prev)
// Every slice over the last axis sums to 1.
struct TransitionModels {
  int n_motions = 0;
  int n_objects = 0;
  std::vector<double> motion;
  std::vector<double> object;

  double motionP(int m_prev, int o, int m) const {
    return motion[(static_cast<size_t>(m_prev) * n_objects + o) * n_motions + m];
  }
  double& motionP(int m_prev, int o, int m) {
    return motion[(static_cast<size_t>(m_prev) * n_objects + o) * n_motions + m];
  }
  double objectP(int m_prev, int o_prev, int o) const {
    return object[(static_cast<size_t>(m_prev) * n_objects + o_prev) * n_objects + o];
  }
  double& objectP(int m_prev, int o_prev, int o) {
    return object[(static_cast<size_t>(m_prev) * n_objects + o_prev) * n_objects + o];
  }

  static TransitionModels uniform(int n_motions, int n_objects);
  // Sticky defaults derived from a plan library: objects persist with
  // `object_stickiness`; motions persist with `motion_stickiness`, the
  // remainder following a Laplace-smoothed bigram of reference-adjacent
  // motion pairs restricted to motions feasible for the conditioning object.
  static TransitionModels fromLibrary(const PlanLibrary& lib, double motion_stickiness,
                                      double object_stickiness);
  void validate() const;  // throws ValidationError on non-normalized slices
};

struct ObjectBelief {
  std::vector<double> p;
  int last_motion = -1;  // m_{k-1}; -1 before the first update
  int steps = 0;
  int resets = 0;  // times the belief degenerated and was reset to uniform
};

ObjectBelief initialBelief(int n_objects);

// One recursion step. If every posterior weight underflows to zero the belief
// resets to uniform and the reset is counted and logged.
ObjectBelief updateBelief(const ObjectBelief& prev, const HumanPose& pose, int motion,
                          const TransitionModels& trans, const ValueParams& value,
                          const std::vector<Object>& objects);

// Argmax with ties broken toward the lowest object id.
int mostLikelyObject(const ObjectBelief& belief);

}  // namespace hrc::objects
