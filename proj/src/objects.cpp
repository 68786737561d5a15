#include "hrc/objects.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hrc/log.hpp"

namespace hrc::objects {

double objectValue(const HumanPose& pose, const Eigen::Vector3d& object_pos, int motion,
                   const ValueParams& params) {
  const auto w = params.weightsFor(motion);
  const Eigen::Vector3d offset = object_pos - pose.wrist;
  const double dist = offset.norm();
  double heading = 0.0;
  const double speed = pose.wrist_velocity.norm();
  if (speed > 1e-6 && dist > 1e-12)
    heading = pose.wrist_velocity.dot(offset) / (speed * dist);
  return -w.dist * dist + w.heading * heading;
}

double likelihood(const HumanPose& pose, const Object& object, int motion,
                  const ValueParams& params) {
  return std::exp(params.beta * objectValue(pose, object.position, motion, params));
}

TransitionModels TransitionModels::uniform(int n_motions, int n_objects) {
  TransitionModels t;
  t.n_motions = n_motions;
  t.n_objects = n_objects;
  t.motion.assign(static_cast<size_t>(n_motions) * n_objects * n_motions,
                  1.0 / static_cast<double>(n_motions));
  t.object.assign(static_cast<size_t>(n_motions) * n_objects * n_objects,
                  1.0 / static_cast<double>(n_objects));
  return t;
}

TransitionModels TransitionModels::fromLibrary(const PlanLibrary& lib, double motion_stickiness,
                                               double object_stickiness) {
  const int nm = static_cast<int>(lib.motions.size());
  const int no = static_cast<int>(lib.objects.size());
  TransitionModels t = uniform(nm, no);

  // Bigram counts of adjacent motion pairs in plan references, attributed to
  // the successor action's object.
  std::vector<double> bigram(static_cast<size_t>(nm) * no * nm, 0.0);
  for (const auto& plan : lib.plans) {
    for (size_t k = 1; k < plan.reference.size(); ++k) {
      const Action& prev = plan.reference[k - 1];
      const Action& cur = plan.reference[k];
      bigram[(static_cast<size_t>(prev.motion) * no + cur.object) * nm + cur.motion] += 1.0;
    }
  }

  for (int mp = 0; mp < nm; ++mp) {
    for (int o = 0; o < no; ++o) {
      // Laplace-smoothed over the motions feasible for o; infeasible motions
      // keep zero mass so the filter never explains a pose with an illegal pair.
      double total = 0.0;
      std::vector<double> row(static_cast<size_t>(nm), 0.0);
      for (int m = 0; m < nm; ++m) {
        if (!lib.feasibility[static_cast<size_t>(m)][static_cast<size_t>(o)]) continue;
        row[static_cast<size_t>(m)] =
            bigram[(static_cast<size_t>(mp) * no + o) * nm + m] + 1.0;
        total += row[static_cast<size_t>(m)];
      }
      for (int m = 0; m < nm; ++m) {
        double p = total > 0.0 ? row[static_cast<size_t>(m)] / total
                               : 1.0 / static_cast<double>(nm);
        if (total > 0.0) {
          const double same = (m == mp && row[static_cast<size_t>(m)] > 0.0) ? 1.0 : 0.0;
          // Persistence mass goes to the previous motion when it is feasible
          // for o; otherwise the bigram row keeps all of it.
          const bool prev_feasible =
              lib.feasibility[static_cast<size_t>(mp)][static_cast<size_t>(o)];
          p = prev_feasible ? motion_stickiness * same + (1.0 - motion_stickiness) * p : p;
        }
        t.motionP(mp, o, m) = p;
      }
      // Normalize defensively (the branches above keep slices normalized, but
      // exact unit sums are part of this struct's contract).
      double s = 0.0;
      for (int m = 0; m < nm; ++m) s += t.motionP(mp, o, m);
      for (int m = 0; m < nm; ++m) t.motionP(mp, o, m) /= s;
    }
    for (int op = 0; op < no; ++op) {
      for (int o = 0; o < no; ++o)
        t.objectP(mp, op, o) = o == op
                                   ? object_stickiness
                                   : (1.0 - object_stickiness) / static_cast<double>(no - 1);
      if (no == 1) t.objectP(mp, op, op) = 1.0;
    }
  }
  t.validate();
  return t;
}

void TransitionModels::validate() const {
  auto check = [](double sum, const char* what) {
    if (std::abs(sum - 1.0) > 1e-9)
      throw ValidationError(std::string("transition model slice not normalized: ") + what);
  };
  for (int mp = 0; mp < n_motions; ++mp) {
    for (int o = 0; o < n_objects; ++o) {
      double s = 0.0;
      for (int m = 0; m < n_motions; ++m) {
        if (motionP(mp, o, m) < 0.0) throw ValidationError("negative motion transition");
        s += motionP(mp, o, m);
      }
      check(s, "motion");
    }
    for (int op = 0; op < n_objects; ++op) {
      double s = 0.0;
      for (int o = 0; o < n_objects; ++o) {
        if (objectP(mp, op, o) < 0.0) throw ValidationError("negative object transition");
        s += objectP(mp, op, o);
      }
      check(s, "object");
    }
  }
}

ObjectBelief initialBelief(int n_objects) {
  ObjectBelief b;
  b.p.assign(static_cast<size_t>(n_objects), 1.0 / static_cast<double>(n_objects));
  return b;
}

ObjectBelief updateBelief(const ObjectBelief& prev, const HumanPose& pose, int motion,
                          const TransitionModels& trans, const ValueParams& value,
                          const std::vector<Object>& objects) {
  const int no = static_cast<int>(objects.size());
  const int m_prev = prev.last_motion >= 0 ? prev.last_motion : motion;
  ObjectBelief next = prev;
  next.last_motion = motion;
  next.steps = prev.steps + 1;

  std::vector<double> logw(static_cast<size_t>(no), -std::numeric_limits<double>::infinity());
  double max_logw = -std::numeric_limits<double>::infinity();
  for (int o = 0; o < no; ++o) {
    double predict = 0.0;
    for (int op = 0; op < no; ++op)
      predict += trans.objectP(m_prev, op, o) * prev.p[static_cast<size_t>(op)];
    const double pm = trans.motionP(m_prev, o, motion);
    if (predict <= 0.0 || pm <= 0.0) continue;
    // log-likelihood is beta * V up to a constant shared by all objects
    const double lw = std::log(predict) + std::log(pm) +
                      value.beta * objectValue(pose, objects[static_cast<size_t>(o)].position,
                                               motion, value);
    logw[static_cast<size_t>(o)] = lw;
    max_logw = std::max(max_logw, lw);
  }

  if (!std::isfinite(max_logw)) {
    logging::warn("object belief degenerated (all posterior weights zero); reset to uniform");
    next.p.assign(static_cast<size_t>(no), 1.0 / static_cast<double>(no));
    next.resets = prev.resets + 1;
    return next;
  }

  double sum = 0.0;
  for (int o = 0; o < no; ++o) {
    const double w = std::exp(logw[static_cast<size_t>(o)] - max_logw);
    next.p[static_cast<size_t>(o)] = w;
    sum += w;
  }
  for (double& v : next.p) v /= sum;
  return next;
}

int mostLikelyObject(const ObjectBelief& belief) {
  int best = 0;
  for (int o = 1; o < static_cast<int>(belief.p.size()); ++o)
    if (belief.p[static_cast<size_t>(o)] > belief.p[static_cast<size_t>(best)]) best = o;
  return best;
}

}  // namespace hrc::objects
