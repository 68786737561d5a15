#pragma once

#include <Eigen/Dense>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hrc/domain.hpp"

namespace hrc::traj {

// Recursive least squares with forgetting over a fixed feature map.
// theta maps features (nphi) to outputs (ny); F is the inverse covariance.
struct RlsState {
  Eigen::MatrixXd F;
  Eigen::MatrixXd theta;  // nphi x ny
  double lambda = 0.98;
  double f0 = 1e3;
  int resets = 0;

  static RlsState init(int nphi, int ny, double lambda, double f0);
};

// One RLS step:
//   K = F phi / (lambda + phi' F phi)
//   theta += K (y - theta' phi)'
//   F = (F - K phi' F) / lambda, re-symmetrized.
// F is reset to f0*I (and the reset counted+logged) if it loses finiteness or
// blows past 1e14 in norm.
void rlsAdapt(RlsState& s, const Eigen::VectorXd& phi, const Eigen::VectorXd& y);

struct PredictorConfig {
  int history = 10;   // past wrist samples fed in
  int horizon = 10;   // future wrist samples predicted
  int hidden = 40;
  int hidden_layers = 3;
  double learning_rate = 0.005;
  int epochs = 400;
  uint64_t seed = 7;
  double rls_lambda = 0.98;
  double rls_f0 = 1e3;
};

// Feedforward feature network (tanh hidden layers) with a linear output layer
// held in RlsState so it can keep adapting online. All coordinates flowing
// through the network are offsets relative to the newest observed pose; the
// intended-action context enters as motion/object one-hots.
class TrajectoryPredictor {
 public:
  TrajectoryPredictor() = default;

  struct Sample {
    Eigen::VectorXd input;   // inputFromHistory() layout
    Eigen::VectorXd target;  // stacked future offsets, horizon*3
  };

  static TrajectoryPredictor init(int n_motions, int n_objects, const PredictorConfig& cfg);
  // Offline joint training (hidden layers + output layer, full-batch Adam);
  // afterwards the output layer is owned by a fresh RlsState.
  static TrajectoryPredictor train(const std::vector<Sample>& data, int n_motions,
                                   int n_objects, const PredictorConfig& cfg,
                                   std::vector<double>* loss_history = nullptr);

  int inputDim() const { return input_dim_; }
  int featureDim() const { return cfg_.hidden + 1; }  // +1: bias feature
  int outputDim() const { return cfg_.horizon * 3; }
  const PredictorConfig& config() const { return cfg_; }

  Eigen::VectorXd inputFromHistory(const std::vector<Eigen::Vector3d>& history,
                                   const Action& intent) const;
  Eigen::VectorXd features(const Eigen::VectorXd& input) const;

  // horizon x 3 absolute positions (offsets folded back onto history.back()).
  Eigen::MatrixXd predict(const std::vector<Eigen::Vector3d>& history,
                          const Action& intent) const;

  RlsState& rls() { return rls_; }
  const RlsState& rls() const { return rls_; }

  // Mean of 0.5*||error||^2 over the batch; gradient layout matches
  // parameters(). Used for training and the finite-difference check.
  double lossAndGradient(const std::vector<Sample>& batch, Eigen::VectorXd* grad) const;
  Eigen::VectorXd parameters() const;
  void setParameters(const Eigen::VectorXd& flat);
  int parameterCount() const;

  nlohmann::json toJson() const;
  static TrajectoryPredictor fromJson(const nlohmann::json& doc);

 private:
  PredictorConfig cfg_;
  int n_motions_ = 0, n_objects_ = 0, input_dim_ = 0;
  std::vector<Eigen::MatrixXd> W_;  // hidden layers
  std::vector<Eigen::VectorXd> b_;
  RlsState rls_;  // output layer lives here

  Eigen::MatrixXd hiddenActivations(const Eigen::VectorXd& input) const;  // layer x hidden
};

}  // namespace hrc::traj
