#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hrc/domain.hpp"
#include "hrc/rng.hpp"

namespace hrc::motion {

// One tracked-feature sample (wrist position + finger velocity channels).
struct MotionObservation {
  double timestamp = 0.0;
  Eigen::VectorXd features;
};

// Rows are time steps, columns feature channels.
Eigen::MatrixXd windowMatrix(const std::vector<MotionObservation>& window);

struct TrainSample {
  Eigen::MatrixXd window;  // T x D
  int label = 0;
};

struct TrainConfig {
  int hidden = 60;
  int epochs = 150;
  double learning_rate = 0.01;
  double forget_bias = 1.0;
  uint64_t seed = 1;
};

// Single-layer LSTM with a softmax readout from the final hidden state.
// Everything (forward, BPTT, Adam) is implemented here; training is
// full-batch and bit-deterministic for a fixed seed.
class RecurrentClassifier {
 public:
  RecurrentClassifier() = default;
  static RecurrentClassifier init(int input_dim, int hidden_dim, int n_classes, uint64_t seed,
                                  double forget_bias = 1.0);

  int inputDim() const { return D_; }
  int hiddenDim() const { return H_; }
  int classCount() const { return C_; }

  Eigen::VectorXd classProbabilities(const Eigen::MatrixXd& window) const;
  // Argmax class; ties resolve to the lowest label.
  int classify(const Eigen::MatrixXd& window) const;

  // Mean cross-entropy over the batch; gradient in parameters() layout when
  // grad is non-null. Exposed so the analytic gradient can be checked against
  // finite differences.
  double lossAndGradient(const std::vector<TrainSample>& batch, Eigen::VectorXd* grad) const;

  Eigen::VectorXd parameters() const;
  void setParameters(const Eigen::VectorXd& flat);
  int parameterCount() const;

  static RecurrentClassifier train(const std::vector<TrainSample>& data, int input_dim,
                                   int n_classes, const TrainConfig& cfg,
                                   std::vector<double>* loss_history = nullptr);

  nlohmann::json toJson() const;
  static RecurrentClassifier fromJson(const nlohmann::json& doc);

 private:
  int D_ = 0, H_ = 0, C_ = 0;
  // Gate packing along rows: [input; forget; cell; output], H rows each.
  Eigen::MatrixXd Wx_, Wh_, Wy_;
  Eigen::VectorXd b_, by_;

  struct Forward {
    Eigen::MatrixXd i, f, g, o, c, h, tanh_c;  // T x H each
    Eigen::VectorXd probs;
  };
  Forward forward(const Eigen::MatrixXd& window) const;
};

// Stochastic label corruption with configured per-motion true-positive rates;
// errors are uniform over the other channel labels.
struct ConfusionChannel {
  std::vector<int> labels;  // motion ids the channel observes/emits
  std::vector<double> tpr;  // aligned with labels

  int corrupt(int true_motion, Rng& rng) const;
  // Row: true label, column: emitted label (aligned with `labels`).
  Eigen::MatrixXd matrix() const;
};

// Channel over the library's human motions. `rates` maps motion names to base
// true-positive rates; listed rates are shifted by `delta` (clamped to
// [min_rate, 1]); unlisted human motions keep rate 1 and are not shifted.
ConfusionChannel makeChannel(const PlanLibrary& lib, const std::map<std::string, double>& rates,
                             double delta, double min_rate = 0.01);

}  // namespace hrc::motion
