#include "hrc/trajectory.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hrc/log.hpp"
#include "hrc/rng.hpp"

namespace hrc::traj {

using nlohmann::json;

RlsState RlsState::init(int nphi, int ny, double lambda, double f0) {
  if (nphi < 1 || ny < 1) throw std::invalid_argument("RLS dimensions must be positive");
  if (lambda <= 0.0 || lambda > 1.0)
    throw std::invalid_argument("RLS forgetting factor must be in (0, 1]");
  if (f0 <= 0.0) throw std::invalid_argument("RLS F0 scale must be positive");
  RlsState s;
  s.F = f0 * Eigen::MatrixXd::Identity(nphi, nphi);
  s.theta = Eigen::MatrixXd::Zero(nphi, ny);
  s.lambda = lambda;
  s.f0 = f0;
  return s;
}

void rlsAdapt(RlsState& s, const Eigen::VectorXd& phi, const Eigen::VectorXd& y) {
  if (phi.size() != s.theta.rows() || y.size() != s.theta.cols())
    throw std::invalid_argument("RLS adapt dimension mismatch");
  const Eigen::VectorXd Fphi = s.F * phi;
  const double denom = s.lambda + phi.dot(Fphi);
  const Eigen::VectorXd K = Fphi / denom;
  const Eigen::RowVectorXd err = y.transpose() - phi.transpose() * s.theta;
  s.theta += K * err;
  s.F = (s.F - K * Fphi.transpose()) / s.lambda;
  s.F = 0.5 * (s.F + s.F.transpose()).eval();
  if (!s.F.allFinite() || s.F.norm() > 1e14) {
    logging::warn("RLS covariance blew up; resetting to F0");
    s.F = s.f0 * Eigen::MatrixXd::Identity(s.F.rows(), s.F.cols());
    s.resets += 1;
  }
}

namespace {

void xavierFill(Eigen::MatrixXd& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-limit, limit);
}

}  // namespace

TrajectoryPredictor TrajectoryPredictor::init(int n_motions, int n_objects,
                                              const PredictorConfig& cfg) {
  if (cfg.history < 1 || cfg.horizon < 1 || cfg.hidden < 1 || cfg.hidden_layers < 1)
    throw std::invalid_argument("predictor dimensions must be positive");
  TrajectoryPredictor p;
  p.cfg_ = cfg;
  p.n_motions_ = n_motions;
  p.n_objects_ = n_objects;
  p.input_dim_ = cfg.history * 3 + n_motions + n_objects;
  Rng rng(deriveSeed(cfg.seed, 0x7261'6a65));
  int in = p.input_dim_;
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    Eigen::MatrixXd W(cfg.hidden, in);
    xavierFill(W, rng);
    p.W_.push_back(std::move(W));
    p.b_.push_back(Eigen::VectorXd::Zero(cfg.hidden));
    in = cfg.hidden;
  }
  p.rls_ = RlsState::init(p.featureDim(), p.outputDim(), cfg.rls_lambda, cfg.rls_f0);
  // Output layer starts Xavier too; training overwrites it.
  Eigen::MatrixXd theta(p.featureDim(), p.outputDim());
  xavierFill(theta, rng);
  p.rls_.theta = theta;
  return p;
}

Eigen::VectorXd TrajectoryPredictor::inputFromHistory(
    const std::vector<Eigen::Vector3d>& history, const Action& intent) const {
  if (static_cast<int>(history.size()) != cfg_.history)
    throw std::invalid_argument("pose history length mismatch");
  Eigen::VectorXd in = Eigen::VectorXd::Zero(input_dim_);
  const Eigen::Vector3d& anchor = history.back();
  for (int i = 0; i < cfg_.history; ++i)
    in.segment<3>(3 * i) = history[static_cast<size_t>(i)] - anchor;
  if (intent.motion >= 0 && intent.motion < n_motions_)
    in[cfg_.history * 3 + intent.motion] = 1.0;
  if (intent.object >= 0 && intent.object < n_objects_)
    in[cfg_.history * 3 + n_motions_ + intent.object] = 1.0;
  return in;
}

Eigen::MatrixXd TrajectoryPredictor::hiddenActivations(const Eigen::VectorXd& input) const {
  Eigen::MatrixXd acts(static_cast<Eigen::Index>(W_.size()), cfg_.hidden);
  Eigen::VectorXd h = input;
  for (size_t l = 0; l < W_.size(); ++l) {
    h = (W_[l] * h + b_[l]).array().tanh().matrix();
    acts.row(static_cast<Eigen::Index>(l)) = h.transpose();
  }
  return acts;
}

Eigen::VectorXd TrajectoryPredictor::features(const Eigen::VectorXd& input) const {
  if (input.size() != input_dim_) throw std::invalid_argument("predictor input size mismatch");
  const Eigen::MatrixXd acts = hiddenActivations(input);
  Eigen::VectorXd phi(featureDim());
  phi.head(cfg_.hidden) = acts.row(acts.rows() - 1).transpose();
  phi[cfg_.hidden] = 1.0;
  return phi;
}

Eigen::MatrixXd TrajectoryPredictor::predict(const std::vector<Eigen::Vector3d>& history,
                                             const Action& intent) const {
  const Eigen::VectorXd phi = features(inputFromHistory(history, intent));
  const Eigen::VectorXd out = rls_.theta.transpose() * phi;
  Eigen::MatrixXd track(cfg_.horizon, 3);
  const Eigen::Vector3d& anchor = history.back();
  for (int k = 0; k < cfg_.horizon; ++k)
    track.row(k) = (anchor + out.segment<3>(3 * k)).transpose();
  return track;
}

int TrajectoryPredictor::parameterCount() const {
  int n = 0;
  for (size_t l = 0; l < W_.size(); ++l)
    n += static_cast<int>(W_[l].size() + b_[l].size());
  return n + static_cast<int>(rls_.theta.size());
}

Eigen::VectorXd TrajectoryPredictor::parameters() const {
  Eigen::VectorXd flat(parameterCount());
  Eigen::Index off = 0;
  auto put = [&](const auto& m) {
    flat.segment(off, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    off += m.size();
  };
  for (size_t l = 0; l < W_.size(); ++l) {
    put(W_[l]);
    put(b_[l]);
  }
  put(rls_.theta);
  return flat;
}

void TrajectoryPredictor::setParameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameterCount())
    throw std::invalid_argument("parameter vector size mismatch");
  Eigen::Index off = 0;
  auto take = [&](auto& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = flat.segment(off, m.size());
    off += m.size();
  };
  for (size_t l = 0; l < W_.size(); ++l) {
    take(W_[l]);
    take(b_[l]);
  }
  take(rls_.theta);
}

double TrajectoryPredictor::lossAndGradient(const std::vector<Sample>& batch,
                                            Eigen::VectorXd* grad) const {
  if (batch.empty()) throw std::invalid_argument("empty training batch");
  std::vector<Eigen::MatrixXd> dW(W_.size());
  std::vector<Eigen::VectorXd> db(W_.size());
  for (size_t l = 0; l < W_.size(); ++l) {
    dW[l] = Eigen::MatrixXd::Zero(W_[l].rows(), W_[l].cols());
    db[l] = Eigen::VectorXd::Zero(b_[l].size());
  }
  Eigen::MatrixXd dTheta = Eigen::MatrixXd::Zero(rls_.theta.rows(), rls_.theta.cols());

  double loss = 0.0;
  for (const auto& s : batch) {
    const Eigen::MatrixXd acts = hiddenActivations(s.input);
    Eigen::VectorXd phi(featureDim());
    phi.head(cfg_.hidden) = acts.row(acts.rows() - 1).transpose();
    phi[cfg_.hidden] = 1.0;
    const Eigen::VectorXd pred = rls_.theta.transpose() * phi;
    const Eigen::VectorXd err = pred - s.target;
    loss += 0.5 * err.squaredNorm();
    if (grad == nullptr) continue;

    dTheta += phi * err.transpose();
    Eigen::VectorXd dh = (rls_.theta * err).head(cfg_.hidden);
    for (int l = static_cast<int>(W_.size()) - 1; l >= 0; --l) {
      const Eigen::ArrayXd a = acts.row(l).transpose().array();
      const Eigen::VectorXd dz = (dh.array() * (1.0 - a.square())).matrix();
      const Eigen::VectorXd below =
          l > 0 ? acts.row(l - 1).transpose().eval() : s.input;
      dW[static_cast<size_t>(l)] += dz * below.transpose();
      db[static_cast<size_t>(l)] += dz;
      if (l > 0) dh = W_[static_cast<size_t>(l)].transpose() * dz;
    }
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  if (grad != nullptr) {
    grad->resize(parameterCount());
    Eigen::Index off = 0;
    auto put = [&](const auto& m) {
      grad->segment(off, m.size()) =
          Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()) * inv_n;
      off += m.size();
    };
    for (size_t l = 0; l < W_.size(); ++l) {
      put(dW[l]);
      put(db[l]);
    }
    put(dTheta);
  }
  return loss * inv_n;
}

TrajectoryPredictor TrajectoryPredictor::train(const std::vector<Sample>& data, int n_motions,
                                               int n_objects, const PredictorConfig& cfg,
                                               std::vector<double>* loss_history) {
  TrajectoryPredictor model = init(n_motions, n_objects, cfg);
  Eigen::VectorXd theta = model.parameters();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Eigen::VectorXd g;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double loss = model.lossAndGradient(data, &g);
    if (loss_history != nullptr) loss_history->push_back(loss);
    m = b1 * m + (1.0 - b1) * g;
    v = (b2 * v.array() + (1.0 - b2) * g.array().square()).matrix();
    const double bc1 = 1.0 - std::pow(b1, epoch);
    const double bc2 = 1.0 - std::pow(b2, epoch);
    theta -=
        (cfg.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps)).matrix();
    model.setParameters(theta);
  }
  if (loss_history != nullptr) loss_history->push_back(model.lossAndGradient(data, nullptr));
  // Online phase starts from a fresh covariance around the trained weights.
  model.rls_.F = cfg.rls_f0 * Eigen::MatrixXd::Identity(model.featureDim(), model.featureDim());
  model.rls_.resets = 0;
  return model;
}

json TrajectoryPredictor::toJson() const {
  json doc;
  doc["kind"] = "mlp_predictor";
  doc["format_version"] = 1;
  doc["history"] = cfg_.history;
  doc["horizon"] = cfg_.horizon;
  doc["hidden"] = cfg_.hidden;
  doc["hidden_layers"] = cfg_.hidden_layers;
  doc["n_motions"] = n_motions_;
  doc["n_objects"] = n_objects_;
  doc["rls_lambda"] = rls_.lambda;
  doc["rls_f0"] = rls_.f0;
  const Eigen::VectorXd flat = parameters();
  doc["params"] = std::vector<double>(flat.data(), flat.data() + flat.size());
  return doc;
}

TrajectoryPredictor TrajectoryPredictor::fromJson(const json& doc) {
  if (doc.at("kind").get<std::string>() != "mlp_predictor")
    throw std::invalid_argument("checkpoint kind mismatch (want mlp_predictor)");
  PredictorConfig cfg;
  cfg.history = doc.at("history").get<int>();
  cfg.horizon = doc.at("horizon").get<int>();
  cfg.hidden = doc.at("hidden").get<int>();
  cfg.hidden_layers = doc.at("hidden_layers").get<int>();
  cfg.rls_lambda = doc.at("rls_lambda").get<double>();
  cfg.rls_f0 = doc.at("rls_f0").get<double>();
  TrajectoryPredictor p =
      init(doc.at("n_motions").get<int>(), doc.at("n_objects").get<int>(), cfg);
  const auto raw = doc.at("params").get<std::vector<double>>();
  if (static_cast<int>(raw.size()) != p.parameterCount())
    throw std::invalid_argument("checkpoint parameter count mismatch");
  p.setParameters(Eigen::Map<const Eigen::VectorXd>(raw.data(), raw.size()));
  return p;
}

}  // namespace hrc::traj
