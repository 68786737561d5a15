#include "hrc/motion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace hrc::motion {

using nlohmann::json;

Eigen::MatrixXd windowMatrix(const std::vector<MotionObservation>& window) {
  if (window.empty()) throw std::invalid_argument("empty observation window");
  const auto d = window.front().features.size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(window.size()), d);
  for (size_t t = 0; t < window.size(); ++t) {
    if (window[t].features.size() != d)
      throw std::invalid_argument("inconsistent feature width in observation window");
    m.row(static_cast<Eigen::Index>(t)) = window[t].features.transpose();
  }
  return m;
}

namespace {

Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& z) { return 1.0 / (1.0 + (-z).exp()); }

void xavierFill(Eigen::MatrixXd& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  // Column-major fill order, matching the parameter flattening.
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-limit, limit);
}

}  // namespace

RecurrentClassifier RecurrentClassifier::init(int input_dim, int hidden_dim, int n_classes,
                                              uint64_t seed, double forget_bias) {
  if (input_dim < 1 || hidden_dim < 1 || n_classes < 2)
    throw std::invalid_argument("classifier dimensions must be positive (>=2 classes)");
  RecurrentClassifier c;
  c.D_ = input_dim;
  c.H_ = hidden_dim;
  c.C_ = n_classes;
  Rng rng(deriveSeed(seed, 0x15731));
  c.Wx_.resize(4 * hidden_dim, input_dim);
  c.Wh_.resize(4 * hidden_dim, hidden_dim);
  c.Wy_.resize(n_classes, hidden_dim);
  xavierFill(c.Wx_, rng);
  xavierFill(c.Wh_, rng);
  xavierFill(c.Wy_, rng);
  c.b_ = Eigen::VectorXd::Zero(4 * hidden_dim);
  c.b_.segment(hidden_dim, hidden_dim).setConstant(forget_bias);
  c.by_ = Eigen::VectorXd::Zero(n_classes);
  return c;
}

RecurrentClassifier::Forward RecurrentClassifier::forward(const Eigen::MatrixXd& window) const {
  if (window.cols() != D_) throw std::invalid_argument("window feature width mismatch");
  const auto T = window.rows();
  Forward fw;
  fw.i.resize(T, H_);
  fw.f.resize(T, H_);
  fw.g.resize(T, H_);
  fw.o.resize(T, H_);
  fw.c.resize(T, H_);
  fw.h.resize(T, H_);
  fw.tanh_c.resize(T, H_);

  Eigen::VectorXd h = Eigen::VectorXd::Zero(H_);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(H_);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::VectorXd z = Wx_ * window.row(t).transpose() + Wh_ * h + b_;
    const Eigen::ArrayXd zi = z.segment(0, H_).array();
    const Eigen::ArrayXd zf = z.segment(H_, H_).array();
    const Eigen::ArrayXd zg = z.segment(2 * H_, H_).array();
    const Eigen::ArrayXd zo = z.segment(3 * H_, H_).array();
    const Eigen::ArrayXd gi = sigmoid(zi);
    const Eigen::ArrayXd gf = sigmoid(zf);
    const Eigen::ArrayXd gg = zg.tanh();
    const Eigen::ArrayXd go = sigmoid(zo);
    c = (gf * c.array() + gi * gg).matrix();
    const Eigen::ArrayXd tc = c.array().tanh();
    h = (go * tc).matrix();
    fw.i.row(t) = gi.transpose();
    fw.f.row(t) = gf.transpose();
    fw.g.row(t) = gg.transpose();
    fw.o.row(t) = go.transpose();
    fw.c.row(t) = c.transpose();
    fw.h.row(t) = h.transpose();
    fw.tanh_c.row(t) = tc.transpose();
  }
  Eigen::VectorXd logits = Wy_ * h + by_;
  const double zmax = logits.maxCoeff();
  Eigen::VectorXd ex = (logits.array() - zmax).exp();
  fw.probs = ex / ex.sum();
  return fw;
}

Eigen::VectorXd RecurrentClassifier::classProbabilities(const Eigen::MatrixXd& window) const {
  return forward(window).probs;
}

int RecurrentClassifier::classify(const Eigen::MatrixXd& window) const {
  const Eigen::VectorXd p = classProbabilities(window);
  int best = 0;
  for (int k = 1; k < C_; ++k)
    if (p[k] > p[best]) best = k;
  return best;
}

int RecurrentClassifier::parameterCount() const {
  return static_cast<int>(Wx_.size() + Wh_.size() + b_.size() + Wy_.size() + by_.size());
}

Eigen::VectorXd RecurrentClassifier::parameters() const {
  Eigen::VectorXd flat(parameterCount());
  Eigen::Index off = 0;
  auto put = [&](const auto& m) {
    flat.segment(off, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    off += m.size();
  };
  put(Wx_), put(Wh_), put(b_), put(Wy_), put(by_);
  return flat;
}

void RecurrentClassifier::setParameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameterCount())
    throw std::invalid_argument("parameter vector size mismatch");
  Eigen::Index off = 0;
  auto take = [&](auto& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = flat.segment(off, m.size());
    off += m.size();
  };
  take(Wx_), take(Wh_), take(b_), take(Wy_), take(by_);
}

double RecurrentClassifier::lossAndGradient(const std::vector<TrainSample>& batch,
                                            Eigen::VectorXd* grad) const {
  if (batch.empty()) throw std::invalid_argument("empty training batch");
  Eigen::MatrixXd dWx = Eigen::MatrixXd::Zero(Wx_.rows(), Wx_.cols());
  Eigen::MatrixXd dWh = Eigen::MatrixXd::Zero(Wh_.rows(), Wh_.cols());
  Eigen::MatrixXd dWy = Eigen::MatrixXd::Zero(Wy_.rows(), Wy_.cols());
  Eigen::VectorXd db = Eigen::VectorXd::Zero(b_.size());
  Eigen::VectorXd dby = Eigen::VectorXd::Zero(by_.size());

  double loss = 0.0;
  for (const auto& s : batch) {
    if (s.label < 0 || s.label >= C_) throw std::invalid_argument("train label out of range");
    const Forward fw = forward(s.window);
    const auto T = s.window.rows();
    loss -= std::log(std::max(fw.probs[s.label], 1e-300));

    Eigen::VectorXd dlogits = fw.probs;
    dlogits[s.label] -= 1.0;
    if (grad == nullptr) continue;

    dWy += dlogits * fw.h.row(T - 1);
    dby += dlogits;

    Eigen::ArrayXd dh = (Wy_.transpose() * dlogits).array();
    Eigen::ArrayXd dc = Eigen::ArrayXd::Zero(H_);
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      const Eigen::ArrayXd gi = fw.i.row(t).transpose().array();
      const Eigen::ArrayXd gf = fw.f.row(t).transpose().array();
      const Eigen::ArrayXd gg = fw.g.row(t).transpose().array();
      const Eigen::ArrayXd go = fw.o.row(t).transpose().array();
      const Eigen::ArrayXd tc = fw.tanh_c.row(t).transpose().array();
      const Eigen::ArrayXd c_prev = t > 0 ? fw.c.row(t - 1).transpose().array().eval()
                                          : Eigen::ArrayXd::Zero(H_).eval();

      const Eigen::ArrayXd do_ = dh * tc;
      dc += dh * go * (1.0 - tc.square());
      const Eigen::ArrayXd di = dc * gg;
      const Eigen::ArrayXd df = dc * c_prev;
      const Eigen::ArrayXd dg = dc * gi;

      Eigen::VectorXd dz(4 * H_);
      dz.segment(0, H_) = (di * gi * (1.0 - gi)).matrix();
      dz.segment(H_, H_) = (df * gf * (1.0 - gf)).matrix();
      dz.segment(2 * H_, H_) = (dg * (1.0 - gg.square())).matrix();
      dz.segment(3 * H_, H_) = (do_ * go * (1.0 - go)).matrix();

      dWx += dz * s.window.row(t);
      if (t > 0) dWh += dz * fw.h.row(t - 1);
      db += dz;

      dh = (Wh_.transpose() * dz).array();
      dc *= gf;
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
    put(dWx), put(dWh), put(db), put(dWy), put(dby);
  }
  return loss * inv_n;
}

RecurrentClassifier RecurrentClassifier::train(const std::vector<TrainSample>& data,
                                               int input_dim, int n_classes,
                                               const TrainConfig& cfg,
                                               std::vector<double>* loss_history) {
  RecurrentClassifier model =
      init(input_dim, cfg.hidden, n_classes, cfg.seed, cfg.forget_bias);
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
    theta -= (cfg.learning_rate * (m.array() / bc1) /
              ((v.array() / bc2).sqrt() + eps))
                 .matrix();
    model.setParameters(theta);
  }
  if (loss_history != nullptr) loss_history->push_back(model.lossAndGradient(data, nullptr));
  return model;
}

json RecurrentClassifier::toJson() const {
  json doc;
  doc["kind"] = "lstm_classifier";
  doc["format_version"] = 1;
  doc["input_dim"] = D_;
  doc["hidden"] = H_;
  doc["classes"] = C_;
  const Eigen::VectorXd flat = parameters();
  doc["params"] = std::vector<double>(flat.data(), flat.data() + flat.size());
  return doc;
}

RecurrentClassifier RecurrentClassifier::fromJson(const json& doc) {
  if (doc.at("kind").get<std::string>() != "lstm_classifier")
    throw std::invalid_argument("checkpoint kind mismatch (want lstm_classifier)");
  RecurrentClassifier c = init(doc.at("input_dim").get<int>(), doc.at("hidden").get<int>(),
                               doc.at("classes").get<int>(), 0);
  const auto raw = doc.at("params").get<std::vector<double>>();
  if (static_cast<int>(raw.size()) != c.parameterCount())
    throw std::invalid_argument("checkpoint parameter count mismatch");
  c.setParameters(Eigen::Map<const Eigen::VectorXd>(raw.data(), raw.size()));
  return c;
}

int ConfusionChannel::corrupt(int true_motion, Rng& rng) const {
  const auto it = std::find(labels.begin(), labels.end(), true_motion);
  if (it == labels.end())
    throw std::invalid_argument("motion not covered by the confusion channel");
  const size_t idx = static_cast<size_t>(it - labels.begin());
  if (labels.size() == 1) return true_motion;
  if (rng.uniform() < tpr[idx]) return true_motion;
  int pick = rng.intBelow(static_cast<int>(labels.size()) - 1);
  if (pick >= static_cast<int>(idx)) ++pick;
  return labels[static_cast<size_t>(pick)];
}

Eigen::MatrixXd ConfusionChannel::matrix() const {
  const int n = static_cast<int>(labels.size());
  Eigen::MatrixXd m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      m(r, c) = r == c ? tpr[static_cast<size_t>(r)]
                       : (1.0 - tpr[static_cast<size_t>(r)]) / static_cast<double>(n - 1);
  return m;
}

ConfusionChannel makeChannel(const PlanLibrary& lib, const std::map<std::string, double>& rates,
                             double delta, double min_rate) {
  ConfusionChannel ch;
  ch.labels = lib.humanMotionIds();
  for (int id : ch.labels) {
    const std::string& name = lib.motions[static_cast<size_t>(id)].name;
    const auto it = rates.find(name);
    double r = 1.0;
    if (it != rates.end()) r = std::clamp(it->second + delta, min_rate, 1.0);
    ch.tpr.push_back(r);
  }
  for (const auto& [name, rate] : rates) {
    (void)rate;
    if (!lib.motionIdByName(name))
      throw ValidationError("channel rate for unknown motion '" + name + "'");
  }
  return ch;
}

}  // namespace hrc::motion
