#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <vector>

#include "helpers.hpp"
#include "hrc/motion.hpp"
#include "hrc/rng.hpp"
#include "hrc/synth.hpp"

using namespace hrc;
using namespace hrc::motion;
using hrc::test::testLibrary;

namespace {

std::vector<TrainSample> randomBatch(int n, int T, int D, int C, Rng& rng) {
  std::vector<TrainSample> batch(static_cast<size_t>(n));
  for (auto& s : batch) {
    s.window.resize(T, D);
    for (int t = 0; t < T; ++t)
      for (int d = 0; d < D; ++d) s.window(t, d) = rng.normal(0.0, 1.0);
    s.label = rng.intBelow(C);
  }
  return batch;
}

}  // namespace

TEST_CASE("lstm analytic gradient matches central finite differences") {
  const int D = 3, H = 4, C = 3, T = 5;
  RecurrentClassifier net = RecurrentClassifier::init(D, H, C, 31);
  Rng rng(17);
  const auto batch = randomBatch(3, T, D, C, rng);

  Eigen::VectorXd grad;
  const double loss = net.lossAndGradient(batch, &grad);
  CHECK(std::isfinite(loss));
  REQUIRE(grad.size() == net.parameterCount());

  const Eigen::VectorXd theta = net.parameters();
  const double h = 1e-5;
  double worst = 0.0;
  for (int i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    net.setParameters(tp);
    const double lp = net.lossAndGradient(batch, nullptr);
    net.setParameters(tm);
    const double lm = net.lossAndGradient(batch, nullptr);
    const double fd = (lp - lm) / (2.0 * h);
    const double rel = std::abs(fd - grad[i]) / std::max(1.0, std::abs(fd) + std::abs(grad[i]));
    worst = std::max(worst, rel);
  }
  net.setParameters(theta);
  CHECK(worst < 1e-4);
}

TEST_CASE("channel construction from library rates") {
  const auto& lib = testLibrary();
  const std::map<std::string, double> rates = {
      {"screwing", 0.834}, {"fetching", 0.642}, {"receiving", 0.591}, {"taping", 0.842}};

  const ConfusionChannel ch = makeChannel(lib, rates, 0.0);
  CHECK(ch.labels == std::vector<int>{0, 1, 2, 3, 4});
  REQUIRE(ch.tpr.size() == 5);
  CHECK(ch.tpr[0] == doctest::Approx(0.642).epsilon(1e-12));  // fetching
  CHECK(ch.tpr[1] == doctest::Approx(0.591).epsilon(1e-12));  // receiving
  CHECK(ch.tpr[2] == doctest::Approx(0.834).epsilon(1e-12));  // screwing
  CHECK(ch.tpr[3] == doctest::Approx(0.842).epsilon(1e-12));  // taping
  CHECK(ch.tpr[4] == 1.0);                                    // cutting: unlisted

  SUBCASE("delta shifts listed rates only, clamped to [min_rate, 1]") {
    const ConfusionChannel down = makeChannel(lib, rates, -0.80);
    CHECK(down.tpr[0] == doctest::Approx(0.01).epsilon(1e-12));  // clamped at min_rate
    CHECK(down.tpr[2] == doctest::Approx(0.034).epsilon(1e-9));
    CHECK(down.tpr[4] == 1.0);
    const ConfusionChannel up = makeChannel(lib, rates, 0.50);
    CHECK(up.tpr[0] == 1.0);
    CHECK(up.tpr[1] == 1.0);
  }
  SUBCASE("unknown motion name rejected") {
    CHECK_THROWS_AS(makeChannel(lib, {{"yodeling", 0.5}}, 0.0), ValidationError);
  }
  SUBCASE("matrix rows are distributions with the configured diagonal") {
    const Eigen::MatrixXd m = ch.matrix();
    REQUIRE(m.rows() == 5);
    REQUIRE(m.cols() == 5);
    for (int i = 0; i < 5; ++i) {
      CHECK(m.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(m(i, i) == doctest::Approx(ch.tpr[static_cast<size_t>(i)]).epsilon(1e-12));
      for (int j = 0; j < 5; ++j)
        if (j != i)
          CHECK(m(i, j) ==
                doctest::Approx((1.0 - ch.tpr[static_cast<size_t>(i)]) / 4.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("channel sampling statistics match the configured rates") {
  const auto& lib = testLibrary();
  const ConfusionChannel ch = makeChannel(lib, {{"fetching", 0.642}}, 0.0);
  Rng rng(2024);
  const int N = 50000;
  std::vector<int> counts(5, 0);
  for (int i = 0; i < N; ++i) ++counts[static_cast<size_t>(ch.corrupt(0, rng))];

  const double p = 0.642;
  const double sig_hit = std::sqrt(p * (1 - p) / N);
  CHECK(std::abs(counts[0] / double(N) - p) < 4 * sig_hit);
  const double pe = (1 - p) / 4.0;  // errors uniform over the other labels
  const double sig_err = std::sqrt(pe * (1 - pe) / N);
  for (int j = 1; j < 5; ++j) CHECK(std::abs(counts[static_cast<size_t>(j)] / double(N) - pe) < 4 * sig_err);

  // perfect rate never corrupts
  for (int i = 0; i < 100; ++i) CHECK(ch.corrupt(2, rng) == 2);

  ConfusionChannel single;
  single.labels = {3};
  single.tpr = {0.5};
  CHECK(single.corrupt(3, rng) == 3);
}

TEST_CASE("window matrix stacks observations row-wise") {
  std::vector<MotionObservation> window(3);
  for (int t = 0; t < 3; ++t) {
    window[static_cast<size_t>(t)].timestamp = 0.1 * t;
    window[static_cast<size_t>(t)].features = Eigen::VectorXd::Constant(4, t + 1.0);
  }
  const Eigen::MatrixXd m = windowMatrix(window);
  REQUIRE(m.rows() == 3);
  REQUIRE(m.cols() == 4);
  for (int t = 0; t < 3; ++t) CHECK(m(t, 0) == t + 1.0);
}

TEST_CASE("class index mapping is the inverse of the label set") {
  const auto& lib = testLibrary();
  const auto human = lib.humanMotionIds();
  for (size_t i = 0; i < human.size(); ++i) {
    CHECK(synth::classIndexOf(lib, human[i]) == static_cast<int>(i));
    CHECK(synth::motionIdOfClass(lib, static_cast<int>(i)) == human[i]);
  }
}

TEST_CASE("classifier learns the synthetic motions") {
  const auto& lib = testLibrary();
  const auto train_data = synth::classifierDataset(lib, 8, 10, 0.1, 424, 0.002);
  REQUIRE(train_data.size() == 5 * 8);
  REQUIRE(train_data[0].window.cols() == synth::kFeatureDim);

  TrainConfig cfg;
  cfg.hidden = 16;
  cfg.epochs = 120;
  cfg.seed = 5;
  std::vector<double> losses;
  const RecurrentClassifier net = RecurrentClassifier::train(
      train_data, synth::kFeatureDim, static_cast<int>(lib.humanMotionIds().size()), cfg,
      &losses);
  REQUIRE(!losses.empty());
  CHECK(losses.back() < losses.front());

  const auto holdout = synth::classifierDataset(lib, 4, 10, 0.1, 777, 0.002);
  int hits = 0;
  for (const auto& s : holdout)
    if (net.classify(s.window) == s.label) ++hits;
  CHECK(hits >= static_cast<int>(0.75 * holdout.size()));

  SUBCASE("json roundtrip preserves the model exactly") {
    const RecurrentClassifier back = RecurrentClassifier::fromJson(net.toJson());
    CHECK((back.parameters() - net.parameters()).norm() == 0.0);
    const Eigen::VectorXd pa = net.classProbabilities(holdout[0].window);
    const Eigen::VectorXd pb = back.classProbabilities(holdout[0].window);
    CHECK((pa - pb).norm() == 0.0);
    CHECK(pa.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}
