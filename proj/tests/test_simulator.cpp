#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "hrc/simulator.hpp"

using namespace hrc;
using namespace hrc::sim;
using hrc::test::testLibrary;
using hrc::test::tinyPredictor;

namespace {

ScenarioConfig noiseless() {
  ScenarioConfig cfg = defaultScenario();
  cfg.human_jitter_sigma_s = 0.0;
  cfg.channel_rates.clear();
  return cfg;
}

std::string dumpTrace(const SimTrace& tr) {
  std::ostringstream os;
  tr.writeJsonl(os);
  return os.str();
}

std::string tagOf(const Action& a) {
  return std::to_string(a.motion) + ":" + std::to_string(a.object);
}

std::vector<std::string> deliveredTags(const SimTrace& tr) {
  std::vector<std::string> out;
  for (const auto& line : tr.decision_log) {
    const auto pos = line.find(" delivered ");
    if (pos != std::string::npos) out.push_back(line.substr(pos + 11));
  }
  return out;
}

int waitingTicks(const SimTrace& tr) {
  int n = 0;
  for (const auto& rec : tr.ticks)
    if (rec.waiting) ++n;
  return n;
}

}  // namespace

TEST_CASE("noiseless completion times and deliveries per mode") {
  const auto& lib = testLibrary();
  const ScenarioConfig cfg = noiseless();

  SUBCASE("reactive waits for completed actions and finishes later") {
    const auto tr = runTrial(lib, cfg, {RecognitionMode::Reactive, false});
    CHECK(!tr.summary.deadlocked);
    CHECK(tr.summary.completion_s == doctest::Approx(93.0).epsilon(1e-9));
    CHECK(tr.summary.deliveries == 3);
    CHECK(tr.summary.recoveries == 0);
    CHECK(waitingTicks(tr) > 0);
    CHECK(tr.summary.mc_accuracy == -1.0);  // reactive runs no recognizer
    CHECK(tr.summary.pr_accuracy == -1.0);
    CHECK(tr.summary.mode == "reactive");
  }
  SUBCASE("oracle foresight removes all waiting") {
    const auto tr = runTrial(lib, cfg, {RecognitionMode::Oracle, false});
    CHECK(tr.summary.completion_s == doctest::Approx(72.0).epsilon(1e-9));
    CHECK(tr.summary.deliveries == 3);
    CHECK(waitingTicks(tr) == 0);
    CHECK(tr.summary.mc_accuracy == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("predictive recognition matches the oracle on a noiseless channel") {
    const auto tr = runTrial(lib, cfg, {RecognitionMode::Predictive, false});
    CHECK(tr.summary.completion_s == doctest::Approx(72.0).epsilon(1e-9));
    CHECK(tr.summary.deliveries == 3);
    CHECK(waitingTicks(tr) == 0);
    CHECK(tr.summary.mc_accuracy == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tr.summary.pr_accuracy >= 0.99);
    CHECK(tr.summary.log_appends == 9);
    CHECK(tr.summary.rejected_infeasible == 0);
    CHECK(tr.summary.belief_resets == 0);
  }
  SUBCASE("robot disabled: the human self-paces through all nine actions") {
    ScenarioConfig solo = cfg;
    solo.robot_enabled = false;
    const auto tr = runTrial(lib, solo, {RecognitionMode::Predictive, false});
    CHECK(tr.summary.completion_s == doctest::Approx(72.0).epsilon(1e-9));
    CHECK(tr.summary.deliveries == 0);
    CHECK(tr.summary.min_active_separation_m == -1.0);  // robot never moved
  }
}

TEST_CASE("every plan's deliveries happen in that plan's order") {
  const auto& lib = testLibrary();
  for (int plan = 0; plan < 6; ++plan) {
    ScenarioConfig cfg = noiseless();
    cfg.plan_id = plan;
    const auto tr = runTrial(lib, cfg, {RecognitionMode::Predictive, false});
    CHECK(tr.summary.completion_s == doctest::Approx(72.0).epsilon(1e-9));
    std::vector<std::string> want;
    for (const auto& step : lib.plans[static_cast<size_t>(plan)].robot_sequence)
      want.push_back(tagOf(step.action));
    CHECK(deliveredTags(tr) == want);
    CHECK(tr.summary.recoveries == 0);
  }
}

TEST_CASE("a fixed seed reproduces the trace byte for byte") {
  const auto& lib = testLibrary();
  ScenarioConfig cfg = defaultScenario();  // noisy channel + jitter
  cfg.seed = 99;
  const ModeSpec mode{RecognitionMode::Predictive, false};
  const std::string a = dumpTrace(runTrial(lib, cfg, mode));
  const std::string b = dumpTrace(runTrial(lib, cfg, mode));
  CHECK(a == b);

  cfg.seed = 100;
  CHECK(dumpTrace(runTrial(lib, cfg, mode)) != a);
}

TEST_CASE("jsonl roundtrip preserves the trace") {
  const auto& lib = testLibrary();
  ScenarioConfig cfg = defaultScenario();
  cfg.seed = 7;
  const auto tr = runTrial(lib, cfg, {RecognitionMode::Predictive, false});
  const std::string text = dumpTrace(tr);

  std::istringstream in(text);
  const SimTrace back = SimTrace::readJsonl(in);
  CHECK(dumpTrace(back) == text);
  CHECK(back.ticks.size() == tr.ticks.size());
  CHECK(back.summary.completion_s == tr.summary.completion_s);
  CHECK(back.decision_log == tr.decision_log);

  const auto path =
      (std::filesystem::temp_directory_path() / "hrc_trace_roundtrip.jsonl").string();
  tr.writeJsonl(path);
  const SimTrace from_file = SimTrace::readJsonl(path);
  CHECK(dumpTrace(from_file) == text);
  std::filesystem::remove(path);
}

TEST_CASE("summary accuracies equal a recount from the trace") {
  const auto& lib = testLibrary();
  ScenarioConfig cfg = defaultScenario();
  cfg.robot_enabled = false;
  cfg.seed = 31;
  const auto tr = runTrial(lib, cfg, {RecognitionMode::Predictive, false});
  const AccuracyReport rep = measureAccuracy(tr, lib);
  CHECK(rep.observation_ticks > 0);
  CHECK(rep.estimate_ticks > 0);
  CHECK(rep.mc == tr.summary.mc_accuracy);
  CHECK(rep.pr == tr.summary.pr_accuracy);
  CHECK(tr.summary.mc_accuracy < 1.0);  // the channel is noisy

  const ActionStreams streams = extractStreams(tr);
  CHECK(streams.truth.size() == static_cast<size_t>(rep.observation_ticks));
  CHECK(streams.raw.size() == streams.truth.size());
  CHECK(streams.corrected.size() == streams.truth.size());
  for (const auto& a : streams.truth) CHECK(a.valid());
  for (const auto& a : streams.raw) CHECK(a.valid());
}

TEST_CASE("edit distance") {
  auto a = [](int i) { return Action{0, i}; };
  CHECK(editDistance({}, {}) == 0);
  CHECK(editDistance({a(1)}, {}) == 1);
  CHECK(editDistance({}, {a(1), a(2)}) == 2);
  CHECK(editDistance({a(1), a(2), a(3)}, {a(1), a(2), a(3)}) == 0);
  CHECK(editDistance({a(1), a(2), a(3)}, {a(1), a(4), a(3)}) == 1);
  CHECK(editDistance({a(1), a(3)}, {a(1), a(2), a(3)}) == 1);
  CHECK(editDistance({a(1), a(2), a(3), a(4)}, {a(2), a(3), a(4), a(5)}) == 2);
}

TEST_CASE("duration overrides apply by name") {
  const auto& lib = testLibrary();
  ScenarioConfig cfg = noiseless();
  cfg.robot_enabled = false;
  DurationOverride ov;
  ov.robot = false;
  ov.motion = "taping";
  ov.object = "cables";
  ov.seconds = 4.0;
  cfg.overrides.push_back(ov);
  const auto tr = runTrial(lib, cfg, {RecognitionMode::Predictive, false});
  CHECK(tr.summary.completion_s == doctest::Approx(68.0).epsilon(1e-9));

  SUBCASE("unknown names are rejected") {
    cfg.overrides[0].motion = "levitating";
    CHECK_THROWS_AS(runTrial(lib, cfg, {RecognitionMode::Predictive, false}), ValidationError);
  }
}

TEST_CASE("scenario validation") {
  const auto& lib = testLibrary();
  ScenarioConfig cfg = defaultScenario();
  cfg.plan_id = 99;
  CHECK_THROWS_AS(runTrial(lib, cfg, {RecognitionMode::Predictive, false}), ValidationError);

  cfg = defaultScenario();
  cfg.plan_switch = PlanSwitch{42, 2};
  CHECK_THROWS_AS(runTrial(lib, cfg, {RecognitionMode::Predictive, false}), ValidationError);

  cfg = defaultScenario();
  CHECK_THROWS_AS(runTrial(lib, cfg, {RecognitionMode::Predictive, true}), ValidationError);

  cfg.use_classifier = true;
  CHECK_THROWS_AS(runTrial(lib, cfg, {RecognitionMode::Predictive, false}), ValidationError);

  CHECK(modeFromName("reactive") == RecognitionMode::Reactive);
  CHECK(modeFromName("oracle") == RecognitionMode::Oracle);
  CHECK(modeFromName("predictive") == RecognitionMode::Predictive);
  CHECK(modeName(RecognitionMode::Oracle) == "oracle");
  CHECK_THROWS_AS(modeFromName("bogus"), ValidationError);
}

TEST_CASE("scenario json roundtrip") {
  ScenarioConfig cfg = defaultScenario();
  cfg.plan_id = 3;
  cfg.lambda_d = 20.0;
  cfg.plan_switch = PlanSwitch{1, 4};
  DurationOverride ov;
  ov.robot = true;
  ov.motion = "delivering";
  ov.object = "screwdriver_b";
  ov.seconds = 14.0;
  cfg.overrides.push_back(ov);
  cfg.channel_rates = {{"screwing", 0.9}};

  const auto doc = scenarioToJson(cfg);
  const ScenarioConfig back = scenarioFromJson(doc, defaultScenario());
  CHECK(scenarioToJson(back) == doc);
  CHECK(back.plan_id == 3);
  CHECK(back.lambda_d == 20.0);
  REQUIRE(back.plan_switch.has_value());
  CHECK(back.plan_switch->to_plan == 1);
  CHECK(back.plan_switch->after_actions == 4);
  REQUIRE(back.overrides.size() == 1);
  CHECK(back.overrides[0].seconds == 14.0);

  // Partial documents override only the listed fields.
  const ScenarioConfig sparse =
      scenarioFromJson(nlohmann::json{{"lambda_d", 5.0}}, defaultScenario());
  CHECK(sparse.lambda_d == 5.0);
  CHECK(sparse.threshold == defaultScenario().threshold);
}

TEST_CASE("a scripted plan switch triggers exactly one recovery") {
  const auto& lib = testLibrary();
  std::ifstream in(std::string(HRC_DATA_DIR) + "/scenario_plan_switch.json");
  REQUIRE(in.good());
  const auto doc = nlohmann::json::parse(in);
  const ScenarioConfig cfg = scenarioFromJson(doc, defaultScenario());
  REQUIRE(cfg.plan_switch.has_value());

  const auto tr = runTrial(lib, cfg, {RecognitionMode::Predictive, false});
  CHECK(!tr.summary.deadlocked);
  CHECK(tr.summary.plan_id == cfg.plan_switch->to_plan);
  CHECK(tr.summary.recoveries == 1);
  CHECK(tr.summary.deliveries == 3);
  // Delivered: screwdriver_a before the switch, then the new plan's remainder.
  CHECK(deliveredTags(tr) == std::vector<std::string>{"5:2", "5:4", "5:3"});

  int recovery_lines = 0;
  for (const auto& line : tr.decision_log)
    if (line.find(" recovery ") != std::string::npos) ++recovery_lines;
  CHECK(recovery_lines == 1);
}

TEST_CASE("trajectory prediction lets the robot yield to an adversarial human") {
  const auto& lib = testLibrary();
  ScenarioConfig cfg = noiseless();
  cfg.behavior = HumanBehavior::Adversarial;
  cfg.adversarial_duration_s = 20.0;
  cfg.robot_action_s = 60.0;  // keep one delivery in flight the whole window

  const auto blind = runTrial(lib, cfg, {RecognitionMode::Predictive, false});
  const auto aware =
      runTrial(lib, cfg, {RecognitionMode::Predictive, true}, nullptr, &tinyPredictor());

  CHECK(blind.summary.min_active_separation_m ==
        doctest::Approx(minActiveSeparation(blind)).epsilon(1e-12));
  CHECK(blind.summary.min_active_separation_m < 0.05);
  CHECK(aware.summary.min_active_separation_m > blind.summary.min_active_separation_m);
  CHECK(aware.summary.min_active_separation_m > 0.06);
  CHECK(aware.summary.mean_pred_error_m >= 0.0);

  bool avoided = false;
  for (const auto& rec : aware.ticks)
    if (rec.robot_state == 3) avoided = true;
  CHECK(avoided);
}

TEST_CASE("object filter mode still completes the task") {
  const auto& lib = testLibrary();
  ScenarioConfig cfg = noiseless();
  cfg.perfect_objects = false;
  cfg.seed = 3;
  const auto tr = runTrial(lib, cfg, {RecognitionMode::Predictive, false});
  CHECK(!tr.summary.deadlocked);
  CHECK(tr.summary.deliveries == 3);
  CHECK(tr.summary.completion_s < 150.0);
}
