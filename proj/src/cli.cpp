#include "hrc/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hrc/domain.hpp"
#include "hrc/experiments.hpp"
#include "hrc/log.hpp"
#include "hrc/motion.hpp"
#include "hrc/rng.hpp"
#include "hrc/simulator.hpp"
#include "hrc/synth.hpp"
#include "hrc/trajectory.hpp"

namespace hrc::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt3(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string dataDir() {
  if (const char* env = std::getenv("HRC_DATA_DIR"); env != nullptr && *env != '\0')
    return env;
#ifdef HRC_DATA_DIR
  return HRC_DATA_DIR;
#else
  return "data";
#endif
}

json readJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void writeTextFile(const fs::path& path, const std::string& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
}

struct CommonOpts {
  std::string library_path;
  std::string config_path;
  std::string checkpoints = "checkpoints";
  std::string out_dir = "out";
  std::optional<uint64_t> seed;
  bool serial = false;
};

void addCommon(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--library", o.library_path, "Plan library JSON (default: bundled library)");
  sub->add_option("--config", o.config_path, "Scenario JSON merged over built-in defaults");
  sub->add_option("--checkpoints", o.checkpoints, "Model checkpoint directory")
      ->capture_default_str();
  sub->add_option("--out", o.out_dir, "Directory for output artifacts")->capture_default_str();
  sub->add_option("--seed", o.seed, "Override the scenario seed");
  sub->add_flag("--serial", o.serial, "Use the serial reference path for experiment grids");
}

PlanLibrary loadLibrary(const CommonOpts& o) {
  const std::string path =
      o.library_path.empty() ? dataDir() + "/desktop_assembly.json" : o.library_path;
  return loadPlanLibrary(path);
}

sim::ScenarioConfig loadScenario(const CommonOpts& o) {
  sim::ScenarioConfig cfg = sim::defaultScenario();
  if (!o.config_path.empty()) {
    const json doc = readJsonFile(o.config_path);
    try {
      cfg = sim::scenarioFromJson(doc, cfg);
    } catch (const json::exception& e) {
      throw ValidationError(o.config_path + ": bad scenario config: " + e.what());
    }
  }
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

// Checkpoint if present, otherwise a small seeded default trained on the
// spot; every byte of the fallback derives from the scenario seed.
traj::TrajectoryPredictor obtainPredictor(const PlanLibrary& lib, const CommonOpts& o,
                                          const sim::ScenarioConfig& cfg) {
  const fs::path ckpt = fs::path(o.checkpoints) / "predictor.json";
  if (fs::exists(ckpt)) {
    logging::info("predictor checkpoint: " + ckpt.string());
    return traj::TrajectoryPredictor::fromJson(readJsonFile(ckpt.string()));
  }
  logging::info("no predictor checkpoint under '" + o.checkpoints +
                "', training a small seeded default");
  traj::PredictorConfig pc;
  pc.hidden = 32;
  pc.hidden_layers = 2;
  pc.epochs = 150;
  pc.seed = deriveSeed(cfg.seed, 7001);
  const auto data = synth::predictorDataset(lib, pc, 40, cfg.dt, deriveSeed(cfg.seed, 7002),
                                            cfg.pose_noise_sigma);
  return traj::TrajectoryPredictor::train(data, static_cast<int>(lib.motions.size()),
                                          static_cast<int>(lib.objects.size()), pc);
}

motion::RecurrentClassifier obtainClassifier(const PlanLibrary& lib, const CommonOpts& o,
                                             const sim::ScenarioConfig& cfg) {
  const fs::path ckpt = fs::path(o.checkpoints) / "classifier.json";
  if (fs::exists(ckpt)) {
    logging::info("classifier checkpoint: " + ckpt.string());
    return motion::RecurrentClassifier::fromJson(readJsonFile(ckpt.string()));
  }
  logging::info("no classifier checkpoint under '" + o.checkpoints +
                "', training a small seeded default");
  motion::TrainConfig tc;
  tc.hidden = 24;
  tc.epochs = 60;
  tc.seed = deriveSeed(cfg.seed, 7003);
  const auto data = synth::classifierDataset(lib, 20, cfg.classifier_window, cfg.dt,
                                             deriveSeed(cfg.seed, 7004), 0.05);
  return motion::RecurrentClassifier::train(data, synth::kFeatureDim,
                                            static_cast<int>(lib.humanMotionIds().size()), tc);
}

void writeMetadata(const PlanLibrary& lib, const sim::ScenarioConfig& cfg, const fs::path& dir,
                   json invocation) {
  json m = exp::metadataJson(lib, cfg);
  m["invocation"] = std::move(invocation);
  writeTextFile(dir / "metadata.json", m.dump(2) + "\n");
}

int doRun(const PlanLibrary& lib, const CommonOpts& o, const std::string& mode_name,
          bool predict, std::optional<int> plan, std::ostream& out) {
  sim::ScenarioConfig cfg = loadScenario(o);
  if (plan) cfg.plan_id = *plan;
  const sim::ModeSpec mode{sim::modeFromName(mode_name), predict};

  std::optional<motion::RecurrentClassifier> clf;
  std::optional<traj::TrajectoryPredictor> pred;
  if (mode.recognition == sim::RecognitionMode::Predictive && cfg.use_classifier)
    clf.emplace(obtainClassifier(lib, o, cfg));
  if (mode.predict_trajectory) pred.emplace(obtainPredictor(lib, o, cfg));

  const auto trace = sim::runTrial(lib, cfg, mode, clf ? &*clf : nullptr,
                                   pred ? &*pred : nullptr);
  fs::create_directories(o.out_dir);
  trace.writeJsonl((fs::path(o.out_dir) / "trace.jsonl").string());
  writeMetadata(lib, cfg, o.out_dir,
                {{"command", "run"},
                 {"mode", mode_name},
                 {"predict_trajectory", predict},
                 {"plan", cfg.plan_id},
                 {"serial", o.serial}});

  const auto& s = trace.summary;
  out << "plan=" << s.plan_id << " mode=" << s.mode << " tp=" << (s.predict_trajectory ? 1 : 0)
      << " completion_s=" << fmt3(s.completion_s) << " deliveries=" << s.deliveries
      << " recoveries=" << s.recoveries << " deadlocked=" << (s.deadlocked ? 1 : 0);
  if (s.mc_accuracy >= 0) out << " mc=" << fmt6(s.mc_accuracy);
  if (s.pr_accuracy >= 0) out << " pr=" << fmt6(s.pr_accuracy);
  if (s.mean_pred_error_m >= 0) out << " pred_err_m=" << fmt6(s.mean_pred_error_m);
  out << "\n";
  return 0;
}

int doEfficiency(const PlanLibrary& lib, const CommonOpts& o, int trials, std::ostream& out) {
  const sim::ScenarioConfig cfg = loadScenario(o);
  const auto predictor = obtainPredictor(lib, o, cfg);
  const auto res = exp::runEfficiency(lib, cfg, trials, &predictor, !o.serial);
  const std::string csv = res.csv();
  out << csv;
  writeTextFile(fs::path(o.out_dir) / "efficiency.csv", csv);
  writeMetadata(lib, cfg, o.out_dir,
                {{"command", "efficiency"}, {"trials", trials}, {"serial", o.serial}});
  return 0;
}

int doRobustness(const PlanLibrary& lib, const CommonOpts& o, const std::vector<double>& deltas,
                 int trials_per_plan, std::ostream& out) {
  const sim::ScenarioConfig cfg = loadScenario(o);
  const auto res = exp::runRobustnessSweep(lib, cfg, deltas, trials_per_plan, !o.serial);
  const std::string csv = res.csv();
  out << csv;
  writeTextFile(fs::path(o.out_dir) / "robustness.csv", csv);
  writeMetadata(lib, cfg, o.out_dir,
                {{"command", "robustness"},
                 {"deltas", deltas},
                 {"trials_per_plan", trials_per_plan},
                 {"serial", o.serial}});
  return 0;
}

int doThreshold(const PlanLibrary& lib, const CommonOpts& o, const std::vector<double>& grid,
                std::ostream& out) {
  const sim::ScenarioConfig cfg = loadScenario(o);
  const auto res = exp::runThresholdStudy(lib, cfg, grid, !o.serial);
  const std::string csv = res.csv();
  out << csv;
  writeTextFile(fs::path(o.out_dir) / "threshold.csv", csv);
  writeMetadata(lib, cfg, o.out_dir,
                {{"command", "threshold"}, {"grid", grid}, {"serial", o.serial}});
  return 0;
}

int doTrain(const PlanLibrary& lib, const CommonOpts& o, int per_class, int reaches,
            std::ostream& out) {
  const sim::ScenarioConfig cfg = loadScenario(o);

  motion::TrainConfig tc;
  tc.seed = deriveSeed(cfg.seed, 7003);
  const auto cdata = synth::classifierDataset(lib, per_class, cfg.classifier_window, cfg.dt,
                                              deriveSeed(cfg.seed, 7004), 0.05);
  std::vector<double> closs;
  const auto clf = motion::RecurrentClassifier::train(
      cdata, synth::kFeatureDim, static_cast<int>(lib.humanMotionIds().size()), tc, &closs);
  const auto holdout = synth::classifierDataset(lib, 8, cfg.classifier_window, cfg.dt,
                                                deriveSeed(cfg.seed, 7005), 0.05);
  int hits = 0;
  for (const auto& s : holdout)
    if (clf.classify(s.window) == s.label) ++hits;
  writeTextFile(fs::path(o.checkpoints) / "classifier.json", clf.toJson().dump() + "\n");
  out << "classifier: " << cdata.size() << " windows, final loss " << fmt6(closs.back())
      << ", holdout accuracy "
      << fmt6(static_cast<double>(hits) / static_cast<double>(holdout.size())) << "\n";

  traj::PredictorConfig pc;
  pc.seed = deriveSeed(cfg.seed, 7001);
  const auto pdata = synth::predictorDataset(lib, pc, reaches, cfg.dt,
                                             deriveSeed(cfg.seed, 7002), cfg.pose_noise_sigma);
  std::vector<double> ploss;
  const auto pred =
      traj::TrajectoryPredictor::train(pdata, static_cast<int>(lib.motions.size()),
                                       static_cast<int>(lib.objects.size()), pc, &ploss);
  writeTextFile(fs::path(o.checkpoints) / "predictor.json", pred.toJson().dump() + "\n");
  out << "predictor: " << pdata.size() << " samples, final loss " << fmt6(ploss.back())
      << "\n";

  writeMetadata(lib, cfg, o.checkpoints,
                {{"command", "train"}, {"per_class", per_class}, {"reaches", reaches}});
  return 0;
}

int doValidate(const PlanLibrary& lib, std::ostream& out, std::ostream& err) {
  validatePlanLibrary(lib);
  for (size_t a = 0; a < lib.plans.size(); ++a)
    for (size_t b = a + 1; b < lib.plans.size(); ++b)
      if (lib.plans[a].reference == lib.plans[b].reference) {
        err << "plans " << a << " and " << b << " share a reference sequence\n";
        return 2;
      }
  out << lib.plans.size() << " plans, identifiable\n";
  return 0;
}

}  // namespace

int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Collaborative-assembly workcell simulator and experiment driver"};
  app.require_subcommand(1);

  CommonOpts o;
  std::string mode_name = "predictive";
  bool predict = false;
  std::optional<int> plan;
  int trials = 30;
  int trials_per_plan = 15;
  std::vector<double> deltas = exp::defaultDeltas();
  std::vector<double> grid = exp::defaultThresholdGrid();
  int per_class = 30;
  int reaches = 60;

  auto* c_run = app.add_subcommand("run", "Run one trial and write its trace");
  addCommon(c_run, o);
  c_run->add_option("--mode", mode_name, "reactive|oracle|predictive")->capture_default_str();
  c_run->add_flag("--predict", predict, "Enable trajectory prediction and avoidance");
  c_run->add_option("--plan", plan, "Plan id override");

  auto* c_eff = app.add_subcommand("efficiency", "Completion-time comparison across modes");
  addCommon(c_eff, o);
  c_eff->add_option("--trials", trials, "Trials per group")->capture_default_str();

  auto* c_rob =
      app.add_subcommand("robustness", "Recognition accuracy under channel degradation");
  addCommon(c_rob, o);
  c_rob->add_option("--deltas", deltas, "True-positive-rate shifts in percentage points")
      ->delimiter(',');
  c_rob->add_option("--trials-per-plan", trials_per_plan, "Trials per plan per delta")
      ->capture_default_str();

  auto* c_thr =
      app.add_subcommand("threshold", "Planner decision sensitivity to the commit threshold");
  addCommon(c_thr, o);
  c_thr->add_option("--threshold-grid", grid, "Commit thresholds to compare")->delimiter(',');

  auto* c_train = app.add_subcommand("train", "Train classifier and predictor checkpoints");
  addCommon(c_train, o);
  c_train->add_option("--per-class", per_class, "Training windows per motion class")
      ->capture_default_str();
  c_train->add_option("--reaches", reaches, "Synthetic reaches in the predictor dataset")
      ->capture_default_str();

  auto* c_val =
      app.add_subcommand("validate", "Validate the plan library and check identifiability");
  addCommon(c_val, o);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    const PlanLibrary lib = loadLibrary(o);
    if (c_run->parsed()) return doRun(lib, o, mode_name, predict, plan, out);
    if (c_eff->parsed()) return doEfficiency(lib, o, trials, out);
    if (c_rob->parsed()) return doRobustness(lib, o, deltas, trials_per_plan, out);
    if (c_thr->parsed()) return doThreshold(lib, o, grid, out);
    if (c_train->parsed()) return doTrain(lib, o, per_class, reaches, out);
    if (c_val->parsed()) return doValidate(lib, out, err);
  } catch (const ValidationError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace hrc::cli
