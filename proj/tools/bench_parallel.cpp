// Times the robustness-sweep grid on the serial reference path and under
// OpenMP, and checks the two produce identical bytes.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "hrc/domain.hpp"
#include "hrc/experiments.hpp"
#include "hrc/simulator.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robustness-sweep benchmark: serial reference vs OpenMP grid"};
  std::string library;
  int trials_per_plan = 15;
  int repeats = 1;
  app.add_option("--library", library, "Plan library JSON");
  app.add_option("--trials-per-plan", trials_per_plan, "Trials per plan per delta")
      ->capture_default_str();
  app.add_option("--repeats", repeats, "Timing repeats; the minimum is reported")
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    const std::string path =
        library.empty() ? std::string(HRC_DATA_DIR) + "/desktop_assembly.json" : library;
    const auto lib = hrc::loadPlanLibrary(path);
    const auto cfg = hrc::sim::defaultScenario();
    const auto deltas = hrc::exp::defaultDeltas();

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (built without OpenMP)\n");
#endif
    std::printf("grid: %zu deltas x %zu plans x %d trials\n", deltas.size(), lib.plans.size(),
                trials_per_plan);

    double t_serial = 1e300;
    double t_parallel = 1e300;
    std::string serial_csv;
    std::string parallel_csv;
    for (int r = 0; r < std::max(1, repeats); ++r) {
      auto a = Clock::now();
      serial_csv = hrc::exp::runRobustnessSweep(lib, cfg, deltas, trials_per_plan, false).csv();
      auto b = Clock::now();
      t_serial = std::min(t_serial, seconds(a, b));

      a = Clock::now();
      parallel_csv = hrc::exp::runRobustnessSweep(lib, cfg, deltas, trials_per_plan, true).csv();
      b = Clock::now();
      t_parallel = std::min(t_parallel, seconds(a, b));
    }

    std::printf("serial   %.3f s\n", t_serial);
    std::printf("parallel %.3f s  (speedup %.2fx)\n", t_parallel, t_serial / t_parallel);
    if (serial_csv != parallel_csv) {
      std::printf("MISMATCH: serial and parallel outputs differ\n");
      return 1;
    }
    std::printf("outputs identical\n");
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
