#include <cstdio>
#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "lsopt/runio.hpp"

namespace {

int cmd_run(const std::string& config) {
  const lsopt::RunSetup setup = lsopt::load_run_setup(config);
  const lsopt::RunHistory hist = lsopt::run_scenario(setup);
  std::printf("run: %d iteration(s), J %.6g -> %.6g, artifacts in %s\n",
              hist.iterations, hist.records.front().cost, hist.records.back().cost,
              setup.output_dir.c_str());
  return 0;
}

int cmd_check_grad(const std::string& config, int n, double delta,
                   const std::vector<int>& indices) {
  const lsopt::RunSetup setup = lsopt::load_run_setup(config);
  const lsopt::GradCheckReport rep = lsopt::check_gradient(setup, n, delta, indices);
  std::printf("%8s  %22s  %22s  %12s\n", "index", "analytic", "central FD", "rel err");
  for (const auto& row : rep.rows) {
    if (row.skipped) {
      std::printf("%8d  %22s\n", row.index, "skipped (frozen)");
      continue;
    }
    std::printf("%8d  %22.14e  %22.14e  %12.3e\n", row.index, row.analytic, row.fd,
                row.rel_err);
  }
  std::printf("max rel err = %.3e  (|grad|_inf = %.6g)\n", rep.max_rel_err,
              rep.grad_norm_inf);
  return 0;
}

int cmd_trace(const std::string& config) {
  const lsopt::RunSetup setup = lsopt::load_run_setup(config);
  const lsopt::TraceArtifacts art = lsopt::trace_scenario(setup);
  std::printf("trace: period %.12g, closure defect %.3e, %zu samples, artifacts in %s\n",
              art.trace.period, art.trace.closure_defect, art.trace.times.size(),
              setup.output_dir.c_str());
  return 0;
}

int cmd_state_only(const std::string& config) {
  const lsopt::RunSetup setup = lsopt::load_run_setup(config);
  const lsopt::StateField state = lsopt::state_only_scenario(setup);
  std::printf("state: min %.6g, max %.6g, %d Newton iteration(s), residual %.3e\n",
              state.y.minCoeff(), state.y.maxCoeff(), state.newton_iterations,
              state.residual);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Level-set shape optimization under an obstacle-type state problem"};
  app.require_subcommand(1);

  std::string config;
  int n = 20;
  double delta = 1e-5;
  std::vector<int> indices;

  auto* run = app.add_subcommand("run", "optimize a scenario and write artifacts");
  run->add_option("config", config, "JSON config file")->required();

  auto* check = app.add_subcommand("check-grad",
                                   "compare analytic partials with finite differences");
  check->add_option("config", config, "JSON config file")->required();
  check->add_option("--n", n, "number of sampled free indices");
  check->add_option("--delta", delta, "central difference step");
  check->add_option("--indices", indices, "explicit vertex indices to check");

  auto* trace = app.add_subcommand("trace", "Hamiltonian boundary parameterization");
  trace->add_option("config", config, "JSON config file")->required();

  auto* state = app.add_subcommand("state-only", "solve the state problem once");
  state->add_option("config", config, "JSON config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config);
    if (check->parsed()) return cmd_check_grad(config, n, delta, indices);
    if (trace->parsed()) return cmd_trace(config);
    if (state->parsed()) return cmd_state_only(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
