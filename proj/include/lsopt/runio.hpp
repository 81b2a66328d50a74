#pragma once

#include <optional>
#include <string>

#include "lsopt/optimize.hpp"

namespace lsopt {

struct TraceSettings {
  double dt = 1e-4;
  int l = 0;                                  // observation count, 0 = none
  std::optional<std::pair<int, int>> window;  // index window within [0, l)
  std::optional<Vec2> x0;                     // default: first observation point
  double trace_tol = 1e-6;
};

/// A fully validated scenario: mesh, problem data, observations, descent
/// settings and output location, built from a JSON config file.
struct RunSetup {
  Mesh mesh;
  ProblemData problem;
  ObservationSpec obs;
  DescentConfig descent;
  TraceSettings trace;
  std::optional<AnalyticLevel> analytic_level;  // set when the initial level is a disk
  std::string output_dir = "out";
};

/// Parses and validates a config file; throws std::runtime_error with the
/// offending field on invalid input. LSOPT_OUTPUT_DIR overrides output_dir.
RunSetup load_run_setup(const std::string& config_path);

/// Nodal interpolation of a scalar field.
Eigen::VectorXd interpolate_nodal(const Mesh& mesh,
                                  const std::function<double(const Vec2&)>& f);

/// Shifts the nodal values of the containing triangles so the interpolant
/// vanishes at every point (the zero-level pinning g_h(x0) = 0).
void pin_level_at(const Mesh& mesh, Eigen::VectorXd& g, std::span<const Vec2> points);

// ---- artifact writers (deterministic byte-for-byte output) ----

void write_history_csv(const RunHistory& hist, const std::string& path);
void write_contour_csv(const std::vector<Polyline>& polylines, const std::string& path);
void write_trajectory_csv(const TraceResult& trace, const std::string& path);
void write_points_csv(const std::vector<Vec2>& points, const std::string& path);
void write_gradient_csv(const GradientReport& report, const std::string& path);
void write_vtk_scalar(const Mesh& mesh, const Eigen::VectorXd& field,
                      const std::string& name, const std::string& path);

// ---- scenario drivers ----

/// Full optimization run: descend + history.csv, final_state.vtk,
/// final_level.vtk, contour_###.csv per iteration, report.json.
RunHistory run_scenario(const RunSetup& setup);

struct GradCheckRow {
  int index = -1;
  double analytic = 0.0;
  double fd = 0.0;
  double rel_err = 0.0;
  bool skipped = false;  // requested index was frozen
};

struct GradCheckReport {
  std::vector<GradCheckRow> rows;
  double max_rel_err = 0.0;
  double grad_norm_inf = 0.0;
};

/// Central finite differences of the reduced cost against the analytic
/// partial derivatives on sampled free indices (fixed RNG seed).
GradCheckReport check_gradient(const RunSetup& setup, int num_indices, double delta,
                               const std::vector<int>& requested = {});

struct TraceArtifacts {
  TraceResult trace;
  std::vector<Vec2> observations;
};

/// Hamiltonian boundary parameterization of the initial level function:
/// writes trajectory.csv, observations.csv (if l > 0) and trace_report.json.
TraceArtifacts trace_scenario(const RunSetup& setup);

/// State solve only: final_state.vtk and report.json with field extrema and
/// the normal derivatives at the observation points.
StateField state_only_scenario(const RunSetup& setup);

}  // namespace lsopt
