#pragma once

#include <functional>

#include "lsopt/adjoint.hpp"
#include "lsopt/sensitivity.hpp"

namespace lsopt {

enum class DirectionMode { full_gradient, simplified_yp };

struct DescentConfig {
  double tol = 1e-6;          // stop when |J_{k+1} - J_k| < tol
  int max_iter = 50;
  DirectionMode direction = DirectionMode::full_gradient;
  I0Mode i0_mode = I0Mode::ball;
  int line_search_budget = 30;  // max cost evaluations per line search
  double bracket_growth = 2.0;
  // Trust-region cap on the level change per step, in units of eta: the
  // accepted lambda keeps |lambda d|_inf <= step_cap_bands * eta so the
  // smoothing band survives the update. Unbounded steps flatten H_eta(g)
  // to a razor-thin band and stall the gradient.
  double step_cap_bands = 2.0;
  bool record_levels = false;   // keep a level snapshot per iteration
};

struct IterationRecord {
  int iter = 0;
  double cost = 0.0;
  double step = 0.0;       // accepted lambda (0 for the initial record)
  double grad_norm = 0.0;  // direction norm computed at this iterate
  double wall_time = 0.0;  // seconds since the start of the run
};

enum class StopReason { converged, max_iterations, zero_direction, no_decrease };

struct RunHistory {
  std::vector<IterationRecord> records;  // records[0] is the initial iterate
  std::vector<Eigen::VectorXd> levels;   // per record, when recorded
  Eigen::VectorXd final_level;
  StateField final_state;
  std::vector<int> I0;
  StopReason stop = StopReason::converged;
  int iterations = 0;  // accepted descent steps
};

struct LineSearchOptions {
  int budget = 30;
  double growth = 2.0;
  double rel_interval = 1e-3;  // golden-section stopping width, relative
  double max_step = std::numeric_limits<double>::infinity();
};

struct NoDecreaseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Derivative-free 1D minimization: geometric bracketing from 1e-3*scale,
/// then golden section inside the bracket. Returns the best evaluated step,
/// guaranteed to satisfy J(lambda) < j0; throws NoDecreaseError otherwise.
double line_search(const std::function<double(double)>& J, double j0, double scale,
                   const LineSearchOptions& opts = {});

/// Convenience wrapper matching the descent loop: the evaluator closes over
/// the current point R and direction d, the scale is j0 / |d|^2.
double line_search(const std::function<double(double)>& J, const Eigen::VectorXd& R,
                   const Eigen::VectorXd& d, double j0,
                   const LineSearchOptions& opts = {});

/// Steepest descent on the free level dofs (Algorithm steps 1-5): state
/// solve, gradient (or adjoint-based simplified direction), line search,
/// update, with the frozen indices never modified.
RunHistory descend(const Mesh& mesh, const ProblemData& problem,
                   const ObservationSpec& obs, const DescentConfig& config);

}  // namespace lsopt
