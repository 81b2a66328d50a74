#include "lsopt/optimize.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lsopt {

double line_search(const std::function<double(double)>& J, double j0, double scale,
                   const LineSearchOptions& opts) {
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw std::invalid_argument("line_search: bad scale");
  if (!std::isfinite(j0)) throw std::invalid_argument("line_search: J(0) not finite");

  int evals = 0;
  double best_lambda = 0.0, best_value = j0;
  auto eval = [&](double lambda) {
    ++evals;
    const double v = J(lambda);
    if (v < best_value) {
      best_value = v;
      best_lambda = lambda;
    }
    return v;
  };

  // geometric bracketing until the cost rises or the cap is reached
  double lam_prevprev = 0.0, lam_prev = 0.0, j_prev = j0;
  double lam = std::min(1e-3 * scale, opts.max_step);
  double lo = 0.0, hi = 0.0;
  while (true) {
    if (evals >= opts.budget) {
      if (best_value < j0) return best_lambda;
      throw NoDecreaseError("line_search: no decrease within the evaluation budget");
    }
    const double j = eval(lam);
    if (j > j_prev || lam >= opts.max_step) {
      lo = lam_prevprev;
      hi = lam;
      break;
    }
    lam_prevprev = lam_prev;
    lam_prev = lam;
    j_prev = j;
    lam = std::min(lam * opts.growth, opts.max_step);
  }

  // golden section on [lo, hi]
  constexpr double invphi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = eval(x1), f2 = (evals < opts.budget) ? eval(x2) : f1;
  while (evals < opts.budget && (b - a) > opts.rel_interval * b) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = eval(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = eval(x2);
    }
  }

  if (best_value < j0) return best_lambda;
  throw NoDecreaseError("line_search: direction is not a descent direction here");
}

double line_search(const std::function<double(double)>& J, const Eigen::VectorXd& R,
                   const Eigen::VectorXd& d, double j0, const LineSearchOptions& opts) {
  (void)R;
  const double dd = d.squaredNorm();
  if (dd == 0.0) throw NoDecreaseError("line_search: zero direction");
  const double scale = std::max(j0, 1e-300) / dd;
  return line_search(J, j0, scale, opts);
}

RunHistory descend(const Mesh& mesh, const ProblemData& problem,
                   const ObservationSpec& obs, const DescentConfig& config) {
  if (config.tol <= 0.0 || config.max_iter < 1)
    throw std::invalid_argument("descend: bad DescentConfig");
  obs.validate(mesh.domain);
  problem.validate(mesh);
  {
    const AdmissibilityReport rep = admissibility_check(problem.level, mesh, obs);
    if (!rep.all_pass())
      throw std::runtime_error(
          "descend: initial level function not admissible (boundary positivity / "
          "contour gradient / zero at observation points)");
  }

  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&t_start] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
        .count();
  };

  RunHistory hist;
  hist.I0 = select_I0(mesh, obs, config.i0_mode, problem.reg.C);

  ProblemData cur = problem;
  StateField state = solve_state(mesh, cur);
  double cost = eval_cost(mesh, state.y, cur.level, obs);
  hist.records.push_back({0, cost, 0.0, 0.0, elapsed()});
  if (config.record_levels) hist.levels.push_back(cur.level);

  for (int k = 1; k <= config.max_iter; ++k) {
    // descent direction d; the update is R <- R - lambda d on the free dofs
    Eigen::VectorXd d;
    if (config.direction == DirectionMode::full_gradient) {
      const GradientReport rep = grad_cost_streamed(mesh, state, cur.level,
                                                    cur.obstacle, cur.reg, obs, hist.I0);
      d = Eigen::VectorXd::Zero(mesh.num_vertices());
      for (size_t r = 0; r < rep.free_indices.size(); ++r)
        d[rep.free_indices[r]] = rep.partials[static_cast<Eigen::Index>(r)];
    } else {
      const AdjointField adj =
          solve_adjoint(mesh, state, cur.level, cur.obstacle, cur.reg, obs);
      d = -simplified_direction(state, adj, hist.I0);
    }
    const double dnorm = d.norm();
    hist.records.back().grad_norm = dnorm;
    if (d.lpNorm<Eigen::Infinity>() == 0.0) {
      hist.stop = StopReason::zero_direction;
      hist.iterations = k - 1;
      break;
    }

    // cost along the ray, warm-starting Newton from the accepted state
    double best_eval_cost = std::numeric_limits<double>::infinity();
    double best_eval_lambda = -1.0;
    StateField best_eval_state;
    auto cost_at = [&](double lambda) {
      ProblemData trial = cur;
      trial.level = cur.level - lambda * d;  // frozen dofs move by exactly 0
      const StateField s = solve_state(mesh, trial, {}, &state.y);
      const double j = eval_cost(mesh, s.y, trial.level, obs);
      if (j < best_eval_cost) {
        best_eval_cost = j;
        best_eval_lambda = lambda;
        best_eval_state = s;
      }
      return j;
    };

    LineSearchOptions ls_opts;
    ls_opts.budget = config.line_search_budget;
    ls_opts.growth = config.bracket_growth;
    ls_opts.max_step =
        config.step_cap_bands * cur.reg.eta / d.lpNorm<Eigen::Infinity>();

    double lambda;
    try {
      lambda = line_search(cost_at, cur.level, d, cost, ls_opts);
    } catch (const NoDecreaseError& e) {
      if (config.direction == DirectionMode::simplified_yp)
        throw std::runtime_error(
            std::string("descend: simplified direction failed to decrease the "
                        "cost at iteration ") +
            std::to_string(k) + " (" + e.what() + ")");
      hist.stop = StopReason::no_decrease;
      hist.iterations = k - 1;
      break;
    }

    cur.level -= lambda * d;
    state = best_eval_state;  // the line search minimizer, by construction
    const double new_cost = best_eval_cost;
    if (best_eval_lambda != lambda)
      throw std::logic_error("descend: line search bookkeeping out of sync");

    hist.records.push_back({k, new_cost, lambda, 0.0, elapsed()});
    if (config.record_levels) hist.levels.push_back(cur.level);
    hist.iterations = k;

    const double drop = std::abs(new_cost - cost);
    cost = new_cost;
    if (drop < config.tol) {
      hist.stop = StopReason::converged;
      break;
    }
    if (k == config.max_iter) hist.stop = StopReason::max_iterations;
  }

  hist.final_level = cur.level;
  hist.final_state = state;
  return hist;
}

}  // namespace lsopt
