#include "lsopt/state.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lsopt {

namespace {

// beta(y_h - phi_h) tested against the hats, edge-midpoint quadrature
Eigen::VectorXd obstacle_residual(const Mesh& mesh, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& phi, const RegParams& reg) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double w = mesh.tri_area[t] / 3.0;
    const int i0 = mesh.triangles(t, 0), i1 = mesh.triangles(t, 1),
              i2 = mesh.triangles(t, 2);
    const double s0 = y[i0] - phi[i0], s1 = y[i1] - phi[i1], s2 = y[i2] - phi[i2];
    for (int q = 0; q < MidpointRule::num_points; ++q) {
      const double* l = MidpointRule::bary[q];
      const double b = beta_reg(l[0] * s0 + l[1] * s1 + l[2] * s2, reg.eta, reg.eps2);
      if (b == 0.0) continue;
      out[i0] += w * b * l[0];
      out[i1] += w * b * l[1];
      out[i2] += w * b * l[2];
    }
  }
  return out;
}

SpMat obstacle_jacobian(const Mesh& mesh, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& phi, const RegParams& reg) {
  const Eigen::VectorXd slack = y - phi;
  return weighted_mass(mesh, composed_coeff(mesh, slack, [&reg](double s) {
    return beta_reg_prime(s, reg.eta, reg.eps2);
  }));
}

}  // namespace

void ProblemData::validate(const Mesh& mesh) const {
  reg.validate();
  const int n = mesh.num_vertices();
  if (level.size() != n) throw std::invalid_argument("ProblemData: level has wrong length");
  if (obstacle.size() != n)
    throw std::invalid_argument("ProblemData: obstacle has wrong length");
  if (obstacle.maxCoeff() >= 0.0)
    throw std::invalid_argument("ProblemData: obstacle must be negative in D");
  if (!source) throw std::invalid_argument("ProblemData: missing source term");
}

SpMat linearized_operator(const Mesh& mesh, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& level,
                          const Eigen::VectorXd& obstacle, const RegParams& reg) {
  const SpMat K = stiffness(mesh);
  const SpMat P = weighted_mass(mesh, composed_coeff(mesh, level, [&reg](double g) {
                    return heaviside_reg(g, reg.eta) / reg.eps;
                  }));
  const SpMat B = obstacle_jacobian(mesh, y, obstacle, reg);
  return SpMat(K + P + B);
}

StateField solve_state(const Mesh& mesh, const ProblemData& data,
                       const NewtonOptions& opts, const Eigen::VectorXd* y0) {
  data.validate(mesh);
  const int n = mesh.num_vertices();
  const DofMap dofs = interior_dofs(mesh);

  const SpMat K = stiffness(mesh);
  const SpMat P = weighted_mass(
      mesh, composed_coeff(mesh, data.level, [&](double g) {
        return heaviside_reg(g, data.reg.eta) / data.reg.eps;
      }));
  const SpMat A0 = restrict_interior(SpMat(K + P), dofs);
  const Eigen::VectorXd load_red =
      restrict_interior(load_vector(mesh, data.source), dofs);

  Eigen::VectorXd yr = Eigen::VectorXd::Zero(dofs.reduced_size());
  if (y0) {
    if (y0->size() != n) throw std::invalid_argument("solve_state: bad initial guess");
    yr = restrict_interior(*y0, dofs);
  }

  auto residual_of = [&](const Eigen::VectorXd& red) {
    const Eigen::VectorXd full = extend_with_zeros(red, dofs, n);
    Eigen::VectorXd res = A0 * red - load_red;
    res += restrict_interior(obstacle_residual(mesh, full, data.obstacle, data.reg),
                             dofs);
    return res;
  };

  Eigen::VectorXd res = residual_of(yr);
  double res_norm = res.lpNorm<Eigen::Infinity>();

  Eigen::SimplicialLDLT<SpMat> solver;
  bool analyzed = false;
  int iter = 0;

  // One damped Newton update; returns false when no damping value helps.
  auto newton_step = [&]() {
    const Eigen::VectorXd y_full = extend_with_zeros(yr, dofs, n);
    const SpMat W =
        restrict_interior(obstacle_jacobian(mesh, y_full, data.obstacle, data.reg),
                          dofs);
    const SpMat J = A0 + W;  // pattern equals the stiffness adjacency
    if (!analyzed) {
      solver.analyzePattern(J);
      analyzed = true;
    }
    solver.factorize(J);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("solve_state: singular Jacobian at iteration " +
                               std::to_string(iter));
    const Eigen::VectorXd step = solver.solve(res);
    double damping = 1.0;
    for (int half = 0; half <= opts.max_halvings; ++half) {
      Eigen::VectorXd trial = yr - damping * step;
      Eigen::VectorXd trial_res = residual_of(trial);
      const double trial_norm = trial_res.lpNorm<Eigen::Infinity>();
      if (trial_norm < res_norm) {
        yr = std::move(trial);
        res = std::move(trial_res);
        res_norm = trial_norm;
        return true;
      }
      damping *= 0.5;
    }
    return false;
  };

  while (res_norm > opts.tol) {
    if (iter >= opts.max_iter)
      throw std::runtime_error("solve_state: Newton did not converge in " +
                               std::to_string(opts.max_iter) +
                               " iterations, residual " + std::to_string(res_norm));
    ++iter;
    if (!newton_step())
      throw std::runtime_error("solve_state: damping failed at iteration " +
                               std::to_string(iter) + ", residual " +
                               std::to_string(res_norm));
  }

  // one polishing step: the stopping test leaves ~tol residual, the extra
  // step drops it near machine level, which the gradient checks rely on
  if (res_norm > 0.0) {
    const Eigen::VectorXd keep_y = yr;
    const Eigen::VectorXd keep_res = res;
    const double keep_norm = res_norm;
    ++iter;
    if (!newton_step()) {
      yr = keep_y;
      res = keep_res;
      res_norm = keep_norm;
      --iter;
    }
  }

  StateField out;
  out.y = extend_with_zeros(yr, dofs, n);
  out.newton_iterations = iter;
  out.residual = res_norm;
  return out;
}

double normal_derivative_at(const Mesh& mesh, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& level, const Vec2& x,
                            double grad_floor) {
  const PointLocation loc = locate_point(mesh, x);
  const Vec2 gg = p1_gradient(mesh, level, loc.triangle);
  const double norm = gg.norm();
  if (norm <= grad_floor)
    throw std::runtime_error("normal_derivative_at: degenerate level gradient");
  return p1_gradient(mesh, y, loc.triangle).dot(gg) / norm;
}

}  // namespace lsopt
