#pragma once

#include <functional>
#include <optional>

#include "lsopt/assembly.hpp"
#include "lsopt/mesh.hpp"
#include "lsopt/regfun.hpp"

namespace lsopt {

constexpr double kGradFloor = 1e-8;  // guard for |grad g| at evaluation points

/// Data of one state problem on the fixed domain D.
struct ProblemData {
  Eigen::VectorXd level;     // nodal g_h, the geometry control
  Eigen::VectorXd obstacle;  // nodal phi_h, negative in D
  std::function<double(const Vec2&)> source;
  RegParams reg;

  void validate(const Mesh& mesh) const;
};

struct NewtonOptions {
  double tol = 1e-10;      // sup norm of the interior residual
  int max_iter = 50;
  int max_halvings = 30;   // step damping budget per iteration
};

/// Discrete state y_h: zero on the boundary dofs, with solver diagnostics.
struct StateField {
  Eigen::VectorXd y;       // full W_h vector
  int newton_iterations = 0;
  double residual = 0.0;   // final sup-norm residual
};

/// Operator of the linearized state equation at y:
///   stiffness + mass(beta'(y - phi)) + (1/eps) mass(H_eta(g)),
/// assembled over the full W_h space. This is the Newton Jacobian, the
/// sensitivity matrix and the adjoint matrix.
SpMat linearized_operator(const Mesh& mesh, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& level,
                          const Eigen::VectorXd& obstacle, const RegParams& reg);

/// Solves the penalized regularized state equation by damped Newton:
///   (grad y, grad v) + (beta(y-phi), v) + (1/eps)(H_eta(g) y, v) = (f, v)
/// for all v in V_h. Optionally warm-started from y0.
StateField solve_state(const Mesh& mesh, const ProblemData& data,
                       const NewtonOptions& opts = {},
                       const Eigen::VectorXd* y0 = nullptr);

/// grad y . grad g / |grad g| at x, on the triangle picked by locate_point.
/// Throws if |grad g| <= grad_floor there.
double normal_derivative_at(const Mesh& mesh, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& level, const Vec2& x,
                            double grad_floor = kGradFloor);

}  // namespace lsopt
