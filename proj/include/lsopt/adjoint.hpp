#pragma once

#include "lsopt/levelset.hpp"
#include "lsopt/state.hpp"

namespace lsopt {

/// Regularized adjoint state: zero on the boundary dofs, diagnostics kept.
struct AdjointField {
  Eigen::VectorXd p;        // full W_h vector
  double residual = 0.0;    // relative linear-solve residual
};

/// Solves the adjoint problem with mollified point data: the matrix is the
/// linearized state operator, the right-hand side is
///   -int 2 (dy/dn(x) - alpha) (dv/dn(x)) zeta_eps1(x - x0) dx
/// summed over the observation points, with d/dn = grad(.) . grad g / |grad g|
/// taken pointwise and a degree-5 rule on the elements meeting the mollifier
/// support. Throws when |grad g| falls below the floor inside that support.
AdjointField solve_adjoint(const Mesh& mesh, const StateField& state,
                           const Eigen::VectorXd& level,
                           const Eigen::VectorXd& obstacle, const RegParams& reg,
                           const ObservationSpec& obs,
                           double grad_floor = kGradFloor);

/// Right-hand side of the adjoint problem alone (full W_h vector); exposed
/// for quadrature cross-checks.
Eigen::VectorXd adjoint_rhs(const Mesh& mesh, const StateField& state,
                            const Eigen::VectorXd& level, const RegParams& reg,
                            const ObservationSpec& obs,
                            double grad_floor = kGradFloor);

/// Simplified descent direction -y_h p_h, nodal product masked to zero on
/// the frozen indices.
Eigen::VectorXd simplified_direction(const StateField& state, const AdjointField& adj,
                                     const std::vector<int>& I0);

/// (1/eps) int H'_eta(g) (y p)^2 dx by the edge-midpoint rule; nonnegative
/// by construction, the sign certificate of the simplified direction.
double direction_sign_surrogate(const Mesh& mesh, const StateField& state,
                                const AdjointField& adj, const Eigen::VectorXd& level,
                                const RegParams& reg);

}  // namespace lsopt
