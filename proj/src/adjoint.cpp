#include "lsopt/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lsopt/regfun.hpp"

namespace lsopt {

Eigen::VectorXd adjoint_rhs(const Mesh& mesh, const StateField& state,
                            const Eigen::VectorXd& level, const RegParams& reg,
                            const ObservationSpec& obs, double grad_floor) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (size_t j = 0; j < obs.points.size(); ++j) {
    const Vec2 x0 = obs.points[j];
    const double alpha = obs.alphas[static_cast<Eigen::Index>(j)];
    const double reach = reg.eps1 + 2.0 * mesh.h;  // coarse support bound
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      if ((mesh.centroid(t) - x0).norm() > reach) continue;
      const Vec2 p0 = mesh.vertex(mesh.triangles(t, 0));
      const Vec2 p1 = mesh.vertex(mesh.triangles(t, 1));
      const Vec2 p2 = mesh.vertex(mesh.triangles(t, 2));
      // zeta carries all the variation; the gradients are constant here
      double zeta_mass = 0.0;
      for (int q = 0; q < SevenPointRule::num_points; ++q) {
        const double* l = SevenPointRule::bary[q];
        const Vec2 x = l[0] * p0 + l[1] * p1 + l[2] * p2;
        zeta_mass += SevenPointRule::weight[q] * mollifier(x - x0, reg.eps1);
      }
      if (zeta_mass == 0.0) continue;
      zeta_mass *= mesh.tri_area[t];

      const Vec2 gg = p1_gradient(mesh, level, t);
      const double gn = gg.norm();
      if (gn <= grad_floor)
        throw std::runtime_error(
            "adjoint_rhs: degenerate level gradient inside the mollifier support");
      const Vec2 normal = gg / gn;
      const double dyn = p1_gradient(mesh, state.y, t).dot(normal);
      const double factor = -2.0 * (dyn - alpha) * zeta_mass;
      for (int k = 0; k < 3; ++k)
        rhs[mesh.triangles(t, k)] +=
            factor * mesh.hat_gradients[t].col(k).dot(normal);
    }
  }
  return rhs;
}

AdjointField solve_adjoint(const Mesh& mesh, const StateField& state,
                           const Eigen::VectorXd& level,
                           const Eigen::VectorXd& obstacle, const RegParams& reg,
                           const ObservationSpec& obs, double grad_floor) {
  const SpMat A = linearized_operator(mesh, state.y, level, obstacle, reg);
  const DofMap dofs = interior_dofs(mesh);
  const SpMat Ar = restrict_interior(A, dofs);
  const Eigen::VectorXd rhs =
      restrict_interior(adjoint_rhs(mesh, state, level, reg, obs, grad_floor), dofs);

  const Factorization fact(Ar);
  const Eigen::VectorXd pr = fact.solve(rhs);

  AdjointField out;
  out.p = extend_with_zeros(pr, dofs, mesh.num_vertices());
  const double rhs_norm = rhs.norm();
  out.residual = rhs_norm > 0.0 ? (Ar * pr - rhs).norm() / rhs_norm : 0.0;
  return out;
}

Eigen::VectorXd simplified_direction(const StateField& state, const AdjointField& adj,
                                     const std::vector<int>& I0) {
  if (state.y.size() != adj.p.size())
    throw std::invalid_argument("simplified_direction: mismatched fields");
  Eigen::VectorXd h = -state.y.cwiseProduct(adj.p);
  for (int i : I0) h[i] = 0.0;
  return h;
}

double direction_sign_surrogate(const Mesh& mesh, const StateField& state,
                                const AdjointField& adj, const Eigen::VectorXd& level,
                                const RegParams& reg) {
  double total = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const int i0 = mesh.triangles(t, 0), i1 = mesh.triangles(t, 1),
              i2 = mesh.triangles(t, 2);
    const double w = mesh.tri_area[t] / 3.0;
    for (int q = 0; q < MidpointRule::num_points; ++q) {
      const double* l = MidpointRule::bary[q];
      const double g = l[0] * level[i0] + l[1] * level[i1] + l[2] * level[i2];
      const double hp = heaviside_reg_prime(g, reg.eta);
      if (hp == 0.0) continue;
      const double yq = l[0] * state.y[i0] + l[1] * state.y[i1] + l[2] * state.y[i2];
      const double pq = l[0] * adj.p[i0] + l[1] * adj.p[i1] + l[2] * adj.p[i2];
      const double yp = yq * pq;
      total += w * hp * yp * yp;
    }
  }
  return total / reg.eps;
}

}  // namespace lsopt
