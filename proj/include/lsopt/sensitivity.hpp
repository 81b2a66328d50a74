#pragma once

#include <map>
#include <optional>

#include "lsopt/levelset.hpp"
#include "lsopt/state.hpp"

namespace lsopt {

enum class I0Mode { ball, containing_triangle };

/// Frozen vertex set around the observation points: union of the balls of
/// radius C*h (ball mode) or of the vertices of the containing triangles.
/// In ball mode with C >= 2 every free hat vanishes at the observation points.
std::vector<int> select_I0(const Mesh& mesh, const ObservationSpec& obs, I0Mode mode,
                           double C);

/// Linearized state operator at a solved state, with its factorization and
/// the per-basis right-hand sides of the sensitivity problems. The same
/// matrix serves every right-hand side.
class SensitivitySystem {
 public:
  SensitivitySystem(const Mesh& mesh, const StateField& state,
                    const Eigen::VectorXd& level, const Eigen::VectorXd& obstacle,
                    const RegParams& reg);

  const SpMat& matrix() const { return matrix_full_; }
  const DofMap& dofs() const { return dofs_; }
  const Factorization& factor() const { return *factor_; }

  /// -(1/eps) integral of H'_eta(g) y phi_i v, over the full W_h space.
  Eigen::VectorXd basis_rhs(int i) const;
  bool rhs_vanishes(int i) const;

  /// Solve with the shared factorization; input and output are full-length,
  /// the solution is zero on boundary dofs.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs_full) const;

 private:
  const Mesh* mesh_;
  SpMat matrix_full_;
  DofMap dofs_;
  std::optional<Factorization> factor_;
  std::vector<std::array<double, 3>> forcing_;  // H'(g) y per triangle quad point
};

/// u_i for every requested free index (zero field where the right-hand side
/// vanishes). Indices must avoid I0 by construction of the caller.
std::map<int, Eigen::VectorXd> solve_sensitivities(const Mesh& mesh,
                                                   const StateField& state,
                                                   const Eigen::VectorXd& level,
                                                   const Eigen::VectorXd& obstacle,
                                                   const RegParams& reg,
                                                   const std::vector<int>& free);

/// Sum of |dy/dn(x0_j) - alpha_j|^2 over the observation points.
double eval_cost(const Mesh& mesh, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& level, const ObservationSpec& obs,
                 double grad_floor = kGradFloor);

struct GradientReport {
  std::vector<int> free_indices;  // ascending
  Eigen::VectorXd partials;       // d J / d G_i, same order
  Eigen::MatrixXd per_point;      // contribution of each observation point
  double norm = 0.0;

  double partial(int index) const;  // lookup by vertex index
};

/// Analytic partial derivatives from precomputed sensitivities:
///   dJ_i = sum_j 2 (dy/dn - a_j) [du_i/dn - dy/dn dphi_i/dn / |grad g|
///                                 + grad y . grad phi_i / |grad g|](x0_j).
GradientReport grad_cost(const Mesh& mesh, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& level, const RegParams& reg,
                         const ObservationSpec& obs, const std::vector<int>& I0,
                         const std::map<int, Eigen::VectorXd>& sensitivities,
                         double grad_floor = kGradFloor);

/// Same derivative, solving the u_i on the fly in batches and discarding
/// them; the only values kept are those on the observation triangles.
GradientReport grad_cost_streamed(const Mesh& mesh, const StateField& state,
                                  const Eigen::VectorXd& level,
                                  const Eigen::VectorXd& obstacle,
                                  const RegParams& reg, const ObservationSpec& obs,
                                  const std::vector<int>& I0,
                                  double grad_floor = kGradFloor);

}  // namespace lsopt
