#pragma once

#include <functional>
#include <memory>

#include "lsopt/mesh.hpp"
#include "lsopt/types.hpp"

namespace lsopt {

/// Coefficient evaluated at a quadrature point of a triangle, given the
/// triangle index, the barycentric coordinates of the point and its position.
using QuadCoeff =
    std::function<double(int triangle, const double* bary, const Vec2& x)>;

/// QuadCoeff that interpolates a nodal field and applies `fn` to the value.
QuadCoeff composed_coeff(const Mesh& mesh, const Eigen::VectorXd& nodal,
                         std::function<double(double)> fn);

/// Interior (V_h) degree-of-freedom bookkeeping for the homogeneous
/// Dirichlet condition on the hold-all boundary.
struct DofMap {
  std::vector<int> interior;         // interior vertex ids, ascending
  std::vector<int> full_to_reduced;  // -1 on boundary vertices

  int reduced_size() const { return static_cast<int>(interior.size()); }
};

DofMap interior_dofs(const Mesh& mesh);

SpMat restrict_interior(const SpMat& full, const DofMap& dofs);
Eigen::VectorXd restrict_interior(const Eigen::VectorXd& full, const DofMap& dofs);
Eigen::VectorXd extend_with_zeros(const Eigen::VectorXd& reduced, const DofMap& dofs,
                                  int full_size);

/// P1 stiffness matrix over the full W_h space (rows/columns of boundary
/// vertices included; restrict with restrict_interior for solves).
SpMat stiffness(const Mesh& mesh);

/// Mass matrix with a spatially varying coefficient, integrated by the
/// degree-2 edge-midpoint rule. The nodal overload interpolates the
/// coefficient linearly; the QuadCoeff overload evaluates it directly at the
/// quadrature points (used for composed coefficients like H_eta(g_h)).
SpMat weighted_mass(const Mesh& mesh, const Eigen::VectorXd& coeff_nodal);
SpMat weighted_mass(const Mesh& mesh, const QuadCoeff& coeff);

Eigen::VectorXd load_vector(const Mesh& mesh, double f);
Eigen::VectorXd load_vector(const Mesh& mesh, const std::function<double(const Vec2&)>& f);
Eigen::VectorXd load_vector(const Mesh& mesh, const Eigen::VectorXd& f_nodal);

/// Direct sparse factorization, Cholesky-type with an LU fallback.
/// Immutable after construction; concurrent solves are safe.
class Factorization {
 public:
  explicit Factorization(const SpMat& A);

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  bool used_cholesky() const { return ldlt_ != nullptr; }

 private:
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> ldlt_;
  std::shared_ptr<Eigen::SparseLU<SpMat>> lu_;
};

inline Factorization factorize(const SpMat& A) { return Factorization(A); }

/// Degree-2 quadrature (edge midpoints) on one triangle; weight |T|/3 each.
struct MidpointRule {
  static constexpr int num_points = 3;
  // barycentric coordinates of the edge midpoints
  static constexpr double bary[3][3] = {
      {0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
};

/// Degree-5 7-point rule, used where the integrand is not piecewise quadratic.
struct SevenPointRule {
  static constexpr int num_points = 7;
  static const double bary[7][3];
  static const double weight[7];  // relative to |T|
};

}  // namespace lsopt
