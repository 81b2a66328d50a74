#include "lsopt/assembly.hpp"

#include <iostream>
#include <stdexcept>

namespace lsopt {

const double SevenPointRule::bary[7][3] = {
    {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
    {0.059715871789770, 0.470142064105115, 0.470142064105115},
    {0.470142064105115, 0.059715871789770, 0.470142064105115},
    {0.470142064105115, 0.470142064105115, 0.059715871789770},
    {0.797426985353087, 0.101286507323456, 0.101286507323456},
    {0.101286507323456, 0.797426985353087, 0.101286507323456},
    {0.101286507323456, 0.101286507323456, 0.797426985353087}};
const double SevenPointRule::weight[7] = {
    0.225,
    0.132394152788506, 0.132394152788506, 0.132394152788506,
    0.125939180544827, 0.125939180544827, 0.125939180544827};

DofMap interior_dofs(const Mesh& mesh) {
  DofMap dofs;
  dofs.full_to_reduced.assign(mesh.num_vertices(), -1);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (!mesh.on_boundary[v]) {
      dofs.full_to_reduced[v] = static_cast<int>(dofs.interior.size());
      dofs.interior.push_back(v);
    }
  }
  return dofs;
}

SpMat restrict_interior(const SpMat& full, const DofMap& dofs) {
  const int m = dofs.reduced_size();
  std::vector<Triplet> trips;
  trips.reserve(full.nonZeros());
  for (int col = 0; col < full.outerSize(); ++col) {
    const int jc = dofs.full_to_reduced[col];
    if (jc < 0) continue;
    for (SpMat::InnerIterator it(full, col); it; ++it) {
      const int ir = dofs.full_to_reduced[it.row()];
      if (ir >= 0) trips.emplace_back(ir, jc, it.value());
    }
  }
  SpMat out(m, m);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

Eigen::VectorXd restrict_interior(const Eigen::VectorXd& full, const DofMap& dofs) {
  Eigen::VectorXd out(dofs.reduced_size());
  for (int k = 0; k < dofs.reduced_size(); ++k) out[k] = full[dofs.interior[k]];
  return out;
}

Eigen::VectorXd extend_with_zeros(const Eigen::VectorXd& reduced, const DofMap& dofs,
                                  int full_size) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(full_size);
  for (int k = 0; k < dofs.reduced_size(); ++k) out[dofs.interior[k]] = reduced[k];
  return out;
}

SpMat stiffness(const Mesh& mesh) {
  const int n = mesh.num_vertices();
  std::vector<Triplet> trips;
  trips.reserve(9 * mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& G = mesh.hat_gradients[t];
    const double area = mesh.tri_area[t];
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        trips.emplace_back(mesh.triangles(t, a), mesh.triangles(t, b),
                           area * G.col(a).dot(G.col(b)));
  }
  SpMat K(n, n);
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

QuadCoeff composed_coeff(const Mesh& mesh, const Eigen::VectorXd& nodal,
                         std::function<double(double)> fn) {
  if (nodal.size() != mesh.num_vertices())
    throw std::invalid_argument("composed_coeff: nodal field has wrong length");
  return [&mesh, nodal, fn = std::move(fn)](int t, const double* l, const Vec2&) {
    const double v = l[0] * nodal[mesh.triangles(t, 0)] +
                     l[1] * nodal[mesh.triangles(t, 1)] +
                     l[2] * nodal[mesh.triangles(t, 2)];
    return fn(v);
  };
}

SpMat weighted_mass(const Mesh& mesh, const Eigen::VectorXd& coeff_nodal) {
  if (coeff_nodal.size() != mesh.num_vertices())
    throw std::invalid_argument("weighted_mass: coefficient has wrong length");
  if (coeff_nodal.minCoeff() < 0.0)
    std::cerr << "weighted_mass: warning, coefficient has negative nodal values\n";
  return weighted_mass(mesh,
                       composed_coeff(mesh, coeff_nodal, [](double v) { return v; }));
}

SpMat weighted_mass(const Mesh& mesh, const QuadCoeff& coeff) {
  const int n = mesh.num_vertices();
  std::vector<Triplet> trips;
  trips.reserve(9 * mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double w = mesh.tri_area[t] / 3.0;
    const Vec2 p0 = mesh.vertex(mesh.triangles(t, 0));
    const Vec2 p1 = mesh.vertex(mesh.triangles(t, 1));
    const Vec2 p2 = mesh.vertex(mesh.triangles(t, 2));
    Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
    bool any = false;
    for (int q = 0; q < MidpointRule::num_points; ++q) {
      const double* l = MidpointRule::bary[q];
      const Vec2 x = l[0] * p0 + l[1] * p1 + l[2] * p2;
      const double c = coeff(t, l, x);
      if (c == 0.0) continue;
      any = true;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) local(a, b) += w * c * l[a] * l[b];
    }
    if (!any) continue;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        trips.emplace_back(mesh.triangles(t, a), mesh.triangles(t, b), local(a, b));
  }
  SpMat M(n, n);
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

Eigen::VectorXd load_vector(const Mesh& mesh, double f) {
  return load_vector(mesh, [f](const Vec2&) { return f; });
}

Eigen::VectorXd load_vector(const Mesh& mesh,
                            const std::function<double(const Vec2&)>& f) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double w = mesh.tri_area[t] / 3.0;
    const Vec2 p0 = mesh.vertex(mesh.triangles(t, 0));
    const Vec2 p1 = mesh.vertex(mesh.triangles(t, 1));
    const Vec2 p2 = mesh.vertex(mesh.triangles(t, 2));
    for (int q = 0; q < MidpointRule::num_points; ++q) {
      const double* l = MidpointRule::bary[q];
      const double fv = f(l[0] * p0 + l[1] * p1 + l[2] * p2);
      for (int a = 0; a < 3; ++a) out[mesh.triangles(t, a)] += w * fv * l[a];
    }
  }
  return out;
}

Eigen::VectorXd load_vector(const Mesh& mesh, const Eigen::VectorXd& f_nodal) {
  if (f_nodal.size() != mesh.num_vertices())
    throw std::invalid_argument("load_vector: nodal source has wrong length");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double w = mesh.tri_area[t] / 3.0;
    const int i0 = mesh.triangles(t, 0), i1 = mesh.triangles(t, 1),
              i2 = mesh.triangles(t, 2);
    for (int q = 0; q < MidpointRule::num_points; ++q) {
      const double* l = MidpointRule::bary[q];
      const double fv = l[0] * f_nodal[i0] + l[1] * f_nodal[i1] + l[2] * f_nodal[i2];
      out[i0] += w * fv * l[0];
      out[i1] += w * fv * l[1];
      out[i2] += w * fv * l[2];
    }
  }
  return out;
}

Factorization::Factorization(const SpMat& A) {
  ldlt_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
  ldlt_->compute(A);
  if (ldlt_->info() == Eigen::Success) return;
  ldlt_.reset();
  lu_ = std::make_shared<Eigen::SparseLU<SpMat>>();
  lu_->compute(A);
  if (lu_->info() != Eigen::Success)
    throw std::runtime_error("factorize: matrix is singular or indefinite");
}

Eigen::VectorXd Factorization::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x;
  if (ldlt_)
    x = ldlt_->solve(rhs);
  else
    x = lu_->solve(rhs);
  const auto info = ldlt_ ? ldlt_->info() : lu_->info();
  if (info != Eigen::Success) throw std::runtime_error("solve: backsolve failed");
  return x;
}

Eigen::MatrixXd Factorization::solve(const Eigen::MatrixXd& rhs) const {
  Eigen::MatrixXd x;
  if (ldlt_)
    x = ldlt_->solve(rhs);
  else
    x = lu_->solve(rhs);
  const auto info = ldlt_ ? ldlt_->info() : lu_->info();
  if (info != Eigen::Success) throw std::runtime_error("solve: backsolve failed");
  return x;
}

}  // namespace lsopt
