#include "lsopt/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace lsopt {

std::vector<int> select_I0(const Mesh& mesh, const ObservationSpec& obs, I0Mode mode,
                           double C) {
  if (obs.points.empty()) throw std::invalid_argument("select_I0: no observation points");
  std::set<int> picked;
  if (mode == I0Mode::ball) {
    for (int v : ball_indices(mesh, obs.points, C * mesh.h)) picked.insert(v);
  } else {
    for (const Vec2& p : obs.points) {
      const PointLocation loc = locate_point(mesh, p);
      for (int k = 0; k < 3; ++k) picked.insert(mesh.triangles(loc.triangle, k));
    }
  }
  return {picked.begin(), picked.end()};
}

SensitivitySystem::SensitivitySystem(const Mesh& mesh, const StateField& state,
                                     const Eigen::VectorXd& level,
                                     const Eigen::VectorXd& obstacle,
                                     const RegParams& reg)
    : mesh_(&mesh) {
  matrix_full_ = linearized_operator(mesh, state.y, level, obstacle, reg);
  dofs_ = interior_dofs(mesh);
  factor_.emplace(restrict_interior(matrix_full_, dofs_));

  // H'_eta(g) y / eps at the quadrature points, reused by every basis rhs
  forcing_.assign(mesh.num_triangles(), {});
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const int i0 = mesh.triangles(t, 0), i1 = mesh.triangles(t, 1),
              i2 = mesh.triangles(t, 2);
    for (int q = 0; q < MidpointRule::num_points; ++q) {
      const double* l = MidpointRule::bary[q];
      const double g = l[0] * level[i0] + l[1] * level[i1] + l[2] * level[i2];
      const double hp = heaviside_reg_prime(g, reg.eta);
      if (hp == 0.0) {
        forcing_[t][q] = 0.0;
        continue;
      }
      const double yq = l[0] * state.y[i0] + l[1] * state.y[i1] + l[2] * state.y[i2];
      forcing_[t][q] = hp * yq / reg.eps;
    }
  }
}

Eigen::VectorXd SensitivitySystem::basis_rhs(int i) const {
  const Mesh& mesh = *mesh_;
  if (i < 0 || i >= mesh.num_vertices())
    throw std::out_of_range("basis_rhs: vertex index out of range");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (int t : mesh.vertex_to_triangles[i]) {
    int local = 0;
    while (mesh.triangles(t, local) != i) ++local;
    const double w = mesh.tri_area[t] / 3.0;
    for (int q = 0; q < MidpointRule::num_points; ++q) {
      const double c = forcing_[t][q];
      if (c == 0.0) continue;
      const double* l = MidpointRule::bary[q];
      for (int b = 0; b < 3; ++b)
        rhs[mesh.triangles(t, b)] -= w * c * l[local] * l[b];
    }
  }
  return rhs;
}

bool SensitivitySystem::rhs_vanishes(int i) const {
  const Mesh& mesh = *mesh_;
  for (int t : mesh.vertex_to_triangles[i]) {
    int local = 0;
    while (mesh.triangles(t, local) != i) ++local;
    for (int q = 0; q < MidpointRule::num_points; ++q)
      if (forcing_[t][q] != 0.0 && MidpointRule::bary[q][local] != 0.0) return false;
  }
  return true;
}

Eigen::VectorXd SensitivitySystem::solve(const Eigen::VectorXd& rhs_full) const {
  const Eigen::VectorXd red = factor_->solve(restrict_interior(rhs_full, dofs_));
  return extend_with_zeros(red, dofs_, mesh_->num_vertices());
}

std::map<int, Eigen::VectorXd> solve_sensitivities(const Mesh& mesh,
                                                   const StateField& state,
                                                   const Eigen::VectorXd& level,
                                                   const Eigen::VectorXd& obstacle,
                                                   const RegParams& reg,
                                                   const std::vector<int>& free) {
  const SensitivitySystem system(mesh, state, level, obstacle, reg);
  std::map<int, Eigen::VectorXd> out;
  for (int i : free) {
    if (system.rhs_vanishes(i))
      out[i] = Eigen::VectorXd::Zero(mesh.num_vertices());
    else
      out[i] = system.solve(system.basis_rhs(i));
  }
  return out;
}

double eval_cost(const Mesh& mesh, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& level, const ObservationSpec& obs,
                 double grad_floor) {
  obs.validate(mesh.domain);
  double cost = 0.0;
  for (size_t j = 0; j < obs.points.size(); ++j) {
    const double d = normal_derivative_at(mesh, y, level, obs.points[j], grad_floor) -
                     obs.alphas[static_cast<Eigen::Index>(j)];
    cost += d * d;
  }
  return cost;
}

double GradientReport::partial(int index) const {
  const auto it = std::lower_bound(free_indices.begin(), free_indices.end(), index);
  if (it == free_indices.end() || *it != index)
    throw std::out_of_range("GradientReport: index not in the free set");
  return partials[it - free_indices.begin()];
}

namespace {

struct ObservationGeometry {
  PointLocation loc;
  Vec2 normal;        // grad g / |grad g| on the located triangle
  double grad_norm;   // |grad g|
  double dyn;         // dy/dn
  double residual;    // dy/dn - alpha
  Vec2 grad_y;
};

std::vector<ObservationGeometry> observation_geometry(const Mesh& mesh,
                                                      const Eigen::VectorXd& y,
                                                      const Eigen::VectorXd& level,
                                                      const ObservationSpec& obs,
                                                      double grad_floor) {
  std::vector<ObservationGeometry> geo;
  for (size_t j = 0; j < obs.points.size(); ++j) {
    ObservationGeometry g;
    g.loc = locate_point(mesh, obs.points[j]);
    const Vec2 gg = p1_gradient(mesh, level, g.loc.triangle);
    g.grad_norm = gg.norm();
    if (g.grad_norm <= grad_floor)
      throw std::runtime_error("grad_cost: degenerate level gradient at observation point");
    g.normal = gg / g.grad_norm;
    g.grad_y = p1_gradient(mesh, y, g.loc.triangle);
    // same expression as normal_derivative_at, so matched targets cancel
    // bitwise and the zero-gradient stop triggers exactly
    g.dyn = g.grad_y.dot(gg) / g.grad_norm;
    g.residual = g.dyn - obs.alphas[static_cast<Eigen::Index>(j)];
    geo.push_back(g);
  }
  return geo;
}

// contribution of observation point j to dJ_i, given grad u_i on its triangle
double point_contribution(const Mesh& mesh, const ObservationGeometry& g, int i,
                          const Vec2& grad_ui) {
  double bracket = grad_ui.dot(g.normal);
  for (int k = 0; k < 3; ++k) {
    if (mesh.triangles(g.loc.triangle, k) == i) {
      const Vec2 grad_phi = mesh.hat_gradients[g.loc.triangle].col(k);
      bracket += -g.dyn * grad_phi.dot(g.normal) / g.grad_norm +
                 g.grad_y.dot(grad_phi) / g.grad_norm;
      break;
    }
  }
  return 2.0 * g.residual * bracket;
}

GradientReport finalize_report(std::vector<int> free, Eigen::MatrixXd per_point) {
  GradientReport rep;
  rep.free_indices = std::move(free);
  rep.per_point = std::move(per_point);
  rep.partials = rep.per_point.rowwise().sum();
  rep.norm = rep.partials.norm();
  if (!rep.partials.allFinite())
    throw std::runtime_error("grad_cost: non-finite partial derivative");
  return rep;
}

}  // namespace

GradientReport grad_cost(const Mesh& mesh, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& level, const RegParams& reg,
                         const ObservationSpec& obs, const std::vector<int>& I0,
                         const std::map<int, Eigen::VectorXd>& sensitivities,
                         double grad_floor) {
  (void)reg;
  for (const auto& [i, u] : sensitivities)
    if (std::binary_search(I0.begin(), I0.end(), i))
      throw std::invalid_argument("grad_cost: sensitivity for frozen index " +
                                  std::to_string(i));
  const auto geo = observation_geometry(mesh, y, level, obs, grad_floor);
  std::vector<int> free;
  free.reserve(sensitivities.size());
  for (const auto& [i, u] : sensitivities) free.push_back(i);
  Eigen::MatrixXd per_point(free.size(), geo.size());
  for (size_t r = 0; r < free.size(); ++r) {
    const Eigen::VectorXd& u = sensitivities.at(free[r]);
    for (size_t j = 0; j < geo.size(); ++j) {
      const Vec2 grad_u = p1_gradient(mesh, u, geo[j].loc.triangle);
      per_point(r, j) = point_contribution(mesh, geo[j], free[r], grad_u);
    }
  }
  return finalize_report(std::move(free), std::move(per_point));
}

GradientReport grad_cost_streamed(const Mesh& mesh, const StateField& state,
                                  const Eigen::VectorXd& level,
                                  const Eigen::VectorXd& obstacle,
                                  const RegParams& reg, const ObservationSpec& obs,
                                  const std::vector<int>& I0, double grad_floor) {
  const auto geo = observation_geometry(mesh, state.y, level, obs, grad_floor);
  const SensitivitySystem system(mesh, state, level, obstacle, reg);

  std::vector<int> free;
  free.reserve(mesh.num_vertices());
  for (int i = 0; i < mesh.num_vertices(); ++i)
    if (!std::binary_search(I0.begin(), I0.end(), i)) free.push_back(i);

  Eigen::MatrixXd per_point = Eigen::MatrixXd::Zero(free.size(), geo.size());

  constexpr int kBatch = 64;
  const int m = system.dofs().reduced_size();
  Eigen::MatrixXd rhs(m, kBatch);
  std::vector<size_t> batch_rows;

  auto flush = [&]() {
    if (batch_rows.empty()) return;
    const Eigen::MatrixXd sol =
        system.factor().solve(Eigen::MatrixXd(rhs.leftCols(batch_rows.size())));
    for (size_t c = 0; c < batch_rows.size(); ++c) {
      const size_t r = batch_rows[c];
      for (size_t j = 0; j < geo.size(); ++j) {
        Eigen::Vector3d local = Eigen::Vector3d::Zero();
        for (int k = 0; k < 3; ++k) {
          const int v = mesh.triangles(geo[j].loc.triangle, k);
          const int rd = system.dofs().full_to_reduced[v];
          local[k] = rd >= 0 ? sol(rd, c) : 0.0;
        }
        const Vec2 grad_u = mesh.hat_gradients[geo[j].loc.triangle] * local;
        per_point(r, j) = point_contribution(mesh, geo[j], free[r], grad_u);
      }
    }
    batch_rows.clear();
  };

  for (size_t r = 0; r < free.size(); ++r) {
    const int i = free[r];
    if (system.rhs_vanishes(i)) {
      // u_i = 0; only the phi_i terms can contribute
      for (size_t j = 0; j < geo.size(); ++j)
        per_point(r, j) = point_contribution(mesh, geo[j], i, Vec2::Zero());
      continue;
    }
    rhs.col(batch_rows.size()) =
        restrict_interior(system.basis_rhs(i), system.dofs());
    batch_rows.push_back(r);
    if (batch_rows.size() == kBatch) flush();
  }
  flush();

  return finalize_report(std::move(free), std::move(per_point));
}

}  // namespace lsopt
