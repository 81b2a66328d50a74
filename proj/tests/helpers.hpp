#pragma once

#include <functional>
#include <random>

#include "lsopt/runio.hpp"

namespace lsopt::test {

/// Test-1 style problem: f = -100, phi = -0.5, disk of radius r0 centered in
/// the unit square, level pinned to zero at the observation points.
struct DiskScenario {
  Mesh mesh;
  ProblemData problem;
  ObservationSpec obs;
  AnalyticLevel analytic;
};

inline DiskScenario disk_scenario(int nx, double alpha = 0.0,
                                  RegParams reg = RegParams{}) {
  DiskScenario s;
  s.mesh = generate_structured(nx);
  s.analytic = disk_level(Vec2(0.5, 0.5), 0.25);
  s.problem.level = interpolate_nodal(s.mesh, s.analytic.value);
  s.problem.obstacle = Eigen::VectorXd::Constant(s.mesh.num_vertices(), -0.5);
  s.problem.source = [](const Vec2&) { return -100.0; };
  s.problem.reg = reg;
  s.obs.points = {Vec2(0.25, 0.5)};
  s.obs.alphas = Eigen::VectorXd::Constant(1, alpha);
  pin_level_at(s.mesh, s.problem.level, s.obs.points);
  return s;
}

/// Conjugate gradients, used as an independent oracle against the direct
/// factorization. No preconditioner; fine for the small test systems.
inline Eigen::VectorXd cg_solve(const SpMat& A, const Eigen::VectorXd& b,
                                double tol = 1e-12, int max_iter = 20000) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd r = b, p = b;
  double rr = r.squaredNorm();
  const double stop = tol * tol * b.squaredNorm();
  for (int k = 0; k < max_iter && rr > stop; ++k) {
    const Eigen::VectorXd Ap = A * p;
    const double a = rr / p.dot(Ap);
    x += a * p;
    r -= a * Ap;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return x;
}

/// Integral of f over one triangle by recursive subdivision with the 7-point
/// rule; oracle-grade quadrature for smooth integrands.
inline double integrate_triangle(const Vec2& a, const Vec2& b, const Vec2& c,
                                 const std::function<double(const Vec2&)>& f,
                                 int depth) {
  if (depth == 0) {
    const double area =
        0.5 * std::abs((b.x() - a.x()) * (c.y() - a.y()) -
                       (c.x() - a.x()) * (b.y() - a.y()));
    double sum = 0.0;
    for (int q = 0; q < SevenPointRule::num_points; ++q) {
      const double* l = SevenPointRule::bary[q];
      sum += SevenPointRule::weight[q] * f(l[0] * a + l[1] * b + l[2] * c);
    }
    return area * sum;
  }
  const Vec2 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  return integrate_triangle(a, ab, ca, f, depth - 1) +
         integrate_triangle(ab, b, bc, f, depth - 1) +
         integrate_triangle(ca, bc, c, f, depth - 1) +
         integrate_triangle(ab, bc, ca, f, depth - 1);
}

inline double integrate_mesh(const Mesh& mesh,
                             const std::function<double(const Vec2&)>& f, int depth) {
  double sum = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t)
    sum += integrate_triangle(mesh.vertex(mesh.triangles(t, 0)),
                              mesh.vertex(mesh.triangles(t, 1)),
                              mesh.vertex(mesh.triangles(t, 2)), f, depth);
  return sum;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

}  // namespace lsopt::test
