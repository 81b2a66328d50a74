#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "lsopt/state.hpp"

using namespace lsopt;
using lsopt::test::disk_scenario;

TEST_CASE("zero source gives the zero state") {
  auto s = disk_scenario(12);
  s.problem.source = [](const Vec2&) { return 0.0; };
  const StateField y = solve_state(s.mesh, s.problem);
  CHECK(y.y.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(y.newton_iterations == 0);  // beta(0.5) = 0, residual of 0 is 0
}

TEST_CASE("boundary dofs are exactly zero") {
  auto s = disk_scenario(16);
  const StateField y = solve_state(s.mesh, s.problem);
  for (int v = 0; v < s.mesh.num_vertices(); ++v)
    if (s.mesh.on_boundary[v]) CHECK(y.y[v] == 0.0);
  CHECK(y.residual <= 1e-10);
}

TEST_CASE("penalization drives the state to zero outside the domain") {
  auto s = disk_scenario(48);
  const StateField y = solve_state(s.mesh, s.problem);
  double outside_max = 0.0;
  for (int v = 0; v < s.mesh.num_vertices(); ++v)
    if (s.problem.level[v] > s.problem.reg.eta)
      outside_max = std::max(outside_max, std::abs(y.y[v]));
  CHECK(outside_max <= 0.05);
}

TEST_CASE("solution does not depend on the Newton initial guess") {
  auto s = disk_scenario(24);
  const StateField cold = solve_state(s.mesh, s.problem);
  Eigen::VectorXd warm_start = cold.y;
  warm_start *= 0.7;  // something plausible but different
  const StateField warm = solve_state(s.mesh, s.problem, {}, &warm_start);
  CHECK((cold.y - warm.y).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("monotone penalization under eps refinement") {
  auto outside_max = [](double eps) {
    RegParams reg;
    reg.eps = eps;
    reg.eps2 = 0.02;  // keeps eps2 > eps across the whole sweep
    auto s = disk_scenario(32, 0.0, reg);
    const StateField y = solve_state(s.mesh, s.problem);
    double m = 0.0;
    for (int v = 0; v < s.mesh.num_vertices(); ++v)
      if (s.problem.level[v] > reg.eta) m = std::max(m, std::abs(y.y[v]));
    return m;
  };
  const double m2 = outside_max(1e-2);
  const double m3 = outside_max(1e-3);
  const double m4 = outside_max(1e-4);
  CHECK(m3 <= m2 + 1e-6);
  CHECK(m4 <= m3 + 1e-6);
}

TEST_CASE("obstacle respected up to the regularization scale") {
  // a stiff obstacle slope keeps the penetration within the smoothing width
  RegParams reg;
  reg.eps2 = 2e-4;
  auto s = disk_scenario(48, 0.0, reg);
  const StateField y = solve_state(s.mesh, s.problem);
  const double min_slack = (y.y - s.problem.obstacle).minCoeff();
  CHECK(min_slack >= -reg.eta - 0.01);
  CHECK(y.y.minCoeff() == doctest::Approx(-0.5).epsilon(0.1));
}

TEST_CASE("state validation rejects bad data") {
  auto s = disk_scenario(8);
  ProblemData bad = s.problem;
  bad.obstacle = Eigen::VectorXd::Constant(s.mesh.num_vertices(), 0.5);
  CHECK_THROWS(solve_state(s.mesh, bad));

  bad = s.problem;
  bad.level.resize(3);
  CHECK_THROWS(solve_state(s.mesh, bad));
}

TEST_CASE("normal derivative: affine reproduction and errors") {
  const Mesh m = generate_structured(10);
  Eigen::VectorXd y(m.num_vertices()), g(m.num_vertices());
  for (int v = 0; v < m.num_vertices(); ++v) {
    y[v] = m.vertices(v, 0);
    g[v] = m.vertices(v, 0) - 0.5;
  }
  CHECK(normal_derivative_at(m, y, g, Vec2(0.3, 0.7)) == doctest::Approx(1.0));
  CHECK(normal_derivative_at(m, y, g, Vec2(0.55, 0.15)) == doctest::Approx(1.0));

  const Eigen::VectorXd c = Eigen::VectorXd::Constant(m.num_vertices(), 2.0);
  CHECK(normal_derivative_at(m, c, g, Vec2(0.3, 0.7)) == doctest::Approx(0.0));

  // degenerate level gradient must error, not return zero
  CHECK_THROWS(normal_derivative_at(m, y, c, Vec2(0.3, 0.7)));
}

TEST_CASE("linearized operator is symmetric and positive definite") {
  auto s = disk_scenario(16);
  const StateField y = solve_state(s.mesh, s.problem);
  const SpMat A = linearized_operator(s.mesh, y.y, s.problem.level,
                                      s.problem.obstacle, s.problem.reg);
  const SpMat D = SpMat(A.transpose()) - A;
  CHECK(Eigen::Map<const Eigen::VectorXd>(D.valuePtr(), D.nonZeros())
            .cwiseAbs()
            .maxCoeff() <= 1e-14);
  const DofMap dofs = interior_dofs(s.mesh);
  const Factorization fact(restrict_interior(A, dofs));
  CHECK(fact.used_cholesky());
}
