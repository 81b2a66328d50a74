#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "lsopt/sensitivity.hpp"

using namespace lsopt;
using lsopt::test::disk_scenario;

namespace {

std::vector<int> free_indices(const Mesh& mesh, const std::vector<int>& I0) {
  std::vector<int> free;
  for (int i = 0; i < mesh.num_vertices(); ++i)
    if (!std::binary_search(I0.begin(), I0.end(), i)) free.push_back(i);
  return free;
}

}  // namespace

TEST_CASE("select_I0: triangle mode gives 3 vertices, ball mode respects C*h") {
  auto s = disk_scenario(30);
  const auto tri = select_I0(s.mesh, s.obs, I0Mode::containing_triangle, 2.0);
  CHECK(tri.size() == 3);

  const auto ball = select_I0(s.mesh, s.obs, I0Mode::ball, 2.0);
  for (int i : ball) CHECK((s.mesh.vertex(i) - s.obs.points[0]).norm() < 2.0 * s.mesh.h);
  for (int i : tri) CHECK(std::binary_search(ball.begin(), ball.end(), i));

  // every free hat vanishes at the observation point in ball mode
  const PointLocation loc = locate_point(s.mesh, s.obs.points[0]);
  for (int k = 0; k < 3; ++k) {
    const int v = s.mesh.triangles(loc.triangle, k);
    CHECK(std::binary_search(ball.begin(), ball.end(), v));
  }
}

TEST_CASE("sensitivity fields: zero forcing away from the band, FD oracle") {
  auto s = disk_scenario(20);
  const StateField y = solve_state(s.mesh, s.problem);
  const SensitivitySystem system(s.mesh, y, s.problem.level, s.problem.obstacle,
                                 s.problem.reg);

  // an index far outside the smoothing band: H'_eta(g) = 0 on its support
  int far = -1;
  double closest = 1e300;
  for (int v = 0; v < s.mesh.num_vertices(); ++v) {
    const double dist = (s.mesh.vertex(v) - Vec2(0.1, 0.1)).norm();
    if (!s.mesh.on_boundary[v] && dist < closest) {
      closest = dist;
      far = v;
    }
  }
  REQUIRE(far >= 0);
  CHECK(system.rhs_vanishes(far));
  CHECK(system.basis_rhs(far).lpNorm<Eigen::Infinity>() == 0.0);

  // central-difference oracle on the strongest-forcing band index
  const auto I0 = select_I0(s.mesh, s.obs, I0Mode::ball, 2.0);
  int band = -1;
  double strongest = 0.0;
  for (int v : free_indices(s.mesh, I0)) {
    if (system.rhs_vanishes(v) || s.mesh.on_boundary[v]) continue;
    const double f = system.basis_rhs(v).lpNorm<Eigen::Infinity>();
    if (f > strongest) {
      strongest = f;
      band = v;
    }
  }
  REQUIRE(band >= 0);
  const Eigen::VectorXd u = system.solve(system.basis_rhs(band));

  const double delta = 1e-6;
  auto state_with = [&](double shift) {
    ProblemData p = s.problem;
    p.level[band] += shift;
    return solve_state(s.mesh, p, {}, &y.y).y;
  };
  const Eigen::VectorXd fd = (state_with(delta) - state_with(-delta)) / (2.0 * delta);
  CHECK((u - fd).lpNorm<Eigen::Infinity>() <= 1e-3 * fd.lpNorm<Eigen::Infinity>());
}

TEST_CASE("solve_sensitivities matches one-off solves through the shared factorization") {
  auto s = disk_scenario(16);
  const StateField y = solve_state(s.mesh, s.problem);
  const auto I0 = select_I0(s.mesh, s.obs, I0Mode::ball, 2.0);
  const SensitivitySystem system(s.mesh, y, s.problem.level, s.problem.obstacle,
                                 s.problem.reg);

  std::vector<int> some;
  for (int v : free_indices(s.mesh, I0))
    if (!system.rhs_vanishes(v)) some.push_back(v);
  REQUIRE(some.size() >= 2);
  some.resize(2);

  const auto batch = solve_sensitivities(s.mesh, y, s.problem.level, s.problem.obstacle,
                                         s.problem.reg, some);
  for (int i : some) {
    const Eigen::VectorXd lone = system.solve(system.basis_rhs(i));
    CHECK((batch.at(i) - lone).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("eval_cost: zero at matched targets, degenerate gradient rejected") {
  auto s = disk_scenario(20);
  const StateField y = solve_state(s.mesh, s.problem);
  const double dyn = normal_derivative_at(s.mesh, y.y, s.problem.level, s.obs.points[0]);

  ObservationSpec matched = s.obs;
  matched.alphas[0] = dyn;
  CHECK(eval_cost(s.mesh, y.y, s.problem.level, matched) == 0.0);

  CHECK(eval_cost(s.mesh, y.y, s.problem.level, s.obs) ==
        doctest::Approx(dyn * dyn).epsilon(1e-14));

  const Eigen::VectorXd flat = Eigen::VectorXd::Ones(s.mesh.num_vertices());
  CHECK_THROWS(eval_cost(s.mesh, y.y, flat, s.obs));
}

TEST_CASE("gradient: phi terms vanish in ball mode, zero residual kills everything") {
  auto s = disk_scenario(24);
  const StateField y = solve_state(s.mesh, s.problem);
  const auto I0 = select_I0(s.mesh, s.obs, I0Mode::ball, 2.0);
  const GradientReport rep = grad_cost_streamed(s.mesh, y, s.problem.level,
                                                s.problem.obstacle, s.problem.reg,
                                                s.obs, I0);
  // dJ_i reduces to 2 (dy/dn - alpha) du_i/dn: verify on a few indices
  const SensitivitySystem system(s.mesh, y, s.problem.level, s.problem.obstacle,
                                 s.problem.reg);
  const PointLocation loc = locate_point(s.mesh, s.obs.points[0]);
  const Vec2 gg = p1_gradient(s.mesh, s.problem.level, loc.triangle);
  const Vec2 normal = gg / gg.norm();
  const double residual =
      p1_gradient(s.mesh, y.y, loc.triangle).dot(normal) - s.obs.alphas[0];
  int checked = 0;
  for (size_t r = 0; r < rep.free_indices.size() && checked < 5; r += 97) {
    const int i = rep.free_indices[r];
    const Eigen::VectorXd u = system.rhs_vanishes(i)
                                  ? Eigen::VectorXd::Zero(s.mesh.num_vertices())
                                  : system.solve(system.basis_rhs(i));
    const double dun = p1_gradient(s.mesh, u, loc.triangle).dot(normal);
    CHECK(rep.partials[static_cast<Eigen::Index>(r)] ==
          doctest::Approx(2.0 * residual * dun).epsilon(1e-12));
    ++checked;
  }

  // alpha equal to the attained derivative: the whole gradient is zero
  ObservationSpec matched = s.obs;
  matched.alphas[0] = p1_gradient(s.mesh, y.y, loc.triangle).dot(normal);
  const GradientReport zero = grad_cost_streamed(s.mesh, y, s.problem.level,
                                                 s.problem.obstacle, s.problem.reg,
                                                 matched, I0);
  CHECK(zero.norm == 0.0);
}

TEST_CASE("map-based grad_cost agrees with the streamed variant") {
  auto s = disk_scenario(16);
  const StateField y = solve_state(s.mesh, s.problem);
  const auto I0 = select_I0(s.mesh, s.obs, I0Mode::ball, 2.0);
  const auto free = free_indices(s.mesh, I0);
  const auto sensitivities = solve_sensitivities(
      s.mesh, y, s.problem.level, s.problem.obstacle, s.problem.reg, free);
  const GradientReport a = grad_cost(s.mesh, y.y, s.problem.level, s.problem.reg,
                                     s.obs, I0, sensitivities);
  const GradientReport b = grad_cost_streamed(s.mesh, y, s.problem.level,
                                              s.problem.obstacle, s.problem.reg,
                                              s.obs, I0);
  REQUIRE(a.free_indices == b.free_indices);
  CHECK((a.partials - b.partials).lpNorm<Eigen::Infinity>() <=
        1e-12 * std::max(1.0, b.partials.lpNorm<Eigen::Infinity>()));

  // frozen indices must be rejected
  std::map<int, Eigen::VectorXd> with_frozen = sensitivities;
  with_frozen[I0.front()] = Eigen::VectorXd::Zero(s.mesh.num_vertices());
  CHECK_THROWS(grad_cost(s.mesh, y.y, s.problem.level, s.problem.reg, s.obs, I0,
                         with_frozen));
}

TEST_CASE("gradient matches central differences of the reduced cost") {
  auto s = disk_scenario(20);
  const StateField y = solve_state(s.mesh, s.problem);
  const auto I0 = select_I0(s.mesh, s.obs, I0Mode::ball, 2.0);
  const GradientReport rep = grad_cost_streamed(s.mesh, y, s.problem.level,
                                                s.problem.obstacle, s.problem.reg,
                                                s.obs, I0);
  const double gmax = rep.partials.lpNorm<Eigen::Infinity>();
  REQUIRE(gmax > 0.0);

  // sample across magnitudes: the largest entry, a mid entry, a zero entry
  std::vector<int> picks;
  int arg_max = 0;
  for (int r = 0; r < rep.partials.size(); ++r)
    if (std::abs(rep.partials[r]) > std::abs(rep.partials[arg_max])) arg_max = r;
  picks.push_back(rep.free_indices[arg_max]);
  for (int r = 0; r < rep.partials.size(); ++r)
    if (std::abs(rep.partials[r]) > 1e-3 * gmax &&
        std::abs(rep.partials[r]) < 0.1 * gmax) {
      picks.push_back(rep.free_indices[r]);
      break;
    }
  picks.push_back(rep.free_indices[0]);

  const double delta = 1e-5;
  for (int i : picks) {
    auto cost_with = [&](double shift) {
      ProblemData p = s.problem;
      p.level[i] += shift;
      const StateField st = solve_state(s.mesh, p, {}, &y.y);
      return eval_cost(s.mesh, st.y, p.level, s.obs);
    };
    const double fd = (cost_with(delta) - cost_with(-delta)) / (2.0 * delta);
    const double an = rep.partial(i);
    CHECK(std::abs(an - fd) <= 1e-3 * std::max({std::abs(an), std::abs(fd), 1e-6 * gmax}));
  }
}

TEST_CASE("multi-point gradient is the sum of the single-point gradients") {
  auto s = disk_scenario(24);
  ObservationSpec multi;
  multi.points = {Vec2(0.25, 0.5), Vec2(0.5 + 0.25 * std::cos(2.0 * std::numbers::pi / 3.0),
                                        0.5 + 0.25 * std::sin(2.0 * std::numbers::pi / 3.0))};
  multi.alphas = Eigen::VectorXd::Zero(2);
  pin_level_at(s.mesh, s.problem.level, multi.points);

  const StateField y = solve_state(s.mesh, s.problem);
  const auto I0 = select_I0(s.mesh, multi, I0Mode::ball, 2.0);
  const GradientReport both = grad_cost_streamed(s.mesh, y, s.problem.level,
                                                 s.problem.obstacle, s.problem.reg,
                                                 multi, I0);

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(both.partials.size());
  for (int j = 0; j < 2; ++j) {
    ObservationSpec one;
    one.points = {multi.points[j]};
    one.alphas = Eigen::VectorXd::Zero(1);
    const GradientReport rep = grad_cost_streamed(s.mesh, y, s.problem.level,
                                                  s.problem.obstacle, s.problem.reg,
                                                  one, I0);
    REQUIRE(rep.free_indices == both.free_indices);
    sum += rep.partials;
  }
  CHECK((both.partials - sum).lpNorm<Eigen::Infinity>() <= 1e-12);
}
