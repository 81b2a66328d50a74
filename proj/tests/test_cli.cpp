#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "lsopt/expr.hpp"
#include "lsopt/runio.hpp"

using namespace lsopt;
namespace fs = std::filesystem;

namespace {

std::string small_config(const std::string& out_dir, int nx = 24,
                         const std::string& extra = "") {
  std::ostringstream os;
  os << R"({
  "mesh": {"nx": )" << nx << R"(},
  "params": {"eps": 1e-4, "eta": 0.05, "eps2": 0.01, "eps1": 0.05, "C": 2.0, "tol": 1e-6},
  "obstacle": -0.5,
  "source": -100,
  "initial_level": {"disk": {"center": [0.5, 0.5], "radius": 0.25}},
  "observation": {"points": [[0.25, 0.5]], "alphas": 0.0},
  "i0_mode": "ball",
  "direction": "full_gradient",
  "descent": {"max_iter": 20})" << extra
     << R"(,
  "output_dir": ")" << out_dir << R"("
})";
  return os.str();
}

std::string write_config(const std::string& text, const std::string& name) {
  const std::string path = (fs::temp_directory_path() / name).string();
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("expression evaluator") {
  auto f = compile_expression("(x-0.5)^2 + (y-0.5)^2 - 0.0625");
  CHECK(f(Vec2(0.25, 0.5)) == doctest::Approx(0.0));
  CHECK(compile_expression("-100")(Vec2(0, 0)) == -100.0);
  CHECK(compile_expression("sin(pi*x)*sin(pi*y)")(Vec2(0.5, 0.5)) ==
        doctest::Approx(1.0));
  CHECK(compile_expression("2*x + 3/y")(Vec2(2, 3)) == doctest::Approx(5.0));
  CHECK_THROWS(compile_expression("2*"));
  CHECK_THROWS(compile_expression("foo(x)"));
  CHECK_THROWS(compile_expression("x + + "));
}

TEST_CASE("config validation errors") {
  // eta <= eps violates the regularization ordering
  const std::string bad = R"({
    "mesh": {"nx": 8},
    "params": {"eps": 0.1, "eta": 0.05},
    "obstacle": -0.5, "source": -100,
    "initial_level": {"disk": {"center": [0.5, 0.5], "radius": 0.25}},
    "observation": {"points": [[0.25, 0.5]]}
  })";
  const std::string path = write_config(bad, "lsopt_bad_eta.json");
  CHECK_THROWS_WITH_AS(load_run_setup(path),
                       doctest::Contains("eta > eps"), std::runtime_error);
  std::remove(path.c_str());

  const std::string missing_mesh = R"({
    "mesh": {"file": "/nonexistent/mesh.txt"},
    "obstacle": -0.5, "source": -100,
    "initial_level": {"disk": {"center": [0.5, 0.5], "radius": 0.25}},
    "observation": {"points": [[0.25, 0.5]]}
  })";
  const std::string path2 = write_config(missing_mesh, "lsopt_bad_mesh.json");
  CHECK_THROWS(load_run_setup(path2));
  std::remove(path2.c_str());

  const std::string path3 = write_config("{ not json", "lsopt_bad_json.json");
  CHECK_THROWS(load_run_setup(path3));
  std::remove(path3.c_str());
}

TEST_CASE("run scenario: artifacts, determinism, report fidelity") {
  const std::string out = (fs::temp_directory_path() / "lsopt_cli_run").string();
  fs::remove_all(out);
  const std::string path = write_config(small_config(out), "lsopt_run.json");
  const RunSetup setup = load_run_setup(path);
  const RunHistory hist = run_scenario(setup);

  CHECK(fs::exists(fs::path(out) / "history.csv"));
  CHECK(fs::exists(fs::path(out) / "final_state.vtk"));
  CHECK(fs::exists(fs::path(out) / "final_level.vtk"));
  CHECK(fs::exists(fs::path(out) / "report.json"));
  for (size_t k = 0; k < hist.records.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "contour_%03zu.csv", k);
    CHECK(fs::exists(fs::path(out) / name));
  }

  // history strictly decreasing
  for (size_t k = 1; k < hist.records.size(); ++k)
    CHECK(hist.records[k].cost < hist.records[k - 1].cost);

  // report values equal the in-memory values to full precision
  nlohmann::json rep;
  std::ifstream(fs::path(out) / "report.json") >> rep;
  CHECK(rep["final_cost"].get<double>() == hist.records.back().cost);
  CHECK(rep["initial_cost"].get<double>() == hist.records.front().cost);
  CHECK(rep["iterations"].get<int>() == hist.iterations);

  // reruns are byte-identical on every CSV
  const std::string history_a = slurp(fs::path(out) / "history.csv");
  const std::string contour_a = slurp(fs::path(out) / "contour_000.csv");
  run_scenario(setup);
  CHECK(slurp(fs::path(out) / "history.csv") == history_a);
  CHECK(slurp(fs::path(out) / "contour_000.csv") == contour_a);

  std::remove(path.c_str());
  fs::remove_all(out);
}

TEST_CASE("check_gradient: agreement, bad delta, frozen index skipped") {
  const std::string out = (fs::temp_directory_path() / "lsopt_cli_grad").string();
  const std::string path = write_config(small_config(out, 30), "lsopt_grad.json");
  const RunSetup setup = load_run_setup(path);

  const GradCheckReport rep = check_gradient(setup, 20, 1e-5);
  CHECK(rep.rows.size() == 20);
  CHECK(rep.max_rel_err <= 1e-3);

  CHECK_THROWS(check_gradient(setup, 20, 0.0));

  const std::vector<int> I0 =
      select_I0(setup.mesh, setup.obs, setup.descent.i0_mode, setup.problem.reg.C);
  const GradCheckReport skipped = check_gradient(setup, 0, 1e-5, {I0.front()});
  REQUIRE(skipped.rows.size() == 1);
  CHECK(skipped.rows[0].skipped);

  std::remove(path.c_str());
}

TEST_CASE("trace scenario: circle period, observation emission, non-closing error") {
  const std::string out = (fs::temp_directory_path() / "lsopt_cli_trace").string();
  fs::remove_all(out);
  const std::string path = write_config(
      small_config(out, 16, R"(, "trace": {"dt": 1e-4, "l": 4})"), "lsopt_trace.json");
  const RunSetup setup = load_run_setup(path);
  const TraceArtifacts art = trace_scenario(setup);

  CHECK(std::abs(art.trace.period - std::numbers::pi) <= 1e-6);
  CHECK(fs::exists(fs::path(out) / "trajectory.csv"));
  CHECK(fs::exists(fs::path(out) / "observations.csv"));
  REQUIRE(art.observations.size() == 4);
  const auto direct = observation_points(art.trace, 4);
  for (int k = 0; k < 4; ++k) CHECK((art.observations[k] - direct[k]).norm() == 0.0);

  // a level function whose orbit runs into the boundary
  const std::string bad = R"({
    "mesh": {"nx": 16},
    "obstacle": -0.5, "source": -100,
    "initial_level": {"expression": "x - 0.25"},
    "observation": {"points": [[0.25, 0.5]]},
    "trace": {"dt": 1e-3},
    "output_dir": ")" + out + R"("
  })";
  const std::string path2 = write_config(bad, "lsopt_trace_bad.json");
  const RunSetup setup2 = load_run_setup(path2);
  CHECK_THROWS(trace_scenario(setup2));

  std::remove(path.c_str());
  std::remove(path2.c_str());
  fs::remove_all(out);
}

TEST_CASE("state-only scenario writes the field and the extrema") {
  const std::string out = (fs::temp_directory_path() / "lsopt_cli_state").string();
  fs::remove_all(out);
  const std::string path = write_config(small_config(out, 24), "lsopt_state.json");
  const StateField y = state_only_scenario(load_run_setup(path));
  CHECK(fs::exists(fs::path(out) / "final_state.vtk"));
  CHECK(fs::exists(fs::path(out) / "report.json"));
  CHECK(y.y.minCoeff() < -0.4);
  CHECK(y.y.maxCoeff() <= 1e-12);
  std::remove(path.c_str());
  fs::remove_all(out);
}

TEST_CASE("environment variable overrides the output directory") {
  const std::string out = (fs::temp_directory_path() / "lsopt_cli_env_a").string();
  const std::string override_dir = (fs::temp_directory_path() / "lsopt_cli_env_b").string();
  const std::string path = write_config(small_config(out, 12), "lsopt_env.json");
  setenv("LSOPT_OUTPUT_DIR", override_dir.c_str(), 1);
  const RunSetup setup = load_run_setup(path);
  unsetenv("LSOPT_OUTPUT_DIR");
  CHECK(setup.output_dir == override_dir);
  std::remove(path.c_str());
}

TEST_CASE("bundled configs parse and carry the advertised settings") {
  const fs::path dir(LSOPT_CONFIGS_DIR);
  for (const char* name : {"test1a.json", "test1b.json", "test1c.json",
                           "test1d.json", "test2.json", "trace_circle.json"}) {
    const RunSetup setup = load_run_setup((dir / name).string());
    CHECK(setup.problem.reg.eps == 1e-4);
    CHECK(setup.problem.reg.eta == 0.05);
    CHECK(setup.problem.reg.eps2 == 0.01);
    for (const Vec2& p : setup.obs.points)
      CHECK(std::abs(p1_interpolate(setup.mesh, setup.problem.level,
                                    locate_point(setup.mesh, p))) <= 1e-12);
  }
  const RunSetup t2 = load_run_setup((dir / "test2.json").string());
  CHECK(t2.obs.points.size() == 3);
  CHECK(t2.problem.reg.C == 3.0);
  const RunSetup t1d = load_run_setup((dir / "test1d.json").string());
  CHECK(t1d.descent.direction == DirectionMode::simplified_yp);
  const RunSetup t1b = load_run_setup((dir / "test1b.json").string());
  CHECK(t1b.descent.i0_mode == I0Mode::containing_triangle);
}

TEST_CASE("gradient CSV export") {
  auto s = lsopt::test::disk_scenario(16);
  const StateField y = solve_state(s.mesh, s.problem);
  const auto I0 = select_I0(s.mesh, s.obs, I0Mode::ball, 2.0);
  const GradientReport rep = grad_cost_streamed(s.mesh, y, s.problem.level,
                                                s.problem.obstacle, s.problem.reg,
                                                s.obs, I0);
  const std::string path = (fs::temp_directory_path() / "lsopt_grad.csv").string();
  write_gradient_csv(rep, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "index,partial");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == static_cast<int>(rep.free_indices.size()));
  std::remove(path.c_str());
}

TEST_CASE("pin_level_at zeroes the interpolant without moving the geometry") {
  const Mesh m = generate_structured(150);
  Eigen::VectorXd g = interpolate_nodal(m, disk_level(Vec2(0.5, 0.5), 0.25).value);
  const std::vector<Vec2> pts{Vec2(0.25, 0.5)};
  const double before = std::abs(p1_interpolate(m, g, locate_point(m, pts[0])));
  CHECK(before > 1e-6);  // x0 is not a vertex of the structured mesh
  const Eigen::VectorXd raw = g;
  pin_level_at(m, g, pts);
  CHECK(std::abs(p1_interpolate(m, g, locate_point(m, pts[0]))) <= 1e-12);
  CHECK((g - raw).lpNorm<Eigen::Infinity>() <= 2.0 * before);
}
