#include "lsopt/runio.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

#include <json.hpp>

#include "lsopt/expr.hpp"

namespace lsopt {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config: parse error in " + path + ": " + e.what());
  }
  return j;
}

double require_number(const json& j, const std::string& key, double fallback,
                      bool has_fallback) {
  if (!j.contains(key)) {
    if (has_fallback) return fallback;
    throw std::runtime_error("config: missing field '" + key + "'");
  }
  if (!j[key].is_number())
    throw std::runtime_error("config: field '" + key + "' must be a number");
  return j[key].get<double>();
}

std::function<double(const Vec2&)> scalar_or_expression(const json& j,
                                                        const std::string& key) {
  const json& v = j.at(key);
  if (v.is_number()) {
    const double c = v.get<double>();
    return [c](const Vec2&) { return c; };
  }
  if (v.is_string()) {
    try {
      return compile_expression(v.get<std::string>());
    } catch (const std::exception& e) {
      throw std::runtime_error("config: field '" + key + "': " + e.what());
    }
  }
  throw std::runtime_error("config: field '" + key +
                           "' must be a number or an expression string");
}

Vec2 parse_vec2(const json& v, const std::string& what) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw std::runtime_error("config: " + what + " must be [x, y]");
  return Vec2(v[0].get<double>(), v[1].get<double>());
}

}  // namespace

Eigen::VectorXd interpolate_nodal(const Mesh& mesh,
                                  const std::function<double(const Vec2&)>& f) {
  Eigen::VectorXd out(mesh.num_vertices());
  for (int v = 0; v < mesh.num_vertices(); ++v) out[v] = f(mesh.vertex(v));
  return out;
}

void pin_level_at(const Mesh& mesh, Eigen::VectorXd& g, std::span<const Vec2> points) {
  for (int sweep = 0; sweep < 5; ++sweep) {
    double worst = 0.0;
    for (const Vec2& p : points) {
      const PointLocation loc = locate_point(mesh, p);
      const double v = p1_interpolate(mesh, g, loc);
      worst = std::max(worst, std::abs(v));
      if (v == 0.0) continue;
      for (int k = 0; k < 3; ++k) g[mesh.triangles(loc.triangle, k)] -= v;
    }
    if (worst <= 1e-13) return;
  }
  // verify the final state
  for (const Vec2& p : points) {
    const double v = p1_interpolate(mesh, g, locate_point(mesh, p));
    if (std::abs(v) > 1e-12)
      throw std::runtime_error("pin_level_at: could not pin the level to zero");
  }
}

RunSetup load_run_setup(const std::string& config_path) {
  const json j = load_json(config_path);
  RunSetup setup;

  // mesh
  if (!j.contains("mesh")) throw std::runtime_error("config: missing field 'mesh'");
  const json& jm = j["mesh"];
  if (jm.contains("nx")) {
    Rect rect;
    if (j.contains("rect")) {
      const json& r = j["rect"];
      if (!r.is_array() || r.size() != 4)
        throw std::runtime_error("config: 'rect' must be [x0, y0, x1, y1]");
      rect.lo = Vec2(r[0].get<double>(), r[1].get<double>());
      rect.hi = Vec2(r[2].get<double>(), r[3].get<double>());
    }
    setup.mesh = generate_structured(jm["nx"].get<int>(), rect);
  } else if (jm.contains("file")) {
    setup.mesh = load_mesh(jm["file"].get<std::string>());
  } else {
    throw std::runtime_error("config: 'mesh' needs 'nx' or 'file'");
  }

  // regularization parameters
  RegParams reg;
  if (j.contains("params")) {
    const json& p = j["params"];
    reg.eps = require_number(p, "eps", reg.eps, true);
    reg.eta = require_number(p, "eta", reg.eta, true);
    reg.eps2 = require_number(p, "eps2", reg.eps2, true);
    reg.eps1 = require_number(p, "eps1", reg.eps1, true);
    reg.C = require_number(p, "C", reg.C, true);
    reg.tol = require_number(p, "tol", reg.tol, true);
  }
  try {
    reg.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("config: params: ") + e.what());
  }
  setup.problem.reg = reg;

  // obstacle and source
  if (!j.contains("obstacle")) throw std::runtime_error("config: missing field 'obstacle'");
  if (!j.contains("source")) throw std::runtime_error("config: missing field 'source'");
  setup.problem.obstacle =
      interpolate_nodal(setup.mesh, scalar_or_expression(j, "obstacle"));
  setup.problem.source = scalar_or_expression(j, "source");

  // observation points
  if (!j.contains("observation"))
    throw std::runtime_error("config: missing field 'observation'");
  {
    const json& o = j["observation"];
    if (!o.contains("points") || !o["points"].is_array() || o["points"].empty())
      throw std::runtime_error("config: 'observation.points' must be a non-empty array");
    for (const auto& p : o["points"])
      setup.obs.points.push_back(parse_vec2(p, "observation point"));
    const size_t l = setup.obs.points.size();
    setup.obs.alphas = Eigen::VectorXd::Zero(l);
    if (o.contains("alphas")) {
      const json& a = o["alphas"];
      if (a.is_number())
        setup.obs.alphas.setConstant(a.get<double>());
      else if (a.is_array() && a.size() == l)
        for (size_t i = 0; i < l; ++i) setup.obs.alphas[i] = a[i].get<double>();
      else
        throw std::runtime_error("config: 'observation.alphas' must be a number or an "
                                 "array matching the points");
    }
    setup.obs.validate(setup.mesh.domain);
  }

  // initial level function
  if (!j.contains("initial_level"))
    throw std::runtime_error("config: missing field 'initial_level'");
  {
    const json& lv = j["initial_level"];
    if (lv.contains("disk")) {
      const Vec2 center = parse_vec2(lv["disk"].at("center"), "disk center");
      const double radius = lv["disk"].at("radius").get<double>();
      if (radius <= 0.0) throw std::runtime_error("config: disk radius must be > 0");
      setup.analytic_level = disk_level(center, radius);
      setup.problem.level = interpolate_nodal(setup.mesh, setup.analytic_level->value);
    } else if (lv.contains("expression")) {
      setup.problem.level = interpolate_nodal(
          setup.mesh, compile_expression(lv["expression"].get<std::string>()));
    } else if (lv.contains("file")) {
      std::ifstream in(lv["file"].get<std::string>());
      if (!in)
        throw std::runtime_error("config: cannot open initial level file " +
                                 lv["file"].get<std::string>());
      setup.problem.level.resize(setup.mesh.num_vertices());
      for (int v = 0; v < setup.mesh.num_vertices(); ++v)
        if (!(in >> setup.problem.level[v]))
          throw std::runtime_error("config: initial level file too short");
    } else {
      throw std::runtime_error("config: 'initial_level' needs 'disk', 'expression' or 'file'");
    }
    pin_level_at(setup.mesh, setup.problem.level, setup.obs.points);
  }

  // descent settings
  setup.descent.tol = reg.tol;
  if (j.contains("descent")) {
    const json& d = j["descent"];
    setup.descent.tol = require_number(d, "tol", setup.descent.tol, true);
    setup.descent.max_iter =
        static_cast<int>(require_number(d, "max_iter", setup.descent.max_iter, true));
    setup.descent.line_search_budget = static_cast<int>(require_number(
        d, "line_search_budget", setup.descent.line_search_budget, true));
    setup.descent.bracket_growth =
        require_number(d, "bracket_growth", setup.descent.bracket_growth, true);
  }
  if (j.contains("i0_mode")) {
    const std::string m = j["i0_mode"].get<std::string>();
    if (m == "ball")
      setup.descent.i0_mode = I0Mode::ball;
    else if (m == "triangle")
      setup.descent.i0_mode = I0Mode::containing_triangle;
    else
      throw std::runtime_error("config: 'i0_mode' must be \"ball\" or \"triangle\"");
  }
  if (j.contains("direction")) {
    const std::string m = j["direction"].get<std::string>();
    if (m == "full_gradient")
      setup.descent.direction = DirectionMode::full_gradient;
    else if (m == "simplified_yp")
      setup.descent.direction = DirectionMode::simplified_yp;
    else
      throw std::runtime_error(
          "config: 'direction' must be \"full_gradient\" or \"simplified_yp\"");
  }

  // tracing settings
  if (j.contains("trace")) {
    const json& t = j["trace"];
    setup.trace.dt = require_number(t, "dt", setup.trace.dt, true);
    setup.trace.l = static_cast<int>(require_number(t, "l", 0.0, true));
    setup.trace.trace_tol = require_number(t, "tol", setup.trace.trace_tol, true);
    if (t.contains("x0")) setup.trace.x0 = parse_vec2(t["x0"], "trace.x0");
    if (t.contains("window")) {
      const json& w = t["window"];
      if (!w.is_array() || w.size() != 2)
        throw std::runtime_error("config: 'trace.window' must be [l1, l2]");
      setup.trace.window = {w[0].get<int>(), w[1].get<int>()};
    }
  }

  if (j.contains("output_dir")) setup.output_dir = j["output_dir"].get<std::string>();
  if (const char* env = std::getenv("LSOPT_OUTPUT_DIR")) setup.output_dir = env;

  setup.problem.validate(setup.mesh);
  return setup;
}

void write_history_csv(const RunHistory& hist, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "iter,J,lambda,gradnorm\n";
  for (const IterationRecord& r : hist.records)
    out << r.iter << "," << fmt(r.cost) << "," << fmt(r.step) << ","
        << fmt(r.grad_norm) << "\n";
}

void write_contour_csv(const std::vector<Polyline>& polylines, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "polyline_id,t_or_index,x,y\n";
  for (size_t id = 0; id < polylines.size(); ++id)
    for (size_t k = 0; k < polylines[id].points.size(); ++k)
      out << id << "," << k << "," << fmt(polylines[id].points[k].x()) << ","
          << fmt(polylines[id].points[k].y()) << "\n";
}

void write_trajectory_csv(const TraceResult& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "t,x,y\n";
  for (size_t k = 0; k < trace.times.size(); ++k)
    out << fmt(trace.times[k]) << "," << fmt(trace.points[k].x()) << ","
        << fmt(trace.points[k].y()) << "\n";
}

void write_points_csv(const std::vector<Vec2>& points, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "index,x,y\n";
  for (size_t k = 0; k < points.size(); ++k)
    out << k << "," << fmt(points[k].x()) << "," << fmt(points[k].y()) << "\n";
}

void write_gradient_csv(const GradientReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "index,partial\n";
  for (size_t r = 0; r < report.free_indices.size(); ++r)
    out << report.free_indices[r] << ","
        << fmt(report.partials[static_cast<Eigen::Index>(r)]) << "\n";
}

void write_vtk_scalar(const Mesh& mesh, const Eigen::VectorXd& field,
                      const std::string& name, const std::string& path) {
  if (field.size() != mesh.num_vertices())
    throw std::invalid_argument("write_vtk_scalar: field has wrong length");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "# vtk DataFile Version 3.0\n" << name << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (int v = 0; v < mesh.num_vertices(); ++v)
    out << fmt(mesh.vertices(v, 0)) << " " << fmt(mesh.vertices(v, 1)) << " 0\n";
  out << "CELLS " << mesh.num_triangles() << " " << 4 * mesh.num_triangles() << "\n";
  for (int t = 0; t < mesh.num_triangles(); ++t)
    out << "3 " << mesh.triangles(t, 0) << " " << mesh.triangles(t, 1) << " "
        << mesh.triangles(t, 2) << "\n";
  out << "CELL_TYPES " << mesh.num_triangles() << "\n";
  for (int t = 0; t < mesh.num_triangles(); ++t) out << "5\n";
  out << "POINT_DATA " << mesh.num_vertices() << "\nSCALARS " << name
      << " double 1\nLOOKUP_TABLE default\n";
  for (int v = 0; v < mesh.num_vertices(); ++v) out << fmt(field[v]) << "\n";
}

namespace {

std::filesystem::path prepare_output_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

const char* stop_name(StopReason r) {
  switch (r) {
    case StopReason::converged: return "converged";
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::zero_direction: return "zero_direction";
    default: return "no_decrease";
  }
}

}  // namespace

RunHistory run_scenario(const RunSetup& setup) {
  DescentConfig config = setup.descent;
  config.record_levels = true;
  RunHistory hist = descend(setup.mesh, setup.problem, setup.obs, config);

  const auto dir = prepare_output_dir(setup.output_dir);
  write_history_csv(hist, (dir / "history.csv").string());
  write_vtk_scalar(setup.mesh, hist.final_state.y, "y", (dir / "final_state.vtk").string());
  write_vtk_scalar(setup.mesh, hist.final_level, "g", (dir / "final_level.vtk").string());
  for (size_t k = 0; k < hist.levels.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "contour_%03zu.csv", k);
    write_contour_csv(extract_contour(setup.mesh, hist.levels[k]), (dir / name).string());
  }

  json rep;
  rep["initial_cost"] = hist.records.front().cost;
  rep["final_cost"] = hist.records.back().cost;
  rep["iterations"] = hist.iterations;
  rep["stop_reason"] = stop_name(hist.stop);
  rep["newton_iterations_final"] = hist.final_state.newton_iterations;
  json normals = json::array(), dyns = json::array(), costs = json::array();
  for (const IterationRecord& r : hist.records) costs.push_back(r.cost);
  for (const Vec2& p : setup.obs.points) {
    const PointLocation loc = locate_point(setup.mesh, p);
    const Vec2 gg = p1_gradient(setup.mesh, hist.final_level, loc.triangle);
    const Vec2 n = gg / gg.norm();
    normals.push_back({n.x(), n.y()});
    dyns.push_back(normal_derivative_at(setup.mesh, hist.final_state.y,
                                        hist.final_level, p));
  }
  rep["normal_at_x0"] = normals;
  rep["dyn_at_x0"] = dyns;
  rep["cost_history"] = costs;
  std::ofstream(dir / "report.json") << rep.dump(2) << "\n";
  return hist;
}

GradCheckReport check_gradient(const RunSetup& setup, int num_indices, double delta,
                               const std::vector<int>& requested) {
  if (delta <= 0.0) throw std::invalid_argument("check_gradient: delta must be > 0");
  if (num_indices < 1 && requested.empty())
    throw std::invalid_argument("check_gradient: nothing to check");

  const Mesh& mesh = setup.mesh;
  const std::vector<int> I0 =
      select_I0(mesh, setup.obs, setup.descent.i0_mode, setup.problem.reg.C);
  const StateField state = solve_state(mesh, setup.problem);
  const GradientReport grad =
      grad_cost_streamed(mesh, state, setup.problem.level, setup.problem.obstacle,
                         setup.problem.reg, setup.obs, I0);

  GradCheckReport rep;
  rep.grad_norm_inf = grad.partials.lpNorm<Eigen::Infinity>();

  std::vector<int> picked;
  if (!requested.empty()) {
    for (int i : requested) {
      if (i < 0 || i >= mesh.num_vertices())
        throw std::invalid_argument("check_gradient: vertex index " +
                                    std::to_string(i) + " out of range [0, " +
                                    std::to_string(mesh.num_vertices()) + ")");
      if (std::binary_search(I0.begin(), I0.end(), i)) {
        std::cerr << "check_gradient: index " << i << " is frozen (I0), skipped\n";
        GradCheckRow row;
        row.index = i;
        row.skipped = true;
        rep.rows.push_back(row);
      } else {
        picked.push_back(i);
      }
    }
  } else {
    // random over the free set, with a handful drawn from the active part of
    // the gradient so the comparison is not all structural zeros
    std::mt19937 rng(20240817u);
    std::vector<int> active;
    for (size_t r = 0; r < grad.free_indices.size(); ++r)
      if (std::abs(grad.partials[static_cast<Eigen::Index>(r)]) >
          1e-6 * rep.grad_norm_inf)
        active.push_back(grad.free_indices[r]);

    const size_t want = std::min<size_t>(num_indices, grad.free_indices.size());
    const size_t want_active = std::min<size_t>({5, want, active.size()});
    std::set<int> chosen;
    if (want_active > 0) {
      std::uniform_int_distribution<size_t> adist(0, active.size() - 1);
      while (chosen.size() < want_active) chosen.insert(active[adist(rng)]);
    }
    std::uniform_int_distribution<size_t> dist(0, grad.free_indices.size() - 1);
    while (chosen.size() < want) chosen.insert(grad.free_indices[dist(rng)]);
    picked.assign(chosen.begin(), chosen.end());
  }

  const double floor = 1e-6 * std::max(1.0, rep.grad_norm_inf);
  for (int i : picked) {
    auto cost_with = [&](double shift) {
      ProblemData p = setup.problem;
      p.level[i] += shift;
      const StateField s = solve_state(mesh, p, {}, &state.y);
      return eval_cost(mesh, s.y, p.level, setup.obs);
    };
    GradCheckRow row;
    row.index = i;
    row.analytic = grad.partial(i);
    row.fd = (cost_with(delta) - cost_with(-delta)) / (2.0 * delta);
    row.rel_err = std::abs(row.analytic - row.fd) /
                  std::max({std::abs(row.analytic), std::abs(row.fd), floor});
    rep.rows.push_back(row);
    rep.max_rel_err = std::max(rep.max_rel_err, row.rel_err);
  }
  return rep;
}

TraceArtifacts trace_scenario(const RunSetup& setup) {
  const LevelFunction level{setup.problem.level, setup.analytic_level};
  const LevelField field = LevelField::from(setup.mesh, level);
  const Vec2 x0 = setup.trace.x0 ? *setup.trace.x0 : setup.obs.points.at(0);

  TraceOptions opts;
  opts.trace_tol = setup.trace.trace_tol;
  opts.perimeter_estimate =
      4.0 * (setup.mesh.domain.width() + setup.mesh.domain.height());
  if (!setup.analytic_level) opts.on_level_tol = 1e-9;

  TraceArtifacts art;
  art.trace = hamiltonian_trace(field, x0, setup.trace.dt, opts);
  if (setup.trace.l > 0)
    art.observations = observation_points(art.trace, setup.trace.l, setup.trace.window);

  const auto dir = prepare_output_dir(setup.output_dir);
  write_trajectory_csv(art.trace, (dir / "trajectory.csv").string());
  if (setup.trace.l > 0)
    write_points_csv(art.observations, (dir / "observations.csv").string());
  json rep;
  rep["period"] = art.trace.period;
  rep["closure_defect"] = art.trace.closure_defect;
  rep["samples"] = art.trace.times.size();
  std::ofstream(dir / "trace_report.json") << rep.dump(2) << "\n";
  return art;
}

StateField state_only_scenario(const RunSetup& setup) {
  const StateField state = solve_state(setup.mesh, setup.problem);
  const auto dir = prepare_output_dir(setup.output_dir);
  write_vtk_scalar(setup.mesh, state.y, "y", (dir / "final_state.vtk").string());

  json rep;
  rep["min_y"] = state.y.minCoeff();
  rep["max_y"] = state.y.maxCoeff();
  rep["newton_iterations"] = state.newton_iterations;
  rep["residual"] = state.residual;
  json dyns = json::array();
  for (const Vec2& p : setup.obs.points)
    dyns.push_back(normal_derivative_at(setup.mesh, state.y, setup.problem.level, p));
  rep["dyn_at_x0"] = dyns;
  rep["cost"] = eval_cost(setup.mesh, state.y, setup.problem.level, setup.obs);
  std::ofstream(dir / "report.json") << rep.dump(2) << "\n";
  return state;
}

}  // namespace lsopt
