#include "lsopt/levelset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace lsopt {

AnalyticLevel disk_level(const Vec2& center, double radius) {
  AnalyticLevel f;
  f.value = [center, radius](const Vec2& x) {
    return (x - center).squaredNorm() - radius * radius;
  };
  f.gradient = [center](const Vec2& x) { return Vec2(2.0 * (x - center)); };
  f.hessian = [](const Vec2&) { return Mat2(2.0 * Mat2::Identity()); };
  return f;
}

void ObservationSpec::validate(const Rect& domain) const {
  if (points.empty()) throw std::invalid_argument("ObservationSpec: no points");
  if (alphas.size() != static_cast<Eigen::Index>(points.size()))
    throw std::invalid_argument("ObservationSpec: points/alphas size mismatch");
  for (const Vec2& p : points) {
    const bool inside = p.x() > domain.lo.x() && p.x() < domain.hi.x() &&
                        p.y() > domain.lo.y() && p.y() < domain.hi.y();
    if (!inside)
      throw std::invalid_argument("ObservationSpec: point not strictly inside D");
  }
}

Eigen::MatrixX2d recovered_gradient(const Mesh& mesh, const Eigen::VectorXd& nodal) {
  if (nodal.size() != mesh.num_vertices())
    throw std::invalid_argument("recovered_gradient: nodal field has wrong length");
  Eigen::MatrixX2d out = Eigen::MatrixX2d::Zero(mesh.num_vertices(), 2);
  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Vec2 gt = p1_gradient(mesh, nodal, t);
    const double a = mesh.tri_area[t];
    for (int k = 0; k < 3; ++k) {
      const int v = mesh.triangles(t, k);
      out.row(v) += a * gt.transpose();
      wsum[v] += a;
    }
  }
  for (int v = 0; v < mesh.num_vertices(); ++v) out.row(v) /= wsum[v];
  return out;
}

LevelField LevelField::analytic(AnalyticLevel f) {
  LevelField out;
  out.analytic_ = std::move(f);
  return out;
}

LevelField LevelField::nodal(const Mesh& mesh, Eigen::VectorXd g) {
  LevelField out;
  out.mesh_ = &mesh;
  out.rec_grad_ = recovered_gradient(mesh, g);
  out.nodal_ = std::move(g);
  return out;
}

LevelField LevelField::from(const Mesh& mesh, const LevelFunction& g) {
  if (g.analytic) return analytic(*g.analytic);
  return nodal(mesh, g.nodal);
}

double LevelField::value(const Vec2& x) const {
  if (analytic_) return analytic_->value(x);
  return p1_interpolate(*mesh_, nodal_, locate_point(*mesh_, x));
}

Vec2 LevelField::gradient(const Vec2& x) const {
  if (analytic_) return analytic_->gradient(x);
  const PointLocation loc = locate_point(*mesh_, x);
  Vec2 g = Vec2::Zero();
  for (int k = 0; k < 3; ++k)
    g += loc.bary[k] * rec_grad_.row(mesh_->triangles(loc.triangle, k)).transpose();
  return g;
}

Mat2 LevelField::gradient_jacobian(const Vec2& x) const {
  if (analytic_) return analytic_->hessian(x);
  const PointLocation loc = locate_point(*mesh_, x);
  Mat2 jac;
  for (int c = 0; c < 2; ++c) {
    const Vec2 grad_component =
        p1_gradient(*mesh_, rec_grad_.col(c), loc.triangle);
    jac.row(c) = grad_component.transpose();
  }
  return jac;
}

AdmissibilityReport admissibility_check(const Eigen::VectorXd& g, const Mesh& mesh,
                                        const ObservationSpec& obs,
                                        double grad_floor) {
  AdmissibilityReport rep;

  double min_bdry = std::numeric_limits<double>::infinity();
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (mesh.on_boundary[v]) min_bdry = std::min(min_bdry, g[v]);
  rep.min_boundary_value = min_bdry;
  rep.positive_on_boundary = min_bdry > 0.0;

  // triangles whose vertex values straddle zero (inclusive, so plateaus count)
  double min_grad = std::numeric_limits<double>::infinity();
  bool any_crossed = false;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int k = 0; k < 3; ++k) {
      const double v = g[mesh.triangles(t, k)];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (lo <= 0.0 && hi >= 0.0) {
      any_crossed = true;
      min_grad = std::min(min_grad, p1_gradient(mesh, g, t).norm());
    }
  }
  rep.min_contour_gradient = any_crossed ? min_grad : 0.0;
  rep.gradient_ok = !any_crossed || min_grad >= grad_floor;

  double max_obs = 0.0;
  for (const Vec2& p : obs.points) {
    const double v = p1_interpolate(mesh, g, locate_point(mesh, p));
    max_obs = std::max(max_obs, std::abs(v));
  }
  rep.max_observation_value = max_obs;
  rep.zero_at_observations = max_obs <= 1e-12;
  return rep;
}

double Polyline::length() const {
  double s = 0.0;
  for (size_t i = 1; i < points.size(); ++i) s += (points[i] - points[i - 1]).norm();
  if (closed && points.size() > 1) s += (points.front() - points.back()).norm();
  return s;
}

double Polyline::enclosed_area() const {
  double a = 0.0;
  const size_t n = points.size();
  for (size_t i = 0; i < n; ++i) {
    const Vec2& p = points[i];
    const Vec2& q = points[(i + 1) % n];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(a);
}

namespace {

// local edge key within a triangle, by global vertex pair
std::pair<int, int> edge_key(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

}  // namespace

std::vector<Polyline> extract_contour(const Mesh& mesh, const Eigen::VectorXd& g) {
  if (g.size() != mesh.num_vertices())
    throw std::invalid_argument("extract_contour: field has wrong length");
  Eigen::VectorXd v = g;
  for (int i = 0; i < v.size(); ++i)
    if (v[i] == 0.0) v[i] = 1e-14;  // deterministic sign for exact zeros

  struct Segment {
    std::pair<int, int> e0, e1;  // crossed edges
    Vec2 p0, p1;
  };
  std::vector<Segment> segments;
  auto cross_point = [&](int a, int b) {
    const double va = v[a], vb = v[b];
    const double t = va / (va - vb);
    return Vec2(mesh.vertex(a) + t * (mesh.vertex(b) - mesh.vertex(a)));
  };
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const int i[3] = {mesh.triangles(t, 0), mesh.triangles(t, 1), mesh.triangles(t, 2)};
    std::vector<int> crossed;  // local edge ids with sign change
    for (int k = 0; k < 3; ++k) {
      const int a = i[k], b = i[(k + 1) % 3];
      if ((v[a] > 0.0) != (v[b] > 0.0)) crossed.push_back(k);
    }
    if (crossed.size() != 2) continue;  // 0 = untouched; sign rules forbid 1 or 3
    const int a0 = i[crossed[0]], b0 = i[(crossed[0] + 1) % 3];
    const int a1 = i[crossed[1]], b1 = i[(crossed[1] + 1) % 3];
    segments.push_back(Segment{edge_key(a0, b0), edge_key(a1, b1),
                               cross_point(a0, b0), cross_point(a1, b1)});
  }

  // chain segments: crossed interior edges are shared by exactly two triangles
  std::map<std::pair<int, int>, std::vector<int>> by_edge;
  for (size_t s = 0; s < segments.size(); ++s) {
    by_edge[segments[s].e0].push_back(static_cast<int>(s));
    by_edge[segments[s].e1].push_back(static_cast<int>(s));
  }
  std::vector<char> used(segments.size(), 0);
  std::vector<Polyline> out;
  for (size_t start = 0; start < segments.size(); ++start) {
    if (used[start]) continue;
    // walk forward from the start segment through shared edges
    std::vector<Vec2> pts{segments[start].p0, segments[start].p1};
    std::vector<std::pair<int, int>> ends{segments[start].e0, segments[start].e1};
    used[start] = 1;
    bool closed = false;
    for (int dir = 0; dir < 2 && !closed; ++dir) {
      std::pair<int, int> cur_edge = ends[1 - dir];  // grow tail first, then head
      int cur_seg = static_cast<int>(start);
      while (true) {
        const auto& cands = by_edge[cur_edge];
        int next = -1;
        for (int c : cands)
          if (c != cur_seg && !used[c]) next = next < 0 ? c : next;
        if (next < 0) break;
        used[next] = 1;
        const Segment& sg = segments[next];
        const bool enter_at_0 = (sg.e0 == cur_edge);
        const Vec2 far_pt = enter_at_0 ? sg.p1 : sg.p0;
        const std::pair<int, int> far_edge = enter_at_0 ? sg.e1 : sg.e0;
        if (dir == 0)
          pts.push_back(far_pt);
        else
          pts.insert(pts.begin(), far_pt);
        cur_seg = next;
        cur_edge = far_edge;
        if (cur_edge == ends[dir]) {  // came around
          closed = true;
          break;
        }
      }
    }
    Polyline pl;
    pl.closed = closed;
    pl.points = std::move(pts);
    out.push_back(std::move(pl));
  }
  return out;
}

namespace {

Vec2 hamiltonian_velocity(const LevelField& g, const Vec2& z) {
  const Vec2 grad = g.gradient(z);
  return Vec2(-grad.y(), grad.x());
}

Vec2 rk4_step(const LevelField& g, const Vec2& z, double dt) {
  const Vec2 k1 = hamiltonian_velocity(g, z);
  const Vec2 k2 = hamiltonian_velocity(g, z + 0.5 * dt * k1);
  const Vec2 k3 = hamiltonian_velocity(g, z + 0.5 * dt * k2);
  const Vec2 k4 = hamiltonian_velocity(g, z + dt * k3);
  return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

Vec2 TraceResult::at(double t) const {
  if (times.empty()) throw std::runtime_error("TraceResult: empty trace");
  t = std::clamp(t, times.front(), times.back());
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return points.front();
  if (it == times.end()) return points.back();
  const size_t hi = it - times.begin();
  const size_t lo = hi - 1;
  const double span = times[hi] - times[lo];
  const double s = span > 0.0 ? (t - times[lo]) / span : 0.0;
  return points[lo] + s * (points[hi] - points[lo]);
}

TraceResult hamiltonian_trace(const LevelField& g, const Vec2& x0, double dt,
                              const TraceOptions& opts) {
  if (dt <= 0.0) throw std::invalid_argument("hamiltonian_trace: dt must be > 0");
  if (std::abs(g.value(x0)) > opts.on_level_tol)
    throw std::runtime_error("hamiltonian_trace: seed is not on the zero level");
  const Vec2 v0 = hamiltonian_velocity(g, x0);
  const double speed0 = v0.norm();
  if (speed0 == 0.0)
    throw std::runtime_error("hamiltonian_trace: zero initial velocity");
  const Vec2 section = v0 / speed0;  // progress coordinate along initial motion

  TraceResult tr;
  tr.dt = dt;
  tr.times.push_back(0.0);
  tr.points.push_back(x0);

  double min_speed = speed0;
  double u_prev = 0.0;
  Vec2 z = x0;
  double t = 0.0;
  while (true) {
    const Vec2 z_next = rk4_step(g, z, dt);
    const double t_next = t + dt;
    const double u_next = (z_next - x0).dot(section);
    min_speed = std::min(min_speed, hamiltonian_velocity(g, z_next).norm());
    if (u_prev < 0.0 && u_next >= 0.0) {
      // same-direction return: bisect the sub-step crossing time
      double lo = 0.0, hi = dt;
      while (hi - lo > opts.bisection_tol) {
        const double mid = 0.5 * (lo + hi);
        const double u_mid = (rk4_step(g, z, mid) - x0).dot(section);
        (u_mid < 0.0 ? lo : hi) = mid;
      }
      const double tau = 0.5 * (lo + hi);
      const Vec2 z_final = rk4_step(g, z, tau);
      tr.period = t + tau;
      tr.times.push_back(tr.period);
      tr.points.push_back(z_final);
      tr.closure_defect = (z_final - x0).norm();
      tr.final_velocity = hamiltonian_velocity(g, z_final);
      if (tr.closure_defect > opts.trace_tol)
        throw std::runtime_error(
            "hamiltonian_trace: orbit returned to the section but missed the "
            "seed (closure defect " +
            std::to_string(tr.closure_defect) + ")");
      return tr;
    }
    z = z_next;
    t = t_next;
    u_prev = u_next;
    tr.times.push_back(t);
    tr.points.push_back(z);
    if (min_speed <= 0.0 ||
        t > opts.laps * opts.perimeter_estimate / std::max(min_speed, 1e-300))
      throw std::runtime_error(
          "hamiltonian_trace: no periodic return within the time budget");
  }
}

Vec2 flow_at_time(const LevelField& g, const Vec2& x0, double T, double dt) {
  Vec2 z = x0;
  double t = 0.0;
  while (t + dt <= T) {
    z = rk4_step(g, z, dt);
    t += dt;
  }
  if (T - t > 0.0) z = rk4_step(g, z, T - t);
  return z;
}

std::vector<Vec2> observation_points(const TraceResult& trace, int l,
                                     std::optional<std::pair<int, int>> window) {
  if (l < 1) throw std::invalid_argument("observation_points: l must be >= 1");
  int lo = 0, hi = l - 1;
  if (window) {
    lo = window->first;
    hi = window->second;
    if (lo < 0 || hi >= l || lo > hi)
      throw std::invalid_argument("observation_points: window out of range");
  }
  std::vector<Vec2> pts;
  for (int i = lo; i <= hi; ++i)
    pts.push_back(trace.at(i * trace.period / l));
  return pts;
}

Vec2 variation_ode(const LevelField& g, const LevelField& h, const TraceResult& trace) {
  if (trace.period <= 0.0) throw std::invalid_argument("variation_ode: invalid trace");

  // joint RK4 on (z, w); z is re-integrated so the stage points line up
  struct State {
    Vec2 z, w;
  };
  auto rhs = [&](const State& s) {
    const Mat2 jac = g.gradient_jacobian(s.z);     // row c = grad of d_c g
    const Vec2 grad_h = h.gradient(s.z);
    State d;
    d.z = hamiltonian_velocity(g, s.z);
    d.w.x() = -jac.row(1).dot(s.w) - grad_h.y();
    d.w.y() = jac.row(0).dot(s.w) + grad_h.x();
    return d;
  };
  auto add = [](const State& a, double c, const State& b) {
    return State{a.z + c * b.z, a.w + c * b.w};
  };
  auto step = [&](State s, double dt) {
    const State k1 = rhs(s);
    const State k2 = rhs(add(s, 0.5 * dt, k1));
    const State k3 = rhs(add(s, 0.5 * dt, k2));
    const State k4 = rhs(add(s, dt, k3));
    State out = s;
    out.z += (dt / 6.0) * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z);
    out.w += (dt / 6.0) * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w);
    return out;
  };

  State s{trace.points.front(), Vec2::Zero()};
  const double T = trace.period, dt = trace.dt;
  double t = 0.0;
  while (t + dt <= T) {
    s = step(s, dt);
    t += dt;
  }
  if (T - t > 0.0) s = step(s, T - t);
  return s.w;
}

double period_derivative(const TraceResult& trace, const Vec2& w, double grad_floor) {
  const Vec2 v = trace.final_velocity;
  const double a1 = std::abs(v.x()), a2 = std::abs(v.y());
  if (std::max(a1, a2) <= grad_floor)
    throw std::runtime_error("period_derivative: terminal velocity below floor");
  return a2 >= a1 ? -w.y() / v.y() : -w.x() / v.x();
}

}  // namespace lsopt
