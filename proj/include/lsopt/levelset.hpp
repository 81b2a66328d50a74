#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "lsopt/mesh.hpp"
#include "lsopt/types.hpp"

namespace lsopt {

/// Closed-form level function with derivatives, for tracing tests.
struct AnalyticLevel {
  std::function<double(const Vec2&)> value;
  std::function<Vec2(const Vec2&)> gradient;
  std::function<Mat2(const Vec2&)> hessian;
};

/// g(x) = |x - center|^2 - radius^2.
AnalyticLevel disk_level(const Vec2& center, double radius);

/// Nodal level function g_h = sum G_i phi_i; the geometry control variable.
/// The optional analytic definition drives the Hamiltonian tracing exactly
/// where available.
struct LevelFunction {
  Eigen::VectorXd nodal;
  std::optional<AnalyticLevel> analytic;
};

/// Observation points on the zero level with target values.
struct ObservationSpec {
  std::vector<Vec2> points;
  Eigen::VectorXd alphas;

  void validate(const Rect& domain) const;
};

/// Area-weighted average of the incident element gradients, per vertex.
/// Returns an n x 2 matrix; its linear interpolant is the recovered
/// gradient field used for tracing nodal level functions.
Eigen::MatrixX2d recovered_gradient(const Mesh& mesh, const Eigen::VectorXd& nodal);

/// Uniform evaluator over analytic and nodal level functions. Nodal fields
/// use the recovered gradient (P1 interpolated) and its per-triangle
/// Jacobian as second derivatives.
class LevelField {
 public:
  static LevelField analytic(AnalyticLevel f);
  static LevelField nodal(const Mesh& mesh, Eigen::VectorXd g);
  /// Analytic branch when the level function carries one, nodal otherwise.
  static LevelField from(const Mesh& mesh, const LevelFunction& g);

  double value(const Vec2& x) const;
  Vec2 gradient(const Vec2& x) const;
  Mat2 gradient_jacobian(const Vec2& x) const;  // rows: grad of each component

 private:
  std::optional<AnalyticLevel> analytic_;
  const Mesh* mesh_ = nullptr;
  Eigen::VectorXd nodal_;
  Eigen::MatrixX2d rec_grad_;
};

struct AdmissibilityReport {
  bool positive_on_boundary = false;
  bool gradient_ok = false;       // |grad g_h| above floor on sign-change triangles
  bool zero_at_observations = false;
  double min_boundary_value = 0.0;
  double min_contour_gradient = 0.0;
  double max_observation_value = 0.0;

  bool all_pass() const {
    return positive_on_boundary && gradient_ok && zero_at_observations;
  }
};

AdmissibilityReport admissibility_check(const Eigen::VectorXd& g, const Mesh& mesh,
                                        const ObservationSpec& obs,
                                        double grad_floor = 1e-8);

struct Polyline {
  bool closed = false;
  std::vector<Vec2> points;

  double length() const;
  double enclosed_area() const;  // shoelace; meaningful for closed polylines
};

/// Marching-triangles zero contour of the nodal field. Exact nodal zeros are
/// nudged by +1e-14 before the sign tests so the topology is deterministic.
std::vector<Polyline> extract_contour(const Mesh& mesh, const Eigen::VectorXd& g);

struct TraceOptions {
  double on_level_tol = 1e-10;     // |g(x0)| admitted at the seed
  double trace_tol = 1e-6;         // maximum closure defect
  double perimeter_estimate = 16;  // cap: t_max = laps * perimeter / min speed
  double laps = 10;
  double bisection_tol = 1e-12;    // absolute, in time
};

/// One period of z' = (-d2 g, d1 g), z(0) = x0, traced with classical RK4.
struct TraceResult {
  std::vector<double> times;    // 0, dt, 2dt, ..., T
  std::vector<Vec2> points;     // z at those times
  double dt = 0.0;
  double period = 0.0;
  double closure_defect = 0.0;  // |z(T) - x0|
  Vec2 final_velocity = Vec2::Zero();

  Vec2 at(double t) const;      // linear interpolation on the stored samples
};

/// Integrates until the first same-direction return through the Poincare
/// section (the line through x0 orthogonal to the initial velocity); the
/// crossing time is refined by bisection. Throws when the seed is off the
/// zero level, the initial velocity vanishes, or no return occurs in time.
TraceResult hamiltonian_trace(const LevelField& g, const Vec2& x0, double dt,
                              const TraceOptions& opts = {});

/// Fixed-time RK4 endpoint of the same system (finite-difference oracles).
Vec2 flow_at_time(const LevelField& g, const Vec2& x0, double T, double dt);

/// Observation points z(i T/l) for i in [0, l) or in the given index window.
std::vector<Vec2> observation_points(const TraceResult& trace, int l,
                                     std::optional<std::pair<int, int>> window = {});

/// Terminal value w(T) of the system in variations along the stored orbit:
///   w1' = -grad(d2 g) . w - d2 h,   w2' = grad(d1 g) . w + d1 h,  w(0) = 0.
Vec2 variation_ode(const LevelField& g, const LevelField& h, const TraceResult& trace);

/// Derivative of the period under the direction that produced w:
/// -w_i(T)/z_i'(T) with i the larger-magnitude velocity component.
double period_derivative(const TraceResult& trace, const Vec2& w,
                         double grad_floor = 1e-8);

}  // namespace lsopt
