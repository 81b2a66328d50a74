#pragma once

#include <span>
#include <string>
#include <vector>

#include "lsopt/types.hpp"

namespace lsopt {

/// Conforming P1 triangulation of the hold-all rectangle D.
///
/// Triangles are stored counter-clockwise. W_h is spanned by the hat
/// functions of all vertices, V_h by those of the interior vertices.
struct Mesh {
  Eigen::MatrixX2d vertices;            // n x 2 coordinates
  Eigen::MatrixX3i triangles;           // nt x 3 vertex indices, CCW
  std::vector<uint8_t> on_boundary;     // per-vertex flag
  double h = 0.0;                       // characteristic edge length
  Rect domain;

  std::vector<std::vector<int>> vertex_to_triangles;

  // per-triangle geometry, filled by finalize()
  std::vector<double> tri_area;
  std::vector<Eigen::Matrix<double, 2, 3>> hat_gradients;  // columns = grad of local hats

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
  int num_triangles() const { return static_cast<int>(triangles.rows()); }
  int num_interior() const;

  Vec2 vertex(int i) const { return vertices.row(i).transpose(); }
  Vec2 centroid(int t) const;

  /// Validates conformity/orientation and builds the derived tables.
  /// Throws std::runtime_error on a non-conforming mesh.
  void finalize();
};

/// Uniform criss-cross triangulation of rect with nx x nx cells, each cell
/// split by the diagonal from its lower-left to its upper-right corner.
Mesh generate_structured(int nx, const Rect& rect = Rect{});

/// ASCII format: "nv nt", then nv lines "x y b", then nt lines "i j k"
/// (0-based). '#' starts a comment. Clockwise triangles are reorientated
/// with a warning; other validation failures throw.
Mesh load_mesh(const std::string& path);
void save_mesh(const Mesh& mesh, const std::string& path);

struct PointLocation {
  int triangle = -1;
  Eigen::Vector3d bary = Eigen::Vector3d::Zero();
};

/// Finds the triangle containing x. On shared edges/vertices the lowest
/// triangle index wins. Throws if x is outside the closure of D.
PointLocation locate_point(const Mesh& mesh, const Vec2& x);

/// Constant gradient of the P1 interpolant of `nodal` on triangle t.
Vec2 p1_gradient(const Mesh& mesh, const Eigen::VectorXd& nodal, int t);

/// Value of the P1 interpolant at a located point.
double p1_interpolate(const Mesh& mesh, const Eigen::VectorXd& nodal,
                      const PointLocation& loc);

/// All vertex indices within strict distance `radius` of any center.
std::vector<int> ball_indices(const Mesh& mesh, std::span<const Vec2> centers,
                              double radius);

}  // namespace lsopt
