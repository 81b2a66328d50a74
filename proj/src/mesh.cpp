#include "lsopt/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lsopt {

namespace {

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) -
                (c.x() - a.x()) * (b.y() - a.y()));
}

}  // namespace

int Mesh::num_interior() const {
  int n = 0;
  for (uint8_t b : on_boundary) n += (b == 0);
  return n;
}

Vec2 Mesh::centroid(int t) const {
  return (vertex(triangles(t, 0)) + vertex(triangles(t, 1)) +
          vertex(triangles(t, 2))) / 3.0;
}

void Mesh::finalize() {
  const int n = num_vertices();
  const int nt = num_triangles();
  if (n < 3 || nt < 1) throw std::runtime_error("mesh: empty or degenerate");

  tri_area.assign(nt, 0.0);
  hat_gradients.assign(nt, Eigen::Matrix<double, 2, 3>::Zero());
  vertex_to_triangles.assign(n, {});

  int reoriented = 0;
  for (int t = 0; t < nt; ++t) {
    for (int k = 0; k < 3; ++k) {
      const int v = triangles(t, k);
      if (v < 0 || v >= n)
        throw std::runtime_error("mesh: triangle " + std::to_string(t) +
                                 " references vertex " + std::to_string(v) +
                                 " out of range");
    }
    Vec2 a = vertex(triangles(t, 0));
    Vec2 b = vertex(triangles(t, 1));
    Vec2 c = vertex(triangles(t, 2));
    double area = signed_area(a, b, c);
    if (area == 0.0)
      throw std::runtime_error("mesh: triangle " + std::to_string(t) +
                               " has zero area");
    if (area < 0.0) {
      std::swap(triangles(t, 1), triangles(t, 2));
      std::swap(b, c);
      area = -area;
      ++reoriented;
    }
    tri_area[t] = area;
    // grad of hat_k is the inward normal of the opposite edge over 2|T|
    const Vec2 e0 = c - b, e1 = a - c, e2 = b - a;
    hat_gradients[t].col(0) = Vec2(-e0.y(), e0.x()) / (2.0 * area);
    hat_gradients[t].col(1) = Vec2(-e1.y(), e1.x()) / (2.0 * area);
    hat_gradients[t].col(2) = Vec2(-e2.y(), e2.x()) / (2.0 * area);
    for (int k = 0; k < 3; ++k) vertex_to_triangles[triangles(t, k)].push_back(t);
  }
  if (reoriented > 0)
    std::cerr << "mesh: reoriented " << reoriented << " clockwise triangle(s)\n";

  for (int v = 0; v < n; ++v)
    if (vertex_to_triangles[v].empty())
      throw std::runtime_error("mesh: isolated vertex " + std::to_string(v));

  // edge -> incident triangle count; an edge on more than 2 triangles is
  // non-conforming, an edge on exactly 1 lies on the boundary
  std::map<std::pair<int, int>, int> edge_count;
  for (int t = 0; t < nt; ++t) {
    for (int k = 0; k < 3; ++k) {
      int i = triangles(t, k), j = triangles(t, (k + 1) % 3);
      if (i > j) std::swap(i, j);
      ++edge_count[{i, j}];
    }
  }
  on_boundary.assign(n, 0);
  for (const auto& [edge, count] : edge_count) {
    if (count > 2)
      throw std::runtime_error("mesh: non-conforming edge (" +
                               std::to_string(edge.first) + "," +
                               std::to_string(edge.second) + ") shared by " +
                               std::to_string(count) + " triangles");
    if (count == 1) {
      on_boundary[edge.first] = 1;
      on_boundary[edge.second] = 1;
    }
  }

  domain.lo = Vec2(vertices.col(0).minCoeff(), vertices.col(1).minCoeff());
  domain.hi = Vec2(vertices.col(0).maxCoeff(), vertices.col(1).maxCoeff());

  if (h <= 0.0) {
    double hmax = 0.0;
    for (int t = 0; t < nt; ++t)
      for (int k = 0; k < 3; ++k)
        hmax = std::max(hmax, (vertex(triangles(t, k)) -
                               vertex(triangles(t, (k + 1) % 3))).norm());
    h = hmax;
  }
}

Mesh generate_structured(int nx, const Rect& rect) {
  if (nx < 2) throw std::invalid_argument("generate_structured: nx must be >= 2");
  const int nv = (nx + 1) * (nx + 1);
  const double dx = rect.width() / nx;
  const double dy = rect.height() / nx;

  Mesh mesh;
  mesh.vertices.resize(nv, 2);
  for (int j = 0; j <= nx; ++j)
    for (int i = 0; i <= nx; ++i) {
      const int v = j * (nx + 1) + i;
      mesh.vertices(v, 0) = rect.lo.x() + i * dx;
      mesh.vertices(v, 1) = rect.lo.y() + j * dy;
    }

  mesh.triangles.resize(2 * nx * nx, 3);
  int t = 0;
  for (int j = 0; j < nx; ++j)
    for (int i = 0; i < nx; ++i) {
      const int v00 = j * (nx + 1) + i;
      const int v10 = v00 + 1;
      const int v01 = v00 + (nx + 1);
      const int v11 = v01 + 1;
      mesh.triangles.row(t++) << v00, v10, v11;  // below the diagonal
      mesh.triangles.row(t++) << v00, v11, v01;  // above the diagonal
    }

  mesh.h = std::max(dx, dy);
  mesh.finalize();
  return mesh;
}

Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mesh: cannot open " + path);

  // strip comments, gather tokens
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
  }
  size_t pos = 0;
  auto next_int = [&](const char* what) {
    if (pos >= tokens.size())
      throw std::runtime_error(std::string("load_mesh: unexpected end of file reading ") + what);
    try {
      size_t used = 0;
      const int v = std::stoi(tokens[pos], &used);
      if (used != tokens[pos].size()) throw std::invalid_argument("");
      ++pos;
      return v;
    } catch (const std::exception&) {
      throw std::runtime_error(std::string("load_mesh: bad integer '") +
                               tokens[pos] + "' for " + what);
    }
  };
  auto next_double = [&](const char* what) {
    if (pos >= tokens.size())
      throw std::runtime_error(std::string("load_mesh: unexpected end of file reading ") + what);
    try {
      size_t used = 0;
      const double v = std::stod(tokens[pos], &used);
      if (used != tokens[pos].size()) throw std::invalid_argument("");
      ++pos;
      return v;
    } catch (const std::exception&) {
      throw std::runtime_error(std::string("load_mesh: bad number '") +
                               tokens[pos] + "' for " + what);
    }
  };

  const int nv = next_int("vertex count");
  const int nt = next_int("triangle count");
  if (nv < 3 || nt < 1) throw std::runtime_error("load_mesh: bad counts");

  Mesh mesh;
  mesh.vertices.resize(nv, 2);
  std::vector<uint8_t> file_flags(nv, 0);
  for (int v = 0; v < nv; ++v) {
    mesh.vertices(v, 0) = next_double("vertex x");
    mesh.vertices(v, 1) = next_double("vertex y");
    file_flags[v] = next_int("boundary flag") != 0;
  }
  mesh.triangles.resize(nt, 3);
  for (int t = 0; t < nt; ++t)
    for (int k = 0; k < 3; ++k) mesh.triangles(t, k) = next_int("triangle vertex");
  if (pos != tokens.size())
    throw std::runtime_error("load_mesh: trailing data after last triangle");

  mesh.finalize();  // recomputes boundary flags from the topology

  int mismatched = 0;
  for (int v = 0; v < nv; ++v) mismatched += (file_flags[v] != mesh.on_boundary[v]);
  if (mismatched > 0)
    std::cerr << "load_mesh: " << mismatched
              << " boundary flag(s) in the file disagree with the topology; "
                 "using topological flags\n";
  return mesh;
}

void save_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mesh: cannot open " + path);
  out << mesh.num_vertices() << " " << mesh.num_triangles() << "\n";
  char buf[96];
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %d\n", mesh.vertices(v, 0),
                  mesh.vertices(v, 1), int(mesh.on_boundary[v]));
    out << buf;
  }
  for (int t = 0; t < mesh.num_triangles(); ++t)
    out << mesh.triangles(t, 0) << " " << mesh.triangles(t, 1) << " "
        << mesh.triangles(t, 2) << "\n";
}

PointLocation locate_point(const Mesh& mesh, const Vec2& x) {
  const double tol = 1e-12 * std::max(1.0, mesh.domain.width());
  if (!mesh.domain.contains(x, tol))
    throw std::runtime_error("locate_point: point outside the hold-all domain");

  // lowest triangle index wins ties on shared edges/vertices
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Vec2 a = mesh.vertex(mesh.triangles(t, 0));
    const Vec2 b = mesh.vertex(mesh.triangles(t, 1));
    const Vec2 c = mesh.vertex(mesh.triangles(t, 2));
    const double area2 = 2.0 * mesh.tri_area[t];
    const double l0 = ((b.x() - x.x()) * (c.y() - x.y()) -
                       (c.x() - x.x()) * (b.y() - x.y())) / area2;
    const double l1 = ((c.x() - x.x()) * (a.y() - x.y()) -
                       (a.x() - x.x()) * (c.y() - x.y())) / area2;
    const double l2 = 1.0 - l0 - l1;
    const double eps = 1e-12;
    if (l0 >= -eps && l1 >= -eps && l2 >= -eps) {
      PointLocation loc;
      loc.triangle = t;
      loc.bary = Eigen::Vector3d(std::clamp(l0, 0.0, 1.0), std::clamp(l1, 0.0, 1.0),
                                 std::clamp(l2, 0.0, 1.0));
      loc.bary /= loc.bary.sum();
      return loc;
    }
  }
  throw std::runtime_error("locate_point: point not located (outside mesh?)");
}

Vec2 p1_gradient(const Mesh& mesh, const Eigen::VectorXd& nodal, int t) {
  if (nodal.size() != mesh.num_vertices())
    throw std::invalid_argument("p1_gradient: nodal vector has wrong length");
  if (t < 0 || t >= mesh.num_triangles())
    throw std::out_of_range("p1_gradient: triangle index out of range");
  Eigen::Vector3d local(nodal[mesh.triangles(t, 0)], nodal[mesh.triangles(t, 1)],
                        nodal[mesh.triangles(t, 2)]);
  return mesh.hat_gradients[t] * local;
}

double p1_interpolate(const Mesh& mesh, const Eigen::VectorXd& nodal,
                      const PointLocation& loc) {
  const int t = loc.triangle;
  return loc.bary[0] * nodal[mesh.triangles(t, 0)] +
         loc.bary[1] * nodal[mesh.triangles(t, 1)] +
         loc.bary[2] * nodal[mesh.triangles(t, 2)];
}

std::vector<int> ball_indices(const Mesh& mesh, std::span<const Vec2> centers,
                              double radius) {
  if (radius <= 0.0) throw std::invalid_argument("ball_indices: radius must be > 0");
  std::vector<int> out;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const Vec2 p = mesh.vertex(v);
    for (const Vec2& c : centers) {
      if ((p - c).norm() < radius) {
        out.push_back(v);
        break;
      }
    }
  }
  return out;
}

}  // namespace lsopt
