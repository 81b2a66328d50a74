#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace lsopt {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Axis-aligned hold-all rectangle D.
struct Rect {
  Vec2 lo{0.0, 0.0};
  Vec2 hi{1.0, 1.0};

  double width() const { return hi.x() - lo.x(); }
  double height() const { return hi.y() - lo.y(); }
  double area() const { return width() * height(); }
  bool contains(const Vec2& x, double tol = 0.0) const {
    return x.x() >= lo.x() - tol && x.x() <= hi.x() + tol &&
           x.y() >= lo.y() - tol && x.y() <= hi.y() + tol;
  }
};

}  // namespace lsopt
