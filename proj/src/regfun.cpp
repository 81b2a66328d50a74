#include "lsopt/regfun.hpp"

#include <cmath>
#include <numbers>

namespace lsopt {

namespace {

double bump_radial(double r) {
  const double s = 1.0 - r * r;
  return s > 0.0 ? std::exp(-1.0 / s) : 0.0;
}

// mass of exp(-1/(1-|x|^2)) over R^2, by composite Simpson in the radius
double unnormalized_mass() {
  const int n = 1 << 14;
  const double dr = 1.0 / n;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = i * dr, b = (i + 1) * dr, m = 0.5 * (a + b);
    sum += (a * bump_radial(a) + 4.0 * m * bump_radial(m) + b * bump_radial(b)) *
           (dr / 6.0);
  }
  return 2.0 * std::numbers::pi * sum;
}

}  // namespace

double bump_normalization() {
  static const double c = 1.0 / unnormalized_mass();
  return c;
}

double mollifier(const Vec2& x, double eps1) {
  if (eps1 <= 0.0) throw std::invalid_argument("mollifier: eps1 must be > 0");
  const double r = x.norm() / eps1;
  if (r >= 1.0) return 0.0;
  return bump_normalization() * bump_radial(r) / (eps1 * eps1);
}

}  // namespace lsopt
