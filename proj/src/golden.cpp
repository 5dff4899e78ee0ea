#include "regcp/golden.hpp"

#include <cmath>
#include <utility>

namespace regcp {

GoldenResult golden_section_minimize(const std::function<double(double)>& f, double a, double b,
                                     double tol, int max_iter) {
  if (a > b) std::swap(a, b);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;

  GoldenResult best;
  best.x = a;
  best.fx = f(a);
  auto consider = [&](double x, double fx) {
    if (fx < best.fx) {
      best.x = x;
      best.fx = fx;
    }
  };
  consider(b, f(b));

  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  consider(c, fc);
  consider(d, fd);

  int it = 0;
  while (it < max_iter && (b - a) > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
      consider(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
      consider(d, fd);
    }
    ++it;
  }
  best.iterations = it;
  return best;
}

}  // namespace regcp
