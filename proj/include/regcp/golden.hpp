#pragma once

#include <functional>

namespace regcp {

struct GoldenResult {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
};

/// Golden-section search for a minimum of `f` on [a, b].
///
/// Stops when the bracket is narrower than `tol` or after `max_iter`
/// reductions. Returns the best point evaluated, endpoints included.
GoldenResult golden_section_minimize(const std::function<double(double)>& f, double a, double b,
                                     double tol, int max_iter = 100);

}  // namespace regcp
