#pragma once

#include <stdexcept>

namespace penergy {

enum class WarmStart { linear, given };

struct SolverConfig {
  /// Converged when the max Kirchhoff residual is at most tol * (1 + energy^((p-1)/p)).
  double tol = 1e-10;
  int max_iter = 500;
  /// First smoothing parameter, relative to the oscillation of the pinned data.
  double smoothing_start = 0.1;
  double smoothing_decay = 0.1;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
  WarmStart warm_start = WarmStart::linear;

  void validate() const {
    if (!(tol > 0)) throw std::invalid_argument("tolerance must be positive");
    if (max_iter <= 0) throw std::invalid_argument("max iterations must be positive");
    if (!(smoothing_start > 0)) throw std::invalid_argument("smoothing start must be positive");
    if (!(smoothing_decay > 0 && smoothing_decay < 1)) throw std::invalid_argument("smoothing decay must lie in (0,1)");
    if (!(armijo > 0 && armijo < 0.5)) throw std::invalid_argument("armijo constant must lie in (0,1/2)");
    if (!(backtrack > 0 && backtrack < 1)) throw std::invalid_argument("backtracking factor must lie in (0,1)");
  }

  SolverConfig tightened(double factor) const {
    SolverConfig c = *this;
    c.tol *= factor;
    return c;
  }
};

}  // namespace penergy
