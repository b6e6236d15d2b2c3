#pragma once

// P(F > f) by direct quadrature of the F density over [f, inf).

#include <cmath>

#include <boost/math/quadrature/exp_sinh.hpp>

namespace oracle {

inline double f_density(double x, double d1, double d2) {
  if (x <= 0.0) return 0.0;
  const double log_norm = std::lgamma((d1 + d2) / 2) - std::lgamma(d1 / 2) - std::lgamma(d2 / 2) +
                          (d1 / 2) * std::log(d1 / d2);
  return std::exp(log_norm + (d1 / 2 - 1) * std::log(x) - ((d1 + d2) / 2) * std::log1p(d1 * x / d2));
}

inline double f_upper_tail_quadrature(double f, double d1, double d2) {
  boost::math::quadrature::exp_sinh<double> integrator;
  // Integrate over t in (0, inf) with x = f + t so the lower limit is finite.
  auto g = [&](double t) { return f_density(f + t, d1, d2); };
  return integrator.integrate(g, 0.0, std::numeric_limits<double>::infinity(), 1e-14);
}

}  // namespace oracle
