#include <cmath>
#include <limits>
#include <string>

#include <boost/math/special_functions/beta.hpp>

#include "curriculab/anova.hpp"
#include "curriculab/error.hpp"

namespace curriculab {

double f_p_value(double f, double df1, double df2) {
  if (!(df1 > 0.0) || !(df2 > 0.0) || !std::isfinite(df1) || !std::isfinite(df2))
    throw NumericError("F distribution needs positive degrees of freedom");
  if (std::isnan(f) || f < 0.0) throw NumericError("F statistic must be non-negative");
  if (f == 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  // P(F > f) = I_x(d2/2, d1/2) with x = d2 / (d2 + d1 f).
  const double x = df2 / (df2 + df1 * f);
  return boost::math::ibeta(df2 / 2.0, df1 / 2.0, x);
}

double bonferroni_alpha(double alpha, int k) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw NumericError("alpha must lie in (0, 1)");
  if (k < 1) throw NumericError("Bonferroni correction needs at least one comparison");
  const double exact = alpha / k;
  const double truncated = std::floor(exact * 1e4 + 1e-9) / 1e4;
  return truncated > 0.0 ? truncated : exact;
}

}  // namespace curriculab
