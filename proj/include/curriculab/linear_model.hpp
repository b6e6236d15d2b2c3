#pragma once

#include <Eigen/Dense>

#include "curriculab/design.hpp"

namespace curriculab {

/// Ordinary least squares fit obtained through a column-pivoted Householder QR.
struct LinearModelFit {
  Eigen::VectorXd coefficients;  // one per column of X
  Eigen::VectorXd residuals;     // y - X b
  Eigen::VectorXd leverage;      // diagonal of the hat matrix
  Eigen::MatrixXd xtx_inverse;   // (X'X)^-1
  int rank = 0;
  int residual_df = 0;
  double rss = 0.0;

  std::size_t observations() const { return static_cast<std::size_t>(residuals.size()); }
};

/// Requires rows >= cols, full column rank and at least one residual degree of
/// freedom. Rank deficiency raises NumericError naming the dependent columns.
LinearModelFit fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
LinearModelFit fit_ols(const DesignMatrix& x, const Eigen::VectorXd& y);

/// Residual sum of squares of the least-squares fit of y on x (x may be
/// empty, in which case this is y'y).
double least_squares_rss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// HC3 sandwich (X'X)^-1 X' diag(e_i^2 / (1 - h_i)^2) X (X'X)^-1.
/// Throws NumericError if any observation has leverage 1.
Eigen::MatrixXd hc3_covariance(const LinearModelFit& fit, const Eigen::MatrixXd& x);

/// sigma^2 (X'X)^-1 with sigma^2 = rss / residual_df.
Eigen::MatrixXd classical_covariance(const LinearModelFit& fit);

}  // namespace curriculab
