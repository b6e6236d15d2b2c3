#include "curriculab/linear_model.hpp"

#include <cmath>
#include <string>

#include "curriculab/error.hpp"

namespace curriculab {

namespace {

std::string describe_dependent(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr, const std::vector<std::string>* names) {
  std::string out;
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index i = qr.rank(); i < perm.size(); ++i) {
    const auto col = static_cast<std::size_t>(perm(i));
    if (!out.empty()) out += ", ";
    out += names && col < names->size() ? (*names)[col] : "column " + std::to_string(col);
  }
  return out;
}

LinearModelFit fit_impl(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<std::string>* names) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n != y.size()) throw NumericError("design has " + std::to_string(n) + " rows but " + std::to_string(y.size()) + " responses");
  if (p == 0) throw NumericError("model matrix has no columns");
  if (n < p) throw NumericError("fewer observations than model columns");
  if (!x.allFinite() || !y.allFinite()) throw NumericError("non-finite values in the model data");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < p) throw NumericError("model matrix is rank deficient; dependent columns: " + describe_dependent(qr, names));
  if (n - p < 1) throw NumericError("no residual degrees of freedom (observations equal model columns)");

  LinearModelFit fit;
  fit.rank = static_cast<int>(p);
  fit.residual_df = static_cast<int>(n - p);
  fit.coefficients = qr.solve(y);
  fit.residuals = y - x * fit.coefficients;
  fit.rss = fit.residuals.squaredNorm();

  // Thin Q gives the hat diagonal; R gives (X'X)^-1 = P R^-1 R^-T P'.
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
  fit.leverage = q.rowwise().squaredNorm();
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd inner = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  fit.xtx_inverse = perm * inner * perm.transpose();
  return fit;
}

}  // namespace

LinearModelFit fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) { return fit_impl(x, y, nullptr); }

LinearModelFit fit_ols(const DesignMatrix& x, const Eigen::VectorXd& y) { return fit_impl(x.x, y, &x.column_names); }

double least_squares_rss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.cols() == 0) return y.squaredNorm();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  const Eigen::VectorXd b = qr.solve(y);
  return (y - x * b).squaredNorm();
}

Eigen::MatrixXd hc3_covariance(const LinearModelFit& fit, const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = fit.leverage(i);
    if (h >= 1.0 - 1e-10) throw NumericError("observation " + std::to_string(i) + " has leverage 1; HC3 is undefined");
    const double e = fit.residuals(i) / (1.0 - h);
    w(i) = e * e;
  }
  const Eigen::MatrixXd meat = x.transpose() * w.asDiagonal() * x;
  Eigen::MatrixXd v = fit.xtx_inverse * meat * fit.xtx_inverse;
  return 0.5 * (v + v.transpose());
}

Eigen::MatrixXd classical_covariance(const LinearModelFit& fit) {
  return (fit.rss / fit.residual_df) * fit.xtx_inverse;
}

}  // namespace curriculab
