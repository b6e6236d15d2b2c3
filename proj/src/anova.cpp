#include "curriculab/anova.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include <boost/math/distributions/normal.hpp>

#include "curriculab/error.hpp"
#include "curriculab/text_io.hpp"

namespace curriculab {

const AnovaRow& AnovaTable::row(std::string_view effect) const {
  for (const auto& r : rows)
    if (r.effect == effect) return r;
  throw Error("ANOVA table has no row '" + std::string(effect) + "'");
}

namespace {

Eigen::MatrixXd drop_columns(const Eigen::MatrixXd& x, std::size_t first, std::size_t width) {
  const auto cols = static_cast<Eigen::Index>(x.cols() - static_cast<Eigen::Index>(width));
  Eigen::MatrixXd reduced(x.rows(), cols);
  const auto f = static_cast<Eigen::Index>(first);
  const auto w = static_cast<Eigen::Index>(width);
  reduced.leftCols(f) = x.leftCols(f);
  reduced.rightCols(cols - f) = x.rightCols(x.cols() - f - w);
  return reduced;
}

// (Rb)' (R V R')^-1 (Rb) / q for the coefficient range [first, first+width).
double wald_f(const Eigen::VectorXd& b, const Eigen::MatrixXd& v, std::size_t first, std::size_t width, bool& singular) {
  const auto f = static_cast<Eigen::Index>(first);
  const auto w = static_cast<Eigen::Index>(width);
  const Eigen::VectorXd rb = b.segment(f, w);
  const Eigen::MatrixXd rv = v.block(f, f, w, w);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(rv);
  const double scale = std::max(rv.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  const bool degenerate = ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
                          ldlt.vectorD().minCoeff() <= 1e-14 * scale || rv.diagonal().maxCoeff() <= 0.0;
  if (degenerate) {
    singular = true;
    return rb.cwiseAbs().maxCoeff() <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  const double stat = rb.dot(ldlt.solve(rb)) / static_cast<double>(width);
  return std::max(stat, 0.0);
}

AnovaRowKind row_kind(EffectKind k) {
  switch (k) {
    case EffectKind::intercept:
      return AnovaRowKind::intercept;
    case EffectKind::main:
      return AnovaRowKind::main;
    case EffectKind::interaction:
      return AnovaRowKind::interaction;
  }
  return AnovaRowKind::main;
}

}  // namespace

AnovaTable type3_anova(const DesignMatrix& x, const Eigen::VectorXd& y, bool robust) {
  if (x.coding != Coding::sum_to_zero) throw NumericError("type-3 ANOVA requires sum-to-zero coding");
  return type3_anova(x, y, fit_ols(x, y), robust);
}

AnovaTable type3_anova(const DesignMatrix& x, const Eigen::VectorXd& y, const LinearModelFit& fit, bool robust) {
  if (x.coding != Coding::sum_to_zero) throw NumericError("type-3 ANOVA requires sum-to-zero coding");
  AnovaTable table;
  table.robust = robust;
  const Eigen::MatrixXd v = robust ? hc3_covariance(fit, x.x) : classical_covariance(fit);

  if (!robust) {
    std::map<std::size_t, std::vector<double>> by_cell;
    for (std::size_t r = 0; r < x.cell_of_row.size(); ++r) by_cell[x.cell_of_row[r]].push_back(y(static_cast<Eigen::Index>(r)));
    std::size_t flat = 0;
    for (const auto& [cell, values] : by_cell)
      if (values.size() > 1 && std::all_of(values.begin(), values.end(), [&](double s) { return s == values.front(); }))
        ++flat;
    if (flat > 0)
      table.warnings.push_back(std::to_string(flat) +
                               " cell(s) have zero within-cell variance; classical F assumes equal variances");
  }

  bool any_singular = false;
  for (const auto& block : x.blocks) {
    AnovaRow row;
    row.effect = block.name;
    row.kind = row_kind(block.kind);
    row.df = static_cast<int>(block.width);
    const double reduced_rss = least_squares_rss(drop_columns(x.x, block.first_column, block.width), y);
    row.sum_sq = std::max(reduced_rss - fit.rss, 0.0);
    bool singular = false;
    row.f = wald_f(fit.coefficients, v, block.first_column, block.width, singular);
    any_singular |= singular;
    row.p = f_p_value(*row.f, row.df, fit.residual_df);
    table.rows.push_back(row);
  }
  if (any_singular)
    table.warnings.push_back("a covariance block is singular; affected F set to 0 (zero effect) or infinity");

  AnovaRow residual;
  residual.effect = "Residual";
  residual.kind = AnovaRowKind::residual;
  residual.sum_sq = fit.rss;
  residual.df = fit.residual_df;
  table.rows.push_back(residual);
  return table;
}

PosthocResult posthoc_factor_effects(const AnovaTable& table, double alpha, int k) {
  PosthocResult result;
  result.corrected_alpha = bonferroni_alpha(alpha, k);
  for (const auto& row : table.rows) {
    if (row.kind != AnovaRowKind::main || !row.p) continue;
    result.effects.push_back({row.effect, *row.p, *row.p < result.corrected_alpha});
  }
  return result;
}

std::vector<LevelComparison> marginal_comparisons(const FactorialDesign& design, const DesignMatrix& x,
                                                  const LinearModelFit& fit, double alpha, int k) {
  const double corrected = bonferroni_alpha(alpha, k);
  const Eigen::MatrixXd v = hc3_covariance(fit, x.x);
  std::vector<LevelComparison> out;
  for (const auto& block : x.blocks) {
    if (block.kind != EffectKind::main || !block.factor) continue;
    const auto& factor = design.factors()[*block.factor];
    const std::size_t levels = factor.levels.size();
    // Effect of level j as a linear form over the coefficients.
    auto effect = [&](std::size_t j) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x.cols()));
      for (std::size_t i = 0; i + 1 < levels; ++i) {
        const auto col = static_cast<Eigen::Index>(block.first_column + i);
        c(col) = (j + 1 == levels) ? -1.0 : (i == j ? 1.0 : 0.0);
      }
      return c;
    };
    for (std::size_t a = 0; a < levels; ++a) {
      for (std::size_t b = a + 1; b < levels; ++b) {
        const Eigen::VectorXd c = effect(a) - effect(b);
        const double diff = c.dot(fit.coefficients);
        const double var = c.dot(v * c);
        double f = 0.0;
        if (var > 0.0)
          f = diff * diff / var;
        else if (std::abs(diff) > 1e-12)
          f = std::numeric_limits<double>::infinity();
        const double p = f_p_value(f, 1, fit.residual_df);
        out.push_back({factor.name, factor.levels[a], factor.levels[b], diff, p, p < corrected});
      }
    }
  }
  return out;
}

std::vector<QuantilePoint> residual_quantiles(const LinearModelFit& fit) {
  if (fit.residual_df < 1) throw NumericError("residual quantiles need at least one residual degree of freedom");
  const double scale = std::sqrt(fit.rss / fit.residual_df);
  if (!(scale > 0.0)) throw NumericError("residual variance is zero; standardized residuals are undefined");
  std::vector<double> r(fit.residuals.data(), fit.residuals.data() + fit.residuals.size());
  std::sort(r.begin(), r.end());
  const boost::math::normal_distribution<double> normal;
  const double n = static_cast<double>(r.size());
  std::vector<QuantilePoint> out;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double prob = (static_cast<double>(i) + 0.5) / n;
    out.push_back({boost::math::quantile(normal, prob), r[i] / scale});
  }
  return out;
}

void write_anova_csv(std::ostream& out, const AnovaTable& table) {
  out << "effect,sum_sq,df,F,p\n";
  for (const auto& r : table.rows) {
    out << r.effect << ',' << format_double(r.sum_sq) << ',' << r.df << ',' << (r.f ? format_double(*r.f) : "")
        << ',' << (r.p ? format_double(*r.p) : "") << '\n';
  }
}

void write_anova_text(std::ostream& out, const AnovaTable& table, std::string_view title) {
  out << title << (table.robust ? " (HC3 robust Wald F)" : " (classical F)") << '\n';
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %14s %5s %12s %10s\n", "", "sum_sq", "df", "F", "PR(>F)");
  out << line;
  for (const auto& r : table.rows) {
    const std::string f = r.f ? format_fixed(*r.f, 2) : "";
    const std::string p = r.p ? format_sci(*r.p) : "";
    std::snprintf(line, sizeof line, "%-22s %14s %5d %12s %10s\n", r.effect.c_str(), format_fixed(r.sum_sq, 2).c_str(),
                  r.df, f.c_str(), p.c_str());
    out << line;
  }
  for (const auto& w : table.warnings) out << "warning: " << w << '\n';
}

void write_posthoc_text(std::ostream& out, const PosthocResult& posthoc) {
  const double a = posthoc.corrected_alpha;
  out << "Bonferroni-corrected alpha: " << (a >= 1e-4 ? format_fixed(a, 4) : format_double(a)) << '\n';
  for (const auto& e : posthoc.effects)
    out << "  " << e.effect << ": p = " << format_sci(e.p) << (e.significant ? "  significant" : "  not significant")
        << '\n';
  if (!posthoc.comparisons.empty()) out << "Factor-level marginal comparisons (HC3 Wald, 1 df):\n";
  for (const auto& c : posthoc.comparisons)
    out << "  " << c.factor << ": " << c.level_a << " - " << c.level_b << " = " << format_fixed(c.mean_difference, 3)
        << ", p = " << format_sci(c.p) << (c.significant ? "  significant" : "") << '\n';
}

}  // namespace curriculab
