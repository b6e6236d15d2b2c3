#pragma once

// Type-3 multi-factor ANOVA with HC3 robust Wald tests, Bonferroni post-hoc
// decisions and residual diagnostics.

#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "curriculab/design.hpp"
#include "curriculab/linear_model.hpp"

namespace curriculab {

enum class AnovaRowKind { intercept, main, interaction, residual };

struct AnovaRow {
  std::string effect;
  AnovaRowKind kind = AnovaRowKind::main;
  double sum_sq = 0.0;
  int df = 0;
  std::optional<double> f;  // absent on the residual row
  std::optional<double> p;
};

struct AnovaTable {
  std::vector<AnovaRow> rows;  // intercept, main effects, interaction, residual
  bool robust = false;
  std::vector<std::string> warnings;

  const AnovaRow& row(std::string_view effect) const;
  const AnovaRow& residual() const { return rows.back(); }
};

/// Per effect block of width q:
///   sum_sq = RSS(model without the block) - RSS(full model)
///   F      = (Rb)' (R V R')^-1 (Rb) / q
/// with V the HC3 covariance when `robust`, sigma^2 (X'X)^-1 otherwise, and
/// p the upper tail of F(q, residual df). Requires sum-to-zero coding.
AnovaTable type3_anova(const DesignMatrix& x, const Eigen::VectorXd& y, bool robust);

/// Same, reusing an existing fit of y on x.
AnovaTable type3_anova(const DesignMatrix& x, const Eigen::VectorXd& y, const LinearModelFit& fit, bool robust);

/// Upper tail P(F > f) of the F(df1, df2) distribution.
double f_p_value(double f, double df1, double df2);

/// alpha / k truncated to four decimals (0.05 / 32 -> 0.0015). Should the
/// truncation reach zero the exact quotient is returned instead.
double bonferroni_alpha(double alpha, int k);

struct EffectDecision {
  std::string effect;
  double p = 1.0;
  bool significant = false;
};

struct LevelComparison {
  std::string factor;
  std::string level_a;
  std::string level_b;
  double mean_difference = 0.0;  // marginal(level_a) - marginal(level_b)
  double p = 1.0;
  bool significant = false;
};

struct PosthocResult {
  double corrected_alpha = 0.0;
  std::vector<EffectDecision> effects;
  std::vector<LevelComparison> comparisons;
};

/// Flags each main effect whose p is below bonferroni_alpha(alpha, k).
PosthocResult posthoc_factor_effects(const AnovaTable& table, double alpha, int k);

/// Pairwise comparisons of factor-level marginal means (model-based, i.e.
/// the difference of sum-to-zero effects), each a one-degree-of-freedom Wald
/// test using the HC3 covariance, judged at bonferroni_alpha(alpha, k).
std::vector<LevelComparison> marginal_comparisons(const FactorialDesign& design, const DesignMatrix& x,
                                                  const LinearModelFit& fit, double alpha, int k);

struct QuantilePoint {
  double theoretical = 0.0;  // standard normal quantile of (i - 0.5) / n
  double standardized = 0.0;
};

/// Sorted residuals divided by sqrt(rss / residual_df), paired with normal
/// quantiles. Throws NumericError when the residual variance is zero.
std::vector<QuantilePoint> residual_quantiles(const LinearModelFit& fit);

/// CSV with columns `effect,sum_sq,df,F,p`.
void write_anova_csv(std::ostream& out, const AnovaTable& table);

/// Fixed-width text table with p in two-decimal scientific notation.
void write_anova_text(std::ostream& out, const AnovaTable& table, std::string_view title);

void write_posthoc_text(std::ostream& out, const PosthocResult& posthoc);

}  // namespace curriculab
