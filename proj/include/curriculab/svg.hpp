#pragma once

// Static SVG figures: transfer heatmaps, strategy box plots and residual
// quantile plots. Output is self-contained XML with no external references.

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "curriculab/anova.hpp"
#include "curriculab/scores.hpp"

namespace curriculab {

/// Diverging colour for a normalized score: white at 100, red below, blue
/// above, saturating at 0 and 200. Returned as "#rrggbb".
std::string diverging_color(double normalized);

void write_heatmap_svg(std::ostream& out, const TransferMatrix& matrix);

void write_boxplot_svg(std::ostream& out, std::string_view title, const std::vector<StrategySummary>& summaries);

void write_quantile_svg(std::ostream& out, std::string_view title, const std::vector<QuantilePoint>& points);

/// Escapes &, <, >, " and ' for XML text and attributes.
std::string xml_escape(std::string_view text);

}  // namespace curriculab
