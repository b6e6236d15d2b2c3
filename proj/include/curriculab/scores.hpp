#pragma once

// Score tables, variant-expert normalisation, transfer matrices and
// source-selection strategy summaries.

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curriculab/design.hpp"

namespace curriculab {

enum class ScoreKindType { expert, zero_shot, finetuned, scratch };

struct ScoreKind {
  ScoreKindType type = ScoreKindType::expert;
  std::optional<VariantId> source;  // zero_shot / finetuned only

  static ScoreKind expert() { return {ScoreKindType::expert, std::nullopt}; }
  static ScoreKind zero_shot_from(VariantId s) { return {ScoreKindType::zero_shot, s}; }
  static ScoreKind finetuned_from(VariantId s) { return {ScoreKindType::finetuned, s}; }
  static ScoreKind scratch() { return {ScoreKindType::scratch, std::nullopt}; }

  /// "expert", "zero_shot:0_00", "finetuned:0_00", "scratch".
  std::string to_string() const;
  static ScoreKind parse(std::string_view text);

  bool operator==(const ScoreKind&) const = default;
};

class ScoreTable {
 public:
  ScoreTable(std::string title, ScoreKind kind) : title_(std::move(title)), kind_(kind) {}

  const std::string& title() const { return title_; }
  const ScoreKind& kind() const { return kind_; }
  const std::map<VariantId, std::vector<double>>& entries() const { return entries_; }

  /// Appends scores for a variant; scores must be finite.
  void add(VariantId variant, std::span<const double> scores);
  void add(VariantId variant, double score) { add(variant, std::span<const double>(&score, 1)); }

  bool contains(VariantId variant) const { return entries_.count(variant) != 0; }
  const std::vector<double>& scores(VariantId variant) const;

  /// Arithmetic mean of a variant's scores, summed in insertion order.
  double mean(VariantId variant) const;

  /// Flattened (variant, score) pairs in variant order.
  std::vector<Observation> observations() const;

 private:
  std::string title_;
  ScoreKind kind_;
  std::map<VariantId, std::vector<double>> entries_;
};

/// Parses `variant,score[,score...]`. Cells reading "n/a" are preserved as
/// absent; a row with only n/a cells leaves the variant out. Throws ParseError
/// with the offending line for unknown labels, malformed numbers, duplicate
/// variants, and empty input.
ScoreTable ingest_score_table(std::istream& in, const FactorialDesign& design, ScoreKind kind,
                              LabelScheme labels = LabelScheme::mode_code);

/// Canonical CSV: header `variant,score[,score...]`, variants in design order,
/// shortest round-trip decimal representation.
void write_score_table(std::ostream& out, const FactorialDesign& design, const ScoreTable& table);

/// 100 * raw / expert. Throws NumericError when expert == 0.
double normalize_score(double raw, double expert);

// ---------------------------------------------------------------------------

using Grid = std::vector<std::vector<std::optional<double>>>;  // [target][source]

struct TransferMatrix {
  std::string title;
  std::vector<VariantId> sources;
  std::vector<VariantId> targets;
  Grid raw;
  Grid normalized;

  std::optional<std::size_t> source_index(VariantId v) const;
  std::optional<std::size_t> target_index(VariantId v) const;
  std::optional<double> normalized_at(VariantId target, VariantId source) const;
};

/// evaluations[s] holds the scores of source s's policy on each target.
/// Targets are every variant evaluated by some source, in design order.
/// Throws Error on title mismatch or when a target has no expert score.
TransferMatrix build_transfer_matrix(const FactorialDesign& design, const ScoreTable& expert,
                                     const std::map<VariantId, ScoreTable>& evaluations);

/// Splits a raw grid into one zero-shot table per source column.
std::map<VariantId, ScoreTable> evaluations_from_grid(const std::string& title, std::span<const VariantId> sources,
                                                      std::span<const VariantId> targets, const Grid& grid);

/// Fills variants absent from `into` with the scores `from` holds.
void fill_missing(ScoreTable& into, const ScoreTable& from);

enum class GridKind { raw, normalized };

/// Transfer-matrix CSV: first row `target,<source labels...>`, then one row
/// per target; cells are numbers or `n/a`.
void write_transfer_grid(std::ostream& out, const TransferMatrix& matrix, GridKind kind);

/// Reads a grid written by write_transfer_grid (or transcribed by hand) into
/// the raw or normalized slot of a matrix; the other slot stays empty.
TransferMatrix read_transfer_grid(std::istream& in, const FactorialDesign& design, GridKind kind,
                                  LabelScheme labels = LabelScheme::mode_code);

// ---------------------------------------------------------------------------

enum class Strategy { default_source, random, top3, best };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view text);

struct StrategySummary {
  Strategy strategy = Strategy::default_source;
  std::vector<std::pair<VariantId, double>> per_target;  // normalized %, target order
  double median = 0.0;
  double lower_quartile = 0.0;
  double upper_quartile = 0.0;
};

/// Per target t, over defined normalized cells with source s != t:
///   default: cell (t, 0_00), targets other than 0_00 only
///   best:    max;  top3: mean of the three largest;  random: mean of all.
/// Quartiles use linear interpolation between order statistics.
/// Throws Error when top3 lacks three defined sources for some target, or the
/// matrix has no 0_00 source.
StrategySummary strategy_eval(const TransferMatrix& matrix, Strategy strategy);

/// Quantile of sorted data by linear interpolation (q in [0, 1]).
double interpolated_quantile(std::span<const double> sorted, double q);

// ---------------------------------------------------------------------------

struct GridRun {
  std::string config;
  double score = 0.0;
};

struct TopK {
  std::vector<double> scores;       // descending
  std::vector<std::size_t> picked;  // indices into the input runs
  bool fewer_than_k = false;
};

/// The k largest final scores; ties keep input order.
TopK select_top_k(std::span<const GridRun> runs, std::size_t k = 3);

}  // namespace curriculab
