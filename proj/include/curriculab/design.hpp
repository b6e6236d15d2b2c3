#pragma once

// Game titles as factorial designs: factor specs, the mapping between
// (difficulty switch, game mode) identifiers and factor-level assignments,
// and sum-to-zero coded model matrices for ANOVA.

#include <compare>
#include <cstddef>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace curriculab {

struct FactorSpec {
  std::string name;
  std::vector<std::string> levels;  // levels[0] is the default

  std::size_t level_count() const { return levels.size(); }
};

/// A game variant in the X_YZ convention: X is the difficulty switch and YZ
/// the game-mode code as used by the emulator (not necessarily contiguous).
struct VariantId {
  int difficulty_bit = 0;
  int mode_code = 0;

  /// "X_YZ" with the mode zero-padded to two digits.
  std::string label() const;

  /// Parses "X_YZ"; throws ParseError on malformed text. Validity against a
  /// design is checked separately.
  static VariantId parse(std::string_view text);

  auto operator<=>(const VariantId&) const = default;
};

struct FactorLevels {
  std::vector<int> assignment;  // one level index per factor, design order

  bool operator==(const FactorLevels&) const = default;
};

/// How variant labels in external files are to be read. `mode_code` is the
/// native X_YZ convention; `mode_ordinal` reads YZ as the position of the
/// mode within the title's mode list (some published tables number Breakout
/// modes 00..11 instead of 00, 04, ..., 44).
enum class LabelScheme { mode_code, mode_ordinal };

class FactorialDesign {
 public:
  struct Variant {
    VariantId id;
    FactorLevels levels;
  };

  /// Validates the factor specs and the mode map (must be a bijection onto
  /// the full factorial). Variants are stored difficulty-major, mode-ascending.
  FactorialDesign(std::string title, std::vector<FactorSpec> factors, std::vector<Variant> variants);

  /// A full factorial with difficulty bit 0 and mode code = cell index.
  /// Used for synthetic designs that are not game titles.
  static FactorialDesign full_factorial(std::string title, std::vector<FactorSpec> factors);

  const std::string& title() const { return title_; }
  const std::vector<FactorSpec>& factors() const { return factors_; }
  const std::vector<Variant>& variants() const { return variants_; }
  std::size_t variant_count() const { return variants_.size(); }
  std::size_t cell_count() const;

  std::optional<std::size_t> index_of(VariantId id) const;
  bool contains(VariantId id) const { return index_of(id).has_value(); }

  /// Mixed-radix cell number of an assignment (first factor most significant).
  std::size_t cell_of(const FactorLevels& levels) const;

  /// Resolves a label under the given scheme; throws InvalidVariant.
  VariantId resolve_label(std::string_view label, LabelScheme scheme = LabelScheme::mode_code) const;

 private:
  std::string title_;
  std::vector<FactorSpec> factors_;
  std::vector<Variant> variants_;
  std::vector<std::size_t> variant_by_cell_;
};

/// Known titles: SpaceInvaders, Breakout, Freeway, MiniFreeway.
std::vector<std::string> known_titles();

/// Loads a bundled design; throws Error naming the known titles otherwise.
FactorialDesign load_design(std::string_view title);

/// Reads the design text format:
///   title,factor,levels
///   <title>,<factor name>,<level>;<level>;...
///   difficulty_bit,mode_code,<factor name>,...
///   <bit>,<code>,<level label>,...
FactorialDesign parse_design(std::istream& in);

/// Writes the same format parse_design reads.
void write_design(std::ostream& out, const FactorialDesign& design);

FactorLevels decode_variant(const FactorialDesign& design, VariantId id);
VariantId encode_variant(const FactorialDesign& design, const FactorLevels& levels);

/// All variants, difficulty-major then mode-ascending.
std::vector<VariantId> enumerate_variants(const FactorialDesign& design);

// ---------------------------------------------------------------------------
// Model matrices

enum class Coding { sum_to_zero, treatment };

enum class EffectKind { intercept, main, interaction };

struct EffectBlock {
  std::string name;
  EffectKind kind = EffectKind::main;
  std::size_t first_column = 0;
  std::size_t width = 0;
  std::optional<std::size_t> factor;  // set for main effects
};

struct Observation {
  VariantId variant;
  double score = 0.0;
};

/// Columns: intercept, then (levels - 1) contrast columns per factor in design
/// order, then one lumped block holding every interaction contrast of order
/// two and higher. The blocks partition all columns.
struct DesignMatrix {
  Eigen::MatrixXd x;
  std::vector<EffectBlock> blocks;  // blocks[0] is the intercept
  std::vector<std::string> column_names;
  Coding coding = Coding::sum_to_zero;
  std::vector<std::size_t> cell_of_row;  // design cell of each observation

  std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(x.cols()); }
  const EffectBlock& block(std::string_view name) const;
};

/// Contrast row for one level of a factor with `level_count` levels.
/// Sum-to-zero: e_j for j < L-1, all -1 for the last level. Treatment: e_{j-1}
/// for j > 0, zero for the default level.
std::vector<double> contrast_row(std::size_t level, std::size_t level_count, Coding coding);

DesignMatrix build_model_matrix(const FactorialDesign& design, std::span<const Observation> observations,
                                Coding coding = Coding::sum_to_zero);

Eigen::VectorXd response_vector(std::span<const Observation> observations);

/// True when every design cell holds the same, non-zero number of rows.
bool is_balanced(const FactorialDesign& design, std::span<const Observation> observations);

}  // namespace curriculab
