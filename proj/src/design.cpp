#include "curriculab/design.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <sstream>

#include "curriculab/bundled.hpp"
#include "curriculab/error.hpp"
#include "curriculab/text_io.hpp"

namespace curriculab {

std::string VariantId::label() const {
  std::string mode = std::to_string(mode_code);
  if (mode.size() < 2) mode.insert(0, 2 - mode.size(), '0');
  return std::to_string(difficulty_bit) + "_" + mode;
}

VariantId VariantId::parse(std::string_view text) {
  const std::string original(text);
  text = trim(text);
  const auto underscore = text.find('_');
  if (underscore == std::string_view::npos || underscore == 0 || underscore + 1 >= text.size())
    throw ParseError("malformed variant label '" + original + "' (expected X_YZ)", 0);
  auto parse_int = [&](std::string_view part) {
    int value = -1;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (ec != std::errc() || ptr != part.data() + part.size() || value < 0)
      throw ParseError("malformed variant label '" + original + "' (expected X_YZ)", 0);
    return value;
  };
  VariantId id{parse_int(text.substr(0, underscore)), parse_int(text.substr(underscore + 1))};
  if (id.difficulty_bit > 1) throw ParseError("difficulty bit must be 0 or 1 in '" + original + "'", 0);
  return id;
}

// ---------------------------------------------------------------------------

FactorialDesign::FactorialDesign(std::string title, std::vector<FactorSpec> factors, std::vector<Variant> variants)
    : title_(std::move(title)), factors_(std::move(factors)), variants_(std::move(variants)) {
  if (factors_.empty()) throw Error("design '" + title_ + "' has no factors");
  for (const auto& f : factors_) {
    if (f.name.empty()) throw Error("design '" + title_ + "' has an unnamed factor");
    if (f.levels.size() < 2) throw Error("factor '" + f.name + "' needs at least two levels");
    std::set<std::string> unique(f.levels.begin(), f.levels.end());
    if (unique.size() != f.levels.size() || unique.count(""))
      throw Error("factor '" + f.name + "' has empty or repeated levels");
  }
  const std::size_t cells = cell_count();
  if (variants_.size() != cells)
    throw Error("design '" + title_ + "' lists " + std::to_string(variants_.size()) + " variants but has " +
                std::to_string(cells) + " cells");

  std::sort(variants_.begin(), variants_.end(), [](const Variant& a, const Variant& b) { return a.id < b.id; });
  variant_by_cell_.assign(cells, cells);
  for (std::size_t i = 0; i < variants_.size(); ++i) {
    const auto& v = variants_[i];
    if (i > 0 && variants_[i - 1].id == v.id) throw Error("variant " + v.id.label() + " listed twice");
    if (v.levels.assignment.size() != factors_.size())
      throw Error("variant " + v.id.label() + " has the wrong number of levels");
    for (std::size_t f = 0; f < factors_.size(); ++f) {
      const int level = v.levels.assignment[f];
      if (level < 0 || static_cast<std::size_t>(level) >= factors_[f].levels.size())
        throw Error("variant " + v.id.label() + " has an invalid level for " + factors_[f].name);
    }
    const std::size_t cell = cell_of(v.levels);
    if (variant_by_cell_[cell] != cells) throw Error("variants share a factor-level assignment: " + v.id.label());
    variant_by_cell_[cell] = i;
  }
}

FactorialDesign FactorialDesign::full_factorial(std::string title, std::vector<FactorSpec> factors) {
  std::size_t cells = 1;
  for (const auto& f : factors) cells *= f.levels.size();
  std::vector<Variant> variants;
  for (std::size_t c = 0; c < cells; ++c) {
    FactorLevels levels;
    levels.assignment.resize(factors.size());
    std::size_t rest = c;
    for (std::size_t f = factors.size(); f-- > 0;) {
      levels.assignment[f] = static_cast<int>(rest % factors[f].levels.size());
      rest /= factors[f].levels.size();
    }
    variants.push_back({{0, static_cast<int>(c)}, levels});
  }
  return FactorialDesign(std::move(title), std::move(factors), std::move(variants));
}

std::size_t FactorialDesign::cell_count() const {
  std::size_t cells = 1;
  for (const auto& f : factors_) cells *= f.levels.size();
  return cells;
}

std::optional<std::size_t> FactorialDesign::index_of(VariantId id) const {
  auto it = std::lower_bound(variants_.begin(), variants_.end(), id,
                             [](const Variant& v, const VariantId& key) { return v.id < key; });
  if (it == variants_.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - variants_.begin());
}

std::size_t FactorialDesign::cell_of(const FactorLevels& levels) const {
  if (levels.assignment.size() != factors_.size())
    throw InvalidVariant("expected " + std::to_string(factors_.size()) + " factor levels");
  std::size_t cell = 0;
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    const int level = levels.assignment[f];
    if (level < 0 || static_cast<std::size_t>(level) >= factors_[f].levels.size())
      throw InvalidVariant("level " + std::to_string(level) + " out of range for factor " + factors_[f].name);
    cell = cell * factors_[f].levels.size() + static_cast<std::size_t>(level);
  }
  return cell;
}

VariantId FactorialDesign::resolve_label(std::string_view label, LabelScheme scheme) const {
  VariantId id;
  try {
    id = VariantId::parse(label);
  } catch (const ParseError& e) {
    throw InvalidVariant(e.what());
  }
  if (scheme == LabelScheme::mode_ordinal) {
    std::vector<int> modes;
    for (const auto& v : variants_)
      if (v.id.difficulty_bit == id.difficulty_bit) modes.push_back(v.id.mode_code);
    if (id.mode_code >= static_cast<int>(modes.size()))
      throw InvalidVariant("mode ordinal " + std::to_string(id.mode_code) + " out of range for " + title_);
    id.mode_code = modes[static_cast<std::size_t>(id.mode_code)];
  }
  if (!contains(id)) throw InvalidVariant("variant " + std::string(label) + " is not part of " + title_);
  return id;
}

// ---------------------------------------------------------------------------

namespace {

const std::map<std::string, std::string, std::less<>>& title_files() {
  static const std::map<std::string, std::string, std::less<>> files = {
      {"SpaceInvaders", "designs/space_invaders.csv"},
      {"Breakout", "designs/breakout.csv"},
      {"Freeway", "designs/freeway.csv"},
      {"MiniFreeway", "designs/mini_freeway.csv"},
  };
  return files;
}

}  // namespace

std::vector<std::string> known_titles() { return {"SpaceInvaders", "Breakout", "Freeway", "MiniFreeway"}; }

FactorialDesign load_design(std::string_view title) {
  auto it = title_files().find(title);
  if (it == title_files().end()) {
    std::string known;
    for (const auto& t : known_titles()) known += (known.empty() ? "" : ", ") + t;
    throw Error("unknown title '" + std::string(title) + "'; known titles: " + known);
  }
  std::istringstream in{std::string(bundled_file(it->second))};
  return parse_design(in);
}

FactorialDesign parse_design(std::istream& in) {
  const auto rows = read_csv_rows(in);
  if (rows.empty()) throw ParseError("empty design file", 0);
  if (rows[0].fields != std::vector<std::string>{"title", "factor", "levels"})
    throw ParseError("expected header 'title,factor,levels'", rows[0].line);

  std::string title;
  std::vector<FactorSpec> factors;
  std::size_t r = 1;
  for (; r < rows.size() && rows[r].fields.size() == 3 && rows[r].fields[0] != "difficulty_bit"; ++r) {
    const auto& f = rows[r].fields;
    if (title.empty()) title = f[0];
    if (f[0] != title) throw ParseError("title '" + f[0] + "' differs from '" + title + "'", rows[r].line);
    FactorSpec spec{f[1], {}};
    std::string_view levels = f[2];
    while (true) {
      const auto semi = levels.find(';');
      spec.levels.emplace_back(trim(levels.substr(0, semi)));
      if (semi == std::string_view::npos) break;
      levels.remove_prefix(semi + 1);
    }
    factors.push_back(std::move(spec));
  }
  if (factors.empty()) throw ParseError("no factor lines", rows[0].line);
  if (r >= rows.size()) throw ParseError("missing variant table", rows.back().line);

  const auto& header = rows[r].fields;
  if (header.size() != factors.size() + 2 || header[0] != "difficulty_bit" || header[1] != "mode_code")
    throw ParseError("expected 'difficulty_bit,mode_code' followed by the factor names", rows[r].line);
  for (std::size_t f = 0; f < factors.size(); ++f)
    if (header[f + 2] != factors[f].name)
      throw ParseError("column '" + header[f + 2] + "' does not match factor '" + factors[f].name + "'",
                       rows[r].line);

  std::vector<FactorialDesign::Variant> variants;
  for (++r; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields", row.line);
    VariantId id;
    try {
      id = VariantId::parse(row.fields[0] + "_" + row.fields[1]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), row.line);
    }
    FactorLevels levels;
    for (std::size_t f = 0; f < factors.size(); ++f) {
      const auto& names = factors[f].levels;
      auto it = std::find(names.begin(), names.end(), row.fields[f + 2]);
      if (it == names.end())
        throw ParseError("unknown level '" + row.fields[f + 2] + "' for factor " + factors[f].name, row.line);
      levels.assignment.push_back(static_cast<int>(it - names.begin()));
    }
    variants.push_back({id, std::move(levels)});
  }
  try {
    return FactorialDesign(title, std::move(factors), std::move(variants));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what(), 0);
  }
}

void write_design(std::ostream& out, const FactorialDesign& design) {
  out << "title,factor,levels\n";
  for (const auto& f : design.factors()) {
    out << design.title() << ',' << f.name << ',';
    for (std::size_t l = 0; l < f.levels.size(); ++l) out << (l ? ";" : "") << f.levels[l];
    out << '\n';
  }
  out << "difficulty_bit,mode_code";
  for (const auto& f : design.factors()) out << ',' << f.name;
  out << '\n';
  for (const auto& v : design.variants()) {
    out << v.id.difficulty_bit << ',' << v.id.mode_code;
    for (std::size_t f = 0; f < design.factors().size(); ++f)
      out << ',' << design.factors()[f].levels[static_cast<std::size_t>(v.levels.assignment[f])];
    out << '\n';
  }
}

FactorLevels decode_variant(const FactorialDesign& design, VariantId id) {
  const auto index = design.index_of(id);
  if (!index) throw InvalidVariant("variant " + id.label() + " is not part of " + design.title());
  return design.variants()[*index].levels;
}

VariantId encode_variant(const FactorialDesign& design, const FactorLevels& levels) {
  design.cell_of(levels);  // validates
  for (const auto& v : design.variants())
    if (v.levels == levels) return v.id;
  throw InvalidVariant("no variant for the given levels");  // unreachable for a valid design
}

std::vector<VariantId> enumerate_variants(const FactorialDesign& design) {
  std::vector<VariantId> ids;
  for (const auto& v : design.variants()) ids.push_back(v.id);
  return ids;
}

// ---------------------------------------------------------------------------

const EffectBlock& DesignMatrix::block(std::string_view name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw Error("no effect block named '" + std::string(name) + "'");
}

std::vector<double> contrast_row(std::size_t level, std::size_t level_count, Coding coding) {
  if (level >= level_count) throw InvalidVariant("level index out of range");
  std::vector<double> row(level_count - 1, 0.0);
  if (coding == Coding::sum_to_zero) {
    if (level + 1 == level_count)
      std::fill(row.begin(), row.end(), -1.0);
    else
      row[level] = 1.0;
  } else if (level > 0) {
    row[level - 1] = 1.0;
  }
  return row;
}

DesignMatrix build_model_matrix(const FactorialDesign& design, std::span<const Observation> observations,
                                Coding coding) {
  if (observations.empty()) throw Error("no observations to build a model matrix from");
  const auto& factors = design.factors();
  const std::size_t k = factors.size();

  // Interaction terms: every subset of two or more factors, by size then
  // lexicographically.
  std::vector<std::vector<std::size_t>> subsets;
  for (std::size_t size = 2; size <= k; ++size) {
    for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
      if (static_cast<std::size_t>(__builtin_popcountll(mask)) != size) continue;
      std::vector<std::size_t> s;
      for (std::size_t f = 0; f < k; ++f)
        if (mask & (std::size_t{1} << f)) s.push_back(f);
      subsets.push_back(std::move(s));
    }
  }
  std::sort(subsets.begin(), subsets.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });

  DesignMatrix m;
  m.coding = coding;
  m.blocks.push_back({"Intercept", EffectKind::intercept, 0, 1, std::nullopt});
  m.column_names.push_back("Intercept");
  std::size_t column = 1;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t width = factors[f].levels.size() - 1;
    m.blocks.push_back({factors[f].name, EffectKind::main, column, width, f});
    for (std::size_t j = 0; j < width; ++j) m.column_names.push_back(factors[f].name + "[" + std::to_string(j) + "]");
    column += width;
  }
  std::size_t interaction_width = 0;
  for (const auto& s : subsets) {
    std::size_t width = 1;
    for (auto f : s) width *= factors[f].levels.size() - 1;
    for (std::size_t c = 0; c < width; ++c) {
      std::string name;
      std::size_t rest = c;
      std::vector<std::size_t> idx(s.size());
      for (std::size_t i = s.size(); i-- > 0;) {
        idx[i] = rest % (factors[s[i]].levels.size() - 1);
        rest /= factors[s[i]].levels.size() - 1;
      }
      for (std::size_t i = 0; i < s.size(); ++i)
        name += (i ? ":" : "") + factors[s[i]].name + "[" + std::to_string(idx[i]) + "]";
      m.column_names.push_back(name);
    }
    interaction_width += width;
  }
  if (interaction_width > 0) m.blocks.push_back({"Interaction", EffectKind::interaction, column, interaction_width, {}});
  const std::size_t cols = column + interaction_width;

  m.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(observations.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < observations.size(); ++r) {
    const auto levels = decode_variant(design, observations[r].variant);
    m.cell_of_row.push_back(design.cell_of(levels));
    std::vector<std::vector<double>> contrasts(k);
    for (std::size_t f = 0; f < k; ++f)
      contrasts[f] = contrast_row(static_cast<std::size_t>(levels.assignment[f]), factors[f].levels.size(), coding);
    const auto row = static_cast<Eigen::Index>(r);
    m.x(row, 0) = 1.0;
    for (std::size_t f = 0; f < k; ++f) {
      const auto& b = m.blocks[f + 1];
      for (std::size_t j = 0; j < b.width; ++j) m.x(row, static_cast<Eigen::Index>(b.first_column + j)) = contrasts[f][j];
    }
    std::size_t c = column;
    for (const auto& s : subsets) {
      std::size_t width = 1;
      for (auto f : s) width *= factors[f].levels.size() - 1;
      for (std::size_t w = 0; w < width; ++w) {
        double product = 1.0;
        std::size_t rest = w;
        for (std::size_t i = s.size(); i-- > 0;) {
          const std::size_t radix = factors[s[i]].levels.size() - 1;
          product *= contrasts[s[i]][rest % radix];
          rest /= radix;
        }
        m.x(row, static_cast<Eigen::Index>(c++)) = product;
      }
    }
  }
  return m;
}

Eigen::VectorXd response_vector(std::span<const Observation> observations) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(observations.size()));
  for (std::size_t i = 0; i < observations.size(); ++i) y(static_cast<Eigen::Index>(i)) = observations[i].score;
  return y;
}

bool is_balanced(const FactorialDesign& design, std::span<const Observation> observations) {
  std::vector<std::size_t> counts(design.cell_count(), 0);
  for (const auto& o : observations) ++counts[design.cell_of(decode_variant(design, o.variant))];
  return counts.front() > 0 && std::all_of(counts.begin(), counts.end(), [&](auto c) { return c == counts.front(); });
}

}  // namespace curriculab
