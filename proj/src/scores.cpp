#include "curriculab/scores.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "curriculab/error.hpp"
#include "curriculab/text_io.hpp"

namespace curriculab {

std::string ScoreKind::to_string() const {
  switch (type) {
    case ScoreKindType::expert:
      return "expert";
    case ScoreKindType::scratch:
      return "scratch";
    case ScoreKindType::zero_shot:
      return "zero_shot:" + (source ? source->label() : std::string("?"));
    case ScoreKindType::finetuned:
      return "finetuned:" + (source ? source->label() : std::string("?"));
  }
  return "?";
}

ScoreKind ScoreKind::parse(std::string_view text) {
  text = trim(text);
  if (text == "expert") return expert();
  if (text == "scratch") return scratch();
  const auto colon = text.find(':');
  if (colon != std::string_view::npos) {
    const auto head = text.substr(0, colon);
    const auto source = VariantId::parse(text.substr(colon + 1));
    if (head == "zero_shot") return zero_shot_from(source);
    if (head == "finetuned") return finetuned_from(source);
  }
  throw ParseError("unknown score kind '" + std::string(text) +
                       "' (expected expert, scratch, zero_shot:X_YZ or finetuned:X_YZ)",
                   0);
}

void ScoreTable::add(VariantId variant, std::span<const double> scores) {
  for (double s : scores)
    if (!std::isfinite(s)) throw NumericError("non-finite score for " + variant.label());
  auto& v = entries_[variant];
  v.insert(v.end(), scores.begin(), scores.end());
}

const std::vector<double>& ScoreTable::scores(VariantId variant) const {
  auto it = entries_.find(variant);
  if (it == entries_.end()) throw InvalidVariant(title_ + " " + kind_.to_string() + " has no scores for " + variant.label());
  return it->second;
}

double ScoreTable::mean(VariantId variant) const {
  const auto& s = scores(variant);
  if (s.empty()) throw NumericError("no scores for " + variant.label());
  double sum = 0.0;
  for (double x : s) sum += x;
  return sum / static_cast<double>(s.size());
}

std::vector<Observation> ScoreTable::observations() const {
  std::vector<Observation> out;
  for (const auto& [variant, scores] : entries_)
    for (double s : scores) out.push_back({variant, s});
  return out;
}

ScoreTable ingest_score_table(std::istream& in, const FactorialDesign& design, ScoreKind kind, LabelScheme labels) {
  const auto rows = read_csv_rows(in);
  if (rows.empty()) throw ParseError("empty score table", 0);
  ScoreTable table(design.title(), kind);
  std::size_t r = 0;
  if (!rows[0].fields.empty() && rows[0].fields[0] == "variant") r = 1;
  if (r == rows.size()) throw ParseError("score table has a header but no rows", rows[0].line);
  for (; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() < 2) throw ParseError("expected 'variant,score[,score...]'", row.line);
    VariantId id;
    try {
      id = design.resolve_label(row.fields[0], labels);
    } catch (const InvalidVariant& e) {
      throw ParseError(e.what(), row.line);
    }
    if (table.contains(id)) throw ParseError("duplicate variant " + id.label(), row.line);
    std::vector<double> scores;
    for (std::size_t c = 1; c < row.fields.size(); ++c) {
      if (row.fields[c] == "n/a") continue;
      const auto value = parse_double(row.fields[c]);
      if (!value) throw ParseError("malformed score '" + row.fields[c] + "'", row.line);
      scores.push_back(*value);
    }
    if (!scores.empty()) table.add(id, scores);
  }
  return table;
}

void write_score_table(std::ostream& out, const FactorialDesign& design, const ScoreTable& table) {
  std::size_t width = 0;
  for (const auto& [v, s] : table.entries()) width = std::max(width, s.size());
  out << "variant";
  if (width <= 1) {
    out << ",score";
  } else {
    for (std::size_t i = 1; i <= width; ++i) out << ",score_" << i;
  }
  out << '\n';
  for (const auto& id : enumerate_variants(design)) {
    if (!table.contains(id)) continue;
    out << id.label();
    const auto& s = table.scores(id);
    for (std::size_t i = 0; i < width; ++i) out << ',' << (i < s.size() ? format_double(s[i]) : "n/a");
    out << '\n';
  }
}

double normalize_score(double raw, double expert) {
  if (expert == 0.0) throw NumericError("cannot normalise by an expert score of zero");
  return 100.0 * raw / expert;
}

// ---------------------------------------------------------------------------

namespace {

std::optional<std::size_t> find_index(const std::vector<VariantId>& ids, VariantId v) {
  auto it = std::find(ids.begin(), ids.end(), v);
  if (it == ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

}  // namespace

std::optional<std::size_t> TransferMatrix::source_index(VariantId v) const { return find_index(sources, v); }
std::optional<std::size_t> TransferMatrix::target_index(VariantId v) const { return find_index(targets, v); }

std::optional<double> TransferMatrix::normalized_at(VariantId target, VariantId source) const {
  const auto t = target_index(target);
  const auto s = source_index(source);
  if (!t || !s || normalized.empty()) return std::nullopt;
  return normalized[*t][*s];
}

TransferMatrix build_transfer_matrix(const FactorialDesign& design, const ScoreTable& expert,
                                     const std::map<VariantId, ScoreTable>& evaluations) {
  if (expert.title() != design.title())
    throw Error("expert table is for " + expert.title() + ", design is " + design.title());
  TransferMatrix m;
  m.title = design.title();
  std::set<VariantId> targets;
  for (const auto& [source, table] : evaluations) {
    if (!design.contains(source)) throw InvalidVariant("source " + source.label() + " is not part of " + design.title());
    if (table.title() != design.title())
      throw Error("evaluations of " + source.label() + " are for " + table.title() + ", design is " + design.title());
    m.sources.push_back(source);
    for (const auto& [target, scores] : table.entries()) targets.insert(target);
  }
  m.targets.assign(targets.begin(), targets.end());
  for (auto t : m.targets)
    if (!expert.contains(t)) throw Error("missing expert score for target " + t.label());

  m.raw.assign(m.targets.size(), std::vector<std::optional<double>>(m.sources.size()));
  m.normalized = m.raw;
  for (std::size_t s = 0; s < m.sources.size(); ++s) {
    const auto& table = evaluations.at(m.sources[s]);
    for (std::size_t t = 0; t < m.targets.size(); ++t) {
      if (!table.contains(m.targets[t])) continue;
      const double raw = table.mean(m.targets[t]);
      m.raw[t][s] = raw;
      m.normalized[t][s] = normalize_score(raw, expert.mean(m.targets[t]));
    }
  }
  return m;
}

std::map<VariantId, ScoreTable> evaluations_from_grid(const std::string& title, std::span<const VariantId> sources,
                                                      std::span<const VariantId> targets, const Grid& grid) {
  std::map<VariantId, ScoreTable> out;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    ScoreTable table(title, ScoreKind::zero_shot_from(sources[s]));
    for (std::size_t t = 0; t < targets.size(); ++t)
      if (t < grid.size() && s < grid[t].size() && grid[t][s]) table.add(targets[t], *grid[t][s]);
    out.emplace(sources[s], std::move(table));
  }
  return out;
}

void fill_missing(ScoreTable& into, const ScoreTable& from) {
  for (const auto& [variant, scores] : from.entries())
    if (!into.contains(variant)) into.add(variant, scores);
}

void write_transfer_grid(std::ostream& out, const TransferMatrix& matrix, GridKind kind) {
  const Grid& grid = kind == GridKind::raw ? matrix.raw : matrix.normalized;
  out << "target";
  for (auto s : matrix.sources) out << ',' << s.label();
  out << '\n';
  for (std::size_t t = 0; t < matrix.targets.size(); ++t) {
    out << matrix.targets[t].label();
    for (std::size_t s = 0; s < matrix.sources.size(); ++s) {
      const auto& cell = t < grid.size() && s < grid[t].size() ? grid[t][s] : std::nullopt;
      out << ',' << (cell ? format_double(*cell) : "n/a");
    }
    out << '\n';
  }
}

TransferMatrix read_transfer_grid(std::istream& in, const FactorialDesign& design, GridKind kind, LabelScheme labels) {
  const auto rows = read_csv_rows(in);
  if (rows.empty()) throw ParseError("empty transfer grid", 0);
  const auto& header = rows[0].fields;
  if (header.size() < 2 || header[0] != "target")
    throw ParseError("expected header 'target,<source labels>'", rows[0].line);
  TransferMatrix m;
  m.title = design.title();
  for (std::size_t c = 1; c < header.size(); ++c) {
    try {
      const auto id = design.resolve_label(header[c], labels);
      if (m.source_index(id)) throw ParseError("duplicate source " + id.label(), rows[0].line);
      m.sources.push_back(id);
    } catch (const InvalidVariant& e) {
      throw ParseError(e.what(), rows[0].line);
    }
  }
  Grid grid;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields", row.line);
    VariantId id;
    try {
      id = design.resolve_label(row.fields[0], labels);
    } catch (const InvalidVariant& e) {
      throw ParseError(e.what(), row.line);
    }
    if (m.target_index(id)) throw ParseError("duplicate target " + id.label(), row.line);
    m.targets.push_back(id);
    std::vector<std::optional<double>> cells;
    for (std::size_t c = 1; c < row.fields.size(); ++c) {
      if (row.fields[c] == "n/a") {
        cells.emplace_back();
        continue;
      }
      const auto value = parse_double(row.fields[c]);
      if (!value) throw ParseError("malformed cell '" + row.fields[c] + "'", row.line);
      cells.emplace_back(*value);
    }
    grid.push_back(std::move(cells));
  }
  (kind == GridKind::raw ? m.raw : m.normalized) = std::move(grid);
  return m;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::default_source:
      return "default";
    case Strategy::random:
      return "random";
    case Strategy::top3:
      return "top3";
    case Strategy::best:
      return "best";
  }
  return "?";
}

Strategy parse_strategy(std::string_view text) {
  for (auto s : {Strategy::default_source, Strategy::random, Strategy::top3, Strategy::best})
    if (to_string(s) == text) return s;
  throw ParseError("unknown strategy '" + std::string(text) + "' (expected default, random, top3 or best)", 0);
}

double interpolated_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw NumericError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

StrategySummary strategy_eval(const TransferMatrix& matrix, Strategy strategy) {
  if (matrix.normalized.empty() && !matrix.targets.empty()) throw Error("transfer matrix has no normalized scores");
  const VariantId default_id{0, 0};
  const auto default_column = matrix.source_index(default_id);
  if (strategy == Strategy::default_source && !default_column)
    throw Error("transfer matrix has no " + default_id.label() + " source column");

  StrategySummary summary;
  summary.strategy = strategy;
  for (std::size_t t = 0; t < matrix.targets.size(); ++t) {
    const VariantId target = matrix.targets[t];
    if (strategy == Strategy::default_source) {
      if (target == default_id) continue;
      const auto& cell = matrix.normalized[t][*default_column];
      if (cell) summary.per_target.emplace_back(target, *cell);
      continue;
    }
    std::vector<double> cells;
    for (std::size_t s = 0; s < matrix.sources.size(); ++s)
      if (matrix.sources[s] != target && matrix.normalized[t][s]) cells.push_back(*matrix.normalized[t][s]);
    if (cells.empty()) continue;
    std::sort(cells.begin(), cells.end(), std::greater<>());
    double value = 0.0;
    switch (strategy) {
      case Strategy::best:
        value = cells.front();
        break;
      case Strategy::top3:
        if (cells.size() < 3) throw Error("target " + target.label() + " has fewer than three defined sources");
        value = (cells[0] + cells[1] + cells[2]) / 3.0;
        break;
      case Strategy::random:
        value = std::accumulate(cells.begin(), cells.end(), 0.0) / static_cast<double>(cells.size());
        break;
      case Strategy::default_source:
        break;
    }
    summary.per_target.emplace_back(target, value);
  }
  if (summary.per_target.empty()) throw Error("no target has a defined " + std::string(to_string(strategy)) + " score");
  std::vector<double> values;
  for (const auto& [t, v] : summary.per_target) values.push_back(v);
  std::sort(values.begin(), values.end());
  summary.median = interpolated_quantile(values, 0.5);
  summary.lower_quartile = interpolated_quantile(values, 0.25);
  summary.upper_quartile = interpolated_quantile(values, 0.75);
  return summary;
}

TopK select_top_k(std::span<const GridRun> runs, std::size_t k) {
  std::vector<std::size_t> order(runs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return runs[a].score > runs[b].score; });
  TopK top;
  top.fewer_than_k = runs.size() < k;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) {
    top.picked.push_back(order[i]);
    top.scores.push_back(runs[order[i]].score);
  }
  return top;
}

}  // namespace curriculab
