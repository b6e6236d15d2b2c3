#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "curriculab/bundled.hpp"
#include "curriculab/cli/commands.hpp"
#include "curriculab/error.hpp"
#include "curriculab/rng.hpp"
#include "curriculab/scores.hpp"
#include "oracles/selection_oracles.hpp"

using namespace curriculab;

namespace {

ScoreTable ingest(const std::string& text, const FactorialDesign& d, ScoreKind kind = ScoreKind::expert(),
                  LabelScheme labels = LabelScheme::mode_code) {
  std::istringstream in(text);
  return ingest_score_table(in, d, kind, labels);
}

ScoreTable bundled_table(const std::string& title, const std::string& name) {
  const auto d = load_design(title);
  return ingest(std::string(bundled_file("tables/" + cli::bundled_dir(title) + "/" + name)), d);
}

}  // namespace

TEST_CASE("ingest parses replicates and skips n/a cells") {
  const auto d = load_design("Freeway");
  const auto t = ingest("variant,score,score\n0_00,1.5,2.5\n0_01,n/a,4\n0_02,n/a,n/a\n", d);
  CHECK(t.scores({0, 0}) == std::vector<double>{1.5, 2.5});
  CHECK(t.mean({0, 0}) == 2.0);
  CHECK(t.scores({0, 1}) == std::vector<double>{4.0});
  CHECK_FALSE(t.contains({0, 2}));
  CHECK(t.observations().size() == 3);
}

TEST_CASE("ingest rejects bad input with the offending line") {
  const auto d = load_design("Freeway");
  CHECK_THROWS_AS(ingest("", d), ParseError);
  try {
    ingest("variant,score\n0_00,1\n0_00,2\n", d);
    FAIL("duplicate accepted");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  try {
    ingest("variant,score\n0_00,1\n0_09,2\n", d);
    FAIL("unknown variant accepted");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(ingest("variant,score\n0_00,abc\n", d), ParseError);
  CHECK_THROWS_AS(ingest("variant,score\n0_00,inf\n", d), ParseError);
}

TEST_CASE("ordinal labels map onto mode codes") {
  const auto d = load_design("Breakout");
  const auto t = ingest("variant,score\n0_03,7\n", d, ScoreKind::expert(), LabelScheme::mode_ordinal);
  CHECK(t.contains({0, 12}));
}

TEST_CASE("canonical score table round trip") {
  const auto d = load_design("SpaceInvaders");
  const auto t = bundled_table("SpaceInvaders", "expert.csv");
  CHECK(t.entries().size() == 32);
  std::stringstream s;
  write_score_table(s, d, t);
  const auto back = ingest(s.str(), d);
  CHECK(back.entries() == t.entries());
  std::stringstream again;
  write_score_table(again, d, back);
  CHECK(again.str() == s.str());
}

TEST_CASE("score kind text") {
  CHECK(ScoreKind::zero_shot_from({0, 0}).to_string() == "zero_shot:0_00");
  CHECK(ScoreKind::parse("finetuned:1_04") == ScoreKind::finetuned_from({1, 4}));
  CHECK(ScoreKind::parse("scratch") == ScoreKind::scratch());
  CHECK_THROWS_AS(ScoreKind::parse("teacher"), ParseError);
}

TEST_CASE("normalisation") {
  CHECK(normalize_score(50.0, 200.0) == 25.0);
  CHECK(normalize_score(-10.0, 20.0) == -50.0);
  CHECK_THROWS_AS(normalize_score(1.0, 0.0), NumericError);
}

TEST_CASE("published normalisation anchors") {
  // Zero-shot from the default variant, recomputed from raw scores.
  const auto anchor = [](const std::string& title, VariantId v) {
    const auto raw = bundled_table(title, "zero_shot_default.csv");
    const auto expert = bundled_table(title, "expert.csv");
    return normalize_score(raw.mean(v), expert.mean(v));
  };
  CHECK(std::abs(anchor("SpaceInvaders", {0, 1}) - 25.80) <= 0.005);
  CHECK(std::abs(anchor("Breakout", {0, 4}) - 50.56) <= 0.005);
  CHECK(std::abs(anchor("Freeway", {0, 0}) - 100.12) <= 0.005);
  const auto si = cli::bundled_transfer_matrix("SpaceInvaders");
  CHECK(std::abs(*si.normalized_at({0, 1}, {0, 0}) - 25.80) <= 0.005);
}

TEST_CASE("transfer matrix shape and diagonal") {
  for (const auto& title : cli::bundled_titles()) {
    CAPTURE(title);
    const auto d = load_design(title);
    const auto m = cli::bundled_transfer_matrix(title);
    CHECK(m.targets.size() == d.variant_count());
    CHECK(m.normalized.size() == m.targets.size());
    for (auto v : m.sources) {
      const auto cell = m.normalized_at(v, v);
      // published diagonals are separate evaluation runs of the expert
      if (cell) CHECK(std::abs(*cell - 100.0) < 1.0);
    }
    // raw and normalized agree cell by cell
    const auto expert = bundled_table(title, "expert.csv");
    for (std::size_t t = 0; t < m.targets.size(); ++t)
      for (std::size_t s = 0; s < m.sources.size(); ++s) {
        CHECK(m.raw[t][s].has_value() == m.normalized[t][s].has_value());
        if (m.raw[t][s]) CHECK(*m.normalized[t][s] == 100.0 * *m.raw[t][s] / expert.mean(m.targets[t]));
      }
  }
}

TEST_CASE("missing expert entry is an error naming the variant") {
  const auto d = load_design("Freeway");
  ScoreTable expert("Freeway", ScoreKind::expert());
  expert.add({0, 0}, 10.0);
  ScoreTable eval("Freeway", ScoreKind::zero_shot_from({0, 0}));
  eval.add({0, 1}, 3.0);
  try {
    build_transfer_matrix(d, expert, {{VariantId{0, 0}, eval}});
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("0_01") != std::string::npos);
  }
}

TEST_CASE("transfer grid round trip") {
  const auto d = load_design("Breakout");
  const auto m = cli::bundled_transfer_matrix("Breakout");
  std::stringstream s;
  write_transfer_grid(s, m, GridKind::raw);
  const auto back = read_transfer_grid(s, d, GridKind::raw);
  CHECK(back.sources == m.sources);
  CHECK(back.targets == m.targets);
  CHECK(back.raw == m.raw);
}

TEST_CASE("strategies on a hand-computed 2x2 matrix") {
  const auto d = load_design("Freeway");
  ScoreTable expert("Freeway", ScoreKind::expert());
  expert.add({0, 0}, 10.0);
  expert.add({0, 1}, 20.0);
  ScoreTable from_default("Freeway", ScoreKind::zero_shot_from({0, 0}));
  from_default.add({0, 0}, 10.0);
  from_default.add({0, 1}, 5.0);
  ScoreTable from_thick("Freeway", ScoreKind::zero_shot_from({0, 1}));
  from_thick.add({0, 0}, 4.0);
  from_thick.add({0, 1}, 20.0);
  const auto m = build_transfer_matrix(d, expert, {{VariantId{0, 0}, from_default}, {VariantId{0, 1}, from_thick}});
  // Off-diagonal cells: (target 0_01, source 0_00) = 25, (target 0_00, source 0_01) = 40.
  const auto def = strategy_eval(m, Strategy::default_source);
  REQUIRE(def.per_target.size() == 1);
  CHECK(def.median == 25.0);
  const auto best = strategy_eval(m, Strategy::best);
  CHECK(best.median == 32.5);
  CHECK(best.lower_quartile == 28.75);
  CHECK(best.upper_quartile == 36.25);
  CHECK(strategy_eval(m, Strategy::random).median == 32.5);
  CHECK_THROWS_AS(strategy_eval(m, Strategy::top3), Error);
}

TEST_CASE("strategies match a sort-then-slice oracle on the bundled matrices") {
  for (const auto& title : cli::bundled_titles()) {
    CAPTURE(title);
    const auto m = cli::bundled_transfer_matrix(title);
    std::vector<double> best, top3, random, def;
    for (std::size_t t = 0; t < m.targets.size(); ++t) {
      std::vector<double> cells;
      for (std::size_t s = 0; s < m.sources.size(); ++s)
        if (m.sources[s] != m.targets[t] && m.normalized[t][s]) cells.push_back(*m.normalized[t][s]);
      best.push_back(oracle::mean_of_top(cells, 1));
      top3.push_back(oracle::mean_of_top(cells, 3));
      random.push_back(oracle::mean_of_top(cells, cells.size()));
      if (m.targets[t] != VariantId{0, 0}) def.push_back(*m.normalized_at(m.targets[t], {0, 0}));
    }
    CHECK(strategy_eval(m, Strategy::best).median == doctest::Approx(oracle::median(best)).epsilon(1e-12));
    CHECK(strategy_eval(m, Strategy::top3).median == doctest::Approx(oracle::median(top3)).epsilon(1e-12));
    CHECK(strategy_eval(m, Strategy::random).median == doctest::Approx(oracle::median(random)).epsilon(1e-12));
    CHECK(strategy_eval(m, Strategy::default_source).median == doctest::Approx(oracle::median(def)).epsilon(1e-12));
  }
}

TEST_CASE("strategy ordering holds per target") {
  for (const auto& title : cli::bundled_titles()) {
    const auto m = cli::bundled_transfer_matrix(title);
    const auto best = strategy_eval(m, Strategy::best);
    const auto top3 = strategy_eval(m, Strategy::top3);
    const auto random = strategy_eval(m, Strategy::random);
    for (std::size_t i = 0; i < best.per_target.size(); ++i) {
      CHECK(best.per_target[i].second >= top3.per_target[i].second);
      CHECK(top3.per_target[i].second >= random.per_target[i].second - 1e-12);
    }
  }
}

TEST_CASE("strategy names") {
  for (auto s : {Strategy::default_source, Strategy::random, Strategy::top3, Strategy::best})
    CHECK(parse_strategy(to_string(s)) == s);
  CHECK_THROWS_AS(parse_strategy("worst"), Error);
}

TEST_CASE("interpolated quantiles") {
  const std::vector<double> xs{1, 2, 3, 4};
  CHECK(interpolated_quantile(xs, 0.0) == 1.0);
  CHECK(interpolated_quantile(xs, 0.25) == 1.75);
  CHECK(interpolated_quantile(xs, 0.5) == 2.5);
  CHECK(interpolated_quantile(xs, 1.0) == 4.0);
  const std::vector<double> one{7};
  CHECK(interpolated_quantile(one, 0.3) == 7.0);
}

TEST_CASE("top-k selection matches sort-then-slice") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(rng.below(12));
    std::vector<GridRun> runs;
    std::vector<double> values;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = static_cast<double>(rng.below(5));  // frequent ties
      runs.push_back({"cfg" + std::to_string(i), v});
      values.push_back(v);
    }
    const auto top = select_top_k(runs, 3);
    const auto expected = oracle::top_k_indices(values, 3);
    CHECK(top.picked == expected);
    CHECK(top.fewer_than_k == (n < 3));
    for (std::size_t i = 0; i < top.picked.size(); ++i) CHECK(top.scores[i] == values[top.picked[i]]);
  }
}
