#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "json.hpp"

#include "curriculab/bundled.hpp"
#include "curriculab/cli/commands.hpp"
#include "curriculab/manifest.hpp"
#include "curriculab/text_io.hpp"

using namespace curriculab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "curriculab");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("curriculab_cli_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& leaf = "") const { return (leaf.empty() ? path : path / leaf).string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::vector<CsvRow> csv(const fs::path& p) {
  std::istringstream in(slurp(p));
  return read_csv_rows(in);
}

void check_manifest(const fs::path& dir) {
  REQUIRE(fs::exists(dir / "manifest.json"));
  const auto m = manifest_from_json(slurp(dir / "manifest.json"));
  CHECK_FALSE(m.outputs.empty());
  CHECK(verify_manifest_outputs(m, dir).empty());
  // Every file the command wrote is listed.
  std::set<std::string> listed;
  for (const auto& e : m.outputs) listed.insert(e.path);
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == "manifest.json" || rel.rfind("checkpoints/", 0) == 0) continue;
    CHECK_MESSAGE(listed.count(rel) == 1, rel);
  }
}

void check_svg(const fs::path& p) {
  const auto text = slurp(p);
  std::istringstream in(text);
  boost::property_tree::ptree tree;
  CHECK_NOTHROW(boost::property_tree::read_xml(in, tree));
  CHECK(tree.count("svg") == 1);
  CHECK(text.find("href") == std::string::npos);
  CHECK(text.find("<image") == std::string::npos);
  CHECK(text.find("url(") == std::string::npos);
}

std::string freeway_scores(bool planted) {
  std::ostringstream s;
  s << "variant,score,score,score\n";
  const auto d = load_design("Freeway");
  int i = 0;
  for (auto v : enumerate_variants(d)) {
    const auto l = decode_variant(d, v).assignment;
    const double mean = planted ? 10.0 * l[1] : 5.0;
    s << v.label();
    for (double e : {-0.7, 0.2, 0.5}) s << ',' << mean + e * (1 + (i++ % 3));
    s << '\n';
  }
  return s.str();
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"anova", "--title", "Freeway"}).code == cli::kExitUsage);
  CHECK(run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("ingest writes a canonical table and a manifest") {
  TempDir dir("ingest");
  const auto r = run({"--out", dir.str(), "ingest", "--title", "SpaceInvaders", "bundled:tables/space_invaders/expert.csv"});
  REQUIRE(r.code == cli::kExitOk);
  const auto rows = csv(dir.path / "expert.csv");
  CHECK(rows.size() == 33);
  CHECK(rows[0].fields[0] == "variant");
  CHECK(rows[1].fields[0] == "0_00");
  check_manifest(dir.path);
  const auto m = manifest_from_json(slurp(dir.path / "manifest.json"));
  CHECK(m.command == "ingest");
  REQUIRE(m.inputs.size() == 1);
  CHECK(m.inputs[0].hash == git_blob_hash(bundled_file("tables/space_invaders/expert.csv")));
}

TEST_CASE("ingest errors name the file and line") {
  TempDir dir("ingest_err");
  const auto missing = run({"--out", dir.str(), "ingest", "--title", "Freeway", dir.str("nope.csv")});
  CHECK(missing.code == cli::kExitUsage);
  CHECK(missing.err.find("nope.csv") != std::string::npos);

  write(dir.path / "dup.csv", "variant,score\n0_00,1\n0_01,2\n0_00,3\n");
  const auto dup = run({"--out", dir.str("o"), "ingest", "--title", "Freeway", dir.str("dup.csv")});
  CHECK(dup.code == cli::kExitUsage);
  CHECK(dup.err.find("dup.csv:4:") != std::string::npos);
}

TEST_CASE("anova reports the Freeway df column and the Bonferroni line") {
  TempDir dir("anova");
  write(dir.path / "scores.csv", freeway_scores(true));
  const auto r = run({"--out", dir.str("o"), "anova", "--title", "Freeway", dir.str("scores.csv")});
  REQUIRE(r.code == cli::kExitOk);
  const auto rows = csv(dir.path / "o" / "anova.csv");
  std::vector<std::string> df;
  for (std::size_t i = 1; i < rows.size(); ++i) df.push_back(rows[i].fields[2]);
  CHECK(df == std::vector<std::string>{"1", "1", "3", "1", "10", "32"});
  CHECK(r.out.find("0.0031") != std::string::npos);
  const auto text = slurp(dir.path / "o" / "anova.txt");
  CHECK(text.find("Traffic") != std::string::npos);
  check_svg(dir.path / "o" / "anova_residual_qq.svg");
  check_manifest(dir.path / "o");
}

TEST_CASE("anova on equal means gives F of zero") {
  TempDir dir("anova_null");
  std::ostringstream s;
  s << "variant,score,score,score\n";
  for (auto v : enumerate_variants(load_design("Freeway"))) s << v.label() << ",4,5,6\n";
  write(dir.path / "flat.csv", s.str());
  REQUIRE(run({"--out", dir.str("o"), "anova", "--title", "Freeway", "--classical", dir.str("flat.csv")}).code == 0);
  const auto rows = csv(dir.path / "o" / "anova.csv");
  for (std::size_t i = 2; i + 1 < rows.size(); ++i) CHECK(std::abs(std::stod(rows[i].fields[3])) < 1e-20);
}

TEST_CASE("anova on unbalanced data warns and uses the robust path") {
  TempDir dir("anova_unbalanced");
  std::ostringstream text;
  text << "variant,score,score,score\n";
  for (auto v : enumerate_variants(load_design("Freeway")))
    text << v.label() << (v == VariantId{0, 1} ? ",4,6\n" : ",4,5,7\n");
  write(dir.path / "scores.csv", text.str());
  const auto r = run({"--out", dir.str("o"), "anova", "--title", "Freeway", "--classical", dir.str("scores.csv")});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.err.find("unbalanced") != std::string::npos);
  CHECK(manifest_from_json(slurp(dir.path / "o" / "manifest.json")).params.at("robust") == "false");
}

TEST_CASE("transfer normalizes bundled raw grids") {
  TempDir dir("transfer");
  const auto r = run({"--out", dir.str(), "transfer", "--title", "SpaceInvaders", "--expert",
                      "bundled:tables/space_invaders/expert.csv", "bundled:tables/space_invaders/transfer_raw.csv"});
  REQUIRE(r.code == cli::kExitOk);
  const auto rows = csv(dir.path / "transfer_normalized.csv");
  CHECK(rows.size() == 33);
  check_svg(dir.path / "transfer_heatmap.svg");
  check_manifest(dir.path);
}

TEST_CASE("single-source transfer gives one column") {
  TempDir dir("transfer_one");
  const auto r = run({"--out", dir.str(), "transfer", "--title", "Freeway", "--expert",
                      "bundled:tables/freeway/expert.csv", "0_00=bundled:tables/freeway/zero_shot_default.csv"});
  REQUIRE(r.code == cli::kExitOk);
  const auto rows = csv(dir.path / "transfer_normalized.csv");
  REQUIRE(rows.size() == 17);
  CHECK(rows[0].fields == std::vector<std::string>{"target", "0_00"});
}

TEST_CASE("transfer without an expert entry names the variant") {
  TempDir dir("transfer_err");
  write(dir.path / "expert.csv", "variant,score\n0_00,10\n");
  write(dir.path / "eval.csv", "variant,score\n0_00,9\n0_03,4\n");
  const auto r = run({"--out", dir.str("o"), "transfer", "--title", "Freeway", "--expert", dir.str("expert.csv"),
                      "0_00=" + dir.str("eval.csv")});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("0_03") != std::string::npos);
}

TEST_CASE("strategies check passes and fails through the exit code") {
  TempDir dir("strategies");
  const std::vector<std::string> base{"--out", dir.str(), "strategies", "--title", "Breakout",
                                      "bundled:tables/breakout/transfer_normalized.csv", "--default-column",
                                      "bundled:tables/breakout/zero_shot_default_normalized.csv"};
  const auto ok = run(base);
  CHECK(ok.code == cli::kExitOk);
  CHECK(ok.out.find("PASS") != std::string::npos);
  check_svg(dir.path / "strategies_boxplot.svg");
  check_manifest(dir.path);
  auto strict = base;
  strict.insert(strict.end(), {"--min-top3", "99"});
  const auto fail = run(strict);
  CHECK(fail.code == cli::kExitCheckFailed);
  CHECK(fail.out.find("FAIL") != std::string::npos);
}

TEST_CASE("json output") {
  TempDir dir("json");
  REQUIRE(run({"--out", dir.str(), "--format", "json", "ingest", "--title", "Freeway",
               "bundled:tables/freeway/expert.csv"})
              .code == cli::kExitOk);
  const auto j = nlohmann::json::parse(slurp(dir.path / "expert.json"));
  REQUIRE(j.is_array());
  CHECK(j.size() == 16);
  CHECK(j[0]["variant"] == "0_00");
  CHECK(j[0]["score"] == 33.10);
  check_manifest(dir.path);
}

TEST_CASE("report") {
  TempDir dir("report");
  const auto r = run({"--out", dir.str(), "report"});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("Bonferroni alpha 0.05/32 = 0.0015") != std::string::npos);
  CHECK(r.out.find("Bonferroni alpha 0.05/24 = 0.0020") != std::string::npos);
  CHECK(r.out.find("Bonferroni alpha 0.05/16 = 0.0031") != std::string::npos);
  CHECK(fs::exists(dir.path / "report.txt"));
  CHECK(fs::exists(dir.path / "breakout" / "transfer_normalized.csv"));
  check_manifest(dir.path);
}

TEST_CASE("repeated commands give byte-identical CSV") {
  TempDir a("repeat_a"), b("repeat_b"), input("repeat_in");
  write(input.path / "scores.csv", freeway_scores(true));
  for (const auto* d : {&a, &b}) {
    REQUIRE(run({"--out", d->str(), "report"}).code == 0);
    REQUIRE(run({"--out", d->str("anova"), "anova", "--title", "Freeway", input.str("scores.csv")}).code == 0);
  }
  for (const auto& entry : fs::recursive_directory_iterator(a.path)) {
    if (entry.path().extension() != ".csv") continue;
    const auto other = b.path / fs::relative(entry.path(), a.path);
    CHECK_MESSAGE(slurp(entry.path()) == slurp(other), entry.path().string());
  }
}

TEST_CASE("run-mini end to end at small budgets, with resume") {
  TempDir dir("mini");
  write(dir.path / "mini.cfg", "expert-budget = 20000\nfinetune-budget = 1000\n");
  const std::vector<std::string> args{"--out", dir.str("out"), "--seed", "5", "run-mini", "--config",
                                      dir.str("mini.cfg"), "--replay-initial", "1000", "--anneal-steps", "5000",
                                      "--eval-episodes", "10", "--quiet"};
  const auto r = run(args);
  REQUIRE(r.code == cli::kExitOk);
  const auto out = dir.path / "out";
  const auto expert = csv(out / "expert.csv");
  REQUIRE(expert.size() == 17);
  for (std::size_t i = 1; i < expert.size(); ++i) CHECK(expert[i].fields.size() == 4);
  const auto norm = csv(out / "zero_shot_normalized.csv");
  REQUIRE(norm.size() == 17);
  for (std::size_t i = 1; i < norm.size(); ++i) {
    CHECK(norm[i].fields.size() == 17);
    CHECK(std::abs(std::stod(norm[i].fields[i]) - 100.0) <= 1e-9);
  }
  const auto anova = csv(out / "anova_expert.csv");
  REQUIRE(anova.size() == 7);
  CHECK(anova[6].fields[2] == "32");
  for (const auto* f : {"finetuned_default.csv", "scratch.csv", "finetune_vs_scratch.csv",
                        "anova_expert_residual_quantiles.csv", "strategies.csv"})
    CHECK_MESSAGE(fs::exists(out / f), f);
  check_manifest(out);
  const auto m = manifest_from_json(slurp(out / "manifest.json"));
  CHECK(m.params.at("expert_budget") == "20000");
  CHECK(m.params.at("replay_initial") == "1000");

  std::map<std::string, std::string> first;
  for (const auto& e : fs::directory_iterator(out))
    if (e.path().extension() == ".csv") first[e.path().filename().string()] = slurp(e.path());
  // Second run resumes every run from checkpoints and must reproduce the CSVs.
  fs::remove(out / "checkpoints" / "expert_0_02_1.csv");
  REQUIRE(run(args).code == cli::kExitOk);
  for (const auto& [name, text] : first) CHECK_MESSAGE(slurp(out / name) == text, name);

  const auto bad = run({"--out", dir.str("bad"), "run-mini", "--expert-budget", "10", "--quiet"});
  CHECK(bad.code == cli::kExitUsage);
}

TEST_CASE("git blob hashes") {
  CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("manifest json round trip") {
  RunManifest m;
  m.command = "anova";
  m.inputs = {{"a.csv", git_blob_hash("a")}};
  m.params = {{"alpha", "0.05"}, {"title", "Freeway"}};
  m.outputs = {{"anova.csv", git_blob_hash("b")}};
  m.timestamp = "2024-01-01T00:00:00Z";
  const auto back = manifest_from_json(manifest_to_json(m));
  CHECK(back.command == m.command);
  CHECK(back.params == m.params);
  CHECK(back.outputs.size() == 1);
  CHECK(back.outputs[0].hash == m.outputs[0].hash);
  CHECK(back.timestamp == m.timestamp);
  CHECK_THROWS(manifest_from_json("{not json"));
}

TEST_CASE("bundled data matches the checksum list") {
  const auto listed = parse_checksum_list(slurp(fs::path(CURRICULAB_DATA_DIR) / "MANIFEST"));
  const auto paths = bundled_paths();
  CHECK(listed.size() == paths.size());
  for (auto p : paths) {
    const std::string path(p);
    REQUIRE_MESSAGE(listed.count(path) == 1, path);
    CHECK_MESSAGE(listed.at(path) == git_blob_hash(bundled_file(path)), path);
    CHECK_MESSAGE(listed.at(path) == git_blob_hash_file(fs::path(CURRICULAB_DATA_DIR) / path), path);
  }
  CHECK_THROWS(parse_checksum_list("abc  x.csv\n"));
}
