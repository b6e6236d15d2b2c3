#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <filesystem>
#include <set>

#include <unistd.h>

#include "curriculab/anova.hpp"
#include "curriculab/error.hpp"
#include "curriculab/experiment.hpp"

using namespace curriculab;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(int workers) {
  ExperimentConfig c;
  c.expert_budget = 20000;
  c.finetune_budget = 1000;
  c.params.replay_initial = 1000;
  c.params.epsilon.anneal_steps = 5000;
  c.params.curve_interval = 0;
  c.params.eval_episodes = 10;
  c.grid_size = 4;
  c.seeds_per_cell = 3;
  c.seed = 77;
  c.workers = workers;
  return c;
}

const ExperimentResult& serial_result() {
  static const ExperimentResult r = transfer_experiment(load_design("MiniFreeway"), small_config(1));
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("curriculab_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("run seeds are distinct across roles, variants and indices") {
  const auto d = load_design("MiniFreeway");
  std::set<std::uint64_t> seen;
  std::size_t count = 0;
  for (auto role : {RunRole::expert, RunRole::finetune, RunRole::scratch})
    for (auto v : enumerate_variants(d))
      for (int i = 0; i < 10; ++i) {
        seen.insert(run_seed(0, role, v, i));
        ++count;
      }
  CHECK(seen.size() == count);
  CHECK(run_seed(1, RunRole::expert, {0, 0}, 0) != run_seed(2, RunRole::expert, {0, 0}, 0));
  CHECK(evaluation_seed(5, {0, 0}) != evaluation_seed(5, {0, 1}));
  CHECK(evaluation_seed(5, {0, 1}) == evaluation_seed(5, {0, 1}));
}

TEST_CASE("run_parallel fills every slot exactly once") {
  for (int workers : {1, 3, 8}) {
    std::vector<int> hits(100, 0);
    run_parallel(hits.size(), workers, [&](std::size_t i) { hits[i] += static_cast<int>(i) + 1; });
    for (std::size_t i = 0; i < hits.size(); ++i) CHECK(hits[i] == static_cast<int>(i) + 1);
  }
  CHECK_THROWS_AS(run_parallel(10, 4, [](std::size_t i) { if (i == 7) throw Error("boom"); }), Error);
}

TEST_CASE("experiment shapes") {
  const auto& r = serial_result();
  CHECK(r.experts.size() == 16 * 4);
  CHECK(r.expert.entries().size() == 16);
  for (const auto& [v, scores] : r.expert.entries()) CHECK(scores.size() == 3);
  CHECK(r.transfer.sources.size() == 16);
  CHECK(r.transfer.targets.size() == 16);
  CHECK(r.finetuned.entries().size() == 15);
  CHECK(r.scratch.entries().size() == 15);
  CHECK_FALSE(r.finetuned.contains({0, 0}));
  for (const auto& [v, runs] : r.finetune_runs) CHECK(runs.size() == 3);
}

TEST_CASE("kept experts are the top of each seed grid") {
  const auto& r = serial_result();
  for (std::size_t vi = 0; vi < 16; ++vi) {
    double worst_kept = INFINITY, best_dropped = -INFINITY;
    for (std::size_t g = 0; g < 4; ++g) {
      const auto& run = r.experts[vi * 4 + g];
      if (run.kept)
        worst_kept = std::min(worst_kept, run.result.final_score);
      else
        best_dropped = std::max(best_dropped, run.result.final_score);
    }
    CHECK(worst_kept >= best_dropped);
  }
}

TEST_CASE("normalized diagonal is exactly 100") {
  const auto& r = serial_result();
  for (auto v : r.transfer.targets) CHECK(std::abs(*r.transfer.normalized_at(v, v) - 100.0) <= 1e-9);
}

TEST_CASE("expert table has the Freeway ANOVA structure") {
  const auto d = load_design("MiniFreeway");
  const auto obs = serial_result().expert.observations();
  CHECK(is_balanced(d, obs));
  const auto table = type3_anova(build_model_matrix(d, obs), response_vector(obs), true);
  const std::vector<int> df{1, 1, 3, 1, 10, 32};
  REQUIRE(table.rows.size() == df.size());
  for (std::size_t i = 0; i < df.size(); ++i) CHECK(table.rows[i].df == df[i]);
}

TEST_CASE("results do not depend on the number of workers") {
  const auto parallel = transfer_experiment(load_design("MiniFreeway"), small_config(4));
  const auto& serial = serial_result();
  CHECK(parallel.expert.entries() == serial.expert.entries());
  CHECK(parallel.transfer.raw == serial.transfer.raw);
  CHECK(parallel.finetuned.entries() == serial.finetuned.entries());
  CHECK(parallel.scratch.entries() == serial.scratch.entries());
}

TEST_CASE("interrupted runs resume from checkpoints") {
  const auto d = load_design("MiniFreeway");
  auto c = small_config(4);
  const auto dir = fresh_dir("resume");
  c.checkpoint_dir = dir;
  const auto first = transfer_experiment(d, c);
  // Drop a few runs as an interruption would, then run again.
  fs::remove(dir / "expert_1_03_2.csv");
  fs::remove(dir / "finetune_0_05_0.csv");
  std::atomic<int> resumed{0};
  c.progress = [&](const std::string& msg) {
    if (msg.rfind("resume ", 0) == 0) ++resumed;
  };
  const auto second = transfer_experiment(d, c);
  CHECK(resumed.load() > 0);
  CHECK(fs::exists(dir / "expert_1_03_2.csv"));
  CHECK(second.expert.entries() == first.expert.entries());
  CHECK(second.transfer.raw == first.transfer.raw);
  CHECK(second.finetuned.entries() == first.finetuned.entries());
  CHECK(first.expert.entries() == serial_result().expert.entries());
  fs::remove_all(dir);
}

TEST_CASE("configuration errors") {
  const auto d = load_design("MiniFreeway");
  auto c = small_config(1);
  c.grid_size = 2;
  CHECK_THROWS_AS(transfer_experiment(d, c), Error);
  c = small_config(1);
  c.expert_budget = 10;
  CHECK_THROWS_AS(transfer_experiment(d, c), Error);
  CHECK_THROWS_AS(transfer_experiment(load_design("Breakout"), small_config(1)), Error);
}

TEST_CASE("paired finetune and scratch comparison") {
  auto c = small_config(4);
  const auto pairs = finetune_vs_scratch(load_design("MiniFreeway"), c, 3);
  CHECK(pairs.size() == 15);
  for (const auto& p : pairs) {
    CHECK(p.finetuned.size() == 3);
    CHECK(p.scratch.size() == 3);
    auto f = p.finetuned;
    std::sort(f.begin(), f.end());
    CHECK(p.finetuned_median == f[1]);
  }
}
