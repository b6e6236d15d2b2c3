#pragma once

// The transfer protocol on MiniFreeway: seed-grid experts per variant with
// top-3 selection, all-to-all zero-shot evaluation, default-expert finetuning
// and the equal-budget from-scratch ablation.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "curriculab/agent.hpp"
#include "curriculab/design.hpp"
#include "curriculab/mini_freeway.hpp"
#include "curriculab/scores.hpp"

namespace curriculab {

struct ExperimentConfig {
  AgentParams params;
  long expert_budget = 200000;
  long finetune_budget = 10000;
  int seeds_per_cell = 3;   // experts kept per variant
  int grid_size = 3;        // experts trained per variant, >= seeds_per_cell
  std::uint64_t seed = 0;
  int workers = 1;
  MiniEnvConfig env;        // geometry and episode limit; factors come from the variant
  std::optional<std::filesystem::path> checkpoint_dir;
  std::function<void(const std::string&)> progress;  // optional, called from worker threads
};

/// Environment factory for one MiniFreeway variant.
EnvFactory variant_factory(const FactorialDesign& design, VariantId variant, const MiniEnvConfig& base);

/// Seeds used for a run. `role` separates experts, finetuning and scratch.
enum class RunRole : std::uint64_t { expert = 1, finetune = 2, scratch = 3 };
std::uint64_t run_seed(std::uint64_t base, RunRole role, VariantId variant, int index);

/// Evaluation seed shared by every policy scored on `target` from a run whose
/// training seed is `train_seed`; makes an expert's final score coincide with
/// its zero-shot evaluation on its own variant.
std::uint64_t evaluation_seed(std::uint64_t train_seed, VariantId target);

struct ExpertRun {
  VariantId variant;
  int grid_index = 0;
  std::uint64_t seed = 0;
  TrainResult result;
  bool kept = false;
};

struct ExperimentResult {
  ScoreTable expert{"MiniFreeway", ScoreKind::expert()};
  TransferMatrix transfer;  // sources and targets: every variant
  ScoreTable finetuned{"MiniFreeway", ScoreKind::finetuned_from({0, 0})};
  ScoreTable scratch{"MiniFreeway", ScoreKind::scratch()};
  std::vector<ExpertRun> experts;  // design order, then grid index
  std::map<VariantId, std::vector<TrainResult>> finetune_runs;
  std::map<VariantId, std::vector<TrainResult>> scratch_runs;
};

/// Requires the MiniFreeway design. Results do not depend on `workers`.
ExperimentResult transfer_experiment(const FactorialDesign& design, const ExperimentConfig& config);

/// Runs `jobs` tasks on `workers` threads; task i writes only its own slot.
void run_parallel(std::size_t jobs, int workers, const std::function<void(std::size_t)>& task);

/// Finetuned-from-default versus scratch on each non-default variant, with
/// one default expert per seed. Used for the seed-replicated comparison.
struct PairedComparison {
  VariantId variant;
  std::vector<double> finetuned;  // one per seed
  std::vector<double> scratch;
  double finetuned_median = 0.0;
  double scratch_median = 0.0;
};

std::vector<PairedComparison> finetune_vs_scratch(const FactorialDesign& design, const ExperimentConfig& config,
                                                  int seeds);

}  // namespace curriculab
