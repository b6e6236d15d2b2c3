#include "curriculab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "curriculab/error.hpp"

namespace curriculab {

EnvFactory variant_factory(const FactorialDesign& design, VariantId variant, const MiniEnvConfig& base) {
  MiniEnvConfig config = MiniEnvConfig::for_variant(design, variant, 0);
  config.lanes = base.lanes;
  config.width = base.width;
  config.chicken_column = base.chicken_column;
  config.episode_limit = base.episode_limit;
  config.sticky_p = base.sticky_p;
  config.cars_per_lane = base.cars_per_lane;
  return mini_freeway_factory(config);
}

std::uint64_t run_seed(std::uint64_t base, RunRole role, VariantId variant, int index) {
  const auto code = static_cast<std::uint64_t>(variant.difficulty_bit * 1000 + variant.mode_code + 1);
  return derive_seed(derive_seed(derive_seed(base, static_cast<std::uint64_t>(role)), code),
                     static_cast<std::uint64_t>(index));
}

std::uint64_t evaluation_seed(std::uint64_t train_seed, VariantId target) {
  const auto code = static_cast<std::uint64_t>(target.difficulty_bit * 1000 + target.mode_code + 1);
  return derive_seed(train_seed ^ 0x65766131u, code);
}

void run_parallel(std::size_t jobs, int workers, const std::function<void(std::size_t)>& task) {
  if (workers <= 1 || jobs <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  const auto count = std::min<std::size_t>(static_cast<std::size_t>(workers), jobs);
  for (std::size_t w = 0; w < count; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < jobs; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = jobs;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

// Loads a finished run from the checkpoint directory, or runs and saves it.
TrainResult checkpointed(const ExperimentConfig& config, const std::string& name,
                         const std::function<TrainResult()>& run) {
  if (!config.checkpoint_dir) return run();
  const auto path = *config.checkpoint_dir / (name + ".csv");
  if (std::ifstream in{path}) {
    if (config.progress) config.progress("resume " + name);
    return read_checkpoint(in);
  }
  TrainResult result = run();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write checkpoint " + tmp);
    write_checkpoint(out, result);
  }
  std::filesystem::rename(tmp, path);
  return result;
}

long finetune_ratio(const ExperimentConfig& config) {
  if (config.finetune_budget <= 0) return 1;
  return std::max(1L, config.expert_budget / config.finetune_budget);
}

void check_config(const FactorialDesign& design, const ExperimentConfig& config) {
  config.params.validate();
  if (config.seeds_per_cell < 1) throw Error("need at least one seed per cell");
  if (config.grid_size < config.seeds_per_cell) throw Error("seed grid is smaller than the number of kept experts");
  if (config.finetune_budget < 0) throw Error("finetune budget must be non-negative");
  if (config.expert_budget < config.params.replay_initial)
    throw Error("expert budget is below the replay warm-up");
  MiniEnvConfig::for_variant(design, {0, 0}, 0);  // throws unless the factors match
  if (config.checkpoint_dir) std::filesystem::create_directories(*config.checkpoint_dir);
}

MiniEnvConfig env_of(const ExperimentConfig& config) {
  MiniEnvConfig env = config.env;
  env.sticky_p = config.params.sticky_p;
  return env;
}

TrainResult run_expert(const FactorialDesign& design, const ExperimentConfig& config, VariantId v, int index) {
  const auto seed = run_seed(config.seed, RunRole::expert, v, index);
  return checkpointed(config, "expert_" + v.label() + "_" + std::to_string(index), [&] {
    if (config.progress) config.progress("expert " + v.label() + " #" + std::to_string(index));
    return train_expert(variant_factory(design, v, env_of(config)), config.params, config.expert_budget, seed,
                        evaluation_seed(seed, v));
  });
}

// Paired finetune / scratch runs share their evaluation seed. `index` is the
// grid index of the default expert being finetuned.
TrainResult run_finetune(const FactorialDesign& design, const ExperimentConfig& config, const QTable& q, VariantId v,
                         int index) {
  const auto seed = run_seed(config.seed, RunRole::finetune, v, index);
  return checkpointed(config, "finetune_" + v.label() + "_" + std::to_string(index), [&] {
    return finetune(q, variant_factory(design, v, env_of(config)), config.params, config.finetune_budget,
                    finetune_ratio(config), seed, evaluation_seed(seed, v));
  });
}

TrainResult run_scratch(const FactorialDesign& design, const ExperimentConfig& config, VariantId v, int index) {
  const auto seed = run_seed(config.seed, RunRole::scratch, v, index);
  const auto paired_eval = evaluation_seed(run_seed(config.seed, RunRole::finetune, v, index), v);
  return checkpointed(config, "scratch_" + v.label() + "_" + std::to_string(index), [&] {
    return train(variant_factory(design, v, env_of(config)), config.params.shortened(finetune_ratio(config)),
                 config.finetune_budget, seed, paired_eval);
  });
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return interpolated_quantile(values, 0.5);
}

}  // namespace

ExperimentResult transfer_experiment(const FactorialDesign& design, const ExperimentConfig& config) {
  check_config(design, config);
  const auto variants = enumerate_variants(design);
  const auto grid = static_cast<std::size_t>(config.grid_size);
  const VariantId default_id{0, 0};

  ExperimentResult out;
  out.expert = ScoreTable(design.title(), ScoreKind::expert());
  out.finetuned = ScoreTable(design.title(), ScoreKind::finetuned_from(default_id));
  out.scratch = ScoreTable(design.title(), ScoreKind::scratch());

  // Seed-grid experts, then top-k per variant.
  out.experts.resize(variants.size() * grid);
  run_parallel(out.experts.size(), config.workers, [&](std::size_t job) {
    const VariantId v = variants[job / grid];
    const int index = static_cast<int>(job % grid);
    out.experts[job] = {v, index, run_seed(config.seed, RunRole::expert, v, index),
                        run_expert(design, config, v, index), false};
  });
  std::map<VariantId, std::vector<const ExpertRun*>> kept;
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    std::vector<GridRun> runs;
    for (std::size_t g = 0; g < grid; ++g)
      runs.push_back({std::to_string(g), out.experts[vi * grid + g].result.final_score});
    auto top = select_top_k(runs, static_cast<std::size_t>(config.seeds_per_cell));
    std::sort(top.picked.begin(), top.picked.end());  // grid order inside the cell
    for (auto g : top.picked) {
      auto& run = out.experts[vi * grid + g];
      run.kept = true;
      kept[variants[vi]].push_back(&run);
      out.expert.add(variants[vi], run.result.final_score);
    }
  }

  // All-to-all zero-shot evaluation of the kept experts.
  std::vector<const ExpertRun*> sources;
  for (auto v : variants)
    for (auto* run : kept[v]) sources.push_back(run);
  std::vector<double> zero_shot(sources.size() * variants.size());
  run_parallel(zero_shot.size(), config.workers, [&](std::size_t job) {
    const ExpertRun& run = *sources[job / variants.size()];
    const VariantId target = variants[job % variants.size()];
    zero_shot[job] = evaluate(run.result.q, variant_factory(design, target, env_of(config)),
                              config.params.eval_episodes, config.params.eval_epsilon,
                              evaluation_seed(run.seed, target));
  });
  std::map<VariantId, ScoreTable> evaluations;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const VariantId source = sources[s]->variant;
    auto [it, inserted] = evaluations.try_emplace(source, design.title(), ScoreKind::zero_shot_from(source));
    for (std::size_t t = 0; t < variants.size(); ++t) it->second.add(variants[t], zero_shot[s * variants.size() + t]);
  }
  out.transfer = build_transfer_matrix(design, out.expert, evaluations);

  // Default-expert finetuning and the equal-budget scratch ablation.
  std::vector<VariantId> targets;
  for (auto v : variants)
    if (v != default_id) targets.push_back(v);
  const auto& defaults = kept.at(default_id);
  const std::size_t per = defaults.size();
  std::vector<TrainResult> finetuned(targets.size() * per);
  std::vector<TrainResult> scratch(targets.size() * per);
  run_parallel(2 * finetuned.size(), config.workers, [&](std::size_t job) {
    const std::size_t slot = job / 2;
    const VariantId v = targets[slot / per];
    const ExpertRun& source = *defaults[slot % per];
    const int index = source.grid_index;
    if (job % 2 == 0)
      finetuned[slot] = run_finetune(design, config, source.result.q, v, index);
    else
      scratch[slot] = run_scratch(design, config, v, index);
  });
  for (std::size_t slot = 0; slot < finetuned.size(); ++slot) {
    const VariantId v = targets[slot / per];
    out.finetuned.add(v, finetuned[slot].final_score);
    out.scratch.add(v, scratch[slot].final_score);
    out.finetune_runs[v].push_back(std::move(finetuned[slot]));
    out.scratch_runs[v].push_back(std::move(scratch[slot]));
  }
  return out;
}

std::vector<PairedComparison> finetune_vs_scratch(const FactorialDesign& design, const ExperimentConfig& config,
                                                  int seeds) {
  check_config(design, config);
  if (seeds < 1) throw Error("need at least one seed");
  const VariantId default_id{0, 0};
  const auto s = static_cast<std::size_t>(seeds);
  std::vector<TrainResult> experts(s);
  run_parallel(s, config.workers, [&](std::size_t i) {
    experts[i] = run_expert(design, config, default_id, static_cast<int>(i));
  });

  std::vector<VariantId> targets;
  for (auto v : enumerate_variants(design))
    if (v != default_id) targets.push_back(v);
  std::vector<double> ft(targets.size() * s);
  std::vector<double> sc(targets.size() * s);
  run_parallel(2 * ft.size(), config.workers, [&](std::size_t job) {
    const std::size_t slot = job / 2;
    const VariantId v = targets[slot / s];
    const auto i = slot % s;
    if (job % 2 == 0)
      ft[slot] = run_finetune(design, config, experts[i].q, v, static_cast<int>(i)).final_score;
    else
      sc[slot] = run_scratch(design, config, v, static_cast<int>(i)).final_score;
  });

  std::vector<PairedComparison> out;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    PairedComparison c;
    c.variant = targets[t];
    c.finetuned.assign(ft.begin() + static_cast<long>(t * s), ft.begin() + static_cast<long>((t + 1) * s));
    c.scratch.assign(sc.begin() + static_cast<long>(t * s), sc.begin() + static_cast<long>((t + 1) * s));
    c.finetuned_median = median_of(c.finetuned);
    c.scratch_median = median_of(c.scratch);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace curriculab
