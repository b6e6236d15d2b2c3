#include "curriculab/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "curriculab/anova.hpp"
#include "curriculab/bundled.hpp"
#include "curriculab/error.hpp"
#include "curriculab/experiment.hpp"
#include "curriculab/manifest.hpp"
#include "curriculab/svg.hpp"
#include "curriculab/text_io.hpp"

namespace curriculab::cli {

namespace fs = std::filesystem;

namespace {

enum class Format { csv, json };

struct Context {
  fs::path out_dir;
  std::uint64_t seed = 0;
  Format format = Format::csv;
  std::ostream& out;
  std::ostream& err;
  RunManifest manifest;
};

std::string strip_line_prefix(const std::string& message) {
  if (message.rfind("line ", 0) != 0) return message;
  const auto colon = message.find(": ");
  return colon == std::string::npos ? message : message.substr(colon + 2);
}

// Re-raises a parse error as "<file>:<line>: <message>".
template <class F>
auto with_file(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw Error(path + ":" + std::to_string(e.line()) + ": " + strip_line_prefix(e.what()));
  }
}

void add_input(Context& ctx, const std::string& path, const std::string& content) {
  ctx.manifest.inputs.push_back({path, git_blob_hash(content)});
}

std::string load(Context& ctx, const std::string& path) {
  std::string content = read_input(path);
  add_input(ctx, path, content);
  return content;
}

void write_file(Context& ctx, const std::string& name, const std::string& content) {
  fs::create_directories(ctx.out_dir);
  const auto path = ctx.out_dir / name;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << content;
  if (!f) throw Error("failed writing " + path.string());
  ctx.manifest.outputs.push_back({name, git_blob_hash(content)});
}

nlohmann::ordered_json csv_to_json(const std::string& csv) {
  std::istringstream in(csv);
  const auto rows = read_csv_rows(in);
  auto arr = nlohmann::ordered_json::array();
  if (rows.empty()) return arr;
  const auto& header = rows[0].fields;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < header.size(); ++c) {
      const std::string cell = c < rows[r].fields.size() ? rows[r].fields[c] : "";
      const auto number = c > 0 ? parse_double(cell) : std::nullopt;
      if (number)
        obj[header[c]] = *number;
      else if (cell == "n/a" || cell.empty())
        obj[header[c]] = nullptr;
      else
        obj[header[c]] = cell;
    }
    arr.push_back(std::move(obj));
  }
  return arr;
}

// Writes a table under `stem` in the selected format.
void emit_table(Context& ctx, const std::string& stem, const std::string& csv) {
  if (ctx.format == Format::json)
    write_file(ctx, stem + ".json", csv_to_json(csv).dump(2) + "\n");
  else
    write_file(ctx, stem + ".csv", csv);
}

void finish(Context& ctx, const std::string& command) {
  ctx.manifest.command = command;
  ctx.manifest.timestamp = manifest_timestamp();
  ctx.manifest.params["seed"] = std::to_string(ctx.seed);
  ctx.manifest.params["format"] = ctx.format == Format::json ? "json" : "csv";
  fs::create_directories(ctx.out_dir);
  std::ofstream f(ctx.out_dir / "manifest.json");
  f << manifest_to_json(ctx.manifest);
}

LabelScheme parse_labels(const std::string& text) {
  if (text == "code") return LabelScheme::mode_code;
  if (text == "ordinal") return LabelScheme::mode_ordinal;
  throw Error("unknown label scheme '" + text + "' (expected code or ordinal)");
}

ScoreTable load_scores(Context& ctx, const std::string& path, const FactorialDesign& design, ScoreKind kind,
                       LabelScheme labels) {
  const auto text = load(ctx, path);
  return with_file(path, [&] {
    std::istringstream in(text);
    return ingest_score_table(in, design, kind, labels);
  });
}

bool is_grid(const std::string& text) {
  std::istringstream in(text);
  const auto rows = read_csv_rows(in);
  return !rows.empty() && !rows[0].fields.empty() && rows[0].fields[0] == "target";
}

std::string to_csv(const std::function<void(std::ostream&)>& writer) {
  std::ostringstream s;
  writer(s);
  return s.str();
}

// Normalized grid filled in the default column from a per-target table.
void fill_default_column(TransferMatrix& m, const ScoreTable& column) {
  const VariantId default_id{0, 0};
  auto s = m.source_index(default_id);
  if (!s) {
    m.sources.insert(m.sources.begin(), default_id);
    for (auto& row : m.normalized) row.insert(row.begin(), std::nullopt);
    for (auto& row : m.raw) row.insert(row.begin(), std::nullopt);
    s = 0;
  }
  for (std::size_t t = 0; t < m.targets.size(); ++t)
    if (!m.normalized[t][*s] && column.contains(m.targets[t])) m.normalized[t][*s] = column.mean(m.targets[t]);
}

// ---------------------------------------------------------------------------

int cmd_ingest(Context& ctx, const std::string& title, const std::string& kind_text, const std::string& labels_text,
               const std::vector<std::string>& paths) {
  const auto design = load_design(title);
  const auto kind = ScoreKind::parse(kind_text);
  const auto labels = parse_labels(labels_text);
  for (const auto& path : paths) {
    const auto table = load_scores(ctx, path, design, kind, labels);
    auto stem = fs::path(path.rfind("bundled:", 0) == 0 ? path.substr(8) : path).stem().string();
    emit_table(ctx, stem, to_csv([&](std::ostream& o) { write_score_table(o, design, table); }));
    ctx.out << path << ": " << table.entries().size() << " variants, " << table.observations().size()
            << " scores (" << kind.to_string() << ")\n";
  }
  ctx.manifest.params["title"] = title;
  ctx.manifest.params["kind"] = kind.to_string();
  ctx.manifest.params["labels"] = labels_text;
  finish(ctx, "ingest");
  return kExitOk;
}

struct AnovaOutputs {
  AnovaTable table;
  PosthocResult posthoc;
  std::vector<QuantilePoint> quantiles;
};

AnovaOutputs analyse(Context& ctx, const FactorialDesign& design, const ScoreTable& scores, bool robust, double alpha,
                     const std::string& stem) {
  const auto observations = scores.observations();
  if (!is_balanced(design, observations)) {
    ctx.err << "warning: unbalanced data; using the HC3 robust path only\n";
    robust = true;
  }
  const auto x = build_model_matrix(design, observations);
  const auto y = response_vector(observations);
  const auto fit = fit_ols(x, y);
  AnovaOutputs r;
  r.table = type3_anova(x, y, fit, robust);
  const auto robust_table = robust ? r.table : type3_anova(x, y, fit, true);
  const int k = static_cast<int>(design.variant_count());
  r.posthoc = posthoc_factor_effects(robust_table, alpha, k);
  r.posthoc.comparisons = marginal_comparisons(design, x, fit, alpha, k);

  emit_table(ctx, stem, to_csv([&](std::ostream& o) { write_anova_csv(o, r.table); }));
  std::ostringstream text;
  write_anova_text(text, r.table, design.title() + " type-3 ANOVA of " + scores.kind().to_string() + " scores");
  text << '\n';
  text << "Post-hoc (HC3 robust Wald tests, alpha " << format_double(alpha) << " over " << k << " groups)\n";
  write_posthoc_text(text, r.posthoc);
  write_file(ctx, stem + ".txt", text.str());
  ctx.out << text.str();

  try {
    r.quantiles = residual_quantiles(fit);
    emit_table(ctx, stem + "_residual_quantiles", to_csv([&](std::ostream& o) {
                 o << "theoretical,standardized\n";
                 for (const auto& p : r.quantiles)
                   o << format_double(p.theoretical) << ',' << format_double(p.standardized) << '\n';
               }));
    write_file(ctx, stem + "_residual_qq.svg",
               to_csv([&](std::ostream& o) { write_quantile_svg(o, design.title() + " residuals", r.quantiles); }));
  } catch (const NumericError& e) {
    ctx.err << "warning: " << e.what() << '\n';
  }
  return r;
}

int cmd_anova(Context& ctx, const std::string& title, const std::string& path, const std::string& kind_text,
              const std::string& labels_text, bool classical, double alpha) {
  const auto design = load_design(title);
  const auto scores = load_scores(ctx, path, design, ScoreKind::parse(kind_text), parse_labels(labels_text));
  analyse(ctx, design, scores, !classical, alpha, "anova");
  ctx.manifest.params["title"] = title;
  ctx.manifest.params["robust"] = classical ? "false" : "true";
  ctx.manifest.params["alpha"] = format_double(alpha);
  finish(ctx, "anova");
  return kExitOk;
}

// Evaluation inputs are transfer grids or `SOURCE=table` pairs; the first
// value seen for a (source, target) cell wins.
std::map<VariantId, ScoreTable> load_evaluations(Context& ctx, const FactorialDesign& design,
                                                 const std::vector<std::string>& specs, LabelScheme labels) {
  std::map<VariantId, ScoreTable> merged;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq != std::string::npos && spec.rfind("bundled:", 0) != 0 && eq < spec.find('/')) {
      const auto source = with_file(spec, [&] { return design.resolve_label(spec.substr(0, eq), labels); });
      const auto path = spec.substr(eq + 1);
      auto table = load_scores(ctx, path, design, ScoreKind::zero_shot_from(source), labels);
      auto it = merged.find(source);
      if (it == merged.end())
        merged.emplace(source, std::move(table));
      else
        fill_missing(it->second, table);
      continue;
    }
    const auto text = load(ctx, spec);
    if (!is_grid(text)) throw Error(spec + ": expected a transfer grid (header 'target,...') or SOURCE=path");
    const auto grid = with_file(spec, [&] {
      std::istringstream in(text);
      return read_transfer_grid(in, design, GridKind::raw, labels);
    });
    for (auto& [source, table] : evaluations_from_grid(design.title(), grid.sources, grid.targets, grid.raw)) {
      auto it = merged.find(source);
      if (it == merged.end())
        merged.emplace(source, std::move(table));
      else
        fill_missing(it->second, table);
    }
  }
  if (merged.empty()) throw Error("no evaluation inputs");
  return merged;
}

void emit_matrix(Context& ctx, const TransferMatrix& m, const std::string& stem) {
  emit_table(ctx, stem + "_raw", to_csv([&](std::ostream& o) { write_transfer_grid(o, m, GridKind::raw); }));
  emit_table(ctx, stem + "_normalized",
             to_csv([&](std::ostream& o) { write_transfer_grid(o, m, GridKind::normalized); }));
  write_file(ctx, stem + "_heatmap.svg", to_csv([&](std::ostream& o) { write_heatmap_svg(o, m); }));
}

int cmd_transfer(Context& ctx, const std::string& title, const std::string& expert_path,
                 const std::vector<std::string>& evaluations, const std::string& labels_text) {
  const auto design = load_design(title);
  const auto labels = parse_labels(labels_text);
  const auto expert = load_scores(ctx, expert_path, design, ScoreKind::expert(), labels);
  const auto matrix = build_transfer_matrix(design, expert, load_evaluations(ctx, design, evaluations, labels));
  emit_matrix(ctx, matrix, "transfer");
  ctx.out << design.title() << ": " << matrix.targets.size() << " targets x " << matrix.sources.size()
          << " sources written to " << ctx.out_dir.string() << '\n';
  ctx.manifest.params["title"] = title;
  finish(ctx, "transfer");
  return kExitOk;
}

std::vector<StrategySummary> summarise(Context& ctx, const TransferMatrix& matrix, const std::string& stem) {
  std::vector<StrategySummary> all;
  for (auto s : {Strategy::default_source, Strategy::random, Strategy::top3, Strategy::best})
    all.push_back(strategy_eval(matrix, s));
  emit_table(ctx, stem, to_csv([&](std::ostream& o) {
               o << "strategy,targets,median,lower_quartile,upper_quartile\n";
               for (const auto& s : all)
                 o << to_string(s.strategy) << ',' << s.per_target.size() << ',' << format_double(s.median) << ','
                   << format_double(s.lower_quartile) << ',' << format_double(s.upper_quartile) << '\n';
             }));
  emit_table(ctx, stem + "_per_target", to_csv([&](std::ostream& o) {
               o << "strategy,target,normalized\n";
               for (const auto& s : all)
                 for (const auto& [t, v] : s.per_target)
                   o << to_string(s.strategy) << ',' << t.label() << ',' << format_double(v) << '\n';
             }));
  write_file(ctx, stem + "_boxplot.svg", to_csv([&](std::ostream& o) { write_boxplot_svg(o, matrix.title, all); }));
  return all;
}

int cmd_strategies(Context& ctx, const std::string& title, const std::string& matrix_path,
                   const std::string& expert_path, const std::string& default_path, const std::string& labels_text,
                   double threshold) {
  const auto design = load_design(title);
  const auto labels = parse_labels(labels_text);
  TransferMatrix matrix;
  if (!expert_path.empty()) {
    const auto expert = load_scores(ctx, expert_path, design, ScoreKind::expert(), labels);
    std::vector<std::string> specs{matrix_path};
    if (!default_path.empty()) specs.push_back("0_00=" + default_path);
    matrix = build_transfer_matrix(design, expert, load_evaluations(ctx, design, specs, labels));
  } else {
    const auto text = load(ctx, matrix_path);
    matrix = with_file(matrix_path, [&] {
      std::istringstream in(text);
      return read_transfer_grid(in, design, GridKind::normalized, labels);
    });
    if (!default_path.empty())
      fill_default_column(matrix, load_scores(ctx, default_path, design, ScoreKind::zero_shot_from({0, 0}), labels));
  }
  const auto all = summarise(ctx, matrix, "strategies");
  for (const auto& s : all)
    ctx.out << to_string(s.strategy) << ": median " << format_fixed(s.median, 2) << " (IQR "
            << format_fixed(s.lower_quartile, 2) << " - " << format_fixed(s.upper_quartile, 2) << ", "
            << s.per_target.size() << " targets)\n";
  const double top3 = all[2].median;
  const bool ok = top3 > threshold;
  ctx.out << "check top3 median > " << format_double(threshold) << "%: " << (ok ? "PASS" : "FAIL") << " ("
          << format_fixed(top3, 2) << ")\n";
  ctx.manifest.params["title"] = title;
  ctx.manifest.params["threshold"] = format_double(threshold);
  finish(ctx, "strategies");
  return ok ? kExitOk : kExitCheckFailed;
}

struct MiniOptions {
  long expert_budget = 200000;
  long finetune_budget = 10000;
  int seeds = 3;
  int grid = 3;
  int workers = 1;
  int episode_limit = 500;
  bool checkpoints = true;
  bool quiet = false;
  AgentParams params;
};

int cmd_run_mini(Context& ctx, MiniOptions& o) {
  const auto design = load_design("MiniFreeway");
  ExperimentConfig config;
  config.params = o.params;
  config.expert_budget = o.expert_budget;
  config.finetune_budget = o.finetune_budget;
  config.seeds_per_cell = o.seeds;
  config.grid_size = std::max(o.grid, o.seeds);
  config.seed = ctx.seed;
  config.workers = o.workers;
  config.env.episode_limit = o.episode_limit;
  if (o.checkpoints) config.checkpoint_dir = ctx.out_dir / "checkpoints";
  std::mutex progress_mutex;
  if (!o.quiet)
    config.progress = [&](const std::string& msg) {
      std::lock_guard lock(progress_mutex);
      ctx.err << msg << '\n';
    };
  const auto r = transfer_experiment(design, config);

  auto score_csv = [&](const ScoreTable& t) { return to_csv([&](std::ostream& s) { write_score_table(s, design, t); }); };
  emit_table(ctx, "expert", score_csv(r.expert));
  emit_table(ctx, "finetuned_default", score_csv(r.finetuned));
  emit_table(ctx, "scratch", score_csv(r.scratch));
  emit_matrix(ctx, r.transfer, "zero_shot");
  emit_table(ctx, "finetune_vs_scratch", to_csv([&](std::ostream& s) {
               s << "variant,finetuned_mean,scratch_mean,finetuned_normalized,scratch_normalized\n";
               for (const auto& [v, scores] : r.finetuned.entries()) {
                 const double e = r.expert.mean(v);
                 s << v.label() << ',' << format_double(r.finetuned.mean(v)) << ',' << format_double(r.scratch.mean(v))
                   << ',' << format_double(normalize_score(r.finetuned.mean(v), e)) << ','
                   << format_double(normalize_score(r.scratch.mean(v), e)) << '\n';
               }
             }));
  emit_table(ctx, "curves", to_csv([&](std::ostream& s) {
               s << "variant,grid_index,kept,step,eval_return\n";
               for (const auto& run : r.experts)
                 for (const auto& p : run.result.curve)
                   s << run.variant.label() << ',' << run.grid_index << ',' << (run.kept ? 1 : 0) << ',' << p.step
                     << ',' << format_double(p.eval_return) << '\n';
             }));
  analyse(ctx, design, r.expert, true, 0.05, "anova_expert");
  const auto all = summarise(ctx, r.transfer, "strategies");
  for (const auto& s : all) ctx.out << to_string(s.strategy) << " median " << format_fixed(s.median, 2) << '\n';

  auto& p = ctx.manifest.params;
  p["expert_budget"] = std::to_string(o.expert_budget);
  p["finetune_budget"] = std::to_string(o.finetune_budget);
  p["seeds"] = std::to_string(o.seeds);
  p["grid"] = std::to_string(config.grid_size);
  p["workers"] = std::to_string(o.workers);
  p["episode_limit"] = std::to_string(o.episode_limit);
  p["gamma"] = format_double(o.params.gamma);
  p["n_step"] = std::to_string(o.params.n_step);
  p["learning_rate"] = format_double(o.params.learning_rate);
  p["initial_value"] = format_double(o.params.initial_value);
  p["anneal_steps"] = std::to_string(o.params.epsilon.anneal_steps);
  p["replay_initial"] = std::to_string(o.params.replay_initial);
  p["replay_capacity"] = std::to_string(o.params.replay_capacity);
  p["target_update_period"] = std::to_string(o.params.target_update_period);
  p["batch_size"] = std::to_string(o.params.batch_size);
  p["sticky_p"] = format_double(o.params.sticky_p);
  p["prioritized"] = o.params.use_prioritized ? "true" : "false";
  p["eval_episodes"] = std::to_string(o.params.eval_episodes);
  std::string seeds;
  for (const auto& run : r.experts) seeds += (seeds.empty() ? "" : ";") + run.variant.label() + "#" +
                                             std::to_string(run.grid_index) + "=" + std::to_string(run.seed);
  p["expert_seeds"] = seeds;
  add_input(ctx, "bundled:designs/mini_freeway.csv", std::string(bundled_file("designs/mini_freeway.csv")));
  finish(ctx, "run-mini");
  return kExitOk;
}

int cmd_report(Context& ctx) {
  std::ostringstream text;
  text << "Reproduction report from bundled score tables\n";
  for (const auto& title : bundled_titles()) {
    const auto design = load_design(title);
    const auto dir = bundled_dir(title);
    text << "\n== " << title << " ==\n";
    const auto x_cols = [&] {
      std::vector<Observation> obs;
      for (auto v : enumerate_variants(design))
        for (int r = 0; r < 3; ++r) obs.push_back({v, 0.0});
      return build_model_matrix(design, obs);
    }();
    text << "model blocks (3 reps/cell):";
    for (const auto& b : x_cols.blocks) text << ' ' << b.name << '=' << b.width;
    text << ", residual df " << x_cols.rows() - x_cols.cols() << '\n';
    text << "Bonferroni alpha 0.05/" << design.variant_count() << " = "
         << format_fixed(bonferroni_alpha(0.05, static_cast<int>(design.variant_count())), 4) << '\n';

    const auto rebuilt = bundled_transfer_matrix(title);
    const auto published = bundled_published_normalized(title);
    double worst = 0.0;
    std::string worst_cell;
    std::size_t compared = 0, over = 0;
    for (std::size_t t = 0; t < published.targets.size(); ++t) {
      for (std::size_t s = 0; s < published.sources.size(); ++s) {
        const auto& p = published.normalized[t][s];
        const auto r = rebuilt.normalized_at(published.targets[t], published.sources[s]);
        if (!p || !r) continue;
        ++compared;
        const double d = std::abs(*r - *p);
        if (d > 0.15 + 1e-9) ++over;
        if (d > worst) {
          worst = d;
          worst_cell = "target " + published.targets[t].label() + ", source " + published.sources[s].label();
        }
      }
    }
    text << "transfer normalization: " << compared << " cells, max |100 raw/expert - published| = "
         << format_fixed(worst, 3) << " (" << worst_cell << "), " << over << " cells beyond 0.15\n";

    const auto expert = [&] {
      std::istringstream in{std::string(bundled_file("tables/" + dir + "/expert.csv"))};
      return ingest_score_table(in, design, ScoreKind::expert());
    }();
    for (const std::string kind : {"zero_shot_default", "finetuned_default", "scratch"}) {
      std::istringstream raw_in{std::string(bundled_file("tables/" + dir + "/" + kind + ".csv"))};
      std::istringstream norm_in{std::string(bundled_file("tables/" + dir + "/" + kind + "_normalized.csv"))};
      const auto raw = ingest_score_table(raw_in, design, ScoreKind::scratch());
      const auto norm = ingest_score_table(norm_in, design, ScoreKind::scratch());
      double max_dev = 0.0;
      for (const auto& [v, scores] : norm.entries())
        if (raw.contains(v))
          max_dev = std::max(max_dev, std::abs(normalize_score(raw.mean(v), expert.mean(v)) - norm.mean(v)));
      text << kind << " normalization: max deviation " << format_fixed(max_dev, 3) << '\n';
    }

    std::vector<StrategySummary> all;
    for (auto s : {Strategy::default_source, Strategy::random, Strategy::top3, Strategy::best})
      all.push_back(strategy_eval(rebuilt, s));
    text << "strategy medians:";
    for (const auto& s : all) text << ' ' << to_string(s.strategy) << ' ' << format_fixed(s.median, 2);
    text << '\n';

    Context sub{ctx.out_dir / dir, ctx.seed, ctx.format, ctx.out, ctx.err, {}};
    emit_matrix(sub, rebuilt, "transfer");
    summarise(sub, rebuilt, "strategies");
    for (auto& e : sub.manifest.outputs) ctx.manifest.outputs.push_back({dir + "/" + e.path, e.hash});
  }
  write_file(ctx, "report.txt", text.str());
  ctx.out << text.str();
  finish(ctx, "report");
  return kExitOk;
}

// CLI11 reads config files only for the top-level app, so run-mini's
// --config file is spliced in as ordinary options ahead of the explicit ones,
// which then take precedence.
std::vector<std::string> expand_run_mini_config(const std::vector<std::string>& args) {
  const auto sub = std::find(args.begin(), args.end(), "run-mini");
  if (sub == args.end()) return args;
  std::string path;
  for (auto it = sub + 1; it != args.end(); ++it) {
    if (*it == "--config" && it + 1 != args.end()) path = *(it + 1);
    if (it->rfind("--config=", 0) == 0) path = it->substr(9);
  }
  if (path.empty()) return args;
  std::vector<std::string> out(args.begin(), sub + 1);
  for (const auto& item : CLI::ConfigINI().from_file(path)) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty() || item.inputs.size() != 1)
      throw CLI::ConversionError(path + ": expected flat 'key = value' lines, got '" + item.fullname() + "'");
    out.push_back("--" + item.name + "=" + item.inputs.front());
  }
  out.insert(out.end(), sub + 1, args.end());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string read_input(std::string_view path) {
  if (path.rfind("bundled:", 0) == 0) return std::string(bundled_file(path.substr(8)));
  std::ifstream in{std::string(path), std::ios::binary};
  if (!in) throw Error("cannot open '" + std::string(path) + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string bundled_dir(std::string_view title) {
  if (title == "SpaceInvaders") return "space_invaders";
  if (title == "Breakout") return "breakout";
  if (title == "Freeway") return "freeway";
  throw Error("no bundled score tables for '" + std::string(title) + "'");
}

std::vector<std::string> bundled_titles() { return {"SpaceInvaders", "Breakout", "Freeway"}; }

TransferMatrix bundled_transfer_matrix(std::string_view title) {
  const auto design = load_design(title);
  const auto dir = "tables/" + bundled_dir(title) + "/";
  std::istringstream expert_in{std::string(bundled_file(dir + "expert.csv"))};
  const auto expert = ingest_score_table(expert_in, design, ScoreKind::expert());
  std::istringstream grid_in{std::string(bundled_file(dir + "transfer_raw.csv"))};
  const auto grid = read_transfer_grid(grid_in, design, GridKind::raw);
  auto evaluations = evaluations_from_grid(design.title(), grid.sources, grid.targets, grid.raw);
  std::istringstream default_in{std::string(bundled_file(dir + "zero_shot_default.csv"))};
  const auto from_default = ingest_score_table(default_in, design, ScoreKind::zero_shot_from({0, 0}));
  auto it = evaluations.find({0, 0});
  if (it == evaluations.end())
    evaluations.emplace(VariantId{0, 0}, from_default);
  else
    fill_missing(it->second, from_default);
  return build_transfer_matrix(design, expert, evaluations);
}

TransferMatrix bundled_published_normalized(std::string_view title) {
  const auto design = load_design(title);
  const auto dir = "tables/" + bundled_dir(title) + "/";
  std::istringstream grid_in{std::string(bundled_file(dir + "transfer_normalized.csv"))};
  auto m = read_transfer_grid(grid_in, design, GridKind::normalized);
  std::istringstream default_in{std::string(bundled_file(dir + "zero_shot_default_normalized.csv"))};
  fill_default_column(m, ingest_score_table(default_in, design, ScoreKind::zero_shot_from({0, 0})));
  return m;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Factorial transfer-curriculum analysis and the MiniFreeway experiment"};
  app.require_subcommand(1);
  std::string out_dir = "curriculab_out";
  std::uint64_t seed = 0;
  std::string format = "csv";
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--seed", seed, "Base random seed")->capture_default_str();
  app.add_option("--format", format, "Table format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

  std::string title, kind = "expert", labels = "code", path, expert_path, default_path;
  std::vector<std::string> paths;
  bool classical = false;
  double alpha = 0.05, threshold = 40.0;

  auto* ingest = app.add_subcommand("ingest", "Validate score tables and write canonical CSV");
  ingest->add_option("--title", title, "Design title")->required();
  ingest->add_option("--kind", kind, "expert, scratch, zero_shot:X_YZ or finetuned:X_YZ")->capture_default_str();
  ingest->add_option("--labels", labels, "Variant label scheme: code or ordinal")->capture_default_str();
  ingest->add_option("paths", paths, "Score table files (or bundled:tables/...)")->required();

  auto* anova = app.add_subcommand("anova", "Type-3 ANOVA with Bonferroni post-hoc tests");
  anova->add_option("--title", title, "Design title")->required();
  anova->add_option("scores", path, "Score table with replicates per variant")->required();
  anova->add_option("--kind", kind, "Score kind recorded in the report")->capture_default_str();
  anova->add_option("--labels", labels, "Variant label scheme: code or ordinal")->capture_default_str();
  anova->add_flag("--robust", "HC3 robust Wald F (default)");
  anova->add_flag("--classical", classical, "Classical F from sigma^2 (X'X)^-1");
  anova->add_option("--alpha", alpha, "Family-wise significance level")->capture_default_str();

  auto* transfer = app.add_subcommand("transfer", "Build raw and normalized transfer matrices");
  transfer->add_option("--title", title, "Design title")->required();
  transfer->add_option("--expert", expert_path, "Expert score table")->required();
  transfer->add_option("--labels", labels, "Variant label scheme: code or ordinal")->capture_default_str();
  transfer->add_option("evaluations", paths, "Raw transfer grids or SOURCE=score_table pairs")->required();

  auto* strategies = app.add_subcommand("strategies", "Source-selection strategy summaries");
  strategies->add_option("--title", title, "Design title")->required();
  strategies->add_option("matrix", path, "Transfer grid (normalized, or raw with --expert)")->required();
  strategies->add_option("--expert", expert_path, "Expert table; treats the matrix as raw scores");
  strategies->add_option("--default-column", default_path, "Per-target scores filling missing 0_00 cells");
  strategies->add_option("--labels", labels, "Variant label scheme: code or ordinal")->capture_default_str();
  strategies->add_option("--min-top3", threshold, "Required top3 median (%)")->capture_default_str();

  MiniOptions mini;
  auto* run_mini = app.add_subcommand("run-mini", "Full transfer protocol on MiniFreeway");
  run_mini->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  run_mini->add_option("--config", config_path, "Flat key = value file; keys are option names without dashes");
  run_mini->add_option("--expert-budget", mini.expert_budget, "Expert training steps")->capture_default_str();
  run_mini->add_option("--finetune-budget", mini.finetune_budget, "Finetune / scratch steps")->capture_default_str();
  run_mini->add_option("--seeds", mini.seeds, "Experts kept per variant")->capture_default_str();
  run_mini->add_option("--grid", mini.grid, "Experts trained per variant (top --seeds kept)")->capture_default_str();
  run_mini->add_option("--workers", mini.workers, "Worker threads")->capture_default_str();
  run_mini->add_option("--episode-limit", mini.episode_limit, "Steps per episode")->capture_default_str();
  run_mini->add_option("--gamma", mini.params.gamma)->capture_default_str();
  run_mini->add_option("--n-step", mini.params.n_step)->capture_default_str();
  run_mini->add_option("--learning-rate", mini.params.learning_rate)->capture_default_str();
  run_mini->add_option("--initial-value", mini.params.initial_value, "Starting Q-value of from-scratch runs")
      ->capture_default_str();
  run_mini->add_option("--anneal-steps", mini.params.epsilon.anneal_steps)->capture_default_str();
  run_mini->add_option("--replay-initial", mini.params.replay_initial)->capture_default_str();
  run_mini->add_option("--replay-capacity", mini.params.replay_capacity)->capture_default_str();
  run_mini->add_option("--target-update-period", mini.params.target_update_period)->capture_default_str();
  run_mini->add_option("--batch-size", mini.params.batch_size)->capture_default_str();
  run_mini->add_option("--sticky-p", mini.params.sticky_p)->capture_default_str();
  run_mini->add_option("--eval-episodes", mini.params.eval_episodes)->capture_default_str();
  run_mini->add_option("--prioritized", mini.params.use_prioritized, "Proportional prioritized replay")
      ->capture_default_str();
  bool no_checkpoints = false;
  run_mini->add_flag("--no-checkpoints", no_checkpoints, "Do not save or resume per-run checkpoints");
  run_mini->add_flag("--quiet", mini.quiet, "No progress messages");

  auto* report = app.add_subcommand("report", "Reproduction report from the bundled score tables");

  std::vector<std::string> expanded;
  std::vector<const char*> argv;
  try {
    expanded = expand_run_mini_config(args);
    for (const auto& a : expanded) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Context ctx{out_dir, seed, format == "json" ? Format::json : Format::csv, out, err, {}};
  try {
    if (*ingest) return cmd_ingest(ctx, title, kind, labels, paths);
    if (*anova) return cmd_anova(ctx, title, path, kind, labels, classical, alpha);
    if (*transfer) return cmd_transfer(ctx, title, expert_path, paths, labels);
    if (*strategies) return cmd_strategies(ctx, title, path, expert_path, default_path, labels, threshold);
    if (*run_mini) {
      mini.checkpoints = !no_checkpoints;
      return cmd_run_mini(ctx, mini);
    }
    if (*report) return cmd_report(ctx);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace curriculab::cli
