#include "curriculab/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "curriculab/error.hpp"
#include "curriculab/text_io.hpp"

namespace curriculab {

double epsilon_at(const EpsilonSchedule& schedule, long step) {
  if (step < 0) throw Error("epsilon schedule queried at a negative step");
  if (schedule.anneal_steps <= 0 || step >= schedule.anneal_steps) return schedule.end;
  const double frac = static_cast<double>(step) / static_cast<double>(schedule.anneal_steps);
  return schedule.start + (schedule.end - schedule.start) * frac;
}

void AgentParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(std::string("invalid agent parameter: ") + what);
  };
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  require(n_step >= 1 && n_step <= kMaxNStep, "n_step must lie in [1, 16]");
  require(learning_rate > 0.0 && learning_rate <= 1.0, "learning_rate must lie in (0, 1]");
  require(epsilon.start >= 0.0 && epsilon.start <= 1.0, "epsilon start must lie in [0, 1]");
  require(epsilon.end >= 0.0 && epsilon.end <= 1.0, "epsilon end must lie in [0, 1]");
  require(epsilon.anneal_steps >= 0, "anneal_steps must be non-negative");
  require(target_update_period >= 1, "target_update_period must be positive");
  require(replay_capacity >= 1, "replay_capacity must be positive");
  require(replay_initial >= 0, "replay_initial must be non-negative");
  require(sticky_p >= 0.0 && sticky_p <= 1.0, "sticky_p must lie in [0, 1]");
  require(priority_exponent >= 0.0, "priority_exponent must be non-negative");
  require(importance_exponent >= 0.0, "importance_exponent must be non-negative");
  require(batch_size >= 1, "batch_size must be positive");
  require(update_period >= 1, "update_period must be positive");
  require(eval_episodes >= 1, "eval_episodes must be positive");
  require(eval_epsilon >= 0.0 && eval_epsilon <= 1.0, "eval_epsilon must lie in [0, 1]");
  require(curve_interval >= 0, "curve_interval must be non-negative");
  require(curve_episodes >= 1, "curve_episodes must be positive");
  require(std::isfinite(initial_value), "initial_value must be finite");
}

AgentParams AgentParams::shortened(long ratio) const {
  if (ratio < 1) throw Error("shortening ratio must be positive");
  AgentParams p = *this;
  p.replay_initial = std::max(1L, replay_initial / ratio);
  p.epsilon.anneal_steps = std::max(1L, epsilon.anneal_steps / ratio);
  if (curve_interval > 0) p.curve_interval = std::max(1L, curve_interval / ratio);
  return p;
}

// ---------------------------------------------------------------------------

QTable::QTable(int states, int actions) : states_(states), actions_(actions) {
  if (states < 1 || actions < 1) throw Error("Q-table needs at least one state and one action");
  values_.assign(static_cast<std::size_t>(states) * static_cast<std::size_t>(actions), 0.0);
}

void QTable::set(int state, int action, double value) {
  if (!std::isfinite(value)) throw NumericError("Q-values must be finite");
  values_[index(state, action)] = value;
}

int QTable::greedy(int state) const {
  const double* row = values_.data() + index(state, 0);
  int best = 0;
  for (int a = 1; a < actions_; ++a)
    if (row[a] > row[best]) best = a;
  return best;
}

int act(const QTable& q, int state, double epsilon, Rng& rng) {
  if (epsilon > 0.0 && rng.uniform() < epsilon) return static_cast<int>(rng.below(static_cast<std::uint64_t>(q.actions())));
  return q.greedy(state);
}

double nstep_double_q_target(std::span<const Transition> traj, const QTable& q_online, const QTable& q_target,
                             double gamma, int n) {
  if (traj.empty()) throw Error("n-step target needs at least one transition");
  if (n < 1) throw Error("n-step target needs n >= 1");
  const std::size_t m = std::min(traj.size(), static_cast<std::size_t>(n));
  double total = 0.0;
  double discount = 1.0;
  for (std::size_t k = 0; k < m; ++k) {
    total += discount * traj[k].reward;
    discount *= gamma;
    if (traj[k].terminal && !traj[k].truncated) return total;
    if (traj[k].terminal || k + 1 == m) {
      const int x = traj[k].next_state;
      return total + discount * q_target.at(x, q_online.greedy(x));
    }
  }
  return total;  // unreachable
}

void q_update(QTable& q, int state, int action, double target, double learning_rate, double weight) {
  if (!std::isfinite(target)) throw NumericError("non-finite Q-learning target");
  const double current = q.at(state, action);
  q.set(state, action, current + learning_rate * weight * (target - current));
}

// ---------------------------------------------------------------------------

double evaluate(const QTable& q, const EnvFactory& make_env, int episodes, double epsilon, std::uint64_t seed) {
  if (episodes < 1) throw Error("evaluation needs at least one episode");
  auto env = make_env(seed);
  if (env->num_states() != q.states() || env->num_actions() != q.actions())
    throw Error("Q-table shape does not match the environment");
  Rng rng(derive_seed(seed, 0xe7a1));
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    int state = env->reset();
    while (true) {
      const auto t = env->step(act(q, state, epsilon, rng));
      total += t.reward;
      if (t.terminal) break;
      state = t.next_state;
    }
  }
  return total / episodes;
}

TrainResult train(const EnvFactory& make_env, const AgentParams& params, long budget, std::uint64_t seed,
                  std::uint64_t eval_seed, const std::optional<QTable>& initial) {
  params.validate();
  if (budget < 0) throw Error("training budget must be non-negative");
  auto env = make_env(derive_seed(seed, 1));
  Rng rng(derive_seed(seed, 2));

  TrainResult result;
  if (initial) {
    result.q = *initial;
  } else {
    result.q = QTable(env->num_states(), env->num_actions());
    for (int s = 0; s < result.q.states(); ++s)
      for (int a = 0; a < result.q.actions(); ++a) result.q.set(s, a, params.initial_value);
  }
  if (result.q.states() != env->num_states() || result.q.actions() != env->num_actions())
    throw Error("initial Q-table shape does not match the environment");
  QTable& q = result.q;
  QTable target = q;
  ReplayBuffer memory(params.replay_capacity, params.use_prioritized, params.priority_exponent);

  std::vector<double> probabilities;
  int state = env->reset();
  for (long step = 0; step < budget; ++step) {
    const double epsilon = step < params.replay_initial ? 1.0 : epsilon_at(params.epsilon, step - params.replay_initial);
    const auto t = env->step(act(q, state, epsilon, rng));
    memory.push(t);
    state = t.terminal ? env->reset() : t.next_state;

    if (step >= params.replay_initial && (step - params.replay_initial) % params.update_period == 0) {
      const auto batch = memory.sample(static_cast<std::size_t>(params.batch_size), rng);
      probabilities.clear();
      for (const auto& s : batch) probabilities.push_back(s.probability);
      const auto weights = params.use_prioritized
                               ? importance_weights(probabilities, memory.size(), params.importance_exponent)
                               : std::vector<double>(batch.size(), 1.0);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto window = memory.window(batch[i].logical, params.n_step);
        const auto& first = window.front();
        const double y = nstep_double_q_target(window, q, target, params.gamma, params.n_step);
        const double td = y - q.at(first.state, first.action);
        q_update(q, first.state, first.action, y, params.learning_rate, weights[i]);
        memory.update_priority(batch[i].logical, td);
      }
    }
    if ((step + 1) % params.target_update_period == 0) target = q;
    if (params.curve_interval > 0 && (step + 1) % params.curve_interval == 0)
      result.curve.push_back({step + 1, evaluate(q, make_env, params.curve_episodes, params.eval_epsilon,
                                                 derive_seed(eval_seed, static_cast<std::uint64_t>(step + 1)))});
  }
  result.final_score = evaluate(q, make_env, params.eval_episodes, params.eval_epsilon, eval_seed);
  return result;
}

TrainResult train_expert(const EnvFactory& make_env, const AgentParams& params, long budget, std::uint64_t seed,
                         std::uint64_t eval_seed) {
  if (budget < params.replay_initial)
    throw Error("expert budget " + std::to_string(budget) + " is below the replay warm-up of " +
                std::to_string(params.replay_initial) + " steps");
  return train(make_env, params, budget, seed, eval_seed);
}

TrainResult finetune(const QTable& q, const EnvFactory& make_env, const AgentParams& params, long budget, long ratio,
                     std::uint64_t seed, std::uint64_t eval_seed) {
  return train(make_env, params.shortened(ratio), budget, seed, eval_seed, q);
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::string_view kCheckpointMagic = "# curriculab-qtable v1";
}

void write_checkpoint(std::ostream& out, const TrainResult& result) {
  out << kCheckpointMagic << '\n';
  out << "# states " << result.q.states() << " actions " << result.q.actions() << " final_score "
      << format_double(result.final_score) << '\n';
  out << "# curve ";
  for (std::size_t i = 0; i < result.curve.size(); ++i)
    out << (i ? ";" : "") << result.curve[i].step << ':' << format_double(result.curve[i].eval_return);
  out << '\n';
  out << "state,action,value\n";
  for (int s = 0; s < result.q.states(); ++s)
    for (int a = 0; a < result.q.actions(); ++a) out << s << ',' << a << ',' << format_double(result.q.at(s, a)) << '\n';
}

TrainResult read_checkpoint(std::istream& in) {
  std::string line;
  std::size_t number = 0;
  auto next = [&]() {
    if (!std::getline(in, line)) throw ParseError("truncated checkpoint", number + 1);
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return std::string_view(line);
  };
  if (next() != kCheckpointMagic) throw ParseError("not a curriculab-qtable v1 checkpoint", number);

  TrainResult result;
  int states = 0;
  int actions = 0;
  {
    char score[64] = {};
    if (std::sscanf(std::string(next()).c_str(), "# states %d actions %d final_score %63s", &states, &actions, score) != 3)
      throw ParseError("malformed checkpoint header", number);
    const auto value = parse_double(score);
    if (!value) throw ParseError("malformed final score", number);
    result.final_score = *value;
  }
  if (states < 1 || actions < 1) throw ParseError("checkpoint has an empty Q-table", number);
  {
    auto curve = next();
    if (curve.substr(0, 8) != "# curve ") throw ParseError("missing curve line", number);
    curve.remove_prefix(8);
    while (!curve.empty()) {
      const auto semi = curve.find(';');
      const auto item = curve.substr(0, semi);
      const auto colon = item.find(':');
      const auto step = parse_double(item.substr(0, colon));
      const auto ret = colon == std::string_view::npos ? std::nullopt : parse_double(item.substr(colon + 1));
      if (!step || !ret) throw ParseError("malformed curve entry", number);
      result.curve.push_back({static_cast<long>(*step), *ret});
      if (semi == std::string_view::npos) break;
      curve.remove_prefix(semi + 1);
    }
  }
  if (next() != "state,action,value") throw ParseError("expected 'state,action,value'", number);
  result.q = QTable(states, actions);
  for (int s = 0; s < states; ++s) {
    for (int a = 0; a < actions; ++a) {
      const auto fields = split_csv_line(next());
      const auto value = fields.size() == 3 ? parse_double(fields[2]) : std::nullopt;
      if (!value || fields[0] != std::to_string(s) || fields[1] != std::to_string(a))
        throw ParseError("expected row " + std::to_string(s) + "," + std::to_string(a) + ",<value>", number);
      result.q.set(s, a, *value);
    }
  }
  return result;
}

}  // namespace curriculab
