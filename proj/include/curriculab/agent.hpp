#pragma once

// Tabular n-step double Q-learning with a target table, epsilon annealing and
// a (optionally prioritized) replay memory, plus the train / evaluate /
// finetune entry points used by the transfer experiments.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "curriculab/env.hpp"
#include "curriculab/rng.hpp"

namespace curriculab {

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.01;
  long anneal_steps = 20000;
};

/// Linear from start to end over anneal_steps, then constant.
double epsilon_at(const EpsilonSchedule& schedule, long step);

struct AgentParams {
  // A mini crossing takes ~12 steps, a fifth of an Atari one; 0.9 keeps the
  // effective horizon short enough for the 20x shorter finetuning budget.
  double gamma = 0.9;
  int n_step = 3;
  double learning_rate = 0.1;
  EpsilonSchedule epsilon;
  long target_update_period = 1000;
  std::size_t replay_capacity = 50000;
  long replay_initial = 2000;
  double sticky_p = 0.25;
  double priority_exponent = 0.6;
  double importance_exponent = 0.4;
  bool use_prioritized = true;
  int batch_size = 8;
  int update_period = 1;  // environment steps between replay updates
  double initial_value = 0.5;  // from-scratch Q entries; optimistic so every action gets tried

  int eval_episodes = 30;
  double eval_epsilon = 0.01;
  long curve_interval = 10000;  // steps between learning-curve points, 0 = off
  int curve_episodes = 3;

  /// Throws Error when a field is out of range.
  void validate() const;

  /// Warm-up and annealing shortened by `ratio` (at least one step each), for
  /// finetuning and equal-budget scratch runs.
  AgentParams shortened(long ratio) const;
};

inline constexpr int kMaxNStep = 16;

class QTable {
 public:
  QTable() = default;
  QTable(int states, int actions);

  int states() const { return states_; }
  int actions() const { return actions_; }

  double at(int state, int action) const { return values_[index(state, action)]; }
  void set(int state, int action, double value);

  /// Lowest-index maximiser.
  int greedy(int state) const;
  double max(int state) const { return at(state, greedy(state)); }

  const std::vector<double>& values() const { return values_; }
  bool operator==(const QTable&) const = default;

 private:
  std::size_t index(int state, int action) const {
    return static_cast<std::size_t>(state) * static_cast<std::size_t>(actions_) + static_cast<std::size_t>(action);
  }

  int states_ = 0;
  int actions_ = 0;
  std::vector<double> values_;
};

/// Epsilon-greedy action; the random branch is drawn uniformly.
int act(const QTable& q, int state, double epsilon, Rng& rng);

/// sum_{k<m} gamma^k r_k + gamma^m q_target(x_m, argmax_a q_online(x_m, a)),
/// m = min(n, |traj|, first episode end). A terminal (not truncated) end drops
/// the bootstrap term. Throws Error on an empty trajectory.
double nstep_double_q_target(std::span<const Transition> traj, const QTable& q_online, const QTable& q_target,
                             double gamma, int n);

/// q(s,a) += learning_rate * weight * (target - q(s,a)); throws NumericError on
/// a non-finite target.
void q_update(QTable& q, int state, int action, double target, double learning_rate, double weight = 1.0);

/// p_i = priority_i^alpha / sum_j priority_j^alpha. Throws Error when all
/// priorities are zero or any is negative.
std::vector<double> replay_sample_probabilities(std::span<const double> priorities, double alpha);

/// (n p)^-beta, not yet normalised.
double importance_weight(double probability, std::size_t buffer_size, double beta);

/// importance_weight for each sampled probability, divided by the batch max.
std::vector<double> importance_weights(std::span<const double> probabilities, std::size_t buffer_size, double beta);

// ---------------------------------------------------------------------------

/// Binary sum tree over a fixed number of leaves.
class SumTree {
 public:
  explicit SumTree(std::size_t leaves);

  void set(std::size_t leaf, double value);
  double get(std::size_t leaf) const { return nodes_[base_ + leaf]; }
  double total() const { return nodes_[1]; }

  /// Leaf whose cumulative interval contains mass in [0, total()).
  std::size_t find(double mass) const;

 private:
  std::size_t base_ = 1;
  std::vector<double> nodes_;
};

/// FIFO ring of transitions. Logical index 0 is the oldest entry.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, bool prioritized, double alpha);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool prioritized() const { return prioritized_; }

  /// Appends, evicting the oldest entry when full. New entries receive the
  /// largest priority seen so far.
  void push(const Transition& t);

  const Transition& at(std::size_t logical) const;

  /// Up to n consecutive transitions starting at `logical`, stopping after an
  /// episode end or at the newest entry.
  std::vector<Transition> window(std::size_t logical, int n) const;

  struct Sample {
    std::size_t logical = 0;
    double probability = 0.0;
  };

  /// Draws `count` indices with replacement, uniformly or in proportion to
  /// priority^alpha.
  std::vector<Sample> sample(std::size_t count, Rng& rng) const;

  /// Priority becomes |td_error| + 1e-6.
  void update_priority(std::size_t logical, double td_error);
  double priority(std::size_t logical) const;

 private:
  std::size_t slot(std::size_t logical) const { return (head_ + logical) % capacity_; }

  std::size_t capacity_;
  bool prioritized_;
  double alpha_;
  std::vector<Transition> ring_;
  std::size_t head_ = 0;  // slot of the oldest entry
  std::size_t size_ = 0;
  std::vector<double> priorities_;
  SumTree tree_;  // priority^alpha per slot
  double max_priority_ = 1.0;
};

// ---------------------------------------------------------------------------

struct CurvePoint {
  long step = 0;
  double eval_return = 0.0;
};

struct TrainResult {
  QTable q;
  std::vector<CurvePoint> curve;
  double final_score = 0.0;
};

/// Mean episode return of the epsilon-greedy policy on fresh environments
/// from `make_env(seed)`; episodes run back to back on one instance.
double evaluate(const QTable& q, const EnvFactory& make_env, int episodes, double epsilon, std::uint64_t seed);

/// Runs `budget` environment steps. The first replay_initial steps act
/// uniformly at random and only fill the memory; afterwards epsilon follows
/// the schedule counted from the end of the warm-up. The target table is
/// synced every target_update_period steps. Starting from `initial` when
/// given, otherwise from a table filled with params.initial_value. The final score is evaluate() with
/// params.eval_episodes on make_env(eval_seed).
TrainResult train(const EnvFactory& make_env, const AgentParams& params, long budget, std::uint64_t seed,
                  std::uint64_t eval_seed, const std::optional<QTable>& initial = std::nullopt);

/// train() from zeros; throws Error when budget < replay_initial.
TrainResult train_expert(const EnvFactory& make_env, const AgentParams& params, long budget, std::uint64_t seed,
                         std::uint64_t eval_seed);

/// Continues from q with params.shortened(ratio) on the new environment.
/// A zero budget returns q unchanged with its zero-shot score.
TrainResult finetune(const QTable& q, const EnvFactory& make_env, const AgentParams& params, long budget,
                     long ratio, std::uint64_t seed, std::uint64_t eval_seed);

// ---------------------------------------------------------------------------
// Checkpoints: a CSV dump of the Q-table.
//
//   # curriculab-qtable v1
//   # states <S> actions <A> final_score <score>
//   # curve <step>:<return>;<step>:<return>;...
//   state,action,value
//   0,0,<value>
//   ...

void write_checkpoint(std::ostream& out, const TrainResult& result);

/// Throws ParseError on a malformed or version-mismatched file.
TrainResult read_checkpoint(std::istream& in);

}  // namespace curriculab
