#include "curriculab/mini_freeway.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "curriculab/error.hpp"

namespace curriculab {

int MiniEnvConfig::cars_in_lane() const {
  const int wanted = cars_per_lane ? *cars_per_lane : traffic_level + 1;
  return std::clamp(wanted, 0, width);
}

MiniEnvConfig MiniEnvConfig::for_variant(const FactorialDesign& design, VariantId id, std::uint64_t seed) {
  const auto levels = decode_variant(design, id);
  auto level_of = [&](std::string_view name) {
    for (std::size_t f = 0; f < design.factors().size(); ++f)
      if (design.factors()[f].name == name) return levels.assignment[f];
    throw InvalidVariant(design.title() + " has no '" + std::string(name) + "' factor; not a MiniFreeway design");
  };
  MiniEnvConfig config;
  config.difficulty = level_of("Difficulty") == 0 ? Knockback::one_lane : Knockback::to_kerb;
  config.traffic_level = level_of("Traffic");
  config.speeds = level_of("Speeds") == 0 ? SpeedMode::constant : SpeedMode::randomised;
  config.seed = seed;
  return config;
}

MiniFreeway::MiniFreeway(MiniEnvConfig config) : config_(std::move(config)), rng_(config_.seed) {
  if (config_.lanes < 1 || config_.width < 1) throw Error("MiniFreeway needs at least one lane and one column");
  if (config_.chicken_column < 0 || config_.chicken_column >= config_.width)
    throw Error("chicken column outside the road");
  if (config_.traffic_level < 0 || config_.traffic_level > 3) throw Error("traffic level must be 0..3");
  if (config_.episode_limit < 1) throw Error("episode limit must be positive");
  if (!(config_.sticky_p >= 0.0 && config_.sticky_p <= 1.0)) throw Error("sticky probability must lie in [0, 1]");
  if (config_.cars_per_lane && *config_.cars_per_lane < 0) throw Error("cars per lane must be non-negative");
}

int MiniFreeway::num_states() const { return config_.rows() * 8; }

int MiniFreeway::lane_direction(int lane_index) const { return lane_index < (config_.lanes + 1) / 2 ? 1 : -1; }

int MiniFreeway::reset() {
  const int lanes = config_.lanes;
  const int width = config_.width;
  const int cars = config_.cars_in_lane();
  state_ = EnvState{};
  state_.car_positions.assign(static_cast<std::size_t>(lanes), {});
  state_.car_speeds.assign(static_cast<std::size_t>(lanes), 1);
  std::vector<int> columns(static_cast<std::size_t>(width));
  for (int lane = 0; lane < lanes; ++lane) {
    // Partial Fisher-Yates: the first `cars` entries are distinct columns.
    std::iota(columns.begin(), columns.end(), 0);
    for (int i = 0; i < cars; ++i) {
      const auto j = static_cast<std::size_t>(i) + rng_.below(static_cast<std::uint64_t>(width - i));
      std::swap(columns[static_cast<std::size_t>(i)], columns[j]);
    }
    auto& positions = state_.car_positions[static_cast<std::size_t>(lane)];
    positions.assign(columns.begin(), columns.begin() + cars);
    std::sort(positions.begin(), positions.end());
    if (config_.speeds == SpeedMode::randomised)
      state_.car_speeds[static_cast<std::size_t>(lane)] = 1 + static_cast<int>(rng_.below(2));
  }
  started_ = true;
  return abstract_state();
}

bool MiniFreeway::car_at(int row, int column) const {
  if (row < 1 || row > config_.lanes) return false;
  const auto& positions = state_.car_positions[static_cast<std::size_t>(row - 1)];
  return std::find(positions.begin(), positions.end(), column) != positions.end();
}

bool MiniFreeway::danger_after_move(int row) const {
  if (row < 1 || row > config_.lanes) return false;
  const auto lane = static_cast<std::size_t>(row - 1);
  const int shift = lane_direction(row - 1) * state_.car_speeds[lane];
  const int width = config_.width;
  for (int p : state_.car_positions[lane])
    if (((p + shift) % width + width) % width == config_.chicken_column) return true;
  return false;
}

int MiniFreeway::abstract_state() const {
  const int row = state_.chicken_row;
  const int bits = (danger_after_move(row - 1) ? 1 : 0) | (danger_after_move(row) ? 2 : 0) |
                   (danger_after_move(row + 1) ? 4 : 0);
  return row * 8 + bits;
}

Transition MiniFreeway::step(int action) {
  if (!started_) throw Error("step before reset");
  if (episode_over()) throw Error("step after the episode reached its time limit");
  if (action < 0 || action >= kMiniActions) throw Error("invalid action " + std::to_string(action));

  Transition t;
  t.state = abstract_state();
  t.action = action;
  const bool repeat = rng_.bernoulli(config_.sticky_p);
  const Action executed = repeat ? state_.previous_action : static_cast<Action>(action);
  t.executed_action = static_cast<int>(executed);

  int row = state_.chicken_row;
  if (executed == Action::up) row = std::min(row + 1, config_.rows() - 1);
  if (executed == Action::down) row = std::max(row - 1, 0);
  if (row == config_.rows() - 1) {
    t.reward = 1.0;
    row = 0;
  }
  state_.chicken_row = row;

  const int width = config_.width;
  for (int lane = 0; lane < config_.lanes; ++lane) {
    const int shift = lane_direction(lane) * state_.car_speeds[static_cast<std::size_t>(lane)];
    for (int& p : state_.car_positions[static_cast<std::size_t>(lane)]) p = ((p + shift) % width + width) % width;
  }

  if (car_at(state_.chicken_row, config_.chicken_column))
    state_.chicken_row = config_.difficulty == Knockback::one_lane ? state_.chicken_row - 1 : 0;

  state_.previous_action = executed;
  ++state_.clock;
  t.next_state = abstract_state();
  t.terminal = episode_over();
  t.truncated = t.terminal;  // time limit: the abstract state keeps its value
  return t;
}

std::uint64_t MiniFreeway::state_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::int64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= static_cast<std::uint64_t>(v >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(state_.chicken_row);
  mix(state_.clock);
  mix(static_cast<int>(state_.previous_action));
  for (std::size_t lane = 0; lane < state_.car_positions.size(); ++lane) {
    mix(state_.car_speeds[lane]);
    for (int p : state_.car_positions[lane]) mix(p);
    mix(-1);
  }
  return h;
}

EnvFactory mini_freeway_factory(MiniEnvConfig base) {
  return [base](std::uint64_t seed) -> std::unique_ptr<TabularEnv> {
    MiniEnvConfig config = base;
    config.seed = seed;
    return std::make_unique<MiniFreeway>(config);
  };
}

double episode_return(MiniFreeway& env, const StatePolicy& policy) {
  int state = env.reset();
  double total = 0.0;
  while (!env.episode_over()) {
    const auto t = env.step(policy(state));
    total += t.reward;
    state = t.next_state;
  }
  return total;
}

void dump_trajectory(std::ostream& out, MiniFreeway& env, const StatePolicy& policy) {
  out << "t,state_hash,action,reward\n";
  int state = env.reset();
  while (!env.episode_over()) {
    const auto hash = env.state_hash();
    const Action a = policy(state);
    const auto t = env.step(a);
    out << env.state().clock - 1 << ',' << hash << ',' << static_cast<int>(a) << ',' << t.reward << '\n';
    state = t.next_state;
  }
}

}  // namespace curriculab
