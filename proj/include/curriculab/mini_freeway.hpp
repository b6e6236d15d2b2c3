#pragma once

// MiniFreeway: a gridworld family with Freeway's 16-variant factorial design.
//
// Geometry: 12 rows (row 0 start kerb, rows 1..10 lanes, row 11 far kerb) by
// 12 columns. The chicken always stands in column 3. Lanes 1..5 drive right,
// lanes 6..10 drive left, cars wrap around horizontally. On 8 columns, four
// random cars per lane leave most layouts with no collision-free crossing at
// all, so the road is 12 wide by default.
//
// One step: the executed action moves the chicken one row (clamped to the
// kerbs); arriving on the far kerb pays 1 and puts the chicken back on row 0.
// Then every car advances by its lane speed. A collision happens when a car
// occupies the chicken's cell after both moves; it knocks the chicken back one
// row or all the way to row 0, depending on the difficulty switch.
//
// Factors: difficulty (knock-back one lane / to kerb); traffic (1, 2, 3 or 4
// cars per lane at distinct random columns, redrawn every episode); speeds
// (all lanes 1 cell/step, or each lane drawn from {1, 2} every episode).
//
// Tabular abstraction: state = row * 8 + danger bits, where bit 0/1/2 is set
// when, after the cars' next move, a car will sit in the chicken's column on
// row-1 / row / row+1 respectively (kerb rows never carry cars). The bits are
// exactly what decides whether each action collides, so 96 states suffice and
// every variant shares the same state space.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "curriculab/design.hpp"
#include "curriculab/env.hpp"
#include "curriculab/rng.hpp"

namespace curriculab {

enum class Action : int { noop = 0, up = 1, down = 2 };
inline constexpr int kMiniActions = 3;

enum class Knockback { one_lane, to_kerb };
enum class SpeedMode { constant, randomised };

struct MiniEnvConfig {
  Knockback difficulty = Knockback::one_lane;
  int traffic_level = 0;  // 0 default, 1 thick, 2 thicker, 3 thickest
  SpeedMode speeds = SpeedMode::constant;
  int lanes = 10;
  int width = 12;
  int chicken_column = 3;
  int episode_limit = 500;
  double sticky_p = 0.25;
  std::uint64_t seed = 0;
  std::optional<int> cars_per_lane;  // overrides the traffic level (tests)

  int rows() const { return lanes + 2; }
  int cars_in_lane() const;

  /// Config for a MiniFreeway variant; throws InvalidVariant.
  static MiniEnvConfig for_variant(const FactorialDesign& design, VariantId id, std::uint64_t seed);
};

struct EnvState {
  int chicken_row = 0;
  std::vector<std::vector<int>> car_positions;  // per lane (index 0 = row 1)
  std::vector<int> car_speeds;                  // per lane, cells per step
  int clock = 0;
  Action previous_action = Action::noop;
};

class MiniFreeway final : public TabularEnv {
 public:
  explicit MiniFreeway(MiniEnvConfig config);

  int num_states() const override;
  int num_actions() const override { return kMiniActions; }

  int reset() override;
  Transition step(int action) override;
  Transition step(Action action) { return step(static_cast<int>(action)); }

  const EnvState& state() const { return state_; }
  const MiniEnvConfig& config() const { return config_; }
  int abstract_state() const;
  bool episode_over() const { return state_.clock >= config_.episode_limit; }

  /// FNV-1a hash of the full state, used in trajectory dumps.
  std::uint64_t state_hash() const;

 private:
  bool car_at(int row, int column) const;
  bool danger_after_move(int row) const;
  int lane_direction(int lane_index) const;

  MiniEnvConfig config_;
  Rng rng_;
  EnvState state_;
  bool started_ = false;
};

EnvFactory mini_freeway_factory(MiniEnvConfig base);

/// A deterministic policy over abstract states.
using StatePolicy = std::function<Action(int state)>;

/// Runs one episode from reset to the time limit and returns the number of
/// far-kerb arrivals.
double episode_return(MiniFreeway& env, const StatePolicy& policy);

/// Writes `t,state_hash,action,reward` rows for one episode.
void dump_trajectory(std::ostream& out, MiniFreeway& env, const StatePolicy& policy);

}  // namespace curriculab
