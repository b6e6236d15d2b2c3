#pragma once

// A two-state deterministic MDP and its value-iteration solution.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>

#include "curriculab/env.hpp"

namespace oracle {

// State 0 --a0--> 0 (r 0), 0 --a1--> 1 (r 1); 1 --a0--> 0 (r 2), 1 --a1--> 1 (r 0).
// Episodes never terminate on their own; `limit` steps end them as a
// truncation so bootstrapping continues through the cut.
struct TwoStateSpec {
  std::array<std::array<int, 2>, 2> next{{{0, 1}, {0, 1}}};
  std::array<std::array<double, 2>, 2> reward{{{0.0, 1.0}, {2.0, 0.0}}};
};

class TwoStateMdp final : public curriculab::TabularEnv {
 public:
  TwoStateMdp(TwoStateSpec spec, int limit) : spec_(spec), limit_(limit) {}

  int num_states() const override { return 2; }
  int num_actions() const override { return 2; }
  int reset() override {
    state_ = 0;
    clock_ = 0;
    return state_;
  }
  curriculab::Transition step(int action) override {
    curriculab::Transition t;
    t.state = state_;
    t.action = action;
    t.executed_action = action;
    t.reward = spec_.reward[static_cast<std::size_t>(state_)][static_cast<std::size_t>(action)];
    state_ = spec_.next[static_cast<std::size_t>(state_)][static_cast<std::size_t>(action)];
    t.next_state = state_;
    ++clock_;
    t.terminal = clock_ >= limit_;
    t.truncated = t.terminal;
    return t;
  }

 private:
  TwoStateSpec spec_;
  int limit_;
  int state_ = 0;
  int clock_ = 0;
};

inline std::array<std::array<double, 2>, 2> value_iteration(const TwoStateSpec& spec, double gamma) {
  std::array<std::array<double, 2>, 2> q{};
  for (int sweep = 0; sweep < 100000; ++sweep) {
    double change = 0.0;
    auto next = q;
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t a = 0; a < 2; ++a) {
        const auto x = static_cast<std::size_t>(spec.next[s][a]);
        next[s][a] = spec.reward[s][a] + gamma * std::max(q[x][0], q[x][1]);
        change = std::max(change, std::abs(next[s][a] - q[s][a]));
      }
    q = next;
    if (change < 1e-14) break;
  }
  return q;
}

}  // namespace oracle
