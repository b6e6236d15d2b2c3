#pragma once

#include <cstdint>
#include <functional>
#include <memory>

namespace curriculab {

/// One environment step as seen by a tabular learner.
struct Transition {
  int state = 0;
  int action = 0;           // requested by the agent
  int executed_action = 0;  // after sticky-action replacement
  double reward = 0.0;
  int next_state = 0;
  bool terminal = false;   // episode over, no bootstrapping past this step
  bool truncated = false;  // episode over, but next_state still has value
};

/// Finite-state, finite-action episodic environment with an abstract state id
/// in [0, num_states()).
class TabularEnv {
 public:
  virtual ~TabularEnv() = default;

  virtual int num_states() const = 0;
  virtual int num_actions() const = 0;

  /// Starts a new episode and returns its initial state.
  virtual int reset() = 0;
  virtual Transition step(int action) = 0;
};

/// Builds an environment instance seeded with the given seed.
using EnvFactory = std::function<std::unique_ptr<TabularEnv>(std::uint64_t seed)>;

}  // namespace curriculab
