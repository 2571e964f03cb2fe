#pragma once

#include <cstdint>
#include <vector>

#include "movilab/mdp.hpp"

namespace movilab {

// Per-iteration record of a tracked run: the realized update noise and the
// acting policy of every step, plus the endpoints needed to evaluate the
// error-propagation bounds afterwards.
//
// Entry i (1-based via the accessors) belongs to iteration i.  For sampled
// runs epsilon(i) is the difference between the sampled and the exact
// operator application that produced iterate i; for exact runs it is zero or
// the externally injected noise.
struct ErrorLedger {
  std::vector<QTable> epsilons;
  std::vector<DeterministicPolicy> policies;
  QTable q0;
  QTable q_latest;

  int steps() const { return static_cast<int>(epsilons.size()); }
  const QTable& epsilon(int i) const { return epsilons[static_cast<std::size_t>(i) - 1]; }
  const DeterministicPolicy& policy(int i) const {
    return policies[static_cast<std::size_t>(i) - 1];
  }

  // Bytes needed to track `iterations` steps of an MDP with the given shape.
  static std::size_t memory_estimate(int n_states, int n_actions, long iterations) {
    const std::size_t per_step =
        static_cast<std::size_t>(n_states) * n_actions * sizeof(double) +
        static_cast<std::size_t>(n_states) * sizeof(int);
    return per_step * static_cast<std::size_t>(iterations);
  }
};

}  // namespace movilab
