#pragma once

#include <cstdint>

#include "movilab/mdp.hpp"

namespace movilab {

// Recipe for a random MDP with controlled branching factor.
//
// For each (s, a): `branching` distinct next states are drawn uniformly
// without replacement, and their probabilities are the gaps between
// branching-1 sorted uniform cut points in (0, 1).  Rewards are drawn
// uniformly in (-1, 1) per state and replicated across actions, so r_max = 1.
// The discount is not part of the recipe; callers pick it when the MDP is
// materialized.
struct GarnetSpec {
  int n_states = 0;
  int n_actions = 0;
  int branching = 0;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument unless 1 <= branching <= n_states and both
  // spaces are nonempty.
  void validate() const;
};

// Deterministic: the same spec always yields the same MDP, bit for bit.
FiniteMdp generate(const GarnetSpec& spec, double gamma);

}  // namespace movilab
