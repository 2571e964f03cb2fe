#include "movilab/garnet.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "movilab/rng.hpp"

namespace movilab {

void GarnetSpec::validate() const {
  detail::require(n_states >= 1, "GarnetSpec: n_states must be >= 1");
  detail::require(n_actions >= 1, "GarnetSpec: n_actions must be >= 1");
  detail::require(branching >= 1 && branching <= n_states,
                  "GarnetSpec: branching must lie in [1, n_states]");
}

FiniteMdp generate(const GarnetSpec& spec, double gamma) {
  spec.validate();
  detail::require(gamma > 0.0 && gamma < 1.0, "generate: gamma must lie in (0,1)");
  const int ns = spec.n_states, na = spec.n_actions, nb = spec.branching;
  Rng rng(spec.seed);

  std::vector<double> transition(static_cast<std::size_t>(ns) * na * ns, 0.0);
  std::vector<int> pool(ns);
  std::vector<double> cuts(nb + 1);
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      // Support: partial Fisher-Yates draw of `nb` distinct states.
      std::iota(pool.begin(), pool.end(), 0);
      for (int i = 0; i < nb; ++i) {
        const int j = i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(ns - i)));
        std::swap(pool[i], pool[j]);
      }
      // Probabilities: gaps between sorted cut points 0 < p_1 < ... < p_{nb-1} < 1.
      // Coinciding cut points would shrink the support, so the whole cut set
      // is redrawn in that (probability-zero) case.
      for (;;) {
        cuts[0] = 0.0;
        for (int i = 1; i < nb; ++i) cuts[i] = rng.next_open_unit();
        cuts[nb] = 1.0;
        std::sort(cuts.begin() + 1, cuts.begin() + nb);
        bool distinct = true;
        for (int i = 1; i <= nb; ++i)
          if (cuts[i] == cuts[i - 1]) { distinct = false; break; }
        if (distinct) break;
      }
      double* row = &transition[(static_cast<std::size_t>(s) * na + a) * ns];
      for (int i = 0; i < nb; ++i) row[pool[i]] = cuts[i + 1] - cuts[i];
    }
  }

  // State rewards in (-1, 1), shared by all actions of a state.
  std::vector<double> reward(static_cast<std::size_t>(ns) * na);
  for (int s = 0; s < ns; ++s) {
    const double r = 2.0 * rng.next_open_unit() - 1.0;
    for (int a = 0; a < na; ++a) reward[static_cast<std::size_t>(s) * na + a] = r;
  }

  return FiniteMdp(ns, na, std::move(transition), std::move(reward), gamma, 1.0);
}

}  // namespace movilab
