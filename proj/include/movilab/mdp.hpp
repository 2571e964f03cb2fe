#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace movilab {

// Dense table of one value per state-action pair, row-major in (state, action).
struct QTable {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> v;  // size n_states * n_actions

  QTable() = default;
  QTable(int states, int actions, double fill = 0.0)
      : n_states(states), n_actions(actions),
        v(static_cast<std::size_t>(states) * actions, fill) {}

  double& at(int s, int a) { return v[static_cast<std::size_t>(s) * n_actions + a]; }
  double at(int s, int a) const { return v[static_cast<std::size_t>(s) * n_actions + a]; }
  std::size_t size() const { return v.size(); }
  bool same_shape(const QTable& o) const {
    return n_states == o.n_states && n_actions == o.n_actions;
  }
};

// One action index per state.
struct DeterministicPolicy {
  std::vector<int> action;

  int n_states() const { return static_cast<int>(action.size()); }
  bool operator==(const DeterministicPolicy& o) const { return action == o.action; }
};

// Probability mass over state-action pairs, same layout as QTable.
struct DistributionSA {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> mass;

  DistributionSA() = default;
  DistributionSA(int states, int actions, double fill = 0.0)
      : n_states(states), n_actions(actions),
        mass(static_cast<std::size_t>(states) * actions, fill) {}

  double at(int s, int a) const { return mass[static_cast<std::size_t>(s) * n_actions + a]; }
  double& at(int s, int a) { return mass[static_cast<std::size_t>(s) * n_actions + a]; }

  // Throws std::invalid_argument unless entries are nonnegative and sum to 1
  // within 1e-12.
  void validate() const;
};

DistributionSA uniform_sa(int n_states, int n_actions);

// Finite discounted MDP with dense transition kernel.
//
// transition is indexed [(s * n_actions + a) * n_states + s'] and every
// (s, a) row is a probability distribution over next states.  Rewards depend
// on (s, a) and are bounded by r_max.  Instances are immutable by convention:
// every operation below takes a const reference.
struct FiniteMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transition;  // n_states * n_actions * n_states
  std::vector<double> reward;      // n_states * n_actions
  double gamma = 0.0;
  double r_max = 0.0;

  FiniteMdp() = default;
  FiniteMdp(int states, int actions, std::vector<double> trans,
            std::vector<double> rew, double discount, double reward_bound);

  double p(int s, int a, int s2) const {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double r(int s, int a) const { return reward[static_cast<std::size_t>(s) * n_actions + a]; }
  double q_max() const { return r_max / (1.0 - gamma); }

  // Throws std::invalid_argument on malformed rows (sum != 1 within 1e-12 or
  // negative mass), gamma outside (0,1), or |reward| > r_max.
  void validate() const;
};

// --- Bellman machinery -----------------------------------------------------

// (P_pi q)(s,a) = sum_{s'} P(s'|s,a) q(s', pi(s')).
QTable apply_policy_kernel(const FiniteMdp& mdp, const DeterministicPolicy& pi,
                           const QTable& q);

// T_pi q = r + gamma * P_pi q.
QTable bellman_eval(const FiniteMdp& mdp, const DeterministicPolicy& pi, const QTable& q);

// (T_* q)(s,a) = r(s,a) + gamma * sum_{s'} P(s'|s,a) max_{a'} q(s',a').
QTable bellman_opt(const FiniteMdp& mdp, const QTable& q);

// Greedy policy; ties broken toward the lowest action index.
DeterministicPolicy greedy(const QTable& q);

// Solves (I - gamma P_pi) y = x by dense factorization.
QTable solve_resolvent(const FiniteMdp& mdp, const DeterministicPolicy& pi, const QTable& x);

// q_pi, the fixed point of T_pi, by dense linear solve.  Throws
// std::runtime_error if the verified residual sup|T_pi q - q| exceeds
// 1e-10 * (1 + sup|q|).
QTable exact_q_of_policy(const FiniteMdp& mdp, const DeterministicPolicy& pi);

// q_* by value iteration from zero.  Stops once sup|T_* q - q| drops below
// max(tol * (1 - gamma) / (2 gamma), 32 eps q_max) — the second term is a
// roundoff floor so the loop terminates for extreme gamma — and returns the
// post-application iterate, which is then within tol of q_* in sup norm.
// Throws std::runtime_error (reporting the residual attained) if the cap of
// 1e6 iterations is hit first.
QTable optimal_q(const FiniteMdp& mdp, double tol);

// Discounted state-action occupancy of pi started from mu:
// d = (1 - gamma) mu (I - gamma P_pi)^{-1}, solved densely on the transposed
// system.  Output entries are nonnegative and sum to 1 within 1e-10.
DistributionSA occupancy(const FiniteMdp& mdp, const DeterministicPolicy& pi,
                         const DistributionSA& mu);

// --- Norms -----------------------------------------------------------------

// (sum_{s,a} mu(s,a) |q(s,a)|^p)^{1/p}, p >= 1.
double weighted_lp_norm(const QTable& q, const DistributionSA& mu, double p);

double sup_norm(const QTable& q);

// --- Small table helpers ---------------------------------------------------

namespace detail {
void require(bool cond, const std::string& msg);
void require_same_shape(const QTable& a, const QTable& b, const char* where);
}  // namespace detail

}  // namespace movilab
