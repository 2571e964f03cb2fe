#include "movilab/mdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace movilab {

namespace detail {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void require_same_shape(const QTable& a, const QTable& b, const char* where) {
  require(a.same_shape(b), std::string(where) + ": table shapes differ");
}

}  // namespace detail

using detail::require;

void DistributionSA::validate() const {
  require(n_states >= 1 && n_actions >= 1, "DistributionSA: empty shape");
  require(mass.size() == static_cast<std::size_t>(n_states) * n_actions,
          "DistributionSA: mass size mismatch");
  double sum = 0.0;
  for (double m : mass) {
    require(m >= 0.0, "DistributionSA: negative mass");
    sum += m;
  }
  require(std::abs(sum - 1.0) <= 1e-12, "DistributionSA: mass does not sum to 1");
}

DistributionSA uniform_sa(int n_states, int n_actions) {
  DistributionSA d(n_states, n_actions,
                   1.0 / (static_cast<double>(n_states) * n_actions));
  return d;
}

FiniteMdp::FiniteMdp(int states, int actions, std::vector<double> trans,
                     std::vector<double> rew, double discount, double reward_bound)
    : n_states(states), n_actions(actions), transition(std::move(trans)),
      reward(std::move(rew)), gamma(discount), r_max(reward_bound) {
  validate();
}

void FiniteMdp::validate() const {
  require(n_states >= 1 && n_actions >= 1, "FiniteMdp: empty state or action space");
  require(gamma > 0.0 && gamma < 1.0, "FiniteMdp: gamma must lie in (0,1)");
  require(r_max >= 0.0, "FiniteMdp: negative r_max");
  const std::size_t sa = static_cast<std::size_t>(n_states) * n_actions;
  require(transition.size() == sa * n_states, "FiniteMdp: transition size mismatch");
  require(reward.size() == sa, "FiniteMdp: reward size mismatch");
  for (std::size_t i = 0; i < sa; ++i) {
    require(std::abs(reward[i]) <= r_max, "FiniteMdp: |reward| exceeds r_max");
    double sum = 0.0;
    for (int s2 = 0; s2 < n_states; ++s2) {
      const double p = transition[i * n_states + s2];
      require(p >= 0.0, "FiniteMdp: negative transition probability");
      sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-12, "FiniteMdp: transition row does not sum to 1");
  }
}

static void check_policy(const FiniteMdp& mdp, const DeterministicPolicy& pi) {
  require(pi.n_states() == mdp.n_states, "policy: state count mismatch");
  for (int a : pi.action)
    require(a >= 0 && a < mdp.n_actions, "policy: action index out of range");
}

QTable apply_policy_kernel(const FiniteMdp& mdp, const DeterministicPolicy& pi,
                           const QTable& q) {
  check_policy(mdp, pi);
  require(q.n_states == mdp.n_states && q.n_actions == mdp.n_actions,
          "apply_policy_kernel: table shape mismatch");
  QTable out(mdp.n_states, mdp.n_actions);
  // Gather q(s', pi(s')) once, then each (s,a) row is a dot product with it.
  std::vector<double> qpi(mdp.n_states);
  for (int s2 = 0; s2 < mdp.n_states; ++s2) qpi[s2] = q.at(s2, pi.action[s2]);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double* row =
          &mdp.transition[(static_cast<std::size_t>(s) * mdp.n_actions + a) * mdp.n_states];
      double acc = 0.0;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) acc += row[s2] * qpi[s2];
      out.at(s, a) = acc;
    }
  }
  return out;
}

QTable bellman_eval(const FiniteMdp& mdp, const DeterministicPolicy& pi, const QTable& q) {
  QTable out = apply_policy_kernel(mdp, pi, q);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      out.at(s, a) = mdp.r(s, a) + mdp.gamma * out.at(s, a);
  return out;
}

QTable bellman_opt(const FiniteMdp& mdp, const QTable& q) {
  require(q.n_states == mdp.n_states && q.n_actions == mdp.n_actions,
          "bellman_opt: table shape mismatch");
  std::vector<double> qmax(mdp.n_states);
  for (int s2 = 0; s2 < mdp.n_states; ++s2) {
    double m = q.at(s2, 0);
    for (int a = 1; a < mdp.n_actions; ++a) m = std::max(m, q.at(s2, a));
    qmax[s2] = m;
  }
  QTable out(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double* row =
          &mdp.transition[(static_cast<std::size_t>(s) * mdp.n_actions + a) * mdp.n_states];
      double acc = 0.0;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) acc += row[s2] * qmax[s2];
      out.at(s, a) = mdp.r(s, a) + mdp.gamma * acc;
    }
  }
  return out;
}

DeterministicPolicy greedy(const QTable& q) {
  require(q.n_states >= 1 && q.n_actions >= 1, "greedy: empty table");
  DeterministicPolicy pi;
  pi.action.resize(q.n_states);
  for (int s = 0; s < q.n_states; ++s) {
    int best = 0;
    double best_v = q.at(s, 0);
    for (int a = 1; a < q.n_actions; ++a) {
      if (q.at(s, a) > best_v) {  // strict: ties keep the lowest index
        best_v = q.at(s, a);
        best = a;
      }
    }
    pi.action[s] = best;
  }
  return pi;
}

// Dense (SA x SA) matrix of I - gamma P_pi, with
// P_pi[(s,a),(s',a')] = P(s'|s,a) [a' = pi(s')].
static Eigen::MatrixXd resolvent_matrix(const FiniteMdp& mdp, const DeterministicPolicy& pi) {
  const int n = mdp.n_states * mdp.n_actions;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const int row = s * mdp.n_actions + a;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const int col = s2 * mdp.n_actions + pi.action[s2];
        m(row, col) -= mdp.gamma * mdp.p(s, a, s2);
      }
    }
  }
  return m;
}

QTable solve_resolvent(const FiniteMdp& mdp, const DeterministicPolicy& pi, const QTable& x) {
  check_policy(mdp, pi);
  require(x.n_states == mdp.n_states && x.n_actions == mdp.n_actions,
          "solve_resolvent: table shape mismatch");
  const int n = mdp.n_states * mdp.n_actions;
  Eigen::Map<const Eigen::VectorXd> rhs(x.v.data(), n);
  Eigen::VectorXd y = resolvent_matrix(mdp, pi).partialPivLu().solve(rhs);
  QTable out(mdp.n_states, mdp.n_actions);
  Eigen::Map<Eigen::VectorXd>(out.v.data(), n) = y;
  return out;
}

QTable exact_q_of_policy(const FiniteMdp& mdp, const DeterministicPolicy& pi) {
  QTable r(mdp.n_states, mdp.n_actions);
  r.v = mdp.reward;
  QTable q = solve_resolvent(mdp, pi, r);
  // Verify the fixed-point residual before trusting the factorization.
  QTable tq = bellman_eval(mdp, pi, q);
  double resid = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < q.v.size(); ++i) {
    resid = std::max(resid, std::abs(tq.v[i] - q.v[i]));
    scale = std::max(scale, std::abs(q.v[i]));
  }
  if (resid > 1e-10 * (1.0 + scale))
    throw std::runtime_error("exact_q_of_policy: residual " + std::to_string(resid) +
                             " exceeds tolerance");
  return q;
}

QTable optimal_q(const FiniteMdp& mdp, double tol) {
  require(tol > 0.0, "optimal_q: tol must be positive");
  const double floor = 32.0 * std::numeric_limits<double>::epsilon() * mdp.q_max();
  const double threshold =
      std::max(tol * (1.0 - mdp.gamma) / (2.0 * mdp.gamma), floor);
  QTable q(mdp.n_states, mdp.n_actions);
  constexpr long kMaxIter = 1000000;
  double resid = std::numeric_limits<double>::infinity();
  for (long it = 0; it < kMaxIter; ++it) {
    QTable next = bellman_opt(mdp, q);
    resid = 0.0;
    for (std::size_t i = 0; i < q.v.size(); ++i)
      resid = std::max(resid, std::abs(next.v[i] - q.v[i]));
    q = std::move(next);
    if (resid <= threshold) return q;
  }
  throw std::runtime_error("optimal_q: iteration cap exceeded, residual " +
                           std::to_string(resid));
}

DistributionSA occupancy(const FiniteMdp& mdp, const DeterministicPolicy& pi,
                         const DistributionSA& mu) {
  check_policy(mdp, pi);
  require(mu.n_states == mdp.n_states && mu.n_actions == mdp.n_actions,
          "occupancy: distribution shape mismatch");
  mu.validate();
  const int n = mdp.n_states * mdp.n_actions;
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) rhs(i) = (1.0 - mdp.gamma) * mu.mass[i];
  // Row vector d solving d (I - gamma P_pi) = (1-gamma) mu, i.e. the
  // transposed linear system.
  Eigen::VectorXd d = resolvent_matrix(mdp, pi).transpose().partialPivLu().solve(rhs);
  DistributionSA out(mdp.n_states, mdp.n_actions);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double m = d(i);
    if (m < 0.0) {
      if (m < -1e-10)
        throw std::runtime_error("occupancy: solve produced negative mass");
      m = 0.0;
    }
    out.mass[i] = m;
    sum += m;
  }
  if (std::abs(sum - 1.0) > 1e-10)
    throw std::runtime_error("occupancy: mass sums to " + std::to_string(sum));
  return out;
}

double weighted_lp_norm(const QTable& q, const DistributionSA& mu, double p) {
  require(p >= 1.0, "weighted_lp_norm: p must be >= 1");
  require(q.n_states == mu.n_states && q.n_actions == mu.n_actions,
          "weighted_lp_norm: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < q.v.size(); ++i)
    acc += mu.mass[i] * std::pow(std::abs(q.v[i]), p);
  return std::pow(acc, 1.0 / p);
}

double sup_norm(const QTable& q) {
  double m = 0.0;
  for (double x : q.v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace movilab
