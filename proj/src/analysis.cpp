#include "movilab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "movilab/rng.hpp"

namespace movilab {

using detail::require;

static void check_ledger_depth(const ErrorLedger& ledger, int need, const char* where) {
  require(need >= 0, std::string(where) + ": negative index");
  require(ledger.steps() >= need,
          std::string(where) + ": ledger holds " + std::to_string(ledger.steps()) +
              " steps, need " + std::to_string(need));
}

QTable cumulative_error(const ErrorLedger& ledger, int k) {
  check_ledger_depth(ledger, k, "cumulative_error");
  QTable out = ledger.q0;
  std::fill(out.v.begin(), out.v.end(), 0.0);
  for (int j = 1; j <= k; ++j) {
    const QTable& e = ledger.epsilon(j);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= e.v[i];
  }
  return out;
}

// (I - gamma P_pi) eps, the inner factor of every weighted-error term.
static QTable damped_term(const ErrorLedger& ledger, const FiniteMdp& mdp, int i) {
  const QTable& eps = ledger.epsilon(i);
  QTable p = apply_policy_kernel(mdp, ledger.policy(i), eps);
  QTable out = eps;
  for (std::size_t t = 0; t < out.v.size(); ++t) out.v[t] -= mdp.gamma * p.v[t];
  return out;
}

QTable weighted_cumulative_error(const ErrorLedger& ledger, const FiniteMdp& mdp,
                                 int k, int j) {
  check_ledger_depth(ledger, k, "weighted_cumulative_error");
  require(j >= 0 && j <= k, "weighted_cumulative_error: j must lie in [0, k]");
  QTable acc(mdp.n_states, mdp.n_actions);
  for (int i = 1; i <= k - j; ++i) {
    QTable v = damped_term(ledger, mdp, i);
    for (int t = 1; t <= j; ++t)
      v = apply_policy_kernel(mdp, ledger.policy(i + t), v);
    for (std::size_t x = 0; x < acc.v.size(); ++x) acc.v[x] -= v.v[x];
  }
  return acc;
}

std::vector<QTable> weighted_cumulative_errors(const ErrorLedger& ledger,
                                               const FiniteMdp& mdp, int k) {
  check_ledger_depth(ledger, k, "weighted_cumulative_errors");
  std::vector<QTable> acc(static_cast<std::size_t>(std::max(k, 0)),
                          QTable(mdp.n_states, mdp.n_actions));
  // Term i contributes P_{i+t:i+1} (I - gamma P_{pi_i}) eps_i to E'_{k,t}
  // for every t <= k - i; walking t upward shares the kernel applications.
  for (int i = 1; i <= k; ++i) {
    QTable v = damped_term(ledger, mdp, i);
    for (int t = 0; t <= k - i; ++t) {
      if (t > 0) v = apply_policy_kernel(mdp, ledger.policy(i + t), v);
      QTable& slot = acc[static_cast<std::size_t>(t)];
      for (std::size_t x = 0; x < slot.v.size(); ++x) slot.v[x] -= v.v[x];
    }
  }
  if (k >= 1) acc.resize(static_cast<std::size_t>(k));  // E'_{k,0} .. E'_{k,k-1}
  return acc;
}

QTable reconstruct_q(const ErrorLedger& ledger, const FiniteMdp& mdp, int upto) {
  check_ledger_depth(ledger, upto, "reconstruct_q");
  QTable q = ledger.q0;
  for (int i = 1; i <= upto; ++i) {
    q = bellman_eval(mdp, ledger.policy(i), q);
    const QTable& e = ledger.epsilon(i);
    for (std::size_t x = 0; x < q.v.size(); ++x) q.v[x] += e.v[x];
  }
  return q;
}

// --- Componentwise bound ---------------------------------------------------

static QTable componentwise_bound_rhs_with(const ErrorLedger& ledger, const FiniteMdp& mdp,
                                const DeterministicPolicy& pi_star, int k,
                                const std::vector<QTable>& eprimes) {
  check_ledger_depth(ledger, k + 1, "componentwise_bound_rhs");
  const QTable e_total = cumulative_error(ledger, k + 1);
  const QTable q_last = reconstruct_q(ledger, mdp, k + 1);

  QTable top = e_total;
  for (std::size_t x = 0; x < top.v.size(); ++x)
    top.v[x] += q_last.v[x] - ledger.q0.v[x];
  const QTable star_term = solve_resolvent(mdp, pi_star, top);

  QTable inner(mdp.n_states, mdp.n_actions);
  double g_pow = 1.0;
  for (int j = 0; j < k; ++j) {
    const QTable& ep = eprimes[static_cast<std::size_t>(j)];
    for (std::size_t x = 0; x < inner.v.size(); ++x) inner.v[x] += g_pow * ep.v[x];
    g_pow *= mdp.gamma;
  }
  // sum_{j=0..k} gamma^j P_{j:1} (T_{pi_1} q_0 - q_0), kernels applied
  // innermost (pi_1) first.
  QTable base = bellman_eval(mdp, ledger.policy(1), ledger.q0);
  for (std::size_t x = 0; x < base.v.size(); ++x) base.v[x] -= ledger.q0.v[x];
  QTable w = base;
  g_pow = 1.0;
  for (int j = 0; j <= k; ++j) {
    if (j > 0) {
      w = apply_policy_kernel(mdp, ledger.policy(j), w);
      g_pow *= mdp.gamma;
    }
    for (std::size_t x = 0; x < inner.v.size(); ++x) inner.v[x] += g_pow * w.v[x];
  }
  const QTable pol_term = solve_resolvent(mdp, ledger.policy(k + 1), inner);

  QTable rhs(mdp.n_states, mdp.n_actions);
  const double scale = 1.0 / static_cast<double>(k + 1);
  for (std::size_t x = 0; x < rhs.v.size(); ++x)
    rhs.v[x] = scale * (star_term.v[x] - pol_term.v[x]);
  return rhs;
}

QTable componentwise_bound_rhs(const ErrorLedger& ledger, const FiniteMdp& mdp,
                    const DeterministicPolicy& pi_star, int k) {
  return componentwise_bound_rhs_with(ledger, mdp, pi_star, k,
                           weighted_cumulative_errors(ledger, mdp, k));
}

// --- Norm-form bounds ------------------------------------------------------

static double l1_bound_rhs_with(const ErrorLedger& ledger, const FiniteMdp& mdp,
                                  const DistributionSA& nu, int k, double C,
                                  const std::vector<QTable>& eprimes) {
  check_ledger_depth(ledger, k + 1, "l1_bound_rhs");
  double sum = weighted_lp_norm(cumulative_error(ledger, k + 1), nu, 1.0);
  double g_pow = 1.0;
  for (int j = 0; j < k; ++j) {
    sum += g_pow * weighted_lp_norm(eprimes[static_cast<std::size_t>(j)], nu, 1.0);
    g_pow *= mdp.gamma;
  }
  sum += 2.0 * mdp.q_max();
  return C / (static_cast<double>(k + 1) * (1.0 - mdp.gamma)) * sum;
}

double l1_bound_rhs(const ErrorLedger& ledger, const FiniteMdp& mdp,
                      const DistributionSA& mu, const DistributionSA& nu, int k,
                      double C) {
  (void)mu;  // the mu side enters through C, precomputed by the caller
  return l1_bound_rhs_with(ledger, mdp, nu, k, C,
                             weighted_cumulative_errors(ledger, mdp, k));
}

static double sup_bound_rhs_with(const ErrorLedger& ledger, const FiniteMdp& mdp, int k,
                                 const std::vector<QTable>& eprimes) {
  check_ledger_depth(ledger, k + 1, "sup_bound_rhs");
  double sum = sup_norm(cumulative_error(ledger, k + 1));
  double g_pow = 1.0;
  for (int j = 0; j < k; ++j) {
    sum += g_pow * sup_norm(eprimes[static_cast<std::size_t>(j)]);
    g_pow *= mdp.gamma;
  }
  sum += 2.0 * mdp.q_max();
  return sum / (static_cast<double>(k + 1) * (1.0 - mdp.gamma));
}

double sup_bound_rhs(const ErrorLedger& ledger, const FiniteMdp& mdp, int k) {
  return sup_bound_rhs_with(ledger, mdp, k, weighted_cumulative_errors(ledger, mdp, k));
}

double sql_dpp_rhs(const ErrorLedger& ledger, const FiniteMdp& mdp, int k) {
  check_ledger_depth(ledger, k, "sql_dpp_rhs");
  require(k >= 1, "sql_dpp_rhs: k must be >= 1");
  // sum_{j=1..k} gamma^{k-j} ||E_j||_inf via one pass over prefix sums.
  QTable prefix(mdp.n_states, mdp.n_actions);
  std::vector<double> norms(static_cast<std::size_t>(k));
  for (int j = 1; j <= k; ++j) {
    const QTable& e = ledger.epsilon(j);
    for (std::size_t x = 0; x < prefix.v.size(); ++x) prefix.v[x] += e.v[x];
    norms[static_cast<std::size_t>(j) - 1] = sup_norm(prefix);
  }
  double sum = 0.0;
  double g_pow = 1.0;
  for (int j = k; j >= 1; --j) {
    sum += g_pow * norms[static_cast<std::size_t>(j) - 1];
    g_pow *= mdp.gamma;
  }
  sum += 8.0 * mdp.gamma * mdp.q_max() / (1.0 - mdp.gamma);
  return 2.0 * mdp.gamma / (static_cast<double>(k) * (1.0 - mdp.gamma)) * sum;
}

double sample_complexity_rhs(long k, double delta, double r_max, double gamma, int n_states,
                 int n_actions) {
  require(k >= 1, "sample_complexity_rhs: k must be >= 1");
  require(delta > 0.0 && delta < 1.0, "sample_complexity_rhs: delta must lie in (0,1)");
  require(gamma > 0.0 && gamma < 1.0, "sample_complexity_rhs: gamma must lie in (0,1)");
  require(r_max >= 0.0, "sample_complexity_rhs: negative r_max");
  require(n_states >= 1 && n_actions >= 1, "sample_complexity_rhs: empty spaces");
  const double kd = static_cast<double>(k);
  const double one_minus = 1.0 - gamma;
  const double log_term =
      std::log(4.0 * static_cast<double>(n_states) * n_actions / delta);
  return 2.0 * r_max / (one_minus * one_minus) *
         (1.0 / kd + 3.0 / one_minus * std::sqrt(2.0 * log_term / kd));
}

// --- Concentrability -------------------------------------------------------

static double policy_ratio(const FiniteMdp& mdp, const DeterministicPolicy& pi,
                           const DistributionSA& mu, const DistributionSA& nu) {
  const DistributionSA d = occupancy(mdp, pi, mu);
  double worst = 0.0;
  for (std::size_t i = 0; i < d.mass.size(); ++i) {
    if (nu.mass[i] > 0.0) {
      worst = std::max(worst, d.mass[i] / nu.mass[i]);
    } else if (d.mass[i] > 1e-14) {
      throw std::runtime_error(
          "concentrability: occupancy reaches a pair with zero sampling mass; "
          "the coefficient is infinite");
    }
  }
  return worst;
}

ConcentrabilityResult concentrability(const FiniteMdp& mdp, const DistributionSA& mu,
                                      const DistributionSA& nu,
                                      const ConcentrabilityMode& mode) {
  mu.validate();
  nu.validate();
  require(mu.n_states == mdp.n_states && mu.n_actions == mdp.n_actions &&
              nu.n_states == mdp.n_states && nu.n_actions == mdp.n_actions,
          "concentrability: distribution shape mismatch");
  double worst = 0.0;
  if (mode.exact) {
    double count = 1.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      count *= mdp.n_actions;
      require(count <= 1e6,
              "concentrability: exact enumeration needs n_actions^n_states <= 1e6");
    }
    DeterministicPolicy pi;
    pi.action.assign(static_cast<std::size_t>(mdp.n_states), 0);
    for (;;) {
      worst = std::max(worst, policy_ratio(mdp, pi, mu, nu));
      // Mixed-radix increment; stop after the last policy rolls over.
      int s = 0;
      while (s < mdp.n_states) {
        if (++pi.action[static_cast<std::size_t>(s)] < mdp.n_actions) break;
        pi.action[static_cast<std::size_t>(s)] = 0;
        ++s;
      }
      if (s == mdp.n_states) break;
    }
    return {worst, true};
  }
  require(mode.n_policies >= 1, "concentrability: sampled mode needs n_policies >= 1");
  Rng rng(mode.seed);
  for (int n = 0; n < mode.n_policies; ++n) {
    DeterministicPolicy pi;
    pi.action.resize(static_cast<std::size_t>(mdp.n_states));
    for (int s = 0; s < mdp.n_states; ++s)
      pi.action[static_cast<std::size_t>(s)] =
          static_cast<int>(rng.next_below(static_cast<std::uint64_t>(mdp.n_actions)));
    worst = std::max(worst, policy_ratio(mdp, pi, mu, nu));
  }
  return {worst, false};
}

// --- Loss ------------------------------------------------------------------

QTable loss(const FiniteMdp& mdp, const QTable& q_star, const DeterministicPolicy& pi) {
  const QTable q_pi = exact_q_of_policy(mdp, pi);
  QTable out = q_star;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= q_pi.v[i];
  return out;
}

// --- Bound report ----------------------------------------------------------

BoundContext make_bound_context(const FiniteMdp& mdp, const DistributionSA& mu,
                                const DistributionSA& nu, double delta) {
  BoundContext ctx;
  ctx.q_star = optimal_q(mdp, 1e-12);
  ctx.pi_star = greedy(ctx.q_star);
  ctx.mu = mu;
  ctx.nu = nu;
  ctx.delta = delta;
  ConcentrabilityMode mode;  // exact
  ctx.concentrability = concentrability(mdp, mu, nu, mode).value;
  return ctx;
}

BoundReport evaluate_bounds(const ErrorLedger& ledger, const FiniteMdp& mdp,
                            const BoundContext& ctx, int k) {
  check_ledger_depth(ledger, k + 1, "evaluate_bounds");
  BoundReport rep;
  rep.k = k;
  rep.loss_table = loss(mdp, ctx.q_star, ledger.policy(k + 1));
  const std::vector<QTable> eprimes = weighted_cumulative_errors(ledger, mdp, k);
  rep.rhs_componentwise = componentwise_bound_rhs_with(ledger, mdp, ctx.pi_star, k, eprimes);
  rep.loss_sup = sup_norm(rep.loss_table);
  rep.loss_l1mu = weighted_lp_norm(rep.loss_table, ctx.mu, 1.0);
  rep.rhs_l1mu = l1_bound_rhs_with(ledger, mdp, ctx.nu, k, ctx.concentrability, eprimes);
  rep.rhs_sup = sup_bound_rhs_with(ledger, mdp, k, eprimes);
  rep.rhs_envelope = sample_complexity_rhs(k, ctx.delta, mdp.r_max, mdp.gamma, mdp.n_states,
                            mdp.n_actions);
  double slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rep.loss_table.v.size(); ++i)
    slack = std::min(slack, rep.rhs_componentwise.v[i] - rep.loss_table.v[i]);
  rep.slack_min = slack;
  rep.holds_componentwise = slack >= -1e-8;
  return rep;
}

// --- Averaging-assumption estimator ----------------------------------------

AssumptionResult assumption_check(const GarnetSpec& spec, double gamma, int j,
                                  const std::vector<int>& l_values, int n_max,
                                  std::uint64_t seed, bool keep_tables) {
  require(j >= 1, "assumption_check: j must be >= 1");
  require(n_max >= 1, "assumption_check: n_max must be >= 1");
  require(!l_values.empty(), "assumption_check: l_values must be nonempty");
  for (int l : l_values) require(l >= 0, "assumption_check: l values must be >= 0");

  const FiniteMdp mdp = generate(spec, gamma);
  const BetaSchedule schedule = BetaSchedule::empirical_mean();
  const int l_max = *std::max_element(l_values.begin(), l_values.end());

  // Shared prefix: the state in which iteration j is about to execute, and
  // the state just after it ran.  Every replicate branches off these two.
  GenerativeModel prefix_gen(mdp, mix_seed(seed, 0));
  SchemeState before = init_state(mdp, SchemeId::movi);
  for (int i = 1; i <= j - 1; ++i)
    before = movi_step(mdp, &prefix_gen, before, schedule);
  const SchemeState after = movi_step(mdp, &prefix_gen, before, schedule);

  AssumptionResult res;
  res.l_values = l_values;
  res.n_max = n_max;
  res.epsbar.assign(l_values.size(), std::vector<double>(static_cast<std::size_t>(n_max)));
  if (keep_tables) res.weighted.resize(l_values.size());

  std::vector<QTable> running(l_values.size(), QTable(mdp.n_states, mdp.n_actions));
  for (int n = 1; n <= n_max; ++n) {
    // Fresh run of iteration j realizes this replicate's noise.
    GenerativeModel eps_gen(mdp, mix_seed(mix_seed(seed, 1), static_cast<std::uint64_t>(n)));
    QTable w = movi_step(mdp, &eps_gen, before, schedule).epsilon_last;

    // Independent continuation from the shared post-j state supplies the
    // weighting kernels; its draws never touch the noise above.
    GenerativeModel cont_gen(mdp, mix_seed(mix_seed(seed, 2), static_cast<std::uint64_t>(n)));
    SchemeState st = after;
    auto absorb = [&](int depth) {
      for (std::size_t li = 0; li < l_values.size(); ++li) {
        if (l_values[li] != depth) continue;
        for (std::size_t x = 0; x < w.size(); ++x) running[li].v[x] += w.v[x];
        if (keep_tables) res.weighted[li].push_back(w);
      }
    };
    absorb(0);
    for (int t = 1; t <= l_max; ++t) {
      st = movi_step(mdp, &cont_gen, st, schedule);  // iteration j + t
      w = apply_policy_kernel(mdp, st.policy, w);
      absorb(t);
    }
    for (std::size_t li = 0; li < l_values.size(); ++li)
      res.epsbar[li][static_cast<std::size_t>(n) - 1] =
          sup_norm(running[li]) / static_cast<double>(n);
  }
  return res;
}

}  // namespace movilab
