#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "movilab/analysis.hpp"
#include "movilab/garnet.hpp"
#include "movilab/ledger.hpp"
#include "movilab/mdp.hpp"
#include "movilab/rng.hpp"
#include "movilab/schemes.hpp"

using namespace movilab;

namespace {

FiniteMdp one_state_two_actions(double gamma) {
  return FiniteMdp(1, 2, {1.0, 1.0}, {1.0, 2.0}, gamma, 2.0);
}

QTable random_table(int n_states, int n_actions, Rng& rng, double scale) {
  QTable q(n_states, n_actions);
  for (double& x : q.v) x = scale * (2.0 * rng.next_unit() - 1.0);
  return q;
}

DeterministicPolicy random_policy(int n_states, int n_actions, Rng& rng) {
  DeterministicPolicy pi;
  pi.action.resize(static_cast<std::size_t>(n_states));
  for (int& a : pi.action) a = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_actions)));
  return pi;
}

// Hand-built ledger with arbitrary noise tables and policies.
ErrorLedger synthetic_ledger(const FiniteMdp& mdp, int steps, Rng& rng) {
  ErrorLedger led;
  led.q0 = QTable(mdp.n_states, mdp.n_actions);
  for (int i = 0; i < steps; ++i) {
    led.epsilons.push_back(random_table(mdp.n_states, mdp.n_actions, rng, 1.0));
    led.policies.push_back(random_policy(mdp.n_states, mdp.n_actions, rng));
  }
  led.q_latest = reconstruct_q(led, mdp, steps);
  return led;
}

SchemeRun tracked_movi(const FiniteMdp& mdp, long iterations, std::uint64_t seed,
                       bool sampled = true) {
  RunOptions opt;
  opt.scheme = SchemeId::movi;
  opt.iterations = iterations;
  opt.sampled = sampled;
  opt.seed = seed;
  opt.ledger = true;
  return run_scheme(mdp, opt);
}

// Dense SA x SA matrix of the policy kernel, for small oracles.
std::vector<double> dense_kernel(const FiniteMdp& mdp, const DeterministicPolicy& pi) {
  const int n = mdp.n_states * mdp.n_actions;
  std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      int row = s * mdp.n_actions + a;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        int col = s2 * mdp.n_actions + pi.action[static_cast<std::size_t>(s2)];
        m[static_cast<std::size_t>(row) * n + col] += mdp.p(s, a, s2);
      }
    }
  }
  return m;
}

std::vector<double> matvec(const std::vector<double>& m, const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) y[i] += m[i * n + j] * x[j];
  }
  return y;
}

}  // namespace

TEST_CASE("cumulative error agrees with direct re-summation") {
  FiniteMdp mdp = generate({5, 2, 2, 9}, 0.9);
  SchemeRun run = tracked_movi(mdp, 30, 17);

  QTable zero = cumulative_error(run.ledger, 0);
  CHECK(sup_norm(zero) == 0.0);

  for (int k : {1, 7, 30}) {
    QTable want(5, 2);
    for (int i = 1; i <= k; ++i) {
      for (std::size_t x = 0; x < want.size(); ++x) {
        want.v[x] -= run.ledger.epsilon(i).v[x];
      }
    }
    QTable got = cumulative_error(run.ledger, k);
    for (std::size_t x = 0; x < want.size(); ++x) {
      CHECK(got.v[x] == doctest::Approx(want.v[x]).epsilon(1e-13));
    }
  }
  CHECK_THROWS_AS(cumulative_error(run.ledger, 31), std::invalid_argument);
}

TEST_CASE("weighted cumulative error: boundary cases") {
  FiniteMdp mdp = generate({4, 2, 2, 3}, 0.9);
  Rng rng(5);
  ErrorLedger led = synthetic_ledger(mdp, 6, rng);

  // j = k leaves an empty sum.
  CHECK(sup_norm(weighted_cumulative_error(led, mdp, 6, 6)) == 0.0);

  // One state: every kernel fixes tables of the form [c], so each term is
  // (1 - gamma) eps_i and the sum collapses.
  FiniteMdp tiny(1, 1, {1.0}, {0.5}, 0.9, 1.0);
  Rng rng2(6);
  ErrorLedger tiny_led = synthetic_ledger(tiny, 5, rng2);
  for (int j = 0; j < 5; ++j) {
    double want = 0.0;
    for (int i = 1; i <= 5 - j; ++i) want -= 0.1 * tiny_led.epsilon(i).at(0, 0);
    CHECK(weighted_cumulative_error(tiny_led, tiny, 5, j).at(0, 0) ==
          doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("weighted cumulative error matches a dense-matrix oracle") {
  FiniteMdp mdp = generate({3, 2, 2, 15}, 0.9);
  Rng rng(23);
  const int k = 4;
  ErrorLedger led = synthetic_ledger(mdp, k, rng);

  std::vector<std::vector<double>> kernels;
  for (int i = 1; i <= k; ++i) kernels.push_back(dense_kernel(mdp, led.policy(i)));

  std::vector<QTable> batch = weighted_cumulative_errors(led, mdp, k);
  REQUIRE(batch.size() == static_cast<std::size_t>(k));

  for (int j = 0; j < k; ++j) {
    std::vector<double> acc(6, 0.0);
    for (int i = 1; i <= k - j; ++i) {
      // (I - gamma P_{pi_i}) eps_i ...
      std::vector<double> term = led.epsilon(i).v;
      std::vector<double> pulled = matvec(kernels[static_cast<std::size_t>(i) - 1], term);
      for (std::size_t x = 0; x < term.size(); ++x) term[x] -= 0.9 * pulled[x];
      // ... then P_{pi_{i+1}} .. P_{pi_{i+j}} applied innermost first.
      for (int t = i + 1; t <= i + j; ++t) {
        term = matvec(kernels[static_cast<std::size_t>(t) - 1], term);
      }
      for (std::size_t x = 0; x < acc.size(); ++x) acc[x] -= term[x];
    }
    QTable single = weighted_cumulative_error(led, mdp, k, j);
    for (std::size_t x = 0; x < acc.size(); ++x) {
      CHECK(single.v[x] == doctest::Approx(acc[x]).epsilon(1e-12));
      CHECK(batch[static_cast<std::size_t>(j)].v[x] ==
            doctest::Approx(acc[x]).epsilon(1e-12));
    }
  }
}

TEST_CASE("ledger replay reproduces the final iterate") {
  FiniteMdp mdp = generate({6, 3, 2, 88}, 0.9);
  SchemeRun run = tracked_movi(mdp, 40, 301);
  QTable rebuilt = reconstruct_q(run.ledger, mdp, 40);
  for (std::size_t i = 0; i < rebuilt.size(); ++i) {
    CHECK(rebuilt.v[i] == doctest::Approx(run.final_state.q.v[i]).epsilon(1e-9));
  }
  CHECK(sup_norm(reconstruct_q(run.ledger, mdp, 0)) == 0.0);
}

TEST_CASE("componentwise bound has the closed form on the one-state example") {
  // Exact momentum run: the bound reduces to (2 - 2^{1-k}) / (k+1) in both
  // entries while the realized loss is 0, so the slack is the bound itself.
  FiniteMdp mdp = one_state_two_actions(0.5);
  SchemeRun run = tracked_movi(mdp, 8, 0, /*sampled=*/false);
  QTable q_star = optimal_q(mdp, 1e-13);
  DeterministicPolicy pi_star = greedy(q_star);
  REQUIRE(pi_star.action[0] == 1);

  for (int k : {2, 5, 7}) {
    QTable rhs = componentwise_bound_rhs(run.ledger, mdp, pi_star, k);
    double want = (2.0 - std::pow(2.0, 1 - k)) / (k + 1);
    CHECK(rhs.at(0, 0) == doctest::Approx(want).epsilon(1e-12));
    CHECK(rhs.at(0, 1) == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK_THROWS_AS(componentwise_bound_rhs(run.ledger, mdp, pi_star, 8),
                  std::invalid_argument);  // needs k+1 tracked steps
}

TEST_CASE("norm bounds collapse to their noise-free values on exact runs") {
  FiniteMdp mdp = generate({4, 2, 2, 51}, 0.9);
  SchemeRun run = tracked_movi(mdp, 20, 0, /*sampled=*/false);
  DistributionSA mu = uniform_sa(4, 2);
  ConcentrabilityResult conc = concentrability(mdp, mu, mu, {});
  REQUIRE(conc.exact);

  const int k = 10;
  const double base = 2.0 * mdp.q_max() / ((k + 1) * (1.0 - 0.9));
  CHECK(sup_bound_rhs(run.ledger, mdp, k) == doctest::Approx(base).epsilon(1e-12));
  CHECK(l1_bound_rhs(run.ledger, mdp, mu, mu, k, conc.value) ==
        doctest::Approx(conc.value * base).epsilon(1e-12));
}

TEST_CASE("bound report on a sampled run: every bound dominates its loss") {
  FiniteMdp mdp = generate({6, 2, 2, 404}, 0.9);
  SchemeRun run = tracked_movi(mdp, 60, 777);
  DistributionSA mu = uniform_sa(6, 2);
  BoundContext ctx = make_bound_context(mdp, mu, mu, 0.05);

  for (int k : {10, 50}) {
    BoundReport rep = evaluate_bounds(run.ledger, mdp, ctx, k);
    CHECK(rep.k == k);
    CHECK(rep.holds_componentwise);
    CHECK(rep.slack_min >= -1e-8);
    CHECK(rep.loss_sup >= 0.0);
    CHECK(rep.rhs_sup >= rep.loss_sup - 1e-8);
    CHECK(rep.rhs_l1mu >= rep.loss_l1mu - 1e-8);
    CHECK(rep.rhs_envelope > 0.0);
  }
}

TEST_CASE("averaged-error bound dominates realized losses of sql and dpp") {
  FiniteMdp mdp = generate({6, 2, 2, 31}, 0.9);
  QTable q_star = optimal_q(mdp, 1e-12);

  for (SchemeId id : {SchemeId::sql, SchemeId::dpp}) {
    RunOptions opt;
    opt.scheme = id;
    opt.iterations = 200;
    opt.sampled = true;
    opt.seed = 99;
    opt.ledger = true;
    SchemeRun run = run_scheme(mdp, opt);
    const QTable& table =
        id == SchemeId::dpp ? run.final_state.psi : run.final_state.q;
    double realized = sup_norm(loss(mdp, q_star, greedy(table)));
    double rhs = sql_dpp_rhs(run.ledger, mdp, 200);
    CHECK(rhs >= realized - 1e-8);
    CHECK(rhs > 0.0);
  }
}

TEST_CASE("sample-complexity envelope: frozen value and shape") {
  const double pinned = 2472.4224864919597;
  CHECK(sample_complexity_rhs(100, 0.1, 1.0, 0.9, 30, 4) ==
        doctest::Approx(pinned).epsilon(1e-12));

  double prev = sample_complexity_rhs(10, 0.05, 1.0, 0.9, 30, 4);
  for (long k : {100L, 1000L, 10000L}) {
    double cur = sample_complexity_rhs(k, 0.05, 1.0, 0.9, 30, 4);
    CHECK(cur < prev);
    prev = cur;
  }
  CHECK_THROWS_AS(sample_complexity_rhs(0, 0.05, 1.0, 0.9, 30, 4), std::invalid_argument);
  CHECK_THROWS_AS(sample_complexity_rhs(10, 1.0, 1.0, 0.9, 30, 4), std::invalid_argument);
  CHECK_THROWS_AS(sample_complexity_rhs(10, 0.0, 1.0, 0.9, 30, 4), std::invalid_argument);
}

TEST_CASE("concentrability: known values, enumeration oracle, sampled bound") {
  // Single state and action: the occupancy is the whole mass, so C = 1.
  FiniteMdp tiny(1, 1, {1.0}, {0.5}, 0.9, 1.0);
  DistributionSA one = uniform_sa(1, 1);
  ConcentrabilityResult trivial = concentrability(tiny, one, one, {});
  CHECK(trivial.exact);
  CHECK(trivial.value == doctest::Approx(1.0).epsilon(1e-10));

  FiniteMdp mdp = generate({4, 2, 3, 314}, 0.9);
  DistributionSA mu = uniform_sa(4, 2);
  ConcentrabilityResult exact = concentrability(mdp, mu, mu, {});
  REQUIRE(exact.exact);

  // Independent enumeration of all 2^4 policies.
  double best = 0.0;
  for (int code = 0; code < 16; ++code) {
    DeterministicPolicy pi;
    for (int s = 0; s < 4; ++s) pi.action.push_back((code >> s) & 1);
    DistributionSA d = occupancy(mdp, pi, mu);
    for (std::size_t i = 0; i < d.mass.size(); ++i) {
      best = std::max(best, d.mass[i] / mu.mass[i]);
    }
  }
  CHECK(exact.value == doctest::Approx(best).epsilon(1e-10));
  CHECK(exact.value >= 1.0 - 1e-12);  // occupancies are distributions

  ConcentrabilityMode sampled_mode;
  sampled_mode.exact = false;
  sampled_mode.n_policies = 10;
  sampled_mode.seed = 5;
  ConcentrabilityResult sampled = concentrability(mdp, mu, mu, sampled_mode);
  CHECK_FALSE(sampled.exact);
  CHECK(sampled.value <= exact.value + 1e-12);

  // Too many policies to enumerate: exact mode refuses.
  FiniteMdp big = generate({30, 4, 4, 1}, 0.9);
  DistributionSA mu_big = uniform_sa(30, 4);
  CHECK_THROWS_AS(concentrability(big, mu_big, mu_big, {}), std::invalid_argument);
}

TEST_CASE("loss table on the one-state example") {
  FiniteMdp mdp = one_state_two_actions(0.5);
  QTable q_star = optimal_q(mdp, 1e-12);
  DeterministicPolicy always_a0;
  always_a0.action = {0};
  QTable l = loss(mdp, q_star, always_a0);
  // q_* = [3, 4], q_{a0} = [2, 3].
  CHECK(l.at(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(l.at(0, 1) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("averaging diagnostic: deterministic models give zero") {
  AssumptionResult res = assumption_check({6, 2, 1, 77}, 0.9, 5, {0, 2}, 8, 123);
  for (const std::vector<double>& per_l : res.epsbar) {
    for (double v : per_l) CHECK(v == 0.0);
  }
}

TEST_CASE("averaging diagnostic: recompute from kept tables bit for bit") {
  AssumptionResult res =
      assumption_check({8, 2, 3, 55}, 0.9, 6, {0, 1, 3}, 12, 321, /*keep_tables=*/true);
  REQUIRE(res.weighted.size() == 3);
  for (std::size_t li = 0; li < 3; ++li) {
    REQUIRE(res.weighted[li].size() == 12);
    QTable running(8, 2);
    for (int n = 1; n <= 12; ++n) {
      const QTable& w = res.weighted[li][static_cast<std::size_t>(n) - 1];
      for (std::size_t x = 0; x < running.size(); ++x) running.v[x] += w.v[x];
      double want = sup_norm(running) / static_cast<double>(n);
      CHECK(res.epsbar[li][static_cast<std::size_t>(n) - 1] == want);
    }
  }

  // Same arguments, same numbers.
  AssumptionResult again = assumption_check({8, 2, 3, 55}, 0.9, 6, {0, 1, 3}, 12, 321);
  for (std::size_t li = 0; li < 3; ++li) {
    CHECK(again.epsbar[li] == res.epsbar[li]);
  }
  CHECK(again.weighted.empty());  // tables only kept on request
}

TEST_CASE("averaging diagnostic validates its arguments") {
  CHECK_THROWS_AS(assumption_check({4, 2, 2, 1}, 0.9, 0, {0}, 5, 1), std::invalid_argument);
  CHECK_THROWS_AS(assumption_check({4, 2, 2, 1}, 0.9, 3, {}, 5, 1), std::invalid_argument);
  CHECK_THROWS_AS(assumption_check({4, 2, 2, 1}, 0.9, 3, {-1}, 5, 1), std::invalid_argument);
  CHECK_THROWS_AS(assumption_check({4, 2, 2, 1}, 0.9, 3, {0}, 0, 1), std::invalid_argument);
}
