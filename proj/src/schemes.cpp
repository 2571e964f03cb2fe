#include "movilab/schemes.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>

namespace movilab {

using detail::require;

// --- GenerativeModel -------------------------------------------------------

GenerativeModel::GenerativeModel(const FiniteMdp& mdp, std::uint64_t seed)
    : mdp_(&mdp), rng_(seed) {
  const std::size_t sa = static_cast<std::size_t>(mdp.n_states) * mdp.n_actions;
  support_.resize(sa);
  cum_.resize(sa);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const std::size_t i = static_cast<std::size_t>(s) * mdp.n_actions + a;
      double acc = 0.0;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double p = mdp.p(s, a, s2);
        if (p > 0.0) {
          acc += p;
          support_[i].push_back(s2);
          cum_[i].push_back(acc);
        }
      }
    }
  }
}

int GenerativeModel::sample_next(int s, int a) {
  const std::size_t i = static_cast<std::size_t>(s) * mdp_->n_actions + a;
  const double u = rng_.next_unit();
  const std::vector<double>& cum = cum_[i];
  const std::vector<int>& sup = support_[i];
  for (std::size_t j = 0; j + 1 < cum.size(); ++j)
    if (u < cum[j]) return sup[j];
  return sup.back();  // also absorbs u >= cum.back() from rounding
}

std::vector<int> GenerativeModel::sample_all() {
  std::vector<int> next(static_cast<std::size_t>(mdp_->n_states) * mdp_->n_actions);
  for (int s = 0; s < mdp_->n_states; ++s)
    for (int a = 0; a < mdp_->n_actions; ++a)
      next[static_cast<std::size_t>(s) * mdp_->n_actions + a] = sample_next(s, a);
  return next;
}

QTable sampled_eval_with(const FiniteMdp& mdp, const std::vector<int>& next,
                         const DeterministicPolicy& pi, const QTable& q) {
  QTable out(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const int s2 = next[static_cast<std::size_t>(s) * mdp.n_actions + a];
      out.at(s, a) = mdp.r(s, a) + mdp.gamma * q.at(s2, pi.action[s2]);
    }
  }
  return out;
}

QTable sampled_opt_with(const FiniteMdp& mdp, const std::vector<int>& next, const QTable& q) {
  QTable out(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const int s2 = next[static_cast<std::size_t>(s) * mdp.n_actions + a];
      double m = q.at(s2, 0);
      for (int a2 = 1; a2 < mdp.n_actions; ++a2) m = std::max(m, q.at(s2, a2));
      out.at(s, a) = mdp.r(s, a) + mdp.gamma * m;
    }
  }
  return out;
}

static QTable table_diff(const QTable& a, const QTable& b) {
  QTable out = a;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b.v[i];
  return out;
}

SampledApplication sampled_bellman_eval(GenerativeModel& gen, const DeterministicPolicy& pi,
                                        const QTable& q) {
  const FiniteMdp& mdp = gen.mdp();
  QTable value = sampled_eval_with(mdp, gen.sample_all(), pi, q);
  QTable exact = bellman_eval(mdp, pi, q);
  return {value, table_diff(value, exact)};
}

SampledApplication sampled_bellman_opt(GenerativeModel& gen, const QTable& q) {
  const FiniteMdp& mdp = gen.mdp();
  QTable value = sampled_opt_with(mdp, gen.sample_all(), q);
  QTable exact = bellman_opt(mdp, q);
  return {value, table_diff(value, exact)};
}

// --- BetaSchedule ----------------------------------------------------------

BetaSchedule BetaSchedule::constant(double beta) {
  require(beta >= 0.0 && beta < 1.0, "BetaSchedule: constant beta must lie in [0,1)");
  BetaSchedule s;
  s.kind = Kind::constant;
  s.value = beta;
  return s;
}

// --- Scheme ids ------------------------------------------------------------

const char* scheme_name(SchemeId id) {
  switch (id) {
    case SchemeId::avi: return "avi";
    case SchemeId::movi: return "movi";
    case SchemeId::sql: return "sql";
    case SchemeId::dpp: return "dpp";
  }
  return "?";
}

bool parse_scheme(const std::string& name, SchemeId& out) {
  if (name == "avi") { out = SchemeId::avi; return true; }
  if (name == "movi") { out = SchemeId::movi; return true; }
  if (name == "sql") { out = SchemeId::sql; return true; }
  if (name == "dpp") { out = SchemeId::dpp; return true; }
  return false;
}

// --- Steps -----------------------------------------------------------------

SchemeState init_state(const FiniteMdp& mdp, SchemeId id) {
  SchemeState st;
  st.k = 0;
  QTable zero(mdp.n_states, mdp.n_actions);
  st.q = zero;
  st.epsilon_last = zero;
  st.policy = greedy(zero);
  switch (id) {
    case SchemeId::avi:
      break;
    case SchemeId::movi:
      st.h = zero;
      st.psi = zero;       // psi-form companions start at psi_0 = q_0 = 0
      st.psi_prev = zero;  // psi_{-1} := 0
      break;
    case SchemeId::sql:
      st.q_prev = zero;    // q_{-1} := q_0
      st.psi = zero;
      st.psi_prev = zero;
      break;
    case SchemeId::dpp:
      st.psi = zero;
      st.psi_prev = zero;
      break;
  }
  return st;
}

static void check_no_inject_when_sampled(GenerativeModel* gen, const QTable* inject,
                                         const char* where) {
  require(gen == nullptr || inject == nullptr,
          std::string(where) + ": injected noise is an exact-mode facility");
}

SchemeState avi_step(const FiniteMdp& mdp, GenerativeModel* gen, const SchemeState& st) {
  SchemeState out = st;
  out.k = st.k + 1;
  out.policy = greedy(st.q);
  if (gen != nullptr) {
    const std::vector<int> next = gen->sample_all();
    out.q = sampled_eval_with(mdp, next, out.policy, st.q);
    out.epsilon_last = table_diff(out.q, bellman_eval(mdp, out.policy, st.q));
  } else {
    out.q = bellman_eval(mdp, out.policy, st.q);
    out.epsilon_last = QTable(mdp.n_states, mdp.n_actions);
  }
  return out;
}

SchemeState movi_step(const FiniteMdp& mdp, GenerativeModel* gen, const SchemeState& st,
                      const BetaSchedule& schedule, const QTable* inject) {
  check_no_inject_when_sampled(gen, inject, "movi_step");
  SchemeState out = st;
  out.k = st.k + 1;
  out.policy = greedy(st.h);
  if (gen != nullptr) {
    out.q = sampled_eval_with(mdp, gen->sample_all(), out.policy, st.q);
    out.epsilon_last = table_diff(out.q, bellman_eval(mdp, out.policy, st.q));
  } else {
    out.q = bellman_eval(mdp, out.policy, st.q);
    if (inject != nullptr) {
      detail::require_same_shape(out.q, *inject, "movi_step");
      for (std::size_t i = 0; i < out.q.v.size(); ++i) out.q.v[i] += inject->v[i];
      out.epsilon_last = *inject;
    } else {
      out.epsilon_last = QTable(mdp.n_states, mdp.n_actions);
    }
  }
  const double beta = schedule.beta(out.k);
  out.h = st.h;
  for (std::size_t i = 0; i < out.h.v.size(); ++i)
    out.h.v[i] = beta * st.h.v[i] + (1.0 - beta) * out.q.v[i];
  return out;
}

SchemeState psi_movi_step(const FiniteMdp& mdp, const SchemeState& st, const QTable* inject) {
  SchemeState out = st;
  out.k = st.k + 1;
  out.policy = greedy(st.psi);
  QTable t = bellman_eval(mdp, out.policy, st.psi);
  QTable p_prev = apply_policy_kernel(mdp, out.policy, st.psi_prev);
  QTable next(mdp.n_states, mdp.n_actions);
  for (std::size_t i = 0; i < next.v.size(); ++i)
    next.v[i] = st.psi.v[i] + t.v[i] - mdp.gamma * p_prev.v[i];
  if (inject != nullptr) {
    detail::require_same_shape(next, *inject, "psi_movi_step");
    for (std::size_t i = 0; i < next.v.size(); ++i) next.v[i] += inject->v[i];
    out.epsilon_last = *inject;
  } else {
    out.epsilon_last = QTable(mdp.n_states, mdp.n_actions);
  }
  out.psi_prev = st.psi;
  out.psi = std::move(next);
  return out;
}

SchemeState sql_step(const FiniteMdp& mdp, GenerativeModel* gen, const SchemeState& st) {
  SchemeState out = st;
  const long m = st.k + 1;
  out.k = m;
  out.policy = greedy(st.q);
  QTable a1, a2;  // applications to q_{m-1} and q_{m-2}
  if (gen != nullptr) {
    const std::vector<int> next = gen->sample_all();  // one draw for both
    a1 = sampled_opt_with(mdp, next, st.q);
    a2 = sampled_opt_with(mdp, next, st.q_prev);
  } else {
    a1 = bellman_opt(mdp, st.q);
    a2 = bellman_opt(mdp, st.q_prev);
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  QTable q_new(mdp.n_states, mdp.n_actions);
  for (std::size_t i = 0; i < q_new.v.size(); ++i)
    q_new.v[i] = st.q.v[i] + inv_m * (a2.v[i] - st.q.v[i]) +
                 (static_cast<double>(m - 1) * inv_m) * (a1.v[i] - a2.v[i]);
  // Noise of the summed-form recursion psi_m = m q_m:
  //   eps_m = (m-1)(T^_* q_{m-1} - T_* q_{m-1}) - (m-2)(T^_* q_{m-2} - T_* q_{m-2}),
  // zero for m = 1 where both summed-form lags are identically zero.
  if (gen != nullptr && m >= 2) {
    QTable e1 = table_diff(a1, bellman_opt(mdp, st.q));
    out.epsilon_last = QTable(mdp.n_states, mdp.n_actions);
    if (m == 2) {
      for (std::size_t i = 0; i < e1.v.size(); ++i)
        out.epsilon_last.v[i] = static_cast<double>(m - 1) * e1.v[i];
    } else {
      QTable e2 = table_diff(a2, bellman_opt(mdp, st.q_prev));
      for (std::size_t i = 0; i < e1.v.size(); ++i)
        out.epsilon_last.v[i] = static_cast<double>(m - 1) * e1.v[i] -
                                static_cast<double>(m - 2) * e2.v[i];
    }
  } else {
    out.epsilon_last = QTable(mdp.n_states, mdp.n_actions);
  }
  out.q_prev = st.q;
  out.q = std::move(q_new);
  return out;
}

SchemeState sql_psi_step(const FiniteMdp& mdp, GenerativeModel* gen, const SchemeState& st,
                         const QTable* inject) {
  check_no_inject_when_sampled(gen, inject, "sql_psi_step");
  SchemeState out = st;
  out.k = st.k + 1;
  const DeterministicPolicy pi_prev = st.policy;  // acting policy of step m-1
  out.policy = greedy(st.psi);
  QTable t, p_prev;
  if (gen != nullptr) {
    const std::vector<int> next = gen->sample_all();  // shared by both terms
    t = sampled_eval_with(mdp, next, out.policy, st.psi);
    p_prev = QTable(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
      for (int a = 0; a < mdp.n_actions; ++a) {
        const int s2 = next[static_cast<std::size_t>(s) * mdp.n_actions + a];
        p_prev.at(s, a) = st.psi_prev.at(s2, pi_prev.action[s2]);
      }
  } else {
    t = bellman_eval(mdp, out.policy, st.psi);
    p_prev = apply_policy_kernel(mdp, pi_prev, st.psi_prev);
  }
  QTable next_psi(mdp.n_states, mdp.n_actions);
  for (std::size_t i = 0; i < next_psi.v.size(); ++i)
    next_psi.v[i] = st.psi.v[i] + t.v[i] - mdp.gamma * p_prev.v[i];
  if (inject != nullptr) {
    detail::require_same_shape(next_psi, *inject, "sql_psi_step");
    for (std::size_t i = 0; i < next_psi.v.size(); ++i) next_psi.v[i] += inject->v[i];
    out.epsilon_last = *inject;
  } else {
    out.epsilon_last = QTable(mdp.n_states, mdp.n_actions);
  }
  out.psi_prev = st.psi;
  out.psi = std::move(next_psi);
  return out;
}

SchemeState dpp_step(const FiniteMdp& mdp, GenerativeModel* gen, const SchemeState& st,
                     const QTable* inject) {
  check_no_inject_when_sampled(gen, inject, "dpp_step");
  SchemeState out = st;
  out.k = st.k + 1;
  out.policy = greedy(st.psi);
  QTable t;
  if (gen != nullptr) {
    t = sampled_eval_with(mdp, gen->sample_all(), out.policy, st.psi);
    out.epsilon_last = table_diff(t, bellman_eval(mdp, out.policy, st.psi));
  } else {
    t = bellman_eval(mdp, out.policy, st.psi);
    out.epsilon_last = QTable(mdp.n_states, mdp.n_actions);
  }
  QTable next_psi(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    const double on_policy = st.psi.at(s, out.policy.action[s]);
    for (int a = 0; a < mdp.n_actions; ++a)
      next_psi.at(s, a) = st.psi.at(s, a) + t.at(s, a) - on_policy;
  }
  if (inject != nullptr) {
    detail::require_same_shape(next_psi, *inject, "dpp_step");
    for (std::size_t i = 0; i < next_psi.v.size(); ++i) next_psi.v[i] += inject->v[i];
    out.epsilon_last = *inject;
  }
  out.psi_prev = st.psi;
  out.psi = std::move(next_psi);
  return out;
}

// --- run_scheme ------------------------------------------------------------

SchemeRun run_scheme(const FiniteMdp& mdp, const RunOptions& opt) {
  require(opt.iterations >= 1, "run_scheme: iterations must be >= 1");
  for (std::size_t i = 0; i < opt.checkpoints.size(); ++i) {
    require(opt.checkpoints[i] >= 1 && opt.checkpoints[i] <= opt.iterations,
            "run_scheme: checkpoint outside [1, iterations]");
    require(i == 0 || opt.checkpoints[i] > opt.checkpoints[i - 1],
            "run_scheme: checkpoints must be strictly increasing");
  }
  if (opt.ledger) {
    const std::size_t need =
        ErrorLedger::memory_estimate(mdp.n_states, mdp.n_actions, opt.iterations);
    if (need > opt.ledger_memory_cap_bytes)
      throw std::runtime_error(
          "run_scheme: ledger for " + std::to_string(opt.iterations) + " iterations needs " +
          std::to_string(need) + " bytes, cap is " +
          std::to_string(opt.ledger_memory_cap_bytes));
  }

  SchemeRun run;
  run.scheme = opt.scheme;
  run.iterations = opt.iterations;
  run.seed = opt.seed;
  run.checkpoints = opt.checkpoints;

  std::optional<GenerativeModel> gen_storage;
  if (opt.sampled) gen_storage.emplace(mdp, opt.seed);
  GenerativeModel* gen = opt.sampled ? &*gen_storage : nullptr;

  SchemeState st = init_state(mdp, opt.scheme);
  if (opt.ledger) {
    run.has_ledger = true;
    run.ledger.q0 = st.q.v.empty() ? QTable(mdp.n_states, mdp.n_actions) : st.q;
    run.ledger.epsilons.reserve(static_cast<std::size_t>(opt.iterations));
    run.ledger.policies.reserve(static_cast<std::size_t>(opt.iterations));
  }

  std::size_t next_cp = 0;
  for (long k = 1; k <= opt.iterations; ++k) {
    switch (opt.scheme) {
      case SchemeId::avi: st = avi_step(mdp, gen, st); break;
      case SchemeId::movi: st = movi_step(mdp, gen, st, opt.beta); break;
      case SchemeId::sql: st = sql_step(mdp, gen, st); break;
      case SchemeId::dpp: st = dpp_step(mdp, gen, st); break;
    }
    if (opt.ledger) {
      run.ledger.epsilons.push_back(st.epsilon_last);
      run.ledger.policies.push_back(st.policy);
    }
    if (next_cp < opt.checkpoints.size() && k == opt.checkpoints[next_cp]) {
      run.policies.push_back(st.policy);
      ++next_cp;
    }
  }
  if (opt.ledger)
    run.ledger.q_latest = (opt.scheme == SchemeId::dpp) ? st.psi : st.q;
  run.final_state = std::move(st);
  return run;
}

}  // namespace movilab
