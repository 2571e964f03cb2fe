#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "movilab/ledger.hpp"
#include "movilab/mdp.hpp"
#include "movilab/rng.hpp"

namespace movilab {

// --- Generative model ------------------------------------------------------

// Seeded sampler of next states, one draw per (s, a) per iteration.  Draws
// happen in row-major (s, a) order; that order is part of the reproducibility
// contract.
class GenerativeModel {
 public:
  GenerativeModel(const FiniteMdp& mdp, std::uint64_t seed);

  int sample_next(int s, int a);

  // One fresh next state per (s, a), row-major.
  std::vector<int> sample_all();

  const FiniteMdp& mdp() const { return *mdp_; }

 private:
  const FiniteMdp* mdp_;
  Rng rng_;
  // Per-(s,a) support and cumulative weights, so a draw is one uniform plus a
  // short scan.
  std::vector<std::vector<int>> support_;
  std::vector<std::vector<double>> cum_;
};

// Sampled Bellman operators built on one generative draw per (s, a):
//   (T^_pi q)(s,a) = r(s,a) + gamma q(s', pi(s')),   s' ~ P(.|s,a).
// Both return the sampled table and the realized noise, i.e. the sampled
// minus the exact application at the same point.
struct SampledApplication {
  QTable value;
  QTable epsilon;
};

SampledApplication sampled_bellman_eval(GenerativeModel& gen, const DeterministicPolicy& pi,
                                        const QTable& q);
SampledApplication sampled_bellman_opt(GenerativeModel& gen, const QTable& q);

// Deterministic pieces reused by the schemes: apply the sampled operator for
// a fixed vector of next states (one per (s, a), row-major).
QTable sampled_eval_with(const FiniteMdp& mdp, const std::vector<int>& next,
                         const DeterministicPolicy& pi, const QTable& q);
QTable sampled_opt_with(const FiniteMdp& mdp, const std::vector<int>& next, const QTable& q);

// --- Averaging schedule ----------------------------------------------------

// Weight beta_k of the running average h_k = beta_k h_{k-1} + (1-beta_k) q_k.
// EmpiricalMean (beta_k = k/(k+1)) makes h_k the plain mean of q_0..q_k.
struct BetaSchedule {
  enum class Kind { empirical_mean, constant };
  Kind kind = Kind::empirical_mean;
  double value = 0.0;  // constant mode only, in [0, 1)

  static BetaSchedule empirical_mean() { return {}; }
  static BetaSchedule constant(double beta);

  double beta(long k) const {
    return kind == Kind::empirical_mean
               ? static_cast<double>(k) / static_cast<double>(k + 1)
               : value;
  }
};

// --- Scheme state and steps ------------------------------------------------

enum class SchemeId { avi, movi, sql, dpp };

const char* scheme_name(SchemeId id);
bool parse_scheme(const std::string& name, SchemeId& out);

// Sampling stream that a scheme draws from, so schemes sharing one replicate
// seed never consume each other's randomness.
inline Stream scheme_stream(SchemeId id) {
  switch (id) {
    case SchemeId::avi: return Stream::avi;
    case SchemeId::movi: return Stream::movi;
    case SchemeId::sql: return Stream::sql;
    case SchemeId::dpp: return Stream::dpp;
  }
  return Stream::avi;
}

// Rolling state shared by all schemes; unused tables stay empty.  After step
// k the members hold:
//   q        q_k                     (avi, movi, sql)
//   q_prev   q_{k-1}                 (sql)
//   h        h_k                     (movi)
//   psi      psi_k                   (dpp and the psi-form recursions)
//   psi_prev psi_{k-1}               (psi-form recursions)
//   policy   pi_k, the acting policy of step k
//   epsilon_last  the noise realized in step k
struct SchemeState {
  long k = 0;
  QTable q;
  QTable q_prev;
  QTable h;
  QTable psi;
  QTable psi_prev;
  DeterministicPolicy policy;
  QTable epsilon_last;
};

// All-zero tables, policy = greedy of zeros (action 0 everywhere).
SchemeState init_state(const FiniteMdp& mdp, SchemeId id);

// One iteration each.  Passing gen == nullptr runs the exact operator;
// `inject` (movi and the psi forms only, exact mode) adds external noise to
// the update.  Steps are pure: the input state is left untouched.
//
// avi:  pi_{k+1} greedy of q_k;  q_{k+1} = T^_pi q_k.
SchemeState avi_step(const FiniteMdp& mdp, GenerativeModel* gen, const SchemeState& st);

// movi: pi_{k+1} greedy of h_k;  q_{k+1} = T^_pi q_k;
//       h_{k+1} = beta h_k + (1-beta) q_{k+1}.
SchemeState movi_step(const FiniteMdp& mdp, GenerativeModel* gen, const SchemeState& st,
                      const BetaSchedule& schedule, const QTable* inject = nullptr);

// movi in summed form (exact operators only):
//       pi_{k+1} greedy of psi_k;
//       psi_{k+1} = psi_k + T_pi psi_k - gamma P_pi psi_{k-1} + eps.
// With the empirical-mean schedule psi_k tracks (k+1) h_k exactly.
SchemeState psi_movi_step(const FiniteMdp& mdp, const SchemeState& st,
                          const QTable* inject = nullptr);

// sql:  pi_{k+1} greedy of q_k;  with m = k+1 and one shared draw for both
//       applications,
//       q_m = q_{m-1} + (1/m)(T^_* q_{m-2} - q_{m-1})
//                     + ((m-1)/m)(T^_* q_{m-1} - T^_* q_{m-2}),
//       q_{-1} := q_0 = 0.
SchemeState sql_step(const FiniteMdp& mdp, GenerativeModel* gen, const SchemeState& st);

// sql in summed form (psi_m = m q_m):
//       pi_m greedy of psi_{m-1};
//       psi_m = psi_{m-1} + T^_{pi_m} psi_{m-1} - gamma P^_{pi_{m-1}} psi_{m-2},
// with the previous acting policy supplying pi_{m-1} and both terms sharing
// one draw.
SchemeState sql_psi_step(const FiniteMdp& mdp, GenerativeModel* gen, const SchemeState& st,
                         const QTable* inject = nullptr);

// dpp:  pi_m greedy of psi_{m-1};
//       psi_m = psi_{m-1} + T^_pi psi_{m-1} - psi_{m-1}(s, pi(s)).
// The subtracted term is exact (a table lookup broadcast over actions).
SchemeState dpp_step(const FiniteMdp& mdp, GenerativeModel* gen, const SchemeState& st,
                     const QTable* inject = nullptr);

// --- Whole runs ------------------------------------------------------------

struct RunOptions {
  SchemeId scheme = SchemeId::movi;
  long iterations = 0;
  BetaSchedule beta;
  bool sampled = true;
  std::uint64_t seed = 0;
  bool ledger = false;
  std::vector<int> checkpoints;  // strictly increasing iteration numbers
  std::size_t ledger_memory_cap_bytes = std::size_t(2) << 30;  // 2 GiB
};

struct SchemeRun {
  SchemeId scheme;
  long iterations = 0;
  std::uint64_t seed = 0;
  std::vector<int> checkpoints;
  // Acting policy of each checkpointed iteration, aligned with `checkpoints`.
  std::vector<DeterministicPolicy> policies;
  SchemeState final_state;
  ErrorLedger ledger;  // filled only when RunOptions::ledger was set
  bool has_ledger = false;
};

// Runs one scheme start to finish.  When the ledger is requested the memory
// estimate is checked against the cap up front and the run refuses to start
// if it would not fit.
SchemeRun run_scheme(const FiniteMdp& mdp, const RunOptions& opt);

}  // namespace movilab
