#pragma once

#include <cstdint>
#include <vector>

#include "movilab/garnet.hpp"
#include "movilab/ledger.hpp"
#include "movilab/mdp.hpp"
#include "movilab/schemes.hpp"

namespace movilab {

// --- Error accumulation ----------------------------------------------------

// E_k = -sum_{j=1..k} eps_j.
QTable cumulative_error(const ErrorLedger& ledger, int k);

// E'_{k,j} = -sum_{i=1..k-j} P_{i+j:i+1} (I - gamma P_{pi_i}) eps_i, where
// P_{j:i} = P_{pi_j} ... P_{pi_i} (identity when i > j).  Kernel products are
// applied as operators to tables; no kernel matrix is ever materialized.
QTable weighted_cumulative_error(const ErrorLedger& ledger, const FiniteMdp& mdp,
                                 int k, int j);

// All of E'_{k,0} .. E'_{k,k-1} in one pass, sharing the intermediate kernel
// applications (O(k^2) applications total instead of O(k^3)).
std::vector<QTable> weighted_cumulative_errors(const ErrorLedger& ledger,
                                               const FiniteMdp& mdp, int k);

// Replays the ledger: q_i = T_{pi_i} q_{i-1} + eps_i from q0, up to index
// `upto` (0 gives q0 back).
QTable reconstruct_q(const ErrorLedger& ledger, const FiniteMdp& mdp, int upto);

// --- Performance bounds ----------------------------------------------------

// Componentwise upper bound on q_* - q_{pi_{k+1}} after k+1 tracked
// iterations of the momentum scheme:
//   1/(k+1) [ (I - g P_{pi_*})^{-1} (E_{k+1} + q_{k+1} - q_0)
//             - (I - g P_{pi_{k+1}})^{-1} ( sum_{j<k} g^j E'_{k,j}
//                 + sum_{j<=k} g^j P_{j:1} (T_{pi_1} q_0 - q_0) ) ].
// Needs at least k+1 ledger entries.
QTable componentwise_bound_rhs(const ErrorLedger& ledger, const FiniteMdp& mdp,
                    const DeterministicPolicy& pi_star, int k);

// Norm form of the same bound on the mu-weighted l1 loss:
//   C / ((k+1)(1-g)) (||E_{k+1}||_{1,nu} + sum_{j<k} g^j ||E'_{k,j}||_{1,nu}
//                     + 2 q_max),
// where C is the concentrability coefficient for (mu, nu).
double l1_bound_rhs(const ErrorLedger& ledger, const FiniteMdp& mdp,
                      const DistributionSA& mu, const DistributionSA& nu, int k, double C);

// Sup-norm form: 1/((k+1)(1-g)) (||E_{k+1}||_inf + sum_{j<k} g^j ||E'_{k,j}||_inf
//                                + 2 q_max).
double sup_bound_rhs(const ErrorLedger& ledger, const FiniteMdp& mdp, int k);

// Averaged-error bound shared by sql and dpp after k tracked iterations:
//   2 g / (k (1-g)) ( sum_{j=1..k} g^{k-j} ||E_j||_inf + 8 g q_max / (1-g) ).
double sql_dpp_rhs(const ErrorLedger& ledger, const FiniteMdp& mdp, int k);

// Sample-complexity envelope for the momentum scheme with one generative
// draw per (s, a) per iteration, valid with probability 1 - delta:
//   2 r_max / (1-g)^2 [ 1/k + 3/(1-g) sqrt(2 ln(4 |S||A| / delta) / k) ].
double sample_complexity_rhs(long k, double delta, double r_max, double gamma, int n_states,
                 int n_actions);

// --- Concentrability -------------------------------------------------------

struct ConcentrabilityMode {
  bool exact = true;
  int n_policies = 0;      // sampled mode: number of random policies
  std::uint64_t seed = 0;  // sampled mode
};

struct ConcentrabilityResult {
  double value = 0.0;
  bool exact = true;  // false: lower bound from sampled policies
};

// C = max_pi || d_{pi,mu} / nu ||_inf over deterministic policies, the
// fraction taken componentwise.  Exact mode enumerates all n_actions^n_states
// policies and refuses (std::invalid_argument) beyond 1e6 of them; sampled
// mode draws random policies and returns a lower bound flagged as such.
// A state-action pair with nu = 0 but positive occupancy makes the
// coefficient infinite, which is reported as std::runtime_error.
ConcentrabilityResult concentrability(const FiniteMdp& mdp, const DistributionSA& mu,
                                      const DistributionSA& nu,
                                      const ConcentrabilityMode& mode);

// --- Loss ------------------------------------------------------------------

// q_star - q_pi, componentwise.
QTable loss(const FiniteMdp& mdp, const QTable& q_star, const DeterministicPolicy& pi);

// --- Bound report ----------------------------------------------------------

// Everything checked at one tracked checkpoint k (momentum scheme).
struct BoundReport {
  int k = 0;
  QTable loss_table;            // q_* - q_{pi_{k+1}}
  QTable rhs_componentwise;     // componentwise_bound_rhs at k
  double loss_sup = 0.0;
  double loss_l1mu = 0.0;
  double rhs_l1mu = 0.0;        // l1_bound_rhs
  double rhs_sup = 0.0;         // sup_bound_rhs
  double rhs_envelope = 0.0;
  bool holds_componentwise = false;  // slack_min >= -1e-8
  double slack_min = 0.0;            // min over (s,a) of rhs - loss
};

// Precomputed per-MDP context for bound evaluation.
struct BoundContext {
  QTable q_star;
  DeterministicPolicy pi_star;
  DistributionSA mu;
  DistributionSA nu;
  double concentrability = 0.0;
  double delta = 0.05;
};

BoundContext make_bound_context(const FiniteMdp& mdp, const DistributionSA& mu,
                                const DistributionSA& nu, double delta);

BoundReport evaluate_bounds(const ErrorLedger& ledger, const FiniteMdp& mdp,
                            const BoundContext& ctx, int k);

// --- Averaging-assumption estimator ----------------------------------------

// Estimator of how fast kernel-weighted noise averages out:
//   epsbar_{l,N} = max_{(s,a)} | 1/N sum_{n=1..N} P_{j+l:j+1,n} eps_{j,n}(s,a) |.
//
// The momentum scheme is run (sampled, empirical-mean weights) through
// iteration j.  Replicate n realizes eps_{j,n} by re-running iteration j
// from the pre-j state with fresh draws, and independently continues the
// run from the shared post-j state for max(l_values) further iterations,
// weighting the noise by the kernels of the acting policies of those
// iterations, innermost first; each l reads off the product of the first l
// kernels.  The two draw streams are separate, so the weighting kernels
// never depend on the noise they weight.  Seeds derive from `seed` by the
// counter scheme: the prefix uses mix_seed(seed, 0), replicate n's noise
// probe mix_seed(mix_seed(seed, 1), n), and its continuation
// mix_seed(mix_seed(seed, 2), n).  The estimate for each N is the running
// mean over the first N replicates in replicate order.
struct AssumptionResult {
  std::vector<int> l_values;
  int n_max = 0;
  // epsbar[l_index][N-1] for N = 1..n_max.
  std::vector<std::vector<double>> epsbar;
  // Raw weighted tables per replicate, kept only when requested:
  // weighted[l_index][n] is P_{j+l:j+1,n} eps_{j,n}.
  std::vector<std::vector<QTable>> weighted;
};

AssumptionResult assumption_check(const GarnetSpec& spec, double gamma, int j,
                                  const std::vector<int>& l_values, int n_max,
                                  std::uint64_t seed, bool keep_tables = false);

}  // namespace movilab
