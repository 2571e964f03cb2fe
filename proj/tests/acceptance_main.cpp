// Acceptance gate: end-to-end checks of the laboratory's advertised
// behaviour.  Each criterion prints one [PASS]/[FAIL] line; the process
// exits nonzero if any fails.  Tolerances are pinned here, not configurable.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "movilab/analysis.hpp"
#include "movilab/config.hpp"
#include "movilab/experiment.hpp"
#include "movilab/garnet.hpp"
#include "movilab/mdp.hpp"
#include "movilab/rng.hpp"
#include "movilab/schemes.hpp"

using namespace movilab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kBoundSeed = 40220601;
constexpr std::uint64_t kBatchSeed = 20260822;
constexpr std::uint64_t kAssumeSeed = 77002;

double table_gap(const QTable& a, const QTable& b) {
  double gap = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) gap = std::max(gap, std::abs(a.v[i] - b.v[i]));
  return gap;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in.good()) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ExperimentConfig make_config(const json& doc) {
  ValidationResult vr = validate_config(doc);
  if (!vr.ok()) {
    std::string msg = "acceptance config invalid:";
    for (const auto& e : vr.errors) msg += " " + e;
    throw std::runtime_error(msg);
  }
  return vr.config;
}

double mean_loss_at(const std::vector<LossAggRow>& agg, SchemeId s, long iteration) {
  for (const auto& row : agg)
    if (row.scheme == s && row.iteration == iteration) return row.mean_loss;
  throw std::runtime_error("aggregate row not found");
}

double mean_epsbar_at(const std::vector<AssumptionAggRow>& agg, int l, int n) {
  for (const auto& row : agg)
    if (row.l == l && row.n == n) return row.mean_epsbar;
  throw std::runtime_error("assumption row not found");
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main() {
  bool ok[12];
  for (bool& b : ok) b = true;
  fs::remove_all("acceptance_out");

  try {
    // --- Ledger bounds on sampled momentum runs (criteria 1, 2, 10) --------
    auto t0 = std::chrono::steady_clock::now();
    std::vector<FiniteMdp> small_batch;
    for (int i = 0; i < 20; ++i) {
      std::uint64_t base = mix_seed(kBoundSeed, i);
      GarnetSpec spec{10, 2, 2, stream_seed(base, Stream::garnet_gen)};
      FiniteMdp mdp = generate(spec, 0.9);
      small_batch.push_back(mdp);

      RunOptions opt;
      opt.scheme = SchemeId::movi;
      opt.iterations = 500;
      opt.beta = BetaSchedule::empirical_mean();
      opt.sampled = true;
      opt.seed = stream_seed(base, Stream::movi);
      opt.ledger = true;
      opt.checkpoints = {10, 100, 499};
      SchemeRun run = run_scheme(mdp, opt);

      DistributionSA unif = uniform_sa(mdp.n_states, mdp.n_actions);
      BoundContext ctx = make_bound_context(mdp, unif, unif, 0.05);
      for (int k : {10, 100, 499}) {
        BoundReport rep = evaluate_bounds(run.ledger, mdp, ctx, k);
        ok[1] = ok[1] && rep.slack_min >= -1e-8;
        ok[2] = ok[2] && rep.rhs_sup >= rep.loss_sup - 1e-8 &&
                rep.rhs_l1mu >= rep.loss_l1mu - 1e-8;
        ok[10] = ok[10] && rep.loss_sup <= sample_complexity_rhs(
                                               k, 0.05, mdp.r_max, mdp.gamma,
                                               mdp.n_states, mdp.n_actions);
      }
    }
    std::printf("-- ledger bounds on 20 models done (%.1fs)\n", elapsed(t0));

    // --- Scheme identities on the same batch (criteria 3, 4, 5) ------------
    t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 20; ++i) {
      const FiniteMdp& mdp = small_batch[static_cast<std::size_t>(i)];
      std::uint64_t base = mix_seed(kBoundSeed, i);

      // Summed iterate tracks (k+1) x averaged iterate under one noise draw.
      std::mt19937_64 noise_rng(mix_seed(base, 777));
      std::uniform_real_distribution<double> unif_noise(-0.1, 0.1);
      BetaSchedule sched = BetaSchedule::empirical_mean();
      SchemeState direct = init_state(mdp, SchemeId::movi);
      SchemeState summed = init_state(mdp, SchemeId::movi);
      for (int t = 1; t <= 200; ++t) {
        QTable noise(mdp.n_states, mdp.n_actions);
        for (double& x : noise.v) x = unif_noise(noise_rng);
        direct = movi_step(mdp, nullptr, direct, sched, &noise);
        summed = psi_movi_step(mdp, summed, &noise);
        double tol = 1e-9 * (t + 1) * mdp.q_max();
        for (std::size_t idx = 0; idx < summed.psi.size(); ++idx) {
          ok[3] = ok[3] &&
                  std::abs(summed.psi.v[idx] - (t + 1) * direct.h.v[idx]) <= tol;
        }
      }

      // Both speedy forms pick the same greedy policy under shared draws.
      std::uint64_t sql_seed = stream_seed(base, Stream::sql);
      GenerativeModel gen_q(mdp, sql_seed);
      GenerativeModel gen_psi(mdp, sql_seed);
      SchemeState q_form = init_state(mdp, SchemeId::sql);
      SchemeState psi_form = init_state(mdp, SchemeId::sql);
      for (int t = 0; t < 200; ++t) {
        q_form = sql_step(mdp, &gen_q, q_form);
        psi_form = sql_psi_step(mdp, &gen_psi, psi_form);
        ok[4] = ok[4] && q_form.policy.action == psi_form.policy.action;
      }

      // Exact value iteration contracts geometrically from q_0 = 0.
      QTable q_star = optimal_q(mdp, 1e-12);
      SchemeState vi = init_state(mdp, SchemeId::avi);
      for (int k = 1; k <= 200; ++k) {
        vi = avi_step(mdp, nullptr, vi);
        double limit = 2.0 * std::pow(mdp.gamma, k) * mdp.q_max() + 1e-12;
        ok[5] = ok[5] && table_gap(vi.q, q_star) <= limit;
      }
    }
    std::printf("-- scheme identities done (%.1fs)\n", elapsed(t0));

    // --- Benchmark batches (criteria 6, 7, 11) ------------------------------
    t0 = std::chrono::steady_clock::now();
    json conv_doc = {
        {"kind", "convergence"},
        {"master_seed", kBatchSeed},
        {"garnet", {{"n_states", 30}, {"n_actions", 4}, {"branching", 4}}},
        {"gamma", 0.9},
        {"iterations", 10000},
        {"n_mdps", 100},
        {"checkpoints", json::array({1, 10, 100, 1000, 10000})},
        {"eval_norm", "l1_uniform"},
        {"output_dir", "acceptance_out/run_a"},
    };
    ExperimentResult conv_a = run_experiment(make_config(conv_doc));
    write_experiment(conv_a);
    std::printf("-- benchmark run a done (%.1fs)\n", elapsed(t0));

    conv_doc["output_dir"] = "acceptance_out/run_b";
    write_experiment(run_experiment(make_config(conv_doc)));
    ok[11] = slurp("acceptance_out/run_a/aggregate.csv") ==
                 slurp("acceptance_out/run_b/aggregate.csv") &&
             slurp("acceptance_out/run_a/figure.csv") ==
                 slurp("acceptance_out/run_b/figure.csv");

    std::vector<LossAggRow> conv_agg = aggregate_loss(conv_a.replicates);
    double avi_final = mean_loss_at(conv_agg, SchemeId::avi, 10000);
    double movi_final = mean_loss_at(conv_agg, SchemeId::movi, 10000);
    ok[6] = movi_final < avi_final &&
            movi_final < 0.5 * mean_loss_at(conv_agg, SchemeId::movi, 100) &&
            avi_final > 0.9 * mean_loss_at(conv_agg, SchemeId::avi, 1000);

    json comp_doc = conv_doc;
    comp_doc["kind"] = "compare";
    comp_doc["output_dir"] = "acceptance_out/compare";
    comp_doc.erase("schemes");
    ExperimentResult comp = run_experiment(make_config(comp_doc));
    write_experiment(comp);
    std::vector<LossAggRow> comp_agg = aggregate_loss(comp.replicates);
    double c_avi = mean_loss_at(comp_agg, SchemeId::avi, 10000);
    double c_movi = mean_loss_at(comp_agg, SchemeId::movi, 10000);
    double c_sql = mean_loss_at(comp_agg, SchemeId::sql, 10000);
    double c_dpp = mean_loss_at(comp_agg, SchemeId::dpp, 10000);
    double lo = std::min({c_movi, c_sql, c_dpp});
    double hi = std::max({c_movi, c_sql, c_dpp});
    ok[7] = c_movi < c_avi && c_sql < c_avi && c_dpp < c_avi && hi <= 2.0 * lo;
    std::printf("-- benchmark batches done (%.1fs)\n", elapsed(t0));

    // --- Noise-averaging estimate (criterion 8) -----------------------------
    t0 = std::chrono::steady_clock::now();
    json assume_doc = {
        {"kind", "assumption"},
        {"master_seed", kAssumeSeed},
        {"n_mdps", 20},
        {"output_dir", "acceptance_out/assumption"},
    };
    ExperimentResult assume = run_experiment(make_config(assume_doc));
    write_experiment(assume);
    std::vector<AssumptionAggRow> assume_agg = aggregate_assumption(assume.replicates);
    double base_200 = mean_epsbar_at(assume_agg, 0, 200);
    for (int l : {0, 1, 2, 5}) {
      double at_200 = mean_epsbar_at(assume_agg, l, 200);
      ok[8] = ok[8] && at_200 < mean_epsbar_at(assume_agg, l, 2);
      if (l > 0) ok[8] = ok[8] && at_200 <= 1.1 * base_200;
    }
    std::printf("-- noise-averaging estimate done (%.1fs)\n", elapsed(t0));

    // --- Drift at non-optimal actions (criterion 9) -------------------------
    FiniteMdp tiny(1, 2, {1.0, 1.0}, {1.0, 2.0}, 0.5, 2.0);
    SchemeState drift = init_state(tiny, SchemeId::dpp);
    double mid_point = 0.0;
    for (int t = 1; t <= 2000; ++t) {
      drift = dpp_step(tiny, nullptr, drift);
      if (t == 1000) mid_point = drift.psi.at(0, 0);
    }
    ok[9] = drift.psi.at(0, 0) < mid_point - 1.0 &&
            greedy(drift.psi).action[0] == 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
    return 1;
  }

  struct Line {
    int id;
    const char* label;
  };
  const Line lines[] = {
      {1, "componentwise loss dominated by the ledger bound on sampled momentum runs"},
      {2, "sup and weighted-l1 bounds hold with enumerated concentrability"},
      {3, "summed iterate tracks (k+1) times the averaged iterate under shared noise"},
      {4, "both speedy forms pick identical greedy policies under shared draws"},
      {5, "exact value iteration contracts at the discount rate"},
      {6, "momentum beats plain iteration on the benchmark batch"},
      {7, "all accelerated schemes end below plain iteration and cluster together"},
      {8, "averaged noise shrinks with replicates and stays flat under lookahead"},
      {9, "dpp drifts unboundedly at the non-optimal action while acting optimally"},
      {10, "sampled losses stay inside the sample-complexity envelope"},
      {11, "identical seeds give byte-identical aggregate output"},
  };
  int failures = 0;
  for (const Line& line : lines) {
    std::printf("[%s] criterion %2d: %s\n", ok[line.id] ? "PASS" : "FAIL",
                line.id, line.label);
    if (!ok[line.id]) ++failures;
  }
  std::printf("acceptance: %d/11 criteria passed\n", 11 - failures);
  return failures == 0 ? 0 : 1;
}
