#pragma once

#include <string>
#include <vector>

#include "movilab/config.hpp"
#include "movilab/schemes.hpp"

namespace movilab {

// --- Per-replicate records --------------------------------------------------

// One loss measurement (convergence / compare runs).
struct LossRow {
  SchemeId scheme;
  long iteration = 0;
  double loss = 0.0;
};

// One checkpoint of a bound-tracking run.
struct BoundRow {
  long k = 0;
  double loss_sup = 0.0;
  double loss_l1mu = 0.0;
  double cw_slack_min = 0.0;  // min over (s,a) of componentwise rhs - loss
  bool cw_holds = false;
  double sup_rhs = 0.0;
  double l1_rhs = 0.0;
  double envelope_rhs = 0.0;
  double concentrability = 0.0;
};

// One (depth, replicate-count) cell of an averaging diagnostic.
struct AssumptionRow {
  int l = 0;
  int n = 0;  // number of averaged replicates
  double epsbar = 0.0;
};

// Everything one model (replicate) produced.  Exactly one of the row vectors
// is populated, matching the experiment kind.
struct ReplicateResult {
  int replicate = 0;
  std::vector<LossRow> loss_rows;
  std::vector<BoundRow> bound_rows;
  std::vector<AssumptionRow> assumption_rows;
};

// --- Aggregates -------------------------------------------------------------

struct LossAggRow {
  SchemeId scheme;
  long iteration = 0;
  double mean_loss = 0.0;
  double std_loss = 0.0;
  int n_mdps = 0;
};

struct BoundAggRow {
  long k = 0;
  double mean_loss_sup = 0.0;
  double std_loss_sup = 0.0;
  double mean_loss_l1mu = 0.0;
  double std_loss_l1mu = 0.0;
  double mean_sup_rhs = 0.0;
  double mean_l1_rhs = 0.0;
  double mean_envelope_rhs = 0.0;
  double min_cw_slack = 0.0;
  bool all_cw_hold = false;
  int n_mdps = 0;
};

struct AssumptionAggRow {
  int l = 0;
  int n = 0;
  double mean_epsbar = 0.0;
  double std_epsbar = 0.0;
  int n_mdps = 0;
};

// Aggregation over replicates: mean and sample standard deviation
// (n-1 denominator, 0 when n = 1), accumulated in replicate-index order so
// results do not depend on scheduling.  Every replicate must carry the same
// row structure; mismatches throw std::runtime_error.
std::vector<LossAggRow> aggregate_loss(const std::vector<ReplicateResult>& reps);
std::vector<BoundAggRow> aggregate_bounds(const std::vector<ReplicateResult>& reps);
std::vector<AssumptionAggRow> aggregate_assumption(
    const std::vector<ReplicateResult>& reps);

// --- Running ----------------------------------------------------------------

// Work of a single replicate: generate the model from the replicate's seed
// block and produce the rows for the configured kind.
ReplicateResult run_replicate(const ExperimentConfig& cfg, int replicate_index);

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ReplicateResult> replicates;  // index order
  double wall_seconds = 0.0;
};

// Runs all replicates, on cfg.jobs worker threads (0 = hardware concurrency).
// Identical configs give identical replicate results regardless of the
// thread count.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// --- Output -----------------------------------------------------------------

// Writes under result.config.output_dir:
//   summary.json              config echo, build version, wall time
//   per_mdp/mdp_XXXXX.csv     one file per replicate
//   aggregate.csv             across-replicate statistics
//   figure.csv                plot-ready view (not for bounds runs)
// CSV numbers are printed with 17 significant digits so identical runs give
// byte-identical files and parsing them back is exact.
void write_experiment(const ExperimentResult& result);

// Recomputes aggregate.csv and figure.csv of a finished run directory from
// summary.json and the per-model files.  Because CSV round trips are exact,
// re-emitting right after a run reproduces the same bytes.
void emit_outputs(const std::string& run_dir);

}  // namespace movilab
