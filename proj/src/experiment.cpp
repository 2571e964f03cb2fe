#include "movilab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "movilab/analysis.hpp"
#include "movilab/csv.hpp"
#include "movilab/garnet.hpp"
#include "movilab/rng.hpp"

#ifndef MOVILAB_VERSION
#define MOVILAB_VERSION "unknown"
#endif

namespace movilab {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

double eval_loss(const FiniteMdp& mdp, const QTable& q_star,
                 const DeterministicPolicy& pi, EvalNorm norm) {
  QTable table = loss(mdp, q_star, pi);
  if (norm == EvalNorm::l1_uniform) {
    return weighted_lp_norm(table, uniform_sa(mdp.n_states, mdp.n_actions), 1.0);
  }
  return sup_norm(table);
}

GarnetSpec replicate_spec(const ExperimentConfig& cfg, std::uint64_t base) {
  GarnetSpec spec;
  spec.n_states = cfg.garnet.n_states;
  spec.n_actions = cfg.garnet.n_actions;
  spec.branching = cfg.garnet.branching;
  spec.seed = stream_seed(base, Stream::garnet_gen);
  return spec;
}

std::vector<int> to_int_checkpoints(const std::vector<long>& cps) {
  std::vector<int> out;
  out.reserve(cps.size());
  for (long c : cps) out.push_back(static_cast<int>(c));
  return out;
}

void fill_loss_rows(const ExperimentConfig& cfg, std::uint64_t base,
                    ReplicateResult& out) {
  FiniteMdp mdp = generate(replicate_spec(cfg, base), cfg.gamma);
  QTable q_star = optimal_q(mdp, 1e-12);
  for (SchemeId scheme : cfg.schemes) {
    RunOptions opt;
    opt.scheme = scheme;
    opt.iterations = cfg.iterations;
    opt.beta = cfg.beta;
    opt.sampled = true;
    opt.seed = stream_seed(base, scheme_stream(scheme));
    opt.ledger = false;
    opt.checkpoints = to_int_checkpoints(cfg.checkpoints);
    SchemeRun run = run_scheme(mdp, opt);
    for (std::size_t i = 0; i < run.checkpoints.size(); ++i) {
      LossRow row;
      row.scheme = scheme;
      row.iteration = run.checkpoints[i];
      row.loss = eval_loss(mdp, q_star, run.policies[i], cfg.eval_norm);
      out.loss_rows.push_back(row);
    }
  }
}

void fill_bound_rows(const ExperimentConfig& cfg, std::uint64_t base,
                     ReplicateResult& out) {
  FiniteMdp mdp = generate(replicate_spec(cfg, base), cfg.gamma);
  DistributionSA mu = uniform_sa(mdp.n_states, mdp.n_actions);
  BoundContext ctx = make_bound_context(mdp, mu, mu, cfg.delta);

  RunOptions opt;
  opt.scheme = SchemeId::movi;
  opt.iterations = cfg.iterations;
  opt.beta = cfg.beta;
  opt.sampled = true;
  opt.seed = stream_seed(base, Stream::movi);
  opt.ledger = true;
  opt.ledger_memory_cap_bytes = cfg.ledger_memory_cap_mib * (std::size_t(1) << 20);
  SchemeRun run = run_scheme(mdp, opt);

  for (long k : cfg.checkpoints) {
    BoundReport rep = evaluate_bounds(run.ledger, mdp, ctx, static_cast<int>(k));
    BoundRow row;
    row.k = k;
    row.loss_sup = rep.loss_sup;
    row.loss_l1mu = rep.loss_l1mu;
    row.cw_slack_min = rep.slack_min;
    row.cw_holds = rep.holds_componentwise;
    row.sup_rhs = rep.rhs_sup;
    row.l1_rhs = rep.rhs_l1mu;
    row.envelope_rhs = rep.rhs_envelope;
    row.concentrability = ctx.concentrability;
    out.bound_rows.push_back(row);
  }
}

void fill_assumption_rows(const ExperimentConfig& cfg, std::uint64_t base,
                          ReplicateResult& out) {
  AssumptionResult res =
      assumption_check(replicate_spec(cfg, base), cfg.gamma, cfg.assumption.j,
                       cfg.assumption.l_values, cfg.assumption.n_max,
                       stream_seed(base, Stream::assumption));
  for (std::size_t li = 0; li < res.l_values.size(); ++li) {
    for (int n = 1; n <= res.n_max; ++n) {
      AssumptionRow row;
      row.l = res.l_values[li];
      row.n = n;
      row.epsbar = res.epsbar[li][static_cast<std::size_t>(n) - 1];
      out.assumption_rows.push_back(row);
    }
  }
}

// Mean and sample standard deviation (n-1), accumulated in the order given.
void mean_std(const std::vector<double>& xs, double& mean, double& stddev) {
  const std::size_t n = xs.size();
  double sum = 0.0;
  for (double x : xs) sum += x;
  mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
  if (n < 2) {
    stddev = 0.0;
    return;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  stddev = std::sqrt(ss / static_cast<double>(n - 1));
}

[[noreturn]] void structure_mismatch(const char* what) {
  throw std::runtime_error(std::string("aggregate: replicates disagree on ") +
                           what);
}

std::string per_mdp_name(int replicate) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "mdp_%05d.csv", replicate);
  return buf;
}

const std::vector<std::string> kLossHeader = {"replicate", "scheme", "iteration",
                                              "loss"};
const std::vector<std::string> kBoundHeader = {
    "replicate", "k",       "loss_sup", "loss_l1mu",    "cw_slack_min",
    "cw_holds",  "sup_rhs", "l1_rhs",   "envelope_rhs", "concentrability"};
const std::vector<std::string> kAssumptionHeader = {"replicate", "l", "N",
                                                    "epsbar"};

const std::vector<std::string>& per_mdp_header(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::convergence:
    case ExperimentKind::compare:
      return kLossHeader;
    case ExperimentKind::bounds:
      return kBoundHeader;
    case ExperimentKind::assumption:
      return kAssumptionHeader;
  }
  return kLossHeader;
}

void write_per_mdp(const fs::path& path, ExperimentKind kind,
                   const ReplicateResult& rep) {
  CsvWriter w(path.string());
  w.row(per_mdp_header(kind));
  const std::string rep_cell = std::to_string(rep.replicate);
  switch (kind) {
    case ExperimentKind::convergence:
    case ExperimentKind::compare:
      for (const LossRow& r : rep.loss_rows) {
        w.row({rep_cell, scheme_name(r.scheme), std::to_string(r.iteration),
               format_double(r.loss)});
      }
      break;
    case ExperimentKind::bounds:
      for (const BoundRow& r : rep.bound_rows) {
        w.row({rep_cell, std::to_string(r.k), format_double(r.loss_sup),
               format_double(r.loss_l1mu), format_double(r.cw_slack_min),
               r.cw_holds ? "1" : "0", format_double(r.sup_rhs),
               format_double(r.l1_rhs), format_double(r.envelope_rhs),
               format_double(r.concentrability)});
      }
      break;
    case ExperimentKind::assumption:
      for (const AssumptionRow& r : rep.assumption_rows) {
        w.row({rep_cell, std::to_string(r.l), std::to_string(r.n),
               format_double(r.epsbar)});
      }
      break;
  }
  w.close();
}

void write_loss_aggregate(const fs::path& path,
                          const std::vector<LossAggRow>& rows) {
  CsvWriter w(path.string());
  w.row({"scheme", "iteration", "mean_loss", "std_loss", "n_mdps"});
  for (const LossAggRow& r : rows) {
    w.row({scheme_name(r.scheme), std::to_string(r.iteration),
           format_double(r.mean_loss), format_double(r.std_loss),
           std::to_string(r.n_mdps)});
  }
  w.close();
}

void write_bound_aggregate(const fs::path& path,
                           const std::vector<BoundAggRow>& rows) {
  CsvWriter w(path.string());
  w.row({"k", "mean_loss_sup", "std_loss_sup", "mean_loss_l1mu",
         "std_loss_l1mu", "mean_sup_rhs", "mean_l1_rhs", "mean_envelope_rhs",
         "min_cw_slack", "all_cw_hold", "n_mdps"});
  for (const BoundAggRow& r : rows) {
    w.row({std::to_string(r.k), format_double(r.mean_loss_sup),
           format_double(r.std_loss_sup), format_double(r.mean_loss_l1mu),
           format_double(r.std_loss_l1mu), format_double(r.mean_sup_rhs),
           format_double(r.mean_l1_rhs), format_double(r.mean_envelope_rhs),
           format_double(r.min_cw_slack), r.all_cw_hold ? "1" : "0",
           std::to_string(r.n_mdps)});
  }
  w.close();
}

void write_assumption_aggregate(const fs::path& path,
                                const std::vector<AssumptionAggRow>& rows) {
  CsvWriter w(path.string());
  w.row({"l", "N", "mean_epsbar", "std_epsbar", "n_mdps"});
  for (const AssumptionAggRow& r : rows) {
    w.row({std::to_string(r.l), std::to_string(r.n),
           format_double(r.mean_epsbar), format_double(r.std_epsbar),
           std::to_string(r.n_mdps)});
  }
  w.close();
}

// Plot-ready view of loss curves: checkpoint-major so one iteration's schemes
// sit together, schemes in config order within each block.
void write_loss_figure(const fs::path& path, const ExperimentConfig& cfg,
                       const std::vector<LossAggRow>& agg) {
  const std::size_t n_schemes = cfg.schemes.size();
  const std::size_t n_cps = cfg.checkpoints.size();
  if (agg.size() != n_schemes * n_cps) {
    throw std::runtime_error("figure: aggregate shape does not match config");
  }
  CsvWriter w(path.string());
  w.row({"iteration", "scheme", "mean_error", "std_error"});
  for (std::size_t c = 0; c < n_cps; ++c) {
    for (std::size_t s = 0; s < n_schemes; ++s) {
      const LossAggRow& r = agg[s * n_cps + c];
      w.row({std::to_string(r.iteration), scheme_name(r.scheme),
             format_double(r.mean_loss), format_double(r.std_loss)});
    }
  }
  w.close();
}

void write_assumption_figure(const fs::path& path,
                             const std::vector<AssumptionAggRow>& agg) {
  CsvWriter w(path.string());
  w.row({"N", "l", "mean_epsbar", "std_epsbar"});
  for (const AssumptionAggRow& r : agg) {
    w.row({std::to_string(r.n), std::to_string(r.l),
           format_double(r.mean_epsbar), format_double(r.std_epsbar)});
  }
  w.close();
}

void write_outputs_to(const fs::path& dir, const ExperimentConfig& cfg,
                      const std::vector<ReplicateResult>& reps) {
  switch (cfg.kind) {
    case ExperimentKind::convergence:
    case ExperimentKind::compare: {
      std::vector<LossAggRow> agg = aggregate_loss(reps);
      write_loss_aggregate(dir / "aggregate.csv", agg);
      write_loss_figure(dir / "figure.csv", cfg, agg);
      break;
    }
    case ExperimentKind::bounds: {
      write_bound_aggregate(dir / "aggregate.csv", aggregate_bounds(reps));
      break;
    }
    case ExperimentKind::assumption: {
      std::vector<AssumptionAggRow> agg = aggregate_assumption(reps);
      write_assumption_aggregate(dir / "aggregate.csv", agg);
      write_assumption_figure(dir / "figure.csv", agg);
      break;
    }
  }
}

void expect_header(const CsvFile& file, const std::vector<std::string>& want,
                   const std::string& path) {
  if (file.header != want) {
    throw std::runtime_error(path +
                             ": header does not match the run kind in "
                             "summary.json");
  }
}

ReplicateResult parse_per_mdp(const fs::path& path, ExperimentKind kind,
                              int replicate) {
  CsvFile file = read_csv(path.string());
  expect_header(file, per_mdp_header(kind), path.string());
  ReplicateResult out;
  out.replicate = replicate;
  for (const std::vector<std::string>& cells : file.rows) {
    if (cells.size() != file.header.size()) {
      throw std::runtime_error(path.string() + ": ragged row");
    }
    if (parse_int(cells[0]) != replicate) {
      throw std::runtime_error(path.string() + ": replicate column mismatch");
    }
    switch (kind) {
      case ExperimentKind::convergence:
      case ExperimentKind::compare: {
        LossRow r;
        if (!parse_scheme(cells[1], r.scheme)) {
          throw std::runtime_error(path.string() + ": unknown scheme " + cells[1]);
        }
        r.iteration = parse_int(cells[2]);
        r.loss = parse_double(cells[3]);
        out.loss_rows.push_back(r);
        break;
      }
      case ExperimentKind::bounds: {
        BoundRow r;
        r.k = parse_int(cells[1]);
        r.loss_sup = parse_double(cells[2]);
        r.loss_l1mu = parse_double(cells[3]);
        r.cw_slack_min = parse_double(cells[4]);
        r.cw_holds = parse_int(cells[5]) != 0;
        r.sup_rhs = parse_double(cells[6]);
        r.l1_rhs = parse_double(cells[7]);
        r.envelope_rhs = parse_double(cells[8]);
        r.concentrability = parse_double(cells[9]);
        out.bound_rows.push_back(r);
        break;
      }
      case ExperimentKind::assumption: {
        AssumptionRow r;
        r.l = parse_int(cells[1]);
        r.n = parse_int(cells[2]);
        r.epsbar = parse_double(cells[3]);
        out.assumption_rows.push_back(r);
        break;
      }
    }
  }
  return out;
}

}  // namespace

ReplicateResult run_replicate(const ExperimentConfig& cfg, int replicate_index) {
  ReplicateResult out;
  out.replicate = replicate_index;
  const std::uint64_t base =
      mix_seed(cfg.master_seed, static_cast<std::uint64_t>(replicate_index));
  switch (cfg.kind) {
    case ExperimentKind::convergence:
    case ExperimentKind::compare:
      fill_loss_rows(cfg, base, out);
      break;
    case ExperimentKind::bounds:
      fill_bound_rows(cfg, base, out);
      break;
    case ExperimentKind::assumption:
      fill_assumption_rows(cfg, base, out);
      break;
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.config = cfg;
  result.replicates.resize(static_cast<std::size_t>(cfg.n_mdps));

  unsigned jobs = cfg.jobs > 0 ? static_cast<unsigned>(cfg.jobs)
                               : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(cfg.n_mdps));

  if (jobs <= 1) {
    for (int i = 0; i < cfg.n_mdps; ++i) {
      result.replicates[static_cast<std::size_t>(i)] = run_replicate(cfg, i);
    }
  } else {
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
      while (true) {
        int i = next.fetch_add(1);
        if (i >= cfg.n_mdps) return;
        try {
          result.replicates[static_cast<std::size_t>(i)] = run_replicate(cfg, i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  const auto t1 = std::chrono::steady_clock::now();
  result.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  return result;
}

std::vector<LossAggRow> aggregate_loss(const std::vector<ReplicateResult>& reps) {
  std::vector<LossAggRow> out;
  if (reps.empty()) return out;
  const std::vector<LossRow>& first = reps[0].loss_rows;
  for (const ReplicateResult& rep : reps) {
    if (rep.loss_rows.size() != first.size()) structure_mismatch("row count");
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (rep.loss_rows[i].scheme != first[i].scheme ||
          rep.loss_rows[i].iteration != first[i].iteration) {
        structure_mismatch("scheme/iteration layout");
      }
    }
  }
  out.reserve(first.size());
  std::vector<double> xs(reps.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    for (std::size_t r = 0; r < reps.size(); ++r) xs[r] = reps[r].loss_rows[i].loss;
    LossAggRow row;
    row.scheme = first[i].scheme;
    row.iteration = first[i].iteration;
    mean_std(xs, row.mean_loss, row.std_loss);
    row.n_mdps = static_cast<int>(reps.size());
    out.push_back(row);
  }
  return out;
}

std::vector<BoundAggRow> aggregate_bounds(const std::vector<ReplicateResult>& reps) {
  std::vector<BoundAggRow> out;
  if (reps.empty()) return out;
  const std::vector<BoundRow>& first = reps[0].bound_rows;
  for (const ReplicateResult& rep : reps) {
    if (rep.bound_rows.size() != first.size()) structure_mismatch("row count");
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (rep.bound_rows[i].k != first[i].k) structure_mismatch("checkpoint layout");
    }
  }
  out.reserve(first.size());
  const std::size_t n = reps.size();
  std::vector<double> ls(n), lm(n);
  for (std::size_t i = 0; i < first.size(); ++i) {
    BoundAggRow row;
    row.k = first[i].k;
    row.n_mdps = static_cast<int>(n);
    row.all_cw_hold = true;
    row.min_cw_slack = reps[0].bound_rows[i].cw_slack_min;
    double sup_rhs = 0.0, l1_rhs = 0.0, env = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const BoundRow& b = reps[r].bound_rows[i];
      ls[r] = b.loss_sup;
      lm[r] = b.loss_l1mu;
      sup_rhs += b.sup_rhs;
      l1_rhs += b.l1_rhs;
      env += b.envelope_rhs;
      row.all_cw_hold = row.all_cw_hold && b.cw_holds;
      row.min_cw_slack = std::min(row.min_cw_slack, b.cw_slack_min);
    }
    mean_std(ls, row.mean_loss_sup, row.std_loss_sup);
    mean_std(lm, row.mean_loss_l1mu, row.std_loss_l1mu);
    row.mean_sup_rhs = sup_rhs / static_cast<double>(n);
    row.mean_l1_rhs = l1_rhs / static_cast<double>(n);
    row.mean_envelope_rhs = env / static_cast<double>(n);
    out.push_back(row);
  }
  return out;
}

std::vector<AssumptionAggRow> aggregate_assumption(
    const std::vector<ReplicateResult>& reps) {
  std::vector<AssumptionAggRow> out;
  if (reps.empty()) return out;
  const std::vector<AssumptionRow>& first = reps[0].assumption_rows;
  for (const ReplicateResult& rep : reps) {
    if (rep.assumption_rows.size() != first.size()) structure_mismatch("row count");
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (rep.assumption_rows[i].l != first[i].l ||
          rep.assumption_rows[i].n != first[i].n) {
        structure_mismatch("(l, N) layout");
      }
    }
  }
  out.reserve(first.size());
  std::vector<double> xs(reps.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    for (std::size_t r = 0; r < reps.size(); ++r) {
      xs[r] = reps[r].assumption_rows[i].epsbar;
    }
    AssumptionAggRow row;
    row.l = first[i].l;
    row.n = first[i].n;
    mean_std(xs, row.mean_epsbar, row.std_epsbar);
    row.n_mdps = static_cast<int>(reps.size());
    out.push_back(row);
  }
  return out;
}

void write_experiment(const ExperimentResult& result) {
  const ExperimentConfig& cfg = result.config;
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir / "per_mdp");

  for (const ReplicateResult& rep : result.replicates) {
    write_per_mdp(dir / "per_mdp" / per_mdp_name(rep.replicate), cfg.kind, rep);
  }
  write_outputs_to(dir, cfg, result.replicates);

  json summary;
  summary["config"] = to_json(cfg);
  summary["version"] = MOVILAB_VERSION;
  summary["wall_seconds"] = result.wall_seconds;
  std::ofstream out(dir / "summary.json");
  if (!out) {
    throw std::runtime_error("cannot write " + (dir / "summary.json").string());
  }
  out << summary.dump(2) << "\n";
}

void emit_outputs(const std::string& run_dir) {
  const fs::path dir = run_dir;
  std::ifstream in(dir / "summary.json");
  if (!in) {
    throw std::runtime_error("cannot open " + (dir / "summary.json").string());
  }
  json summary;
  try {
    in >> summary;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("summary.json: " + std::string(e.what()));
  }
  if (!summary.contains("config")) {
    throw std::runtime_error("summary.json: missing config echo");
  }
  ValidationResult vr = validate_config(summary.at("config"));
  if (!vr.ok()) {
    std::ostringstream os;
    os << "summary.json: invalid config echo:";
    for (const std::string& e : vr.errors) os << "\n  " << e;
    throw std::runtime_error(os.str());
  }
  const ExperimentConfig& cfg = vr.config;

  std::vector<ReplicateResult> reps;
  reps.reserve(static_cast<std::size_t>(cfg.n_mdps));
  for (int i = 0; i < cfg.n_mdps; ++i) {
    reps.push_back(parse_per_mdp(dir / "per_mdp" / per_mdp_name(i), cfg.kind, i));
  }
  write_outputs_to(dir, cfg, reps);
}

}  // namespace movilab
