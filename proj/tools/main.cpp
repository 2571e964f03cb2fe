#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "movilab/config.hpp"
#include "movilab/experiment.hpp"

#ifndef MOVILAB_VERSION
#define MOVILAB_VERSION "unknown"
#endif

namespace {

using movilab::ValidationResult;
using nlohmann::json;

// Scalar config fields that can be overridden from the command line.
// List-valued fields (schemes, checkpoints, assumption.l_values) only come
// from the file.
struct Overrides {
  std::optional<std::string> kind;
  std::optional<double> gamma;
  std::optional<long> iterations;
  std::optional<long> n_mdps;
  std::optional<unsigned long long> master_seed;
  std::optional<std::string> output_dir;
  std::optional<std::string> eval_norm;
  std::optional<double> delta;
  std::optional<long> jobs;
  std::optional<long> ledger_memory_cap_mib;
  std::optional<long> garnet_n_states;
  std::optional<long> garnet_n_actions;
  std::optional<long> garnet_branching;
  std::optional<std::string> beta_variant;
  std::optional<double> beta_value;
  std::optional<long> assumption_j;
  std::optional<long> assumption_n_max;
};

void add_override_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--kind", o.kind,
                  "Experiment kind: convergence, compare, assumption, bounds");
  cmd->add_option("--gamma", o.gamma, "Discount factor, in (0, 1)");
  cmd->add_option("--iterations", o.iterations, "Iterations per scheme run");
  cmd->add_option("--n_mdps", o.n_mdps, "Number of random models");
  cmd->add_option("--master_seed", o.master_seed, "Root seed for the whole run");
  cmd->add_option("--output_dir", o.output_dir, "Where to write run outputs")
      ->envname("MOVILAB_OUTPUT_DIR");
  cmd->add_option("--eval_norm", o.eval_norm, "Loss norm: l1_uniform or sup");
  cmd->add_option("--delta", o.delta, "Failure probability for the envelope");
  cmd->add_option("--jobs", o.jobs, "Worker threads (0 = all cores)");
  cmd->add_option("--ledger_memory_cap_mib", o.ledger_memory_cap_mib,
                  "Refuse noise-ledger runs above this size");
  cmd->add_option("--garnet.n_states", o.garnet_n_states, "States per model");
  cmd->add_option("--garnet.n_actions", o.garnet_n_actions, "Actions per state");
  cmd->add_option("--garnet.branching", o.garnet_branching,
                  "Successor states per state-action pair");
  cmd->add_option("--beta.variant", o.beta_variant,
                  "Momentum weights: empirical_mean or constant");
  cmd->add_option("--beta.value", o.beta_value, "Constant momentum weight");
  cmd->add_option("--assumption.j", o.assumption_j,
                  "Iteration whose noise term is averaged");
  cmd->add_option("--assumption.n_max", o.assumption_n_max,
                  "Replicates per propagation depth");
}

void apply_overrides(json& doc, const Overrides& o) {
  if (o.kind) doc["kind"] = *o.kind;
  if (o.gamma) doc["gamma"] = *o.gamma;
  if (o.iterations) doc["iterations"] = *o.iterations;
  if (o.n_mdps) doc["n_mdps"] = *o.n_mdps;
  if (o.master_seed) doc["master_seed"] = *o.master_seed;
  if (o.output_dir) doc["output_dir"] = *o.output_dir;
  if (o.eval_norm) doc["eval_norm"] = *o.eval_norm;
  if (o.delta) doc["delta"] = *o.delta;
  if (o.jobs) doc["jobs"] = *o.jobs;
  if (o.ledger_memory_cap_mib) doc["ledger_memory_cap_mib"] = *o.ledger_memory_cap_mib;
  if (o.garnet_n_states) doc["garnet"]["n_states"] = *o.garnet_n_states;
  if (o.garnet_n_actions) doc["garnet"]["n_actions"] = *o.garnet_n_actions;
  if (o.garnet_branching) doc["garnet"]["branching"] = *o.garnet_branching;
  if (o.beta_variant) doc["beta"]["variant"] = *o.beta_variant;
  if (o.beta_value) doc["beta"]["value"] = *o.beta_value;
  if (o.assumption_j) doc["assumption"]["j"] = *o.assumption_j;
  if (o.assumption_n_max) doc["assumption"]["n_max"] = *o.assumption_n_max;
}

ValidationResult load_merged(const std::string& path, const Overrides& o) {
  std::ifstream in(path);
  if (!in) {
    ValidationResult res;
    res.errors.push_back("config file: cannot open " + path);
    return res;
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    ValidationResult res;
    res.errors.push_back(std::string("config file: JSON parse error: ") + e.what());
    return res;
  }
  try {
    apply_overrides(doc, o);
  } catch (const json::exception& e) {
    ValidationResult res;
    res.errors.push_back(std::string("overrides: ") + e.what());
    return res;
  }
  return movilab::validate_config(doc);
}

int report_errors(const ValidationResult& vr) {
  std::fprintf(stderr, "config invalid, %zu problem%s:\n", vr.errors.size(),
               vr.errors.size() == 1 ? "" : "s");
  for (const std::string& e : vr.errors) {
    std::fprintf(stderr, "  - %s\n", e.c_str());
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular value-iteration laboratory"};
  app.set_version_flag("--version", MOVILAB_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  std::string run_dir;
  Overrides overrides;

  CLI::App* run_cmd =
      app.add_subcommand("run", "Run an experiment and write its outputs");
  run_cmd->add_option("config", config_path, "JSON config file")->required();
  add_override_options(run_cmd, overrides);

  CLI::App* validate_cmd = app.add_subcommand(
      "validate", "Check a config and print its fully materialized form");
  validate_cmd->add_option("config", config_path, "JSON config file")->required();
  add_override_options(validate_cmd, overrides);

  CLI::App* emit_cmd = app.add_subcommand(
      "emit", "Recompute aggregate and figure files from a finished run");
  emit_cmd->add_option("run_dir", run_dir, "Run output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (validate_cmd->parsed() || run_cmd->parsed()) {
      ValidationResult vr = load_merged(config_path, overrides);
      if (!vr.ok()) return report_errors(vr);
      if (validate_cmd->parsed()) {
        std::printf("%s\n", movilab::to_json(vr.config).dump(2).c_str());
        return 0;
      }
      movilab::ExperimentResult result = movilab::run_experiment(vr.config);
      movilab::write_experiment(result);
      std::printf("wrote %s: kind=%s n_mdps=%d wall=%.2fs\n",
                  vr.config.output_dir.c_str(), kind_name(vr.config.kind),
                  vr.config.n_mdps, result.wall_seconds);
      return 0;
    }
    movilab::emit_outputs(run_dir);
    std::printf("recomputed aggregate and figure files in %s\n", run_dir.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
