#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "movilab/schemes.hpp"

namespace movilab {

// What an experiment measures.
//   convergence : loss curves for a small scheme set on random models
//   compare     : loss curves for all schemes side by side
//   assumption  : averaged-noise decay diagnostics for movi
//   bounds      : per-iteration bound evaluation on ledgered movi runs
enum class ExperimentKind { convergence, compare, assumption, bounds };

const char* kind_name(ExperimentKind k);
ExperimentKind parse_kind(const std::string& name);  // throws std::invalid_argument

enum class EvalNorm { l1_uniform, sup };

const char* eval_norm_name(EvalNorm n);
EvalNorm parse_eval_norm(const std::string& name);  // throws std::invalid_argument

struct GarnetConfig {
  int n_states = 30;
  int n_actions = 4;
  int branching = 4;
};

struct AssumptionConfig {
  int j = 50;                          // iteration whose noise term is averaged
  std::vector<int> l_values{0, 1, 2, 5};  // forward propagation depths
  int n_max = 200;                     // replicates per depth
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::convergence;
  GarnetConfig garnet;
  double gamma = 0.9;
  std::vector<SchemeId> schemes;       // defaulted per kind when absent
  long iterations = 10000;
  int n_mdps = 100;
  BetaSchedule beta;                   // empirical mean unless configured
  std::vector<long> checkpoints;       // strictly increasing, defaulted per kind
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";
  EvalNorm eval_norm = EvalNorm::l1_uniform;
  AssumptionConfig assumption;
  double delta = 0.05;                 // failure probability for the envelope curve
  std::size_t ledger_memory_cap_mib = 2048;
  int jobs = 0;                        // 0 = hardware concurrency
};

// Full materialization of the config, defaults included. validate_config on the
// result reproduces the config exactly.
nlohmann::json to_json(const ExperimentConfig& cfg);

struct ValidationResult {
  ExperimentConfig config;          // meaningful only when ok()
  std::vector<std::string> errors;  // every problem found, not just the first
  bool ok() const { return errors.empty(); }
};

// Checks the whole document and collects every error. Unknown keys are
// reported so typos cannot silently fall back to defaults.
ValidationResult validate_config(const nlohmann::json& doc);

// Reads and parses `path`, then validates. I/O and JSON syntax problems come
// back as validation errors rather than exceptions.
ValidationResult load_config_file(const std::string& path);

}  // namespace movilab
