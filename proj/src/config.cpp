#include "movilab/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace movilab {

namespace {

using nlohmann::json;

void fail(std::vector<std::string>& errors, const std::string& msg) {
  errors.push_back(msg);
}

bool is_integral_number(const json& v) {
  return v.is_number_integer() || v.is_number_unsigned();
}

// Fetches doc[key] as a bounded integer, recording an error on type or range
// problems. Returns true when `out` was set.
bool take_int(const json& doc, const char* key, long lo, long hi, long& out,
              std::vector<std::string>& errors) {
  if (!doc.contains(key)) return false;
  const json& v = doc.at(key);
  if (!is_integral_number(v)) {
    fail(errors, std::string(key) + ": expected an integer");
    return false;
  }
  double asd = v.get<double>();
  if (asd < static_cast<double>(lo) || asd > static_cast<double>(hi)) {
    std::ostringstream os;
    os << key << ": " << asd << " is outside [" << lo << ", " << hi << "]";
    fail(errors, os.str());
    return false;
  }
  out = v.get<long>();
  return true;
}

bool take_double(const json& doc, const char* key, double& out,
                 std::vector<std::string>& errors) {
  if (!doc.contains(key)) return false;
  const json& v = doc.at(key);
  if (!v.is_number()) {
    fail(errors, std::string(key) + ": expected a number");
    return false;
  }
  out = v.get<double>();
  return true;
}

bool take_string(const json& doc, const char* key, std::string& out,
                 std::vector<std::string>& errors) {
  if (!doc.contains(key)) return false;
  const json& v = doc.at(key);
  if (!v.is_string()) {
    fail(errors, std::string(key) + ": expected a string");
    return false;
  }
  out = v.get<std::string>();
  return true;
}

void check_known_keys(const json& doc, const char* scope,
                      const std::set<std::string>& known,
                      std::vector<std::string>& errors) {
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (known.count(it.key()) == 0) {
      fail(errors, std::string(scope) + ": unknown key \"" + it.key() + "\"");
    }
  }
}

std::vector<SchemeId> default_schemes(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::convergence:
      return {SchemeId::avi, SchemeId::movi};
    case ExperimentKind::compare:
      return {SchemeId::avi, SchemeId::movi, SchemeId::sql, SchemeId::dpp};
    case ExperimentKind::assumption:
    case ExperimentKind::bounds:
      return {SchemeId::movi};
  }
  return {SchemeId::movi};
}

// Powers of ten up to `limit`, the stock checkpoint grid.
std::vector<long> default_checkpoints(long limit) {
  std::vector<long> out;
  for (long c = 1; c <= limit && c <= 1000000000L; c *= 10) out.push_back(c);
  if (out.empty() && limit >= 1) out.push_back(1);
  return out;
}

}  // namespace

const char* kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::convergence: return "convergence";
    case ExperimentKind::compare: return "compare";
    case ExperimentKind::assumption: return "assumption";
    case ExperimentKind::bounds: return "bounds";
  }
  return "?";
}

ExperimentKind parse_kind(const std::string& name) {
  if (name == "convergence") return ExperimentKind::convergence;
  if (name == "compare") return ExperimentKind::compare;
  if (name == "assumption") return ExperimentKind::assumption;
  if (name == "bounds") return ExperimentKind::bounds;
  throw std::invalid_argument("unknown experiment kind: " + name);
}

const char* eval_norm_name(EvalNorm n) {
  return n == EvalNorm::l1_uniform ? "l1_uniform" : "sup";
}

EvalNorm parse_eval_norm(const std::string& name) {
  if (name == "l1_uniform") return EvalNorm::l1_uniform;
  if (name == "sup") return EvalNorm::sup;
  throw std::invalid_argument("unknown eval norm: " + name);
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["kind"] = kind_name(cfg.kind);
  doc["garnet"] = {{"n_states", cfg.garnet.n_states},
                   {"n_actions", cfg.garnet.n_actions},
                   {"branching", cfg.garnet.branching}};
  doc["gamma"] = cfg.gamma;
  json schemes = json::array();
  for (SchemeId s : cfg.schemes) schemes.push_back(scheme_name(s));
  doc["schemes"] = schemes;
  doc["iterations"] = cfg.iterations;
  doc["n_mdps"] = cfg.n_mdps;
  if (cfg.beta.kind == BetaSchedule::Kind::empirical_mean) {
    doc["beta"] = {{"variant", "empirical_mean"}};
  } else {
    doc["beta"] = {{"variant", "constant"}, {"value", cfg.beta.value}};
  }
  doc["checkpoints"] = cfg.checkpoints;
  doc["master_seed"] = cfg.master_seed;
  doc["output_dir"] = cfg.output_dir;
  doc["eval_norm"] = eval_norm_name(cfg.eval_norm);
  doc["assumption"] = {{"j", cfg.assumption.j},
                       {"l_values", cfg.assumption.l_values},
                       {"n_max", cfg.assumption.n_max}};
  doc["delta"] = cfg.delta;
  doc["ledger_memory_cap_mib"] = cfg.ledger_memory_cap_mib;
  doc["jobs"] = cfg.jobs;
  return doc;
}

ValidationResult validate_config(const nlohmann::json& doc) {
  ValidationResult res;
  std::vector<std::string>& errors = res.errors;
  ExperimentConfig& cfg = res.config;

  if (!doc.is_object()) {
    fail(errors, "config root: expected a JSON object");
    return res;
  }

  check_known_keys(doc, "config",
                   {"kind", "garnet", "gamma", "schemes", "iterations", "n_mdps",
                    "beta", "checkpoints", "master_seed", "output_dir",
                    "eval_norm", "assumption", "delta", "ledger_memory_cap_mib",
                    "jobs"},
                   errors);

  // kind -- required, and several defaults hang off it.
  bool kind_known = false;
  if (!doc.contains("kind")) {
    fail(errors, "kind: required field is missing "
                 "(one of convergence, compare, assumption, bounds)");
  } else {
    std::string name;
    if (take_string(doc, "kind", name, errors)) {
      try {
        cfg.kind = parse_kind(name);
        kind_known = true;
      } catch (const std::invalid_argument&) {
        fail(errors, "kind: \"" + name +
                     "\" is not one of convergence, compare, assumption, bounds");
      }
    }
  }

  // master_seed -- required, unsigned 64-bit.
  if (!doc.contains("master_seed")) {
    fail(errors, "master_seed: required field is missing");
  } else {
    const json& v = doc.at("master_seed");
    if (!is_integral_number(v)) {
      fail(errors, "master_seed: expected a non-negative integer");
    } else if (v.is_number_integer() && !v.is_number_unsigned() &&
               v.get<long long>() < 0) {
      fail(errors, "master_seed: must be non-negative");
    } else {
      cfg.master_seed = v.get<std::uint64_t>();
    }
  }

  // garnet block.
  if (doc.contains("garnet")) {
    const json& g = doc.at("garnet");
    if (!g.is_object()) {
      fail(errors, "garnet: expected an object");
    } else {
      check_known_keys(g, "garnet", {"n_states", "n_actions", "branching"},
                       errors);
      long v = 0;
      if (take_int(g, "n_states", 1, 1000000, v, errors))
        cfg.garnet.n_states = static_cast<int>(v);
      if (take_int(g, "n_actions", 1, 1000000, v, errors))
        cfg.garnet.n_actions = static_cast<int>(v);
      if (take_int(g, "branching", 1, 1000000, v, errors))
        cfg.garnet.branching = static_cast<int>(v);
    }
  }
  if (cfg.garnet.branching > cfg.garnet.n_states) {
    std::ostringstream os;
    os << "garnet.branching: " << cfg.garnet.branching
       << " exceeds garnet.n_states = " << cfg.garnet.n_states;
    fail(errors, os.str());
  }

  if (take_double(doc, "gamma", cfg.gamma, errors)) {
    // range checked below
  }
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) {
    std::ostringstream os;
    os << "gamma: " << cfg.gamma << " must lie strictly inside (0, 1)";
    fail(errors, os.str());
  }

  // schemes -- defaulted per kind when absent.
  if (doc.contains("schemes")) {
    const json& arr = doc.at("schemes");
    if (!arr.is_array() || arr.empty()) {
      fail(errors, "schemes: expected a non-empty array of scheme names");
    } else {
      cfg.schemes.clear();
      for (const json& e : arr) {
        if (!e.is_string()) {
          fail(errors, "schemes: entries must be strings");
          continue;
        }
        SchemeId id;
        if (!parse_scheme(e.get<std::string>(), id)) {
          fail(errors, "schemes: \"" + e.get<std::string>() +
                       "\" is not one of avi, movi, sql, dpp");
        } else if (std::find(cfg.schemes.begin(), cfg.schemes.end(), id) !=
                   cfg.schemes.end()) {
          fail(errors, "schemes: duplicate entry \"" + e.get<std::string>() + "\"");
        } else {
          cfg.schemes.push_back(id);
        }
      }
      if (cfg.schemes.empty())
        fail(errors, "schemes: no valid scheme names given");
    }
  } else {
    cfg.schemes = default_schemes(cfg.kind);
  }

  // iterations -- kind-dependent default.
  if (kind_known && cfg.kind == ExperimentKind::bounds) cfg.iterations = 500;
  {
    long v = 0;
    if (take_int(doc, "iterations", 1, 1000000000L, v, errors))
      cfg.iterations = v;
  }

  {
    long v = 0;
    if (take_int(doc, "n_mdps", 1, 1000000, v, errors))
      cfg.n_mdps = static_cast<int>(v);
  }

  // beta block.
  if (doc.contains("beta")) {
    const json& b = doc.at("beta");
    if (!b.is_object()) {
      fail(errors, "beta: expected an object");
    } else {
      check_known_keys(b, "beta", {"variant", "value"}, errors);
      std::string variant;
      if (!take_string(b, "variant", variant, errors) && !b.contains("variant")) {
        fail(errors, "beta.variant: required inside beta "
                     "(empirical_mean or constant)");
      } else if (variant == "empirical_mean") {
        if (b.contains("value"))
          fail(errors, "beta.value: only meaningful for variant constant");
        cfg.beta = BetaSchedule::empirical_mean();
      } else if (variant == "constant") {
        double value = -1.0;
        if (!take_double(b, "value", value, errors) && !b.contains("value")) {
          fail(errors, "beta.value: required for variant constant");
        } else if (!(value >= 0.0 && value < 1.0)) {
          std::ostringstream os;
          os << "beta.value: " << value << " must lie in [0, 1)";
          fail(errors, os.str());
        } else {
          cfg.beta = BetaSchedule::constant(value);
        }
      } else if (!variant.empty()) {
        fail(errors, "beta.variant: \"" + variant +
                     "\" is not one of empirical_mean, constant");
      }
    }
  }

  // Checkpoints for a bounds run need one further iterate beyond the
  // checkpoint, so the grid tops out one earlier.
  const long checkpoint_limit =
      (kind_known && cfg.kind == ExperimentKind::bounds) ? cfg.iterations - 1
                                                         : cfg.iterations;
  if (doc.contains("checkpoints")) {
    const json& arr = doc.at("checkpoints");
    if (!arr.is_array() || arr.empty()) {
      fail(errors, "checkpoints: expected a non-empty array of iteration indices");
    } else {
      cfg.checkpoints.clear();
      bool shape_ok = true;
      for (const json& e : arr) {
        if (!is_integral_number(e)) {
          fail(errors, "checkpoints: entries must be integers");
          shape_ok = false;
          break;
        }
        cfg.checkpoints.push_back(e.get<long>());
      }
      if (shape_ok) {
        for (std::size_t i = 0; i < cfg.checkpoints.size(); ++i) {
          if (cfg.checkpoints[i] < 1 || cfg.checkpoints[i] > checkpoint_limit) {
            std::ostringstream os;
            os << "checkpoints: entry " << cfg.checkpoints[i]
               << " is outside [1, " << checkpoint_limit << "]";
            if (kind_known && cfg.kind == ExperimentKind::bounds)
              os << " (bounds runs evaluate one iterate past each checkpoint)";
            fail(errors, os.str());
            break;
          }
          if (i > 0 && cfg.checkpoints[i] <= cfg.checkpoints[i - 1]) {
            fail(errors, "checkpoints: entries must be strictly increasing");
            break;
          }
        }
      }
    }
  } else {
    cfg.checkpoints = default_checkpoints(checkpoint_limit);
  }

  if (take_string(doc, "output_dir", cfg.output_dir, errors)) {
    if (cfg.output_dir.empty())
      fail(errors, "output_dir: must not be empty");
  }

  if (doc.contains("eval_norm")) {
    std::string name;
    if (take_string(doc, "eval_norm", name, errors)) {
      try {
        cfg.eval_norm = parse_eval_norm(name);
      } catch (const std::invalid_argument&) {
        fail(errors, "eval_norm: \"" + name + "\" is not one of l1_uniform, sup");
      }
    }
  }

  // assumption block -- only consulted for assumption runs but validated
  // whenever present.
  if (doc.contains("assumption")) {
    const json& a = doc.at("assumption");
    if (!a.is_object()) {
      fail(errors, "assumption: expected an object");
    } else {
      check_known_keys(a, "assumption", {"j", "l_values", "n_max"}, errors);
      long v = 0;
      if (take_int(a, "j", 1, 1000000, v, errors))
        cfg.assumption.j = static_cast<int>(v);
      if (take_int(a, "n_max", 1, 1000000, v, errors))
        cfg.assumption.n_max = static_cast<int>(v);
      if (a.contains("l_values")) {
        const json& arr = a.at("l_values");
        if (!arr.is_array() || arr.empty()) {
          fail(errors, "assumption.l_values: expected a non-empty array");
        } else {
          cfg.assumption.l_values.clear();
          for (const json& e : arr) {
            if (!is_integral_number(e) || e.get<long>() < 0) {
              fail(errors,
                   "assumption.l_values: entries must be non-negative integers");
              break;
            }
            cfg.assumption.l_values.push_back(static_cast<int>(e.get<long>()));
          }
          for (std::size_t i = 1; i < cfg.assumption.l_values.size(); ++i) {
            if (cfg.assumption.l_values[i] <= cfg.assumption.l_values[i - 1]) {
              fail(errors,
                   "assumption.l_values: entries must be strictly increasing");
              break;
            }
          }
        }
      }
    }
  }

  if (take_double(doc, "delta", cfg.delta, errors)) {
    // range checked below
  }
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) {
    std::ostringstream os;
    os << "delta: " << cfg.delta << " must lie strictly inside (0, 1)";
    fail(errors, os.str());
  }

  {
    long v = 0;
    if (take_int(doc, "ledger_memory_cap_mib", 1, 1048576, v, errors))
      cfg.ledger_memory_cap_mib = static_cast<std::size_t>(v);
  }
  {
    long v = 0;
    if (take_int(doc, "jobs", 0, 4096, v, errors))
      cfg.jobs = static_cast<int>(v);
  }

  // Cross-field checks that only make sense once the pieces parsed.
  if (kind_known && cfg.kind == ExperimentKind::bounds) {
    // The distribution-mismatch coefficient is enumerated exactly; refuse
    // models where the policy count explodes.
    double n_policies = std::pow(static_cast<double>(cfg.garnet.n_actions),
                                 static_cast<double>(cfg.garnet.n_states));
    if (!(n_policies <= 1e6)) {
      std::ostringstream os;
      os << "garnet: bounds runs enumerate all deterministic policies; "
         << cfg.garnet.n_actions << "^" << cfg.garnet.n_states
         << " exceeds the 1e6 enumeration limit";
      fail(errors, os.str());
    }
    if (!doc.contains("schemes")) {
      // default already movi-only
    } else {
      for (SchemeId s : cfg.schemes) {
        if (s != SchemeId::movi) {
          fail(errors,
               "schemes: bounds runs track the momentum scheme only (movi)");
          break;
        }
      }
    }
  }

  return res;
}

ValidationResult load_config_file(const std::string& path) {
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
  return validate_config(doc);
}

}  // namespace movilab
