#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "qanneal/control.hpp"
#include "qanneal/errors.hpp"
#include "qanneal/io.hpp"
#include "qanneal/operators.hpp"
#include "qanneal/robustness.hpp"
#include "qanneal/rng.hpp"

namespace qanneal {

// Where the problem couplings come from.  "random" draws J from the seed,
// "file" reads a CSV matrix, "explicit" takes the matrix from the config
// itself.  Resolution always fills `couplings`, so the resolved config that
// is embedded in every output records the exact model that ran.
struct ModelConfig {
  std::string type = "random";  // random | file | explicit
  int n_qubits = 4;
  std::uint64_t seed = 0;  // random only; 0 means derive from the master seed
  std::string path;        // file only
  std::optional<Eigen::MatrixXd> couplings;
};

struct RobustnessConfig {
  double zeta_spectral = 0.2;
  double zeta_frobenius = 0.1;
  bool phase_reduced = false;
};

struct SweepConfig {
  int n_models = 10;
  int n_qubits = 4;
  int max_iters = 1500;
  int n_random_starts = 3;
  std::vector<std::string> approaches = {"nominal", "spectral", "frobenius"};
};

struct PmpCheckConfig {
  std::string protocol_path;        // path to a protocol.csv
  std::optional<Eigen::VectorXd> u; // or an inline control vector
};

struct RunConfig {
  ModelConfig model;
  double horizon = 10.0;
  int n_steps = 200;
  CostSpec cost;
  OptimizeOptions optimizer;
  int qaoa_bangs = 8;
  int ensemble_signals = 20;
  int ensemble_sections = 20;
  Eigen::VectorXd eps_levels;  // default: 21 points linear on [0, 0.2]
  RobustnessConfig robustness;
  SweepConfig sweep;
  PmpCheckConfig pmp_check;
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  TimeGrid grid() const { return TimeGrid(horizon, n_steps); }
};

inline Eigen::VectorXd default_eps_levels() {
  return Eigen::VectorXd::LinSpaced(21, 0.0, 0.2);
}

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

inline double get_number(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + " must be a number");
  return j.get<double>();
}

inline int get_int(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + " must be an integer");
  return j.get<int>();
}

inline std::uint64_t get_u64(const nlohmann::json& j,
                             const std::string& where) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    const long long value = j.get<long long>();
    if (value >= 0) return static_cast<std::uint64_t>(value);
  }
  throw ConfigError(where + " must be a non-negative integer");
}

inline bool get_bool(const nlohmann::json& j, const std::string& where) {
  if (!j.is_boolean()) throw ConfigError(where + " must be a boolean");
  return j.get<bool>();
}

inline std::string get_string(const nlohmann::json& j,
                              const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + " must be a string");
  return j.get<std::string>();
}

inline Eigen::VectorXd get_vector(const nlohmann::json& j,
                                  const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + " must be an array of numbers");
  Eigen::VectorXd values(j.size());
  Eigen::Index i = 0;
  for (const auto& entry : j) {
    values(i++) = get_number(entry, where + " entry");
  }
  return values;
}

inline Eigen::MatrixXd get_matrix(const nlohmann::json& j,
                                  const std::string& where) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError(where + " must be a non-empty array of rows");
  }
  const std::size_t n_rows = j.size();
  std::size_t n_cols = 0;
  Eigen::MatrixXd matrix;
  std::size_t r = 0;
  for (const auto& row : j) {
    if (!row.is_array()) throw ConfigError(where + " rows must be arrays");
    if (r == 0) {
      n_cols = row.size();
      matrix.resize(static_cast<Eigen::Index>(n_rows),
                    static_cast<Eigen::Index>(n_cols));
    } else if (row.size() != n_cols) {
      throw ConfigError(where + " rows must all have the same length");
    }
    std::size_t c = 0;
    for (const auto& entry : row) {
      matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c++)) =
          get_number(entry, where + " entry");
    }
    ++r;
  }
  return matrix;
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json values = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) values.push_back(v(i));
  return values;
}

inline NormKind parse_norm_kind(const nlohmann::json& j,
                                const std::string& where) {
  check_keys(j, where, {"norm", "zeta", "phase_reduced"});
  // caller extracts zeta; this helper only reads the norm fields.
  NormKind kind = NormKind::spectral();
  if (j.contains("norm")) {
    const std::string name = get_string(j.at("norm"), where + ".norm");
    if (name == "spectral") {
      kind.family = NormKind::Family::Spectral;
    } else if (name == "frobenius") {
      kind.family = NormKind::Family::Frobenius;
    } else {
      throw ConfigError(where + ".norm must be 'spectral' or 'frobenius'");
    }
  }
  if (j.contains("phase_reduced")) {
    kind.phase_reduced = get_bool(j.at("phase_reduced"), where + ".phase_reduced");
  }
  return kind;
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using detail::check_keys;
  check_keys(j, "config",
             {"model", "horizon", "n_steps", "cost", "optimizer", "qaoa",
              "ensemble", "eps_levels", "robustness", "sweep", "pmp_check",
              "seed", "out_dir"});
  RunConfig config;
  config.eps_levels = default_eps_levels();

  if (j.contains("model")) {
    const nlohmann::json& m = j.at("model");
    check_keys(m, "model", {"type", "n_qubits", "seed", "path", "couplings"});
    if (m.contains("type")) {
      config.model.type = detail::get_string(m.at("type"), "model.type");
      if (config.model.type != "random" && config.model.type != "file" &&
          config.model.type != "explicit") {
        throw ConfigError("model.type must be 'random', 'file' or 'explicit'");
      }
    }
    if (m.contains("n_qubits")) {
      config.model.n_qubits = detail::get_int(m.at("n_qubits"), "model.n_qubits");
    }
    if (m.contains("seed")) {
      config.model.seed = detail::get_u64(m.at("seed"), "model.seed");
    }
    if (m.contains("path")) {
      config.model.path = detail::get_string(m.at("path"), "model.path");
    }
    if (m.contains("couplings")) {
      config.model.couplings =
          detail::get_matrix(m.at("couplings"), "model.couplings");
    }
    if (config.model.type == "file" && config.model.path.empty()) {
      throw ConfigError("model.type 'file' requires model.path");
    }
    if (config.model.type == "explicit" && !config.model.couplings) {
      throw ConfigError("model.type 'explicit' requires model.couplings");
    }
  }

  if (j.contains("horizon")) {
    config.horizon = detail::get_number(j.at("horizon"), "horizon");
    if (!(config.horizon > 0.0)) throw ConfigError("horizon must be > 0");
  }
  if (j.contains("n_steps")) {
    config.n_steps = detail::get_int(j.at("n_steps"), "n_steps");
    if (config.n_steps < 1) throw ConfigError("n_steps must be >= 1");
  }

  if (j.contains("cost")) {
    const nlohmann::json& c = j.at("cost");
    config.cost.norm = detail::parse_norm_kind(c, "cost");
    if (c.contains("zeta")) {
      config.cost.zeta = detail::get_number(c.at("zeta"), "cost.zeta");
      if (!(config.cost.zeta >= 0.0)) throw ConfigError("cost.zeta must be >= 0");
    }
  }

  if (j.contains("optimizer")) {
    const nlohmann::json& o = j.at("optimizer");
    check_keys(o, "optimizer",
               {"max_iters", "tol", "n_random_starts", "include_ramp", "alpha0"});
    if (o.contains("max_iters")) {
      config.optimizer.max_iters = detail::get_int(o.at("max_iters"), "optimizer.max_iters");
      if (config.optimizer.max_iters < 1) {
        throw ConfigError("optimizer.max_iters must be >= 1");
      }
    }
    if (o.contains("tol")) {
      config.optimizer.tol = detail::get_number(o.at("tol"), "optimizer.tol");
      if (!(config.optimizer.tol > 0.0)) throw ConfigError("optimizer.tol must be > 0");
    }
    if (o.contains("n_random_starts")) {
      config.optimizer.n_random_starts =
          detail::get_int(o.at("n_random_starts"), "optimizer.n_random_starts");
      if (config.optimizer.n_random_starts < 0) {
        throw ConfigError("optimizer.n_random_starts must be >= 0");
      }
    }
    if (o.contains("include_ramp")) {
      config.optimizer.include_ramp =
          detail::get_bool(o.at("include_ramp"), "optimizer.include_ramp");
    }
    if (o.contains("alpha0")) {
      config.optimizer.alpha0 = detail::get_number(o.at("alpha0"), "optimizer.alpha0");
      if (!(config.optimizer.alpha0 > 0.0)) {
        throw ConfigError("optimizer.alpha0 must be > 0");
      }
    }
  }

  if (j.contains("qaoa")) {
    const nlohmann::json& q = j.at("qaoa");
    check_keys(q, "qaoa", {"n_bangs"});
    if (q.contains("n_bangs")) {
      config.qaoa_bangs = detail::get_int(q.at("n_bangs"), "qaoa.n_bangs");
      if (config.qaoa_bangs < 2) throw ConfigError("qaoa.n_bangs must be >= 2");
    }
  }

  if (j.contains("ensemble")) {
    const nlohmann::json& e = j.at("ensemble");
    check_keys(e, "ensemble", {"n_signals", "n_sections"});
    if (e.contains("n_signals")) {
      config.ensemble_signals = detail::get_int(e.at("n_signals"), "ensemble.n_signals");
      if (config.ensemble_signals < 1) {
        throw ConfigError("ensemble.n_signals must be >= 1");
      }
    }
    if (e.contains("n_sections")) {
      config.ensemble_sections = detail::get_int(e.at("n_sections"), "ensemble.n_sections");
      if (config.ensemble_sections < 1) {
        throw ConfigError("ensemble.n_sections must be >= 1");
      }
    }
  }

  if (j.contains("eps_levels")) {
    config.eps_levels = detail::get_vector(j.at("eps_levels"), "eps_levels");
    if (config.eps_levels.size() < 1) {
      throw ConfigError("eps_levels must be nonempty");
    }
    for (Eigen::Index i = 0; i < config.eps_levels.size(); ++i) {
      if (!(config.eps_levels(i) >= 0.0)) {
        throw ConfigError("eps_levels entries must be >= 0");
      }
    }
  }

  if (j.contains("robustness")) {
    const nlohmann::json& r = j.at("robustness");
    check_keys(r, "robustness",
               {"zeta_spectral", "zeta_frobenius", "phase_reduced"});
    if (r.contains("zeta_spectral")) {
      config.robustness.zeta_spectral =
          detail::get_number(r.at("zeta_spectral"), "robustness.zeta_spectral");
      if (!(config.robustness.zeta_spectral >= 0.0)) {
        throw ConfigError("robustness.zeta_spectral must be >= 0");
      }
    }
    if (r.contains("zeta_frobenius")) {
      config.robustness.zeta_frobenius =
          detail::get_number(r.at("zeta_frobenius"), "robustness.zeta_frobenius");
      if (!(config.robustness.zeta_frobenius >= 0.0)) {
        throw ConfigError("robustness.zeta_frobenius must be >= 0");
      }
    }
    if (r.contains("phase_reduced")) {
      config.robustness.phase_reduced =
          detail::get_bool(r.at("phase_reduced"), "robustness.phase_reduced");
    }
  }

  if (j.contains("sweep")) {
    const nlohmann::json& s = j.at("sweep");
    check_keys(s, "sweep",
               {"n_models", "n_qubits", "max_iters", "n_random_starts",
                "approaches"});
    if (s.contains("n_models")) {
      config.sweep.n_models = detail::get_int(s.at("n_models"), "sweep.n_models");
      if (config.sweep.n_models < 1) throw ConfigError("sweep.n_models must be >= 1");
    }
    if (s.contains("n_qubits")) {
      config.sweep.n_qubits = detail::get_int(s.at("n_qubits"), "sweep.n_qubits");
    }
    if (s.contains("max_iters")) {
      config.sweep.max_iters = detail::get_int(s.at("max_iters"), "sweep.max_iters");
      if (config.sweep.max_iters < 1) throw ConfigError("sweep.max_iters must be >= 1");
    }
    if (s.contains("n_random_starts")) {
      config.sweep.n_random_starts =
          detail::get_int(s.at("n_random_starts"), "sweep.n_random_starts");
      if (config.sweep.n_random_starts < 0) {
        throw ConfigError("sweep.n_random_starts must be >= 0");
      }
    }
    if (s.contains("approaches")) {
      const nlohmann::json& a = s.at("approaches");
      if (!a.is_array() || a.empty()) {
        throw ConfigError("sweep.approaches must be a non-empty array");
      }
      config.sweep.approaches.clear();
      for (const auto& entry : a) {
        const std::string name = detail::get_string(entry, "sweep.approaches entry");
        if (name != "nominal" && name != "qaoa" && name != "spectral" &&
            name != "frobenius") {
          throw ConfigError("sweep.approaches entries must be one of "
                            "'nominal', 'qaoa', 'spectral', 'frobenius'");
        }
        config.sweep.approaches.push_back(name);
      }
    }
  }

  if (j.contains("pmp_check")) {
    const nlohmann::json& p = j.at("pmp_check");
    check_keys(p, "pmp_check", {"protocol", "u"});
    if (p.contains("protocol")) {
      config.pmp_check.protocol_path =
          detail::get_string(p.at("protocol"), "pmp_check.protocol");
    }
    if (p.contains("u")) {
      config.pmp_check.u = detail::get_vector(p.at("u"), "pmp_check.u");
    }
  }

  if (j.contains("seed")) {
    config.seed = detail::get_u64(j.at("seed"), "seed");
  }
  if (j.contains("out_dir")) {
    config.out_dir = detail::get_string(j.at("out_dir"), "out_dir");
  }
  return config;
}

inline std::string norm_kind_name(const NormKind& kind) {
  return kind.family == NormKind::Family::Spectral ? "spectral" : "frobenius";
}

// Emits every field with its resolved value; parse_run_config(run_config_to_json(c))
// reproduces c, and the result is what gets embedded in output artifacts.
inline nlohmann::json run_config_to_json(const RunConfig& config) {
  nlohmann::json j;
  nlohmann::json model;
  model["type"] = config.model.type;
  model["n_qubits"] = config.model.n_qubits;
  model["seed"] = config.model.seed;
  if (!config.model.path.empty()) model["path"] = config.model.path;
  if (config.model.couplings) {
    model["couplings"] = detail::matrix_to_json(*config.model.couplings);
  }
  j["model"] = std::move(model);
  j["horizon"] = config.horizon;
  j["n_steps"] = config.n_steps;
  j["cost"] = {{"zeta", config.cost.zeta},
               {"norm", norm_kind_name(config.cost.norm)},
               {"phase_reduced", config.cost.norm.phase_reduced}};
  j["optimizer"] = {{"max_iters", config.optimizer.max_iters},
                    {"tol", config.optimizer.tol},
                    {"n_random_starts", config.optimizer.n_random_starts},
                    {"include_ramp", config.optimizer.include_ramp},
                    {"alpha0", config.optimizer.alpha0}};
  j["qaoa"] = {{"n_bangs", config.qaoa_bangs}};
  j["ensemble"] = {{"n_signals", config.ensemble_signals},
                   {"n_sections", config.ensemble_sections}};
  j["eps_levels"] = detail::vector_to_json(config.eps_levels);
  j["robustness"] = {{"zeta_spectral", config.robustness.zeta_spectral},
                     {"zeta_frobenius", config.robustness.zeta_frobenius},
                     {"phase_reduced", config.robustness.phase_reduced}};
  nlohmann::json sweep;
  sweep["n_models"] = config.sweep.n_models;
  sweep["n_qubits"] = config.sweep.n_qubits;
  sweep["max_iters"] = config.sweep.max_iters;
  sweep["n_random_starts"] = config.sweep.n_random_starts;
  sweep["approaches"] = config.sweep.approaches;
  j["sweep"] = std::move(sweep);
  nlohmann::json pmp_check = nlohmann::json::object();
  if (!config.pmp_check.protocol_path.empty()) {
    pmp_check["protocol"] = config.pmp_check.protocol_path;
  }
  if (config.pmp_check.u) {
    pmp_check["u"] = detail::vector_to_json(*config.pmp_check.u);
  }
  j["pmp_check"] = std::move(pmp_check);
  j["seed"] = config.seed;
  j["out_dir"] = config.out_dir;
  return j;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(parse_json(read_text_file(path), path.string()));
}

// Materializes the coupling matrix (drawing it, reading it, or taking it
// verbatim) and writes it back into the returned config, so downstream
// artifacts embed the exact model.
struct ResolvedRun {
  RunConfig config;
  IsingModel model;
  HamiltonianPair ham;
};

inline ResolvedRun resolve_run(const RunConfig& input) {
  RunConfig config = input;
  IsingModel model;
  if (config.model.type == "random") {
    if (config.model.seed == 0) {
      config.model.seed = fork_seed(config.seed, 0x3D0DE1ULL);
    }
    model = random_ising_model(config.model.n_qubits, config.model.seed);
  } else if (config.model.type == "file") {
    model.couplings = read_matrix_csv(config.model.path);
    model.n_qubits = static_cast<int>(model.couplings.rows());
  } else {  // explicit
    model.couplings = *config.model.couplings;
    model.n_qubits = static_cast<int>(model.couplings.rows());
  }
  config.model.n_qubits = model.n_qubits;
  config.model.couplings = model.couplings;
  ResolvedRun resolved{std::move(config), model, build_ising(model)};
  return resolved;
}

}  // namespace qanneal
