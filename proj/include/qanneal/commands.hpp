#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qanneal/config.hpp"
#include "qanneal/control.hpp"
#include "qanneal/errors.hpp"
#include "qanneal/io.hpp"
#include "qanneal/operators.hpp"
#include "qanneal/pmp.hpp"
#include "qanneal/robustness.hpp"
#include "qanneal/version.hpp"

namespace qanneal {

struct CommandContext {
  RunConfig config;
  std::filesystem::path out_dir;
  int jobs = 1;
  bool resume = false;
  std::string protocol_override;  // pmp-check positional argument
};

namespace detail {

// Comment preamble shared by every CSV: library version plus the fully
// resolved configuration on one line, so each artifact is self-describing.
inline std::string csv_preamble(const RunConfig& resolved) {
  std::string text = "# qanneal " + std::string(kVersion) + "\n";
  text += "# config " + run_config_to_json(resolved).dump() + "\n";
  return text;
}

inline nlohmann::json finite_or_null(double value) {
  if (std::isfinite(value)) return value;
  return nullptr;
}

inline nlohmann::json report_json(const RunConfig& resolved,
                                  const CostSpec& spec,
                                  const OptimizeReport& report,
                                  const PmpDiagnostics& diag) {
  int counts[4] = {0, 0, 0, 0};
  for (StepCase label : diag.case_labels) {
    ++counts[static_cast<int>(label)];
  }
  nlohmann::json j;
  j["version"] = kVersion;
  j["seed"] = resolved.seed;
  j["grid"] = {{"horizon", report.protocol.grid.horizon},
               {"n_steps", report.protocol.grid.n_steps}};
  j["cost"] = {{"zeta", spec.zeta},
               {"norm", norm_kind_name(spec.norm)},
               {"phase_reduced", spec.norm.phase_reduced}};
  j["costs"] = {{"terminal", report.cost_terminal},
                {"regularizer", report.cost_regularizer},
                {"total", report.cost_total(spec.zeta)}};
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  j["gradient_norm_final"] = report.gradient_norm_final;
  j["band"] = {{"m_lb", diag.band.m_lb},
               {"m_ub", diag.band.m_ub},
               {"zeta_threshold", finite_or_null(diag.band.zeta_threshold)}};
  j["classification_tol"] = diag.classification_tol;
  j["singular_fraction"] = diag.singular_fraction;
  j["hamiltonian_mean"] = diag.hamiltonian_mean();
  j["hamiltonian_spread"] = diag.hamiltonian_spread();
  j["case_counts"] = {
      {"singular", counts[static_cast<int>(StepCase::Singular)]},
      {"bang_zero", counts[static_cast<int>(StepCase::BangZero)]},
      {"bang_one", counts[static_cast<int>(StepCase::BangOne)]},
      {"violated", counts[static_cast<int>(StepCase::Violated)]}};
  return j;
}

inline std::string protocol_csv(const RunConfig& resolved,
                                const Protocol& protocol,
                                const PmpDiagnostics& diag) {
  const TimeGrid& grid = protocol.grid;
  std::string text = csv_preamble(resolved);
  text += "# grid horizon=" + format_double(grid.horizon) +
          " n_steps=" + std::to_string(grid.n_steps) + "\n";
  text += "step,t,u,mu,control_hamiltonian,case_label\n";
  for (int k = 0; k < grid.n_steps; ++k) {
    text += std::to_string(k);
    text += ',';
    text += format_double(grid.time_at(k));
    text += ',';
    text += format_double(protocol.values(k));
    text += ',';
    text += format_double(diag.mu_step(k));
    text += ',';
    text += format_double(diag.control_hamiltonian(k));
    text += ',';
    text += step_case_name(diag.case_labels[static_cast<std::size_t>(k)]);
    text += '\n';
  }
  return text;
}

// Writes protocol.csv, report.json and config.resolved.json for one
// synthesized protocol.  Returns the diagnostics for reuse by callers.
inline PmpDiagnostics write_protocol_outputs(
    const std::filesystem::path& dir, const RunConfig& resolved,
    const HamiltonianPair& ham, const CostSpec& spec,
    const OptimizeReport& report, const nlohmann::json* extra = nullptr) {
  const PmpDiagnostics diag = compute_diagnostics(ham, report.protocol, spec);
  nlohmann::json report_j = report_json(resolved, spec, report, diag);
  if (extra != nullptr) {
    for (const auto& item : extra->items()) report_j[item.key()] = item.value();
  }
  write_text_file(dir / "protocol.csv", protocol_csv(resolved, report.protocol, diag));
  write_json_file(dir / "report.json", report_j);
  write_json_file(dir / "config.resolved.json", run_config_to_json(resolved));
  return diag;
}

// Writes curves.csv (worst fidelity / mean objective per level) and
// bounds.csv (Lipschitz constant and fidelity guarantee per level), both
// approach-major with the shared comment preamble.
inline void write_robustness_csvs(const std::filesystem::path& dir,
                                  const RunConfig& resolved,
                                  const RobustnessCurve& curve) {
  std::string curves = csv_preamble(resolved);
  curves += "eps_hat,approach,worst_fidelity,mean_objective\n";
  std::string bounds = csv_preamble(resolved);
  bounds += "eps_hat,approach,lipschitz_L,fidelity_lower_bound\n";
  for (const RobustnessCurve::Entry& entry : curve.protocols) {
    for (Eigen::Index level = 0; level < curve.eps_levels.size(); ++level) {
      curves += format_double(curve.eps_levels(level));
      curves += ',';
      curves += entry.name;
      curves += ',';
      curves += format_double(entry.worst_fidelity(level));
      curves += ',';
      curves += format_double(entry.mean_objective(level));
      curves += '\n';
      bounds += format_double(curve.eps_levels(level));
      bounds += ',';
      bounds += entry.name;
      bounds += ',';
      bounds += format_double(entry.lipschitz);
      bounds += ',';
      bounds += format_double(entry.fidelity_bound(level));
      bounds += '\n';
    }
  }
  write_text_file(dir / "curves.csv", curves);
  write_text_file(dir / "bounds.csv", bounds);
}

inline CostSpec cost_for_approach(const RunConfig& config,
                                  const std::string& name) {
  CostSpec spec;
  if (name == "nominal") {
    spec.zeta = 0.0;
    spec.norm = NormKind::spectral();
    spec.norm.phase_reduced = config.robustness.phase_reduced;
  } else if (name == "spectral") {
    spec.zeta = config.robustness.zeta_spectral;
    spec.norm = NormKind::spectral();
    spec.norm.phase_reduced = config.robustness.phase_reduced;
  } else if (name == "frobenius") {
    spec.zeta = config.robustness.zeta_frobenius;
    spec.norm = NormKind::frobenius();
    spec.norm.phase_reduced = config.robustness.phase_reduced;
  } else {
    throw ConfigError("no cost spec for approach '" + name + "'");
  }
  return spec;
}

}  // namespace detail

// Synthesizes one protocol under the configured cost and writes
// protocol.csv, report.json and config.resolved.json.
inline int cmd_optimize(const CommandContext& ctx) {
  const ResolvedRun run = resolve_run(ctx.config);
  OptimizeOptions options = run.config.optimizer;
  options.seed = fork_seed(run.config.seed, 0x0A71ULL);
  const OptimizeReport report = optimize_protocol(
      run.ham, run.config.cost, run.config.grid(), std::nullopt, options);
  const PmpDiagnostics diag = detail::write_protocol_outputs(
      ctx.out_dir, run.config, run.ham, run.config.cost, report);
  std::cout << "optimize: total=" << format_double(report.cost_total(run.config.cost.zeta))
            << " terminal=" << format_double(report.cost_terminal)
            << " iterations=" << report.iterations
            << " converged=" << (report.converged ? "yes" : "no")
            << " singular_fraction=" << format_double(diag.singular_fraction)
            << "\n";
  std::cout << "wrote " << (ctx.out_dir / "protocol.csv").string() << "\n";
  return 0;
}

// The four-approach comparison: nominal (zeta = 0), QAOA, spectral- and
// Frobenius-regularized protocols, evaluated against one shared error
// ensemble over the configured noise levels.  Robust approaches are seeded
// with the nominal solution, which guarantees their regularized total cost
// is no worse than the nominal protocol's.
inline int cmd_robustness(const CommandContext& ctx) {
  const ResolvedRun run = resolve_run(ctx.config);
  const TimeGrid grid = run.config.grid();

  std::vector<std::pair<std::string, Protocol>> named;
  std::optional<Protocol> nominal_protocol;
  const std::vector<std::string> approaches = {"nominal", "qaoa", "spectral",
                                               "frobenius"};
  for (std::size_t a = 0; a < approaches.size(); ++a) {
    const std::string& name = approaches[a];
    OptimizeOptions options = run.config.optimizer;
    options.seed = fork_seed(run.config.seed, 0xA770000ULL + a);
    if (name == "qaoa") {
      const QaoaResult qaoa = optimize_qaoa(run.ham, grid, run.config.qaoa_bangs,
                                            std::nullopt, options);
      nlohmann::json extra;
      extra["qaoa"] = {{"n_bangs", qaoa.schedule.n_bangs},
                       {"leading_value", qaoa.schedule.leading_value},
                       {"durations",
                        detail::vector_to_json(qaoa.schedule.durations)}};
      detail::write_protocol_outputs(ctx.out_dir / name, run.config, run.ham,
                                     CostSpec{}, qaoa.report, &extra);
      named.emplace_back(name, qaoa.report.protocol);
    } else {
      const CostSpec spec = detail::cost_for_approach(run.config, name);
      const std::optional<Protocol> init =
          spec.zeta > 0.0 ? nominal_protocol : std::nullopt;
      const OptimizeReport report =
          optimize_protocol(run.ham, spec, grid, init, options);
      if (name == "nominal") nominal_protocol = report.protocol;
      detail::write_protocol_outputs(ctx.out_dir / name, run.config, run.ham,
                                     spec, report);
      named.emplace_back(name, report.protocol);
    }
    std::cout << "approach " << name << ": protocol ready\n";
  }

  const ErrorEnsemble ensemble = generate_ensemble(
      run.config.ensemble_signals, run.config.ensemble_sections,
      fork_seed(run.config.seed, 0xE75EB1EULL));
  const RobustnessCurve curve = robustness_curve(
      run.ham, named, ensemble, run.config.eps_levels, ctx.jobs);

  detail::write_robustness_csvs(ctx.out_dir, run.config, curve);
  write_json_file(ctx.out_dir / "config.resolved.json",
                  run_config_to_json(run.config));
  std::cout << "wrote " << (ctx.out_dir / "curves.csv").string() << " and "
            << (ctx.out_dir / "bounds.csv").string() << "\n";
  return 0;
}

namespace detail {

inline nlohmann::json sweep_record_to_json(const SweepModelRecord& record) {
  nlohmann::json j;
  j["model_index"] = record.model_index;
  j["model_seed"] = record.model_seed;
  j["ok"] = record.ok;
  if (!record.ok) j["error"] = record.error;
  j["couplings"] = matrix_to_json(record.couplings);
  j["ground_energy_magnitude"] = record.ground_energy_magnitude;
  nlohmann::json wf = nlohmann::json::array();
  nlohmann::json no = nlohmann::json::array();
  for (const Eigen::VectorXd& v : record.worst_fidelity) {
    wf.push_back(vector_to_json(v));
  }
  for (const Eigen::VectorXd& v : record.normalized_objective) {
    no.push_back(vector_to_json(v));
  }
  j["worst_fidelity"] = std::move(wf);
  j["normalized_objective"] = std::move(no);
  return j;
}

inline SweepModelRecord sweep_record_from_json(const nlohmann::json& j,
                                               const std::string& where) {
  try {
    SweepModelRecord record;
    record.model_index = j.at("model_index").get<int>();
    record.model_seed = j.at("model_seed").get<std::uint64_t>();
    record.ok = j.at("ok").get<bool>();
    if (j.contains("error")) record.error = j.at("error").get<std::string>();
    record.couplings = get_matrix(j.at("couplings"), where + " couplings");
    record.ground_energy_magnitude =
        j.at("ground_energy_magnitude").get<double>();
    for (const auto& v : j.at("worst_fidelity")) {
      record.worst_fidelity.push_back(get_vector(v, where));
    }
    for (const auto& v : j.at("normalized_objective")) {
      record.normalized_objective.push_back(get_vector(v, where));
    }
    return record;
  } catch (const nlohmann::json::exception& error) {
    throw IoError("malformed sweep record in " + where + ": " + error.what());
  }
}

inline SweepParams sweep_params_from_config(const RunConfig& config,
                                            int jobs) {
  SweepParams params;
  params.n_models = config.sweep.n_models;
  params.n_qubits = config.sweep.n_qubits;
  params.grid = config.grid();
  for (const std::string& name : config.sweep.approaches) {
    ApproachSpec approach;
    approach.name = name;
    if (name == "qaoa") {
      approach.kind = ApproachSpec::Kind::Qaoa;
      approach.qaoa_bangs = config.qaoa_bangs;
    } else {
      approach.kind = ApproachSpec::Kind::Continuous;
      approach.cost = cost_for_approach(config, name);
    }
    params.approaches.push_back(std::move(approach));
  }
  params.optimize = config.optimizer;
  params.optimize.max_iters = config.sweep.max_iters;
  params.optimize.n_random_starts = config.sweep.n_random_starts;
  params.ensemble_signals = config.ensemble_signals;
  params.ensemble_sections = config.ensemble_sections;
  params.eps_levels = config.eps_levels;
  params.seed = config.seed;
  params.jobs = jobs;
  return params;
}

}  // namespace detail

// Random-model sweep with per-model JSONL records and resumability: each
// finished model is appended to models.jsonl immediately, and --resume
// skips indices already on disk.  Because model i depends only on
// (master seed, i), a resumed sweep aggregates to the same bytes as an
// uninterrupted one.
inline int cmd_sweep(const CommandContext& ctx) {
  const RunConfig& config = ctx.config;
  const SweepParams params = detail::sweep_params_from_config(config, ctx.jobs);
  const std::filesystem::path records_path = ctx.out_dir / "models.jsonl";

  std::vector<SweepModelRecord> records;
  if (std::filesystem::exists(records_path)) {
    if (!ctx.resume) {
      throw ConfigError(records_path.string() +
                        " already exists; pass --resume to continue the sweep "
                        "or remove the file to restart");
    }
    const auto lines = read_jsonl(records_path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      SweepModelRecord record = detail::sweep_record_from_json(
          lines[i], records_path.string() + ":" + std::to_string(i + 1));
      const std::uint64_t expected =
          sweep_model_seed(config.seed, record.model_index);
      if (record.model_seed != expected) {
        throw ConfigError("models.jsonl record " + std::to_string(i + 1) +
                          " was produced with a different master seed; "
                          "refusing to mix sweeps");
      }
      records.push_back(std::move(record));
    }
  }

  std::set<int> done;
  for (const SweepModelRecord& record : records) done.insert(record.model_index);

  const ErrorEnsemble ensemble = generate_ensemble(
      params.ensemble_signals, params.ensemble_sections,
      fork_seed(params.seed, 0xE75EB1EULL));
  for (int i = 0; i < params.n_models; ++i) {
    if (done.count(i) != 0) continue;
    SweepModelRecord record = sweep_one_model(params, ensemble, i);
    append_jsonl_line(records_path, detail::sweep_record_to_json(record));
    std::cout << "model " << i << ": " << (record.ok ? "ok" : record.error)
              << "\n";
    records.push_back(std::move(record));
  }

  // Drop records beyond the requested count (a resumed sweep may shrink).
  std::vector<SweepModelRecord> in_range;
  for (SweepModelRecord& record : records) {
    if (record.model_index < params.n_models) {
      in_range.push_back(std::move(record));
    }
  }
  const EnsembleSweepResult result =
      aggregate_sweep(params, std::move(in_range));

  std::string aggregate = detail::csv_preamble(config);
  aggregate += "# n_failed=" + std::to_string(result.n_failed) + "\n";
  aggregate +=
      "eps_hat,approach,mean_worst_fidelity,mean_normalized_objective,"
      "n_models\n";
  for (std::size_t a = 0; a < result.approach_names.size(); ++a) {
    for (Eigen::Index level = 0; level < result.eps_levels.size(); ++level) {
      aggregate += format_double(result.eps_levels(level));
      aggregate += ',';
      aggregate += result.approach_names[a];
      aggregate += ',';
      aggregate += format_double(result.mean_worst_fidelity[a](level));
      aggregate += ',';
      aggregate += format_double(result.mean_normalized_objective[a](level));
      aggregate += ',';
      aggregate += std::to_string(result.n_completed);
      aggregate += '\n';
    }
  }
  write_text_file(ctx.out_dir / "aggregate.csv", aggregate);
  write_json_file(ctx.out_dir / "config.resolved.json",
                  run_config_to_json(config));
  std::cout << "sweep: completed=" << result.n_completed
            << " failed=" << result.n_failed << "\n";
  std::cout << "wrote " << (ctx.out_dir / "aggregate.csv").string() << "\n";
  return 0;
}

// Recomputes trajectory, co-state and classification for a stored protocol
// and reports the optimality diagnostics.  A protocol that fails the
// conditions still exits 0: the check is the product, not a gate.
inline int cmd_pmp_check(const CommandContext& ctx) {
  const ResolvedRun run = resolve_run(ctx.config);
  std::optional<Protocol> protocol;
  if (!ctx.protocol_override.empty()) {
    protocol = read_protocol_csv(ctx.protocol_override);
  } else if (!run.config.pmp_check.protocol_path.empty()) {
    protocol = read_protocol_csv(run.config.pmp_check.protocol_path);
  } else if (run.config.pmp_check.u) {
    const Eigen::VectorXd& u = *run.config.pmp_check.u;
    protocol = Protocol(
        TimeGrid(run.config.horizon, static_cast<int>(u.size())), u);
  } else {
    throw ConfigError(
        "pmp-check needs a protocol: pass a protocol.csv path or set "
        "pmp_check.protocol / pmp_check.u in the config");
  }

  const CostSpec& spec = run.config.cost;
  const PmpDiagnostics diag = compute_diagnostics(run.ham, *protocol, spec);
  int violated = 0;
  for (StepCase label : diag.case_labels) {
    if (label == StepCase::Violated) ++violated;
  }
  const double spread = diag.hamiltonian_spread();
  const double spread_tol = 1e-3 * (1.0 + std::abs(diag.hamiltonian_mean()));
  const bool pass = violated == 0 && spread < spread_tol;

  nlohmann::json j;
  j["version"] = kVersion;
  j["cost"] = {{"zeta", spec.zeta},
               {"norm", norm_kind_name(spec.norm)},
               {"phase_reduced", spec.norm.phase_reduced}};
  j["grid"] = {{"horizon", protocol->grid.horizon},
               {"n_steps", protocol->grid.n_steps}};
  j["band"] = {{"m_lb", diag.band.m_lb},
               {"m_ub", diag.band.m_ub},
               {"zeta_threshold", detail::finite_or_null(diag.band.zeta_threshold)}};
  j["classification_tol"] = diag.classification_tol;
  j["singular_fraction"] = diag.singular_fraction;
  j["hamiltonian_mean"] = diag.hamiltonian_mean();
  j["hamiltonian_spread"] = spread;
  j["hamiltonian_spread_tol"] = spread_tol;
  j["violated_steps"] = violated;
  j["pass"] = pass;
  write_json_file(ctx.out_dir / "pmp_report.json", j);

  std::cout << "band: [" << format_double(diag.band.m_lb) << ", "
            << format_double(diag.band.m_ub) << "]"
            << " zeta_threshold="
            << (std::isfinite(diag.band.zeta_threshold)
                    ? format_double(diag.band.zeta_threshold)
                    : std::string("inf"))
            << "\n";
  std::cout << "singular_fraction=" << format_double(diag.singular_fraction)
            << " violated_steps=" << violated << "\n";
  std::cout << "control_hamiltonian mean="
            << format_double(diag.hamiltonian_mean())
            << " spread=" << format_double(spread)
            << " (tol " << format_double(spread_tol) << ")\n";
  std::cout << "pmp-check: " << (pass ? "PASS" : "FAIL") << "\n";
  std::cout << "wrote " << (ctx.out_dir / "pmp_report.json").string() << "\n";
  return 0;
}

}  // namespace qanneal
