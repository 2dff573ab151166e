#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qanneal/control.hpp"
#include "qanneal/dynamics.hpp"
#include "qanneal/errors.hpp"
#include "qanneal/operators.hpp"
#include "qanneal/parallel.hpp"
#include "qanneal/rng.hpp"

namespace qanneal {

// A fixed set of unit-scaled error signals (amplitudes in [-1, 1], bound 1).
// Scaling by eps_hat multiplies amplitudes without regeneration, so every
// noise level sees the same underlying signals.
struct ErrorEnsemble {
  std::vector<ErrorSignal> signals;
  std::uint64_t seed = 0;
};

// Amplitudes i.i.d. uniform on [-1, 1]; signal i draws from the stream
// forked at index i, so the ensemble is reproducible and each signal is
// independent of n_signals.
inline ErrorEnsemble generate_ensemble(int n_signals, int n_sections,
                                       std::uint64_t seed) {
  if (n_signals < 1) throw ConfigError("ensemble needs n_signals >= 1");
  if (n_sections < 1) throw ConfigError("ensemble needs n_sections >= 1");
  ErrorEnsemble ensemble;
  ensemble.seed = seed;
  ensemble.signals.reserve(n_signals);
  for (int i = 0; i < n_signals; ++i) {
    Rng rng(fork_seed(seed, static_cast<std::uint64_t>(i)));
    Eigen::VectorXd amplitudes(n_sections);
    for (int s = 0; s < n_sections; ++s) {
      amplitudes(s) = rng.uniform_symmetric();
    }
    ensemble.signals.emplace_back(std::move(amplitudes), 1.0);
  }
  return ensemble;
}

namespace detail {

// Signals resampled once onto a protocol grid; reused across noise levels.
inline std::vector<Eigen::VectorXd> resample_ensemble(
    const ErrorEnsemble& ensemble, int n_steps) {
  std::vector<Eigen::VectorXd> resampled;
  resampled.reserve(ensemble.signals.size());
  for (const ErrorSignal& signal : ensemble.signals) {
    resampled.push_back(signal.resample(n_steps));
  }
  return resampled;
}

struct EnsemblePoint {
  double worst_fidelity = 1.0;
  double mean_objective = 0.0;
};

// Worst overlap and mean noisy objective at one noise level.  Signal
// propagations may run in parallel; the min/mean reductions are performed
// serially in signal order on the stored per-signal values.
inline EnsemblePoint evaluate_ensemble_level(
    const ProtocolPropagator& prop, const Eigen::VectorXcd& x0,
    const Eigen::VectorXcd& nominal_final,
    const std::vector<Eigen::VectorXd>& resampled, double eps_hat, int jobs) {
  const std::size_t n = resampled.size();
  std::vector<double> fidelities(n), objectives(n);
  parallel_for_indexed(n, jobs, [&](std::size_t i) {
    const Eigen::VectorXcd final_state =
        prop.final_state(x0, resampled[i] * eps_hat);
    fidelities[i] = std::abs(final_state.dot(nominal_final));
    objectives[i] = terminal_cost_of(prop.ham(), final_state);
  });
  EnsemblePoint point;
  point.worst_fidelity = fidelities[0];
  point.mean_objective = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    point.worst_fidelity = std::min(point.worst_fidelity, fidelities[i]);
    point.mean_objective += objectives[i];
  }
  point.mean_objective /= static_cast<double>(n);
  return point;
}

}  // namespace detail

// min over ensemble signals of |<x_eps(T)|x_0(T)>| with eps = eps_hat * signal.
inline double worst_fidelity(const HamiltonianPair& ham,
                             const Protocol& protocol,
                             const ErrorEnsemble& ensemble, double eps_hat,
                             int jobs = 1) {
  if (!(eps_hat >= 0.0)) throw ConfigError("eps_hat must be >= 0");
  const ProtocolPropagator prop(ham, protocol);
  const Eigen::VectorXcd x0 = ground_state_of_B(ham);
  const Eigen::VectorXcd nominal = prop.final_state(x0, Eigen::VectorXd());
  const auto resampled =
      detail::resample_ensemble(ensemble, protocol.grid.n_steps);
  return detail::evaluate_ensemble_level(prop, x0, nominal, resampled,
                                         eps_hat, jobs)
      .worst_fidelity;
}

// mean over ensemble signals of <x_eps(T)|C|x_eps(T)>.
inline double mean_objective(const HamiltonianPair& ham,
                             const Protocol& protocol,
                             const ErrorEnsemble& ensemble, double eps_hat,
                             int jobs = 1) {
  if (!(eps_hat >= 0.0)) throw ConfigError("eps_hat must be >= 0");
  const ProtocolPropagator prop(ham, protocol);
  const Eigen::VectorXcd x0 = ground_state_of_B(ham);
  const Eigen::VectorXcd nominal = prop.final_state(x0, Eigen::VectorXd());
  const auto resampled =
      detail::resample_ensemble(ensemble, protocol.grid.n_steps);
  return detail::evaluate_ensemble_level(prop, x0, nominal, resampled,
                                         eps_hat, jobs)
      .mean_objective;
}

// Robustness curves of a named set of protocols over a noise-level grid.
// The same unit ensemble is reused for every protocol and level; the bound
// columns use the plain spectral-norm Lipschitz constant (the norm for
// which the fidelity guarantee is stated).
struct RobustnessCurve {
  Eigen::VectorXd eps_levels;
  struct Entry {
    std::string name;
    Eigen::VectorXd worst_fidelity;
    Eigen::VectorXd mean_objective;
    double lipschitz = 0.0;
    Eigen::VectorXd fidelity_bound;
  };
  std::vector<Entry> protocols;
};

inline RobustnessCurve robustness_curve(
    const HamiltonianPair& ham,
    const std::vector<std::pair<std::string, Protocol>>& protocols,
    const ErrorEnsemble& ensemble, const Eigen::VectorXd& eps_levels,
    int jobs = 1) {
  if (eps_levels.size() < 1) throw ConfigError("eps_levels must be nonempty");
  for (Eigen::Index i = 0; i < eps_levels.size(); ++i) {
    if (!(eps_levels(i) >= 0.0)) {
      throw ConfigError("eps_levels entries must be >= 0");
    }
  }
  RobustnessCurve curve;
  curve.eps_levels = eps_levels;
  const Eigen::VectorXcd x0 = ground_state_of_B(ham);
  for (const auto& [name, protocol] : protocols) {
    const ProtocolPropagator prop(ham, protocol);
    const Eigen::VectorXcd nominal = prop.final_state(x0, Eigen::VectorXd());
    const auto resampled =
        detail::resample_ensemble(ensemble, protocol.grid.n_steps);
    RobustnessCurve::Entry entry;
    entry.name = name;
    entry.lipschitz = prop.regularizer(NormKind::spectral());
    entry.worst_fidelity.resize(eps_levels.size());
    entry.mean_objective.resize(eps_levels.size());
    entry.fidelity_bound.resize(eps_levels.size());
    for (Eigen::Index level = 0; level < eps_levels.size(); ++level) {
      const detail::EnsemblePoint point = detail::evaluate_ensemble_level(
          prop, x0, nominal, resampled, eps_levels(level), jobs);
      entry.worst_fidelity(level) = point.worst_fidelity;
      entry.mean_objective(level) = point.mean_objective;
      entry.fidelity_bound(level) =
          fidelity_lower_bound(entry.lipschitz, eps_levels(level));
    }
    curve.protocols.push_back(std::move(entry));
  }
  return curve;
}

// J with i.i.d. uniform [-1, 1] couplings above the diagonal, symmetrized,
// zero diagonal.
inline IsingModel random_ising_model(int n_qubits, std::uint64_t seed) {
  IsingModel model;
  model.n_qubits = n_qubits;
  model.couplings = Eigen::MatrixXd::Zero(n_qubits, n_qubits);
  Rng rng(seed);
  for (int i = 0; i < n_qubits; ++i) {
    for (int j = i + 1; j < n_qubits; ++j) {
      const double value = rng.uniform_symmetric();
      model.couplings(i, j) = value;
      model.couplings(j, i) = value;
    }
  }
  return model;
}

// One protocol-synthesis approach entering a sweep or a curve comparison.
struct ApproachSpec {
  enum class Kind { Continuous, Qaoa };
  std::string name;
  Kind kind = Kind::Continuous;
  CostSpec cost;       // Continuous only
  int qaoa_bangs = 8;  // Qaoa only
};

struct SweepParams {
  int n_models = 10;
  int n_qubits = 4;
  TimeGrid grid;
  std::vector<ApproachSpec> approaches;
  OptimizeOptions optimize;
  int ensemble_signals = 20;
  int ensemble_sections = 20;
  Eigen::VectorXd eps_levels;
  std::uint64_t seed = 1;
  int jobs = 1;
};

// Everything recorded about one model of a sweep; serialized as one JSONL
// line by the CLI so interrupted sweeps can resume.
struct SweepModelRecord {
  int model_index = 0;
  std::uint64_t model_seed = 0;
  bool ok = false;
  std::string error;
  Eigen::MatrixXd couplings;
  double ground_energy_magnitude = 0.0;  // |lambda_min(C)|
  // Aligned with SweepParams.approaches; values per noise level.
  std::vector<Eigen::VectorXd> worst_fidelity;
  std::vector<Eigen::VectorXd> normalized_objective;
};

struct EnsembleSweepResult {
  int n_models_requested = 0;
  int n_completed = 0;
  int n_failed = 0;
  Eigen::VectorXd eps_levels;
  std::vector<std::string> approach_names;
  // Aligned with approach_names; mean over completed models per level.
  std::vector<Eigen::VectorXd> mean_worst_fidelity;
  std::vector<Eigen::VectorXd> mean_normalized_objective;
};

inline std::uint64_t sweep_model_seed(std::uint64_t master_seed,
                                      int model_index) {
  return fork_seed(master_seed,
                   0x4D0D0000ULL + static_cast<std::uint64_t>(model_index));
}

// Samples model `model_index`, optimizes every approach, and evaluates its
// robustness curves.  Objective values are normalized by |lambda_min(C)| so
// -1 marks the ground-state value.  Approaches with zeta > 0 are seeded
// with the best zeta = 0 protocol already computed (when one precedes them
// in the list), which both accelerates convergence and guarantees their
// regularized total cost does not exceed the nominal protocol's.
inline SweepModelRecord sweep_one_model(const SweepParams& params,
                                        const ErrorEnsemble& ensemble,
                                        int model_index) {
  SweepModelRecord record;
  record.model_index = model_index;
  record.model_seed = sweep_model_seed(params.seed, model_index);
  const IsingModel model =
      random_ising_model(params.n_qubits, record.model_seed);
  record.couplings = model.couplings;
  try {
    const HamiltonianPair ham = build_ising(model);
    record.ground_energy_magnitude =
        std::max(std::abs(ham.c_diagonal().minCoeff()), 1e-12);

    std::optional<Protocol> nominal_protocol;
    std::vector<std::pair<std::string, Protocol>> named;
    for (std::size_t a = 0; a < params.approaches.size(); ++a) {
      const ApproachSpec& approach = params.approaches[a];
      OptimizeOptions options = params.optimize;
      options.seed = fork_seed(record.model_seed, a);
      if (approach.kind == ApproachSpec::Kind::Qaoa) {
        const QaoaResult qaoa = optimize_qaoa(
            ham, params.grid, approach.qaoa_bangs, std::nullopt, options);
        named.emplace_back(approach.name, qaoa.report.protocol);
      } else {
        const std::optional<Protocol> init =
            approach.cost.zeta > 0.0 ? nominal_protocol : std::nullopt;
        const OptimizeReport report = optimize_protocol(
            ham, approach.cost, params.grid, init, options);
        if (approach.cost.zeta == 0.0 && !nominal_protocol.has_value()) {
          nominal_protocol = report.protocol;
        }
        named.emplace_back(approach.name, report.protocol);
      }
    }
    const RobustnessCurve curve = robustness_curve(
        ham, named, ensemble, params.eps_levels, params.jobs);
    for (const RobustnessCurve::Entry& entry : curve.protocols) {
      record.worst_fidelity.push_back(entry.worst_fidelity);
      record.normalized_objective.push_back(
          entry.mean_objective / record.ground_energy_magnitude);
    }
    record.ok = true;
  } catch (const NumericalError& error) {
    record.ok = false;
    record.error = error.what();
  }
  return record;
}

// Mean curves over the completed models, summed in model-index order.
inline EnsembleSweepResult aggregate_sweep(
    const SweepParams& params, std::vector<SweepModelRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const SweepModelRecord& a, const SweepModelRecord& b) {
              return a.model_index < b.model_index;
            });
  EnsembleSweepResult result;
  result.n_models_requested = params.n_models;
  result.eps_levels = params.eps_levels;
  for (const ApproachSpec& approach : params.approaches) {
    result.approach_names.push_back(approach.name);
    result.mean_worst_fidelity.push_back(
        Eigen::VectorXd::Zero(params.eps_levels.size()));
    result.mean_normalized_objective.push_back(
        Eigen::VectorXd::Zero(params.eps_levels.size()));
  }
  for (const SweepModelRecord& record : records) {
    if (!record.ok) {
      ++result.n_failed;
      continue;
    }
    ++result.n_completed;
    for (std::size_t a = 0; a < result.approach_names.size(); ++a) {
      result.mean_worst_fidelity[a] += record.worst_fidelity[a];
      result.mean_normalized_objective[a] += record.normalized_objective[a];
    }
  }
  if (result.n_completed > 0) {
    for (std::size_t a = 0; a < result.approach_names.size(); ++a) {
      result.mean_worst_fidelity[a] /= result.n_completed;
      result.mean_normalized_objective[a] /= result.n_completed;
    }
  }
  return result;
}

// Full sweep over freshly sampled random models.  Model i depends only on
// (seed, i), so results are independent of evaluation order.
inline EnsembleSweepResult random_ising_sweep(const SweepParams& params) {
  if (params.n_models < 1) throw ConfigError("sweep needs n_models >= 1");
  const ErrorEnsemble ensemble =
      generate_ensemble(params.ensemble_signals, params.ensemble_sections,
                        fork_seed(params.seed, 0xE75EB1EULL));
  std::vector<SweepModelRecord> records;
  records.reserve(params.n_models);
  for (int i = 0; i < params.n_models; ++i) {
    records.push_back(sweep_one_model(params, ensemble, i));
  }
  return aggregate_sweep(params, std::move(records));
}

}  // namespace qanneal
