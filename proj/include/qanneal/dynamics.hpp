#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "qanneal/errors.hpp"
#include "qanneal/linalg.hpp"
#include "qanneal/operators.hpp"

namespace qanneal {

// Uniform discretization of [0, T] into K steps; dt is derived, never
// stored, so K * dt == T holds by construction.
struct TimeGrid {
  double horizon = 0.0;
  int n_steps = 0;

  TimeGrid() = default;
  TimeGrid(double horizon_, int n_steps_)
      : horizon(horizon_), n_steps(n_steps_) {
    if (!(horizon > 0.0)) throw ConfigError("time horizon must be positive");
    if (n_steps < 1) throw ConfigError("n_steps must be >= 1");
  }

  double dt() const { return horizon / n_steps; }
  double time_at(int k) const { return dt() * k; }
};

// Piecewise-constant control u(tau) in [0,1]: value k applies on
// [tau_k, tau_{k+1}).
struct Protocol {
  TimeGrid grid;
  Eigen::VectorXd values;

  Protocol() = default;
  Protocol(TimeGrid grid_, Eigen::VectorXd values_)
      : grid(grid_), values(std::move(values_)) {
    if (values.size() != grid.n_steps) {
      throw ConfigError("protocol length must equal the grid step count");
    }
    for (Eigen::Index k = 0; k < values.size(); ++k) {
      if (!(values(k) >= 0.0 && values(k) <= 1.0)) {
        throw ConfigError("protocol values must lie in [0, 1]");
      }
    }
  }

  static Protocol constant(TimeGrid grid, double u) {
    return Protocol(grid, Eigen::VectorXd::Constant(grid.n_steps, u));
  }

  // The linear ramp u_k = 1 - tau_k / T (annealing from mixer to problem).
  static Protocol linear_ramp(TimeGrid grid) {
    Eigen::VectorXd u(grid.n_steps);
    for (int k = 0; k < grid.n_steps; ++k) {
      u(k) = 1.0 - static_cast<double>(k) / grid.n_steps;
    }
    return Protocol(grid, std::move(u));
  }
};

// Bounded piecewise-constant multiplicative control error: section s of S
// covers [s T/S, (s+1) T/S) with a constant amplitude, |amplitude| <= bound.
struct ErrorSignal {
  int n_sections = 0;
  Eigen::VectorXd amplitudes;
  double bound = 0.0;

  ErrorSignal() = default;
  ErrorSignal(Eigen::VectorXd amplitudes_, double bound_)
      : n_sections(static_cast<int>(amplitudes_.size())),
        amplitudes(std::move(amplitudes_)),
        bound(bound_) {
    if (n_sections < 1) throw ConfigError("error signal needs >= 1 section");
    if (!(bound >= 0.0)) throw ConfigError("error bound must be >= 0");
    if (amplitudes.cwiseAbs().maxCoeff() > bound + 1e-15 * std::max(bound, 1.0)) {
      throw ConfigError("error amplitudes must satisfy |amplitude| <= bound");
    }
  }

  ErrorSignal scaled(double factor) const {
    return ErrorSignal(amplitudes * factor, bound * std::abs(factor));
  }

  // Per-step amplitudes on a K-step grid: step k takes the value of the
  // section containing its left endpoint, i.e. section floor(k S / K).
  Eigen::VectorXd resample(int n_steps) const {
    Eigen::VectorXd out(n_steps);
    for (int k = 0; k < n_steps; ++k) {
      const auto section = static_cast<Eigen::Index>(
          (static_cast<long long>(k) * n_sections) / n_steps);
      out(k) = amplitudes(section);
    }
    return out;
  }
};

// Time-indexed state history: column k holds |x(tau_k)>, k = 0..K.
struct Trajectory {
  Eigen::MatrixXcd states;  // d x (K+1)
  double final_cost = 0.0;  // <x(T)|C|x(T)>

  Eigen::VectorXcd final_state() const { return states.col(states.cols() - 1); }
};

inline void check_normalized(const Eigen::VectorXcd& v, const char* what) {
  if (std::abs(v.norm() - 1.0) > 1e-8) {
    throw ConfigError(std::string(what) + " must be normalized");
  }
}

inline double terminal_cost_of(const HamiltonianPair& ham,
                               const Eigen::VectorXcd& state) {
  // <x|C|x> with diagonal C: sum_i c_i |x_i|^2, exactly real.
  return ham.c_diagonal().dot(state.cwiseAbs2());
}

namespace detail {

// One exact step: x <- V exp(-i * scale * Lambda) V^T x.
inline void apply_step(const EigSystem& eig, double scale,
                       Eigen::VectorXcd& state, Eigen::VectorXcd& scratch) {
  scratch = real_mat_apply_transposed(eig.evecs, state);
  for (Eigen::Index i = 0; i < scratch.size(); ++i) {
    const double theta = scale * eig.evals(i);
    scratch(i) *= Complex(std::cos(theta), -std::sin(theta));
  }
  state = real_mat_apply(eig.evecs, scratch);
}

}  // namespace detail

// Exact propagation of |x_dot> = -i (1 + eps(tau)) H(u(tau)) |x> for a
// piecewise-constant protocol: each step applies the closed-form unitary
// exp(-i (1+eps_k) dt H(u_k)) via eigendecomposition of the step generator.
// Eigensystems are computed per step and discarded; see ProtocolPropagator
// for the cached variant used by optimization and ensemble evaluation.
inline Trajectory propagate(const HamiltonianPair& ham,
                            const Protocol& protocol,
                            const Eigen::VectorXcd& initial,
                            const ErrorSignal* error = nullptr) {
  check_normalized(initial, "initial state");
  if (initial.size() != ham.dim()) {
    throw ConfigError("initial state dimension mismatch");
  }
  const int n_steps = protocol.grid.n_steps;
  const double dt = protocol.grid.dt();
  Eigen::VectorXd eps = error != nullptr ? error->resample(n_steps)
                                         : Eigen::VectorXd::Zero(n_steps);
  Trajectory trajectory;
  trajectory.states.resize(ham.dim(), n_steps + 1);
  trajectory.states.col(0) = initial;
  Eigen::VectorXcd state = initial;
  Eigen::VectorXcd scratch(ham.dim());
  for (int k = 0; k < n_steps; ++k) {
    const EigSystem eig = eig_sym(hamiltonian_at(ham, protocol.values(k)));
    detail::apply_step(eig, (1.0 + eps(k)) * dt, state, scratch);
    trajectory.states.col(k + 1) = state;
  }
  trajectory.final_cost = terminal_cost_of(ham, state);
  return trajectory;
}

// |<a|b>|, the global-phase-invariant overlap of two unit vectors.
inline double fidelity(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  check_normalized(a, "fidelity argument");
  check_normalized(b, "fidelity argument");
  return std::abs(a.dot(b));
}

// L = integral of |H(u(tau))| d tau, exact for piecewise-constant u.
inline double lipschitz_bound(const HamiltonianPair& ham,
                              const Protocol& protocol, NormKind kind) {
  double total = 0.0;
  for (int k = 0; k < protocol.grid.n_steps; ++k) {
    total += q_value(ham, protocol.values(k), kind);
  }
  return total * protocol.grid.dt();
}

// Final-state overlap guarantee under any |eps(tau)| <= eps_hat:
// fidelity >= 1 - L^2 eps_hat^2 / 2 (possibly negative, then vacuous).
inline double fidelity_lower_bound(double lipschitz, double eps_hat) {
  if (!(lipschitz >= 0.0)) throw ConfigError("Lipschitz bound must be >= 0");
  if (!(eps_hat >= 0.0)) throw ConfigError("eps_hat must be >= 0");
  return 1.0 - 0.5 * lipschitz * lipschitz * eps_hat * eps_hat;
}

// Propagation under H(u_k) + phase_k * I.  The shift is fed through the
// eigendecomposition like any other generator (not factored out
// analytically), so the global-phase identity can be tested non-vacuously.
inline Trajectory phase_shifted_propagate(const HamiltonianPair& ham,
                                          const Protocol& protocol,
                                          const Eigen::VectorXcd& initial,
                                          const Eigen::VectorXd& phase) {
  check_normalized(initial, "initial state");
  if (phase.size() != protocol.grid.n_steps) {
    throw ConfigError("phase vector length must equal the grid step count");
  }
  const int n_steps = protocol.grid.n_steps;
  const double dt = protocol.grid.dt();
  Trajectory trajectory;
  trajectory.states.resize(ham.dim(), n_steps + 1);
  trajectory.states.col(0) = initial;
  Eigen::VectorXcd state = initial;
  Eigen::VectorXcd scratch(ham.dim());
  const Eigen::MatrixXd identity =
      Eigen::MatrixXd::Identity(ham.dim(), ham.dim());
  for (int k = 0; k < n_steps; ++k) {
    const EigSystem eig = eig_sym(hamiltonian_at(ham, protocol.values(k)) +
                                  phase(k) * identity);
    detail::apply_step(eig, dt, state, scratch);
    trajectory.states.col(k + 1) = state;
  }
  trajectory.final_cost = terminal_cost_of(ham, state);
  return trajectory;
}

// Per-step eigensystems of H(u_k), computed once and reused for: repeated
// propagation under many error signals, costate back-propagation, exact
// gradients, and norm evaluations along the protocol.  Memory is
// K * d^2 doubles; intended for the optimization/ensemble scale (N <= 8).
class ProtocolPropagator {
 public:
  ProtocolPropagator(const HamiltonianPair& ham, Protocol protocol)
      : ham_(&ham), protocol_(std::move(protocol)) {
    const int n_steps = protocol_.grid.n_steps;
    steps_.reserve(n_steps);
    for (int k = 0; k < n_steps; ++k) {
      steps_.push_back(eig_sym(hamiltonian_at(ham, protocol_.values(k))));
    }
  }

  const HamiltonianPair& ham() const { return *ham_; }
  const Protocol& protocol() const { return protocol_; }
  int n_steps() const { return protocol_.grid.n_steps; }
  double dt() const { return protocol_.grid.dt(); }
  const EigSystem& step_eigsys(int k) const { return steps_[k]; }

  // Final state only (the ensemble hot path); eps is per-step, may be empty.
  Eigen::VectorXcd final_state(const Eigen::VectorXcd& initial,
                               const Eigen::VectorXd& eps_per_step) const {
    Eigen::VectorXcd state = initial;
    Eigen::VectorXcd scratch(ham_->dim());
    const double dt_ = dt();
    for (int k = 0; k < n_steps(); ++k) {
      const double scale =
          eps_per_step.size() > 0 ? (1.0 + eps_per_step(k)) * dt_ : dt_;
      detail::apply_step(steps_[k], scale, state, scratch);
    }
    return state;
  }

  Trajectory trajectory(const Eigen::VectorXcd& initial,
                        const Eigen::VectorXd& eps_per_step) const {
    check_normalized(initial, "initial state");
    Trajectory out;
    out.states.resize(ham_->dim(), n_steps() + 1);
    out.states.col(0) = initial;
    Eigen::VectorXcd state = initial;
    Eigen::VectorXcd scratch(ham_->dim());
    const double dt_ = dt();
    for (int k = 0; k < n_steps(); ++k) {
      const double scale =
          eps_per_step.size() > 0 ? (1.0 + eps_per_step(k)) * dt_ : dt_;
      detail::apply_step(steps_[k], scale, state, scratch);
      out.states.col(k + 1) = state;
    }
    out.final_cost = terminal_cost_of(*ham_, state);
    return out;
  }

  // q(u_k): free for spectral kinds (eigenvalues are cached), closed-form
  // for Frobenius kinds.
  double q_at_step(int k, NormKind kind) const {
    if (kind.family == NormKind::Family::Frobenius) {
      return detail::q_frobenius(*ham_, protocol_.values(k),
                                 kind.phase_reduced);
    }
    return detail::q_spectral_from_evals(steps_[k].evals, kind.phase_reduced);
  }

  double regularizer(NormKind kind) const {
    double total = 0.0;
    for (int k = 0; k < n_steps(); ++k) total += q_at_step(k, kind);
    return total * dt();
  }

  SubgradientInterval subgradient_at_step(int k, NormKind kind) const {
    if (kind.family == NormKind::Family::Frobenius) {
      return q_subgradient(*ham_, protocol_.values(k), kind);
    }
    return detail::spectral_subgradient(steps_[k], ham_->f(),
                                        kind.phase_reduced);
  }

 private:
  const HamiltonianPair* ham_;
  Protocol protocol_;
  std::vector<EigSystem> steps_;
};

}  // namespace qanneal
