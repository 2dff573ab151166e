#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qanneal/control.hpp"
#include "qanneal/dynamics.hpp"
#include "qanneal/errors.hpp"
#include "qanneal/linalg.hpp"
#include "qanneal/operators.hpp"

namespace qanneal {

// Optimality-condition case of one protocol step.
enum class StepCase { Singular, BangZero, BangOne, Violated };

inline const char* step_case_name(StepCase c) {
  switch (c) {
    case StepCase::Singular: return "singular";
    case StepCase::BangZero: return "bang_zero";
    case StepCase::BangOne: return "bang_one";
    case StepCase::Violated: return "violated";
  }
  return "violated";
}

inline StepCase step_case_from_name(const std::string& name) {
  if (name == "singular") return StepCase::Singular;
  if (name == "bang_zero") return StepCase::BangZero;
  if (name == "bang_one") return StepCase::BangOne;
  if (name == "violated") return StepCase::Violated;
  throw ConfigError("unknown step case label: " + name);
}

// Subgradient band of the regularizer at the interval endpoints, plus the
// weight beyond which every instant of an optimal protocol is singular.
struct SingularBand {
  double m_lb = 0.0;  // max dq(0)
  double m_ub = 0.0;  // min dq(1)
  double zeta_threshold = std::numeric_limits<double>::infinity();
};

// Switching function mu = -i<lambda|F|x> + i<x|F|lambda> = 2 Im<lambda|F|x>.
// The two terms are conjugates, so the value is real; the numerical
// residue is checked and discarded.
inline double switching_mu(const Eigen::VectorXcd& x,
                           const Eigen::VectorXcd& lam,
                           const Eigen::MatrixXd& f) {
  const Eigen::VectorXcd fx = real_mat_apply(f, x);
  const Eigen::VectorXcd flam = real_mat_apply(f, lam);
  const Complex value =
      Complex(0, -1) * lam.dot(fx) + Complex(0, 1) * x.dot(flam);
  const double scale = 1.0 + lam.norm() * fx.norm();
  if (std::abs(value.imag()) > 1e-12 * scale) {
    throw NumericalError("switching function has a non-real residue");
  }
  return value.real();
}

// Control Hamiltonian H = i<x|H(u)|lambda> - i<lambda|H(u)|x> - zeta q(u)
// = 2 Im<lambda|H(u)|x> - zeta q(u); real up to numerical residue.
inline double control_hamiltonian(const Eigen::VectorXcd& x,
                                  const Eigen::VectorXcd& lam, double u,
                                  const HamiltonianPair& ham,
                                  const CostSpec& spec) {
  check_control_value(u);
  const Eigen::VectorXcd hx =
      u * real_mat_apply(ham.b(), x) + (1.0 - u) * diag_apply(ham.c_diagonal(), x);
  const Eigen::VectorXcd hlam =
      u * real_mat_apply(ham.b(), lam) +
      (1.0 - u) * diag_apply(ham.c_diagonal(), lam);
  const Complex value =
      Complex(0, 1) * x.dot(hlam) + Complex(0, -1) * lam.dot(hx);
  const double scale = 1.0 + lam.norm() * hx.norm();
  if (std::abs(value.imag()) > 1e-10 * scale) {
    throw NumericalError("control Hamiltonian has a non-real residue");
  }
  double h = value.real();
  if (spec.zeta > 0.0) h -= spec.zeta * q_value(ham, u, spec.norm);
  return h;
}

// Band constants and the all-singular threshold
// zeta* = 2 sigma_max(F) sigma_max(C) / min(|m_lb|, |m_ub|), finite only
// when m_lb < 0 < m_ub; infinity signals "some bang section always exists".
// The zeta argument is accepted for signature symmetry with classify_step
// (the band itself is unweighted).
inline SingularBand singular_band(const HamiltonianPair& ham, NormKind kind,
                                  double zeta) {
  if (!(zeta >= 0.0)) throw ConfigError("zeta must be >= 0");
  SingularBand band;
  band.m_lb = q_subgradient(ham, 0.0, kind).hi;
  band.m_ub = q_subgradient(ham, 1.0, kind).lo;
  if (band.m_lb < 0.0 && band.m_ub > 0.0) {
    const EigSystem eig_f = eig_sym(ham.f());
    const double sigma_f = std::max(std::abs(eig_f.evals(0)),
                                    std::abs(eig_f.evals(eig_f.evals.size() - 1)));
    const double sigma_c = ham.c_diagonal().cwiseAbs().maxCoeff();
    band.zeta_threshold = 2.0 * sigma_f * sigma_c /
                          std::min(std::abs(band.m_lb), std::abs(band.m_ub));
  }
  return band;
}

// Default classification tolerance on the band inequalities.  At zeta = 0
// the spec'd scaling collapses to zero width, so a small absolute floor
// keeps the singular case detectable; compute_diagnostics passes a
// trajectory-scaled tolerance instead.
inline double default_classification_tol(const SingularBand& band,
                                         double zeta) {
  if (zeta > 0.0) {
    return 1e-3 * zeta *
           (1.0 + std::max(std::abs(band.m_lb), std::abs(band.m_ub)));
  }
  return 1e-3;
}

inline constexpr double kBangTol = 1e-2;  // u within this of {0,1} is a bang

// Case of one step given its switching value mu, the band, and the control
// value.  tol < 0 selects default_classification_tol.
inline StepCase classify_step(double mu, const SingularBand& band,
                              double zeta, double u, double tol = -1.0) {
  if (tol < 0.0) tol = default_classification_tol(band, zeta);
  const double lower = zeta * band.m_lb;
  const double upper = zeta * band.m_ub;
  if (mu >= lower - tol && mu <= upper + tol) return StepCase::Singular;
  if (mu <= lower + tol && u <= kBangTol) return StepCase::BangZero;
  if (mu >= upper - tol && u >= 1.0 - kBangTol) return StepCase::BangOne;
  return StepCase::Violated;
}

// Analytic singular control u* = (dq)^{-1}(mu / zeta); raises
// SubgradientRangeError when mu/zeta falls outside the band (the instant is
// a bang, not singular).
inline double analytic_singular_u(const Eigen::VectorXcd& x,
                                  const Eigen::VectorXcd& lam,
                                  const HamiltonianPair& ham, NormKind kind,
                                  double zeta) {
  if (!(zeta > 0.0)) {
    throw ConfigError("analytic singular control requires zeta > 0");
  }
  const double mu = switching_mu(x, lam, ham.f());
  return q_subgradient_inverse(ham, mu / zeta, kind);
}

// Full a-posteriori optimality diagnostics along a protocol.
struct PmpDiagnostics {
  Eigen::VectorXd mu;                   // K+1 node values
  Eigen::VectorXd control_hamiltonian;  // K+1 node values
  Eigen::VectorXd mu_step;              // K per-step values (node averages)
  std::vector<StepCase> case_labels;    // K
  double singular_fraction = 0.0;
  SingularBand band;
  double zeta = 0.0;
  double classification_tol = 0.0;

  double hamiltonian_spread() const {
    return control_hamiltonian.maxCoeff() - control_hamiltonian.minCoeff();
  }
  double hamiltonian_mean() const { return control_hamiltonian.mean(); }
};

// Recomputes trajectory and co-state for the protocol and evaluates the
// switching function, control Hamiltonian, and per-step case labels.
//
// Classification uses the step-averaged switching value (mu_k + mu_{k+1})/2:
// the exact derivative of the discrete terminal cost with respect to u_k is
// -dt times the average of mu over step k, so the average is the quantity
// that a converged discrete optimum drives into the band, while node values
// carry an O(dt) offset.
inline PmpDiagnostics compute_diagnostics(const HamiltonianPair& ham,
                                          const Protocol& protocol,
                                          const CostSpec& spec) {
  const int n_steps = protocol.grid.n_steps;
  const ProtocolPropagator prop(ham, protocol);
  const detail::ForwardCache fwd =
      detail::forward_cached(prop, ground_state_of_B(ham));
  Eigen::MatrixXcd costates;
  detail::gradient_from(prop, fwd, spec, &costates);

  PmpDiagnostics diag;
  diag.zeta = spec.zeta;
  diag.band = singular_band(ham, spec.norm, spec.zeta);
  diag.mu.resize(n_steps + 1);
  diag.control_hamiltonian.resize(n_steps + 1);
  diag.mu_step.resize(n_steps);
  diag.case_labels.resize(n_steps);

  for (int k = 0; k <= n_steps; ++k) {
    const Eigen::VectorXcd x = fwd.states.col(k);
    const Eigen::VectorXcd lam = costates.col(k);
    diag.mu(k) = switching_mu(x, lam, ham.f());
    const double u = protocol.values(std::min(k, n_steps - 1));
    diag.control_hamiltonian(k) = control_hamiltonian(x, lam, u, ham, spec);
  }

  if (spec.zeta > 0.0) {
    diag.classification_tol = default_classification_tol(diag.band, spec.zeta);
  } else {
    // Scale the zeta = 0 tolerance with the attainable magnitude of mu:
    // |mu| <= 2 sigma_max(F) |lambda| |x|.
    const EigSystem eig_f = eig_sym(ham.f());
    const double sigma_f = std::max(std::abs(eig_f.evals(0)),
                                    std::abs(eig_f.evals(eig_f.evals.size() - 1)));
    const double lam_norm = costates.col(n_steps).norm();
    diag.classification_tol = 1e-3 * (1.0 + lam_norm * sigma_f);
  }

  int n_singular = 0;
  for (int k = 0; k < n_steps; ++k) {
    diag.mu_step(k) = 0.5 * (diag.mu(k) + diag.mu(k + 1));
    diag.case_labels[k] =
        classify_step(diag.mu_step(k), diag.band, spec.zeta,
                      protocol.values(k), diag.classification_tol);
    if (diag.case_labels[k] == StepCase::Singular) ++n_singular;
  }
  diag.singular_fraction =
      static_cast<double>(n_singular) / static_cast<double>(n_steps);
  return diag;
}

}  // namespace qanneal
