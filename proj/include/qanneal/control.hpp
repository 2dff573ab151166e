#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "qanneal/dynamics.hpp"
#include "qanneal/errors.hpp"
#include "qanneal/linalg.hpp"
#include "qanneal/operators.hpp"
#include "qanneal/rng.hpp"

namespace qanneal {

// Weighted objective <x(T)|C|x(T)> + zeta * integral of |H(u)| d tau.
struct CostSpec {
  double zeta = 0.0;
  NormKind norm;

  CostSpec() = default;
  CostSpec(double zeta_, NormKind norm_) : zeta(zeta_), norm(norm_) {
    if (!(zeta >= 0.0)) throw ConfigError("zeta must be >= 0");
  }
};

// Co-state history: column k holds |lambda(tau_k)>, with the terminal
// condition lambda(T) = -C x(T) and lambda_k = U_k^dag lambda_{k+1}.
struct AdjointTrajectory {
  Eigen::MatrixXcd costates;  // d x (K+1)

  Eigen::VectorXcd terminal() const {
    return costates.col(costates.cols() - 1);
  }
};

struct OptimizeReport {
  Protocol protocol;
  double cost_terminal = 0.0;
  double cost_regularizer = 0.0;
  int iterations = 0;
  double gradient_norm_final = 0.0;
  bool converged = false;

  double cost_total(double zeta) const {
    return cost_terminal + zeta * cost_regularizer;
  }
};

struct OptimizeOptions {
  int max_iters = 5000;
  double tol = 1e-6;           // threshold on |u - clip(u - g)|_2
  int n_random_starts = 5;
  bool include_ramp = true;
  std::uint64_t seed = 0;
  double alpha0 = 1.0;         // initial line-search step
};

// Alternating bang-bang schedule; segment p applies u = leading_value for
// even p and 1 - leading_value for odd p, for durations[p] time units.
struct QaoaSchedule {
  int n_bangs = 0;
  Eigen::VectorXd durations;
  int leading_value = 1;

  QaoaSchedule() = default;
  QaoaSchedule(Eigen::VectorXd durations_, int leading_value_, double horizon)
      : n_bangs(static_cast<int>(durations_.size())),
        durations(std::move(durations_)),
        leading_value(leading_value_) {
    if (n_bangs < 1) throw ConfigError("schedule needs >= 1 segment");
    if (leading_value != 0 && leading_value != 1) {
      throw ConfigError("leading_value must be 0 or 1");
    }
    for (Eigen::Index p = 0; p < durations.size(); ++p) {
      if (durations(p) < -1e-12 * std::max(horizon, 1.0)) {
        throw ConfigError("segment durations must be >= 0");
      }
      durations(p) = std::max(durations(p), 0.0);
    }
    const double total = durations.sum();
    if (std::abs(total - horizon) > 1e-9 * std::max(horizon, 1.0)) {
      throw ConfigError("segment durations must sum to the horizon");
    }
    durations *= horizon / total;  // make the sum exact
  }

  double u_of_segment(int p) const {
    return (p % 2 == 0) ? static_cast<double>(leading_value)
                        : static_cast<double>(1 - leading_value);
  }
};

// (terminal, regularizer) for the standard initial state (mixer ground
// state).  The pair shares one set of per-step eigendecompositions.
inline std::pair<double, double> total_cost(const HamiltonianPair& ham,
                                            const Protocol& protocol,
                                            const CostSpec& spec) {
  const ProtocolPropagator prop(ham, protocol);
  const Eigen::VectorXcd x0 = ground_state_of_B(ham);
  const Eigen::VectorXcd xT = prop.final_state(x0, Eigen::VectorXd());
  return {terminal_cost_of(ham, xT), prop.regularizer(spec.norm)};
}

namespace detail {

// Forward pass retaining both the node states and their step-eigenbasis
// coordinates b_k = V_k^T x_k (reused by the exact gradient).
struct ForwardCache {
  Eigen::MatrixXcd states;      // d x (K+1)
  Eigen::MatrixXcd states_eig;  // d x K
  double terminal = 0.0;
};

inline ForwardCache forward_cached(const ProtocolPropagator& prop,
                                   const Eigen::VectorXcd& initial) {
  const Eigen::Index d = prop.ham().dim();
  const int n_steps = prop.n_steps();
  const double dt = prop.dt();
  ForwardCache fwd;
  fwd.states.resize(d, n_steps + 1);
  fwd.states_eig.resize(d, n_steps);
  fwd.states.col(0) = initial;
  Eigen::VectorXcd state = initial;
  for (int k = 0; k < n_steps; ++k) {
    const EigSystem& eig = prop.step_eigsys(k);
    Eigen::VectorXcd coords = real_mat_apply_transposed(eig.evecs, state);
    fwd.states_eig.col(k) = coords;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double theta = dt * eig.evals(i);
      coords(i) *= Complex(std::cos(theta), -std::sin(theta));
    }
    state = real_mat_apply(eig.evecs, coords);
    fwd.states.col(k + 1) = state;
  }
  fwd.terminal = terminal_cost_of(prop.ham(), state);
  return fwd;
}

// Exact derivative of the terminal cost with respect to each u_k, plus the
// regularizer subgradient term.  Derivation: with U_k = exp(-i dt H(u_k)),
// d<x_T|C|x_T>/du_k = 2 Re <y_{k+1}| dU_k/du_k |x_k> where y_{k+1} is the
// pullback of C x_T to node k+1 (equivalently -lambda_{k+1}).  In the step
// eigenbasis, dU/du has entries Gamma_pq * (V^T F V)_pq with the divided
// difference Gamma_pq = -i dt e^{-i(theta_p+theta_q)/2} sinc(delta_pq),
// theta = dt * eigenvalue, delta = (theta_p - theta_q)/2.  Optionally
// records the co-states lambda_k = -y_k.
inline Eigen::VectorXd gradient_from(const ProtocolPropagator& prop,
                                     const ForwardCache& fwd,
                                     const CostSpec& spec,
                                     Eigen::MatrixXcd* costates = nullptr) {
  const Eigen::Index d = prop.ham().dim();
  const int n_steps = prop.n_steps();
  const double dt = prop.dt();
  const Eigen::MatrixXd& f = prop.ham().f();
  Eigen::VectorXd grad(n_steps);

  Eigen::VectorXcd ybar =
      diag_apply(prop.ham().c_diagonal(), fwd.states.col(n_steps));
  if (costates != nullptr) {
    costates->resize(d, n_steps + 1);
    costates->col(n_steps) = -ybar;
  }
  Eigen::MatrixXd sinc_matrix(d, d);
  Eigen::VectorXd half_sin(d), half_cos(d), theta(d);
  for (int k = n_steps - 1; k >= 0; --k) {
    const EigSystem& eig = prop.step_eigsys(k);
    const Eigen::VectorXcd a = real_mat_apply_transposed(eig.evecs, ybar);
    const Eigen::VectorXcd& b = fwd.states_eig.col(k);

    for (Eigen::Index i = 0; i < d; ++i) {
      theta(i) = dt * eig.evals(i);
      half_sin(i) = std::sin(0.5 * theta(i));
      half_cos(i) = std::cos(0.5 * theta(i));
    }
    // sinc(delta_pq) with sin(delta_pq) expanded in precomputed half-angle
    // terms; the series branch keeps tiny eigenvalue gaps stable.
    for (Eigen::Index p = 0; p < d; ++p) {
      for (Eigen::Index q = 0; q < d; ++q) {
        const double delta = 0.5 * (theta(p) - theta(q));
        if (std::abs(delta) < 1e-7) {
          sinc_matrix(p, q) = 1.0 - delta * delta / 6.0;
        } else {
          sinc_matrix(p, q) =
              (half_sin(p) * half_cos(q) - half_cos(p) * half_sin(q)) / delta;
        }
      }
    }
    const Eigen::MatrixXd f_eig =
        eig.evecs.transpose() * (f * eig.evecs);
    const Eigen::MatrixXd weighted = sinc_matrix.cwiseProduct(f_eig);

    Eigen::VectorXcd b_phased(d), a_phased_conj(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const Complex half_phase(half_cos(i), -half_sin(i));  // e^{-i theta/2}
      b_phased(i) = b(i) * half_phase;
      a_phased_conj(i) = std::conj(a(i)) * half_phase;
    }
    const Eigen::VectorXcd wb = real_mat_apply(weighted, b_phased);
    const Complex s = a_phased_conj.cwiseProduct(wb).sum();
    grad(k) = 2.0 * dt * s.imag();

    if (spec.zeta > 0.0) {
      grad(k) += spec.zeta * dt *
                 prop.subgradient_at_step(k, spec.norm).midpoint();
    }

    // y_k = U_k^dag y_{k+1} = V e^{+i theta} V^T y_{k+1}.
    Eigen::VectorXcd coords = a;
    for (Eigen::Index i = 0; i < d; ++i) {
      coords(i) *= Complex(std::cos(theta(i)), std::sin(theta(i)));
    }
    ybar = real_mat_apply(eig.evecs, coords);
    if (costates != nullptr) costates->col(k) = -ybar;
  }
  return grad;
}

}  // namespace detail

// Back-propagated co-state for a given forward trajectory: lambda(T) =
// -C x(T), earlier nodes via the adjoint of each step unitary.
inline AdjointTrajectory backward_costate(const HamiltonianPair& ham,
                                          const Protocol& protocol,
                                          const Trajectory& trajectory) {
  const int n_steps = protocol.grid.n_steps;
  if (trajectory.states.cols() != n_steps + 1) {
    throw ConfigError("trajectory does not match the protocol grid");
  }
  const double dt = protocol.grid.dt();
  AdjointTrajectory adjoint;
  adjoint.costates.resize(ham.dim(), n_steps + 1);
  Eigen::VectorXcd lambda =
      -diag_apply(ham.c_diagonal(), trajectory.final_state());
  adjoint.costates.col(n_steps) = lambda;
  Eigen::VectorXcd scratch(ham.dim());
  for (int k = n_steps - 1; k >= 0; --k) {
    const EigSystem eig = eig_sym(hamiltonian_at(ham, protocol.values(k)));
    // Applying the step with a negated time scale realizes U_k^dag exactly.
    detail::apply_step(eig, -dt, lambda, scratch);
    adjoint.costates.col(k) = lambda;
  }
  return adjoint;
}

// Analytic gradient of the total cost with respect to the per-step control
// values, for the standard initial state.
inline Eigen::VectorXd gradient(const HamiltonianPair& ham,
                                const Protocol& protocol,
                                const CostSpec& spec) {
  const ProtocolPropagator prop(ham, protocol);
  const detail::ForwardCache fwd =
      detail::forward_cached(prop, ground_state_of_B(ham));
  return detail::gradient_from(prop, fwd, spec);
}

namespace detail {

inline Eigen::VectorXd clip01(const Eigen::VectorXd& u) {
  return u.cwiseMax(0.0).cwiseMin(1.0);
}

struct PgdOutcome {
  Eigen::VectorXd u;
  double terminal = 0.0;
  double regularizer = 0.0;
  double total = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double gradient_norm_final = 0.0;
  bool converged = false;
  bool usable = false;
};

// Projected gradient descent with Armijo backtracking on [0,1]^K.
inline PgdOutcome projected_gradient_descent(const HamiltonianPair& ham,
                                             const TimeGrid& grid,
                                             const Eigen::VectorXd& start,
                                             const CostSpec& spec,
                                             const OptimizeOptions& options,
                                             const Eigen::VectorXcd& x0) {
  constexpr double kArmijo = 1e-4;
  constexpr double kShrink = 0.5;
  constexpr double kAlphaMin = 1e-14;
  constexpr double kAlphaMax = 1e6;

  struct Eval {
    std::unique_ptr<ProtocolPropagator> prop;
    ForwardCache fwd;
    double regularizer = 0.0;
    double total = 0.0;
  };
  const auto evaluate = [&](const Eigen::VectorXd& u) {
    Eval e;
    e.prop = std::make_unique<ProtocolPropagator>(ham, Protocol(grid, u));
    e.fwd = forward_cached(*e.prop, x0);
    e.regularizer = e.prop->regularizer(spec.norm);
    e.total = e.fwd.terminal + spec.zeta * e.regularizer;
    return e;
  };

  PgdOutcome out;
  out.u = clip01(start);
  Eval cur = evaluate(out.u);
  if (!std::isfinite(cur.total)) return out;  // unusable start

  double alpha = options.alpha0;
  for (int it = 0; it < options.max_iters; ++it) {
    const Eigen::VectorXd g = gradient_from(*cur.prop, cur.fwd, spec);
    out.gradient_norm_final = (out.u - clip01(out.u - g)).norm();
    if (out.gradient_norm_final < options.tol) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    bool first_try = true;
    while (alpha >= kAlphaMin) {
      const Eigen::VectorXd u_try = clip01(out.u - alpha * g);
      const double move = (out.u - u_try).norm();
      if (move == 0.0) break;  // box-stationary at this resolution
      Eval trial = evaluate(u_try);
      const double required_decrease = kArmijo * g.dot(out.u - u_try);
      if (std::isfinite(trial.total) &&
          trial.total <= cur.total - required_decrease) {
        out.u = u_try;
        cur = std::move(trial);
        if (first_try) alpha = std::min(alpha * 2.0, kAlphaMax);
        accepted = true;
        break;
      }
      first_try = false;
      alpha *= kShrink;
    }
    out.iterations = it + 1;
    if (!accepted) break;  // no admissible descent step found
  }
  out.terminal = cur.fwd.terminal;
  out.regularizer = cur.regularizer;
  out.total = cur.total;
  out.usable = std::isfinite(cur.total);
  return out;
}

}  // namespace detail

// Multi-start projected gradient descent over protocols.  Starts: the
// provided initialization (if any), the linear ramp, and n_random_starts
// i.i.d. uniform protocols with per-start seeds forked from options.seed.
// The best start wins by (total cost, then start order).
inline OptimizeReport optimize_protocol(const HamiltonianPair& ham,
                                        const CostSpec& spec,
                                        const TimeGrid& grid,
                                        const std::optional<Protocol>& init,
                                        const OptimizeOptions& options) {
  if (init.has_value() && init->grid.n_steps != grid.n_steps) {
    throw ConfigError("init protocol does not match the requested grid");
  }
  const Eigen::VectorXcd x0 = ground_state_of_B(ham);
  std::vector<Eigen::VectorXd> starts;
  if (init.has_value()) starts.push_back(init->values);
  if (options.include_ramp) {
    starts.push_back(Protocol::linear_ramp(grid).values);
  }
  for (int r = 0; r < options.n_random_starts; ++r) {
    Rng rng(fork_seed(options.seed, static_cast<std::uint64_t>(r)));
    Eigen::VectorXd u(grid.n_steps);
    for (int k = 0; k < grid.n_steps; ++k) u(k) = rng.uniform();
    starts.push_back(std::move(u));
  }
  if (starts.empty()) {
    throw ConfigError("optimize_protocol needs at least one start");
  }

  detail::PgdOutcome best;
  bool have_best = false;
  for (const Eigen::VectorXd& start : starts) {
    detail::PgdOutcome outcome = detail::projected_gradient_descent(
        ham, grid, start, spec, options, x0);
    if (!outcome.usable) continue;
    if (!have_best || outcome.total < best.total) {
      best = std::move(outcome);
      have_best = true;
    }
  }
  if (!have_best) {
    throw NumericalError(
        "optimization failed: every start produced a non-finite cost");
  }
  OptimizeReport report;
  report.protocol = Protocol(grid, best.u);
  report.cost_terminal = best.terminal;
  report.cost_regularizer = best.regularizer;
  report.iterations = best.iterations;
  report.gradient_norm_final = best.gradient_norm_final;
  report.converged = best.converged;
  return report;
}

// ---------------------------------------------------------------------------
// QAOA: alternating bang-bang protocols with segment durations as the
// optimization variables.

namespace detail {

// Shared eigendata for bang evolution: B diagonalized once; C is diagonal.
struct QaoaEvaluator {
  const HamiltonianPair* ham;
  EigSystem eig_b;
  Eigen::VectorXcd x0;

  explicit QaoaEvaluator(const HamiltonianPair& ham_)
      : ham(&ham_), eig_b(eig_sym(ham_.b())), x0(ground_state_of_B(ham_)) {}

  void apply_segment(double u, double duration, Eigen::VectorXcd& state,
                     Eigen::VectorXcd& scratch) const {
    if (u == 1.0) {
      apply_step(eig_b, duration, state, scratch);
    } else {
      const Eigen::VectorXd& c = ham->c_diagonal();
      for (Eigen::Index i = 0; i < state.size(); ++i) {
        const double theta = duration * c(i);
        state(i) *= Complex(std::cos(theta), -std::sin(theta));
      }
    }
  }

  // Node states x_0 .. x_P (segment boundaries).
  std::vector<Eigen::VectorXcd> forward(const QaoaSchedule& s) const {
    std::vector<Eigen::VectorXcd> nodes(s.n_bangs + 1);
    nodes[0] = x0;
    Eigen::VectorXcd state = x0;
    Eigen::VectorXcd scratch(state.size());
    for (int p = 0; p < s.n_bangs; ++p) {
      apply_segment(s.u_of_segment(p), s.durations(p), state, scratch);
      nodes[p + 1] = state;
    }
    return nodes;
  }

  double terminal(const QaoaSchedule& s) const {
    return terminal_cost_of(*ham, forward(s).back());
  }

  // d<x_T|C|x_T>/d duration_p = 2 Im <y_p|H_p|x_p> evaluated at the end of
  // segment p, with y the pullback of C x_T (extending a constant-generator
  // segment by d tau multiplies by e^{-i H_p d tau}).
  Eigen::VectorXd duration_gradient(const QaoaSchedule& s) const {
    const std::vector<Eigen::VectorXcd> nodes = forward(s);
    const int n = s.n_bangs;
    Eigen::VectorXd grad(n);
    Eigen::VectorXcd ybar = diag_apply(ham->c_diagonal(), nodes[n]);
    Eigen::VectorXcd scratch(ybar.size());
    for (int p = n - 1; p >= 0; --p) {
      const double u = s.u_of_segment(p);
      const Eigen::VectorXcd h_x =
          u == 1.0 ? real_mat_apply(ham->b(), nodes[p + 1])
                   : diag_apply(ham->c_diagonal(), nodes[p + 1]);
      grad(p) = 2.0 * ybar.dot(h_x).imag();
      // Pull ybar back through segment p (adjoint = negated duration).
      apply_segment_adjoint(u, s.durations(p), ybar, scratch);
    }
    return grad;
  }

  void apply_segment_adjoint(double u, double duration,
                             Eigen::VectorXcd& state,
                             Eigen::VectorXcd& scratch) const {
    if (u == 1.0) {
      apply_step(eig_b, -duration, state, scratch);
    } else {
      const Eigen::VectorXd& c = ham->c_diagonal();
      for (Eigen::Index i = 0; i < state.size(); ++i) {
        const double theta = duration * c(i);
        state(i) *= Complex(std::cos(theta), std::sin(theta));
      }
    }
  }
};

// Euclidean projection onto the scaled simplex {d >= 0, sum d = total}.
inline Eigen::VectorXd project_simplex(const Eigen::VectorXd& v,
                                       double total) {
  const Eigen::Index n = v.size();
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - total) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

}  // namespace detail

// Terminal cost of an alternating schedule with exact (continuous-time)
// segment durations.  Usable for any n_bangs >= 1.
inline double evaluate_qaoa_terminal(const HamiltonianPair& ham,
                                     const QaoaSchedule& schedule) {
  return detail::QaoaEvaluator(ham).terminal(schedule);
}

// Quantization of a schedule onto the grid: segment boundaries round to the
// nearest grid node, monotonically, with the last boundary pinned to K.
inline Protocol qaoa_to_protocol(const QaoaSchedule& schedule,
                                 const TimeGrid& grid) {
  const double dt = grid.dt();
  const int n_steps = grid.n_steps;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n_steps);
  double cumulative = 0.0;
  int previous_edge = 0;
  for (int p = 0; p < schedule.n_bangs; ++p) {
    cumulative += schedule.durations(p);
    int edge = (p == schedule.n_bangs - 1)
                   ? n_steps
                   : static_cast<int>(std::llround(cumulative / dt));
    edge = std::clamp(edge, previous_edge, n_steps);
    for (int k = previous_edge; k < edge; ++k) {
      u(k) = schedule.u_of_segment(p);
    }
    previous_edge = edge;
  }
  return Protocol(grid, std::move(u));
}

// Sensitivity of the terminal cost to each segment duration at fixed
// alternation pattern (the segment-sum constraint is handled by the caller's
// projection, so this is the unconstrained gradient).
inline Eigen::VectorXd qaoa_duration_gradient(const HamiltonianPair& ham,
                                              const QaoaSchedule& schedule) {
  return detail::QaoaEvaluator(ham).duration_gradient(schedule);
}

struct QaoaResult {
  OptimizeReport report;  // describes the grid-quantized protocol
  QaoaSchedule schedule;  // exact optimized durations
  double continuous_terminal = 0.0;  // terminal cost at the exact durations
};

// Projected gradient descent over segment durations on the simplex
// {d >= 0, sum d = T}, multi-started over both leading bang values and
// random duration splits.  The report describes the quantized protocol so
// its costs are directly comparable with continuous-protocol reports on the
// same grid.
inline QaoaResult optimize_qaoa(const HamiltonianPair& ham,
                                const TimeGrid& grid, int n_bangs,
                                const std::optional<QaoaSchedule>& init,
                                const OptimizeOptions& options) {
  if (n_bangs < 2) throw ConfigError("QAOA optimization needs n_bangs >= 2");
  const double horizon = grid.horizon;
  const detail::QaoaEvaluator evaluator(ham);

  constexpr double kArmijo = 1e-4;
  constexpr double kShrink = 0.5;
  constexpr double kAlphaMin = 1e-14;
  constexpr double kAlphaMax = 1e6;

  struct Candidate {
    QaoaSchedule schedule;
    double terminal = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    double gradient_norm_final = 0.0;
    bool converged = false;
    bool usable = false;
  };

  const auto run_start = [&](Eigen::VectorXd durations, int leading) {
    Candidate cand;
    durations = detail::project_simplex(durations, horizon);
    QaoaSchedule schedule(durations, leading, horizon);
    double cost = evaluator.terminal(schedule);
    if (!std::isfinite(cost)) return cand;
    double alpha = options.alpha0;
    for (int it = 0; it < options.max_iters; ++it) {
      const Eigen::VectorXd g = evaluator.duration_gradient(schedule);
      cand.gradient_norm_final =
          (schedule.durations -
           detail::project_simplex(schedule.durations - g, horizon))
              .norm();
      if (cand.gradient_norm_final < options.tol) {
        cand.converged = true;
        break;
      }
      bool accepted = false;
      bool first_try = true;
      while (alpha >= kAlphaMin) {
        const Eigen::VectorXd d_try = detail::project_simplex(
            schedule.durations - alpha * g, horizon);
        if ((schedule.durations - d_try).norm() == 0.0) break;
        QaoaSchedule trial(d_try, leading, horizon);
        const double trial_cost = evaluator.terminal(trial);
        const double required =
            kArmijo * g.dot(schedule.durations - d_try);
        if (std::isfinite(trial_cost) && trial_cost <= cost - required) {
          schedule = std::move(trial);
          cost = trial_cost;
          if (first_try) alpha = std::min(alpha * 2.0, kAlphaMax);
          accepted = true;
          break;
        }
        first_try = false;
        alpha *= kShrink;
      }
      cand.iterations = it + 1;
      if (!accepted) break;
    }
    cand.schedule = std::move(schedule);
    cand.terminal = cost;
    cand.usable = std::isfinite(cost);
    return cand;
  };

  std::vector<Candidate> candidates;
  int start_index = 0;
  for (int leading : {1, 0}) {
    if (init.has_value() && init->leading_value == leading &&
        init->n_bangs == n_bangs) {
      candidates.push_back(run_start(init->durations, leading));
    }
    candidates.push_back(run_start(
        Eigen::VectorXd::Constant(n_bangs, horizon / n_bangs), leading));
    for (int r = 0; r < options.n_random_starts; ++r) {
      Rng rng(fork_seed(options.seed,
                        0x51000000ULL + static_cast<std::uint64_t>(start_index++)));
      // Uniform point on the simplex via normalized exponentials.
      Eigen::VectorXd durations(n_bangs);
      for (int p = 0; p < n_bangs; ++p) {
        durations(p) = -std::log(1.0 - rng.uniform());
      }
      durations *= horizon / durations.sum();
      candidates.push_back(run_start(durations, leading));
    }
  }

  const Candidate* best = nullptr;
  for (const Candidate& cand : candidates) {
    if (!cand.usable) continue;
    if (best == nullptr || cand.terminal < best->terminal) best = &cand;
  }
  if (best == nullptr) {
    throw NumericalError(
        "QAOA optimization failed: every start produced a non-finite cost");
  }

  QaoaResult result;
  result.schedule = best->schedule;
  result.continuous_terminal = best->terminal;
  result.report.protocol = qaoa_to_protocol(best->schedule, grid);
  const auto [terminal, regularizer] =
      total_cost(ham, result.report.protocol, CostSpec(0.0, NormKind()));
  (void)regularizer;
  result.report.cost_terminal = terminal;
  result.report.cost_regularizer = 0.0;
  result.report.iterations = best->iterations;
  result.report.gradient_norm_final = best->gradient_norm_final;
  result.report.converged = best->converged;
  return result;
}

}  // namespace qanneal
