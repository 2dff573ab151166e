#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qanneal/errors.hpp"
#include "qanneal/linalg.hpp"

namespace qanneal {

// Dense 2^N x 2^N matrices; keeps the worst case around ~134 MB per matrix.
inline constexpr int kMaxQubits = 12;

// Relative tolerance used to cluster numerically degenerate extreme
// eigenvalues before forming spectral subgradients.
inline constexpr double kEigClusterTolRel = 1e-9;

// An Ising problem instance: N qubits coupled by a symmetric matrix J.
// Diagonal entries of J are ignored (self-couplings only shift the cost by
// a constant and change neither the ground state nor the protocol).
struct IsingModel {
  int n_qubits = 0;
  Eigen::MatrixXd couplings;
};

// Which matrix norm defines the control-strength measure q(u) = |H(u)|, and
// whether the global-phase-reduced variant min_phi |H(u) + phi*I| is used.
struct NormKind {
  enum class Family { Spectral, Frobenius };
  Family family = Family::Spectral;
  bool phase_reduced = false;

  static NormKind spectral(bool phase_reduced = false) {
    return NormKind{Family::Spectral, phase_reduced};
  }
  static NormKind frobenius(bool phase_reduced = false) {
    return NormKind{Family::Frobenius, phase_reduced};
  }
};

// Closed interval of attainable derivative values d q / d u at a point.
// Collapses to a single value wherever q is differentiable.
struct SubgradientInterval {
  double lo = 0.0;
  double hi = 0.0;
  double midpoint() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
};

// The mixer/problem pair B, C with F = B - C, all real symmetric in the
// computational basis (C diagonal).  Frobenius inner products of the pair
// are cached so that |u B + (1-u) C|_F and its derivative are closed-form.
class HamiltonianPair {
 public:
  static HamiltonianPair from_matrices(Eigen::MatrixXd b, Eigen::MatrixXd c) {
    if (b.rows() != b.cols() || c.rows() != c.cols() || b.rows() != c.rows()) {
      throw ConfigError("hamiltonian matrices must be square and same size");
    }
    const double sym_tol = 1e-12;
    if ((b - b.transpose()).cwiseAbs().maxCoeff() > sym_tol) {
      throw ConfigError("mixer matrix B is not symmetric");
    }
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > sym_tol) {
      throw ConfigError("problem matrix C is not symmetric");
    }
    Eigen::MatrixXd c_offdiag = c;
    c_offdiag.diagonal().setZero();
    if (c_offdiag.cwiseAbs().maxCoeff() > sym_tol) {
      throw ConfigError("problem matrix C must be diagonal in the computational basis");
    }
    HamiltonianPair pair;
    pair.b_ = std::move(b);
    pair.c_ = std::move(c);
    pair.f_ = pair.b_ - pair.c_;
    pair.c_diag_ = pair.c_.diagonal();
    const double d = static_cast<double>(pair.b_.rows());
    pair.gram_bb_ = pair.b_.squaredNorm();
    pair.gram_cc_ = pair.c_.squaredNorm();
    // <B, C>_F with C diagonal reduces to a diagonal dot product.
    pair.gram_bc_ = pair.b_.diagonal().dot(pair.c_diag_);
    pair.trace_b_ = pair.b_.trace();
    pair.trace_c_ = pair.c_.trace();
    pair.gram_bb0_ = pair.gram_bb_ - pair.trace_b_ * pair.trace_b_ / d;
    pair.gram_cc0_ = pair.gram_cc_ - pair.trace_c_ * pair.trace_c_ / d;
    pair.gram_bc0_ = pair.gram_bc_ - pair.trace_b_ * pair.trace_c_ / d;
    return pair;
  }

  const Eigen::MatrixXd& b() const { return b_; }
  const Eigen::MatrixXd& c() const { return c_; }
  const Eigen::MatrixXd& f() const { return f_; }
  const Eigen::VectorXd& c_diagonal() const { return c_diag_; }
  Eigen::Index dim() const { return b_.rows(); }

  // Frobenius Gram data: plain <.,.>_F and the traceless (phase-reduced)
  // variant <A - (tr A / d) I, ...>_F.
  double gram_bb(bool phase_reduced) const {
    return phase_reduced ? gram_bb0_ : gram_bb_;
  }
  double gram_bc(bool phase_reduced) const {
    return phase_reduced ? gram_bc0_ : gram_bc_;
  }
  double gram_cc(bool phase_reduced) const {
    return phase_reduced ? gram_cc0_ : gram_cc_;
  }
  double trace_b() const { return trace_b_; }
  double trace_c() const { return trace_c_; }

 private:
  Eigen::MatrixXd b_, c_, f_;
  Eigen::VectorXd c_diag_;
  double gram_bb_ = 0, gram_bc_ = 0, gram_cc_ = 0;
  double gram_bb0_ = 0, gram_bc0_ = 0, gram_cc0_ = 0;
  double trace_b_ = 0, trace_c_ = 0;
};

// B = -sum_i sigma_i^x, C = sum_{i<j} 2 J_ij sigma_i^z sigma_j^z as dense
// matrices over the computational basis.  Qubit i maps to bit (N-1-i) of
// the basis index; bit value 0 encodes spin +1.
inline HamiltonianPair build_ising(const IsingModel& model) {
  const int n = model.n_qubits;
  if (n < 1) throw ConfigError("n_qubits must be >= 1");
  if (n > kMaxQubits) {
    throw ConfigError("n_qubits exceeds the dense-matrix memory budget (max " +
                      std::to_string(kMaxQubits) + ")");
  }
  if (model.couplings.rows() != n || model.couplings.cols() != n) {
    throw ConfigError("couplings matrix must be n_qubits x n_qubits");
  }
  if ((model.couplings - model.couplings.transpose()).cwiseAbs().maxCoeff() >
      1e-12) {
    throw ConfigError("couplings matrix must be symmetric");
  }
  const Eigen::Index d = Eigen::Index(1) << n;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index m = 0; m < d; ++m) {
    for (int i = 0; i < n; ++i) {
      const Eigen::Index flipped = m ^ (Eigen::Index(1) << (n - 1 - i));
      b(m, flipped) = -1.0;
    }
    double diag = 0.0;
    for (int i = 0; i < n; ++i) {
      const double si = ((m >> (n - 1 - i)) & 1) ? -1.0 : 1.0;
      for (int j = i + 1; j < n; ++j) {
        const double sj = ((m >> (n - 1 - j)) & 1) ? -1.0 : 1.0;
        diag += 2.0 * model.couplings(i, j) * si * sj;
      }
    }
    c(m, m) = diag;
  }
  return HamiltonianPair::from_matrices(std::move(b), std::move(c));
}

// Ground state of the mixer: the uniform superposition with eigenvalue -N.
// The eigen-relation is verified so misuse on a pair whose B is not the
// standard mixer fails loudly instead of silently returning a wrong state.
inline Eigen::VectorXcd ground_state_of_B(const HamiltonianPair& ham) {
  const Eigen::Index d = ham.dim();
  const double n_qubits = std::log2(static_cast<double>(d));
  Eigen::VectorXcd state = Eigen::VectorXcd::Constant(
      d, Complex(1.0 / std::sqrt(static_cast<double>(d)), 0.0));
  const Eigen::VectorXcd residual =
      real_mat_apply(ham.b(), state) + n_qubits * state;
  if (residual.norm() > 1e-10) {
    throw NumericalError(
        "uniform superposition is not the mixer ground state for this pair");
  }
  return state;
}

inline void check_control_value(double u) {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw ConfigError("control value u must lie in [0, 1]");
  }
}

// H(u) = u B + (1-u) C.
inline Eigen::MatrixXd hamiltonian_at(const HamiltonianPair& ham, double u) {
  check_control_value(u);
  return u * ham.b() + (1.0 - u) * ham.c();
}

namespace detail {

// Spectral-norm measures from precomputed eigenvalues of H(u) (ascending).
inline double q_spectral_from_evals(const Eigen::VectorXd& evals,
                                    bool phase_reduced) {
  const double lo = evals(0);
  const double hi = evals(evals.size() - 1);
  return phase_reduced ? 0.5 * (hi - lo) : std::max(hi, -lo);
}

// Frobenius-norm measure from the cached Gram coefficients:
// q(u)^2 = u^2 <B,B> + 2 u (1-u) <B,C> + (1-u)^2 <C,C>.
inline double q_frobenius(const HamiltonianPair& ham, double u,
                          bool phase_reduced) {
  const double bb = ham.gram_bb(phase_reduced);
  const double bc = ham.gram_bc(phase_reduced);
  const double cc = ham.gram_cc(phase_reduced);
  const double sq =
      u * u * bb + 2.0 * u * (1.0 - u) * bc + (1.0 - u) * (1.0 - u) * cc;
  return std::sqrt(std::max(sq, 0.0));
}

// Eigenvalue range of V^T F V on the span of the columns listed for one
// extreme cluster.  A single-vector cluster reduces to <v|F|v>.
inline SubgradientInterval projected_range(const Eigen::MatrixXd& evecs,
                                           Eigen::Index first,
                                           Eigen::Index count,
                                           const Eigen::MatrixXd& f) {
  const auto v = evecs.middleCols(first, count);
  if (count == 1) {
    const double val = v.col(0).dot(f * v.col(0));
    return SubgradientInterval{val, val};
  }
  const Eigen::MatrixXd projected = v.transpose() * f * v;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(projected);
  return SubgradientInterval{solver.eigenvalues()(0),
                             solver.eigenvalues()(count - 1)};
}

// Subdifferential of the spectral measure at u from the eigensystem of
// H(u).  The subdifferential of the extreme-eigenvalue map restricted to
// the line u -> H(u) is the eigenvalue range of V^T F V over the active
// (tolerance-clustered) eigenspace; the lower branch -lambda_min enters
// with reversed sign, and a |lambda_max| = |lambda_min| tie takes the
// convex hull of both signed intervals.
inline SubgradientInterval spectral_subgradient(const EigSystem& eig,
                                                const Eigen::MatrixXd& f,
                                                bool phase_reduced) {
  const Eigen::Index d = eig.evals.size();
  const double lo = eig.evals(0);
  const double hi = eig.evals(d - 1);
  const double tol = kEigClusterTolRel * std::max(std::abs(lo), std::abs(hi));
  Eigen::Index n_bottom = 1;
  while (n_bottom < d && eig.evals(n_bottom) - lo <= tol) ++n_bottom;
  Eigen::Index n_top = 1;
  while (n_top < d && hi - eig.evals(d - 1 - n_top) <= tol) ++n_top;

  const auto top_range = [&] {
    return projected_range(eig.evecs, d - n_top, n_top, f);
  };
  const auto bottom_range = [&] {
    return projected_range(eig.evecs, 0, n_bottom, f);
  };

  if (phase_reduced) {
    // d/du (lambda_max - lambda_min)/2: Minkowski difference of the two
    // eigenvalue-range intervals, halved.
    const SubgradientInterval t = top_range();
    const SubgradientInterval b = bottom_range();
    return SubgradientInterval{0.5 * (t.lo - b.hi), 0.5 * (t.hi - b.lo)};
  }
  if (hi - (-lo) > tol) return top_range();
  if ((-lo) - hi > tol) {
    const SubgradientInterval b = bottom_range();
    return SubgradientInterval{-b.hi, -b.lo};
  }
  const SubgradientInterval t = top_range();
  const SubgradientInterval b = bottom_range();
  return SubgradientInterval{std::min(t.lo, -b.hi), std::max(t.hi, -b.lo)};
}

}  // namespace detail

// q(u) = |H(u)| in the selected norm; phase-reduced variants quotient out
// the best identity shift (spectral: half the spectral spread; Frobenius:
// norm of the traceless part).
inline double q_value(const HamiltonianPair& ham, double u, NormKind kind) {
  check_control_value(u);
  if (kind.family == NormKind::Family::Frobenius) {
    return detail::q_frobenius(ham, u, kind.phase_reduced);
  }
  const EigSystem eig = eig_sym(hamiltonian_at(ham, u));
  return detail::q_spectral_from_evals(eig.evals, kind.phase_reduced);
}

// Subdifferential of q at u as a closed interval [lo, hi].
inline SubgradientInterval q_subgradient(const HamiltonianPair& ham, double u,
                                         NormKind kind) {
  check_control_value(u);
  if (kind.family == NormKind::Family::Frobenius) {
    const double q = detail::q_frobenius(ham, u, kind.phase_reduced);
    const double scale =
        std::sqrt(std::max(ham.gram_bb(kind.phase_reduced) +
                               ham.gram_cc(kind.phase_reduced),
                           0.0));
    if (q <= 1e-14 * std::max(scale, 1.0)) {
      throw NumericalError(
          "Frobenius subgradient undefined at |H(u)| = 0 "
          "(subdifferential is a ball, not an interval)");
    }
    // d q / d u = <H(u), F>_F / |H(u)|_F, from the quadratic form of q^2.
    const double bb = ham.gram_bb(kind.phase_reduced);
    const double bc = ham.gram_bc(kind.phase_reduced);
    const double cc = ham.gram_cc(kind.phase_reduced);
    const double slope = (u * bb + (1.0 - 2.0 * u) * bc - (1.0 - u) * cc) / q;
    return SubgradientInterval{slope, slope};
  }
  const EigSystem eig = eig_sym(hamiltonian_at(ham, u));
  return detail::spectral_subgradient(eig, ham.f(), kind.phase_reduced);
}

// Inverse of the subgradient map: a u with target in dq(u), by bisection on
// the monotone endpoint functions of the subdifferential.  When a flat
// stretch of dq makes the preimage an interval, returns its midpoint and
// (optionally) reports the interval width.  Targets outside the attainable
// band [max dq(0), min dq(1)] raise SubgradientRangeError.
inline double q_subgradient_inverse(const HamiltonianPair& ham, double target,
                                    NormKind kind,
                                    double* preimage_width = nullptr) {
  const double m_lb = q_subgradient(ham, 0.0, kind).hi;
  const double m_ub = q_subgradient(ham, 1.0, kind).lo;
  const double band_slack =
      1e-12 * std::max({std::abs(m_lb), std::abs(m_ub), 1.0});
  if (target < m_lb - band_slack || target > m_ub + band_slack) {
    throw SubgradientRangeError(
        "inverse-subgradient target lies outside the band [max dq(0), min dq(1)]");
  }
  target = std::clamp(target, m_lb, m_ub);

  // u_left  = inf { u : max dq(u) >= target }  (predicate false -> true)
  // u_right = sup { u : min dq(u) <= target }  (predicate true -> false)
  // Both exist because subgradient endpoints are monotone in u.
  const int iters = 60;  // 2^-60 << the 1e-10 tolerance on u
  double left = 1.0;
  {
    double a = 0.0, b = 1.0;
    if (q_subgradient(ham, 0.0, kind).hi >= target) {
      left = 0.0;
    } else {
      for (int i = 0; i < iters; ++i) {
        const double mid = 0.5 * (a + b);
        if (q_subgradient(ham, mid, kind).hi >= target) {
          b = mid;
        } else {
          a = mid;
        }
      }
      left = b;
    }
  }
  double right = 0.0;
  {
    double a = 0.0, b = 1.0;
    if (q_subgradient(ham, 1.0, kind).lo <= target) {
      right = 1.0;
    } else {
      for (int i = 0; i < iters; ++i) {
        const double mid = 0.5 * (a + b);
        if (q_subgradient(ham, mid, kind).lo <= target) {
          a = mid;
        } else {
          b = mid;
        }
      }
      right = a;
    }
  }
  if (preimage_width != nullptr) *preimage_width = std::max(0.0, right - left);
  return std::clamp(0.5 * (left + right), 0.0, 1.0);
}

}  // namespace qanneal
