#include "qanneal/dynamics.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "qanneal/errors.hpp"
#include "qanneal/operators.hpp"
#include "qanneal/rng.hpp"
#include "test_util.hpp"

namespace {

using qanneal::Complex;
using qanneal::ConfigError;
using qanneal::ErrorSignal;
using qanneal::HamiltonianPair;
using qanneal::NormKind;
using qanneal::Protocol;
using qanneal::ProtocolPropagator;
using qanneal::TimeGrid;
using qanneal::Trajectory;

Protocol random_protocol(TimeGrid grid, std::uint64_t seed) {
  qanneal::Rng rng(seed);
  Eigen::VectorXd u(grid.n_steps);
  for (int k = 0; k < grid.n_steps; ++k) u(k) = rng.uniform();
  return Protocol(grid, u);
}

ErrorSignal random_signal(int n_sections, double bound, std::uint64_t seed) {
  qanneal::Rng rng(seed);
  Eigen::VectorXd amp(n_sections);
  for (int s = 0; s < n_sections; ++s) {
    amp(s) = bound * rng.uniform_symmetric();
  }
  return ErrorSignal(amp, bound);
}

TEST(TimeGrid, Validation) {
  EXPECT_THROW(TimeGrid(0.0, 10), ConfigError);
  EXPECT_THROW(TimeGrid(-1.0, 10), ConfigError);
  EXPECT_THROW(TimeGrid(1.0, 0), ConfigError);
  const TimeGrid grid(2.0, 8);
  EXPECT_DOUBLE_EQ(grid.dt(), 0.25);
  EXPECT_DOUBLE_EQ(grid.time_at(3), 0.75);
}

TEST(Protocol, ValidationAndRamp) {
  const TimeGrid grid(1.0, 4);
  EXPECT_THROW(Protocol(grid, Eigen::VectorXd::Zero(3)), ConfigError);
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(4);
  bad(2) = 1.5;
  EXPECT_THROW(Protocol(grid, bad), ConfigError);
  bad(2) = -0.1;
  EXPECT_THROW(Protocol(grid, bad), ConfigError);
  const Protocol ramp = Protocol::linear_ramp(grid);
  EXPECT_DOUBLE_EQ(ramp.values(0), 1.0);
  EXPECT_DOUBLE_EQ(ramp.values(1), 0.75);
  EXPECT_DOUBLE_EQ(ramp.values(3), 0.25);
}

TEST(ErrorSignal, ValidationScalingResampling) {
  Eigen::VectorXd amp(3);
  amp << 0.1, -0.2, 0.05;
  EXPECT_THROW(ErrorSignal(amp, 0.15), ConfigError);
  const ErrorSignal signal(amp, 0.2);
  const ErrorSignal doubled = signal.scaled(2.0);
  EXPECT_DOUBLE_EQ(doubled.amplitudes(1), -0.4);
  EXPECT_DOUBLE_EQ(doubled.bound, 0.4);
  // 10 steps over 3 sections: boundaries at floor(k*3/10).
  const Eigen::VectorXd resampled = signal.resample(10);
  Eigen::VectorXd expected(10);
  expected << 0.1, 0.1, 0.1, 0.1, -0.2, -0.2, -0.2, 0.05, 0.05, 0.05;
  EXPECT_LT((resampled - expected).cwiseAbs().maxCoeff(), 1e-15);
  // Resampling onto the native grid is the identity.
  EXPECT_LT((signal.resample(3) - amp).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Propagate, SingleQubitClosedForm) {
  // H = -sigma^x constant; exp(+i T sigma^x)(1,0) = (cos T, i sin T).
  Eigen::MatrixXd b(2, 2), c(2, 2);
  b << 0.0, -1.0, -1.0, 0.0;
  c.setZero();
  const auto ham = HamiltonianPair::from_matrices(b, c);
  const double horizon = 0.83;
  const Protocol protocol = Protocol::constant(TimeGrid(horizon, 7), 1.0);
  Eigen::VectorXcd initial(2);
  initial << 1.0, 0.0;
  const Trajectory traj = qanneal::propagate(ham, protocol, initial);
  const Eigen::VectorXcd final_state = traj.final_state();
  EXPECT_NEAR(final_state(0).real(), std::cos(horizon), 1e-12);
  EXPECT_NEAR(final_state(0).imag(), 0.0, 1e-12);
  EXPECT_NEAR(final_state(1).real(), 0.0, 1e-12);
  EXPECT_NEAR(final_state(1).imag(), std::sin(horizon), 1e-12);
  // With a constant error signal the effective time is (1 + eps) T.
  const ErrorSignal eps(Eigen::VectorXd::Constant(1, 0.3), 0.3);
  const Eigen::VectorXcd noisy =
      qanneal::propagate(ham, protocol, initial, &eps).final_state();
  EXPECT_NEAR(noisy(0).real(), std::cos(1.3 * horizon), 1e-12);
  EXPECT_NEAR(noisy(1).imag(), std::sin(1.3 * horizon), 1e-12);
}

TEST(Propagate, PreservesNormEveryStep) {
  const auto ham = test_util::random_ising_pair(4, 5);
  const TimeGrid grid(3.0, 40);
  const Protocol protocol = random_protocol(grid, 17);
  const ErrorSignal signal = random_signal(7, 0.3, 23);
  const Eigen::VectorXcd initial = qanneal::ground_state_of_B(ham);
  const Trajectory traj = qanneal::propagate(ham, protocol, initial, &signal);
  for (Eigen::Index k = 0; k < traj.states.cols(); ++k) {
    EXPECT_NEAR(traj.states.col(k).norm(), 1.0, 1e-12);
  }
}

TEST(Propagate, ComposesAcrossSplitHorizon) {
  const auto ham = test_util::random_ising_pair(3, 9);
  const TimeGrid grid(2.0, 20);
  const Protocol protocol = random_protocol(grid, 31);
  const Eigen::VectorXcd initial = qanneal::ground_state_of_B(ham);
  const Eigen::VectorXcd full =
      qanneal::propagate(ham, protocol, initial).final_state();
  const TimeGrid half(1.0, 10);
  const Protocol first(half, protocol.values.head(10));
  const Protocol second(half, protocol.values.tail(10));
  const Eigen::VectorXcd mid =
      qanneal::propagate(ham, first, initial).final_state();
  const Eigen::VectorXcd chained =
      qanneal::propagate(ham, second, mid).final_state();
  EXPECT_LT((full - chained).norm(), 1e-12);
}

TEST(Propagate, TimeReversalReturnsToStart) {
  // Running the reversed protocol with eps = -2 applies the inverse
  // unitaries in reverse order, so the trajectory retraces exactly.
  const auto ham = test_util::random_ising_pair(3, 13);
  const TimeGrid grid(1.5, 12);
  const Protocol protocol = random_protocol(grid, 41);
  const Eigen::VectorXcd initial = test_util::random_unit_state(ham.dim(), 43);
  const Eigen::VectorXcd forward =
      qanneal::propagate(ham, protocol, initial).final_state();
  const Protocol reversed(grid, protocol.values.reverse().eval());
  const ErrorSignal negate(Eigen::VectorXd::Constant(1, -2.0), 2.0);
  const Eigen::VectorXcd back =
      qanneal::propagate(ham, reversed, forward, &negate).final_state();
  EXPECT_LT((back - initial).norm(), 1e-11);
}

TEST(Propagate, RejectsBadInitialStates) {
  const auto ham = test_util::random_ising_pair(2, 2);
  const Protocol protocol = Protocol::constant(TimeGrid(1.0, 5), 0.5);
  Eigen::VectorXcd not_unit = Eigen::VectorXcd::Zero(4);
  not_unit(0) = 0.5;
  EXPECT_THROW(qanneal::propagate(ham, protocol, not_unit), ConfigError);
  Eigen::VectorXcd wrong_dim = Eigen::VectorXcd::Zero(8);
  wrong_dim(0) = 1.0;
  EXPECT_THROW(qanneal::propagate(ham, protocol, wrong_dim), ConfigError);
}

TEST(TerminalCost, GroundStateOfBAveragesDiagonal) {
  const auto ham = qanneal::build_ising([] {
    qanneal::IsingModel model;
    model.n_qubits = 2;
    model.couplings = Eigen::MatrixXd::Zero(2, 2);
    model.couplings(0, 1) = model.couplings(1, 0) = 1.0;
    return model;
  }());
  const Eigen::VectorXcd x0 = qanneal::ground_state_of_B(ham);
  // diag(C) = (2,-2,-2,2): uniform superposition averages to 0.
  EXPECT_NEAR(qanneal::terminal_cost_of(ham, x0), 0.0, 1e-14);
}

TEST(Fidelity, BasicProperties) {
  const Eigen::VectorXcd a = test_util::random_unit_state(8, 3);
  Eigen::VectorXcd b = a * std::exp(Complex(0.0, 0.7));
  EXPECT_NEAR(qanneal::fidelity(a, a), 1.0, 1e-14);
  EXPECT_NEAR(qanneal::fidelity(a, b), 1.0, 1e-14);  // phase invariant
  const Eigen::VectorXcd c = test_util::random_unit_state(8, 4);
  EXPECT_DOUBLE_EQ(qanneal::fidelity(a, c), qanneal::fidelity(c, a));
  EXPECT_LE(qanneal::fidelity(a, c), 1.0 + 1e-14);
}

TEST(LipschitzBound, ClosedFormCases) {
  // u = 1 for time T: L = |B| T = N T.
  const auto ham3 = test_util::random_ising_pair(3, 71);
  const Protocol all_mixer = Protocol::constant(TimeGrid(1.0, 10), 1.0);
  EXPECT_NEAR(qanneal::lipschitz_bound(ham3, all_mixer, NormKind::spectral()),
              3.0, 1e-12);
  // u = 0 for T = 2 on the ferromagnetic pair: |C| = 2, L = 4.
  qanneal::IsingModel model;
  model.n_qubits = 2;
  model.couplings = Eigen::MatrixXd::Zero(2, 2);
  model.couplings(0, 1) = model.couplings(1, 0) = 1.0;
  const auto ham2 = qanneal::build_ising(model);
  const Protocol all_problem = Protocol::constant(TimeGrid(2.0, 16), 0.0);
  EXPECT_NEAR(qanneal::lipschitz_bound(ham2, all_problem, NormKind::spectral()),
              4.0, 1e-12);
}

TEST(LipschitzBound, EmpiricalSensitivityRespectsBound) {
  const auto ham = test_util::random_ising_pair(3, 77);
  const TimeGrid grid(2.0, 25);
  const Protocol protocol = random_protocol(grid, 79);
  const double lipschitz =
      qanneal::lipschitz_bound(ham, protocol, NormKind::spectral());
  const Eigen::VectorXcd initial = qanneal::ground_state_of_B(ham);
  for (int pair = 0; pair < 25; ++pair) {
    const ErrorSignal eps_a = random_signal(5, 0.2, 1000 + 2 * pair);
    const ErrorSignal eps_b = random_signal(5, 0.2, 1001 + 2 * pair);
    const Eigen::VectorXcd xa =
        qanneal::propagate(ham, protocol, initial, &eps_a).final_state();
    const Eigen::VectorXcd xb =
        qanneal::propagate(ham, protocol, initial, &eps_b).final_state();
    const double sup_diff =
        (eps_a.resample(grid.n_steps) - eps_b.resample(grid.n_steps))
            .cwiseAbs()
            .maxCoeff();
    EXPECT_LE((xa - xb).norm(), lipschitz * sup_diff + 1e-9);
  }
}

TEST(FidelityLowerBound, ValueAndValidation) {
  EXPECT_DOUBLE_EQ(qanneal::fidelity_lower_bound(2.0, 0.1), 0.98);
  EXPECT_DOUBLE_EQ(qanneal::fidelity_lower_bound(0.0, 1.0), 1.0);
  EXPECT_THROW(qanneal::fidelity_lower_bound(-1.0, 0.1), ConfigError);
  EXPECT_THROW(qanneal::fidelity_lower_bound(1.0, -0.1), ConfigError);
}

TEST(PhaseShiftedPropagate, MatchesUnshiftedUpToGlobalPhase) {
  const auto ham = test_util::random_ising_pair(3, 91);
  const TimeGrid grid(1.2, 15);
  const Protocol protocol = random_protocol(grid, 93);
  const Eigen::VectorXcd initial = qanneal::ground_state_of_B(ham);
  qanneal::Rng rng(95);
  Eigen::VectorXd phase(grid.n_steps);
  for (int k = 0; k < grid.n_steps; ++k) {
    phase(k) = 3.0 * rng.uniform_symmetric();
  }
  const Eigen::VectorXcd plain =
      qanneal::propagate(ham, protocol, initial).final_state();
  const Eigen::VectorXcd shifted =
      qanneal::phase_shifted_propagate(ham, protocol, initial, phase)
          .final_state();
  EXPECT_NEAR(qanneal::fidelity(plain, shifted), 1.0, 1e-10);
  const Complex expected_factor =
      std::exp(Complex(0.0, -phase.sum() * grid.dt()));
  EXPECT_LT((shifted - expected_factor * plain).norm(), 1e-9);
}

TEST(ProtocolPropagator, MatchesPlainPropagation) {
  const auto ham = test_util::random_ising_pair(3, 101);
  const TimeGrid grid(2.5, 18);
  const Protocol protocol = random_protocol(grid, 103);
  const ProtocolPropagator prop(ham, protocol);
  const Eigen::VectorXcd initial = qanneal::ground_state_of_B(ham);
  const ErrorSignal signal = random_signal(6, 0.25, 105);
  const Eigen::VectorXd eps = signal.resample(grid.n_steps);

  const Trajectory direct = qanneal::propagate(ham, protocol, initial, &signal);
  EXPECT_LT((prop.final_state(initial, eps) - direct.final_state()).norm(),
            1e-13);
  const Trajectory cached = prop.trajectory(initial, eps);
  EXPECT_LT((cached.states - direct.states).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_NEAR(cached.final_cost, direct.final_cost, 1e-13);

  // Nominal propagation via empty eps vector.
  const Eigen::VectorXcd nominal = prop.final_state(initial, Eigen::VectorXd());
  EXPECT_LT(
      (nominal - qanneal::propagate(ham, protocol, initial).final_state())
          .norm(),
      1e-13);
}

TEST(ProtocolPropagator, RegularizerMatchesDirectSums) {
  const auto ham = test_util::random_ising_pair(3, 111);
  const TimeGrid grid(1.7, 12);
  const Protocol protocol = random_protocol(grid, 113);
  const ProtocolPropagator prop(ham, protocol);
  for (NormKind kind : {NormKind::spectral(), NormKind::frobenius()}) {
    for (int k = 0; k < grid.n_steps; ++k) {
      EXPECT_NEAR(prop.q_at_step(k, kind),
                  qanneal::q_value(ham, protocol.values(k), kind), 1e-12);
    }
    EXPECT_NEAR(prop.regularizer(kind),
                qanneal::lipschitz_bound(ham, protocol, kind), 1e-12);
  }
}

}  // namespace
