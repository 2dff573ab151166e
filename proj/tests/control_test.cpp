#include "qanneal/control.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <optional>

#include "qanneal/dynamics.hpp"
#include "qanneal/errors.hpp"
#include "qanneal/operators.hpp"
#include "qanneal/rng.hpp"
#include "test_util.hpp"

namespace {

using qanneal::ConfigError;
using qanneal::CostSpec;
using qanneal::HamiltonianPair;
using qanneal::NormKind;
using qanneal::OptimizeOptions;
using qanneal::OptimizeReport;
using qanneal::Protocol;
using qanneal::QaoaResult;
using qanneal::QaoaSchedule;
using qanneal::TimeGrid;

Protocol random_interior_protocol(TimeGrid grid, std::uint64_t seed) {
  qanneal::Rng rng(seed);
  Eigen::VectorXd u(grid.n_steps);
  for (int k = 0; k < grid.n_steps; ++k) u(k) = rng.uniform(0.05, 0.95);
  return Protocol(grid, u);
}

double total_of(const HamiltonianPair& ham, const Protocol& protocol,
                const CostSpec& spec) {
  const auto [terminal, regularizer] = qanneal::total_cost(ham, protocol, spec);
  return terminal + spec.zeta * regularizer;
}

void expect_gradient_matches_fd(const HamiltonianPair& ham,
                                const Protocol& protocol,
                                const CostSpec& spec) {
  const Eigen::VectorXd grad = qanneal::gradient(ham, protocol, spec);
  const double h = 1e-6;
  for (int k = 0; k < protocol.grid.n_steps; ++k) {
    Eigen::VectorXd up = protocol.values, down = protocol.values;
    up(k) += h;
    down(k) -= h;
    const double fd = (total_of(ham, Protocol(protocol.grid, up), spec) -
                       total_of(ham, Protocol(protocol.grid, down), spec)) /
                      (2.0 * h);
    EXPECT_NEAR(grad(k), fd, 1e-5 * std::max(std::abs(fd), 1.0) + 1e-8)
        << "component " << k;
  }
}

TEST(Gradient, MatchesFiniteDifferencesTerminalOnly) {
  for (int instance = 0; instance < 4; ++instance) {
    const auto ham = test_util::random_ising_pair(2 + instance % 2,
                                                  200 + instance);
    const TimeGrid grid(1.0 + 0.3 * instance, 9 + instance);
    const Protocol protocol = random_interior_protocol(grid, 300 + instance);
    expect_gradient_matches_fd(ham, protocol, CostSpec(0.0, NormKind::spectral()));
  }
}

TEST(Gradient, MatchesFiniteDifferencesWithRegularizers) {
  const NormKind kinds[] = {NormKind::spectral(), NormKind::frobenius()};
  for (const NormKind& kind : kinds) {
    NormKind reduced = kind;
    reduced.phase_reduced = true;
    for (const NormKind& variant : {kind, reduced}) {
      for (int instance = 0; instance < 2; ++instance) {
        const auto ham = test_util::random_ising_pair(2, 400 + instance);
        const TimeGrid grid(1.5, 8);
        const Protocol protocol = random_interior_protocol(grid, 500 + instance);
        expect_gradient_matches_fd(ham, protocol, CostSpec(0.15, variant));
      }
    }
  }
}

TEST(Gradient, LongerHorizonAndFinerGrid) {
  const auto ham = test_util::random_ising_pair(3, 601);
  const TimeGrid grid(4.0, 24);
  const Protocol protocol = random_interior_protocol(grid, 603);
  expect_gradient_matches_fd(ham, protocol, CostSpec(0.1, NormKind::spectral()));
}

TEST(BackwardCostate, TerminalConditionAndNormConservation) {
  const auto ham = test_util::random_ising_pair(3, 701);
  const TimeGrid grid(2.0, 14);
  const Protocol protocol = random_interior_protocol(grid, 703);
  const auto trajectory =
      qanneal::propagate(ham, protocol, qanneal::ground_state_of_B(ham));
  const auto adjoint = qanneal::backward_costate(ham, protocol, trajectory);
  ASSERT_EQ(adjoint.costates.cols(), grid.n_steps + 1);
  // lambda(T) = -C x(T).
  const Eigen::VectorXcd expected =
      -(ham.c_diagonal().array() *
        trajectory.final_state().array().matrix().array())
           .matrix();
  EXPECT_LT((adjoint.terminal() - expected).norm(), 1e-12);
  // Unitary back-propagation preserves the costate norm.
  const double norm_T = adjoint.terminal().norm();
  for (int k = 0; k <= grid.n_steps; ++k) {
    EXPECT_NEAR(adjoint.costates.col(k).norm(), norm_T, 1e-11);
  }
}

TEST(TotalCost, MatchesDirectEvaluation) {
  const auto ham = test_util::random_ising_pair(3, 801);
  const TimeGrid grid(1.3, 11);
  const Protocol protocol = random_interior_protocol(grid, 803);
  const CostSpec spec(0.2, NormKind::frobenius());
  const auto [terminal, regularizer] = qanneal::total_cost(ham, protocol, spec);
  const auto trajectory =
      qanneal::propagate(ham, protocol, qanneal::ground_state_of_B(ham));
  EXPECT_NEAR(terminal, trajectory.final_cost, 1e-12);
  EXPECT_NEAR(regularizer, qanneal::lipschitz_bound(ham, protocol, spec.norm),
              1e-12);
}

TEST(CostSpec, RejectsNegativeZeta) {
  EXPECT_THROW(CostSpec(-0.1, NormKind::spectral()), ConfigError);
}

TEST(OptimizeProtocol, ImprovesOnRampAndStaysFeasible) {
  const auto ham = test_util::random_ising_pair(3, 901);
  const TimeGrid grid(6.0, 40);
  const CostSpec spec(0.0, NormKind::spectral());
  OptimizeOptions options;
  options.max_iters = 300;
  options.n_random_starts = 1;
  options.seed = 7;
  const OptimizeReport report =
      qanneal::optimize_protocol(ham, spec, grid, std::nullopt, options);
  const double ramp_cost =
      total_of(ham, Protocol::linear_ramp(grid), spec);
  EXPECT_LE(report.cost_total(spec.zeta), ramp_cost + 1e-12);
  for (int k = 0; k < grid.n_steps; ++k) {
    EXPECT_GE(report.protocol.values(k), 0.0);
    EXPECT_LE(report.protocol.values(k), 1.0);
  }
  EXPECT_GT(report.iterations, 0);
  // The reported costs describe the reported protocol.
  const auto [terminal, regularizer] =
      qanneal::total_cost(ham, report.protocol, spec);
  EXPECT_NEAR(report.cost_terminal, terminal, 1e-12);
  EXPECT_NEAR(report.cost_regularizer, regularizer, 1e-12);
}

TEST(OptimizeProtocol, DeterministicAcrossRuns) {
  const auto ham = test_util::random_ising_pair(2, 911);
  const TimeGrid grid(3.0, 20);
  const CostSpec spec(0.1, NormKind::spectral());
  OptimizeOptions options;
  options.max_iters = 60;
  options.n_random_starts = 2;
  options.seed = 99;
  const OptimizeReport a =
      qanneal::optimize_protocol(ham, spec, grid, std::nullopt, options);
  const OptimizeReport b =
      qanneal::optimize_protocol(ham, spec, grid, std::nullopt, options);
  ASSERT_EQ(a.protocol.values.size(), b.protocol.values.size());
  for (int k = 0; k < grid.n_steps; ++k) {
    EXPECT_EQ(a.protocol.values(k), b.protocol.values(k));
  }
  EXPECT_EQ(a.cost_terminal, b.cost_terminal);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(OptimizeProtocol, WarmStartNeverWorseThanItsSeed) {
  const auto ham = test_util::random_ising_pair(3, 921);
  const TimeGrid grid(5.0, 30);
  OptimizeOptions options;
  options.max_iters = 150;
  options.n_random_starts = 0;
  options.seed = 5;
  const CostSpec nominal_spec(0.0, NormKind::spectral());
  const OptimizeReport nominal =
      qanneal::optimize_protocol(ham, nominal_spec, grid, std::nullopt, options);
  const CostSpec robust_spec(0.2, NormKind::spectral());
  const double seed_total = total_of(ham, nominal.protocol, robust_spec);
  const OptimizeReport robust = qanneal::optimize_protocol(
      ham, robust_spec, grid, nominal.protocol, options);
  EXPECT_LE(robust.cost_total(robust_spec.zeta), seed_total + 1e-12);
}

TEST(QaoaSchedule, ValidationAndAlternation) {
  Eigen::VectorXd durations(4);
  durations << 0.2, 0.3, 0.4, 0.1;
  const QaoaSchedule schedule(durations, 1, 1.0);
  EXPECT_EQ(schedule.n_bangs, 4);
  EXPECT_DOUBLE_EQ(schedule.u_of_segment(0), 1.0);
  EXPECT_DOUBLE_EQ(schedule.u_of_segment(1), 0.0);
  EXPECT_DOUBLE_EQ(schedule.u_of_segment(2), 1.0);
  const QaoaSchedule zero_leading(durations, 0, 1.0);
  EXPECT_DOUBLE_EQ(zero_leading.u_of_segment(0), 0.0);
  EXPECT_DOUBLE_EQ(zero_leading.u_of_segment(1), 1.0);
  EXPECT_THROW(QaoaSchedule(durations, 1, 2.0), ConfigError);  // wrong sum
  Eigen::VectorXd negative(2);
  negative << 0.8, -0.2;
  EXPECT_THROW(QaoaSchedule(negative, 1, 0.6), ConfigError);
}

TEST(QaoaToProtocol, QuantizesByRoundedEdges) {
  Eigen::VectorXd durations(3);
  durations << 0.24, 0.5, 0.26;
  const QaoaSchedule schedule(durations, 1, 1.0);
  const Protocol protocol =
      qanneal::qaoa_to_protocol(schedule, TimeGrid(1.0, 10));
  Eigen::VectorXd expected(10);
  expected << 1, 1, 0, 0, 0, 0, 0, 1, 1, 1;
  EXPECT_LT((protocol.values - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(QaoaEvaluation, MatchesPropagationOnAlignedDurations) {
  const auto ham = test_util::random_ising_pair(3, 941);
  Eigen::VectorXd durations(3);
  durations << 0.2, 0.5, 0.3;
  const QaoaSchedule schedule(durations, 1, 1.0);
  const double exact = qanneal::evaluate_qaoa_terminal(ham, schedule);
  // Durations are exact multiples of dt = 0.1, so the quantized protocol is
  // the same piecewise-constant control.
  const Protocol protocol =
      qanneal::qaoa_to_protocol(schedule, TimeGrid(1.0, 10));
  const auto trajectory =
      qanneal::propagate(ham, protocol, qanneal::ground_state_of_B(ham));
  EXPECT_NEAR(exact, trajectory.final_cost, 1e-11);
}

TEST(QaoaEvaluation, DurationGradientMatchesSimplexDirectionalFd) {
  const auto ham = test_util::random_ising_pair(2, 951);
  Eigen::VectorXd durations(4);
  durations << 0.3, 0.2, 0.25, 0.25;
  const double horizon = 1.0;
  const auto eval = [&](const Eigen::VectorXd& d) {
    return qanneal::evaluate_qaoa_terminal(ham, QaoaSchedule(d, 1, horizon));
  };
  const Eigen::VectorXd grad =
      qanneal::qaoa_duration_gradient(ham, QaoaSchedule(durations, 1, horizon));
  const double h = 1e-6;
  for (int p = 0; p < 4; ++p) {
    for (int q = p + 1; q < 4; ++q) {
      Eigen::VectorXd up = durations, down = durations;
      up(p) += h;
      up(q) -= h;
      down(p) -= h;
      down(q) += h;
      const double fd = (eval(up) - eval(down)) / (2.0 * h);
      EXPECT_NEAR(grad(p) - grad(q), fd,
                  1e-5 * std::max(std::abs(fd), 1.0) + 1e-8);
    }
  }
}

TEST(OptimizeQaoa, ImprovesOnUniformScheduleAndIsDeterministic) {
  const auto ham = test_util::random_ising_pair(3, 961);
  const TimeGrid grid(4.0, 40);
  OptimizeOptions options;
  options.max_iters = 120;
  options.n_random_starts = 2;
  options.seed = 11;
  const QaoaResult result =
      qanneal::optimize_qaoa(ham, grid, 6, std::nullopt, options);
  ASSERT_EQ(result.schedule.durations.size(), 6);
  EXPECT_NEAR(result.schedule.durations.sum(), grid.horizon, 1e-9);
  EXPECT_GE(result.schedule.durations.minCoeff(), 0.0);
  EXPECT_TRUE(result.schedule.leading_value == 0 ||
              result.schedule.leading_value == 1);
  // Better (continuous) terminal value than both uniform schedules.
  const Eigen::VectorXd uniform =
      Eigen::VectorXd::Constant(6, grid.horizon / 6.0);
  const double uniform_best =
      std::min(qanneal::evaluate_qaoa_terminal(ham, QaoaSchedule(uniform, 1, grid.horizon)),
               qanneal::evaluate_qaoa_terminal(ham, QaoaSchedule(uniform, 0, grid.horizon)));
  EXPECT_LE(result.continuous_terminal, uniform_best + 1e-10);
  // Reported costs describe the quantized protocol.
  const auto [terminal, regularizer] = qanneal::total_cost(
      ham, result.report.protocol, CostSpec(0.0, NormKind::spectral()));
  EXPECT_NEAR(result.report.cost_terminal, terminal, 1e-12);
  EXPECT_DOUBLE_EQ(result.report.cost_regularizer, 0.0);
  // Determinism.
  const QaoaResult again =
      qanneal::optimize_qaoa(ham, grid, 6, std::nullopt, options);
  EXPECT_EQ(result.report.cost_terminal, again.report.cost_terminal);
  for (int p = 0; p < 6; ++p) {
    EXPECT_EQ(result.schedule.durations(p), again.schedule.durations(p));
  }
  EXPECT_THROW(qanneal::optimize_qaoa(ham, grid, 1, std::nullopt, options),
               ConfigError);
}

}  // namespace
