#include <gtest/gtest.h>

#include <cmath>

#include "ptvm/sdp_bridge.hpp"
#include "ptvm/sdp_solver.hpp"
#include "support.hpp"

namespace ptvm {
namespace {

using lmi::ConditionSet;
using lmi::MatrixVariable;
using testing::two_mass_spring;

MatrixXd eye(Index n) { return MatrixXd::Identity(n, n); }

TEST(SdpSolver, LinearProgramInDiagonalBlock) {
  // max y1 + y2 s.t. 1 - y1 >= 0, 2 - y2 >= 0, 4 - y1 - y2 >= 0.
  sdp::Problem prob;
  prob.blocks = {{sdp::BlockKind::diagonal, 3}};
  prob.b = VectorXd::Ones(2);
  prob.c = {(VectorXd(3) << 1, 2, 4).finished()};
  prob.a = {{{0, (VectorXd(3) << 1, 0, 1).finished()}}, {{0, (VectorXd(3) << 0, 1, 1).finished()}}};
  const sdp::Result r = sdp::solve(prob);
  ASSERT_EQ(r.status, sdp::Status::converged) << r.message;
  EXPECT_NEAR(r.y(0), 1.0, 1e-6);
  EXPECT_NEAR(r.y(1), 2.0, 1e-6);
  EXPECT_NEAR(r.dual_objective, 3.0, 1e-7);
}

TEST(SdpSolver, LargestEigenvalue) {
  // max -t s.t. t I - M >= 0 gives t = lambda_max(M).
  MatrixXd m(3, 3);
  m << 4, 1, 0, 1, -2, 2, 0, 2, 1;
  sdp::Problem prob;
  prob.blocks = {{sdp::BlockKind::dense, 3}};
  prob.b = -VectorXd::Ones(1);
  prob.c = {-m};
  prob.a = {{{0, -eye(3)}}};
  const sdp::Result r = sdp::solve(prob);
  ASSERT_EQ(r.status, sdp::Status::converged) << r.message;
  EXPECT_NEAR(r.y(0), Eigen::SelfAdjointEigenSolver<MatrixXd>(m).eigenvalues().maxCoeff(), 1e-6);
}

TEST(SdpSolver, EigenvalueMinimizationMatchesReference) {
  // Reference optimum from an independent conic solver, confirmed by
  // derivative-free minimization of the eigenvalue function.
  MatrixXd m0(3, 3), m1(3, 3), m2(3, 3);
  m0 << 2, 1, 0, 1, -1, 3, 0, 3, 1;
  m1 << 1, 0, 1, 0, 2, 0, 1, 0, -1;
  m2 << 0, 1, 0, 1, 0, -1, 0, -1, 2;
  sdp::Problem prob;
  prob.blocks = {{sdp::BlockKind::dense, 3}};
  prob.b = (VectorXd(3) << -1, 0, 0).finished();
  prob.c = {-m0};
  prob.a = {{{0, -eye(3)}}, {{0, m1}}, {{0, m2}}};
  const sdp::Result r = sdp::solve(prob);
  ASSERT_EQ(r.status, sdp::Status::converged) << r.message;
  EXPECT_NEAR(r.y(0), 2.906829938505, 1e-6);
  const MatrixXd s = m0 + r.y(1) * m1 + r.y(2) * m2;
  EXPECT_NEAR(Eigen::SelfAdjointEigenSolver<MatrixXd>(s).eigenvalues().maxCoeff(), 2.906829938505,
              1e-6);
}

TEST(SdpSolver, MixedBlocks) {
  // max y s.t. [[1, y],[y, 1]] >= 0 and 0.5 - y >= 0.
  sdp::Problem prob;
  prob.blocks = {{sdp::BlockKind::dense, 2}, {sdp::BlockKind::diagonal, 1}};
  prob.b = VectorXd::Ones(1);
  MatrixXd off(2, 2);
  off << 0, -1, -1, 0;
  prob.c = {eye(2), MatrixXd::Constant(1, 1, 0.5)};
  prob.a = {{{0, off}, {1, MatrixXd::Ones(1, 1)}}};
  const sdp::Result r = sdp::solve(prob);
  ASSERT_EQ(r.status, sdp::Status::converged) << r.message;
  EXPECT_NEAR(r.y(0), 0.5, 1e-6);
}

ConditionSet stein_set(const MatrixXd& a) {
  ConditionSet cs;
  const int p = cs.add_variable(MatrixVariable::symmetric("P", a.rows()));
  cs.add_constraint("decrease", lmi::congruence(a, lmi::variable(cs, p)) - lmi::variable(cs, p) +
                                    lmi::constant(eye(a.rows())));
  return cs;
}

TEST(Bridge, MinimalTraceLyapunovMatchesSteinSolution) {
  MatrixXd a(3, 3);
  a << 0.5, 0.2, 0.0, -0.1, 0.7, 0.3, 0.0, 0.1, -0.4;
  const Index n = 3;
  const MatrixXd k = kron(a.transpose(), a.transpose()) - MatrixXd::Identity(n * n, n * n);
  const VectorXd vec = k.fullPivLu().solve(-VectorXd(eye(n).reshaped()));
  const MatrixXd p_star = vec.reshaped(n, n);
  const SolveOutcome o = solve_minimize(stein_set(a), {{"P", eye(n)}}, SolverConfig{});
  ASSERT_EQ(o.status, SolveStatus::feasible) << o.message;
  EXPECT_NEAR(o.assignment[0].trace(), p_star.trace(), 1e-4 * p_star.trace());
  EXPECT_LT((o.assignment[0] - p_star).norm(), 1e-3 * p_star.norm());
}

TEST(Bridge, FeasibleOutcomeIsRechecked) {
  const SolveOutcome o = solve_feasibility(lmi::assemble_lemma1(two_mass_spring(), 2), SolverConfig{});
  ASSERT_EQ(o.status, SolveStatus::feasible) << o.message;
  ASSERT_FALSE(o.residuals.empty());
  for (const auto& r : o.residuals) EXPECT_LE(r.max_eigenvalue, -o.epsilon / 2);
  EXPECT_LE(o.margin, -o.epsilon);
}

TEST(Bridge, UncontrollableUnstablePlantIsInfeasible) {
  const SystemTriple sys(MatrixXd::Constant(1, 1, 2.0), MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1));
  const SolveOutcome o = solve_feasibility(lmi::assemble_lemma1(sys, 1), SolverConfig{});
  EXPECT_EQ(o.status, SolveStatus::infeasible) << o.message;
  EXPECT_GT(o.margin, -o.epsilon);
}

TEST(Bridge, RejectsUnsolvableInput) {
  SolverConfig cfg;
  cfg.backend = "nonexistent";
  EXPECT_THROW(solve_feasibility(lmi::assemble_lemma1(two_mass_spring(), 1), cfg),
               std::invalid_argument);
  EXPECT_THROW(solve_feasibility(lmi::assemble_theorem1(two_mass_spring(), 1), SolverConfig{}),
               std::logic_error);
  SolverConfig bad;
  bad.bisection_lo = 5.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

// (a^2 - gamma) p < 0 with p > 0: feasible exactly for gamma > a^2.
ConditionSet threshold_set(double a) {
  ConditionSet cs;
  const int p = cs.add_variable(MatrixVariable::symmetric("P", 1));
  cs.set_parameter("gamma", std::nan(""));
  cs.add_constraint("positive", lmi::scaled(lmi::variable(cs, p), -1.0));
  cs.add_constraint("decrease",
                    lmi::congruence((MatrixXd(2, 1) << 1.0, a).finished(),
                                    lmi::make_X(cs, p, 1, 1, std::string("gamma"))));
  return cs;
}

void check_bisection_invariants(const ScalarResult& r, double tol) {
  ASSERT_EQ(r.status, SolveStatus::feasible) << r.message;
  EXPECT_LE(r.hi - r.lo, tol * 1.0000001);
  EXPECT_DOUBLE_EQ(r.value, r.hi);
  for (const auto& probe : r.probes) {
    if (probe.value <= r.lo) EXPECT_NE(probe.status, SolveStatus::feasible) << probe.value;
    if (probe.value == r.hi) EXPECT_EQ(probe.status, SolveStatus::feasible);
  }
}

TEST(Bridge, BisectionFindsThreshold) {
  SolverConfig cfg;
  const ScalarResult r = minimize_scalar(threshold_set(0.5), "gamma", cfg);
  check_bisection_invariants(r, cfg.bisection_tol);
  EXPECT_NEAR(r.value, 0.25, 2 * cfg.bisection_tol);
}

TEST(Bridge, BisectionDoublesUpperEnd) {
  SolverConfig cfg;
  const ScalarResult r = minimize_scalar(threshold_set(2.5), "gamma", cfg);
  check_bisection_invariants(r, cfg.bisection_tol);
  EXPECT_NEAR(r.value, 6.25, 2 * cfg.bisection_tol);
}

TEST(Bridge, BisectionReturnsLowerEndWhenFeasible) {
  SolverConfig cfg;
  cfg.bisection_lo = 1.0;
  const ScalarResult r = minimize_scalar(threshold_set(0.5), "gamma", cfg);
  ASSERT_EQ(r.status, SolveStatus::feasible);
  EXPECT_DOUBLE_EQ(r.value, 1.0);
}

TEST(Bridge, BisectionIsDeterministic) {
  SolverConfig cfg;
  const ScalarResult a = minimize_scalar(threshold_set(0.7), "gamma", cfg);
  const ScalarResult b = minimize_scalar(threshold_set(0.7), "gamma", cfg);
  EXPECT_EQ(a.status, b.status);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.probes.size(), b.probes.size());
}

}  // namespace
}  // namespace ptvm
