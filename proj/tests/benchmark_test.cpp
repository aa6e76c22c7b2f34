#include <gtest/gtest.h>

#include "ptvm/benchmark.hpp"
#include "support.hpp"

namespace ptvm {
namespace {

using testing::uniform_matrix;

TEST(Corpus, SystemsHaveTargetRadiusAndDimensions) {
  CorpusSpec spec;
  spec.count = 25;
  for (const auto& sys : generate_corpus(spec)) {
    EXPECT_EQ(sys.n(), 3);
    EXPECT_EQ(sys.m(), 1);
    EXPECT_EQ(sys.p(), 1);
    EXPECT_NEAR(spectral_radius(sys.A()), 1.2, 1e-9);
    EXPECT_TRUE(pbh_stabilizable(sys.A(), sys.B()));
    EXPECT_TRUE(pbh_detectable(sys.A(), sys.C()));
    EXPECT_LE(sys.B().cwiseAbs().maxCoeff(), 2.0);
  }
}

TEST(Corpus, RegenerationIsBitIdentical) {
  CorpusSpec spec;
  spec.count = 10;
  const auto a = generate_corpus(spec), b = generate_corpus(spec);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].A(), b[i].A());
    EXPECT_EQ(a[i].B(), b[i].B());
    EXPECT_EQ(a[i].C(), b[i].C());
    const SystemTriple single = random_system(spec, static_cast<int>(i));
    EXPECT_EQ(single.A(), a[i].A());
  }
  CorpusSpec other = spec;
  other.seed += 1;
  EXPECT_NE(random_system(other, 0).A(), a[0].A());
}

TEST(Corpus, CounterStreamIsStable) {
  CounterRng r1(7, 3), r2(7, 3), r3(7, 4);
  for (int i = 0; i < 5; ++i) {
    const auto v = r1.next();
    EXPECT_EQ(v, r2.next());
    EXPECT_NE(v, r3.next());
  }
  CounterRng u(1, 1);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform(-2.0, 2.0);
    EXPECT_GE(x, -2.0);
    EXPECT_LT(x, 2.0);
  }
}

TEST(Corpus, SpecValidation) {
  CorpusSpec s;
  s.count = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = CorpusSpec{};
  s.lo = 3.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = CorpusSpec{};
  s.target_radius = 0.9;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

// Stabilizability of a 2x2 pair by the Kalman rank test plus the eigenvalue
// left over after the controllable direction is removed.
bool brute_stabilizable(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd ctrb(2, 2);
  ctrb << b, a * b;
  Eigen::JacobiSVD<MatrixXd> svd(ctrb);
  const VectorXd s = svd.singularValues();
  if (s(1) > 1e-9 * std::max(1.0, s(0))) return true;
  if (s(0) <= 1e-12) return spectral_radius(a) < 1.0;
  const VectorXd bv = b.col(0);
  const double lc = bv.dot(a * bv) / bv.squaredNorm();
  const double lu = a.trace() - lc;
  return std::abs(lu) < 1.0;
}

TEST(Pbh, AgreesWithRankTestOnTwoByTwo) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  int uncontrollable = 0, compared = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const double l1 = d(rng), l2 = d(rng);
    if (std::abs(std::abs(l1) - 1.0) < 1e-2 || std::abs(std::abs(l2) - 1.0) < 1e-2) continue;
    MatrixXd t = uniform_matrix(rng, 2, 2);
    if (std::abs(t.determinant()) < 0.1) continue;
    const MatrixXd a = t * VectorXd((VectorXd(2) << l1, l2).finished()).asDiagonal() * t.inverse();
    MatrixXd b;
    switch (trial % 3) {
      case 0: b = uniform_matrix(rng, 2, 1); break;
      case 1: b = 1.5 * t.col(0); ++uncontrollable; break;
      default: b = MatrixXd::Zero(2, 1); ++uncontrollable; break;
    }
    EXPECT_EQ(pbh_stabilizable(a, b), brute_stabilizable(a, b)) << "l1=" << l1 << " l2=" << l2;
    EXPECT_EQ(pbh_detectable(a.transpose(), b.transpose()), pbh_stabilizable(a, b));
    ++compared;
  }
  EXPECT_GT(compared, 200);
  EXPECT_GT(uncontrollable, 100);
}

TEST(OpCount, PublishedTables) {
  const std::vector<std::pair<long long, long long>> full = {{18, 12}, {32, 24}, {50, 40},
                                                             {72, 60}, {98, 84}};
  for (long long n = 2; n <= 6; ++n) {
    const OpCount f = op_count(ControllerKind::full_dof, 2, n, 1, 1);
    EXPECT_EQ(f.multiplications, full[static_cast<size_t>(n - 2)].first);
    EXPECT_EQ(f.additions, full[static_cast<size_t>(n - 2)].second);
    const OpCount p = op_count(ControllerKind::ptvmsofc, 2, n, 1, 1);
    EXPECT_EQ(p.multiplications, 3);
    EXPECT_EQ(p.additions, 1);
  }
  const OpCount one = op_count(ControllerKind::ptvmsofc, 1, 4, 1, 1);
  EXPECT_EQ(one.multiplications, 1);
  EXPECT_EQ(one.additions, 0);
}

TEST(OpCount, MemoryControllerIndependentOfStateDimension) {
  for (long long period = 1; period <= 5; ++period)
    for (long long m = 1; m <= 3; ++m)
      for (long long p = 1; p <= 3; ++p) {
        const OpCount ref = op_count(ControllerKind::ptvmsofc, period, 1, m, p);
        for (long long n = 2; n <= 8; ++n) {
          const OpCount c = op_count(ControllerKind::ptvmsofc, period, n, m, p);
          EXPECT_EQ(c.multiplications, ref.multiplications);
          EXPECT_EQ(c.additions, ref.additions);
        }
      }
}

TEST(OpCount, RejectsNonPositive) {
  EXPECT_THROW(op_count(ControllerKind::full_dof, 0, 1, 1, 1), std::invalid_argument);
  EXPECT_THROW(controller_kind_from_string("observer"), std::invalid_argument);
  EXPECT_EQ(controller_kind_from_string("full_dof"), ControllerKind::full_dof);
}

TEST(Suite, SmallCorpusTable) {
  CorpusSpec spec;
  spec.count = 8;
  const std::vector<MethodSpec> methods = {{"two_steps", 2}, {"two_steps_no_v11", 2}};
  const BenchmarkTable t = run_suite(spec, methods, SolverConfig{});
  ASSERT_EQ(t.rows.size(), 2u);
  const BenchmarkRow* with = t.find("two_steps", 2);
  const BenchmarkRow* without = t.find("two_steps_no_v11", 2);
  ASSERT_TRUE(with && without);
  EXPECT_EQ(with->total, 8);
  EXPECT_LE(with->success, with->total);
  EXPECT_GE(without->success, with->success);
  EXPECT_EQ(with->outcomes.size(), 8u);
  EXPECT_EQ(t.find("ilmi", 2), nullptr);
  const std::string csv = t.to_csv();
  EXPECT_EQ(csv.rfind("method,N,success,total,mean_seconds\n", 0), 0u);
  EXPECT_EQ(t.to_json()["rows"].size(), 2u);
}

TEST(Suite, RejectsBadMethodLists) {
  CorpusSpec spec;
  spec.count = 2;
  EXPECT_THROW(run_suite(spec, {}, SolverConfig{}), std::invalid_argument);
  EXPECT_THROW(run_suite(spec, {{"magic", 2}}, SolverConfig{}), std::invalid_argument);
}

TEST(Suite, CorpusJsonRoundTrip) {
  CorpusSpec spec;
  spec.count = 3;
  const auto corpus = generate_corpus(spec);
  const auto j = corpus_to_json(corpus);
  ASSERT_EQ(j.size(), 3u);
  EXPECT_EQ(j[1]["A"].size(), 3u);
}

}  // namespace
}  // namespace ptvm
