#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dissipkit/quadform.hpp"
#include "dissipkit/sdp.hpp"

using namespace dissipkit;

namespace {

MatrixXd uniform(std::mt19937_64& rng, int n, int d, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixXd p(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) p(i, k) = u(rng);
  return p;
}

double inner(const MatrixXd& a, const MatrixXd& b) { return a.cwiseProduct(b).sum(); }

// Feasible by construction: rhs_i = <A_i, Theta0> + margin_i with Theta0 PSD.
SdpProblem random_feasible(std::mt19937_64& rng, int n, int m) {
  const MatrixXd L = uniform(rng, n, n);
  const MatrixXd theta0 = L * L.transpose() / n;
  const MatrixXd B = uniform(rng, n, n);
  SdpProblem p;
  p.dim = n;
  p.cost = B * B.transpose();
  std::uniform_real_distribution<double> margin(0.0, 0.5);
  for (int i = 0; i < m; ++i) {
    const VectorXd a = uniform(rng, n, 1), b = uniform(rng, n, 1);
    auto c = SdpConstraint::rank_two(a, b, 0.0);
    c.rhs = inner(c.A, theta0) + margin(rng);
    p.constraints.push_back(c);
  }
  return p;
}

void expect_sound(const SdpProblem& p, const SdpSolution& s) {
  ASSERT_EQ(s.status, SdpStatus::Optimal) << s.message;
  EXPECT_GE(min_eigenvalue(s.theta_p), -1e-7 * std::max(1.0, s.theta_p.norm()));
  for (const auto& c : p.constraints) EXPECT_LE(inner(c.A, s.theta_p) - c.rhs, 1e-6 * (1 + std::abs(c.rhs)));
  EXPECT_LE(s.max_constraint_residual, 1e-6);
  EXPECT_NEAR(s.objective, inner(p.cost, s.theta_p), 1e-12 * (1 + std::abs(s.objective)));
}

struct Lmi {
  GramBundle bundle;
  MatrixXd theta_s;
};

Lmi random_lmi(std::mt19937_64& rng, int n) {
  const LinearRadialKernel joint(RadialProfile::gaussian(1.0), 2, 1);
  const MatrixXd X = uniform(rng, n, 2, -2, 2), U = uniform(rng, n, 1), Xp = uniform(rng, n, 2, -2, 2);
  const MatrixXd H = uniform(rng, 2, n);
  return {make_gram_bundle(joint, X, U, Xp), 0.5 * (H.transpose() * H + (H.transpose() * H).transpose())};
}

}  // namespace

TEST(AssembleLmi, ScalarExpansion) {
  const double g = 0.8, gp = 0.5, gxu = 1.3, t = 0.7;
  GramBundle b{MatrixXd::Constant(1, 1, g), MatrixXd::Constant(1, 1, gp), MatrixXd::Constant(1, 1, gxu)};
  const SdpProblem p = assemble_lmi(b, MatrixXd::Constant(1, 1, t), VectorXd::Zero(1));
  ASSERT_EQ(p.constraints.size(), 1u);
  EXPECT_DOUBLE_EQ(p.constraints[0].A(0, 0), gp * gp - g * g);
  EXPECT_DOUBLE_EQ(p.constraints[0].rhs, gxu * gxu * t);
  EXPECT_DOUBLE_EQ(p.cost(0, 0), g * g);
}

TEST(AssembleLmi, ContractionDataAdmitsZero) {
  // x+ = x / 2, no supply: every rhs is 0 and Theta = 0 is optimal.
  std::mt19937_64 rng(1);
  const LinearRadialKernel joint(RadialProfile::gaussian(1.0), 2, 1);
  const MatrixXd X = uniform(rng, 6, 2, -2, 2), U = uniform(rng, 6, 1);
  const GramBundle b = make_gram_bundle(joint, X, U, 0.5 * X);
  const SdpProblem p = assemble_lmi(b, MatrixXd::Zero(6, 6), VectorXd::Zero(6));
  for (const auto& c : p.constraints) EXPECT_EQ(c.rhs, 0.0);
  const SdpSolution s = solve(p);
  expect_sound(p, s);
  EXPECT_NEAR(s.objective, 0.0, 1e-7 * (1 + p.cost.trace()));
}

TEST(AssembleLmi, RelaxationSlack) {
  MatrixXd Z(3, 3);
  Z << 1, 0, 0, 1, 1, 1, 0, -2, 0;
  const VectorXd s = relaxation_slack(Z, 0.1);
  EXPECT_DOUBLE_EQ(s(0), 0.1);
  EXPECT_DOUBLE_EQ(s(1), 0.3);
  EXPECT_DOUBLE_EQ(s(2), 0.4);
  EXPECT_THROW(relaxation_slack(Z, -1.0), ConfigError);
}

TEST(AssembleLmi, RejectsBadShapes) {
  std::mt19937_64 rng(2);
  const Lmi l = random_lmi(rng, 4);
  EXPECT_THROW(assemble_lmi(l.bundle, MatrixXd::Zero(3, 3), VectorXd::Zero(4)), InputError);
  EXPECT_THROW(assemble_lmi(l.bundle, l.theta_s, VectorXd::Zero(3)), InputError);
  EXPECT_THROW(assemble_lmi(l.bundle, l.theta_s, -VectorXd::Ones(4)), InputError);
}

TEST(AssembleLmi, ConstraintAndObjectiveIdentities) {
  std::mt19937_64 rng(3);
  const int n = 9;
  const Lmi l = random_lmi(rng, n);
  const SdpProblem p = assemble_lmi(l.bundle, l.theta_s, VectorXd::Zero(n));
  const auto& G = l.bundle.G_xx;
  const auto& Gp = l.bundle.G_xxp;
  const VectorXd supply = (l.bundle.G_xu.transpose() * l.theta_s * l.bundle.G_xu).diagonal();
  for (int trial = 0; trial < 5; ++trial) {
    const MatrixXd R = uniform(rng, n, n);
    const MatrixXd T = 0.5 * (R + R.transpose());
    const VectorXd dense = (Gp.transpose() * T * Gp - G.transpose() * T * G).diagonal();
    for (int i = 0; i < n; ++i) {
      const double v = inner(p.constraints[i].A, T);
      EXPECT_NEAR(v, dense(i), 1e-10 * (std::abs(dense(i)) + 1e-12));
      EXPECT_NEAR(p.constraints[i].rhs, supply(i), 1e-12 * (1 + std::abs(supply(i))));
    }
    EXPECT_NEAR(inner(p.cost, T), (G.transpose() * T * G).trace(), 1e-10 * (G.transpose() * T * G).cwiseAbs().sum());
  }
}

TEST(Solve, EmptyConstraintList) {
  SdpProblem p;
  p.dim = 3;
  p.cost = MatrixXd::Identity(3, 3);
  const SdpSolution s = solve(p);
  EXPECT_EQ(s.status, SdpStatus::Optimal);
  EXPECT_EQ(s.theta_p, MatrixXd::Zero(3, 3));
  EXPECT_EQ(s.objective, 0.0);
}

TEST(Solve, NegativeCostIsUnbounded) {
  SdpProblem p;
  p.dim = 2;
  p.cost = -MatrixXd::Identity(2, 2);
  EXPECT_EQ(solve(p).status, SdpStatus::Unbounded);
}

TEST(Solve, ScalarInfeasible) {
  SdpProblem p;
  p.dim = 1;
  p.cost = MatrixXd::Ones(1, 1);
  p.constraints.push_back(SdpConstraint::dense(MatrixXd::Ones(1, 1), -1.0));
  const SdpSolution s = solve(p);
  ASSERT_EQ(s.status, SdpStatus::Infeasible) << s.message;
  ASSERT_TRUE(s.certificate.has_value());
  const VectorXd& lam = *s.certificate;
  EXPECT_GE(lam.minCoeff(), 0.0);
  EXPECT_NEAR(lam(0) * -1.0, -1.0, 1e-9);
}

TEST(Solve, ScalarFeasibleBound) {
  // min theta s.t. -theta <= -2 (theta >= 2).
  SdpProblem p;
  p.dim = 1;
  p.cost = MatrixXd::Ones(1, 1);
  p.constraints.push_back(SdpConstraint::dense(-MatrixXd::Ones(1, 1), -2.0));
  const SdpSolution s = solve(p);
  expect_sound(p, s);
  EXPECT_NEAR(s.theta_p(0, 0), 2.0, 1e-6);
  EXPECT_NEAR(s.multipliers(0), 1.0, 1e-6);
}

TEST(Solve, RandomFeasibleInstances) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> nd(1, 15);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = nd(rng);
    std::uniform_int_distribution<int> md(1, 2 * n);
    const SdpProblem p = random_feasible(rng, n, md(rng));
    const SdpSolution s = solve(p);
    SCOPED_TRACE("trial " + std::to_string(trial));
    expect_sound(p, s);
  }
}

TEST(Solve, OptimalBeatsConstructedPoint) {
  std::mt19937_64 rng(5);
  const int n = 6;
  const MatrixXd L = uniform(rng, n, n);
  const MatrixXd theta0 = L * L.transpose();
  SdpProblem p;
  p.dim = n;
  p.cost = MatrixXd::Identity(n, n);
  for (int i = 0; i < 8; ++i) {
    // a a^T - b b^T <= value at theta0 keeps theta0 feasible.
    auto c = SdpConstraint::rank_two(uniform(rng, n, 1), uniform(rng, n, 1), 0.0);
    c.rhs = inner(c.A, theta0);
    p.constraints.push_back(c);
  }
  const SdpSolution s = solve(p);
  expect_sound(p, s);
  EXPECT_LE(s.objective, inner(p.cost, theta0) + 1e-6);
  EXPECT_LE(s.relative_gap, 1e-6);
}

TEST(Solve, InfeasibleByConstruction) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial;
    SdpProblem p;
    p.dim = n;
    p.cost = MatrixXd::Identity(n, n);
    // A_i = a a^T is PSD, so <A_i, Theta> >= 0 > rhs_i.
    const VectorXd a = uniform(rng, n, 1);
    p.constraints.push_back(SdpConstraint::rank_two(a, VectorXd::Zero(n), -0.5));
    for (int i = 0; i < n; ++i) {
      p.constraints.push_back(SdpConstraint::rank_two(uniform(rng, n, 1), uniform(rng, n, 1), 1.0));
    }
    const SdpSolution s = solve(p);
    ASSERT_EQ(s.status, SdpStatus::Infeasible) << "trial " << trial << ": " << s.message;
    const VectorXd& lam = *s.certificate;
    EXPECT_GE(lam.minCoeff(), 0.0);
    MatrixXd sum = MatrixXd::Zero(n, n);
    double rhs = 0.0;
    for (std::size_t i = 0; i < p.constraints.size(); ++i) {
      sum += lam(static_cast<Eigen::Index>(i)) * p.constraints[i].A;
      rhs += lam(static_cast<Eigen::Index>(i)) * p.constraints[i].rhs;
    }
    EXPECT_GE(min_eigenvalue(sum), -1e-6);
    EXPECT_NEAR(rhs, -1.0, 1e-8);
  }
}

TEST(Solve, ZeroRowWithNegativeRhs) {
  SdpProblem p;
  p.dim = 2;
  p.cost = MatrixXd::Identity(2, 2);
  p.constraints.push_back(SdpConstraint::dense(MatrixXd::Zero(2, 2), -1.0));
  EXPECT_EQ(solve(p).status, SdpStatus::Infeasible);
}

TEST(Solve, DenseAndLowRankAgree) {
  std::mt19937_64 rng(7);
  SdpProblem lr = random_feasible(rng, 7, 9);
  SdpProblem dn = lr;
  for (auto& c : dn.constraints) c = SdpConstraint::dense(c.A, c.rhs);
  const SdpSolution a = solve(lr), b = solve(dn);
  expect_sound(lr, a);
  expect_sound(dn, b);
  EXPECT_NEAR(a.objective, b.objective, 1e-6 * (1 + std::abs(a.objective)));
}

TEST(Solve, ScalingCovariance) {
  std::mt19937_64 rng(8);
  const SdpProblem p = random_feasible(rng, 6, 8);
  const SdpSolution s = solve(p);
  expect_sound(p, s);
  for (double c : {0.01, 7.0, 300.0}) {
    SdpProblem q = p;
    for (auto& con : q.constraints) con.rhs *= c;
    const SdpSolution t = solve(q);
    expect_sound(q, t);
    EXPECT_NEAR(t.objective, c * s.objective, 1e-5 * c * (1 + std::abs(s.objective)));
  }
  // An infeasible instance stays infeasible under scaling.
  SdpProblem bad = p;
  bad.constraints.push_back(SdpConstraint::rank_two(VectorXd::Ones(6), VectorXd::Zero(6), -1.0));
  EXPECT_EQ(solve(bad).status, SdpStatus::Infeasible);
  for (auto& con : bad.constraints) con.rhs *= 50.0;
  EXPECT_EQ(solve(bad).status, SdpStatus::Infeasible);
}

TEST(Solve, TraceCapIsRespected) {
  std::mt19937_64 rng(9);
  SdpProblem p = random_feasible(rng, 5, 6);
  p.trace_cap = 100.0;
  const SdpSolution s = solve(p);
  expect_sound(p, s);
  EXPECT_LE(s.theta_p.trace(), 100.0 * (1 + 1e-6));
}

TEST(Solve, RidgeKeepsFeasibility) {
  std::mt19937_64 rng(10);
  const SdpProblem p = random_feasible(rng, 8, 10);
  SdpOptions o;
  o.objective_ridge = 1e-4;
  const SdpSolution plain = solve(p), ridged = solve(p, o);
  expect_sound(p, ridged);
  EXPECT_NEAR(ridged.objective, plain.objective, 1e-3 * (1 + std::abs(plain.objective)));
}

TEST(Solve, RejectsMalformedProblems) {
  SdpProblem p;
  p.dim = 2;
  p.cost = MatrixXd::Identity(3, 3);
  EXPECT_THROW(solve(p), InputError);
  p.cost = MatrixXd::Identity(2, 2);
  p.constraints.push_back(SdpConstraint::dense(MatrixXd::Identity(3, 3), 1.0));
  EXPECT_THROW(solve(p), InputError);
  p.constraints.clear();
  SdpOptions o;
  o.tol = 0.0;
  EXPECT_THROW(solve(p, o), ConfigError);
}

TEST(Solve, ObjectiveEqualsStorageSumOnSample) {
  std::mt19937_64 rng(11);
  const LinearRadialKernel joint(RadialProfile::gaussian(1.0), 2, 1);
  const int n = 8;
  const MatrixXd X = uniform(rng, n, 2, -2, 2), U = uniform(rng, n, 1);
  const GramBundle b = make_gram_bundle(joint, X, U, 0.6 * X);
  const SdpProblem p = assemble_lmi(b, MatrixXd::Zero(n, n), VectorXd::Constant(n, 0.5));
  const MatrixXd L = uniform(rng, n, n);
  const KernelQuadraticForm v(joint.state_kernel(), X, L * L.transpose());
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += v(VectorXd(X.row(i)));
  EXPECT_NEAR(inner(p.cost, v.theta()), sum, 1e-8 * std::abs(sum));
}
