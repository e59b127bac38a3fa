#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dissipkit/cases.hpp"
#include "dissipkit/supply.hpp"

using namespace dissipkit;

namespace {

MatrixXd uniform(std::mt19937_64& rng, int n, int d, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixXd p(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) p(i, k) = u(rng);
  return p;
}

const LinearRadialKernel kJoint(RadialProfile::gaussian(1.0), 2, 1);

}  // namespace

TEST(DecomposeQsr, ZeroSupplyHasNoFactors) {
  const QsrSupply z{MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 1), MatrixXd::Zero(1, 1)};
  EXPECT_TRUE(decompose_qsr(z).empty());
  const auto spec = SupplyRateSpec::from_qsr(2, 1, z, identity_output());
  EXPECT_EQ(spec.rank(), 0);
  EXPECT_EQ(spec(Eigen::Vector2d(1, 2), Eigen::VectorXd::Constant(1, 3)), 0.0);
}

TEST(DecomposeQsr, FiniteGainFactors) {
  const QsrSupply q{MatrixXd::Constant(1, 1, -1.0), MatrixXd::Zero(1, 1), MatrixXd::Constant(1, 1, 0.25)};
  const auto f = decompose_qsr(q);
  ASSERT_EQ(f.size(), 2u);
  // (y, -y) and (u/2, u/2).
  EXPECT_DOUBLE_EQ(f[0].q0.a(0), 1.0);
  EXPECT_DOUBLE_EQ(f[0].q1.a(0), -1.0);
  EXPECT_DOUBLE_EQ(std::abs(f[1].q0.b(0)), 0.5);
  EXPECT_DOUBLE_EQ(f[1].q0.b(0), f[1].q1.b(0));
  std::mt19937_64 rng(1);
  const MatrixXd yu = uniform(rng, 1000, 2, -3, 3);
  for (int i = 0; i < yu.rows(); ++i) {
    const VectorXd y = VectorXd::Constant(1, yu(i, 0)), u = VectorXd::Constant(1, yu(i, 1));
    double s = 0.0;
    for (const auto& p : f) s += p.q0(y, u) * p.q1(y, u);
    EXPECT_NEAR(s, 0.25 * u(0) * u(0) - y(0) * y(0), 1e-12 * (1 + y.squaredNorm() + u.squaredNorm()));
  }
}

TEST(DecomposeQsr, GeneralReconstruction) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd a = uniform(rng, 3, 3, -1, 1), b = uniform(rng, 2, 2, -1, 1);
    const QsrSupply q{0.5 * (a + a.transpose()), uniform(rng, 3, 2, -1, 1), 0.5 * (b + b.transpose())};
    const auto f = decompose_qsr(q);
    EXPECT_LE(f.size(), 2u * 3 + 2);
    const MatrixXd pts = uniform(rng, 50, 5, -2, 2);
    for (int i = 0; i < pts.rows(); ++i) {
      const VectorXd y = pts.row(i).head(3), u = pts.row(i).tail(2);
      double s = 0.0;
      for (const auto& p : f) s += p.q0(y, u) * p.q1(y, u);
      EXPECT_NEAR(s, q(y, u), 1e-12 * (1 + std::abs(q(y, u))) * 10);
    }
  }
}

TEST(DecomposeQsr, RejectsNonSymmetric) {
  MatrixXd Q(2, 2);
  Q << 1, 2, 0, 1;
  EXPECT_THROW(decompose_qsr({Q, MatrixXd::Zero(2, 1), MatrixXd::Zero(1, 1)}), InputError);
  EXPECT_THROW(decompose_qsr({MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 1), Eigen::Matrix2d::Ones()}), InputError);
  EXPECT_THROW(decompose_qsr({MatrixXd::Zero(2, 2), MatrixXd::Zero(1, 1), MatrixXd::Zero(1, 1)}), InputError);
}

TEST(SupplyRateSpec, CaseValues) {
  const VectorXd x0 = VectorXd::Zero(2), u0 = VectorXd::Zero(1);
  for (const auto& s : {case1_supply(0.25), case2_supply(6.0), case3_supply(2.0)}) EXPECT_EQ(s(x0, u0), 0.0);
  // Case 1: y = x1 = 1, u = 2.
  EXPECT_DOUBLE_EQ(supply_eval(case1_supply(0.25), Eigen::Vector2d(1, 0.3), VectorXd::Constant(1, 2.0)), 0.0);
  // Case 3: y = x2 = 1, u = 1.
  for (double q : {2.0, -2.0}) {
    EXPECT_DOUBLE_EQ(supply_eval(case3_supply(q), Eigen::Vector2d(0.4, 1), VectorXd::Constant(1, 1.0)), q + 1);
  }
  // Case 2: beta sin^2 y1 + y2 u.
  const Eigen::Vector2d x(0.7, -0.4);
  EXPECT_NEAR(supply_eval(case2_supply(6.0), x, VectorXd::Constant(1, 0.3)),
              6.0 * std::sin(0.7) * std::sin(0.7) - 0.4 * 0.3, 1e-15);
  EXPECT_EQ(case2_supply(6.0).rank(), 2);
}

TEST(SupplyRateSpec, FactorListReconstruction) {
  std::mt19937_64 rng(3);
  const auto s = case2_supply(6.0);
  const MatrixXd X = uniform(rng, 200, 2, -3, 3), U = uniform(rng, 200, 1, -1, 1);
  const auto [v0, v1] = s.factor_values(X, U);
  for (int i = 0; i < X.rows(); ++i) {
    const double direct = 6.0 * std::pow(std::sin(X(i, 0)), 2) + X(i, 1) * U(i, 0);
    EXPECT_NEAR((v0.col(i).array() * v1.col(i).array()).sum(), direct, 1e-12 * (1 + std::abs(direct)));
    EXPECT_NEAR(s(VectorXd(X.row(i)), VectorXd(U.row(i))), direct, 1e-12 * (1 + std::abs(direct)));
  }
}

TEST(SupplyRateSpec, RejectsFactorsNotVanishingAtOrigin) {
  FactorList f;
  f.push_back({[](const VectorXd&, const VectorXd&) { return 1.0; },
               [](const VectorXd& x, const VectorXd&) { return x(0); }, "const"});
  EXPECT_THROW(SupplyRateSpec(1, 1, f), InputError);
  EXPECT_THROW(case1_supply(0.25)(VectorXd::Zero(3), VectorXd::Zero(1)), InputError);
}

TEST(AssembleThetaS, Examples) {
  EXPECT_EQ(assemble_theta_s(MatrixXd::Random(2, 4), MatrixXd::Zero(2, 4)), MatrixXd::Zero(4, 4));
  EXPECT_DOUBLE_EQ(assemble_theta_s(MatrixXd::Constant(1, 1, 3.0), MatrixXd::Constant(1, 1, -2.0))(0, 0), -6.0);
  const MatrixXd H0 = MatrixXd::Random(3, 7), H1 = MatrixXd::Random(3, 7);
  const MatrixXd T = assemble_theta_s(H0, H1);
  EXPECT_EQ(T, T.transpose());
  EXPECT_TRUE(T.isApprox(0.5 * (H0.transpose() * H1 + H1.transpose() * H0), 1e-14));
  EXPECT_THROW(assemble_theta_s(MatrixXd::Zero(2, 3), MatrixXd::Zero(3, 3)), InputError);
}

TEST(FitSupply, StructureAndRankBound) {
  std::mt19937_64 rng(4);
  const MatrixXd X = uniform(rng, 30, 2, -2, 2), U = uniform(rng, 30, 1, -1, 1);
  const auto spec = case1_supply(0.25);
  const auto est = fit_supply(spec, kJoint, X, U, 1e-4);
  EXPECT_EQ(est.theta_s, est.theta_s.transpose());
  EXPECT_EQ(est.theta_s, assemble_theta_s(est.H0, est.H1));
  Eigen::JacobiSVD<MatrixXd> svd(est.theta_s);
  const VectorXd sv = svd.singularValues();
  EXPECT_LE((sv.array() > 1e-10 * sv(0)).count(), 2 * spec.rank());
}

TEST(FitSupply, SampleContractionOracle) {
  std::mt19937_64 rng(5);
  const MatrixXd X = uniform(rng, 20, 2, -2, 2), U = uniform(rng, 20, 1, -1, 1);
  const auto est = fit_supply(case2_supply(6.0), kJoint, X, U, 1e-4);
  const MatrixXd G = gram(kJoint, stack_state_input(X, U));
  const VectorXd oracle = (G.transpose() * est.theta_s * G).diagonal();
  const VectorXd fast = est.on_sample(G);
  const auto form = est.as_form();
  for (int k = 0; k < 20; ++k) {
    const VectorXd z = est.anchors.row(k);
    EXPECT_NEAR(form(z), oracle(k), 1e-10 * (1 + std::abs(oracle(k))));
    EXPECT_NEAR(est(z), oracle(k), 1e-10 * (1 + std::abs(oracle(k))));
    EXPECT_NEAR(fast(k), oracle(k), 1e-10 * (1 + std::abs(oracle(k))));
  }
}

TEST(FitSupply, FixedPointAtSmallRegularization) {
  std::mt19937_64 rng(6);
  const MatrixXd X = uniform(rng, 15, 2, -2, 2), U = uniform(rng, 15, 1, -1, 1);
  const auto spec = case1_supply(0.25);
  const auto est = fit_supply(spec, kJoint, X, U, 1e-12);
  const MatrixXd G = gram(kJoint, est.anchors);
  const auto [v0, v1] = spec.factor_values(X, U);
  EXPECT_LE((est.H0 * G - v0).norm(), 1e-6 * v0.norm());
  EXPECT_LE((est.H1 * G - v1).norm(), 1e-6 * v1.norm());
}

TEST(SupplyQfError, NearInterpolation) {
  std::mt19937_64 rng(7);
  const MatrixXd X = uniform(rng, 40, 2, -2, 2), U = uniform(rng, 40, 1, -1, 1);
  const auto spec = case1_supply(0.25);
  const auto est = fit_supply(spec, kJoint, X, U, 1e-8);
  const auto e = supply_qf_error(est, spec, X, U);
  EXPECT_LE(e.max_scaled_err, 1e-3);
  EXPECT_LE(e.rms_err, e.max_scaled_err);
  EXPECT_EQ(e.per_point.size(), 40);
}

TEST(SupplyQfError, ZeroSupplyZeroError) {
  std::mt19937_64 rng(8);
  const MatrixXd X = uniform(rng, 10, 2, -2, 2), U = uniform(rng, 10, 1, -1, 1);
  const QsrSupply z{MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 1), MatrixXd::Zero(1, 1)};
  const auto spec = SupplyRateSpec::from_qsr(2, 1, z, identity_output());
  const auto est = fit_supply(spec, kJoint, X, U, 1e-6);
  EXPECT_EQ(est.theta_s, MatrixXd::Zero(10, 10));
  const auto e = supply_qf_error(est, spec, uniform(rng, 30, 2, -2, 2), uniform(rng, 30, 1, -1, 1));
  EXPECT_EQ(e.max_scaled_err, 0.0);
  EXPECT_EQ(e.rms_err, 0.0);
}

TEST(SupplyQfError, OriginProbeContributesZero) {
  std::mt19937_64 rng(9);
  const MatrixXd X = uniform(rng, 10, 2, -2, 2), U = uniform(rng, 10, 1, -1, 1);
  const auto spec = case1_supply(0.25);
  const auto est = fit_supply(spec, kJoint, X, U, 1e-6);
  const auto e = supply_qf_error(est, spec, MatrixXd::Zero(1, 2), MatrixXd::Zero(1, 1));
  EXPECT_EQ(e.per_point(0), 0.0);
}

TEST(CrossValidateBeta, PicksACandidate) {
  std::mt19937_64 rng(10);
  const MatrixXd X = uniform(rng, 40, 2, -2, 2), U = uniform(rng, 40, 1, -1, 1);
  const std::vector<double> cands{1e-8, 1e-4, 1e-1};
  const double b = cross_validate_beta(case2_supply(6.0), kJoint, X, U, cands);
  EXPECT_NE(std::find(cands.begin(), cands.end(), b), cands.end());
  EXPECT_THROW(cross_validate_beta(case2_supply(6.0), kJoint, X, U, {}), InputError);
}

TEST(DefaultBeta, ScalesWithSampleSize) { EXPECT_DOUBLE_EQ(default_beta_reg(80), 8e-5); }
