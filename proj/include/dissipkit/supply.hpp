#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dissipkit/errors.hpp"
#include "dissipkit/kernels.hpp"
#include "dissipkit/krr.hpp"
#include "dissipkit/quadform.hpp"

namespace dissipkit {

/// Output map y = h(x, u).
using OutputMap = std::function<VectorXd(const VectorXd& x, const VectorXd& u)>;

inline OutputMap identity_output() {
  return [](const VectorXd& x, const VectorXd&) { return x; };
}

/// Scalar function of a state-input pair.
using ScalarField = std::function<double(const VectorXd& x, const VectorXd& u)>;

/// One product term q0 * q1 of a supply rate.
struct FactorPair {
  ScalarField q0;
  ScalarField q1;
  std::string label;
};

using FactorList = std::vector<FactorPair>;

/// Linear functional y -> a^T y + b^T u, used by the QSR decomposition.
struct LinearFactor {
  VectorXd a;
  VectorXd b;

  double operator()(const VectorXd& y, const VectorXd& u) const { return a.dot(y) + b.dot(u); }
};

struct LinearFactorPair {
  LinearFactor q0;
  LinearFactor q1;
};

/// s(y, u) = y^T Q y + 2 y^T S u + u^T R u.
struct QsrSupply {
  MatrixXd Q;
  MatrixXd S;
  MatrixXd R;

  Eigen::Index d_y() const { return Q.rows(); }
  Eigen::Index d_u() const { return R.rows(); }

  double operator()(const VectorXd& y, const VectorXd& u) const {
    return y.dot(Q * y) + 2.0 * y.dot(S * u) + u.dot(R * u);
  }
};

namespace detail {

inline void check_symmetric(const MatrixXd& m, const char* name) {
  if (m.rows() != m.cols()) throw InputError(std::string("qsr: ") + name + " must be square");
  if (m.size() == 0) return;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InputError(std::string("qsr: ") + name + " must be symmetric");
  }
}

// Appends (+-sqrt|lambda| w^T v, sqrt|lambda| w^T v) for each retained eigenpair of sym.
inline void append_square_factors(const MatrixXd& sym, bool on_output, Eigen::Index d_y, Eigen::Index d_u,
                                  std::vector<LinearFactorPair>& out) {
  if (sym.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (sym + sym.transpose()));
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  if (lmax == 0.0) return;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    const double lam = es.eigenvalues()(k);
    if (std::abs(lam) <= 1e-12 * lmax) continue;
    const VectorXd w = std::sqrt(std::abs(lam)) * es.eigenvectors().col(k);
    LinearFactor f{VectorXd::Zero(d_y), VectorXd::Zero(d_u)};
    (on_output ? f.a : f.b) = w;
    LinearFactor g = f;
    if (lam < 0.0) {
      g.a = -g.a;
      g.b = -g.b;
    }
    out.push_back({f, g});
  }
}

}  // namespace detail

/// Factor pairs whose products sum to the QSR supply.
///
/// Eigen-decompositions of Q and R give square terms; the cross term
/// 2 y^T S u contributes pairs (y_k, 2 (S u)_k). At most 2 d_y + d_u pairs.
inline std::vector<LinearFactorPair> decompose_qsr(const QsrSupply& qsr) {
  detail::check_symmetric(qsr.Q, "Q");
  detail::check_symmetric(qsr.R, "R");
  const Eigen::Index d_y = qsr.Q.rows();
  const Eigen::Index d_u = qsr.R.rows();
  if (qsr.S.rows() != d_y || qsr.S.cols() != d_u) throw InputError("qsr: S must be d_y x d_u");

  std::vector<LinearFactorPair> out;
  detail::append_square_factors(qsr.Q, true, d_y, d_u, out);
  for (Eigen::Index k = 0; k < d_y; ++k) {
    if (d_u == 0 || qsr.S.row(k).cwiseAbs().maxCoeff() == 0.0) continue;
    LinearFactor yk{VectorXd::Unit(d_y, k), VectorXd::Zero(d_u)};
    LinearFactor su{VectorXd::Zero(d_y), 2.0 * qsr.S.row(k).transpose()};
    out.push_back({yk, su});
  }
  detail::append_square_factors(qsr.R, false, d_y, d_u, out);
  return out;
}

/// Supply rate s(h(x,u), u) as a finite sum of factor products over (x, u).
class SupplyRateSpec {
 public:
  SupplyRateSpec(int d_x, int d_u, FactorList factors, std::string name = "custom")
      : d_x_(d_x), d_u_(d_u), factors_(std::move(factors)), name_(std::move(name)) {
    const VectorXd x0 = VectorXd::Zero(d_x_);
    const VectorXd u0 = VectorXd::Zero(d_u_);
    for (const auto& f : factors_) {
      if (!f.q0 || !f.q1) throw InputError("supply: empty factor function");
      if (std::abs(f.q0(x0, u0)) > 1e-12 || std::abs(f.q1(x0, u0)) > 1e-12) {
        throw InputError("supply: factor '" + f.label + "' does not vanish at the origin");
      }
    }
  }

  /// QSR supply composed with an output map (y = h(x, u) must be linear-vanishing at 0).
  static SupplyRateSpec from_qsr(int d_x, int d_u, const QsrSupply& qsr, OutputMap output,
                                 std::string name = "qsr") {
    if (qsr.d_u() != d_u) throw InputError("qsr: R must be d_u x d_u");
    FactorList factors;
    int idx = 0;
    for (const auto& pair : decompose_qsr(qsr)) {
      auto lift = [output](LinearFactor lf) -> ScalarField {
        return [output, lf](const VectorXd& x, const VectorXd& u) { return lf(output(x, u), u); };
      };
      factors.push_back({lift(pair.q0), lift(pair.q1), "qsr" + std::to_string(idx++)});
    }
    SupplyRateSpec spec(d_x, d_u, std::move(factors), std::move(name));
    spec.qsr_ = qsr;
    return spec;
  }

  int d_x() const { return d_x_; }
  int d_u() const { return d_u_; }
  const FactorList& factors() const { return factors_; }
  Eigen::Index rank() const { return static_cast<Eigen::Index>(factors_.size()); }
  const std::string& name() const { return name_; }
  const std::optional<QsrSupply>& qsr() const { return qsr_; }

  double operator()(const VectorXd& x, const VectorXd& u) const {
    if (x.size() != d_x_ || u.size() != d_u_) throw InputError("supply_eval: dimension mismatch");
    double s = 0.0;
    for (const auto& f : factors_) s += f.q0(x, u) * f.q1(x, u);
    return s;
  }

  /// Factor values at samples: rows index factors, columns index samples.
  std::pair<MatrixXd, MatrixXd> factor_values(const Eigen::Ref<const PointMatrix>& X,
                                              const Eigen::Ref<const PointMatrix>& U) const {
    if (X.rows() != U.rows() || X.cols() != d_x_ || U.cols() != d_u_) {
      throw InputError("supply: sample dimensions do not match the supply spec");
    }
    MatrixXd v0(rank(), X.rows());
    MatrixXd v1(rank(), X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const VectorXd x = X.row(i).transpose();
      const VectorXd u = U.row(i).transpose();
      for (Eigen::Index j = 0; j < rank(); ++j) {
        v0(j, i) = factors_[j].q0(x, u);
        v1(j, i) = factors_[j].q1(x, u);
      }
    }
    return {v0, v1};
  }

 private:
  int d_x_;
  int d_u_;
  FactorList factors_;
  std::string name_;
  std::optional<QsrSupply> qsr_;
};

inline double supply_eval(const SupplyRateSpec& spec, const VectorXd& x, const VectorXd& u) {
  return spec(x, u);
}

/// Theta_S = (H0^T H1 + H1^T H0) / 2.
inline MatrixXd assemble_theta_s(const MatrixXd& H0, const MatrixXd& H1) {
  if (H0.rows() != H1.rows() || H0.cols() != H1.cols()) {
    throw InputError("assemble_theta_s: H0 and H1 must have the same shape");
  }
  const MatrixXd cross = H0.transpose() * H1;
  return 0.5 * (cross + cross.transpose());
}

/// Ridge-regression estimate of the supply operator on a sample.
struct SupplyEstimate {
  LinearRadialKernel kernel;  ///< joint state-input kernel
  PointMatrix anchors;        ///< rows (x_i, u_i)
  MatrixXd H0;
  MatrixXd H1;
  MatrixXd theta_s;
  double beta_reg;

  /// Supply operator as a kernel quadratic form on the anchors.
  KernelQuadraticForm as_form() const { return KernelQuadraticForm(kernel, anchors, theta_s); }

  /// Estimated supply at z = (x, u).
  template <typename Derived>
  double operator()(const Eigen::MatrixBase<Derived>& z) const {
    const VectorXd k = kernel_column(kernel, anchors, z);
    return k.dot(theta_s * k);
  }

  /// Samples of [G_xu^T Theta_S G_xu]_{kk}.
  VectorXd on_sample(const MatrixXd& G_xu) const {
    const MatrixXd F0 = H0 * G_xu;
    const MatrixXd F1 = H1 * G_xu;
    if (F0.rows() == 0) return VectorXd::Zero(G_xu.cols());
    return (F0.array() * F1.array()).colwise().sum().transpose();
  }
};

inline double default_beta_reg(Eigen::Index n) { return 1e-6 * static_cast<double>(n); }

inline PointMatrix stack_state_input(const Eigen::Ref<const PointMatrix>& X, const Eigen::Ref<const PointMatrix>& U) {
  if (X.rows() != U.rows()) throw InputError("state and input row counts differ");
  PointMatrix Z(X.rows(), X.cols() + U.cols());
  Z << X, U;
  return Z;
}

/// Fits every factor of `spec` by ridge regression on the sample (X, U).
inline SupplyEstimate fit_supply(const SupplyRateSpec& spec, const LinearRadialKernel& joint,
                                 const Eigen::Ref<const PointMatrix>& X, const Eigen::Ref<const PointMatrix>& U,
                                 double beta_reg) {
  if (joint.d_x() != spec.d_x() || joint.d_u() != spec.d_u()) {
    throw InputError("fit_supply: kernel and supply dimensions differ");
  }
  if (X.rows() == 0) throw InputError("fit_supply: empty sample");
  PointMatrix Z = stack_state_input(X, U);
  const MatrixXd G = gram(joint, Z);
  const RegularizedGramSolver solver(G, beta_reg);
  auto [v0, v1] = spec.factor_values(X, U);
  MatrixXd H0 = solver.coefficients(v0);
  MatrixXd H1 = solver.coefficients(v1);
  MatrixXd theta = assemble_theta_s(H0, H1);
  return SupplyEstimate{joint, std::move(Z), std::move(H0), std::move(H1), std::move(theta), beta_reg};
}

/// max(|z|^2, |z|), the scaling applied to supply errors and dissipativity residuals.
inline double scale_norm(double znorm) { return std::max(znorm * znorm, znorm); }

struct SupplyErrorStats {
  double max_scaled_err = 0.0;
  double rms_err = 0.0;
  VectorXd per_point;  ///< |s_hat(z) - s(z)| / (|z|^2 v |z|), 0 at the origin
};

/// Scaled supply-estimation error on probe points (rows of X, U).
inline SupplyErrorStats supply_qf_error(const SupplyEstimate& est, const SupplyRateSpec& spec,
                                        const Eigen::Ref<const PointMatrix>& X,
                                        const Eigen::Ref<const PointMatrix>& U) {
  SupplyErrorStats stats;
  const Eigen::Index n = X.rows();
  stats.per_point = VectorXd::Zero(n);
  if (n == 0) return stats;
  const PointMatrix Z = stack_state_input(X, U);
  double sumsq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double zn = Z.row(i).norm();
    if (zn < 1e-12) continue;
    const double err = std::abs(est(Z.row(i)) - spec(X.row(i).transpose(), U.row(i).transpose()));
    stats.per_point(i) = err / scale_norm(zn);
    sumsq += stats.per_point(i) * stats.per_point(i);
  }
  stats.max_scaled_err = stats.per_point.maxCoeff();
  stats.rms_err = std::sqrt(sumsq / static_cast<double>(n));
  return stats;
}

/// K-fold cross-validation of beta_reg over `candidates`; folds are i mod k.
/// Returns the candidate with the smallest mean squared validation error over all factors.
inline double cross_validate_beta(const SupplyRateSpec& spec, const LinearRadialKernel& joint,
                                  const Eigen::Ref<const PointMatrix>& X, const Eigen::Ref<const PointMatrix>& U,
                                  const std::vector<double>& candidates, int folds = 5) {
  if (candidates.empty()) throw InputError("cross_validate_beta: no candidates");
  const Eigen::Index n = X.rows();
  if (folds < 2 || n < folds) throw InputError("cross_validate_beta: need at least `folds` samples");
  const PointMatrix Z = stack_state_input(X, U);
  const MatrixXd G = gram(joint, Z);
  auto [v0, v1] = spec.factor_values(X, U);
  MatrixXd targets(v0.rows() + v1.rows(), n);
  targets << v0, v1;

  double best = candidates.front();
  double best_err = std::numeric_limits<double>::infinity();
  for (double beta : candidates) {
    double sse = 0.0;
    for (int f = 0; f < folds; ++f) {
      std::vector<Eigen::Index> train, test;
      for (Eigen::Index i = 0; i < n; ++i) (i % folds == f ? test : train).push_back(i);
      const Eigen::Index nt = static_cast<Eigen::Index>(train.size());
      MatrixXd Gtr(nt, nt), Gte(static_cast<Eigen::Index>(test.size()), nt);
      MatrixXd Ttr(targets.rows(), nt);
      for (Eigen::Index a = 0; a < nt; ++a) {
        Ttr.col(a) = targets.col(train[a]);
        for (Eigen::Index b = 0; b < nt; ++b) Gtr(a, b) = G(train[a], train[b]);
        for (std::size_t t = 0; t < test.size(); ++t) Gte(static_cast<Eigen::Index>(t), a) = G(test[t], train[a]);
      }
      const MatrixXd H = krr_fit(Ttr, Gtr, beta);
      const MatrixXd pred = H * Gte.transpose();
      for (std::size_t t = 0; t < test.size(); ++t) {
        sse += (pred.col(static_cast<Eigen::Index>(t)) - targets.col(test[t])).squaredNorm();
      }
    }
    if (sse < best_err) {
      best_err = sse;
      best = beta;
    }
  }
  return best;
}

}  // namespace dissipkit
