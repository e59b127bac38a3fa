#pragma once

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "dissipkit/errors.hpp"

namespace dissipkit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Point lists are stored one point per row.
using PointMatrix = Eigen::MatrixXd;

enum class ProfileFamily { Matern, Gaussian };

inline std::string to_string(ProfileFamily f) {
  return f == ProfileFamily::Matern ? "matern" : "gaussian";
}

inline ProfileFamily profile_family_from_string(const std::string& name) {
  if (name == "matern") return ProfileFamily::Matern;
  if (name == "gaussian") return ProfileFamily::Gaussian;
  throw ConfigError("unknown kernel family '" + name + "' (expected 'matern' or 'gaussian')");
}

/// Radial profile rho with rho(0) = 1.
///
/// Matern profiles are available in closed form for half-integer orders
/// nu in {1/2, 3/2, 5/2, 7/2}; the Gaussian profile ignores `smoothness`.
class RadialProfile {
 public:
  RadialProfile(ProfileFamily family, double smoothness, double lengthscale)
      : family_(family), smoothness_(smoothness), lengthscale_(lengthscale) {
    if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
      throw ConfigError("kernel lengthscale must be a positive finite number");
    }
    if (family == ProfileFamily::Matern) matern_order_index();
  }

  static RadialProfile gaussian(double lengthscale) {
    return RadialProfile(ProfileFamily::Gaussian, 0.0, lengthscale);
  }
  static RadialProfile matern(double nu, double lengthscale) {
    return RadialProfile(ProfileFamily::Matern, nu, lengthscale);
  }

  ProfileFamily family() const { return family_; }
  double smoothness() const { return smoothness_; }
  double lengthscale() const { return lengthscale_; }
  double rho0() const { return 1.0; }

  double operator()(double r) const {
    r = std::abs(r);
    const double t = r / lengthscale_;
    if (family_ == ProfileFamily::Gaussian) return std::exp(-0.5 * t * t);
    switch (matern_order_index()) {
      case 0:
        return std::exp(-t);
      case 1: {
        const double a = std::sqrt(3.0) * t;
        return (1.0 + a) * std::exp(-a);
      }
      case 2: {
        const double a = std::sqrt(5.0) * t;
        return (1.0 + a + a * a / 3.0) * std::exp(-a);
      }
      default: {
        const double a = std::sqrt(7.0) * t;
        return (1.0 + a + 2.0 * a * a / 5.0 + a * a * a / 15.0) * std::exp(-a);
      }
    }
  }

  friend bool operator==(const RadialProfile&, const RadialProfile&) = default;

 private:
  int matern_order_index() const {
    constexpr double kOrders[] = {0.5, 1.5, 2.5, 3.5};
    for (int k = 0; k < 4; ++k) {
      if (std::abs(smoothness_ - kOrders[k]) < 1e-12) return k;
    }
    throw ConfigError("unsupported Matern order " + std::to_string(smoothness_) +
                      " (closed forms exist for 0.5, 1.5, 2.5, 3.5)");
  }

  ProfileFamily family_;
  double smoothness_;
  double lengthscale_;
};

inline double profile_eval(const RadialProfile& profile, double r) {
  if (r < 0.0) throw InputError("profile_eval: radius must be nonnegative");
  return profile(r);
}

/// Linear-radial kernel k(z, z') = (z . z') rho(|z - z'|_w) on R^{d_x + d_u}.
///
/// The linear factor uses the plain inner product; only the distance inside
/// rho is weighted. With d_u = 0 this is the state kernel.
class LinearRadialKernel {
 public:
  LinearRadialKernel(RadialProfile profile, int d_x, int d_u, VectorXd weights)
      : profile_(std::move(profile)), d_x_(d_x), d_u_(d_u), weights_(std::move(weights)) {
    if (d_x <= 0 || d_u < 0) throw InputError("kernel dimensions must satisfy d_x > 0, d_u >= 0");
    if (weights_.size() != d_x + d_u) {
      throw InputError("kernel weights must have length d_x + d_u = " + std::to_string(d_x + d_u));
    }
    if ((weights_.array() <= 0.0).any()) throw ConfigError("kernel weights must be positive");
  }

  LinearRadialKernel(RadialProfile profile, int d_x, int d_u)
      : LinearRadialKernel(std::move(profile), d_x, d_u, VectorXd::Ones(d_x + d_u)) {}

  const RadialProfile& profile() const { return profile_; }
  int d_x() const { return d_x_; }
  int d_u() const { return d_u_; }
  int dim() const { return d_x_ + d_u_; }
  const VectorXd& weights() const { return weights_; }

  /// The state-only kernel sharing this profile and the state weights.
  LinearRadialKernel state_kernel() const {
    return LinearRadialKernel(profile_, d_x_, 0, weights_.head(d_x_));
  }

  template <typename A, typename B>
  double operator()(const Eigen::MatrixBase<A>& z, const Eigen::MatrixBase<B>& zp) const {
    if (z.size() != dim() || zp.size() != dim()) {
      throw InputError("kernel_eval: expected points of dimension " + std::to_string(dim()));
    }
    return eval_unchecked(z, zp);
  }

  template <typename A, typename B>
  double eval_unchecked(const Eigen::MatrixBase<A>& z, const Eigen::MatrixBase<B>& zp) const {
    double dot = 0.0;
    double dist2 = 0.0;
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      dot += z(k) * zp(k);
      const double d = z(k) - zp(k);
      dist2 += weights_(k) * d * d;
    }
    if (dot == 0.0) return 0.0;
    return dot * profile_(std::sqrt(dist2));
  }

  friend bool operator==(const LinearRadialKernel& a, const LinearRadialKernel& b) {
    return a.profile_ == b.profile_ && a.d_x_ == b.d_x_ && a.d_u_ == b.d_u_ &&
           a.weights_ == b.weights_;
  }

 private:
  RadialProfile profile_;
  int d_x_;
  int d_u_;
  VectorXd weights_;
};

template <typename A, typename B>
double kernel_eval(const LinearRadialKernel& kernel, const Eigen::MatrixBase<A>& z,
                   const Eigen::MatrixBase<B>& zp) {
  return kernel(z, zp);
}

/// Cross Gram matrix with entry (i, j) = k(rows_i, cols_j).
///
/// When `rows` and `cols` are the same object the result is symmetrized as
/// (G + G^T) / 2.
inline MatrixXd gram(const LinearRadialKernel& kernel, const Eigen::Ref<const PointMatrix>& rows,
                     const Eigen::Ref<const PointMatrix>& cols) {
  if (rows.rows() == 0 || cols.rows() == 0) throw InputError("gram: empty point list");
  if (rows.cols() != kernel.dim() || cols.cols() != kernel.dim()) {
    throw InputError("gram: point dimension does not match kernel dimension " +
                     std::to_string(kernel.dim()));
  }
  MatrixXd g(rows.rows(), cols.rows());
  for (Eigen::Index j = 0; j < cols.rows(); ++j) {
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      g(i, j) = kernel.eval_unchecked(rows.row(i), cols.row(j));
    }
  }
  const bool same = rows.data() == cols.data() && rows.rows() == cols.rows() &&
                    rows.cols() == cols.cols() && rows.outerStride() == cols.outerStride();
  if (same || (rows.rows() == cols.rows() && rows == cols)) {
    g = (0.5 * (g + g.transpose())).eval();
  }
  return g;
}

inline MatrixXd gram(const LinearRadialKernel& kernel, const Eigen::Ref<const PointMatrix>& points) {
  return gram(kernel, points, points);
}

/// Column vector (k(anchor_i, z))_i.
template <typename Derived>
VectorXd kernel_column(const LinearRadialKernel& kernel, const Eigen::Ref<const PointMatrix>& anchors,
                       const Eigen::MatrixBase<Derived>& z) {
  if (z.size() != kernel.dim()) {
    throw InputError("kernel_column: expected a point of dimension " + std::to_string(kernel.dim()));
  }
  VectorXd k(anchors.rows());
  for (Eigen::Index i = 0; i < anchors.rows(); ++i) k(i) = kernel.eval_unchecked(anchors.row(i), z);
  return k;
}

/// PSD tolerance used for Gram checks: 1e-8 * n * max diagonal entry.
inline double psd_tolerance(const MatrixXd& g) {
  const double maxdiag = g.rows() ? g.diagonal().maxCoeff() : 0.0;
  return 1e-8 * static_cast<double>(g.rows()) * std::max(maxdiag, 0.0);
}

inline double min_eigenvalue(const MatrixXd& sym) {
  if (sym.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

/// The three Gram matrices of the data LMI.
struct GramBundle {
  MatrixXd G_xx;   ///< [k(x_i, x_j)]
  MatrixXd G_xxp;  ///< [k(x_i, x_j^+)], not symmetric
  MatrixXd G_xu;   ///< [k((x_i,u_i), (x_j,u_j))]

  Eigen::Index size() const { return G_xx.rows(); }
};

/// Builds the Gram bundle from states X, inputs U and successors Xp (rows are samples).
/// `joint` is the state-input kernel; its state part provides the state kernel.
inline GramBundle make_gram_bundle(const LinearRadialKernel& joint, const Eigen::Ref<const PointMatrix>& X,
                                   const Eigen::Ref<const PointMatrix>& U,
                                   const Eigen::Ref<const PointMatrix>& Xp) {
  if (X.rows() != U.rows() || X.rows() != Xp.rows()) throw InputError("gram bundle: row counts differ");
  if (X.cols() != joint.d_x() || Xp.cols() != joint.d_x() || U.cols() != joint.d_u()) {
    throw InputError("gram bundle: data dimensions do not match the kernel");
  }
  const LinearRadialKernel state = joint.state_kernel();
  PointMatrix Z(X.rows(), joint.dim());
  Z << X, U;
  GramBundle b;
  b.G_xx = gram(state, X);
  b.G_xxp = gram(state, X, Xp);
  b.G_xu = gram(joint, Z);
  return b;
}

}  // namespace dissipkit
