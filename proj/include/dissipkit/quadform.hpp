#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dissipkit/errors.hpp"
#include "dissipkit/kernels.hpp"
#include "dissipkit/krr.hpp"

namespace dissipkit {

/// z -> k_z^T Theta k_z with (k_z)_i = k(anchor_i, z).
///
/// Storage functions use state anchors and the state kernel; supply operators
/// use state-input anchors and the joint kernel. Theta is kept exactly
/// symmetric.
class KernelQuadraticForm {
 public:
  KernelQuadraticForm(LinearRadialKernel kernel, PointMatrix anchors, MatrixXd theta)
      : kernel_(std::move(kernel)), anchors_(std::move(anchors)), theta_(std::move(theta)) {
    if (anchors_.cols() != kernel_.dim()) {
      throw InputError("quadratic form: anchor dimension does not match kernel dimension");
    }
    if (theta_.rows() != anchors_.rows() || theta_.cols() != anchors_.rows()) {
      throw InputError("quadratic form: theta must be n x n for n anchors");
    }
    const double asym = (theta_ - theta_.transpose()).cwiseAbs().maxCoeff();
    const double scale = theta_.size() ? theta_.cwiseAbs().maxCoeff() : 0.0;
    if (asym > 1e-8 * scale) throw InputError("quadratic form: theta is not symmetric");
    theta_ = (0.5 * (theta_ + theta_.transpose())).eval();
  }

  const LinearRadialKernel& kernel() const { return kernel_; }
  const PointMatrix& anchors() const { return anchors_; }
  const MatrixXd& theta() const { return theta_; }
  Eigen::Index size() const { return anchors_.rows(); }

  template <typename Derived>
  double operator()(const Eigen::MatrixBase<Derived>& z) const {
    if (z.size() != kernel_.dim()) {
      throw InputError("qf_eval: expected a point of dimension " + std::to_string(kernel_.dim()));
    }
    if (anchors_.rows() == 0) return 0.0;
    const VectorXd k = kernel_column(kernel_, anchors_, z);
    return k.dot(theta_ * k);
  }

 private:
  LinearRadialKernel kernel_;
  PointMatrix anchors_;
  MatrixXd theta_;
};

template <typename Derived>
double qf_eval(const KernelQuadraticForm& form, const Eigen::MatrixBase<Derived>& z) {
  return form(z);
}

/// Pointwise evaluation over the rows of `points`.
inline VectorXd qf_eval_batch(const KernelQuadraticForm& form, const Eigen::Ref<const PointMatrix>& points) {
  VectorXd out(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) out(i) = form(points.row(i));
  return out;
}

/// Kernel quadratic form approximating v(x) = x^T M x on `anchors`.
///
/// Each eigen-factor omega_k(x) = sqrt(lambda_k) w_k^T x is projected onto the
/// anchor features by ridge regression; theta = H^T H is PSD.
inline KernelQuadraticForm qf_from_quadratic(const MatrixXd& M, const LinearRadialKernel& kernel,
                                             const PointMatrix& anchors, double beta_reg = 1e-8) {
  if (M.rows() != M.cols() || M.rows() != kernel.dim()) {
    throw InputError("qf_from_quadratic: M must be square with the kernel dimension");
  }
  const double scale = M.size() ? M.cwiseAbs().maxCoeff() : 0.0;
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0)) {
    throw InputError("qf_from_quadratic: M is not symmetric");
  }
  const Eigen::Index n = anchors.rows();
  if (n == 0) throw InputError("qf_from_quadratic: no anchors");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()));
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  if (es.eigenvalues().minCoeff() < -1e-10 * std::max(lmax, 1.0)) {
    throw InputError("qf_from_quadratic: M is not positive semidefinite");
  }
  std::vector<VectorXd> factors;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    const double lam = es.eigenvalues()(k);
    if (lam > 1e-12 * lmax) factors.push_back(std::sqrt(lam) * es.eigenvectors().col(k));
  }
  if (factors.empty()) return KernelQuadraticForm(kernel, anchors, MatrixXd::Zero(n, n));

  MatrixXd values(static_cast<Eigen::Index>(factors.size()), n);
  for (std::size_t k = 0; k < factors.size(); ++k) {
    values.row(static_cast<Eigen::Index>(k)) = (anchors * factors[k]).transpose();
  }
  const MatrixXd H = krr_fit(values, gram(kernel, anchors), beta_reg);
  return KernelQuadraticForm(kernel, anchors, H.transpose() * H);
}

}  // namespace dissipkit
