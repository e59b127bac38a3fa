#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "dissipkit/errors.hpp"
#include "dissipkit/kernels.hpp"

namespace dissipkit {

/// Factorization of (G + beta I), shared by every right-hand side fitted on one sample.
class RegularizedGramSolver {
 public:
  RegularizedGramSolver(const MatrixXd& gram, double beta_reg) : beta_(beta_reg) {
    if (!(beta_reg > 0.0) || !std::isfinite(beta_reg)) {
      throw ConfigError("krr: beta_reg must be a positive finite number");
    }
    if (gram.rows() != gram.cols()) throw InputError("krr: Gram matrix must be square");
    MatrixXd reg = gram;
    reg.diagonal().array() += beta_reg;
    llt_.compute(reg);
    if (llt_.info() != Eigen::Success) {
      throw NumericError("krr: (G + beta I) is not positive definite; Gram matrix is not PSD");
    }
  }

  /// Coefficients H = values (G + beta I)^{-1} for an m x n matrix of targets.
  MatrixXd coefficients(const MatrixXd& values) const {
    if (values.cols() != llt_.rows()) {
      throw InputError("krr: target matrix has " + std::to_string(values.cols()) +
                       " columns, expected " + std::to_string(llt_.rows()));
    }
    if (values.rows() == 0) return MatrixXd(0, values.cols());
    return llt_.solve(values.transpose()).transpose();
  }

  double beta() const { return beta_; }

 private:
  double beta_;
  Eigen::LLT<MatrixXd> llt_;
};

/// Kernel ridge regression coefficients H = values (G_xu + beta I)^{-1}.
inline MatrixXd krr_fit(const MatrixXd& values, const MatrixXd& gram, double beta_reg) {
  return RegularizedGramSolver(gram, beta_reg).coefficients(values);
}

}  // namespace dissipkit
