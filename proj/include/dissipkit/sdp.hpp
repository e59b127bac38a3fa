#pragma once

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dissipkit/errors.hpp"
#include "dissipkit/kernels.hpp"

namespace dissipkit {

/// Linear functional <A, Theta> <= rhs on the PSD variable.
///
/// Constraints built with `rank_two` also carry the factorization
/// A = a a^T - b b^T, which the solver exploits when forming its Schur
/// complement.
struct SdpConstraint {
  MatrixXd A;
  double rhs = 0.0;
  MatrixXd factors;      ///< n x r, columns c_k with A = sum_k sign_k c_k c_k^T (may be empty)
  VectorXd signs;        ///< length r

  static SdpConstraint dense(MatrixXd A, double rhs) {
    if (A.rows() != A.cols()) throw InputError("sdp constraint: A must be square");
    SdpConstraint c;
    c.A = 0.5 * (A + A.transpose());
    c.rhs = rhs;
    return c;
  }

  static SdpConstraint rank_two(const VectorXd& a, const VectorXd& b, double rhs) {
    if (a.size() != b.size()) throw InputError("sdp constraint: factor lengths differ");
    SdpConstraint c;
    c.A = a * a.transpose() - b * b.transpose();
    c.rhs = rhs;
    c.factors.resize(a.size(), 2);
    c.factors.col(0) = a;
    c.factors.col(1) = b;
    c.signs = Eigen::Vector2d(1.0, -1.0);
    return c;
  }

  bool low_rank() const { return factors.cols() > 0; }
};

/// min <C, Theta>  s.t.  <A_i, Theta> <= rhs_i,  [tr(Theta) <= trace_cap],  Theta PSD.
struct SdpProblem {
  Eigen::Index dim = 0;
  MatrixXd cost;
  std::vector<SdpConstraint> constraints;
  std::optional<double> trace_cap;

  void validate() const {
    if (dim <= 0) throw InputError("sdp: dimension must be positive");
    if (cost.rows() != dim || cost.cols() != dim) throw InputError("sdp: cost must be dim x dim");
    for (const auto& c : constraints) {
      if (c.A.rows() != dim || c.A.cols() != dim) throw InputError("sdp: constraint matrix must be dim x dim");
      if (!std::isfinite(c.rhs)) throw InputError("sdp: non-finite right-hand side");
    }
    if (trace_cap && !(*trace_cap > 0.0)) throw InputError("sdp: trace_cap must be positive");
  }
};

enum class SdpStatus { Optimal, Infeasible, Unbounded, NumericalLimit };

inline std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::Infeasible: return "infeasible";
    case SdpStatus::Unbounded: return "unbounded";
    default: return "numerical_limit";
  }
}

struct SdpSolution {
  SdpStatus status = SdpStatus::NumericalLimit;
  MatrixXd theta_p;              ///< final (or best) primal iterate
  VectorXd multipliers;          ///< dual multipliers lambda >= 0 of the inequality constraints
  double objective = 0.0;
  double dual_objective = 0.0;
  double max_constraint_residual = 0.0;  ///< max_i max(0, <A_i,Theta> - rhs_i) / (1 + |rhs_i|)
  double relative_gap = 0.0;
  double min_eigenvalue = 0.0;
  int solver_iterations = 0;
  /// Primal infeasibility certificate: lambda >= 0, sum lambda_i A_i PSD, sum lambda_i rhs_i = -1.
  std::optional<VectorXd> certificate;
  double certificate_trace_multiplier = 0.0;  ///< multiplier on the trace cap row, if any
  std::string message;
};

struct SdpOptions {
  double tol = 1e-8;
  int max_iter = 200;
  double infeasibility_tol = 1e-7;
  /// When progress stalls, the best iterate is still reported Optimal if its residuals and gap are below this.
  double reduced_tol = 1e-6;
  /// Directions whose relative singular value in the stacked data is below this are dropped.
  double range_tol = 1e-10;
  /// Adds ridge * (tr C / dim) * tr(Theta) to the objective; feasibility is unaffected.
  double objective_ridge = 0.0;
  bool verbose = false;  ///< per-iteration trace on stderr
};

namespace detail {

class SdpIpm {
 public:
  SdpIpm(const SdpProblem& p, const SdpOptions& opt) : prob_(p), opt_(opt), n_(p.dim), full_n_(p.dim) {}

  SdpSolution run() {
    SdpSolution sol;
    if (!setup(sol)) return sol;
    if (m_ == 0) return solve_unconstrained();
    return iterate();
  }

 private:
  // Rows are scaled to unit Frobenius norm; the cost to unit norm.
  bool setup(SdpSolution& sol) {
    const Eigen::Index mc = static_cast<Eigen::Index>(prob_.constraints.size());
    const double cnorm = prob_.cost.norm();
    cost_scale_ = cnorm > 0.0 ? 1.0 / cnorm : 1.0;
    C_ = cost_scale_ * 0.5 * (prob_.cost + prob_.cost.transpose());

    for (Eigen::Index i = 0; i < mc; ++i) {
      const auto& c = prob_.constraints[static_cast<std::size_t>(i)];
      const double nrm = c.A.norm();
      if (nrm == 0.0) {
        if (c.rhs < -opt_.infeasibility_tol) {
          sol.status = SdpStatus::Infeasible;
          VectorXd cert = VectorXd::Zero(mc);
          cert(i) = 1.0 / -c.rhs;
          sol.certificate = cert;
          sol.theta_p = MatrixXd::Zero(n_, n_);
          sol.message = "constraint " + std::to_string(i) + " reads 0 <= rhs < 0";
          return false;
        }
        continue;
      }
      Row r;
      r.source = i;
      r.scale = 1.0 / nrm;
      r.rhs = c.rhs * r.scale;
      if (c.low_rank()) {
        r.low_rank = true;
        r.factors = c.factors * std::sqrt(r.scale);
        r.signs = c.signs;
      } else {
        r.A = c.A * r.scale;
      }
      rows_.push_back(std::move(r));
    }
    if (prob_.trace_cap) {
      Row r;
      r.source = -1;
      r.scale = 1.0 / std::sqrt(static_cast<double>(n_));
      r.rhs = *prob_.trace_cap * r.scale;
      r.A = MatrixXd::Identity(n_, n_) * r.scale;
      rows_.push_back(std::move(r));
    }
    m_ = static_cast<Eigen::Index>(rows_.size());
    b_.resize(m_);
    for (Eigen::Index i = 0; i < m_; ++i) b_(i) = rows_[static_cast<std::size_t>(i)].rhs;
    reduce_range();
    if (opt_.objective_ridge > 0.0) {
      const double tau = opt_.objective_ridge * std::max(C_.trace(), 0.0) / static_cast<double>(full_n_);
      ridge_ = tau > 0.0 ? tau : opt_.objective_ridge;
      C_.diagonal().array() += ridge_;
    }

    // Stack all low-rank factors for the Schur complement.
    Eigen::Index K = 0;
    for (const auto& r : rows_) K += r.low_rank ? r.factors.cols() : 0;
    F_.resize(n_, K);
    fsign_.resize(K);
    fowner_.resize(static_cast<std::size_t>(K));
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const auto& r = rows_[static_cast<std::size_t>(i)];
      if (!r.low_rank) {
        dense_rows_.push_back(i);
        continue;
      }
      for (Eigen::Index c = 0; c < r.factors.cols(); ++c, ++k) {
        F_.col(k) = r.factors.col(c);
        fsign_(k) = r.signs(c);
        fowner_[static_cast<std::size_t>(k)] = i;
      }
    }
    return true;
  }

  // Theta only enters through V^T Theta V, V spanning the data; solving for
  // Phi = V^T Theta V drops the directions no constraint or cost can see.
  void reduce_range() {
    std::vector<MatrixXd> blocks;
    auto add_sym = [&](const MatrixXd& S) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
      const VectorXd lam = es.eigenvalues().cwiseAbs();
      if (lam.size() == 0 || lam.maxCoeff() == 0.0) return;
      std::vector<Eigen::Index> keep;
      for (Eigen::Index k = 0; k < lam.size(); ++k) {
        if (lam(k) > 1e-15 * lam.maxCoeff()) keep.push_back(k);
      }
      MatrixXd B(n_, static_cast<Eigen::Index>(keep.size()));
      for (std::size_t k = 0; k < keep.size(); ++k) {
        B.col(static_cast<Eigen::Index>(k)) = std::sqrt(lam(keep[k])) * es.eigenvectors().col(keep[k]);
      }
      blocks.push_back(std::move(B));
    };
    bool has_identity = false;
    for (const auto& r : rows_) {
      if (r.low_rank) {
        blocks.push_back(r.factors);
      } else if (r.source < 0) {
        has_identity = true;
      } else {
        add_sym(r.A);
      }
    }
    if (has_identity) return;
    add_sym(C_);
    Eigen::Index cols = 0;
    for (const auto& b : blocks) cols += b.cols();
    if (cols == 0) return;
    MatrixXd W(n_, cols);
    cols = 0;
    for (const auto& b : blocks) {
      W.middleCols(cols, b.cols()) = b;
      cols += b.cols();
    }
    Eigen::BDCSVD<MatrixXd> svd(W, Eigen::ComputeThinU);
    const VectorXd& sv = svd.singularValues();
    Eigen::Index r = 0;
    while (r < sv.size() && sv(r) > opt_.range_tol * sv(0)) ++r;
    if (r == 0 || r >= n_) return;
    V_ = svd.matrixU().leftCols(r);
    C_ = (V_.transpose() * C_ * V_).eval();
    for (auto& row : rows_) {
      if (row.low_rank) {
        row.factors = (V_.transpose() * row.factors).eval();
      } else {
        row.A = (V_.transpose() * row.A * V_).eval();
      }
    }
    n_ = r;
  }

  MatrixXd lift(const MatrixXd& X) const { return V_.size() ? MatrixXd(V_ * X * V_.transpose()) : X; }

  SdpSolution solve_unconstrained() const {
    SdpSolution sol;
    sol.theta_p = MatrixXd::Zero(full_n_, full_n_);
    sol.multipliers = VectorXd::Zero(static_cast<Eigen::Index>(prob_.constraints.size()));
    if (min_eigenvalue(C_) >= -opt_.tol) {
      sol.status = SdpStatus::Optimal;
      sol.message = "no active constraints; zero is optimal";
    } else {
      sol.status = SdpStatus::Unbounded;
      sol.message = "cost has a negative direction on the PSD cone";
    }
    return sol;
  }

  VectorXd apply_A(const MatrixXd& Y) const {
    VectorXd out = VectorXd::Zero(m_);
    if (F_.cols() > 0) {
      const MatrixXd YF = Y * F_;
      for (Eigen::Index k = 0; k < F_.cols(); ++k) {
        out(fowner_[static_cast<std::size_t>(k)]) += fsign_(k) * F_.col(k).dot(YF.col(k));
      }
    }
    for (Eigen::Index i : dense_rows_) out(i) = rows_[static_cast<std::size_t>(i)].A.cwiseProduct(Y).sum();
    return out;
  }

  MatrixXd apply_At(const VectorXd& y) const {
    MatrixXd out = MatrixXd::Zero(n_, n_);
    if (F_.cols() > 0) {
      VectorXd w(F_.cols());
      for (Eigen::Index k = 0; k < F_.cols(); ++k) w(k) = fsign_(k) * y(fowner_[static_cast<std::size_t>(k)]);
      out.noalias() = F_ * w.asDiagonal() * F_.transpose();
    }
    for (Eigen::Index i : dense_rows_) out += y(i) * rows_[static_cast<std::size_t>(i)].A;
    return out;
  }

  // HKM Schur complement M_ij = tr(A_i X A_j Z^{-1}).
  MatrixXd schur(const MatrixXd& X, const MatrixXd& Zi) const {
    MatrixXd M = MatrixXd::Zero(m_, m_);
    if (F_.cols() > 0) {
      const MatrixXd P = F_.transpose() * X * F_;
      const MatrixXd Q = F_.transpose() * Zi * F_;
      MatrixXd E = P.cwiseProduct(Q);
      E = fsign_.asDiagonal() * E * fsign_.asDiagonal();
      for (Eigen::Index p = 0; p < E.rows(); ++p) {
        const Eigen::Index i = fowner_[static_cast<std::size_t>(p)];
        for (Eigen::Index q = 0; q < E.cols(); ++q) M(i, fowner_[static_cast<std::size_t>(q)]) += E(p, q);
      }
    }
    for (Eigen::Index i : dense_rows_) {
      const MatrixXd T = X * rows_[static_cast<std::size_t>(i)].A * Zi;
      const VectorXd col = apply_A(T);
      M.col(i) = col;
      M.row(i) = col.transpose();
    }
    return 0.5 * (M + M.transpose());
  }

  // Largest alpha with V + alpha dV PSD (infinity when unbounded).
  static double max_step_psd(const MatrixXd& V, const MatrixXd& dV) {
    Eigen::LLT<MatrixXd> llt(V);
    if (llt.info() != Eigen::Success) return 0.0;
    const MatrixXd L = llt.matrixL();
    MatrixXd W = L.triangularView<Eigen::Lower>().solve(dV);
    W = L.triangularView<Eigen::Lower>().solve(W.transpose()).eval();
    const double lmin = min_eigenvalue(0.5 * (W + W.transpose()));
    return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
  }

  static double max_step_pos(const VectorXd& v, const VectorXd& dv) {
    double a = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
    }
    return a;
  }

  struct Direction {
    MatrixXd dX, dZ;
    VectorXd dxl, dzl, dy;
  };

  // Newton direction for target  dX = K - X dZ Z^{-1},  dxl = kl - D dzl.
  Direction direction(const Eigen::LLT<MatrixXd>& schur_llt, const MatrixXd& X, const MatrixXd& Zi,
                      const VectorXd& d, const MatrixXd& Rd, const VectorXd& rdl, const VectorXd& rp,
                      const MatrixXd& K, const VectorXd& kl) const {
    Direction dir;
    const MatrixXd XRdZi = X * Rd * Zi;
    const VectorXd rhs = rp - apply_A(K - XRdZi) - kl + d.cwiseProduct(rdl);
    dir.dy = schur_llt.solve(rhs);
    const MatrixXd AtDy = apply_At(dir.dy);
    dir.dZ = Rd - AtDy;
    dir.dzl = rdl - dir.dy;
    MatrixXd dX = K - XRdZi + X * AtDy * Zi;
    dir.dX = 0.5 * (dX + dX.transpose());
    dir.dxl = kl - d.cwiseProduct(dir.dzl);
    return dir;
  }

  SdpSolution iterate() {
    const double bnorm = b_.norm();
    const double Cnorm = C_.norm();
    const double xi = std::max({10.0, std::sqrt(static_cast<double>(n_)),
                                static_cast<double>(n_) * (1.0 + b_.cwiseAbs().maxCoeff())});
    const double eta = std::max({10.0, std::sqrt(static_cast<double>(n_)), 1.0 + Cnorm});
    MatrixXd X = xi * MatrixXd::Identity(n_, n_);
    MatrixXd Z = eta * MatrixXd::Identity(n_, n_);
    VectorXd xl = VectorXd::Constant(m_, xi);
    VectorXd zl = VectorXd::Constant(m_, eta);
    VectorXd y = VectorXd::Zero(m_);
    const double N = static_cast<double>(n_ + m_);

    SdpSolution sol;
    Best best;
    int iter = 0;
    int stalls = 0;
    int since_best = 0;
    for (; iter < opt_.max_iter; ++iter) {
      const double mu = (X.cwiseProduct(Z).sum() + xl.dot(zl)) / N;
      const VectorXd rp = b_ - apply_A(X) - xl;
      const MatrixXd Rd = C_ - apply_At(y) - Z;
      const VectorXd rdl = -y - zl;
      const double pobj = C_.cwiseProduct(X).sum();
      const double dobj = b_.dot(y);
      const double pinf = rp.norm() / (1.0 + bnorm);
      const double dinf = std::sqrt(Rd.squaredNorm() + rdl.squaredNorm()) / (1.0 + Cnorm);
      const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
      since_best = best.consider(X, y, pinf, dinf, gap) ? 0 : since_best + 1;
      if (opt_.verbose) {
        std::fprintf(stderr, "%3d pobj=% .6e dobj=% .6e pinf=%.2e dinf=%.2e gap=%.2e mu=%.2e |y|=%.2e trX=%.2e n=%d\n",
                   iter, pobj, dobj, pinf, dinf, gap, mu, y.cwiseAbs().maxCoeff(), X.trace(), int(n_));
      }

      if (pinf < opt_.tol && dinf < opt_.tol && gap < opt_.tol) {
        return finish(SdpStatus::Optimal, X, y, iter, "converged");
      }
      if (auto cert = primal_infeasibility_certificate(y)) {
        SdpSolution s = finish(SdpStatus::Infeasible, X, y, iter, "dual improving ray found");
        attach_certificate(s, *cert);
        return s;
      }
      if (pobj < 0.0 && primal_unbounded(X, pobj)) {
        return finish(SdpStatus::Unbounded, X, y, iter, "primal improving ray found");
      }
      // Degenerate problems can stall just short of tol; stop once the best iterate is good enough.
      if (since_best >= 15 && best.merit <= opt_.reduced_tol) break;

      Eigen::LLT<MatrixXd> zllt(Z);
      if (zllt.info() != Eigen::Success) break;
      const MatrixXd Zi = zllt.solve(MatrixXd::Identity(n_, n_));
      const VectorXd d = xl.cwiseQuotient(zl);
      MatrixXd M = schur(X, Zi);
      M.diagonal() += d;
      Eigen::LLT<MatrixXd> mllt(M);
      if (mllt.info() != Eigen::Success) {
        M.diagonal().array() += 1e-14 * std::max(1.0, M.diagonal().maxCoeff());
        mllt.compute(M);
        if (mllt.info() != Eigen::Success) break;
      }

      // Predictor.
      const Direction aff = direction(mllt, X, Zi, d, Rd, rdl, rp, -X, -xl);
      const double ap = std::min(1.0, std::min(max_step_psd(X, aff.dX), max_step_pos(xl, aff.dxl)));
      const double ad = std::min(1.0, std::min(max_step_psd(Z, aff.dZ), max_step_pos(zl, aff.dzl)));
      const double mu_aff =
          ((X + ap * aff.dX).cwiseProduct(Z + ad * aff.dZ).sum() + (xl + ap * aff.dxl).dot(zl + ad * aff.dzl)) / N;
      const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

      // Corrector.
      const MatrixXd K = (sigma * mu * Zi) - X - aff.dX * aff.dZ * Zi;
      const VectorXd kl = ((sigma * mu) - aff.dxl.cwiseProduct(aff.dzl).array()).matrix().cwiseQuotient(zl) - xl;
      const Direction dir = direction(mllt, X, Zi, d, Rd, rdl, rp, K, kl);

      const double sp = std::min(max_step_psd(X, dir.dX), max_step_pos(xl, dir.dxl));
      const double sd = std::min(max_step_psd(Z, dir.dZ), max_step_pos(zl, dir.dzl));
      const double gamma = 0.9 + 0.09 * std::min({1.0, sp, sd});
      const double alpha_p = std::min(1.0, gamma * sp);
      const double alpha_d = std::min(1.0, gamma * sd);
      if (alpha_p < 1e-10 && alpha_d < 1e-10) {
        if (++stalls >= 3) break;
      } else {
        stalls = 0;
      }
      if (opt_.verbose) std::fprintf(stderr, "    sigma=%.2e ap=%.2e ad=%.2e\n", sigma, alpha_p, alpha_d);
      X += alpha_p * dir.dX;
      X = (0.5 * (X + X.transpose())).eval();
      xl += alpha_p * dir.dxl;
      y += alpha_d * dir.dy;
      Z += alpha_d * dir.dZ;
      Z = (0.5 * (Z + Z.transpose())).eval();
      zl += alpha_d * dir.dzl;
    }
    const std::string why = iter >= opt_.max_iter ? "iteration limit reached" : "solver stalled";
    if (best.merit <= opt_.reduced_tol) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "converged to reduced accuracy %.1e (%s)", best.merit, why.c_str());
      return finish(SdpStatus::Optimal, best.X, best.y, iter, buf);
    }
    return finish(SdpStatus::NumericalLimit, best.X, best.y, iter, why);
  }

  struct Best {
    MatrixXd X;
    VectorXd y;
    double merit = std::numeric_limits<double>::infinity();
    // True when the iterate improves the merit by a meaningful factor.
    bool consider(const MatrixXd& Xc, const VectorXd& yc, double pinf, double dinf, double gap) {
      const double m = std::max({pinf, dinf, gap});
      if (!(m < merit)) return false;
      const bool progress = m < 0.9 * merit;
      merit = m;
      X = Xc;
      y = yc;
      return progress;
    }
  };

  // lambda = max(-y, 0) normalized to b^T lambda = -1; valid when sum lambda_i A_i is PSD within tolerance.
  std::optional<VectorXd> primal_infeasibility_certificate(const VectorXd& y) const {
    const VectorXd lam = (-y).cwiseMax(0.0);
    const double blam = b_.dot(lam);
    if (!(blam < 0.0)) return std::nullopt;
    const VectorXd lt = lam / -blam;
    if (lt.norm() > 1e12) return std::nullopt;
    const double lmin = min_eigenvalue(apply_At(lt));
    if (lmin < -opt_.infeasibility_tol) return std::nullopt;
    return lt;
  }

  bool primal_unbounded(const MatrixXd& X, double pobj) const {
    const MatrixXd Xt = X / -pobj;
    if (Xt.norm() > 1e12) return false;
    return apply_A(Xt).maxCoeff() <= opt_.infeasibility_tol;
  }

  void attach_certificate(SdpSolution& s, const VectorXd& scaled) const {
    VectorXd cert = VectorXd::Zero(static_cast<Eigen::Index>(prob_.constraints.size()));
    for (Eigen::Index i = 0; i < m_; ++i) {
      const auto& r = rows_[static_cast<std::size_t>(i)];
      if (r.source >= 0) {
        cert(r.source) = scaled(i) * r.scale;
      } else {
        s.certificate_trace_multiplier = scaled(i) * r.scale;
      }
    }
    s.certificate = cert;
  }

  SdpSolution finish(SdpStatus status, const MatrixXd& X, const VectorXd& y, int iter, std::string msg) const {
    SdpSolution s;
    s.status = status;
    const MatrixXd full = lift(X);
    s.theta_p = 0.5 * (full + full.transpose());
    s.solver_iterations = iter;
    s.message = std::move(msg);
    s.objective = prob_.cost.cwiseProduct(s.theta_p).sum();
    s.multipliers = VectorXd::Zero(static_cast<Eigen::Index>(prob_.constraints.size()));
    double dobj = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const auto& r = rows_[static_cast<std::size_t>(i)];
      const double lam = -y(i) * r.scale / cost_scale_;
      dobj += -lam * (r.source >= 0 ? prob_.constraints[static_cast<std::size_t>(r.source)].rhs : *prob_.trace_cap);
      if (r.source >= 0) s.multipliers(r.source) = lam;
    }
    s.dual_objective = dobj;
    // The gap is that of the problem actually solved, ridge term included.
    const double solved = s.objective + ridge_ / cost_scale_ * s.theta_p.trace();
    s.relative_gap = std::abs(solved - dobj) / (1.0 + std::abs(solved) + std::abs(dobj));
    double worst = 0.0;
    for (const auto& c : prob_.constraints) {
      const double v = c.A.cwiseProduct(s.theta_p).sum() - c.rhs;
      worst = std::max(worst, v / (1.0 + std::abs(c.rhs)));
    }
    s.max_constraint_residual = worst;
    s.min_eigenvalue = min_eigenvalue(s.theta_p);
    return s;
  }

  struct Row {
    Eigen::Index source = 0;  // index into problem constraints, -1 for the trace cap
    double scale = 1.0;
    double rhs = 0.0;
    bool low_rank = false;
    MatrixXd A;
    MatrixXd factors;
    VectorXd signs;
  };

  const SdpProblem& prob_;
  SdpOptions opt_;
  Eigen::Index n_;
  Eigen::Index full_n_;
  Eigen::Index m_ = 0;
  MatrixXd V_;  ///< basis of the reduced range; empty when no reduction applies
  double cost_scale_ = 1.0;
  double ridge_ = 0.0;  ///< ridge added to the scaled cost diagonal
  MatrixXd C_;
  VectorXd b_;
  std::vector<Row> rows_;
  std::vector<Eigen::Index> dense_rows_;
  MatrixXd F_;
  VectorXd fsign_;
  std::vector<Eigen::Index> fowner_;
};

}  // namespace detail

/// Solves the problem with a primal-dual interior-point method.
///
/// Optimal: Theta PSD and every constraint within tolerance. Infeasible: a
/// Farkas certificate is attached. NumericalLimit: the best iterate found.
inline SdpSolution solve(const SdpProblem& problem, const SdpOptions& options = {}) {
  problem.validate();
  if (options.tol <= 0.0 || options.max_iter <= 0) throw ConfigError("sdp: tol and max_iter must be positive");
  return detail::SdpIpm(problem, options).run();
}

/// Data LMI from feature columns: constraint i reads
/// a_i^T Theta a_i - b_i^T Theta b_i <= rhs_i with a_i = successor_features.col(i),
/// b_i = features.col(i); the cost is sum_i b_i^T Theta b_i.
inline SdpProblem lmi_from_features(const MatrixXd& features, const MatrixXd& successor_features,
                                    const VectorXd& rhs) {
  if (features.rows() != successor_features.rows() || features.cols() != successor_features.cols() ||
      features.cols() != rhs.size()) {
    throw InputError("assemble_lmi: feature and rhs dimensions differ");
  }
  SdpProblem p;
  p.dim = features.rows();
  p.cost = features * features.transpose();
  p.constraints.reserve(static_cast<std::size_t>(rhs.size()));
  for (Eigen::Index i = 0; i < rhs.size(); ++i) {
    p.constraints.push_back(SdpConstraint::rank_two(successor_features.col(i), features.col(i), rhs(i)));
  }
  return p;
}

/// Standard-form SDP of the data dissipation inequality
/// diag(G_xxp^T Theta G_xxp - G_xx^T Theta G_xx) <= diag(G_xu^T Theta_S G_xu) + slack.
inline SdpProblem assemble_lmi(const GramBundle& bundle, const MatrixXd& theta_s, const VectorXd& slack) {
  const Eigen::Index n = bundle.G_xx.rows();
  if (bundle.G_xx.cols() != n || bundle.G_xxp.rows() != n || bundle.G_xxp.cols() != n ||
      bundle.G_xu.rows() != n || bundle.G_xu.cols() != n) {
    throw InputError("assemble_lmi: Gram matrices must all be n x n");
  }
  if (theta_s.rows() != n || theta_s.cols() != n) throw InputError("assemble_lmi: theta_s must be n x n");
  if (slack.size() != n) throw InputError("assemble_lmi: slack must have length n");
  if ((slack.array() < 0.0).any()) throw InputError("assemble_lmi: slack must be nonnegative");
  const double scale = std::max(1.0, theta_s.cwiseAbs().maxCoeff());
  if ((theta_s - theta_s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw InputError("assemble_lmi: theta_s must be symmetric");
  }
  const VectorXd supply = (bundle.G_xu.transpose() * theta_s * bundle.G_xu).diagonal();
  return lmi_from_features(bundle.G_xx, bundle.G_xxp, supply + slack);
}

/// Slack eps * rho(0) * |(x_i, u_i)|^2 of the relaxed data LMI.
inline VectorXd relaxation_slack(const Eigen::Ref<const PointMatrix>& Z, double epsilon, double rho0 = 1.0) {
  if (epsilon < 0.0) throw ConfigError("relaxation epsilon must be nonnegative");
  return epsilon * rho0 * Z.rowwise().squaredNorm();
}

}  // namespace dissipkit
