#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dissipkit/kernels.hpp"
#include "dissipkit/quadform.hpp"
#include "dissipkit/sdp.hpp"
#include "dissipkit/supply.hpp"
#include "dissipkit/systems.hpp"

namespace dissipkit {

enum class SlackMode { Strict, Relaxed };

inline SdpOptions storage_sdp_defaults() {
  SdpOptions o;
  o.objective_ridge = 1e-4;  // storage SDPs drift along cost-flat directions without it
  return o;
}

struct StorageOptions {
  SdpOptions sdp = storage_sdp_defaults();
  SlackMode slack = SlackMode::Strict;
  double epsilon = 0.0;  ///< relaxation level eps_S for SlackMode::Relaxed
  std::optional<double> trace_cap;
};

/// Everything produced while fitting a storage function on one sample.
struct StorageFit {
  SdpProblem problem;
  SdpSolution solution;
  std::optional<KernelQuadraticForm> storage;
  std::optional<MatrixXd> quadratic_M;  ///< set by the quadratic ansatz
  VectorXd supply_on_sample;            ///< [G_xu^T Theta_S G_xu]_{ii}
  std::string diagnostics;

  bool feasible() const { return solution.status == SdpStatus::Optimal; }
};

/// Thrown by estimate_storage when the SDP is not solved to optimality.
class StorageFailure : public std::runtime_error {
 public:
  StorageFailure(const std::string& what, SdpSolution sol) : std::runtime_error(what), solution(std::move(sol)) {}
  SdpSolution solution;
};

namespace detail {

inline VectorXd slack_for(const SnapshotDataset& d, const StorageOptions& opt, double rho0) {
  if (opt.slack == SlackMode::Strict) return VectorXd::Zero(d.size());
  return relaxation_slack(d.joint(), opt.epsilon, rho0);
}

inline void check_anchors(const SnapshotDataset& d, const SupplyEstimate& est) {
  if (est.anchors.rows() != d.size() || est.anchors.cols() != d.d_x() + d.d_u()) {
    throw InputError("storage: supply estimate was not fitted on this dataset");
  }
}

// Names the constraints carrying most of the certificate weight.
inline std::string describe(const SdpSolution& sol) {
  std::ostringstream os;
  os << to_string(sol.status) << " after " << sol.solver_iterations << " iterations (" << sol.message << ")";
  if (sol.certificate) {
    const VectorXd& c = *sol.certificate;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(c.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return c(a) > c(b); });
    os << "; binding constraints:";
    for (std::size_t k = 0; k < std::min<std::size_t>(5, idx.size()); ++k) {
      if (c(idx[k]) <= 0.0) break;
      os << " " << idx[k];
    }
  }
  return os.str();
}

inline StorageFit kernel_problem(const SnapshotDataset& data, const LinearRadialKernel& joint,
                                 const SupplyEstimate& supply, const StorageOptions& opt) {
  const GramBundle bundle = make_gram_bundle(joint, data.X, data.U, data.Xp);
  StorageFit fit;
  fit.supply_on_sample = supply.on_sample(bundle.G_xu);
  fit.problem = assemble_lmi(bundle, supply.theta_s, slack_for(data, opt, joint.profile().rho0()));
  fit.problem.trace_cap = opt.trace_cap;
  return fit;
}

inline StorageFit quadratic_problem(const SnapshotDataset& data, const LinearRadialKernel& joint,
                                    const SupplyEstimate& supply, const StorageOptions& opt) {
  StorageFit fit;
  fit.supply_on_sample = supply.on_sample(gram(joint, data.joint()));
  const VectorXd slack = slack_for(data, opt, joint.profile().rho0());
  fit.problem = lmi_from_features(data.X.transpose(), data.Xp.transpose(), fit.supply_on_sample + slack);
  fit.problem.trace_cap = opt.trace_cap;
  return fit;
}

inline void solve_into(StorageFit& fit, const StorageOptions& opt) {
  fit.solution = solve(fit.problem, opt.sdp);
  fit.diagnostics = describe(fit.solution);
}

}  // namespace detail

/// Solves the data LMI for Theta_P on the sample; the storage uses the states as anchors.
inline StorageFit fit_storage(const SnapshotDataset& data, const LinearRadialKernel& joint,
                              const SupplyEstimate& supply, const StorageOptions& opt = {}) {
  data.check_shape();
  detail::check_anchors(data, supply);
  StorageFit fit = detail::kernel_problem(data, joint, supply, opt);
  detail::solve_into(fit, opt);
  if (fit.feasible()) fit.storage = KernelQuadraticForm(joint.state_kernel(), data.X, fit.solution.theta_p);
  return fit;
}

/// Storage restricted to v(x) = x^T M x, M PSD; rendered as a kernel form on the states.
inline StorageFit fit_quadratic_storage(const SnapshotDataset& data, const LinearRadialKernel& joint,
                                        const SupplyEstimate& supply, const StorageOptions& opt = {}) {
  data.check_shape();
  detail::check_anchors(data, supply);
  StorageFit fit = detail::quadratic_problem(data, joint, supply, opt);
  detail::solve_into(fit, opt);
  if (fit.feasible()) {
    fit.quadratic_M = fit.solution.theta_p;
    fit.storage = qf_from_quadratic(fit.solution.theta_p, joint.state_kernel(), data.X);
  }
  return fit;
}

/// The storage SDP for the chosen ansatz, unsolved.
inline SdpProblem storage_problem(const SnapshotDataset& data, const LinearRadialKernel& joint,
                                  const SupplyEstimate& supply, const StorageOptions& opt = {},
                                  bool quadratic = false) {
  data.check_shape();
  detail::check_anchors(data, supply);
  return (quadratic ? detail::quadratic_problem(data, joint, supply, opt)
                    : detail::kernel_problem(data, joint, supply, opt))
      .problem;
}

/// Fitted storage form; throws StorageFailure when the SDP is infeasible or unsolved.
inline KernelQuadraticForm estimate_storage(const SnapshotDataset& data, const LinearRadialKernel& joint,
                                            const SupplyEstimate& supply, const StorageOptions& opt = {}) {
  StorageFit fit = fit_storage(data, joint, supply, opt);
  if (!fit.storage) throw StorageFailure("estimate_storage: " + fit.diagnostics, fit.solution);
  return *fit.storage;
}

}  // namespace dissipkit
