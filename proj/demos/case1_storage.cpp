// Learns a storage function for the polynomial map from 80 snapshots and
// compares it with the known closed-form storage at a few states.

#include <cstdio>

#include "dissipkit/cases.hpp"
#include "dissipkit/storage.hpp"

using namespace dissipkit;

int main() {
  const BenchmarkSystem sys(SystemId::Poly1);
  const SnapshotDataset d = sample_trajectories(sys, 8, 10, Box({{-2, 2}, {-2, 2}}), Box({{-1, 1}}), 1);
  const LinearRadialKernel k(RadialProfile::gaussian(1.5), 2, 1);

  StorageOptions opt;
  opt.slack = SlackMode::Relaxed;
  opt.epsilon = 1e-3;

  for (double beta : {0.25, 0.2}) {
    const SupplyEstimate est = fit_supply(case1_supply(beta), k, d.X, d.U, default_beta_reg(d.size()));
    const StorageFit fit = fit_storage(d, k, est, opt);
    std::printf("beta = %.2f: %s\n", beta, to_string(fit.solution.status).c_str());
    if (!fit.feasible()) continue;
    std::printf("  %8s %8s %12s %12s\n", "x1", "x2", "learned", "exact");
    for (double x1 : {-1.0, 0.0, 1.0}) {
      for (double x2 : {-1.0, 1.0}) {
        const Eigen::Vector2d x(x1, x2);
        std::printf("  %8.2f %8.2f %12.5f %12.5f\n", x1, x2, (*fit.storage)(x), poly1_exact_storage(x));
      }
    }
  }
}
