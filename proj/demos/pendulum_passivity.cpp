// Learns a storage function for the pendulum with unknown friction and
// reports how often the dissipation inequality fails on fresh snapshots.

#include <cmath>
#include <cstdio>

#include "dissipkit/cases.hpp"
#include "dissipkit/storage.hpp"
#include "dissipkit/validate.hpp"

using namespace dissipkit;

int main() {
  const BenchmarkSystem sys(SystemId::Pendulum, 0.05);
  const Box xb({{-M_PI, M_PI}, {-2, 2}}), ub({{-0.5, 0.5}});
  const LinearRadialKernel k(RadialProfile::gaussian(1.5), 2, 1);
  const SupplyRateSpec spec = case2_supply(6.0);
  const SnapshotDataset fresh = sample_snapshots(sys, 500, xb, ub, 1001);

  std::printf("%6s %16s %12s\n", "n", "status", "violations");
  for (int n : {25, 50, 75, 150}) {
    const SnapshotDataset d = sample_snapshots(sys, n, xb, ub, 1);
    const SupplyEstimate est = fit_supply(spec, k, d.X, d.U, default_beta_reg(n));
    const StorageFit fit = fit_storage(d, k, est);
    if (!fit.feasible()) {
      std::printf("%6d %16s %12s\n", n, to_string(fit.solution.status).c_str(), "-");
      continue;
    }
    const ViolationReport r = residuals(*fit.storage, spec, fresh);
    std::printf("%6d %16s %11.1f%%\n", n, to_string(fit.solution.status).c_str(), 100.0 * r.violation_fraction);
  }
}
