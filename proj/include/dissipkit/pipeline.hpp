#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dissipkit/cases.hpp"
#include "dissipkit/config.hpp"
#include "dissipkit/io.hpp"
#include "dissipkit/storage.hpp"
#include "dissipkit/supply.hpp"
#include "dissipkit/systems.hpp"
#include "dissipkit/validate.hpp"

namespace dissipkit {

inline BenchmarkSystem make_system(const ExperimentConfig& c) {
  if (c.system == "external") throw ConfigError("config: external datasets have no simulator");
  return BenchmarkSystem(system_id_from_string(c.system), c.dt);
}

inline LinearRadialKernel make_kernel(const ExperimentConfig& c, int d_x, int d_u) {
  const RadialProfile prof(c.family, c.nu, c.lengthscale);
  if (!c.weights) return LinearRadialKernel(prof, d_x, d_u);
  if (c.weights->size() != d_x + d_u) {
    throw ConfigError("config: key 'kernel.weights' needs " + std::to_string(d_x + d_u) + " entries");
  }
  return LinearRadialKernel(prof, d_x, d_u, *c.weights);
}

inline SupplyRateSpec make_supply(const ExperimentConfig& c, int d_x, int d_u) {
  if (c.supply_form == "named") {
    if (c.system == "external") throw ConfigError("config: named supplies need a built-in system");
    if (c.supply_case == "case1") return case1_supply(c.supply_beta);
    if (c.supply_case == "case2") return case2_supply(c.supply_beta);
    return case3_supply(c.supply_q);
  }
  OutputMap out = c.supply_output == "identity" ? identity_output() : output_map(make_system(c));
  try {
    return SupplyRateSpec::from_qsr(d_x, d_u, *c.qsr, std::move(out), "qsr");
  } catch (const InputError& e) {
    throw ConfigError(std::string("config: supply: ") + e.what());
  }
}

/// Training sample of `n` snapshots (trajectory mode: n / length trajectories).
inline SnapshotDataset simulate(const ExperimentConfig& c, std::uint64_t seed, std::optional<int> n = std::nullopt) {
  if (c.system == "external") {
    SnapshotDataset d = io::read_dataset(c.dataset_path);
    if (d.d_x() != c.x_box.dim() || d.d_u() != c.u_box.dim()) {
      throw ConfigError("config: dataset dimensions do not match 'sampling.x_box' / 'sampling.u_box'");
    }
    d.provenance.kind = Provenance::Kind::External;
    return d;
  }
  const BenchmarkSystem sys = make_system(c);
  const int count = n.value_or(c.n);
  if (c.sampling_mode == "uniform") return sample_snapshots(sys, count, c.x_box, c.u_box, seed);
  if (count % c.length != 0) throw ConfigError("snapshot count must be a multiple of 'sampling.length'");
  return sample_trajectories(sys, count / c.length, c.length, c.x_box, c.u_box, seed, c.x_box.scaled(c.guard_factor));
}

/// Fresh snapshots drawn the same way as the training sample.
inline SnapshotDataset fresh_sample(const ExperimentConfig& c, int n, std::uint64_t seed) {
  if (c.system == "external") throw ConfigError("config: fresh samples need a built-in system");
  return simulate(c, seed, n);
}

struct Estimate {
  LinearRadialKernel kernel;
  SupplyRateSpec spec;
  SupplyEstimate supply;
  StorageFit fit;
  double epsilon_s_proxy = 0.0;  ///< max scaled supply error, training sample plus probes

  bool feasible() const { return fit.feasible(); }
};

inline double resolve_beta(const ExperimentConfig& c, const SupplyRateSpec& spec, const LinearRadialKernel& k,
                           const SnapshotDataset& d) {
  if (c.beta_mode == "value") return c.beta_reg;
  if (c.beta_mode == "cv") return cross_validate_beta(spec, k, d.X, d.U, c.cv_candidates);
  return default_beta_reg(d.size());
}

/// Max scaled supply error over the training sample and `krr.probe_n` uniform probes on X x U.
inline double epsilon_s_proxy(const ExperimentConfig& c, const SupplyEstimate& est, const SupplyRateSpec& spec,
                              const SnapshotDataset& d) {
  double eps = supply_qf_error(est, spec, d.X, d.U).max_scaled_err;
  if (c.probe_n == 0) return eps;
  std::mt19937_64 rng(c.probe_seed);
  PointMatrix X(c.probe_n, d.d_x()), U(c.probe_n, d.d_u());
  for (int i = 0; i < c.probe_n; ++i) {
    X.row(i) = c.x_box.sample(rng).transpose();
    U.row(i) = c.u_box.sample(rng).transpose();
  }
  return std::max(eps, supply_qf_error(est, spec, X, U).max_scaled_err);
}

/// KRR supply estimate; the storage fit is left empty.
inline Estimate estimate_supply(const ExperimentConfig& c, const SnapshotDataset& d) {
  d.check_shape();
  LinearRadialKernel k = make_kernel(c, d.d_x(), d.d_u());
  SupplyRateSpec spec = make_supply(c, d.d_x(), d.d_u());
  SupplyEstimate est = fit_supply(spec, k, d.X, d.U, resolve_beta(c, spec, k, d));
  const double eps = epsilon_s_proxy(c, est, spec, d);
  return Estimate{std::move(k), std::move(spec), std::move(est), StorageFit{}, eps};
}

inline SdpProblem storage_problem(const ExperimentConfig& c, const SnapshotDataset& d, const Estimate& e) {
  return storage_problem(d, e.kernel, e.supply, c.storage, c.ansatz == "quadratic");
}

/// KRR supply estimate followed by the storage SDP.
inline Estimate estimate(const ExperimentConfig& c, const SnapshotDataset& d) {
  Estimate e = estimate_supply(c, d);
  e.fit = c.ansatz == "quadratic" ? fit_quadratic_storage(d, e.kernel, e.supply, c.storage)
                                  : fit_storage(d, e.kernel, e.supply, c.storage);
  return e;
}

inline json storage_json(const Estimate& e) {
  json j = io::to_json(*e.fit.storage);
  if (e.fit.quadratic_M) j["quadratic_M"] = io::to_json(*e.fit.quadratic_M);
  return j;
}

inline json solution_json(const Estimate& e) {
  json j = io::to_json(e.fit.solution);
  j["diagnostics"] = e.fit.diagnostics;
  j["beta_reg"] = e.supply.beta_reg;
  j["epsilon_s_proxy"] = e.epsilon_s_proxy;
  j["supply"] = e.spec.name();
  return j;
}

/// Residuals of `storage` on `d`, annotated with the eps_S proxy and an optional fill distance.
template <typename Storage>
ViolationReport validate_storage(const ExperimentConfig& c, const Storage& storage, const SupplyRateSpec& spec,
                                 const SnapshotDataset& d, std::optional<double> eps_proxy) {
  ViolationReport r = residuals(storage, spec, d);
  r.epsilon_s_proxy = eps_proxy;
  if (c.fill_resolution > 0) r.fill_distance = fill_distance(d, product(c.x_box, c.u_box), c.fill_resolution);
  return r;
}

/// Exit codes shared by the CLI subcommands.
enum ExitCode : int { kExitOptimal = 0, kExitError = 1, kExitInfeasible = 2 };

inline int exit_code(SdpStatus s) {
  if (s == SdpStatus::Optimal) return kExitOptimal;
  if (s == SdpStatus::Infeasible) return kExitInfeasible;
  return kExitError;
}

struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path dataset() const { return dir / "dataset.csv"; }
  std::filesystem::path storage() const { return dir / "storage.json"; }
  std::filesystem::path solution() const { return dir / "solution.json"; }
  std::filesystem::path sdp() const { return dir / "sdp.json"; }
  std::filesystem::path train_report() const { return dir / "train_report.json"; }
  std::filesystem::path report() const { return dir / "report.json"; }
  std::filesystem::path report_points() const { return dir / "report.csv"; }
  std::filesystem::path grid() const { return dir / "grid.csv"; }
  std::filesystem::path sweep() const { return dir / "sweep.csv"; }
};

inline RunPaths prepare_output(const std::string& dir) {
  std::filesystem::create_directories(dir);
  return RunPaths{dir};
}

/// Writes the estimate artifacts; returns the exit code of the solve.
inline int write_estimate(const ExperimentConfig& c, const SnapshotDataset& d, const Estimate& e, const RunPaths& p,
                          bool dump_sdp) {
  if (dump_sdp) io::write_json(p.sdp().string(), io::to_json(e.fit.problem));
  io::write_json(p.solution().string(), solution_json(e));
  if (!e.feasible()) return exit_code(e.fit.solution.status);
  io::write_json(p.storage().string(), storage_json(e));
  const ViolationReport train = validate_storage(c, *e.fit.storage, e.spec, d, e.epsilon_s_proxy);
  json tj = io::to_json(train);
  const BoundCheck bc = scaled_bound_check(train, e.epsilon_s_proxy, e.kernel.profile().rho0());
  tj["bound_check"] = {{"passed", bc.passed}, {"margin", bc.margin}, {"max_ratio", bc.max_ratio}};
  io::write_json(p.train_report().string(), tj);
  const KernelQuadraticForm& form = *e.fit.storage;
  io::write_text(p.grid().string(),
                 io::grid_csv([&](const VectorXd& x) { return form(x); }, c.x_box, c.grid_resolution));
  return kExitOptimal;
}

/// Fresh-sample report for a stored storage function.
inline ViolationReport write_validation(const ExperimentConfig& c, const io::StorageFile& storage,
                                        const RunPaths& p, std::optional<double> eps_proxy) {
  if (c.validation_n <= 0) throw ConfigError("config: key 'validation.n' must be positive to validate");
  const SnapshotDataset fresh = fresh_sample(c, c.validation_n, c.validation_seed);
  const SupplyRateSpec spec = make_supply(c, fresh.d_x(), fresh.d_u());
  const ViolationReport r = validate_storage(c, storage, spec, fresh, eps_proxy);
  io::write_json(p.report().string(), io::to_json(r));
  io::write_text(p.report_points().string(), io::report_csv(r, fresh));
  return r;
}

/// One generalization-sweep cell: train on n snapshots with `seed`, validate on fresh data.
inline SweepRow sweep_cell(const ExperimentConfig& c, int n, std::uint64_t seed) {
  SweepRow row;
  row.n = n;
  row.seed = seed;
  const SnapshotDataset d = simulate(c, seed, n);
  const int res = c.fill_resolution > 0 ? c.fill_resolution : 20;
  row.fill_distance = fill_distance(d, product(c.x_box, c.u_box), res);
  const Estimate e = estimate(c, d);
  row.status = to_string(e.fit.solution.status);
  row.feasible = e.feasible();
  row.epsilon_s_proxy = e.epsilon_s_proxy;
  if (row.feasible && c.validation_n > 0) {
    const SnapshotDataset fresh = fresh_sample(c, c.validation_n, c.validation_seed);
    const ViolationReport r = residuals(*e.fit.storage, e.spec, fresh);
    row.max_scaled_violation = r.max_scaled;
    row.violation_fraction = r.violation_fraction;
  }
  return row;
}

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& c, int threads = configured_threads()) {
  if (c.sweep_n.empty() || c.sweep_seeds.empty()) {
    throw ConfigError("config: keys 'sweep.n_list' and 'sweep.seeds' are required for a sweep");
  }
  return generalization_sweep(
      c.sweep_n, c.sweep_seeds, [&](int n, std::uint64_t s) { return sweep_cell(c, n, s); }, threads);
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "n,seed,status,epsilon_s_proxy,max_scaled_violation,violation_fraction,fill_distance\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n) + "," + std::to_string(r.seed) + "," + r.status + "," + io::fmt(r.epsilon_s_proxy) +
           "," + io::fmt(r.max_scaled_violation) + "," + io::fmt(r.violation_fraction) + "," +
           io::fmt(r.fill_distance) + "\n";
  }
  return out;
}

}  // namespace dissipkit
