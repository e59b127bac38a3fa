#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "dissipkit/errors.hpp"
#include "dissipkit/quadform.hpp"
#include "dissipkit/supply.hpp"
#include "dissipkit/systems.hpp"

namespace dissipkit {

struct ViolationOptions {
  double abs_tol = 1e-9;
  double rel_tol = 1e-6;       ///< relative to the median |w|
  double origin_cutoff = 1e-12;
};

/// Per-point dissipation residuals w = v(x+) - v(x) - s(h(x,u), u).
struct ViolationReport {
  VectorXd w;
  VectorXd w_scaled;  ///< w / (|z|^2 v |z|), 0 for points at the origin
  VectorXd znorm;     ///< |(x, u)|
  std::vector<bool> violated;
  double tol_viol = 0.0;
  double violation_fraction = 0.0;
  double max_scaled = 0.0;
  std::optional<double> fill_distance;
  std::optional<double> epsilon_s_proxy;  ///< empirical stand-in for eps_S, when available

  Eigen::Index size() const { return w.size(); }
  Eigen::Index violations() const { return static_cast<Eigen::Index>(std::count(violated.begin(), violated.end(), true)); }
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

/// Dissipation residuals of `storage` (any callable on states) on the dataset.
template <typename Storage>
ViolationReport residuals(const Storage& storage, const SupplyRateSpec& spec, const SnapshotDataset& data,
                          const ViolationOptions& opt = {}) {
  if (data.Xp.rows() != data.X.rows() || data.Xp.size() == 0) {
    throw InputError("residuals: dataset carries no successor states");
  }
  data.check_shape();
  const Eigen::Index n = data.size();
  ViolationReport r;
  r.w.resize(n);
  r.w_scaled = VectorXd::Zero(n);
  r.znorm.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorXd x = data.X.row(i).transpose();
    const VectorXd u = data.U.row(i).transpose();
    const VectorXd xp = data.Xp.row(i).transpose();
    const double zn = std::sqrt(x.squaredNorm() + u.squaredNorm());
    r.znorm(i) = zn;
    if (zn < opt.origin_cutoff) {
      r.w(i) = 0.0;
      continue;
    }
    r.w(i) = storage(xp) - storage(x) - spec(x, u);
    r.w_scaled(i) = r.w(i) / scale_norm(zn);
  }
  std::vector<double> absw(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) absw[static_cast<std::size_t>(i)] = std::abs(r.w(i));
  r.tol_viol = opt.abs_tol + opt.rel_tol * median(absw);
  r.violated.resize(static_cast<std::size_t>(n));
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool bad = r.w(i) > r.tol_viol;
    r.violated[static_cast<std::size_t>(i)] = bad;
    count += bad ? 1 : 0;
  }
  r.violation_fraction = n ? static_cast<double>(count) / static_cast<double>(n) : 0.0;
  r.max_scaled = n ? r.w_scaled.maxCoeff() : 0.0;
  return r;
}

struct BoundCheck {
  bool passed = true;
  double margin = 0.0;     ///< 2 eps rho0 - max_i w_i / |z_i|^2
  double max_ratio = 0.0;  ///< max_i w_i / |z_i|^2 over non-origin points
};

/// Checks max_i w_i / |z_i|^2 <= 2 eps_S rho(0), the relaxed-LMI sample bound.
inline BoundCheck scaled_bound_check(const ViolationReport& report, double epsilon_s, double rho0 = 1.0,
                                     double origin_cutoff = 1e-12) {
  BoundCheck c;
  c.max_ratio = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < report.size(); ++i) {
    const double zn = report.znorm(i);
    if (zn < origin_cutoff) continue;
    c.max_ratio = std::max(c.max_ratio, report.w(i) / (zn * zn));
  }
  if (!std::isfinite(c.max_ratio)) c.max_ratio = 0.0;
  const double bound = 2.0 * epsilon_s * rho0;
  c.margin = bound - c.max_ratio;
  c.passed = c.max_ratio <= bound;
  return c;
}

/// Largest distance from a probe on a regular grid over `box` to the nearest (x_i, u_i).
inline double fill_distance(const SnapshotDataset& data, const Box& probe_box, int grid_resolution) {
  if (grid_resolution < 10) throw InputError("fill_distance: grid_resolution must be at least 10");
  const PointMatrix Z = data.joint();
  const int d = probe_box.dim();
  if (d != Z.cols()) throw InputError("fill_distance: probe box dimension differs from (x, u) dimension");
  if (Z.rows() == 0) throw InputError("fill_distance: empty dataset");
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  VectorXd p(d);
  double eta = 0.0;
  while (true) {
    for (int k = 0; k < d; ++k) {
      const auto [lo, hi] = probe_box.bounds[static_cast<std::size_t>(k)];
      p(k) = lo + (hi - lo) * static_cast<double>(idx[static_cast<std::size_t>(k)]) / (grid_resolution - 1);
    }
    const double nearest = (Z.rowwise() - p.transpose()).rowwise().squaredNorm().minCoeff();
    eta = std::max(eta, nearest);
    int k = 0;
    while (k < d && ++idx[static_cast<std::size_t>(k)] == grid_resolution) idx[static_cast<std::size_t>(k++)] = 0;
    if (k == d) break;
  }
  return std::sqrt(eta);
}

/// One (n, seed) cell of a generalization sweep.
struct SweepRow {
  int n = 0;
  std::uint64_t seed = 0;
  bool feasible = false;
  std::string status;
  double epsilon_s_proxy = std::numeric_limits<double>::quiet_NaN();
  double max_scaled_violation = std::numeric_limits<double>::quiet_NaN();
  double violation_fraction = std::numeric_limits<double>::quiet_NaN();
  double fill_distance = std::numeric_limits<double>::quiet_NaN();
};

/// Worker count from DISSIPKIT_THREADS (default 1).
inline int configured_threads() {
  if (const char* env = std::getenv("DISSIPKIT_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

/// Runs `cell(n, seed)` for the full grid; rows are ordered by n, then seed.
template <typename Cell>
std::vector<SweepRow> generalization_sweep(const std::vector<int>& n_list, const std::vector<std::uint64_t>& seeds,
                                           Cell cell, int threads = configured_threads()) {
  std::vector<std::pair<int, std::uint64_t>> jobs;
  for (int n : n_list) {
    for (auto s : seeds) jobs.emplace_back(n, s);
  }
  std::vector<SweepRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        rows[j] = cell(jobs[j].first, jobs[j].second);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int t = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  if (t == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < t; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

}  // namespace dissipkit
