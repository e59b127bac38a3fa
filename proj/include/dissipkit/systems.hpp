#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dissipkit/errors.hpp"
#include "dissipkit/kernels.hpp"

namespace dissipkit {

/// Axis-aligned box, one [lo, hi] interval per coordinate.
struct Box {
  std::vector<std::pair<double, double>> bounds;

  Box() = default;
  explicit Box(std::vector<std::pair<double, double>> b) : bounds(std::move(b)) {
    for (const auto& [lo, hi] : bounds) {
      if (!(lo <= hi)) throw ConfigError("box: each interval needs lo <= hi");
    }
  }

  int dim() const { return static_cast<int>(bounds.size()); }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& p) const {
    if (p.size() != dim()) return false;
    for (int k = 0; k < dim(); ++k) {
      if (!(p(k) >= bounds[k].first && p(k) <= bounds[k].second)) return false;
    }
    return true;
  }

  Box scaled(double factor) const {
    Box b;
    for (const auto& [lo, hi] : bounds) b.bounds.emplace_back(factor * lo, factor * hi);
    return b;
  }

  template <typename Rng>
  VectorXd sample(Rng& rng) const {
    VectorXd p(dim());
    for (int k = 0; k < dim(); ++k) {
      std::uniform_real_distribution<double> dist(bounds[k].first, bounds[k].second);
      p(k) = dist(rng);
    }
    return p;
  }
};

/// Concatenation of a state box and an input box.
inline Box product(const Box& a, const Box& b) {
  Box out = a;
  out.bounds.insert(out.bounds.end(), b.bounds.begin(), b.bounds.end());
  return out;
}

/// One classical RK4 step of xdot = field(x, u) with u held constant.
template <typename Field>
VectorXd rk4_step(const Field& field, const VectorXd& x, const VectorXd& u, double dt) {
  const VectorXd k1 = field(x, u);
  const VectorXd k2 = field(x + 0.5 * dt * k1, u);
  const VectorXd k3 = field(x + 0.5 * dt * k2, u);
  const VectorXd k4 = field(x + dt * k3, u);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

enum class SystemId { Poly1, Pendulum, Bioreactor };

inline std::string to_string(SystemId id) {
  switch (id) {
    case SystemId::Poly1: return "poly1";
    case SystemId::Pendulum: return "pendulum";
    default: return "bioreactor";
  }
}

inline SystemId system_id_from_string(const std::string& s) {
  if (s == "poly1") return SystemId::Poly1;
  if (s == "pendulum") return SystemId::Pendulum;
  if (s == "bioreactor") return SystemId::Bioreactor;
  throw ConfigError("unknown system id '" + s + "' (expected poly1, pendulum or bioreactor)");
}

// ---- Case 1: polynomial map -------------------------------------------------

inline VectorXd poly1_step(const VectorXd& x, const VectorXd& u) {
  const double a = x(0) * x(0) + x(1);
  VectorXd xp(2);
  xp << 0.5 * a, u(0) - 0.25 * a * a;
  return xp;
}

/// Known storage for the polynomial map: v(x+) - v(x) = u^2/4 - x1^2 exactly.
inline double poly1_exact_storage(const VectorXd& x) {
  const double a = x(1) + x(0) * x(0);
  return x(0) * x(0) + 0.25 * a * a;
}

// ---- Case 2: inverted pendulum with unknown friction ------------------------

inline double pendulum_friction(double v) { return v * (1.0 + v * std::tanh(v)) / 6.0; }

inline VectorXd pendulum_field(const VectorXd& x, const VectorXd& u) {
  VectorXd dx(2);
  dx << x(1), std::sin(x(0)) - pendulum_friction(x(1)) + u(0);
  return dx;
}

inline VectorXd pendulum_step(const VectorXd& x, const VectorXd& u, double dt = 0.05) {
  if (!(dt > 0.0)) throw ConfigError("pendulum: dt must be positive");
  return rk4_step(pendulum_field, x, u, dt);
}

// ---- Case 3: bioreactor ------------------------------------------------------

inline double bioreactor_growth(double s) {
  const double den = 1.0 + 0.7 * s + 0.05 * s * s;
  if (std::abs(den) < 1e-6) throw SimulationError("bioreactor: growth-rate denominator vanished");
  return (1.0 + s) / den;
}

inline VectorXd bioreactor_field(const VectorXd& x, const VectorXd& u) {
  const double mu = bioreactor_growth(x(1));
  VectorXd dx(2);
  dx << (mu - 1.0 - u(0)) * x(0), (1.0 + u(0)) * (20.0 - x(1)) - 20.0 * (1.0 + x(0)) * mu;
  return dx;
}

inline VectorXd bioreactor_step(const VectorXd& x, const VectorXd& u, double dt = 0.05) {
  if (!(dt > 0.0)) throw ConfigError("bioreactor: dt must be positive");
  return rk4_step(bioreactor_field, x, u, dt);
}

/// A discrete-time benchmark x+ = step(x, u), y = output(x, u) with f(0,0) = 0.
class BenchmarkSystem {
 public:
  explicit BenchmarkSystem(SystemId id, double dt = 0.05) : id_(id), dt_(dt) {
    if (id != SystemId::Poly1 && !(dt > 0.0)) throw ConfigError("system dt must be positive");
  }

  SystemId id() const { return id_; }
  std::string name() const { return to_string(id_); }
  double dt() const { return dt_; }
  int d_x() const { return 2; }
  int d_u() const { return 1; }
  int d_y() const { return id_ == SystemId::Pendulum ? 2 : 1; }

  VectorXd step(const VectorXd& x, const VectorXd& u) const {
    if (x.size() != d_x() || u.size() != d_u()) throw InputError("step: dimension mismatch");
    switch (id_) {
      case SystemId::Poly1: return poly1_step(x, u);
      case SystemId::Pendulum: return pendulum_step(x, u, dt_);
      default: return bioreactor_step(x, u, dt_);
    }
  }

  VectorXd output(const VectorXd& x, const VectorXd& u) const {
    (void)u;
    switch (id_) {
      case SystemId::Poly1: return x.head(1);
      case SystemId::Pendulum: return x;
      default: return x.tail(1);
    }
  }

 private:
  SystemId id_;
  double dt_;
};

struct Provenance {
  enum class Kind { Trajectories, Uniform, External } kind = Kind::Uniform;
  int count = 0;   ///< trajectories, or snapshots for uniform sampling
  int length = 1;  ///< steps per trajectory
};

inline std::string to_string(Provenance::Kind k) {
  switch (k) {
    case Provenance::Kind::Trajectories: return "trajectories";
    case Provenance::Kind::Uniform: return "uniform";
    default: return "external";
  }
}

/// Snapshots (x_i, u_i, x_i^+), one per row.
struct SnapshotDataset {
  PointMatrix X;
  PointMatrix U;
  PointMatrix Xp;
  std::optional<PointMatrix> Y;
  std::uint64_t seed = 0;
  Provenance provenance;
  std::string system = "external";

  Eigen::Index size() const { return X.rows(); }
  int d_x() const { return static_cast<int>(X.cols()); }
  int d_u() const { return static_cast<int>(U.cols()); }

  /// Rows (x_i, u_i).
  PointMatrix joint() const {
    PointMatrix Z(X.rows(), X.cols() + U.cols());
    Z << X, U;
    return Z;
  }

  void check_shape() const {
    if (X.rows() == 0) throw InputError("dataset: no snapshots");
    if (U.rows() != X.rows() || Xp.rows() != X.rows()) throw InputError("dataset: row counts differ");
    if (Xp.cols() != X.cols()) throw InputError("dataset: successor dimension differs from state dimension");
    if (Y && Y->rows() != X.rows()) throw InputError("dataset: output row count differs");
  }
};

/// True when every successor equals step(x_i, u_i) bitwise.
inline bool successors_consistent(const BenchmarkSystem& sys, const SnapshotDataset& d) {
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const VectorXd xp = sys.step(d.X.row(i).transpose(), d.U.row(i).transpose());
    for (Eigen::Index k = 0; k < xp.size(); ++k) {
      if (xp(k) != d.Xp(i, k)) return false;
    }
  }
  return true;
}

namespace detail {

inline PointMatrix outputs_for(const BenchmarkSystem& sys, const PointMatrix& X, const PointMatrix& U) {
  PointMatrix Y(X.rows(), sys.d_y());
  for (Eigen::Index i = 0; i < X.rows(); ++i) Y.row(i) = sys.output(X.row(i).transpose(), U.row(i).transpose()).transpose();
  return Y;
}

inline void check_boxes(const BenchmarkSystem& sys, const Box& x_box, const Box& u_box) {
  if (x_box.dim() != sys.d_x() || u_box.dim() != sys.d_u()) {
    throw ConfigError("sampling boxes do not match the system dimensions");
  }
}

}  // namespace detail

/// n_traj trajectories of `length` steps from uniform initial states, uniform inputs.
///
/// Trajectory k draws from its own generator seeded with (seed, k). A
/// trajectory leaving `guard` (default: 10x the initial box) is restarted from
/// a fresh initial state, at most `max_retries` times.
inline SnapshotDataset sample_trajectories(const BenchmarkSystem& sys, int n_traj, int length, const Box& x0_box,
                                           const Box& u_box, std::uint64_t seed,
                                           std::optional<Box> guard = std::nullopt, int max_retries = 100) {
  if (n_traj <= 0 || length <= 0) throw InputError("sample_trajectories: n_traj and length must be positive");
  detail::check_boxes(sys, x0_box, u_box);
  const Box guard_box = guard ? *guard : x0_box.scaled(10.0);
  const Eigen::Index n = static_cast<Eigen::Index>(n_traj) * length;
  SnapshotDataset d;
  d.X.resize(n, sys.d_x());
  d.U.resize(n, sys.d_u());
  d.Xp.resize(n, sys.d_x());
  for (int k = 0; k < n_traj; ++k) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(k)};
    std::mt19937_64 rng(seq);
    bool done = false;
    for (int attempt = 0; attempt <= max_retries && !done; ++attempt) {
      VectorXd x = x0_box.sample(rng);
      done = true;
      for (int t = 0; t < length; ++t) {
        const VectorXd u = u_box.sample(rng);
        VectorXd xp;
        try {
          xp = sys.step(x, u);
        } catch (const SimulationError&) {
          done = false;
          break;
        }
        if (!xp.allFinite() || !guard_box.contains(xp)) {
          done = false;
          break;
        }
        const Eigen::Index row = static_cast<Eigen::Index>(k) * length + t;
        d.X.row(row) = x.transpose();
        d.U.row(row) = u.transpose();
        d.Xp.row(row) = xp.transpose();
        x = xp;
      }
    }
    if (!done) {
      throw SimulationError("sample_trajectories: trajectory " + std::to_string(k) +
                            " kept leaving the guard box");
    }
  }
  d.Y = detail::outputs_for(sys, d.X, d.U);
  d.seed = seed;
  d.provenance = {Provenance::Kind::Trajectories, n_traj, length};
  d.system = sys.name();
  return d;
}

/// n i.i.d. snapshots with x uniform on x_box and u uniform on u_box.
inline SnapshotDataset sample_snapshots(const BenchmarkSystem& sys, int n, const Box& x_box, const Box& u_box,
                                        std::uint64_t seed) {
  if (n <= 0) throw InputError("sample_snapshots: n must be positive");
  detail::check_boxes(sys, x_box, u_box);
  std::mt19937_64 rng(seed);
  SnapshotDataset d;
  d.X.resize(n, sys.d_x());
  d.U.resize(n, sys.d_u());
  d.Xp.resize(n, sys.d_x());
  for (int i = 0; i < n; ++i) {
    const VectorXd x = x_box.sample(rng);
    const VectorXd u = u_box.sample(rng);
    const VectorXd xp = sys.step(x, u);
    if (!xp.allFinite()) throw SimulationError("sample_snapshots: non-finite successor");
    d.X.row(i) = x.transpose();
    d.U.row(i) = u.transpose();
    d.Xp.row(i) = xp.transpose();
  }
  d.Y = detail::outputs_for(sys, d.X, d.U);
  d.seed = seed;
  d.provenance = {Provenance::Kind::Uniform, n, 1};
  d.system = sys.name();
  return d;
}

}  // namespace dissipkit
