#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "dissipkit/errors.hpp"
#include "dissipkit/kernels.hpp"
#include "dissipkit/quadform.hpp"
#include "dissipkit/sdp.hpp"
#include "dissipkit/systems.hpp"
#include "dissipkit/validate.hpp"

namespace dissipkit {

using json = nlohmann::json;

namespace io {

// Doubles print with 17 significant digits, enough to round-trip exactly.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Matrix as a list of rows.
inline json to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline json vector_to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw InputError(what + ": expected a list of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& r = j[static_cast<std::size_t>(i)];
    if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols) {
      throw InputError(what + ": rows have unequal lengths");
    }
    for (Eigen::Index k = 0; k < cols; ++k) {
      if (!r[static_cast<std::size_t>(k)].is_number()) throw InputError(what + ": non-numeric entry");
      m(i, k) = r[static_cast<std::size_t>(k)].get<double>();
    }
  }
  return m;
}

inline VectorXd vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw InputError(what + ": expected a list of numbers");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError(what + ": non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// Kernels

inline json to_json(const LinearRadialKernel& k) {
  json j;
  j["family"] = to_string(k.profile().family());
  if (k.profile().family() == ProfileFamily::Matern) j["nu"] = k.profile().smoothness();
  j["lengthscale"] = k.profile().lengthscale();
  j["d_x"] = k.d_x();
  j["d_u"] = k.d_u();
  j["weights"] = vector_to_json(k.weights());
  return j;
}

inline LinearRadialKernel kernel_from_json(const json& j) {
  try {
    const ProfileFamily fam = profile_family_from_string(j.at("family").get<std::string>());
    const double nu = fam == ProfileFamily::Matern ? j.at("nu").get<double>() : 0.0;
    RadialProfile prof(fam, nu, j.at("lengthscale").get<double>());
    return LinearRadialKernel(prof, j.at("d_x").get<int>(), j.at("d_u").get<int>(),
                              vector_from_json(j.at("weights"), "kernel.weights"));
  } catch (const json::exception& e) {
    throw InputError(std::string("kernel: ") + e.what());
  }
}

// Storage files

inline json to_json(const KernelQuadraticForm& f) {
  json j;
  j["kind"] = "kernel_form";
  j["kernel"] = to_json(f.kernel());
  j["anchors"] = to_json(f.anchors());
  j["theta"] = to_json(f.theta());
  return j;
}

inline KernelQuadraticForm form_from_json(const json& j) {
  if (!j.contains("kernel") || !j.contains("anchors") || !j.contains("theta")) {
    throw InputError("storage: a kernel form needs kernel, anchors and theta");
  }
  return KernelQuadraticForm(kernel_from_json(j["kernel"]), matrix_from_json(j["anchors"], "anchors"),
                             matrix_from_json(j["theta"], "theta"));
}

/// A storage read from disk: a kernel form or a built-in closed form.
struct StorageFile {
  std::optional<KernelQuadraticForm> form;
  std::string named;  ///< closed-form storage name, e.g. "case1_exact"
  std::optional<MatrixXd> quadratic_M;

  double operator()(const VectorXd& x) const {
    if (form) return (*form)(x);
    if (named == "case1_exact") return poly1_exact_storage(x);
    throw InputError("storage: unknown named storage '" + named + "'");
  }
};

inline StorageFile storage_from_json(const json& j) {
  StorageFile s;
  const std::string kind = j.value("kind", "kernel_form");
  if (kind == "named") {
    s.named = j.at("name").get<std::string>();
    if (s.named != "case1_exact") throw InputError("storage: unknown named storage '" + s.named + "'");
    return s;
  }
  if (kind != "kernel_form") throw InputError("storage: unknown kind '" + kind + "'");
  s.form = form_from_json(j);
  if (j.contains("quadratic_M")) s.quadratic_M = matrix_from_json(j["quadratic_M"], "quadratic_M");
  return s;
}

inline StorageFile read_storage(const std::string& path) { return storage_from_json(read_json(path)); }

// Datasets: CSV with x0.., u0.., xp0.. [, y0..] plus a JSON sidecar.

inline std::string sidecar_path(const std::string& csv_path) { return csv_path + ".json"; }

inline std::string dataset_csv(const SnapshotDataset& d) {
  d.check_shape();
  std::ostringstream os;
  std::vector<std::string> head;
  for (int k = 0; k < d.d_x(); ++k) head.push_back("x" + std::to_string(k));
  for (int k = 0; k < d.d_u(); ++k) head.push_back("u" + std::to_string(k));
  for (int k = 0; k < d.d_x(); ++k) head.push_back("xp" + std::to_string(k));
  if (d.Y) {
    for (Eigen::Index k = 0; k < d.Y->cols(); ++k) head.push_back("y" + std::to_string(k));
  }
  for (std::size_t k = 0; k < head.size(); ++k) os << (k ? "," : "") << head[k];
  os << "\n";
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    std::vector<double> row;
    for (int k = 0; k < d.d_x(); ++k) row.push_back(d.X(i, k));
    for (int k = 0; k < d.d_u(); ++k) row.push_back(d.U(i, k));
    for (int k = 0; k < d.d_x(); ++k) row.push_back(d.Xp(i, k));
    if (d.Y) {
      for (Eigen::Index k = 0; k < d.Y->cols(); ++k) row.push_back((*d.Y)(i, k));
    }
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << fmt(row[k]);
    os << "\n";
  }
  return os.str();
}

inline json dataset_sidecar(const SnapshotDataset& d) {
  json j;
  j["system"] = d.system;
  j["seed"] = d.seed;
  j["provenance"] = {{"kind", to_string(d.provenance.kind)},
                     {"count", d.provenance.count},
                     {"length", d.provenance.length}};
  j["external"] = d.provenance.kind == Provenance::Kind::External;
  j["n"] = d.size();
  j["d_x"] = d.d_x();
  j["d_u"] = d.d_u();
  return j;
}

inline void write_dataset(const std::string& csv_path, const SnapshotDataset& d) {
  write_text(csv_path, dataset_csv(d));
  write_json(sidecar_path(csv_path), dataset_sidecar(d));
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

// Columns named prefix0, prefix1, ... in order; returns their positions.
inline std::vector<std::size_t> indexed_columns(const std::vector<std::string>& head, const std::string& prefix) {
  std::vector<std::size_t> cols;
  for (int k = 0;; ++k) {
    const std::string name = prefix + std::to_string(k);
    std::size_t pos = head.size();
    for (std::size_t c = 0; c < head.size(); ++c) {
      if (head[c] == name) pos = c;
    }
    if (pos == head.size()) break;
    cols.push_back(pos);
  }
  return cols;
}

}  // namespace detail

/// Reads a dataset CSV. Without a sidecar the data are flagged as external.
inline SnapshotDataset read_dataset(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw InputError("cannot open dataset " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(csv_path + ": empty file");
  const auto head = detail::split_csv(line);
  const auto cx = detail::indexed_columns(head, "x");
  const auto cu = detail::indexed_columns(head, "u");
  const auto cxp = detail::indexed_columns(head, "xp");
  const auto cy = detail::indexed_columns(head, "y");
  if (cx.empty() || cxp.size() != cx.size()) {
    throw InputError(csv_path + ": need columns x0.. and xp0.. of equal count");
  }
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() != head.size()) {
      throw InputError(csv_path + ":" + std::to_string(lineno) + ": expected " + std::to_string(head.size()) +
                       " fields");
    }
    std::vector<double> r(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      char* end = nullptr;
      r[c] = std::strtod(cells[c].c_str(), &end);
      if (end == cells[c].c_str() || *end != '\0') {
        throw InputError(csv_path + ":" + std::to_string(lineno) + ": bad number '" + cells[c] + "'");
      }
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw InputError(csv_path + ": no snapshots");
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  auto fill = [&](const std::vector<std::size_t>& cols) {
    PointMatrix M(n, static_cast<Eigen::Index>(cols.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < cols.size(); ++k) M(i, static_cast<Eigen::Index>(k)) = rows[i][cols[k]];
    }
    return M;
  };
  SnapshotDataset d;
  d.X = fill(cx);
  d.U = fill(cu);
  d.Xp = fill(cxp);
  if (!cy.empty()) d.Y = fill(cy);
  d.provenance = {Provenance::Kind::External, static_cast<int>(n), 1};
  std::ifstream side(sidecar_path(csv_path));
  if (side) {
    const json j = json::parse(side);
    d.system = j.value("system", "external");
    d.seed = j.value("seed", std::uint64_t{0});
    const std::string kind = j.at("provenance").value("kind", "external");
    d.provenance.kind = kind == "trajectories" ? Provenance::Kind::Trajectories
                        : kind == "uniform"    ? Provenance::Kind::Uniform
                                               : Provenance::Kind::External;
    d.provenance.count = j.at("provenance").value("count", static_cast<int>(n));
    d.provenance.length = j.at("provenance").value("length", 1);
  }
  d.check_shape();
  return d;
}

// SDP problems and solutions

/// Standard form {dim, C, constraints: [{A, rhs}], trace_cap?}; reads <A_i, Theta> <= rhs_i, Theta PSD.
inline json to_json(const SdpProblem& p) {
  json j;
  j["form"] = "min <C,Theta> s.t. <A_i,Theta> <= rhs_i, Theta PSD";
  j["dim"] = p.dim;
  j["C"] = to_json(p.cost);
  json cons = json::array();
  for (const auto& c : p.constraints) cons.push_back({{"A", to_json(c.A)}, {"rhs", c.rhs}});
  j["constraints"] = std::move(cons);
  if (p.trace_cap) j["trace_cap"] = *p.trace_cap;
  return j;
}

inline SdpProblem sdp_from_json(const json& j) {
  SdpProblem p;
  p.dim = j.at("dim").get<Eigen::Index>();
  p.cost = matrix_from_json(j.at("C"), "C");
  for (const auto& c : j.at("constraints")) {
    p.constraints.push_back(SdpConstraint::dense(matrix_from_json(c.at("A"), "A"), c.at("rhs").get<double>()));
  }
  if (j.contains("trace_cap")) p.trace_cap = j["trace_cap"].get<double>();
  p.validate();
  return p;
}

inline json to_json(const SdpSolution& s) {
  json j;
  j["status"] = to_string(s.status);
  j["objective"] = s.objective;
  j["dual_objective"] = s.dual_objective;
  j["relative_gap"] = s.relative_gap;
  j["max_constraint_residual"] = s.max_constraint_residual;
  j["min_eigenvalue"] = s.min_eigenvalue;
  j["iterations"] = s.solver_iterations;
  j["message"] = s.message;
  j["multipliers"] = vector_to_json(s.multipliers);
  if (s.certificate) {
    j["certificate"] = vector_to_json(*s.certificate);
    j["certificate_trace_multiplier"] = s.certificate_trace_multiplier;
  }
  return j;
}

// Reports

inline json to_json(const ViolationReport& r) {
  json j;
  j["n"] = r.size();
  j["violations"] = r.violations();
  j["violation_fraction"] = r.violation_fraction;
  j["tol_viol"] = r.tol_viol;
  j["max_scaled"] = r.max_scaled;
  j["max_w"] = r.size() ? r.w.maxCoeff() : 0.0;
  if (r.fill_distance) j["fill_distance"] = *r.fill_distance;
  if (r.epsilon_s_proxy) {
    j["epsilon_s_proxy"] = *r.epsilon_s_proxy;
    j["epsilon_s_note"] = "empirical proxy: max scaled supply error of the KRR estimate on the training sample and uniform probes";
  }
  return j;
}

/// Per-point rows: x.., u.., |z|, w, w_scaled, violated.
inline std::string report_csv(const ViolationReport& r, const SnapshotDataset& d) {
  std::ostringstream os;
  for (int k = 0; k < d.d_x(); ++k) os << "x" << k << ",";
  for (int k = 0; k < d.d_u(); ++k) os << "u" << k << ",";
  os << "znorm,w,w_scaled,violated\n";
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    for (int k = 0; k < d.d_x(); ++k) os << fmt(d.X(i, k)) << ",";
    for (int k = 0; k < d.d_u(); ++k) os << fmt(d.U(i, k)) << ",";
    os << fmt(r.znorm(i)) << "," << fmt(r.w(i)) << "," << fmt(r.w_scaled(i)) << ","
       << (r.violated[static_cast<std::size_t>(i)] ? 1 : 0) << "\n";
  }
  return os.str();
}

/// v over a res x res grid on the first two state coordinates (others 0).
inline std::string grid_csv(const std::function<double(const VectorXd&)>& v, const Box& state_box, int res = 60) {
  if (res < 2) throw InputError("grid: resolution must be at least 2");
  if (state_box.dim() < 1) throw InputError("grid: empty state box");
  std::ostringstream os;
  const int d = state_box.dim();
  os << "x0," << (d > 1 ? "x1," : "") << "v\n";
  const auto [a0, b0] = state_box.bounds[0];
  const int res1 = d > 1 ? res : 1;
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res1; ++j) {
      VectorXd x = VectorXd::Zero(d);
      x(0) = a0 + (b0 - a0) * i / (res - 1);
      if (d > 1) {
        const auto [a1, b1] = state_box.bounds[1];
        x(1) = a1 + (b1 - a1) * j / (res - 1);
      }
      os << fmt(x(0)) << ",";
      if (d > 1) os << fmt(x(1)) << ",";
      os << fmt(v(x)) << "\n";
    }
  }
  return os.str();
}

}  // namespace io
}  // namespace dissipkit
