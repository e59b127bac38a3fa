#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"

#include "dissipkit/errors.hpp"
#include "dissipkit/io.hpp"
#include "dissipkit/kernels.hpp"
#include "dissipkit/storage.hpp"
#include "dissipkit/systems.hpp"

namespace dissipkit {

/// Experiment description. Keys are dotted paths ("kernel.lengthscale"); a
/// config file may spell them flat or as nested objects.
struct ExperimentConfig {
  // system
  std::string system = "poly1";  ///< poly1 | pendulum | bioreactor | external
  double dt = 0.05;
  std::string dataset_path;      ///< CSV for system = external

  // sampling
  std::string sampling_mode = "trajectories";  ///< trajectories | uniform
  int trajectories = 0;
  int length = 1;
  int n = 0;
  Box x_box;
  Box u_box;
  std::uint64_t seed = 0;
  double guard_factor = 10.0;

  // kernel
  ProfileFamily family = ProfileFamily::Gaussian;
  double nu = 2.5;
  double lengthscale = 1.0;
  std::optional<VectorXd> weights;

  // supply
  std::string supply_form = "named";  ///< named | qsr
  std::string supply_case;            ///< case1 | case2 | case3
  double supply_beta = 0.0;
  double supply_q = 0.0;
  std::optional<QsrSupply> qsr;
  std::string supply_output = "system";  ///< system | identity (y = x), for qsr supplies

  // krr
  std::string beta_mode = "default";  ///< default | cv | value
  double beta_reg = 0.0;
  std::vector<double> cv_candidates{1e-8, 1e-6, 1e-4, 1e-2};
  int probe_n = 500;               ///< uniform probes on X x U for the eps_S proxy
  std::uint64_t probe_seed = 0;

  // sdp and storage
  StorageOptions storage;
  std::string ansatz = "kernel";  ///< kernel | quadratic

  // validation
  int validation_n = 0;
  std::uint64_t validation_seed = 0;
  int grid_resolution = 60;
  int fill_resolution = 0;  ///< 0 skips the fill distance

  // sweep
  std::vector<int> sweep_n;
  std::vector<std::uint64_t> sweep_seeds;

  std::string output_dir = "output";

  int d_x() const { return system == "external" ? x_box.dim() : 2; }
  int d_u() const { return u_box.dim(); }
};

namespace detail {

inline void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it.value().is_object() && !it.value().empty()) {
      flatten(it.value(), key, out);
    } else {
      if (out.count(key)) throw ConfigError("config: key '" + key + "' given twice");
      out[key] = it.value();
    }
  }
}

class KeyReader {
 public:
  explicit KeyReader(std::map<std::string, json> keys) : keys_(std::move(keys)) {}

  bool has(const std::string& k) const { return keys_.count(k) > 0; }

  const json& raw(const std::string& k) {
    used_.insert(k);
    auto it = keys_.find(k);
    if (it == keys_.end()) throw ConfigError("config: missing required key '" + k + "'");
    return it->second;
  }

  double number(const std::string& k) {
    const json& v = raw(k);
    if (!v.is_number()) throw ConfigError("config: key '" + k + "' must be a number");
    return v.get<double>();
  }
  double number(const std::string& k, double fallback) { return has(k) ? number(k) : fallback; }

  int integer(const std::string& k) {
    const json& v = raw(k);
    if (!v.is_number_integer()) throw ConfigError("config: key '" + k + "' must be an integer");
    return v.get<int>();
  }
  int integer(const std::string& k, int fallback) { return has(k) ? integer(k) : fallback; }

  std::uint64_t seed(const std::string& k) {
    const json& v = raw(k);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ConfigError("config: key '" + k + "' must be a nonnegative integer");
    }
    return v.get<std::uint64_t>();
  }

  std::string text(const std::string& k) {
    const json& v = raw(k);
    if (!v.is_string()) throw ConfigError("config: key '" + k + "' must be a string");
    return v.get<std::string>();
  }
  std::string text(const std::string& k, const std::string& fallback) { return has(k) ? text(k) : fallback; }

  std::string choice(const std::string& k, const std::set<std::string>& allowed,
                     std::optional<std::string> fallback = std::nullopt) {
    if (!has(k) && fallback) return *fallback;
    std::string v = text(k);
    if (!allowed.count(v)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError("config: key '" + k + "' must be one of {" + list + "}, got '" + v + "'");
    }
    return v;
  }

  Box box(const std::string& k) {
    const json& v = raw(k);
    std::vector<std::pair<double, double>> b;
    if (!v.is_array() || v.empty()) throw ConfigError("config: key '" + k + "' must be a list of [lo, hi] pairs");
    for (const auto& p : v) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        throw ConfigError("config: key '" + k + "' must be a list of [lo, hi] pairs");
      }
      b.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    try {
      return Box(std::move(b));
    } catch (const ConfigError& e) {
      throw ConfigError("config: key '" + k + "': " + e.what());
    }
  }

  MatrixXd matrix(const std::string& k) {
    try {
      return io::matrix_from_json(raw(k), k);
    } catch (const InputError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }

  template <typename T>
  std::vector<T> list(const std::string& k) {
    const json& v = raw(k);
    if (!v.is_array()) throw ConfigError("config: key '" + k + "' must be a list");
    std::vector<T> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError("config: key '" + k + "' must be a list of numbers");
      if constexpr (std::is_integral_v<T>) {
        if (!e.is_number_integer() || (std::is_unsigned_v<T> && !e.is_number_unsigned() && e.get<std::int64_t>() < 0)) {
          throw ConfigError("config: key '" + k + "' must be a list of nonnegative integers");
        }
      }
      out.push_back(e.get<T>());
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [k, v] : keys_) {
      if (!used_.count(k)) throw ConfigError("config: unknown key '" + k + "'");
    }
  }

 private:
  std::map<std::string, json> keys_;
  std::set<std::string> used_;
};

}  // namespace detail

/// Parses and validates a config document; every error names the offending key.
inline ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  std::map<std::string, json> flat;
  detail::flatten(doc, "", flat);
  detail::KeyReader r(std::move(flat));
  ExperimentConfig c;

  c.system = r.choice("system.id", {"poly1", "pendulum", "bioreactor", "external"});
  c.dt = r.number("system.dt", 0.05);
  if (!(c.dt > 0.0)) throw ConfigError("config: key 'system.dt' must be positive");
  if (c.system == "external") c.dataset_path = r.text("system.dataset");

  c.x_box = r.box("sampling.x_box");
  c.u_box = r.box("sampling.u_box");
  c.seed = r.seed("sampling.seed");
  if (c.system != "external") {
    c.sampling_mode = r.choice("sampling.mode", {"trajectories", "uniform"});
    if (c.sampling_mode == "trajectories") {
      c.trajectories = r.integer("sampling.trajectories");
      c.length = r.integer("sampling.length");
      if (c.trajectories <= 0 || c.length <= 0) {
        throw ConfigError("config: keys 'sampling.trajectories' and 'sampling.length' must be positive");
      }
      c.n = c.trajectories * c.length;
      c.guard_factor = r.number("sampling.guard_factor", 10.0);
    } else {
      c.n = r.integer("sampling.n");
      if (c.n <= 0) throw ConfigError("config: key 'sampling.n' must be positive");
    }
    if (c.x_box.dim() != 2) throw ConfigError("config: key 'sampling.x_box' must have 2 intervals");
    if (c.u_box.dim() != 1) throw ConfigError("config: key 'sampling.u_box' must have 1 interval");
  }

  c.family = profile_family_from_string(r.choice("kernel.family", {"gaussian", "matern"}));
  if (c.family == ProfileFamily::Matern) c.nu = r.number("kernel.nu");
  c.lengthscale = r.number("kernel.lengthscale");
  if (r.has("kernel.weights")) {
    const auto w = r.list<double>("kernel.weights");
    c.weights = Eigen::Map<const VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  }
  try {
    RadialProfile(c.family, c.nu, c.lengthscale);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: key 'kernel.") +
                      (c.family == ProfileFamily::Matern ? "nu" : "lengthscale") + "': " + e.what());
  }

  c.supply_form = r.choice("supply.form", {"named", "qsr"});
  if (c.supply_form == "named") {
    c.supply_case = r.choice("supply.case", {"case1", "case2", "case3"});
    if (c.supply_case == "case3") {
      c.supply_q = r.number("supply.q");
    } else {
      c.supply_beta = r.number("supply.beta");
    }
  } else {
    c.qsr = QsrSupply{r.matrix("supply.Q"), r.matrix("supply.S"), r.matrix("supply.R")};
    c.supply_output = r.choice("supply.output", {"system", "identity"},
                               std::string(c.system == "external" ? "identity" : "system"));
    if (c.system == "external" && c.supply_output == "system") {
      throw ConfigError("config: key 'supply.output' must be 'identity' for external datasets");
    }
  }

  if (r.has("krr.beta_reg") && r.raw("krr.beta_reg").is_string()) {
    c.beta_mode = r.choice("krr.beta_reg", {"default", "cv"});
  } else if (r.has("krr.beta_reg")) {
    c.beta_mode = "value";
    c.beta_reg = r.number("krr.beta_reg");
    if (!(c.beta_reg > 0.0)) throw ConfigError("config: key 'krr.beta_reg' must be positive");
  }
  if (r.has("krr.cv_candidates")) c.cv_candidates = r.list<double>("krr.cv_candidates");
  c.probe_n = r.integer("krr.probe_n", 500);
  if (c.probe_n < 0) throw ConfigError("config: key 'krr.probe_n' must be nonnegative");
  if (r.has("krr.probe_seed")) c.probe_seed = r.seed("krr.probe_seed");

  auto& so = c.storage;
  so.sdp.tol = r.number("sdp.tol", 1e-8);
  so.sdp.max_iter = r.integer("sdp.max_iter", 200);
  so.sdp.infeasibility_tol = r.number("sdp.infeasibility_tol", 1e-7);
  so.sdp.reduced_tol = r.number("sdp.reduced_tol", 1e-6);
  so.sdp.objective_ridge = r.number("sdp.objective_ridge", so.sdp.objective_ridge);
  if (!(so.sdp.tol > 0.0)) throw ConfigError("config: key 'sdp.tol' must be positive");
  if (so.sdp.max_iter <= 0) throw ConfigError("config: key 'sdp.max_iter' must be positive");
  if (so.sdp.objective_ridge < 0.0) throw ConfigError("config: key 'sdp.objective_ridge' must be nonnegative");
  const std::string slack = r.choice("sdp.slack", {"strict", "relaxed"}, std::string("strict"));
  so.slack = slack == "strict" ? SlackMode::Strict : SlackMode::Relaxed;
  if (so.slack == SlackMode::Relaxed) {
    so.epsilon = r.number("sdp.epsilon");
    if (so.epsilon < 0.0) throw ConfigError("config: key 'sdp.epsilon' must be nonnegative");
  }
  if (r.has("sdp.trace_cap")) {
    so.trace_cap = r.number("sdp.trace_cap");
    if (!(*so.trace_cap > 0.0)) throw ConfigError("config: key 'sdp.trace_cap' must be positive");
  }
  c.ansatz = r.choice("storage.ansatz", {"kernel", "quadratic"}, std::string("kernel"));

  c.validation_n = r.integer("validation.n", 0);
  if (c.validation_n < 0) throw ConfigError("config: key 'validation.n' must be nonnegative");
  if (c.validation_n > 0) {
    c.validation_seed = r.seed("validation.seed");
    if (c.sampling_mode == "trajectories" && c.system != "external" && c.validation_n % c.length != 0) {
      throw ConfigError("config: key 'validation.n' must be a multiple of 'sampling.length'");
    }
  }
  c.grid_resolution = r.integer("validation.grid", 60);
  if (c.grid_resolution < 2) throw ConfigError("config: key 'validation.grid' must be at least 2");
  c.fill_resolution = r.integer("validation.fill_resolution", 0);
  if (c.fill_resolution != 0 && c.fill_resolution < 10) {
    throw ConfigError("config: key 'validation.fill_resolution' must be 0 or at least 10");
  }

  if (r.has("sweep.n_list")) c.sweep_n = r.list<int>("sweep.n_list");
  if (r.has("sweep.seeds")) c.sweep_seeds = r.list<std::uint64_t>("sweep.seeds");

  c.output_dir = r.text("output_dir", "output");
  r.reject_unknown();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  json doc;
  try {
    doc = io::read_json(path);
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(doc);
}

}  // namespace dissipkit
