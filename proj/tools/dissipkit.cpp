// dissipkit: config-driven dissipativity learning runs.
//
//   dissipkit run      --config cfg.json [--output DIR] [--seed N] [--dump-sdp] [--quiet]
//   dissipkit simulate --config cfg.json
//   dissipkit estimate --config cfg.json [--dataset CSV]
//   dissipkit validate --config cfg.json [--storage JSON]
//   dissipkit sweep    --config cfg.json
//   dissipkit dump-sdp --config cfg.json [--dataset CSV]
//
// Exit status: 0 feasible / done, 2 infeasible SDP, 1 any error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "dissipkit/pipeline.hpp"

using namespace dissipkit;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::string dataset;
  std::string storage;
  bool dump_sdp = false;
  bool quiet = false;
};

struct Context {
  Flags flags;
  ExperimentConfig cfg;
  RunPaths paths;
  std::string stage = "config";  // named in error messages

  void say(const std::string& line) const {
    if (!flags.quiet) std::cout << line << "\n";
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void load(Context& ctx) {
  ctx.stage = "config";
  ctx.cfg = load_config(ctx.flags.config);
  if (ctx.flags.seed) ctx.cfg.seed = *ctx.flags.seed;
  if (!ctx.flags.output.empty()) ctx.cfg.output_dir = ctx.flags.output;
  ctx.paths = prepare_output(ctx.cfg.output_dir);
}

SnapshotDataset do_simulate(Context& ctx) {
  ctx.stage = "simulate";
  SnapshotDataset d = simulate(ctx.cfg, ctx.cfg.seed);
  io::write_dataset(ctx.paths.dataset().string(), d);
  ctx.say("simulate: " + std::to_string(d.size()) + " snapshots -> " + ctx.paths.dataset().string());
  return d;
}

SnapshotDataset read_training(Context& ctx) {
  ctx.stage = "dataset";
  const std::string path = ctx.flags.dataset.empty() ? ctx.paths.dataset().string() : ctx.flags.dataset;
  if (!std::filesystem::exists(path)) throw InputError("no dataset at '" + path + "' (run 'simulate' first)");
  return io::read_dataset(path);
}

int do_estimate(Context& ctx, const SnapshotDataset& d) {
  ctx.stage = "estimate";
  const Estimate e = estimate(ctx.cfg, d);
  const int code = write_estimate(ctx.cfg, d, e, ctx.paths, ctx.flags.dump_sdp);
  const auto& sol = e.fit.solution;
  ctx.say("estimate: " + to_string(sol.status) + " (beta_reg " + num(e.supply.beta_reg) + ", eps_S proxy " +
          num(e.epsilon_s_proxy) + ", " + std::to_string(sol.solver_iterations) + " iterations)");
  if (code == kExitOptimal) {
    ctx.say("  objective " + num(sol.objective) + ", min eig " + num(sol.min_eigenvalue) + " -> " +
            ctx.paths.storage().string());
  } else {
    std::cerr << "estimate: " << e.fit.diagnostics << "\n";
  }
  return code;
}

std::optional<double> stored_eps_proxy(const Context& ctx) {
  if (!std::filesystem::exists(ctx.paths.solution())) return std::nullopt;
  const json j = io::read_json(ctx.paths.solution().string());
  if (!j.contains("epsilon_s_proxy")) return std::nullopt;
  return j["epsilon_s_proxy"].get<double>();
}

int do_validate(Context& ctx) {
  ctx.stage = "validate";
  const std::string path = ctx.flags.storage.empty() ? ctx.paths.storage().string() : ctx.flags.storage;
  const io::StorageFile storage = io::read_storage(path);
  const ViolationReport r = write_validation(ctx.cfg, storage, ctx.paths, stored_eps_proxy(ctx));
  ctx.say("validate: " + std::to_string(r.violations()) + "/" + std::to_string(r.size()) + " violations (" +
          num(100.0 * r.violation_fraction) + "%), max scaled " + num(r.max_scaled) + " -> " +
          ctx.paths.report().string());
  return kExitOptimal;
}

int do_run(Context& ctx) {
  do_simulate(ctx);
  // Re-read so the monolithic run sees exactly what the staged one would.
  const SnapshotDataset d = read_training(ctx);
  const int code = do_estimate(ctx, d);
  if (code != kExitOptimal) return code;
  if (ctx.cfg.validation_n > 0 && ctx.cfg.system != "external") do_validate(ctx);
  return code;
}

int do_sweep(Context& ctx) {
  ctx.stage = "sweep";
  const auto rows = run_sweep(ctx.cfg);
  io::write_text(ctx.paths.sweep().string(), sweep_csv(rows));
  if (!ctx.flags.quiet) {
    std::printf("%6s %6s %-15s %12s %12s %10s %10s\n", "n", "seed", "status", "eps_proxy", "max_scaled", "viol_frac",
                "fill");
    for (const auto& r : rows) {
      std::printf("%6d %6llu %-15s %12.4g %12.4g %10.4f %10.4g\n", r.n, static_cast<unsigned long long>(r.seed),
                  r.status.c_str(), r.epsilon_s_proxy, r.max_scaled_violation, r.violation_fraction,
                  r.fill_distance);
    }
  }
  ctx.say("sweep: " + std::to_string(rows.size()) + " cells -> " + ctx.paths.sweep().string());
  return kExitOptimal;
}

int do_dump_sdp(Context& ctx) {
  const SnapshotDataset d = read_training(ctx);
  ctx.stage = "dump-sdp";
  const Estimate e = estimate_supply(ctx.cfg, d);
  io::write_json(ctx.paths.sdp().string(), io::to_json(storage_problem(ctx.cfg, d, e)));
  ctx.say("dump-sdp: -> " + ctx.paths.sdp().string());
  return kExitOptimal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven dissipativity learning with linear-radial kernels"};
  app.require_subcommand(1);
  Context ctx;
  Flags& f = ctx.flags;
  app.add_option("--config", f.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "override sampling.seed");
  app.add_option("--output", f.output, "override output_dir");
  app.add_flag("--dump-sdp", f.dump_sdp, "also write the SDP in standard form");
  app.add_flag("--quiet", f.quiet, "no progress output");

  auto* run = app.add_subcommand("run", "simulate, estimate and validate");
  auto* sim = app.add_subcommand("simulate", "write the training dataset");
  auto* est = app.add_subcommand("estimate", "fit a storage function to a dataset");
  est->add_option("--dataset", f.dataset, "dataset CSV (default: <output>/dataset.csv)");
  auto* val = app.add_subcommand("validate", "fresh-sample violation report");
  val->add_option("--storage", f.storage, "storage JSON (default: <output>/storage.json)");
  auto* swp = app.add_subcommand("sweep", "generalization sweep over sweep.n_list x sweep.seeds");
  auto* dmp = app.add_subcommand("dump-sdp", "write the storage SDP without solving it");
  dmp->add_option("--dataset", f.dataset, "dataset CSV (default: <output>/dataset.csv)");
  for (auto* s : {run, sim, est, val, swp, dmp}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitError;
  }

  try {
    load(ctx);
    if (*run) return do_run(ctx);
    if (*sim) {
      do_simulate(ctx);
      return kExitOptimal;
    }
    if (*est) return do_estimate(ctx, read_training(ctx));
    if (*val) return do_validate(ctx);
    if (*swp) return do_sweep(ctx);
    if (*dmp) return do_dump_sdp(ctx);
  } catch (const std::exception& e) {
    std::cerr << "error [" << ctx.stage << "]: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
