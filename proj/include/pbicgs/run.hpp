#pragma once

// Batch runs of the benchmark problem: configuration, rank workers, and the
// residual CSV / JSON report outputs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pbicgs/comm.hpp"
#include "pbicgs/krylov.hpp"
#include "pbicgs/precond.hpp"
#include "pbicgs/problem.hpp"

namespace pbicgs {

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline BcKind parse_bc_kind(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "dirichlet" || l == "d") return BcKind::Dirichlet;
  if (l == "neumann" || l == "n") return BcKind::Neumann;
  throw ConfigError("unknown boundary condition kind '" + s + "' (expected dirichlet or neumann)");
}

struct RunConfig {
  Index3 mesh{256, 256, 256};
  DomainBounds domain = kBenchmarkDomain;
  Index3 decomp{1, 1, 1};
  std::string solver = "bicgs-gnocomm-ci";
  double tol = 1e-10;
  int max_iter = 20000;
  int prec_iters = 24;
  std::optional<double> prec_tol;
  int prec_max_iter = 500;
  double rescale_min = 100.0;
  double rescale_max = 1.0 - 1e-4;
  std::array<BcKind, 6> bc_kinds = kBenchmarkBcKinds;
  std::array<double, 6> bc_values{};
  std::string residual_csv;
  std::string report_json;
  int repeats = 1;

  int rank_count() const { return static_cast<int>(decomp[0] * decomp[1] * decomp[2]); }

  GridSpec grid() const { return make_grid(mesh, domain, bc_kinds, bc_values); }

  PreconditionerSettings preconditioner_settings() const {
    PreconditionerSettings s;
    s.ci_iterations = prec_iters;
    s.inner_tol = prec_tol;
    s.inner_max_iter = prec_max_iter;
    s.rescale_min = rescale_min;
    s.rescale_max = rescale_max;
    return s;
  }

  /// Checks every precondition that does not need a worker; throws ConfigError.
  void validate() const {
    if (!(tol > 0.0)) throw ConfigError("tol must be positive");
    if (max_iter < 0) throw ConfigError("max-iter must be >= 0");
    if (prec_iters < 0) throw ConfigError("prec-iters must be >= 0");
    if (prec_tol && !(*prec_tol > 0.0)) throw ConfigError("prec-tol must be positive");
    if (prec_max_iter < 0) throw ConfigError("prec-max-iter must be >= 0");
    if (!(rescale_min >= 1.0)) throw ConfigError("rescale-min must be >= 1");
    if (!(rescale_max > 0.0 && rescale_max <= 1.0)) throw ConfigError("rescale-max must be in (0, 1]");
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    for (int a = 0; a < 3; ++a) {
      if (mesh[a] < 1) throw ConfigError(std::string("mesh extent must be >= 1 on axis ") + kAxisNames[a]);
      if (decomp[a] < 1) throw ConfigError(std::string("decomp must be >= 1 on axis ") + kAxisNames[a]);
    }
    if (rank_count() > 1024) throw ConfigError("at most 1024 in-process ranks are supported");
    const SolverChoice choice = parse_solver_name(solver);
    const GridSpec g = grid();
    eigen_bounds(g);  // rejects an all-Neumann (singular) problem
    for (int r = 0; r < rank_count(); ++r) {
      const Decomposition d = build_decomposition(g, decomp, r, rank_count());
      const Preconditioner probe(choice.kind, StencilOperator(g, d), preconditioner_settings());
    }
  }

  /// Fully resolved configuration as "key = value" pairs; feeding them back
  /// through the CLI reproduces the run.
  std::vector<std::pair<std::string, std::string>> to_key_values() const {
    auto join_int = [](const Index3& v) {
      return std::to_string(v[0]) + "," + std::to_string(v[1]) + "," + std::to_string(v[2]);
    };
    auto join_real = [](const auto& v) {
      std::string s;
      for (double x : v) s += (s.empty() ? "" : ",") + format_real(x);
      return s;
    };
    std::string kinds;
    for (BcKind k : bc_kinds) kinds += (kinds.empty() ? "" : ",") + std::string(to_string(k));
    const SolverChoice choice = parse_solver_name(solver);
    return {
        {"mesh", join_int(mesh)},
        {"domain", join_real(domain)},
        {"decomp", join_int(decomp)},
        {"solver", solver},
        {"tol", format_real(tol)},
        {"max-iter", std::to_string(max_iter)},
        {"prec-iters", std::to_string(prec_iters)},
        {"prec-tol", format_real(prec_tol.value_or(default_inner_tol(choice.kind)))},
        {"prec-max-iter", std::to_string(prec_max_iter)},
        {"rescale-min", format_real(rescale_min)},
        {"rescale-max", format_real(rescale_max)},
        {"bc-kinds", kinds},
        {"bc-values", join_real(bc_values)},
        {"residual-csv", residual_csv},
        {"report-json", report_json},
        {"repeats", std::to_string(repeats)},
    };
  }
};

struct RunOptions {
  bool gather_solution = false;
  std::chrono::milliseconds timeout{std::chrono::seconds(30)};
};

struct RunResult {
  /// Rank-0 report of every repeat.
  std::vector<SolverReport> reports;
  std::vector<std::string> warnings;
  double rhs_scale = 1.0;
  int ranks = 1;
  long long inner_cap_hits = 0;
  /// Global solution in physical scale, x fastest (only when gathered).
  std::vector<double> solution;

  bool converged() const {
    return !reports.empty() && std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.converged; });
  }
};

inline RunResult run(const RunConfig& cfg, const RunOptions& opts = {}) {
  cfg.validate();
  const GridSpec grid = cfg.grid();
  const SolverChoice choice = parse_solver_name(cfg.solver);
  const int ranks = cfg.rank_count();

  RunResult result;
  result.ranks = ranks;
  if (opts.gather_solution) result.solution.assign(static_cast<std::size_t>(grid.unknowns()), 0.0);

  for (int rep = 0; rep < cfg.repeats; ++rep) {
    const bool last = rep + 1 == cfg.repeats;
    run_ranks(
        ranks,
        [&](Communicator& comm) {
          const Decomposition d = build_decomposition(grid, cfg.decomp, comm.rank(), ranks);
          const StencilOperator op(grid, d);
          const RightHandSide rhs = build_rhs(grid, d, comm);
          Preconditioner pre(choice.kind, op, cfg.preconditioner_settings());
          Field x = d.make_field();
          BicgsOptions bo;
          bo.tol = cfg.tol;
          bo.max_iter = cfg.max_iter;
          bo.flexible = choice.flexible;
          SolverReport report = bicgstab_run(op, pre, comm, rhs.values, x, bo);

          if (comm.rank() == 0) {
            result.reports.push_back(std::move(report));
            result.rhs_scale = rhs.scale;
            result.inner_cap_hits += pre.inner_cap_hits();
            if (rep == 0) result.warnings = pre.warnings();
          }
          if (opts.gather_solution && last) {
            // Ranks own disjoint index sets, so concurrent writes do not overlap.
            const Index3 off = d.global_offset();
            const Index3& ge = grid.extents;
            for_each(interior_box(d.local_interior), [&](Index i, Index j, Index k) {
              const Index g = (off[0] + i) + ge[0] * ((off[1] + j) + ge[1] * (off[2] + k));
              result.solution[static_cast<std::size_t>(g)] = x(i, j, k) * rhs.scale;
            });
          }
        },
        opts.timeout);
  }
  if (result.inner_cap_hits > 0) {
    result.warnings.push_back(std::to_string(result.inner_cap_hits) +
                              " inner Bi-CGSTAB solves stopped at prec-max-iter = " +
                              std::to_string(cfg.prec_max_iter) + " without reaching prec-tol");
  }
  return result;
}

namespace detail {

inline nlohmann::json counters_json(const MessageCounters& c) {
  return {{"halo_messages_sent", c.halo_messages_sent},
          {"halo_bytes_sent", c.halo_bytes_sent},
          {"allreduce_calls", c.allreduce_calls}};
}

inline nlohmann::json timings_json(const PhaseTimings& t) {
  nlohmann::json j = nlohmann::json::object();
  for (Phase p : kAllPhases) j[std::string(phase_key(p))] = t[p];
  return j;
}

inline std::pair<double, double> mean_stddev(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace detail

/// Residual CSV body: header plus one row per outer iteration.
inline std::string residual_csv(const SolverReport& report) {
  std::string out = "iteration,relative_residual\n";
  for (const auto& e : report.residual_history) out += std::to_string(e.iteration) + "," + format_real(e.relative_residual) + "\n";
  return out;
}

inline nlohmann::json report_json(const RunResult& result, const RunConfig& cfg) {
  using nlohmann::json;
  const SolverReport& r = result.reports.front();
  json j;
  j["converged"] = r.converged;
  j["outer_iterations"] = r.outer_iterations;
  j["preconditioner_iterations_total"] = r.preconditioner_iterations_total;
  j["final_residual"] = r.final_residual;
  j["breakdown_reason"] = r.breakdown_reason ? json(std::string(to_string(*r.breakdown_reason))) : json(nullptr);
  j["residual_history"] = json::array();
  for (const auto& e : r.residual_history) {
    j["residual_history"].push_back({{"iteration", e.iteration}, {"relative_residual", e.relative_residual}});
  }
  j["phase_timings"] = detail::timings_json(r.phase_timings);
  j["message_counters"] = detail::counters_json(r.message_counters);
  j["ranks"] = result.ranks;
  j["rhs_norm"] = result.rhs_scale;
  j["inner_solves_at_cap"] = result.inner_cap_hits;
  j["warnings"] = result.warnings;

  json config = json::object();
  for (const auto& [k, v] : cfg.to_key_values()) config[k] = v;
  j["config"] = config;

  json runs = json::array();
  std::vector<double> iters;
  std::vector<double> times;
  std::array<std::vector<double>, 6> phase_samples;
  for (const auto& rep : result.reports) {
    runs.push_back({{"converged", rep.converged},
                    {"outer_iterations", rep.outer_iterations},
                    {"total_time", rep.phase_timings[Phase::Total]},
                    {"phase_timings", detail::timings_json(rep.phase_timings)}});
    iters.push_back(rep.outer_iterations);
    times.push_back(rep.phase_timings[Phase::Total]);
    for (Phase p : kAllPhases) phase_samples[static_cast<int>(p)].push_back(rep.phase_timings[p]);
  }
  const auto [it_mean, it_sd] = detail::mean_stddev(iters);
  const auto [t_mean, t_sd] = detail::mean_stddev(times);
  json pm = json::object();
  json ps = json::object();
  for (Phase p : kAllPhases) {
    const auto [m, s] = detail::mean_stddev(phase_samples[static_cast<int>(p)]);
    pm[std::string(phase_key(p))] = m;
    ps[std::string(phase_key(p))] = s;
  }
  j["repeats"] = {{"count", result.reports.size()},
                  {"runs", runs},
                  {"outer_iterations_mean", it_mean},
                  {"outer_iterations_stddev", it_sd},
                  {"total_time_mean", t_mean},
                  {"total_time_stddev", t_sd},
                  {"phase_timings_mean", pm},
                  {"phase_timings_stddev", ps}};
  return j;
}

/// Writes the configured outputs; empty paths are skipped. Throws
/// std::runtime_error when a file cannot be written.
inline void write_outputs(const RunResult& result, const RunConfig& cfg) {
  auto write = [](const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << body;
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
  };
  if (!cfg.residual_csv.empty()) write(cfg.residual_csv, residual_csv(result.reports.front()));
  if (!cfg.report_json.empty()) write(cfg.report_json, report_json(result, cfg).dump(2) + "\n");
}

}  // namespace pbicgs
