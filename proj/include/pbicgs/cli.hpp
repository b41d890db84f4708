#pragma once

// Command-line front end. Every flag can also be given in a flat
// "key = value" file passed with --config; flags given on the command line win.
//
// Exit status: 0 converged, 1 configuration or I/O error, 2 not converged,
// breakdown, or a runtime failure inside the workers.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pbicgs/run.hpp"

namespace pbicgs {

inline constexpr int kExitConverged = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitNotConverged = 2;

namespace detail {

inline Index3 to_index3(const std::vector<long long>& v) { return {v[0], v[1], v[2]}; }

template <class T, std::size_t N>
std::array<T, N> to_array(const std::vector<T>& v) {
  std::array<T, N> a{};
  std::copy_n(v.begin(), N, a.begin());
  return a;
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunConfig cfg;
  CLI::App app{"Matrix-free preconditioned Bi-CGSTAB for the 3D Poisson benchmark problem", "pbicgs"};
  app.set_config("--config", "", "flat key = value file; command-line flags override it");
  app.allow_config_extras(false);

  std::vector<long long> mesh{cfg.mesh.begin(), cfg.mesh.end()};
  std::vector<long long> decomp{cfg.decomp.begin(), cfg.decomp.end()};
  std::vector<double> domain{cfg.domain.begin(), cfg.domain.end()};
  std::vector<std::string> bc_kinds;
  for (BcKind k : cfg.bc_kinds) bc_kinds.emplace_back(to_string(k));
  std::vector<double> bc_values{cfg.bc_values.begin(), cfg.bc_values.end()};
  double prec_tol = 0.0;

  app.add_option("--mesh", mesh, "global unknowns NX,NY,NZ")->delimiter(',')->expected(3);
  app.add_option("--decomp", decomp, "ranks per axis PX,PY,PZ")->delimiter(',')->expected(3);
  app.add_option("--solver", cfg.solver,
                 "bicgs | fbicgs-g-bicgs | fbicgs-bj-bicgs | bicgs-bj-ci | bicgs-g-ci | bicgs-gnocomm-ci");
  app.add_option("--tol", cfg.tol, "relative residual tolerance");
  app.add_option("--max-iter", cfg.max_iter, "outer iteration cap");
  app.add_option("--prec-iters", cfg.prec_iters, "Chebyshev preconditioner iterations");
  auto* prec_tol_opt = app.add_option("--prec-tol", prec_tol, "inner Bi-CGSTAB tolerance");
  app.add_option("--prec-max-iter", cfg.prec_max_iter, "inner Bi-CGSTAB iteration cap");
  app.add_option("--rescale-min", cfg.rescale_min, "factor applied to lambda_min (>= 1)");
  app.add_option("--rescale-max", cfg.rescale_max, "factor applied to lambda_max (<= 1)");
  app.add_option("--domain", domain, "XLO,XHI,YLO,YHI,ZLO,ZHI")->delimiter(',')->expected(6);
  app.add_option("--bc-kinds", bc_kinds, "kind per face x-,x+,y-,y+,z-,z+")->delimiter(',')->expected(6);
  app.add_option("--bc-values", bc_values, "constant data per face x-,x+,y-,y+,z-,z+")->delimiter(',')->expected(6);
  app.add_option("--residual-csv", cfg.residual_csv, "residual history output");
  app.add_option("--report-json", cfg.report_json, "JSON run report output");
  app.add_option("--repeats", cfg.repeats, "number of repeated solves");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitConverged;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    cfg.mesh = detail::to_index3(mesh);
    cfg.decomp = detail::to_index3(decomp);
    cfg.domain = detail::to_array<double, 6>(domain);
    cfg.bc_values = detail::to_array<double, 6>(bc_values);
    for (std::size_t i = 0; i < 6; ++i) cfg.bc_kinds[i] = parse_bc_kind(bc_kinds[i]);
    if (prec_tol_opt->count() > 0) cfg.prec_tol = prec_tol;
    cfg.validate();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  RunResult result;
  try {
    result = run(cfg);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: run failed: " << e.what() << "\n";
    return kExitNotConverged;
  }
  for (const auto& w : result.warnings) err << "warning: " << w << "\n";

  try {
    write_outputs(result, cfg);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  const SolverReport& r = result.reports.front();
  out << cfg.solver << ": " << (r.converged ? "converged" : "not converged") << " after " << r.outer_iterations
      << " outer iterations, relative residual " << format_real(r.final_residual);
  if (r.breakdown_reason) out << " (breakdown: " << to_string(*r.breakdown_reason) << ")";
  out << "\n";
  return result.converged() ? kExitConverged : kExitNotConverged;
}

}  // namespace pbicgs
