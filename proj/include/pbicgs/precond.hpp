#pragma once

// The six preconditioner configurations, applied matrix-free:
//
//   kind        inner solve                         fixed  comm-free  reduction-free
//   Identity    p^ = p                               -      -          -
//   GBiCGS      Bi-CGSTAB on the global operator     no     no         no
//   BJBiCGS     Bi-CGSTAB on the local block         no     yes        no
//   BJCI        Chebyshev, local block, local bounds yes    yes        yes
//   GCI         Chebyshev, global op, global bounds  yes    no         yes
//   GNoCommCI   Chebyshev, local block, global bounds yes   yes        yes

#include <algorithm>
#include <array>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pbicgs/chebyshev.hpp"
#include "pbicgs/krylov.hpp"
#include "pbicgs/spectrum.hpp"

namespace pbicgs {

enum class PreconditionerKind { Identity, GBiCGS, BJBiCGS, BJCI, GCI, GNoCommCI };

inline constexpr std::array<PreconditionerKind, 6> kAllPreconditioners{
    PreconditionerKind::Identity, PreconditionerKind::GBiCGS, PreconditionerKind::BJBiCGS,
    PreconditionerKind::BJCI,     PreconditionerKind::GCI,    PreconditionerKind::GNoCommCI};

struct PreconditionerFlags {
  bool fixed = true;
  bool comm_free = true;
  bool reduction_free = true;
  bool operator==(const PreconditionerFlags&) const = default;
};

constexpr PreconditionerFlags flags_of(PreconditionerKind k) {
  switch (k) {
    case PreconditionerKind::Identity: return {true, true, true};
    case PreconditionerKind::GBiCGS: return {false, false, false};
    case PreconditionerKind::BJBiCGS: return {false, true, false};
    case PreconditionerKind::BJCI: return {true, true, true};
    case PreconditionerKind::GCI: return {true, false, true};
    case PreconditionerKind::GNoCommCI: return {true, true, true};
  }
  return {};
}

inline std::string_view to_string(PreconditionerKind k) {
  switch (k) {
    case PreconditionerKind::Identity: return "identity";
    case PreconditionerKind::GBiCGS: return "G(BiCGS)";
    case PreconditionerKind::BJBiCGS: return "BJ(BiCGS)";
    case PreconditionerKind::BJCI: return "BJ(CI)";
    case PreconditionerKind::GCI: return "G(CI)";
    case PreconditionerKind::GNoCommCI: return "GNoComm(CI)";
  }
  return "unknown";
}

constexpr bool is_chebyshev(PreconditionerKind k) {
  return k == PreconditionerKind::BJCI || k == PreconditionerKind::GCI || k == PreconditionerKind::GNoCommCI;
}

/// Outer solver name -> preconditioner kind and outer variant.
struct SolverChoice {
  std::string_view name;
  PreconditionerKind kind;
  bool flexible;
};

inline constexpr std::array<SolverChoice, 6> kSolverChoices{{
    {"bicgs", PreconditionerKind::Identity, false},
    {"fbicgs-g-bicgs", PreconditionerKind::GBiCGS, true},
    {"fbicgs-bj-bicgs", PreconditionerKind::BJBiCGS, true},
    {"bicgs-bj-ci", PreconditionerKind::BJCI, false},
    {"bicgs-g-ci", PreconditionerKind::GCI, false},
    {"bicgs-gnocomm-ci", PreconditionerKind::GNoCommCI, false},
}};

inline SolverChoice parse_solver_name(std::string_view name) {
  for (const auto& c : kSolverChoices)
    if (c.name == name) return c;
  std::string valid;
  for (const auto& c : kSolverChoices) valid += (valid.empty() ? "" : ", ") + std::string(c.name);
  throw ConfigError("unknown solver '" + std::string(name) + "' (expected one of: " + valid + ")");
}

inline std::string_view solver_name(PreconditionerKind k) {
  for (const auto& c : kSolverChoices)
    if (c.kind == k) return c.name;
  return "unknown";
}

struct PreconditionerSettings {
  int ci_iterations = 24;
  /// Inner Bi-CGSTAB tolerance; defaults to 1e-2 (global) or 1e-6 (block).
  std::optional<double> inner_tol;
  int inner_max_iter = 500;
  double rescale_min = 100.0;
  double rescale_max = 1.0 - 1e-4;
  /// Replaces the computed eigenvalue bounds (before rescaling).
  std::optional<EigenBounds> bounds_override;
};

inline double default_inner_tol(PreconditionerKind k) { return k == PreconditionerKind::GBiCGS ? 1e-2 : 1e-6; }

class Preconditioner {
 public:
  Preconditioner(PreconditionerKind kind, const StencilOperator& op, PreconditionerSettings settings = {})
      : kind_(kind),
        settings_(settings),
        global_op_(op.with_mode(InterfaceMode::Exchange)),
        local_op_(op.with_mode(InterfaceMode::LocalBlock)) {
    if (settings_.ci_iterations < 0) throw ConfigError("prec-iters must be >= 0");
    if (settings_.inner_max_iter < 0) throw ConfigError("prec-max-iter must be >= 0");
    if (settings_.inner_tol && !(*settings_.inner_tol > 0.0)) throw ConfigError("prec-tol must be positive");

    if (is_chebyshev(kind_)) {
      const EigenBounds bounds = settings_.bounds_override.value_or(
          kind_ == PreconditionerKind::BJCI ? eigen_bounds(op.grid(), op.decomposition()) : eigen_bounds(op.grid()));
      bounds_ = bounds;
      const auto [alpha, beta] = rescale_bounds(bounds, settings_.rescale_min, settings_.rescale_max);
      params_ = chebyshev_params(alpha, beta, settings_.ci_iterations);
    }

    if (kind_ == PreconditionerKind::GNoCommCI) {
      const Index3& n = op.decomposition().local_interior;
      const Index smallest = std::min({n[0], n[1], n[2]});
      if (static_cast<double>(settings_.ci_iterations) > static_cast<double>(smallest) / 2.0) {
        std::ostringstream os;
        os << "GNoComm(CI): " << settings_.ci_iterations
           << " preconditioner iterations exceed the upper bound for the number of iterations (N_s/2 = "
           << static_cast<double>(smallest) / 2.0 << " for a smallest local extent of " << smallest << ")";
        warnings_.push_back(os.str());
      }
    }
  }

  PreconditionerKind kind() const { return kind_; }
  PreconditionerFlags flags() const { return flags_of(kind_); }
  bool is_fixed() const { return flags().fixed; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::optional<ChebyshevParams>& chebyshev() const { return params_; }
  const std::optional<EigenBounds>& bounds() const { return bounds_; }
  double inner_tol() const { return settings_.inner_tol.value_or(default_inner_tol(kind_)); }
  /// Inner Bi-CGSTAB solves that stopped at the iteration cap.
  long long inner_cap_hits() const { return inner_cap_hits_; }

  /// out = M^{-1} in.
  PrecondOutcome apply(Communicator& comm, const Field& in, Field& out) {
    switch (kind_) {
      case PreconditionerKind::Identity:
        out = in;
        return {true, 0};
      case PreconditionerKind::GBiCGS:
        return inner_bicgs(global_op_, comm, in, out);
      case PreconditionerKind::BJBiCGS: {
        SelfCommunicator self(comm);
        return inner_bicgs(local_op_, self, in, out);
      }
      case PreconditionerKind::BJCI:
      case PreconditionerKind::GNoCommCI:
        chebyshev_run(local_op_, comm, *params_, in, out, CommMode::NoExchange, cheb_);
        return {true, params_->iter_max};
      case PreconditionerKind::GCI:
        chebyshev_run(global_op_, comm, *params_, in, out, CommMode::Exchange, cheb_);
        return {true, params_->iter_max};
    }
    return {false, 0};
  }

 private:
  PrecondOutcome inner_bicgs(const StencilOperator& op, Communicator& comm, const Field& in, Field& out) {
    IdentityPreconditioner none;
    BicgsOptions opt;
    opt.tol = inner_tol();
    opt.max_iter = settings_.inner_max_iter;
    if (out.interior() != in.interior()) out = Field(in.interior());
    out.fill(0.0);
    const SolverReport r = bicgstab_run(op, none, comm, in, out, opt, inner_, false);
    if (!r.converged && !r.breakdown_reason) ++inner_cap_hits_;
    return {!r.breakdown_reason.has_value(), r.outer_iterations};
  }

  PreconditionerKind kind_;
  PreconditionerSettings settings_;
  StencilOperator global_op_;
  StencilOperator local_op_;
  std::optional<EigenBounds> bounds_;
  std::optional<ChebyshevParams> params_;
  std::vector<std::string> warnings_;
  ChebyshevState cheb_;
  BicgsState inner_;
  long long inner_cap_hits_ = 0;
};

}  // namespace pbicgs
