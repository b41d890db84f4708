#pragma once

// Preconditioned Bi-CGSTAB with fused stencil/dot kernels and three batched
// reductions per iteration.

#include <array>
#include <cmath>
#include <concepts>
#include <optional>
#include <string_view>
#include <vector>

#include "pbicgs/comm.hpp"
#include "pbicgs/operator.hpp"
#include "pbicgs/timing.hpp"

namespace pbicgs {

enum class BreakdownReason { Rho, Omega, AlphaDenominator, NonFinite, Preconditioner };

inline std::string_view to_string(BreakdownReason r) {
  switch (r) {
    case BreakdownReason::Rho: return "rho";
    case BreakdownReason::Omega: return "omega";
    case BreakdownReason::AlphaDenominator: return "alpha_denominator";
    case BreakdownReason::NonFinite: return "non_finite";
    case BreakdownReason::Preconditioner: return "preconditioner";
  }
  return "unknown";
}

struct ResidualEntry {
  int iteration = 0;
  double relative_residual = 0.0;
};

/// Scalars of one outer iteration, recorded on request for verification.
struct IterationScalars {
  double alpha = 0.0;
  double omega = 0.0;
  double rho = 0.0;
};

struct SolverReport {
  bool converged = false;
  int outer_iterations = 0;
  long long preconditioner_iterations_total = 0;
  double final_residual = 0.0;
  std::vector<ResidualEntry> residual_history;
  std::vector<IterationScalars> scalars;
  PhaseTimings phase_timings;
  MessageCounters message_counters;
  std::optional<BreakdownReason> breakdown_reason;
};

struct BicgsOptions {
  double tol = 1e-10;
  int max_iter = 20000;
  double breakdown_threshold = 1e-30;
  /// Flexible bookkeeping; required when the preconditioner is not a fixed map.
  bool flexible = false;
  bool trace_scalars = false;
};

/// Result of one preconditioner application.
struct PrecondOutcome {
  bool ok = true;
  long long iterations = 0;
};

template <class P>
concept PreconditionerLike = requires(P& p, Communicator& c, const Field& in, Field& out) {
  { p.apply(c, in, out) } -> std::same_as<PrecondOutcome>;
  { p.is_fixed() } -> std::convertible_to<bool>;
};

struct IdentityPreconditioner {
  PrecondOutcome apply(Communicator&, const Field& in, Field& out) const {
    out = in;
    return {true, 0};
  }
  bool is_fixed() const { return true; }
};

/// Working vectors of one solve; reusable across solves of the same layout.
struct BicgsState {
  Field r, r_tilde, p, p_hat, r_hat, w, t;
  double rho_prev = 0.0, rho = 0.0, alpha = 0.0, omega = 0.0, beta = 0.0;
  int iteration = 0;

  void ensure(const Index3& n) {
    if (r.interior() != n) {
      for (Field* f : {&r, &r_tilde, &p, &p_hat, &r_hat, &w, &t}) *f = Field(n);
    }
  }
};

/// Solves A x = b starting from the contents of x. The stopping test is
/// ||r|| / ||b|| <= tol, which is ||r|| <= tol for a unit-norm right-hand side.
template <PreconditionerLike Precond>
SolverReport bicgstab_run(const StencilOperator& op, Precond& precond, Communicator& comm, const Field& b, Field& x,
                          const BicgsOptions& opt, BicgsState& st, bool time_phases = true) {
  if (!(opt.tol > 0.0)) throw ConfigError("tol must be positive");
  if (opt.max_iter < 0) throw ConfigError("max-iter must be >= 0");
  if (!opt.flexible && !precond.is_fixed()) {
    throw ConfigError("an inexact (non-fixed) preconditioner requires the flexible Bi-CGSTAB variant");
  }
  op.check_layout(b);
  op.check_layout(x);
  st.ensure(b.interior());

  SolverReport report;
  PhaseTimings* tm = time_phases ? &report.phase_timings : nullptr;
  const MessageCounters start = comm.counters();
  const Decomposition& decomp = op.decomposition();

  auto exchange_and_fill = [&](Field& f) {
    {
      ScopedPhase s(tm, Phase::HaloExchange);
      comm.halo_exchange(decomp, f);
    }
    ScopedPhase s(tm, Phase::StencilKernels);
    op.fill_ghost(f);
  };
  auto reduce = [&](std::span<double> v) {
    ScopedPhase s(tm, Phase::Allreduce);
    comm.allreduce_sum(v);
  };
  auto precondition = [&](const Field& in, Field& out) {
    ScopedPhase s(tm, Phase::Preconditioner);
    const PrecondOutcome o = precond.apply(comm, in, out);
    report.preconditioner_iterations_total += o.iterations;
    return o.ok;
  };
  const Box interior = interior_box(b.interior());
  const Index sy = b.stride_y();
  const Index sz = b.stride_z();
  // Applies fn(c) over the interior, x fastest.
  auto vector_kernel = [&](auto&& fn) {
    ScopedPhase s(tm, Phase::VectorKernels);
    for (Index k = 0; k < interior.hi[2]; ++k)
      for (Index j = 0; j < interior.hi[1]; ++j) {
        const Index base = (j + 1) * sy + (k + 1) * sz + 1;
        for (Index i = 0; i < interior.hi[0]; ++i) fn(base + i);
      }
  };

  auto body = [&]() {
    // r0 = b - A x0; r~ = r0; p0 = r0; rho0 = r~ . r0 (batched with b . b).
    exchange_and_fill(x);
    double rr0 = 0.0;
    {
      ScopedPhase s(tm, Phase::StencilKernels);
      const double* pb = b.data();
      double* r = st.r.data();
      op.sweep(x, st.r, [&](Index c, double ax) {
        r[c] = pb[c] - ax;
        rr0 += r[c] * r[c];
      });
    }
    double bb = 0.0;
    vector_kernel([&, pb = b.data(), r = st.r.data(), rt = st.r_tilde.data(), p = st.p.data()](Index c) {
      rt[c] = r[c];
      p[c] = r[c];
      bb += pb[c] * pb[c];
    });
    std::array<double, 2> setup{rr0, bb};
    reduce(setup);
    const double bnorm = std::sqrt(setup[1]);
    st.rho_prev = setup[0];
    st.iteration = 0;
    const double rho_scale = std::abs(st.rho_prev);

    if (bnorm == 0.0) {
      x.fill(0.0);
      report.converged = true;
      return;
    }
    report.final_residual = std::sqrt(setup[0]) / bnorm;
    if (report.final_residual <= opt.tol) {
      report.converged = true;
      return;
    }

    for (int it = 1; it <= opt.max_iter; ++it) {
      st.iteration = it;
      // M p^ = p, then w = A p^ with the local r~ . w.
      if (!precondition(st.p, st.p_hat)) {
        report.breakdown_reason = BreakdownReason::Preconditioner;
        break;
      }
      exchange_and_fill(st.p_hat);
      std::array<double, 1> rw{};
      {
        ScopedPhase s(tm, Phase::StencilKernels);
        rw[0] = op.apply_dot(st.p_hat, st.w, st.r_tilde);
      }
      reduce(rw);
      if (rw[0] == 0.0 || !std::isfinite(rw[0])) {
        report.breakdown_reason = BreakdownReason::AlphaDenominator;
        break;
      }
      st.alpha = st.rho_prev / rw[0];
      vector_kernel([a = st.alpha, r = st.r.data(), w = st.w.data()](Index c) { r[c] -= a * w[c]; });

      // M r^ = r, then t = A r^ with the local t . r and t . t.
      if (!precondition(st.r, st.r_hat)) {
        report.breakdown_reason = BreakdownReason::Preconditioner;
        break;
      }
      exchange_and_fill(st.r_hat);
      std::array<double, 2> tr_tt{};
      {
        ScopedPhase s(tm, Phase::StencilKernels);
        tr_tt = op.apply_dot2(st.r_hat, st.t, st.r);
      }
      reduce(tr_tt);
      // t = 0 only when r^ = 0, i.e. the alpha step already solved the system.
      st.omega = tr_tt[1] == 0.0 ? 0.0 : tr_tt[0] / tr_tt[1];

      double r0r = 0.0;
      double rr = 0.0;
      vector_kernel([&, a = st.alpha, om = st.omega, px = x.data(), ph = st.p_hat.data(), rh = st.r_hat.data(),
                     r = st.r.data(), t = st.t.data(), rt = st.r_tilde.data()](Index c) {
        px[c] += a * ph[c] + om * rh[c];
        r[c] -= om * t[c];
        r0r += rt[c] * r[c];
        rr += r[c] * r[c];
      });
      std::array<double, 2> sums{r0r, rr};
      reduce(sums);

      const double relres = std::sqrt(sums[1]) / bnorm;
      report.outer_iterations = it;
      report.final_residual = relres;
      report.residual_history.push_back({it, relres});
      if (opt.trace_scalars) report.scalars.push_back({st.alpha, st.omega, sums[0]});
      if (!std::isfinite(relres)) {
        report.breakdown_reason = BreakdownReason::NonFinite;
        break;
      }
      if (relres <= opt.tol) {
        report.converged = true;
        break;
      }
      if (std::abs(st.omega) < opt.breakdown_threshold) {
        report.breakdown_reason = BreakdownReason::Omega;
        break;
      }
      st.rho = sums[0];
      if (std::abs(st.rho) < opt.breakdown_threshold * rho_scale) {
        report.breakdown_reason = BreakdownReason::Rho;
        break;
      }
      st.beta = (st.rho * st.alpha) / (st.rho_prev * st.omega);
      vector_kernel([bt = st.beta, om = st.omega, p = st.p.data(), r = st.r.data(), w = st.w.data()](Index c) {
        p[c] = r[c] + bt * (p[c] - om * w[c]);
      });
      st.rho_prev = st.rho;
    }
  };

  {
    ScopedPhase total(tm, Phase::Total);
    body();
  }
  report.message_counters = comm.counters() - start;
  return report;
}

template <PreconditionerLike Precond>
SolverReport bicgstab_run(const StencilOperator& op, Precond& precond, Communicator& comm, const Field& b, Field& x,
                          const BicgsOptions& opt) {
  BicgsState st;
  return bicgstab_run(op, precond, comm, b, x, opt, st);
}

}  // namespace pbicgs
