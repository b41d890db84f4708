#pragma once

// Chebyshev iteration on a real spectral interval [alpha, beta], usable as a
// stand-alone solver or as a fixed, reduction-free preconditioner.

#include <cmath>
#include <sstream>
#include <utility>

#include "pbicgs/comm.hpp"
#include "pbicgs/operator.hpp"
#include "pbicgs/spectrum.hpp"

namespace pbicgs {

struct ChebyshevParams {
  double theta = 0.0;  // interval center
  double delta = 0.0;  // interval half width
  double sigma = 0.0;  // theta / delta, > 1
  int iter_max = 0;
};

inline ChebyshevParams chebyshev_params(double alpha, double beta, int iter_max) {
  if (!(alpha > 0.0) || !(alpha < beta)) {
    std::ostringstream os;
    os << "invalid Chebyshev interval [" << alpha << ", " << beta << "]: need 0 < alpha < beta";
    throw SpectralIntervalError(os.str());
  }
  if (iter_max < 0) throw ConfigError("Chebyshev iteration count must be >= 0");
  ChebyshevParams p;
  p.theta = (beta + alpha) / 2.0;
  p.delta = (beta - alpha) / 2.0;
  if (!(p.delta > 0.0)) throw SpectralIntervalError("degenerate Chebyshev interval (delta = 0)");
  p.sigma = p.theta / p.delta;
  p.iter_max = iter_max;
  return p;
}

/// Moves the eigenvalue bounds inwards: alpha = c_min * lambda_min,
/// beta = c_max * lambda_max.
inline std::pair<double, double> rescale_bounds(const EigenBounds& b, double c_min, double c_max) {
  if (!(c_min >= 1.0) || !(c_max <= 1.0) || !(c_max > 0.0)) {
    std::ostringstream os;
    os << "rescale factors must satisfy c_min >= 1 and 0 < c_max <= 1 (got " << c_min << ", " << c_max << ")";
    throw SpectralIntervalError(os.str());
  }
  const double alpha = c_min * b.lambda_min;
  const double beta = c_max * b.lambda_max;
  if (!(alpha < beta)) {
    std::ostringstream os;
    os << "rescaled interval is crossed: " << alpha << " >= " << beta;
    throw SpectralIntervalError(os.str());
  }
  return {alpha, beta};
}

enum class CommMode { Exchange, NoExchange };

/// Working vectors of one run. z holds the previous iterate and y the latest;
/// w is scratch. They rotate by handle swaps only.
struct ChebyshevState {
  double rho_old = 0.0;
  double rho_cur = 0.0;
  Field b;
  Field z;
  Field y;
  Field w;

  void ensure(const Index3& n) {
    if (b.interior() != n) {
      b = Field(n);
      z = Field(n);
      y = Field(n);
      w = Field(n);
    }
  }
};

/// x = Chebyshev approximation of A^{-1} b after params.iter_max steps.
/// Exchange mode refreshes halos before every ghost fill; NoExchange never
/// touches `comm` and relies on the operator's interface mode for the halos.
inline void chebyshev_run(const StencilOperator& op, Communicator& comm, const ChebyshevParams& params,
                          const Field& b_in, Field& x, CommMode mode, ChebyshevState& st) {
  op.check_layout(b_in);
  st.ensure(b_in.interior());
  const double sigma = params.sigma;
  const double theta = params.theta;
  const double delta = params.delta;
  const Decomposition& decomp = op.decomposition();

  st.rho_old = 1.0 / sigma;
  st.rho_cur = 1.0 / (2.0 * sigma - st.rho_old);

  st.b = b_in;
  if (mode == CommMode::Exchange) comm.halo_exchange(decomp, st.b);
  op.fill_ghost(st.b);

  {
    const double* b = st.b.data();
    double* z = st.z.data();
    double* y = st.y.data();
    const double inv_theta = 1.0 / theta;
    const double coef = 2.0 * st.rho_cur / delta;
    op.sweep(st.b, st.y, [&](Index c, double ab) {
      z[c] = b[c] * inv_theta;
      y[c] = coef * (2.0 * b[c] - ab * inv_theta);
    });
  }
  if (params.iter_max == 0) {
    x = st.z;
    return;
  }

  for (int i = 2; i <= params.iter_max; ++i) {
    st.rho_old = st.rho_cur;
    st.rho_cur = 1.0 / (2.0 * sigma - st.rho_old);
    if (mode == CommMode::Exchange) comm.halo_exchange(decomp, st.y);
    op.fill_ghost(st.y);
    const double* b = st.b.data();
    const double* y = st.y.data();
    const double* z = st.z.data();
    double* w = st.w.data();
    const double rc = st.rho_cur;
    const double ro = st.rho_old;
    const double two_sigma = 2.0 * sigma;
    const double two_over_delta = 2.0 / delta;
    op.sweep(st.y, st.w, [&](Index c, double ay) {
      w[c] = rc * (two_sigma * y[c] + two_over_delta * (b[c] - ay) - ro * z[c]);
    });
    using std::swap;
    swap(st.z, st.y);
    swap(st.y, st.w);
  }
  x = st.y;
}

inline Field chebyshev_run(const StencilOperator& op, Communicator& comm, const ChebyshevParams& params,
                           const Field& b, CommMode mode) {
  ChebyshevState st;
  Field x = op.make_field();
  chebyshev_run(op, comm, params, b, x, mode, st);
  return x;
}

}  // namespace pbicgs
