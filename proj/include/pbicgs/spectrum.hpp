#pragma once

// Eigenvalue machinery for the Kronecker-structured Laplacian and the dense
// assembly used to cross-check the matrix-free operator.

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "pbicgs/grid.hpp"

namespace pbicgs {

inline constexpr Index kDefaultOracleCap = 4096;

struct EigenBounds {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

/// 1D factor O: tridiag(-1, 2, -1) with a Neumann side turning the adjacent
/// off-diagonal into -2 (the -alpha / -beta entries). A single Neumann-Neumann
/// node is [0]; a single node with any Dirichlet side is [2].
inline Eigen::MatrixXd factor_1d(Index n, BcKind low, BcKind high) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    m(i, i) = 2.0;
    if (i > 0) m(i, i - 1) = -1.0;
    if (i + 1 < n) m(i, i + 1) = -1.0;
  }
  if (n == 1) {
    if (low == BcKind::Neumann && high == BcKind::Neumann) m(0, 0) = 0.0;
    return m;
  }
  if (low == BcKind::Neumann) m(0, 1) = -2.0;
  if (high == BcKind::Neumann) m(n - 1, n - 2) = -2.0;
  return m;
}

namespace detail {

inline std::vector<double> eigen_1d_uncached(Index n, BcKind low, BcKind high) {
  std::vector<double> out(static_cast<std::size_t>(n));
  if (low == BcKind::Dirichlet && high == BcKind::Dirichlet) {
    for (Index i = 1; i <= n; ++i) {
      const double s = std::sin(static_cast<double>(i) * std::numbers::pi / (2.0 * static_cast<double>(n + 1)));
      out[static_cast<std::size_t>(i - 1)] = 4.0 * s * s;
    }
    return out;
  }
  const Eigen::EigenSolver<Eigen::MatrixXd> solver(factor_1d(n, low, high), false);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigen_1d: eigensolver failed");
  const auto& ev = solver.eigenvalues();
  for (Index i = 0; i < n; ++i) {
    const double re = ev(i).real();
    const double im = ev(i).imag();
    if (std::abs(im) > 1e-10 * std::max(std::abs(re), 1.0)) {
      std::ostringstream os;
      os << "eigen_1d: complex eigenvalue " << re << (im < 0 ? "" : "+") << im << "i for n=" << n;
      throw std::runtime_error(os.str());
    }
    out[static_cast<std::size_t>(i)] = re;
  }
  std::sort(out.begin(), out.end());
  // The constant vector spans the null space of the pure Neumann factor.
  if (low == BcKind::Neumann && high == BcKind::Neumann) out.front() = 0.0;
  return out;
}

}  // namespace detail

/// Sorted eigenvalues of the 1D factor. Dirichlet-Dirichlet uses the closed
/// form 4 sin^2(i pi / (2(n+1))); any Neumann side is solved numerically
/// (memoized, since every rank asks for the same factors).
inline std::vector<double> eigen_1d(Index n, BcKind low, BcKind high) {
  if (n < 1) throw ConfigError("eigen_1d requires n >= 1");
  if (low == BcKind::Dirichlet && high == BcKind::Dirichlet) return detail::eigen_1d_uncached(n, low, high);
  static std::mutex mutex;
  static std::map<std::tuple<Index, int, int>, std::vector<double>> cache;
  const auto key = std::tuple{n, static_cast<int>(low), static_cast<int>(high)};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  std::vector<double> values = detail::eigen_1d_uncached(n, low, high);
  std::lock_guard lock(mutex);
  return cache.emplace(key, std::move(values)).first->second;
}

namespace detail {

inline EigenBounds bounds_from_factors(const Index3& extents, const Real3& spacing,
                                       const std::array<BcKind, 6>& kinds) {
  EigenBounds b;
  for (int a = 0; a < 3; ++a) {
    const auto mu = eigen_1d(extents[a], kinds[2 * a], kinds[2 * a + 1]);
    const double inv_h2 = 1.0 / (spacing[a] * spacing[a]);
    b.lambda_min += mu.front() * inv_h2;
    b.lambda_max += mu.back() * inv_h2;
  }
  if (!(b.lambda_min > 0.0)) {
    throw SingularOperatorError("operator is singular (lambda_min <= 0): at least one face needs Dirichlet data");
  }
  return b;
}

}  // namespace detail

/// Extreme eigenvalues of the global operator from the 1D factor spectra.
inline EigenBounds eigen_bounds(const GridSpec& grid) {
  std::array<BcKind, 6> kinds{};
  for (Face f : kAllFaces) kinds[face_index(f)] = grid.kind(f);
  return detail::bounds_from_factors(grid.extents, grid.spacing, kinds);
}

/// Extreme eigenvalues of this rank's diagonal block: inter-rank cuts act as
/// Dirichlet interfaces, physical faces keep their kind.
inline EigenBounds eigen_bounds(const GridSpec& grid, const Decomposition& decomp) {
  std::array<BcKind, 6> kinds{};
  for (Face f : kAllFaces) kinds[face_index(f)] = decomp.is_physical(f) ? grid.kind(f) : BcKind::Dirichlet;
  return detail::bounds_from_factors(decomp.local_interior, grid.spacing, kinds);
}

/// Dense global matrix I_z (x) I_y (x) O_x/hx^2 + I_z (x) O_y/hy^2 (x) I_x +
/// O_z/hz^2 (x) I_y (x) I_x, unknowns ordered x fastest.
inline Eigen::MatrixXd assemble_dense(const GridSpec& grid, Index cap = kDefaultOracleCap) {
  grid.validate();
  if (grid.unknowns() > cap) {
    throw OracleSizeError("dense assembly of " + std::to_string(grid.unknowns()) + " unknowns exceeds the cap of " +
                          std::to_string(cap));
  }
  const auto& e = grid.extents;
  auto factor = [&](int a) {
    return Eigen::MatrixXd(factor_1d(e[a], grid.kind(make_face(a, false)), grid.kind(make_face(a, true))) /
                           (grid.spacing[a] * grid.spacing[a]));
  };
  const Eigen::MatrixXd ix = Eigen::MatrixXd::Identity(e[0], e[0]);
  const Eigen::MatrixXd iy = Eigen::MatrixXd::Identity(e[1], e[1]);
  const Eigen::MatrixXd iz = Eigen::MatrixXd::Identity(e[2], e[2]);
  Eigen::MatrixXd p = Eigen::kroneckerProduct(iz, Eigen::MatrixXd(Eigen::kroneckerProduct(iy, factor(0))));
  p += Eigen::kroneckerProduct(iz, Eigen::MatrixXd(Eigen::kroneckerProduct(factor(1), ix)));
  p += Eigen::kroneckerProduct(factor(2), Eigen::MatrixXd(Eigen::kroneckerProduct(iy, ix)));
  return p;
}

}  // namespace pbicgs
