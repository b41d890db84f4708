#pragma once

// Manufactured benchmark problem:
//   -lap(phi) = sin(x) + cos(y) + 3 sin(z) - 2yz + 2
// on [3, 28.5] x [2.5, 28] x [10, 35.5], Dirichlet on x-, y+, z+ and Neumann
// on x+, y-, z-.

#include <array>
#include <cmath>
#include <functional>

#include "pbicgs/comm.hpp"
#include "pbicgs/operator.hpp"

namespace pbicgs {

/// {x_lo, x_hi, y_lo, y_hi, z_lo, z_hi}
using DomainBounds = std::array<double, 6>;

inline constexpr DomainBounds kBenchmarkDomain{3.0, 28.5, 2.5, 28.0, 10.0, 35.5};

inline constexpr std::array<BcKind, 6> kBenchmarkBcKinds{BcKind::Dirichlet, BcKind::Neumann, BcKind::Neumann,
                                                     BcKind::Dirichlet, BcKind::Neumann, BcKind::Dirichlet};

inline double benchmark_source(double x, double y, double z) {
  return std::sin(x) + std::cos(y) + 3.0 * std::sin(z) - 2.0 * y * z + 2.0;
}

/// Nodes span each interval including both end points, so the spacing is
/// (hi - lo) / (n - 1); a single node gets spacing hi - lo.
inline GridSpec make_grid(const Index3& mesh, const DomainBounds& domain = kBenchmarkDomain,
                          const std::array<BcKind, 6>& kinds = kBenchmarkBcKinds,
                          const std::array<double, 6>& values = {}) {
  GridSpec g;
  g.extents = mesh;
  for (int a = 0; a < 3; ++a) {
    const double length = domain[2 * a + 1] - domain[2 * a];
    if (!(length > 0.0)) throw ConfigError(std::string("domain bounds must be increasing on axis ") + kAxisNames[a]);
    if (mesh[a] < 1) throw ConfigError(std::string("mesh extent must be >= 1 on axis ") + kAxisNames[a]);
    g.origin[a] = domain[2 * a];
    g.spacing[a] = mesh[a] > 1 ? length / static_cast<double>(mesh[a] - 1) : length;
  }
  for (Face f : kAllFaces) {
    const int i = face_index(f);
    g.faces[i] = kinds[i] == BcKind::Dirichlet ? FaceBc::dirichlet(values[i]) : FaceBc::neumann(values[i]);
  }
  g.validate();
  return g;
}

struct RightHandSide {
  Field values;
  /// Global 2-norm before normalization; multiply the solution by it.
  double scale = 1.0;
};

using SourceFn = std::function<double(double, double, double)>;

/// Samples the source at this rank's unknowns, folds boundary data in, and
/// normalizes to unit global 2-norm (one reduction).
inline RightHandSide build_rhs(const GridSpec& grid, const Decomposition& decomp, Communicator& comm,
                               const SourceFn& source = benchmark_source) {
  RightHandSide rhs{decomp.make_field(), 1.0};
  const Index3 off = decomp.global_offset();
  for_each(interior_box(decomp.local_interior), [&](Index i, Index j, Index k) {
    rhs.values(i, j, k) = source(grid.coordinate(0, off[0] + i), grid.coordinate(1, off[1] + j),
                                 grid.coordinate(2, off[2] + k));
  });
  fold_boundary_into_rhs(grid, decomp, rhs.values);
  std::array<double, 1> norm2{local_dot(rhs.values, rhs.values)};
  comm.allreduce_sum(norm2);
  rhs.scale = std::sqrt(norm2[0]);
  if (rhs.scale > 0.0) {
    for_each(interior_box(decomp.local_interior),
             [&](Index i, Index j, Index k) { rhs.values(i, j, k) /= rhs.scale; });
  }
  return rhs;
}

}  // namespace pbicgs
