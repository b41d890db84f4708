#pragma once

// Matrix-free discrete negative Laplacian on a rank-local subdomain.

#include <array>
#include <stdexcept>
#include <utility>

#include "pbicgs/grid.hpp"

namespace pbicgs {

/// How inter-rank halo cells are treated when ghosts are filled.
///  Exchange   - halos hold neighbor values delivered by a halo exchange.
///  LocalBlock - halos are zeroed, giving the diagonal block R_s A R_s^T.
enum class InterfaceMode { Exchange, LocalBlock };

class StencilOperator {
 public:
  StencilOperator(GridSpec grid, Decomposition decomposition, InterfaceMode mode = InterfaceMode::Exchange)
      : grid_(std::move(grid)), decomp_(std::move(decomposition)), mode_(mode) {
    grid_.validate();
    if (decomp_.global_extent != grid_.extents) {
      throw ConfigError("decomposition does not match the grid extents");
    }
    for (int a = 0; a < 3; ++a) inv_h2_[a] = 1.0 / (grid_.spacing[a] * grid_.spacing[a]);
  }

  const GridSpec& grid() const { return grid_; }
  const Decomposition& decomposition() const { return decomp_; }
  InterfaceMode mode() const { return mode_; }
  const Index3& local_interior() const { return decomp_.local_interior; }
  double inv_h2(int axis) const { return inv_h2_[axis]; }

  StencilOperator with_mode(InterfaceMode mode) const { return StencilOperator(grid_, decomp_, mode); }

  Field make_field(double value = 0.0) const { return Field(decomp_.local_interior, value); }

  /// Homogeneous ghost rule. Physical Dirichlet ghosts become 0, physical
  /// Neumann ghosts mirror the first interior neighbor across the face, and in
  /// LocalBlock mode inter-rank halos become 0.
  void fill_ghost(Field& f) const { fill_ghost_impl<false>(f); }

  /// Ghost rule carrying the boundary data: Dirichlet ghost = g, Neumann ghost
  /// = mirror + 2*h*g with g the outward normal derivative.
  void fill_ghost_inhomogeneous(Field& f) const { fill_ghost_impl<true>(f); }

  /// out = A in on the interior. Ghosts of `in` must already be filled.
  void apply(const Field& in, Field& out) const {
    sweep(in, out, [](Index, double) {});
  }

  /// out = A in, returning the local partial sum of dot_with . out.
  double apply_dot(const Field& in, Field& out, const Field& dot_with) const {
    check_layout(dot_with);
    const double* d = dot_with.data();
    double s = 0.0;
    sweep(in, out, [&](Index idx, double v) { s += d[idx] * v; });
    return s;
  }

  /// out = A in, returning the local partial sums {out . dot_with, out . out}.
  std::array<double, 2> apply_dot2(const Field& in, Field& out, const Field& dot_with) const {
    check_layout(dot_with);
    const double* d = dot_with.data();
    double s1 = 0.0;
    double s2 = 0.0;
    sweep(in, out, [&](Index idx, double v) {
      s1 += v * d[idx];
      s2 += v * v;
    });
    return {s1, s2};
  }

  /// Single interior sweep; fn(linear_index, value) sees every output value in
  /// the fixed z, y, x traversal order.
  template <class CellFn>
  void sweep(const Field& in, Field& out, CellFn&& fn) const {
    check_layout(in);
    check_layout(out);
    const Index3& n = decomp_.local_interior;
    const Index sy = in.stride_y();
    const Index sz = in.stride_z();
    const double cx = inv_h2_[0];
    const double cy = inv_h2_[1];
    const double cz = inv_h2_[2];
    const double* u = in.data();
    double* o = out.data();
    for (Index k = 0; k < n[2]; ++k) {
      for (Index j = 0; j < n[1]; ++j) {
        const Index base = in.offset(0, j, k);
        for (Index i = 0; i < n[0]; ++i) {
          const Index c = base + i;
          const double uc = u[c];
          const double v = cx * (2.0 * uc - u[c - 1] - u[c + 1]) + cy * (2.0 * uc - u[c - sy] - u[c + sy]) +
                           cz * (2.0 * uc - u[c - sz] - u[c + sz]);
          o[c] = v;
          fn(c, v);
        }
      }
    }
  }

  void check_layout(const Field& f) const {
    if (f.interior() != decomp_.local_interior) {
      throw std::logic_error("field layout does not match the operator's decomposition");
    }
  }

 private:
  template <bool Inhomogeneous>
  void fill_ghost_impl(Field& f) const {
    check_layout(f);
    const Index3& n = decomp_.local_interior;
    const Index3 offset = decomp_.global_offset();

    // Global coordinates of the two in-face axes at local (i, j, k).
    auto face_coords = [&](int axis, Index i, Index j, Index k) {
      const Index3 idx{i, j, k};
      const auto [a, b] = in_face_axes(axis);
      return std::pair{grid_.coordinate(a, offset[a] + idx[a]), grid_.coordinate(b, offset[b] + idx[b])};
    };

    if (mode_ == InterfaceMode::LocalBlock) {
      for (Face face : kAllFaces) {
        if (!decomp_.is_physical(face)) fill_box(f, halo_box(n, face), 0.0);
      }
    }

    for (Face face : kAllFaces) {
      if (!decomp_.is_physical(face) || grid_.kind(face) != BcKind::Dirichlet) continue;
      if constexpr (Inhomogeneous) {
        const int axis = axis_of(face);
        const FaceBc& bc = grid_.face(face);
        for_each(halo_box(n, face), [&](Index i, Index j, Index k) {
          const auto [u, v] = face_coords(axis, i, j, k);
          f(i, j, k) = bc.value(u, v);
        });
      } else {
        fill_box(f, halo_box(n, face), 0.0);
      }
    }

    // Neumann mirrors run last so that a one-cell axis reads the already-set
    // ghost on the opposite side.
    for (Face face : kAllFaces) {
      if (!decomp_.is_physical(face) || grid_.kind(face) != BcKind::Neumann) continue;
      const int axis = axis_of(face);
      const bool both_neumann =
          decomp_.is_physical(opposite(face)) && grid_.kind(opposite(face)) == BcKind::Neumann;
      Index source = is_high(face) ? n[axis] - 2 : 1;
      if (n[axis] == 1 && both_neumann) source = 0;
      const Index ghost = is_high(face) ? n[axis] : -1;
      [[maybe_unused]] const double two_h = 2.0 * grid_.spacing[axis];
      [[maybe_unused]] const FaceBc& bc = grid_.face(face);
      for_each(halo_box(n, face), [&](Index i, Index j, Index k) {
        Index3 src{i, j, k};
        src[axis] = source;
        double value = f(src[0], src[1], src[2]);
        if constexpr (Inhomogeneous) {
          const auto [u, v] = face_coords(axis, i, j, k);
          value += two_h * bc.value(u, v);
        }
        Index3 dst{i, j, k};
        dst[axis] = ghost;
        f(dst[0], dst[1], dst[2]) = value;
      });
    }
  }

  GridSpec grid_;
  Decomposition decomp_;
  InterfaceMode mode_;
  Real3 inv_h2_{};
};

/// Moves inhomogeneous boundary data to the right-hand side so that solving
/// with homogeneous ghosts yields the solution of the inhomogeneous problem:
/// rhs <- rhs - A_g(0), where A_g applies the stencil with data-carrying ghosts.
inline void fold_boundary_into_rhs(const GridSpec& grid, const Decomposition& decomp, Field& rhs) {
  const StencilOperator op(grid, decomp, InterfaceMode::LocalBlock);
  Field zero = op.make_field();
  op.fill_ghost_inhomogeneous(zero);
  Field boundary_part = op.make_field();
  op.apply(zero, boundary_part);
  for_each(interior_box(rhs.interior()),
           [&](Index i, Index j, Index k) { rhs(i, j, k) -= boundary_part(i, j, k); });
}

/// Local partial dot product over the interior in the fixed traversal order.
inline double local_dot(const Field& a, const Field& b) {
  double s = 0.0;
  const double* pa = a.data();
  const double* pb = b.data();
  const Index3& n = a.interior();
  for (Index k = 0; k < n[2]; ++k)
    for (Index j = 0; j < n[1]; ++j) {
      const Index base = a.offset(0, j, k);
      for (Index i = 0; i < n[0]; ++i) s += pa[base + i] * pb[base + i];
    }
  return s;
}

}  // namespace pbicgs
