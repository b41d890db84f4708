#pragma once

// Global grid geometry, boundary metadata, equal-size subdomain decomposition
// and the rank-local field container with a one-cell halo.

#include <algorithm>
#include <array>
#include <cassert>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pbicgs/errors.hpp"

namespace pbicgs {

using Index = std::ptrdiff_t;
using Index3 = std::array<Index, 3>;
using Real3 = std::array<double, 3>;

inline constexpr std::array<char, 3> kAxisNames{'x', 'y', 'z'};

enum class Face : int { XLow = 0, XHigh, YLow, YHigh, ZLow, ZHigh };

inline constexpr std::array<Face, 6> kAllFaces{Face::XLow, Face::XHigh, Face::YLow,
                                               Face::YHigh, Face::ZLow, Face::ZHigh};

constexpr int axis_of(Face f) { return static_cast<int>(f) / 2; }
constexpr bool is_high(Face f) { return static_cast<int>(f) % 2 == 1; }
constexpr int face_index(Face f) { return static_cast<int>(f); }
constexpr Face make_face(int axis, bool high) { return static_cast<Face>(2 * axis + (high ? 1 : 0)); }
constexpr Face opposite(Face f) { return make_face(axis_of(f), !is_high(f)); }

inline std::string_view face_name(Face f) {
  constexpr std::array<std::string_view, 6> names{"x-", "x+", "y-", "y+", "z-", "z+"};
  return names[face_index(f)];
}

/// The two axes spanning a face, in increasing order.
constexpr std::array<int, 2> in_face_axes(int axis) {
  return axis == 0 ? std::array<int, 2>{1, 2} : axis == 1 ? std::array<int, 2>{0, 2} : std::array<int, 2>{0, 1};
}

enum class BcKind { Dirichlet, Neumann };

inline std::string_view to_string(BcKind k) { return k == BcKind::Dirichlet ? "dirichlet" : "neumann"; }

/// Boundary condition on one face. `data` is the boundary value (Dirichlet) or
/// the outward normal derivative (Neumann) as a function of the two in-face
/// coordinates; an empty function means homogeneous data.
struct FaceBc {
  BcKind kind = BcKind::Dirichlet;
  std::function<double(double, double)> data;

  double value(double u, double v) const { return data ? data(u, v) : 0.0; }
  bool homogeneous() const { return !data; }

  static FaceBc dirichlet(double c = 0.0) { return {BcKind::Dirichlet, constant(c)}; }
  static FaceBc neumann(double c = 0.0) { return {BcKind::Neumann, constant(c)}; }

 private:
  static std::function<double(double, double)> constant(double c) {
    if (c == 0.0) return {};
    return [c](double, double) { return c; };
  }
};

struct GridSpec {
  Index3 extents{1, 1, 1};
  Real3 spacing{1.0, 1.0, 1.0};
  Real3 origin{0.0, 0.0, 0.0};
  std::array<FaceBc, 6> faces{};

  const FaceBc& face(Face f) const { return faces[face_index(f)]; }
  FaceBc& face(Face f) { return faces[face_index(f)]; }
  BcKind kind(Face f) const { return face(f).kind; }

  Index unknowns() const { return extents[0] * extents[1] * extents[2]; }

  /// Coordinate of global node `index` along `axis`.
  double coordinate(int axis, Index index) const {
    return origin[axis] + static_cast<double>(index) * spacing[axis];
  }

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (extents[a] < 1) {
        throw ConfigError(std::string("extent must be >= 1 on axis ") + kAxisNames[a]);
      }
      if (!(spacing[a] > 0.0)) {
        throw ConfigError(std::string("spacing must be positive on axis ") + kAxisNames[a]);
      }
    }
  }
};

/// Half-open index box [lo, hi) in local (halo-relative) coordinates.
struct Box {
  Index3 lo{0, 0, 0};
  Index3 hi{0, 0, 0};

  Index count() const {
    Index n = 1;
    for (int a = 0; a < 3; ++a) n *= (hi[a] > lo[a] ? hi[a] - lo[a] : 0);
    return n;
  }
};

/// Calls fn(i, j, k) over the box with x fastest.
template <class Fn>
void for_each(const Box& box, Fn&& fn) {
  for (Index k = box.lo[2]; k < box.hi[2]; ++k)
    for (Index j = box.lo[1]; j < box.hi[1]; ++j)
      for (Index i = box.lo[0]; i < box.hi[0]; ++i) fn(i, j, k);
}

inline Box interior_box(const Index3& n) { return {{0, 0, 0}, n}; }

/// Interior cells adjacent to face `f`.
inline Box border_box(const Index3& n, Face f) {
  Box b = interior_box(n);
  const int a = axis_of(f);
  b.lo[a] = is_high(f) ? n[a] - 1 : 0;
  b.hi[a] = b.lo[a] + 1;
  return b;
}

/// Ghost layer just outside face `f` (face plane only; no edges or corners).
inline Box halo_box(const Index3& n, Face f) {
  Box b = interior_box(n);
  const int a = axis_of(f);
  b.lo[a] = is_high(f) ? n[a] : -1;
  b.hi[a] = b.lo[a] + 1;
  return b;
}

/// Rank-local scalar field: interior plus one halo cell on every side, stored
/// in one contiguous buffer with x fastest. Valid indices run from -1 to n.
class Field {
 public:
  static constexpr Index kHalo = 1;

  Field() = default;
  explicit Field(const Index3& interior, double value = 0.0)
      : n_(interior),
        sy_(interior[0] + 2 * kHalo),
        sz_((interior[0] + 2 * kHalo) * (interior[1] + 2 * kHalo)),
        data_(static_cast<std::size_t>(sz_ * (interior[2] + 2 * kHalo)), value) {}

  const Index3& interior() const { return n_; }
  Index interior_count() const { return n_[0] * n_[1] * n_[2]; }
  Index stride_y() const { return sy_; }
  Index stride_z() const { return sz_; }

  Index offset(Index i, Index j, Index k) const {
    assert(i >= -kHalo && i <= n_[0] && j >= -kHalo && j <= n_[1] && k >= -kHalo && k <= n_[2]);
    return (i + kHalo) + (j + kHalo) * sy_ + (k + kHalo) * sz_;
  }

  double& operator()(Index i, Index j, Index k) { return data_[static_cast<std::size_t>(offset(i, j, k))]; }
  double operator()(Index i, Index j, Index k) const { return data_[static_cast<std::size_t>(offset(i, j, k))]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> raw() { return data_; }
  std::span<const double> raw() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_layout(const Field& other) const { return n_ == other.n_; }

  friend void swap(Field& a, Field& b) noexcept {
    using std::swap;
    swap(a.n_, b.n_);
    swap(a.sy_, b.sy_);
    swap(a.sz_, b.sz_);
    swap(a.data_, b.data_);
  }

 private:
  Index3 n_{0, 0, 0};
  Index sy_ = 0;
  Index sz_ = 0;
  std::vector<double> data_;
};

inline void pack(const Field& f, const Box& box, std::vector<double>& out) {
  out.clear();
  out.reserve(static_cast<std::size_t>(box.count()));
  for_each(box, [&](Index i, Index j, Index k) { out.push_back(f(i, j, k)); });
}

inline void unpack(Field& f, const Box& box, std::span<const double> in) {
  assert(static_cast<Index>(in.size()) == box.count());
  std::size_t n = 0;
  for_each(box, [&](Index i, Index j, Index k) { f(i, j, k) = in[n++]; });
}

/// Sets every cell of `box` to `value`.
inline void fill_box(Field& f, const Box& box, double value) {
  for_each(box, [&](Index i, Index j, Index k) { f(i, j, k) = value; });
}

/// Placement of one rank's subdomain inside the global grid.
struct Decomposition {
  static constexpr Index kHaloWidth = 1;

  Index3 global_extent{1, 1, 1};
  Index3 ranks_per_dim{1, 1, 1};
  Index3 rank_coords{0, 0, 0};
  Index3 local_interior{1, 1, 1};
  int rank = 0;
  int rank_count = 1;
  /// Neighbor rank per face; empty means the face is a physical boundary.
  std::array<std::optional<int>, 6> neighbors{};

  bool is_physical(Face f) const { return !neighbors[face_index(f)].has_value(); }
  std::optional<int> neighbor(Face f) const { return neighbors[face_index(f)]; }

  Index3 local_extent_with_halo() const {
    return {local_interior[0] + 2 * kHaloWidth, local_interior[1] + 2 * kHaloWidth,
            local_interior[2] + 2 * kHaloWidth};
  }

  Index3 global_offset() const {
    return {rank_coords[0] * local_interior[0], rank_coords[1] * local_interior[1],
            rank_coords[2] * local_interior[2]};
  }

  Index3 local_to_global(const Index3& local) const {
    Index3 g{};
    for (int a = 0; a < 3; ++a) {
      if (local[a] < 0 || local[a] >= local_interior[a]) {
        throw std::logic_error(std::string("local index out of interior range on axis ") + kAxisNames[a]);
      }
      g[a] = rank_coords[a] * local_interior[a] + local[a];
    }
    return g;
  }

  Field make_field(double value = 0.0) const { return Field(local_interior, value); }
};

/// Linear rank id from Cartesian rank coordinates (x fastest).
inline int rank_of(const Index3& coords, const Index3& ranks_per_dim) {
  return static_cast<int>(coords[0] + ranks_per_dim[0] * (coords[1] + ranks_per_dim[1] * coords[2]));
}

inline Index3 rank_coords_of(int rank, const Index3& ranks_per_dim) {
  const Index r = rank;
  return {r % ranks_per_dim[0], (r / ranks_per_dim[0]) % ranks_per_dim[1],
          r / (ranks_per_dim[0] * ranks_per_dim[1])};
}

/// Splits the global grid into equal subdomains and fills the neighbor table
/// for `my_rank`. Throws ConfigError for indivisible extents or a rank-count
/// mismatch.
inline Decomposition build_decomposition(const GridSpec& global, const Index3& ranks_per_dim, int my_rank,
                                         int rank_count) {
  global.validate();
  for (int a = 0; a < 3; ++a) {
    if (ranks_per_dim[a] < 1) {
      throw ConfigError(std::string("ranks per dimension must be >= 1 on axis ") + kAxisNames[a]);
    }
  }
  const Index product = ranks_per_dim[0] * ranks_per_dim[1] * ranks_per_dim[2];
  if (product != rank_count) {
    std::ostringstream os;
    os << "rank layout " << ranks_per_dim[0] << "x" << ranks_per_dim[1] << "x" << ranks_per_dim[2] << " has "
       << product << " ranks but the rank count is " << rank_count;
    throw ConfigError(os.str());
  }
  for (int a = 0; a < 3; ++a) {
    if (global.extents[a] % ranks_per_dim[a] != 0) {
      std::ostringstream os;
      os << "extent " << global.extents[a] << " not divisible by " << ranks_per_dim[a] << " on axis "
         << kAxisNames[a];
      throw ConfigError(os.str());
    }
  }
  if (my_rank < 0 || my_rank >= rank_count) {
    throw ConfigError("rank id " + std::to_string(my_rank) + " outside [0, " + std::to_string(rank_count) + ")");
  }

  Decomposition d;
  d.global_extent = global.extents;
  d.ranks_per_dim = ranks_per_dim;
  d.rank = my_rank;
  d.rank_count = rank_count;
  d.rank_coords = rank_coords_of(my_rank, ranks_per_dim);
  for (int a = 0; a < 3; ++a) d.local_interior[a] = global.extents[a] / ranks_per_dim[a];
  for (Face f : kAllFaces) {
    const int a = axis_of(f);
    Index3 c = d.rank_coords;
    c[a] += is_high(f) ? 1 : -1;
    if (c[a] >= 0 && c[a] < ranks_per_dim[a]) d.neighbors[face_index(f)] = rank_of(c, ranks_per_dim);
  }
  return d;
}

}  // namespace pbicgs
