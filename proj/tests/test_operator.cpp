#include <gtest/gtest.h>

#include <random>

#include "pbicgs/comm.hpp"
#include "pbicgs/operator.hpp"
#include "pbicgs/spectrum.hpp"
#include "support/oracle.hpp"

using namespace pbicgs;
namespace t = pbicgs::testing;

namespace {

constexpr BcKind D = BcKind::Dirichlet;
constexpr BcKind N = BcKind::Neumann;

// Fixed sample of face-kind assignments (x-, x+, y-, y+, z-, z+).
const std::vector<std::array<BcKind, 6>> kBcSamples{
    {D, D, D, D, D, D}, {N, N, N, N, N, N}, {D, N, N, D, N, D}, {N, D, D, N, D, N}, {N, D, N, D, N, D},
    {D, N, D, N, D, N}, {N, N, D, D, N, D}, {D, D, N, N, D, N}, {N, D, D, D, D, D}, {D, D, D, D, N, N},
};

const std::vector<Index> kExtents{1, 2, 3, 4, 6};

GridSpec anisotropic(const Index3& n, const std::array<BcKind, 6>& kinds) {
  GridSpec g = t::unit_grid(n, kinds);
  g.spacing = {0.5, 0.25, 2.0};
  return g;
}

/// Matrix-free product on one rank: scatter, ghost fill, stencil, gather.
Eigen::VectorXd matfree(const GridSpec& grid, const Eigen::VectorXd& v) {
  const Decomposition d = build_decomposition(grid, {1, 1, 1}, 0, 1);
  const StencilOperator op(grid, d);
  Field in = t::scatter(d, v);
  Field out = op.make_field();
  op.fill_ghost(in);
  op.apply(in, out);
  Eigen::VectorXd r(v.size());
  t::gather_into(d, out, r);
  return r;
}

std::vector<Index> rank_indices(const Decomposition& d) {
  std::vector<Index> idx;
  for_each(interior_box(d.local_interior),
           [&](Index i, Index j, Index k) { idx.push_back(t::linear_index(d.local_to_global({i, j, k}), d.global_extent)); });
  return idx;
}

}  // namespace

TEST(Operator, MatrixFreeEqualsDenseKroneckerOnAllSmallGrids) {
  std::mt19937_64 rng(11);
  int cases = 0;
  double worst = 0.0;
  for (Index nx : kExtents)
    for (Index ny : kExtents)
      for (Index nz : kExtents)
        for (const auto& kinds : kBcSamples) {
          const GridSpec g = anisotropic({nx, ny, nz}, kinds);
          const Eigen::MatrixXd p = assemble_dense(g);
          const Eigen::VectorXd v = t::random_vector(g.unknowns(), rng);
          const double err = t::rel_inf_error(matfree(g, v), p * v);
          worst = std::max(worst, err);
          ASSERT_LE(err, 1e-13) << nx << "x" << ny << "x" << nz;
          ++cases;
        }
  EXPECT_EQ(cases, 125 * 10);
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(Operator, ExampleDirichletLine) {
  const GridSpec g = t::unit_grid({3, 1, 1}, {D, D, N, N, N, N});
  Eigen::VectorXd v(3);
  v << 1, 2, 3;
  const Eigen::VectorXd out = matfree(g, v);
  EXPECT_EQ(out(0), 0.0);
  EXPECT_EQ(out(1), 0.0);
  EXPECT_EQ(out(2), 4.0);
}

TEST(Operator, SingleCellIsSixTimesValue) {
  const Eigen::VectorXd out = matfree(t::unit_grid({1, 1, 1}, t::all_kinds(D)), Eigen::VectorXd::Constant(1, 2.5));
  EXPECT_EQ(out(0), 15.0);
}

TEST(Operator, ConstantIsInTheAllNeumannNullSpace) {
  for (Index n : kExtents) {
    const GridSpec g = anisotropic({n, n + 1, 2}, t::all_kinds(N));
    const Eigen::VectorXd out = matfree(g, Eigen::VectorXd::Constant(g.unknowns(), 3.7));
    EXPECT_EQ(out.lpNorm<Eigen::Infinity>(), 0.0) << n;
  }
}

TEST(Operator, MismatchedLayoutIsALogicError) {
  const GridSpec g = t::unit_grid({4, 4, 4}, t::all_kinds(D));
  const StencilOperator op(g, build_decomposition(g, {1, 1, 1}, 0, 1));
  Field in({4, 4, 4});
  Field out({4, 4, 3});
  EXPECT_THROW(op.apply(in, out), std::logic_error);
}

TEST(FillGhost, NeumannMirrorsAndDirichletZeroes) {
  const GridSpec g = t::unit_grid({4, 1, 1}, {N, D, N, N, N, N});
  const StencilOperator op(g, build_decomposition(g, {1, 1, 1}, 0, 1));
  Field f = op.make_field(-1.0);
  f(0, 0, 0) = 5.0;
  f(1, 0, 0) = 8.0;
  op.fill_ghost(f);
  EXPECT_EQ(f(-1, 0, 0), 8.0);
  EXPECT_EQ(f(4, 0, 0), 0.0);
}

TEST(FillGhost, LocalBlockZeroesInterRankHalos) {
  const GridSpec g = t::unit_grid({4, 2, 2}, t::all_kinds(N));
  for (int r = 0; r < 2; ++r) {
    const Decomposition d = build_decomposition(g, {2, 1, 1}, r, 2);
    const StencilOperator op(g, d, InterfaceMode::LocalBlock);
    Field f = op.make_field(9.0);
    op.fill_ghost(f);
    const Face cut = r == 0 ? Face::XHigh : Face::XLow;
    for_each(halo_box(d.local_interior, cut), [&](Index i, Index j, Index k) { EXPECT_EQ(f(i, j, k), 0.0); });
  }
}

TEST(Operator, LocalBlockEqualsDenseDiagonalBlock) {
  std::mt19937_64 rng(5);
  const std::vector<Index3> layouts{{2, 1, 1}, {1, 2, 1}, {1, 1, 2}, {2, 2, 1}, {2, 2, 2}, {3, 1, 2}};
  for (const auto& kinds : kBcSamples)
    for (const auto& layout : layouts) {
      const GridSpec g = anisotropic({6, 4, 4}, kinds);
      const Eigen::MatrixXd p = assemble_dense(g);
      for (const Decomposition& d : t::all_decompositions(g, layout)) {
        const auto idx = rank_indices(d);
        const Index m = static_cast<Index>(idx.size());
        Eigen::MatrixXd block(m, m);
        for (Index a = 0; a < m; ++a)
          for (Index b = 0; b < m; ++b) block(a, b) = p(idx[a], idx[b]);
        const Eigen::VectorXd v = t::random_vector(m, rng);

        const StencilOperator op(g, d, InterfaceMode::LocalBlock);
        Field in = op.make_field(123.0);  // stale halos must not leak in
        Index c = 0;
        for_each(interior_box(d.local_interior), [&](Index i, Index j, Index k) { in(i, j, k) = v(c++); });
        Field out = op.make_field();
        op.fill_ghost(in);
        op.apply(in, out);
        Eigen::VectorXd got(m);
        c = 0;
        for_each(interior_box(d.local_interior), [&](Index i, Index j, Index k) { got(c++) = out(i, j, k); });
        ASSERT_LE(t::rel_inf_error(got, block * v), 1e-13);
      }
    }
}

TEST(Operator, ExchangeModeAcrossRanksEqualsGlobalDense) {
  std::mt19937_64 rng(8);
  for (const auto& kinds : kBcSamples) {
    const GridSpec g = anisotropic({4, 4, 6}, kinds);
    const Eigen::VectorXd v = t::random_vector(g.unknowns(), rng);
    const Index3 layout{2, 2, 3};
    const auto ds = t::all_decompositions(g, layout);
    std::vector<Field> outs(ds.size());
    run_ranks(static_cast<int>(ds.size()), [&](Communicator& comm) {
      const Decomposition& d = ds[static_cast<std::size_t>(comm.rank())];
      const StencilOperator op(g, d);
      Field in = t::scatter(d, v);
      comm.halo_exchange(d, in);
      op.fill_ghost(in);
      Field out = op.make_field();
      op.apply(in, out);
      outs[static_cast<std::size_t>(comm.rank())] = out;
    });
    ASSERT_LE(t::rel_inf_error(t::gather(ds, outs), assemble_dense(g) * v), 1e-13);
  }
}

TEST(Operator, SymmetricUnderDirichlet) {
  std::mt19937_64 rng(3);
  for (Index n : kExtents) {
    const GridSpec g = anisotropic({n, 6 / n + 1, 3}, t::all_kinds(D));
    const Eigen::VectorXd v = t::random_vector(g.unknowns(), rng);
    const Eigen::VectorXd w = t::random_vector(g.unknowns(), rng);
    const double avw = matfree(g, v).dot(w);
    const double vaw = v.dot(matfree(g, w));
    EXPECT_NEAR(avw, vaw, 1e-12 * std::abs(avw));
  }
}

TEST(Operator, FusedDotEqualsSeparateSweepBitExactly) {
  std::mt19937_64 rng(21);
  const GridSpec g = anisotropic({6, 4, 3}, {D, N, N, D, N, D});
  const Decomposition d = build_decomposition(g, {1, 1, 1}, 0, 1);
  const StencilOperator op(g, d);
  Field in = t::scatter(d, t::random_vector(g.unknowns(), rng));
  const Field other = t::scatter(d, t::random_vector(g.unknowns(), rng));
  op.fill_ghost(in);
  Field fused = op.make_field();
  Field plain = op.make_field();
  const double dot = op.apply_dot(in, fused, other);
  const auto dots = op.apply_dot2(in, fused, other);
  op.apply(in, plain);
  EXPECT_EQ(dot, local_dot(plain, other));
  EXPECT_EQ(dots[0], local_dot(plain, other));
  EXPECT_EQ(dots[1], local_dot(plain, plain));
  Field a = op.make_field();
  Field b = op.make_field();
  a(0, 0, 0) = 1.0;
  b(1, 0, 0) = 1.0;
  EXPECT_EQ(local_dot(a, b), 0.0);
}

TEST(FoldBoundary, HomogeneousDataLeavesRhsUnchanged) {
  const GridSpec g = anisotropic({3, 4, 2}, {D, N, N, D, N, D});
  const Decomposition d = build_decomposition(g, {1, 1, 1}, 0, 1);
  std::mt19937_64 rng(1);
  Field rhs = t::scatter(d, t::random_vector(g.unknowns(), rng));
  const Field before = rhs;
  fold_boundary_into_rhs(g, d, rhs);
  for_each(interior_box(d.local_interior), [&](Index i, Index j, Index k) { EXPECT_EQ(rhs(i, j, k), before(i, j, k)); });
}

TEST(FoldBoundary, DirichletValueOnALine) {
  GridSpec g = t::unit_grid({2, 1, 1}, {D, D, N, N, N, N});
  g.face(Face::XLow) = FaceBc::dirichlet(5.0);
  const Decomposition d = build_decomposition(g, {1, 1, 1}, 0, 1);
  Field rhs = d.make_field();
  fold_boundary_into_rhs(g, d, rhs);
  EXPECT_EQ(rhs(0, 0, 0), 5.0);
  EXPECT_EQ(rhs(1, 0, 0), 0.0);
  // [[2,-1],[-1,2]] x = (5, 0) with ghosts (5, 0): x = (10/3, 5/3).
  const Eigen::VectorXd oracle = t::augmented_solve(g, [](Index3) { return 0.0; });
  EXPECT_NEAR(oracle(0), 10.0 / 3.0, 1e-14);
  EXPECT_NEAR(oracle(1), 5.0 / 3.0, 1e-14);
}

TEST(FoldBoundary, NeumannFluxOnALine) {
  const double flux = 0.75;
  GridSpec g = t::unit_grid({2, 1, 1}, {N, D, N, N, N, N});
  g.face(Face::XLow) = FaceBc::neumann(flux);
  const Decomposition d = build_decomposition(g, {1, 1, 1}, 0, 1);
  Field rhs = d.make_field();
  fold_boundary_into_rhs(g, d, rhs);
  // Ghost u_{-1} = u_1 + 2 h g enters row 0 with coefficient -1.
  EXPECT_EQ(rhs(0, 0, 0), 2.0 * flux);
  EXPECT_EQ(rhs(1, 0, 0), 0.0);
  const Eigen::VectorXd x = assemble_dense(g).fullPivLu().solve(Eigen::Vector2d(rhs(0, 0, 0), rhs(1, 0, 0)));
  const Eigen::VectorXd oracle = t::augmented_solve(g, [](Index3) { return 0.0; });
  EXPECT_LE(t::rel_inf_error(x, oracle), 1e-14);
}

TEST(FoldBoundary, FoldedSystemSolvesTheInhomogeneousProblem) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const std::vector<Index3> grids{{3, 4, 2}, {2, 3, 5}, {4, 1, 3}, {1, 3, 3}, {5, 2, 1}};
  for (const auto& kinds : kBcSamples) {
    if (kinds == t::all_kinds(N)) continue;
    for (const auto& n : grids) {
      GridSpec g = anisotropic(n, kinds);
      g.origin = {1.0, -2.0, 0.5};
      for (Face f : kAllFaces) {
        const double c0 = u(rng), c1 = u(rng), c2 = u(rng);
        g.face(f).data = [=](double a, double b) { return c0 + c1 * a + c2 * std::sin(b); };
      }
      const auto source = [&](Index3 c) { return std::cos(0.3 * c[0] + 0.7 * c[1]) + 0.1 * c[2]; };
      const Decomposition d = build_decomposition(g, {1, 1, 1}, 0, 1);
      Field rhs = d.make_field();
      for_each(interior_box(n), [&](Index i, Index j, Index k) { rhs(i, j, k) = source({i, j, k}); });
      fold_boundary_into_rhs(g, d, rhs);
      Eigen::VectorXd b(g.unknowns());
      t::gather_into(d, rhs, b);
      const Eigen::VectorXd x = assemble_dense(g).fullPivLu().solve(b);
      ASSERT_LE(t::rel_inf_error(x, t::augmented_solve(g, source)), 1e-10) << n[0] << n[1] << n[2];
    }
  }
}

TEST(FoldBoundary, MultiRankFoldMatchesSingleRank) {
  GridSpec g = anisotropic({4, 4, 4}, {D, N, N, D, N, D});
  for (Face f : kAllFaces) g.face(f).data = [f](double a, double b) { return face_index(f) + a - 0.5 * b; };
  const Decomposition whole = build_decomposition(g, {1, 1, 1}, 0, 1);
  Field ref = whole.make_field(1.0);
  fold_boundary_into_rhs(g, whole, ref);
  Eigen::VectorXd want(g.unknowns());
  t::gather_into(whole, ref, want);
  const auto ds = t::all_decompositions(g, {2, 2, 2});
  std::vector<Field> parts;
  for (const auto& d : ds) {
    Field f = d.make_field(1.0);
    fold_boundary_into_rhs(g, d, f);
    parts.push_back(f);
  }
  EXPECT_EQ(t::gather(ds, parts), want);
}

TEST(AssembleDense, SmallExamples) {
  const Eigen::MatrixXd two = assemble_dense(t::unit_grid({2, 1, 1}, t::all_kinds(D)));
  EXPECT_EQ(two, (Eigen::Matrix2d() << 6, -1, -1, 6).finished());
  EXPECT_EQ(assemble_dense(t::unit_grid({1, 1, 1}, t::all_kinds(D))), Eigen::MatrixXd::Constant(1, 1, 6.0));
  const Eigen::MatrixXd o = factor_1d(3, N, D);
  EXPECT_EQ(o.row(0), Eigen::RowVector3d(2, -2, 0));
  EXPECT_EQ(o.row(2), Eigen::RowVector3d(0, -1, 2));
  EXPECT_EQ(factor_1d(3, D, N).row(2), Eigen::RowVector3d(0, -2, 2));
}

TEST(AssembleDense, StencilSparsityPattern) {
  for (const auto& kinds : kBcSamples) {
    const Eigen::MatrixXd p = assemble_dense(t::unit_grid({4, 3, 6}, kinds));
    for (Index r = 0; r < p.rows(); ++r) EXPECT_LE((p.row(r).array() != 0.0).count(), 7);
  }
}

TEST(AssembleDense, CapIsEnforced) {
  const GridSpec g = t::unit_grid({17, 16, 16}, t::all_kinds(D));
  EXPECT_THROW(assemble_dense(g), OracleSizeError);
  EXPECT_NO_THROW(assemble_dense(t::unit_grid({4, 4, 4}, t::all_kinds(D)), 64));
  EXPECT_THROW(assemble_dense(t::unit_grid({4, 4, 4}, t::all_kinds(D)), 63), OracleSizeError);
}

TEST(Eigen1d, Examples) {
  EXPECT_NEAR(eigen_1d(1, D, D)[0], 2.0, 1e-15);
  const auto two = eigen_1d(2, D, D);
  EXPECT_NEAR(two[0], 1.0, 1e-15);
  EXPECT_NEAR(two[1], 3.0, 1e-15);
  for (double mu : eigen_1d(8, N, D)) {
    EXPECT_GT(mu, 0.0);
    EXPECT_LE(mu, 4.0);
  }
  EXPECT_EQ(eigen_1d(5, N, N).front(), 0.0);
  EXPECT_EQ(eigen_1d(1, N, N), std::vector<double>{0.0});
  EXPECT_EQ(eigen_1d(1, N, D), std::vector<double>{2.0});
}

TEST(Eigen1d, AnalyticMatchesDenseSymmetricSolve) {
  for (Index n = 1; n <= 64; ++n) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(factor_1d(n, D, D), Eigen::EigenvaluesOnly);
    const auto mu = eigen_1d(n, D, D);
    for (Index i = 0; i < n; ++i) {
      EXPECT_NEAR(mu[static_cast<std::size_t>(i)], es.eigenvalues()(i), 1e-10 * es.eigenvalues()(i)) << n;
    }
  }
}

TEST(Eigen1d, NeumannFactorsLieInGerschgorinInterval) {
  for (Index n = 1; n <= 64; ++n) {
    for (auto [lo, hi] : {std::pair{N, D}, std::pair{D, N}}) {
      const auto mu = eigen_1d(n, lo, hi);
      EXPECT_TRUE(std::is_sorted(mu.begin(), mu.end()));
      EXPECT_GT(mu.front(), 0.0) << n;
      EXPECT_LE(mu.back(), 4.0) << n;
      // N is similar to a symmetric matrix: compare with its symmetrized form.
      Eigen::MatrixXd s = factor_1d(n, lo, hi);
      if (n > 1) {
        const Index a = lo == N ? 0 : n - 1;
        const Index b = lo == N ? 1 : n - 2;
        s(a, b) = s(b, a) = -std::sqrt(2.0);
      }
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
      for (Index i = 0; i < n; ++i) EXPECT_NEAR(mu[static_cast<std::size_t>(i)], es.eigenvalues()(i), 1e-10);
    }
    const auto nn = eigen_1d(n, N, N);
    EXPECT_EQ(nn.front(), 0.0);
    EXPECT_LE(nn.back(), 4.0 + 1e-12);
  }
}

TEST(EigenBounds, Examples) {
  const EigenBounds b = eigen_bounds(t::unit_grid({2, 2, 2}, t::all_kinds(D)));
  EXPECT_NEAR(b.lambda_min, 3.0, 1e-14);
  EXPECT_NEAR(b.lambda_max, 9.0, 1e-14);

  const auto kinds = std::array<BcKind, 6>{D, N, N, D, N, D};
  const EigenBounds coarse = eigen_bounds(t::unit_grid({5, 5, 5}, kinds, 0.2));
  const EigenBounds fine = eigen_bounds(t::unit_grid({5, 5, 5}, kinds, 0.1));
  EXPECT_NEAR(fine.lambda_min, 4.0 * coarse.lambda_min, 1e-12 * fine.lambda_min);
  EXPECT_NEAR(fine.lambda_max, 4.0 * coarse.lambda_max, 1e-12 * fine.lambda_max);

  EXPECT_LT(eigen_bounds(t::unit_grid({64, 64, 64}, t::all_kinds(D), 0.1)).lambda_max, 1200.0);
  EXPECT_THROW(eigen_bounds(t::unit_grid({3, 3, 3}, t::all_kinds(N))), SingularOperatorError);
}

TEST(EigenBounds, BracketAssembledSpectrum) {
  for (Index nx : {1, 2, 3, 6})
    for (Index ny : {1, 4})
      for (Index nz : {2, 3})
        for (const auto& kinds : kBcSamples) {
          if (kinds == t::all_kinds(N)) continue;
          const GridSpec g = anisotropic({nx, ny, nz}, kinds);
          const Eigen::EigenSolver<Eigen::MatrixXd> es(assemble_dense(g), false);
          const Eigen::VectorXd re = es.eigenvalues().real();
          ASSERT_LE(es.eigenvalues().imag().cwiseAbs().maxCoeff(), 1e-8 * re.cwiseAbs().maxCoeff());
          const EigenBounds b = eigen_bounds(g);
          EXPECT_NEAR(b.lambda_min, re.minCoeff(), 1e-10 * b.lambda_max);
          EXPECT_NEAR(b.lambda_max, re.maxCoeff(), 1e-10 * b.lambda_max);
        }
}

TEST(EigenBounds, LocalBlockUsesDirichletInterfaces) {
  const GridSpec g = anisotropic({6, 4, 4}, {N, D, N, N, D, N});
  const Eigen::MatrixXd p = assemble_dense(g);
  for (const Decomposition& d : t::all_decompositions(g, {3, 2, 1})) {
    const auto idx = rank_indices(d);
    const Index m = static_cast<Index>(idx.size());
    Eigen::MatrixXd block(m, m);
    for (Index a = 0; a < m; ++a)
      for (Index c = 0; c < m; ++c) block(a, c) = p(idx[a], idx[c]);
    const Eigen::VectorXd re = Eigen::EigenSolver<Eigen::MatrixXd>(block, false).eigenvalues().real();
    const EigenBounds b = eigen_bounds(g, d);
    EXPECT_NEAR(b.lambda_min, re.minCoeff(), 1e-10 * b.lambda_max);
    EXPECT_NEAR(b.lambda_max, re.maxCoeff(), 1e-10 * b.lambda_max);
  }
}
