#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "strata/spectral.hpp"
#include "support.hpp"

using namespace strata;
using namespace strata::testing;

namespace {

Pencil1D uniform_pencil(Index n, double h) { return assemble_1d(Grid1D::uniform(n + 1, h)); }

/// Random grid with complex-stretched ends.
Grid1D pml_grid(Index cells, Rng& rng) {
  std::vector<cplx> s;
  for (Index i = 0; i < cells; ++i) s.emplace_back(rng.uniform(0.5, 2.0), 0.0);
  const Index w = std::min<Index>(2, cells / 3);
  for (Index i = 0; i < w; ++i) {
    s[i] = cplx{rng.uniform(0.5, 2.0), rng.uniform(0.5, 3.0)};
    s[cells - 1 - i] = cplx{rng.uniform(0.5, 2.0), rng.uniform(0.5, 3.0)};
  }
  return Grid1D::from_steps(s);
}

/// Same eigenpairs without the DST.
SpectralBasis dense_copy(const SpectralBasis& b) { return SpectralBasis(b.eigenvalues(), b.W(), b.mass()); }

/// (W_x^T M_x (x) W_y^T M_y) applied per z level with plain matrix products.
Field3D dense_forward(const Field3D& f, const SpectralBasis& bx, const SpectralBasis& by) {
  const Dims3 d = f.dims();
  Field3D out(d);
  for (Index k = 0; k < d.nz; ++k) {
    Eigen::MatrixXcd F(d.nx, d.ny);
    for (Index i = 0; i < d.nx; ++i)
      for (Index j = 0; j < d.ny; ++j) F(i, j) = f(i, j, k);
    const Eigen::MatrixXcd C = bx.forward_matrix() * F * by.forward_matrix().transpose();
    for (Index i = 0; i < d.nx; ++i)
      for (Index j = 0; j < d.ny; ++j) out(i, j, k) = C(i, j);
  }
  return out;
}

}  // namespace

TEST(Eig1D, ThreeNodeLaplacian) {
  const double r2 = std::sqrt(2.0);
  const std::vector<double> want{-2.0 + r2, -2.0, -2.0 - r2};
  for (bool fast : {true, false}) {
    const SpectralBasis b = eig_1d(uniform_pencil(3, 1.0), fast);
    EXPECT_EQ(b.fast(), fast);
    for (Index l = 0; l < 3; ++l) EXPECT_NEAR(std::abs(b.eigenvalue(l) - want[l]), 0.0, 1e-14);
  }
}

TEST(Eig1D, OneByOne) {
  const SpectralBasis a = eig_1d(Pencil1D{{{}, {-2.0}, {}}, {1.0}});
  EXPECT_NEAR(std::abs(a.eigenvalue(0) - cplx(-2.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(a.W()(0, 0) - cplx(1.0)), 0.0, 1e-15);

  const SpectralBasis b = eig_1d(Pencil1D{{{}, {-3.0}, {}}, {2.0}});
  EXPECT_NEAR(std::abs(b.eigenvalue(0) - cplx(-1.5)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(b.W()(0, 0) - cplx(1.0 / std::sqrt(2.0))), 0.0, 1e-15);
}

TEST(Eig1D, SortedByDecreasingRealPart) {
  Rng rng(31);
  const SpectralBasis b = eig_1d(assemble_1d(pml_grid(20, rng)));
  for (Index l = 1; l < b.size(); ++l) EXPECT_GE(b.eigenvalue(l - 1).real(), b.eigenvalue(l).real());
}

TEST(Eig1D, InvariantsOnRandomAndComplexGrids) {
  Rng rng(32);
  for (int trial = 0; trial < 100; ++trial) {
    const Index cells = rng.integer(2, 40);
    const Grid1D g = trial % 2 == 0 ? random_grid(cells, rng, 0.2, 3.0) : pml_grid(std::max<Index>(cells, 3), rng);
    const Pencil1D p = assemble_1d(g);
    const SpectralBasis b = eig_1d(p);
    ASSERT_LE(b.pencil_residual(p), kPencilResidualTol) << "trial " << trial;
    ASSERT_LE(b.biorthonormality_error(), kBiorthonormalityTol) << "trial " << trial;
  }
}

TEST(Eig1D, SineBasisMatchesDenseEigenvalues) {
  for (Index n : {1, 2, 7, 16, 31}) {
    const Pencil1D p = uniform_pencil(n, 0.7);
    const SpectralBasis f = eig_1d(p, true), d = eig_1d(p, false);
    ASSERT_TRUE(f.fast());
    for (Index l = 0; l < n; ++l)
      EXPECT_LE(std::abs(f.eigenvalue(l) - d.eigenvalue(l)), 1e-12 * std::abs(d.eigenvalue(n - 1)));
    EXPECT_LE(f.pencil_residual(p), 1e-13);
    EXPECT_LE(f.biorthonormality_error(), 1e-13);
  }
}

TEST(Eig1D, Errors) {
  EXPECT_THROW(eig_1d(Pencil1D{{{}, {-2.0}, {}}, {0.0}}), SpectralError);
  // Jordan block
  EXPECT_THROW(eig_1d(Pencil1D{{{0.0}, {0.0, 0.0}, {1.0}}, {1.0, 1.0}}), SpectralError);
  EXPECT_THROW(eig_1d(Pencil1D{}), DimensionError);
}

TEST(Transforms, ZeroField) {
  const SpectralBasis b = eig_1d(uniform_pencil(5, 1.0));
  EXPECT_EQ(forward_2d(Field3D(5, 5, 3), b, b).max_abs(), 0.0);
  EXPECT_EQ(inverse_2d(Field3D(5, 5, 3), b, b).max_abs(), 0.0);
}

TEST(Transforms, EigenvectorProductIsUnitCoefficient) {
  Rng rng(33);
  const SpectralBasis bx = eig_1d(assemble_1d(pml_grid(9, rng)));
  const SpectralBasis by = eig_1d(assemble_1d(random_grid(7, rng)));
  const Index l = 3, m = 2, k = 1;
  Field3D f(bx.size(), by.size(), 3);
  for (Index i = 0; i < bx.size(); ++i)
    for (Index j = 0; j < by.size(); ++j) f(i, j, k) = bx.W()(i, l) * by.W()(j, m);
  Field3D want(f.dims());
  want(l, m, k) = 1.0;
  EXPECT_LE(max_abs_diff(forward_2d(f, bx, by), want), 1e-11);
  EXPECT_LE(max_abs_diff(inverse_2d(want, bx, by), f), 1e-14);
}

TEST(Transforms, FastEqualsDenseOnRandomFields) {
  Rng rng(34);
  for (int trial = 0; trial < 100; ++trial) {
    const Index nx = rng.integer(1, 20), ny = rng.integer(1, 20), nz = rng.integer(1, 4);
    const double hx = rng.uniform(0.5, 2.0), hy = rng.uniform(0.5, 2.0);
    const SpectralBasis fx = eig_1d(uniform_pencil(nx, hx)), fy = eig_1d(uniform_pencil(ny, hy));
    ASSERT_TRUE(fx.fast() && fy.fast());
    const SpectralBasis dx = dense_copy(fx), dy = dense_copy(fy);
    const Field3D f = random_field({nx, ny, nz}, rng);
    const Field3D cf = forward_2d(f, fx, fy), cd = forward_2d(f, dx, dy);
    ASSERT_LE(max_abs_diff(cf, cd), 1e-12 * std::max(1.0, cd.max_abs())) << "trial " << trial;
    const Field3D uf = inverse_2d(cd, fx, fy), ud = inverse_2d(cd, dx, dy);
    ASSERT_LE(max_abs_diff(uf, ud), 1e-12 * std::max(1.0, ud.max_abs())) << "trial " << trial;
  }
}

TEST(Transforms, MatchesDenseMatrixProducts) {
  Rng rng(35);
  const SpectralBasis bx = eig_1d(assemble_1d(pml_grid(10, rng)));
  const SpectralBasis by = eig_1d(uniform_pencil(8, 1.3));
  const Field3D f = random_field({bx.size(), by.size(), 4}, rng);
  const Field3D ref = dense_forward(f, bx, by);
  EXPECT_LE(max_abs_diff(forward_2d(f, bx, by), ref), 1e-12 * ref.max_abs());
}

TEST(Transforms, RoundTripProperty) {
  Rng rng(36);
  for (int trial = 0; trial < 50; ++trial) {
    const SpectralBasis bx = eig_1d(assemble_1d(pml_grid(rng.integer(3, 15), rng)));
    const SpectralBasis by = eig_1d(assemble_1d(random_grid(rng.integer(2, 15), rng)));
    const Field3D f = random_field({bx.size(), by.size(), 2}, rng);
    ASSERT_LE(max_abs_diff(inverse_2d(forward_2d(f, bx, by), bx, by), f), 1e-11) << "trial " << trial;
    ASSERT_LE(max_abs_diff(forward_2d(inverse_2d(f, bx, by), bx, by), f), 1e-11) << "trial " << trial;
  }
}

TEST(Transforms, MassWeightedParseval) {
  // sum f^T M g is preserved for real symmetric pencils: c_f . c_g = f^T M g.
  Rng rng(37);
  const SpectralBasis b = eig_1d(assemble_1d(random_grid(12, rng)));
  const Field3D f = random_field({b.size(), 1, 1}, rng), g = random_field({b.size(), 1, 1}, rng);
  const SpectralBasis unit = eig_1d(Pencil1D{{{}, {-2.0}, {}}, {1.0}});
  const Field3D cf = forward_2d(f, b, unit), cg = forward_2d(g, b, unit);
  cplx lhs{0.0, 0.0}, rhs{0.0, 0.0};
  for (Index i = 0; i < b.size(); ++i) {
    lhs += cf(i, 0, 0) * cg(i, 0, 0);
    rhs += f(i, 0, 0) * b.mass()[i] * g(i, 0, 0);
  }
  EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::abs(rhs) + 1e-12);
}

TEST(SparseTransforms, EmptySupport) {
  const SpectralBasis b = eig_1d(uniform_pencil(6, 1.0));
  EXPECT_EQ(forward_2d_sparse(Field3D(6, 6, 2), {}, b, b).max_abs(), 0.0);
  EXPECT_EQ(inverse_2d_on_planes(Field3D(6, 6, 2), {}, b, b).max_abs(), 0.0);
}

TEST(SparseTransforms, OneHot) {
  Rng rng(38);
  const SpectralBasis bx = eig_1d(assemble_1d(random_grid(8, rng)));
  const SpectralBasis by = eig_1d(assemble_1d(pml_grid(9, rng)));
  Field3D f(bx.size(), by.size(), 2);
  const Index i0 = 3, j0 = 5, k0 = 1;
  const cplx v{0.7, -1.1};
  f(i0, j0, k0) = v;
  PlaneSet planes;
  planes.x = {i0};
  const Field3D c = forward_2d_sparse(f, planes, bx, by);
  double err = 0.0;
  for (Index l = 0; l < bx.size(); ++l)
    for (Index m = 0; m < by.size(); ++m) {
      const cplx want = bx.W()(i0, l) * bx.mass()[i0] * by.W()(j0, m) * by.mass()[j0] * v;
      err = std::max(err, std::abs(c(l, m, k0) - want));
      err = std::max(err, std::abs(c(l, m, 0)));
    }
  EXPECT_LE(err, 1e-13);
}

TEST(SparseTransforms, MatchDenseOnInterfaceData) {
  Rng rng(39);
  for (int trial = 0; trial < 20; ++trial) {
    const SpectralBasis bx = eig_1d(assemble_1d(pml_grid(rng.integer(6, 16), rng)));
    const SpectralBasis by = trial % 2 ? eig_1d(uniform_pencil(rng.integer(5, 15), 1.0))
                                       : eig_1d(assemble_1d(random_grid(rng.integer(6, 16), rng)));
    const Dims3 d{bx.size(), by.size(), 3};
    PlaneSet planes;
    planes.x = {1, d.nx - 3};
    planes.y = {2};
    Field3D f(d);
    for (Index i = 0; i < d.nx; ++i)
      for (Index j = 0; j < d.ny; ++j)
        if (planes.contains(i, j))
          for (Index k = 0; k < d.nz; ++k) f(i, j, k) = rng.complex();
    const Field3D ref = forward_2d(f, bx, by);
    ASSERT_LE(max_abs_diff(forward_2d_sparse(f, planes, bx, by), ref), 1e-12 * ref.max_abs()) << "trial " << trial;

    const Field3D c = random_field(d, rng);
    const Field3D full = inverse_2d(c, bx, by);
    const Field3D part = inverse_2d_on_planes(c, planes, bx, by);
    double err = 0.0;
    for (Index i = 0; i < d.nx; ++i)
      for (Index j = 0; j < d.ny; ++j)
        for (Index k = 0; k < d.nz; ++k) {
          const cplx want = planes.contains(i, j) ? full(i, j, k) : cplx{0.0, 0.0};
          err = std::max(err, std::abs(part(i, j, k) - want));
        }
    ASSERT_LE(err, 1e-12 * full.max_abs()) << "trial " << trial;
  }
}

TEST(SparseTransforms, AllPlanesEqualsInverse) {
  Rng rng(40);
  const SpectralBasis bx = eig_1d(assemble_1d(random_grid(6, rng))), by = eig_1d(uniform_pencil(4, 1.0));
  const Field3D c = random_field({bx.size(), by.size(), 2}, rng);
  PlaneSet all;
  for (Index i = 0; i < bx.size(); ++i) all.x.push_back(i);
  EXPECT_LE(max_abs_diff(inverse_2d_on_planes(c, all, bx, by), inverse_2d(c, bx, by)), 1e-13);
}

TEST(SparseTransforms, RejectsOffSupportData) {
  const SpectralBasis b = eig_1d(uniform_pencil(5, 1.0));
  Field3D f(5, 5, 1);
  f(2, 2, 0) = 1.0;
  PlaneSet planes;
  planes.x = {0};
  EXPECT_THROW(forward_2d_sparse(f, planes, b, b), Error);
}
