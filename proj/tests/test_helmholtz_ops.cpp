#include <gtest/gtest.h>

#include "strata/helmholtz_ops.hpp"
#include "strata/oracle.hpp"
#include "support.hpp"

using namespace strata;
using namespace strata::testing;

namespace {

LayeredMedium random_medium(const Grid1D& gz, Rng& rng, cplx lambda) {
  const double depth = gz.real_extent();
  const std::vector<double> iface{0.4 * depth};
  const std::vector<cplx> sigma{{rng.uniform(0.5, 2.0), rng.uniform(0.0, 0.5)}, rng.uniform(0.5, 3.0)};
  return LayeredMedium::from_layers(gz, iface, sigma, lambda);
}

Grid1D maybe_pml_grid(Index cells, Rng& rng) {
  std::vector<cplx> s;
  for (Index i = 0; i < cells; ++i) s.emplace_back(rng.uniform(0.5, 2.0), 0.0);
  if (rng.coin() && cells >= 3) {
    s.front() = cplx{rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)};
    s.back() = cplx{rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)};
  }
  return Grid1D::from_steps(s);
}

}  // namespace

TEST(Assemble1D, UniformStencil) {
  const Pencil1D p = assemble_1d(Grid1D::uniform(4, 1.0));
  EXPECT_EQ(p.A.diag, (std::vector<cplx>{-2.0, -2.0, -2.0}));
  EXPECT_EQ(p.A.sub, (std::vector<cplx>{1.0, 1.0}));
  EXPECT_EQ(p.A.sup, (std::vector<cplx>{1.0, 1.0}));
  EXPECT_EQ(p.M, (std::vector<cplx>{1.0, 1.0, 1.0}));
}

TEST(Assemble1D, SingleNodeFormula) {
  const Pencil1D p = assemble_1d(Grid1D::from_steps({1.0, 2.0}));
  ASSERT_EQ(p.size(), 1);
  EXPECT_EQ(p.A.diag[0], cplx(-1.5));
  EXPECT_EQ(p.M[0], cplx(1.5));
}

TEST(AssembleZ, SigmaWeightedEdges) {
  const Grid1D gz = Grid1D::uniform(2, 1.0);
  LayeredMedium m = LayeredMedium::uniform(gz, 1.0, 0.0);
  m.sigma_half = {2.0, 3.0};
  const ZOperator z = assemble_z(gz, control_volumes(gz), m);
  ASSERT_EQ(z.pencil.size(), 1);
  EXPECT_EQ(z.pencil.A.diag[0], cplx(-5.0));
}

TEST(Assemble1D, AnnihilatesLinears) {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const Grid1D g = random_grid(rng.integer(4, 30), rng);
    const Pencil1D p = assemble_1d(g);
    const auto x = g.coordinates();
    for (Index u = 1; u + 1 < p.size(); ++u) {
      const cplx v = p.A.sub[u - 1] * x[u] + p.A.diag[u] * x[u + 1] + p.A.sup[u] * x[u + 2];
      ASSERT_LE(std::abs(v), 1e-12 * std::abs(x.back()));
    }
  }
}

TEST(ApplyA, ZeroField) {
  Rng rng(22);
  const Grid1D g = random_grid(5, rng);
  const auto op = SeparableOperator::build(g, g, g, LayeredMedium::uniform(g, 1.0, -1.0));
  EXPECT_EQ(apply_A(op, Field3D(op.dims())).max_abs(), 0.0);
}

TEST(ApplyA, SingleNodeValue) {
  const Grid1D g = Grid1D::uniform(2, 1.0);
  const auto op = SeparableOperator::build(g, g, g, LayeredMedium::uniform(g, 1.0, 0.0));
  Field3D u(1, 1, 1);
  u(0, 0, 0) = 1.0;
  // 7-point stencil at the single node: three second differences of -2 each.
  EXPECT_EQ(apply_A(op, u)(0, 0, 0), cplx(-6.0));
  const AssembledSystem s = assemble_helmholtz(g, g, g, LayeredMedium::uniform(g, 1.0, 0.0));
  EXPECT_EQ(s.matrix().coeff(0, 0), cplx(-6.0));
}

TEST(ApplyA, MatchesKroneckerOracle) {
  Rng rng(23);
  const Grid1D gx = random_grid(5, rng), gy = random_grid(5, rng), gz = random_grid(5, rng);
  const auto op = SeparableOperator::build(gx, gy, gz, random_medium(gz, rng, {-0.3, 0.1}));
  const Field3D u = random_field(op.dims(), rng);
  const Eigen::VectorXcd ref = dense_operator(op) * to_vector(u);
  const Eigen::VectorXcd got = to_vector(apply_A(op, u));
  EXPECT_LE((got - ref).cwiseAbs().maxCoeff(), 1e-13 * ref.cwiseAbs().maxCoeff());
}

TEST(ApplyA, KroneckerPropertyOnRandomGrids) {
  Rng rng(24);
  for (int trial = 0; trial < 50; ++trial) {
    const Grid1D gx = maybe_pml_grid(rng.integer(2, 7), rng), gy = maybe_pml_grid(rng.integer(2, 7), rng);
    const Grid1D gz = random_grid(rng.integer(2, 7), rng);
    const auto op = SeparableOperator::build(gx, gy, gz, random_medium(gz, rng, rng.complex()));
    const Field3D u = random_field(op.dims(), rng);
    const Eigen::MatrixXcd A = dense_operator(op);
    const Eigen::VectorXcd ref = A * to_vector(u);
    const Eigen::VectorXcd got = to_vector(apply_A(op, u));
    ASSERT_LE((got - ref).cwiseAbs().maxCoeff(), 1e-12 * ref.cwiseAbs().maxCoeff()) << "trial " << trial;
    // complex symmetric
    ASSERT_LE((A - A.transpose()).cwiseAbs().maxCoeff(), 1e-14 * A.cwiseAbs().maxCoeff()) << "trial " << trial;
  }
}

TEST(ApplyA, MatchesStencilAssembly) {
  Rng rng(25);
  const Grid1D gx = maybe_pml_grid(6, rng), gy = random_grid(5, rng), gz = random_grid(6, rng);
  const LayeredMedium med = random_medium(gz, rng, -1.0);
  const auto op = SeparableOperator::build(gx, gy, gz, med);
  const Field3D u = random_field(op.dims(), rng);
  const Eigen::VectorXcd ref = assemble_helmholtz(gx, gy, gz, med).matrix() * to_vector(u);
  const Eigen::VectorXcd got = to_vector(apply_A(op, u));
  EXPECT_LE((got - ref).cwiseAbs().maxCoeff(), 1e-13 * ref.cwiseAbs().maxCoeff());
}

TEST(ApplyMass, Diagonal) {
  const Grid1D g = Grid1D::from_steps({1.0, 3.0, 1.0});
  const auto op = SeparableOperator::build(g, g, g, LayeredMedium::uniform(g, 1.0, 0.0));
  Field3D f(op.dims());
  f.fill(1.0);
  const Field3D m = apply_mass(op, f);
  EXPECT_EQ(m(0, 0, 0), cplx(8.0));
  EXPECT_EQ(m(0, 1, 1), cplx(2.0 * 2.0 * 2.0));
}

TEST(ApplyARestricted, Examples) {
  Rng rng(26);
  const Grid1D gx = random_grid(7, rng), gy = random_grid(6, rng), gz = random_grid(5, rng);
  const auto op = SeparableOperator::build(gx, gy, gz, random_medium(gz, rng, -1.0));
  const Dims3 d = op.dims();
  const Field3D u = random_field(d, rng);

  EXPECT_TRUE(apply_A_restricted(op, u, {}).empty());

  std::vector<Index3> plane;
  for (Index j = 0; j < d.ny; ++j)
    for (Index k = 0; k < d.nz; ++k) plane.push_back({3, j, k});
  const Field3D full = apply_A(op, u);
  const auto vals = apply_A_restricted(op, u, plane);
  for (std::size_t n = 0; n < plane.size(); ++n)
    EXPECT_LE(std::abs(vals[n] - full(plane[n].i, plane[n].j, plane[n].k)), 1e-13 * full.max_abs());

  const auto zeros = apply_A_restricted(op, Field3D(d), plane);
  for (const auto& v : zeros) EXPECT_EQ(v, cplx(0.0));
}

TEST(ApplyARestricted, MaskRequiresNeighbours) {
  Rng rng(27);
  const Grid1D g = random_grid(6, rng);
  const auto op = SeparableOperator::build(g, g, g, LayeredMedium::uniform(g, 1.0, -1.0));
  const Field3D u = random_field(op.dims(), rng);
  KnownMask mask(op.dims());
  const std::vector<Index3> t{{2, 2, 2}};
  EXPECT_THROW(apply_A_restricted(op, u, t, &mask), Error);
  const Index3 nb[7] = {{2, 2, 2}, {1, 2, 2}, {3, 2, 2}, {2, 1, 2}, {2, 3, 2}, {2, 2, 1}, {2, 2, 3}};
  for (const auto& n : nb) mask.set(n.i, n.j, n.k);
  EXPECT_NO_THROW(apply_A_restricted(op, u, t, &mask));
  const std::vector<Index3> bad{{9, 0, 0}};
  EXPECT_THROW(apply_A_restricted(op, u, bad), DimensionError);
}

TEST(LayeredMedium, Validation) {
  const Grid1D gz = Grid1D::uniform(4, 1.0);
  const std::vector<double> iface{2.0};
  const std::vector<cplx> sigma{1.0, 2.0};
  const LayeredMedium m = LayeredMedium::from_layers(gz, iface, sigma, 0.0);
  EXPECT_EQ(m.sigma_half, (std::vector<cplx>{1.0, 1.0, 2.0, 2.0}));
  EXPECT_EQ(m.sigma_nodes[2], cplx(2.0));
  LayeredMedium bad = m;
  bad.sigma_half[0] = -1.0;
  EXPECT_THROW(bad.validate(gz), GridError);
  bad = m;
  bad.sigma_nodes.pop_back();
  EXPECT_THROW(bad.validate(gz), DimensionError);
}
