#include <gtest/gtest.h>

#include <cmath>

#include "strata/maxwell.hpp"
#include "strata/oracle.hpp"
#include "support.hpp"

using namespace strata;
using namespace strata::testing;

namespace {

LebedevGrid random_lebedev(Index cx, Index cy, Index cz, Rng& rng) {
  return {random_grid(cx, rng, 0.6, 1.6), random_grid(cy, rng, 0.6, 1.6), random_grid(cz, rng, 0.6, 1.6)};
}

MaxwellMedium two_layer(const LebedevGrid& g, Rng& rng, double omega = 1.3) {
  const std::vector<double> iface{0.5 * g.gz().real_extent()};
  const std::vector<std::array<cplx, 3>> rho{{cplx(rng.uniform(0.5, 2.0)), cplx(rng.uniform(0.5, 2.0)), cplx(rng.uniform(0.5, 2.0))},
                                             {cplx(rng.uniform(0.5, 2.0)), cplx(rng.uniform(0.5, 2.0)), cplx(rng.uniform(0.5, 2.0))}};
  return MaxwellMedium::from_layers(g.gz(), iface, rho, 1.0, omega);
}

VectorField random_on(const LebedevGrid& g, Parity p, Rng& rng) {
  VectorField F(g.nodes());
  for (int a = 0; a < 3; ++a)
    for (auto& v : F[a].values()) v = rng.complex();
  restrict_to(F, g, p);
  return F;
}

Eigen::VectorXcd pack(const VectorField& F, const AssembledSystem& s) {
  Eigen::VectorXcd v(s.n);
  for (Index r = 0; r < s.n; ++r) {
    const auto& ix = s.index[r];
    v[r] = F[static_cast<int>(ix[3])](ix[0], ix[1], ix[2]);
  }
  return v;
}

bool deep(const Dims3& d, Index i, Index j, Index k, Index margin) {
  return i >= margin && j >= margin && k >= margin && i < d.nx - margin && j < d.ny - margin && k < d.nz - margin;
}

}  // namespace

TEST(Lebedev, Parity) {
  EXPECT_EQ(LebedevGrid::parity(2, 3, 5), Parity::P);
  EXPECT_EQ(LebedevGrid::parity(1, 1, 1), Parity::R);
  EXPECT_EQ(LebedevGrid::subgrid(2, 4), "pp");
  EXPECT_EQ(LebedevGrid::subgrid(1, 4), "dp");
  EXPECT_EQ(node_type(3), NodeType::dual);
}

TEST(Lebedev, RequiresEvenCellCounts) {
  const Grid1D g4 = Grid1D::uniform(4, 1.0);
  EXPECT_THROW(LebedevGrid(Grid1D::uniform(5, 1.0), g4, g4), GridError);
  EXPECT_THROW(LebedevGrid(g4, Grid1D::uniform(2, 1.0), g4), GridError);
  EXPECT_NO_THROW(LebedevGrid(g4, g4, Grid1D::uniform(6, 1.0)));
}

TEST(DiscreteCurl, ConstantField) {
  Rng rng(51);
  const LebedevGrid g = random_lebedev(6, 6, 6, rng);
  VectorField F(g.nodes());
  F[0].fill({1.0, 2.0});
  F[1].fill(-3.0);
  F[2].fill(0.5);
  EXPECT_LE(discrete_curl(F, g, Parity::P).max_abs(), 1e-14);
  EXPECT_LE(discrete_curl(F, g, Parity::R).max_abs(), 1e-14);
}

TEST(DiscreteCurl, ExactOnLinears) {
  Rng rng(52);
  const LebedevGrid g = random_lebedev(6, 8, 6, rng);
  const Dims3 d = g.nodes();
  VectorField H(d);
  for (Index i = 0; i < d.nx; ++i)
    for (Index j = 0; j < d.ny; ++j)
      for (Index k = 0; k < d.nz; ++k) H[2](i, j, k) = g.coords(0)[i];
  const VectorField C = discrete_curl(H, g, Parity::P);
  for (Index i = 1; i < d.nx - 1; ++i)
    for (Index j = 1; j < d.ny - 1; ++j)
      for (Index k = 1; k < d.nz - 1; ++k) {
        if (LebedevGrid::parity(i, j, k) != Parity::R) continue;
        EXPECT_LE(std::abs(C[0](i, j, k)), 1e-14);
        EXPECT_LE(std::abs(C[1](i, j, k) - cplx(-1.0)), 1e-13);
        EXPECT_LE(std::abs(C[2](i, j, k)), 1e-14);
      }
}

TEST(DiscreteCurl, CurlOfGradientVanishes) {
  Rng rng(53);
  const LebedevGrid g = random_lebedev(8, 8, 8, rng);
  const Dims3 d = g.nodes();
  const auto phi = [&](Index i, Index j, Index k) {
    const cplx x = g.coords(0)[i], y = g.coords(1)[j], z = g.coords(2)[k];
    return std::sin(0.7 * x) * std::cos(0.4 * y + 0.3 * z) + x * y * z;
  };
  VectorField G(d);  // gradient on P nodes from R values
  for (Index i = 1; i < d.nx - 1; ++i)
    for (Index j = 1; j < d.ny - 1; ++j)
      for (Index k = 1; k < d.nz - 1; ++k) {
        if (LebedevGrid::parity(i, j, k) != Parity::P) continue;
        G[0](i, j, k) = (phi(i + 1, j, k) - phi(i - 1, j, k)) / g.span(0, i);
        G[1](i, j, k) = (phi(i, j + 1, k) - phi(i, j - 1, k)) / g.span(1, j);
        G[2](i, j, k) = (phi(i, j, k + 1) - phi(i, j, k - 1)) / g.span(2, k);
      }
  const VectorField C = discrete_curl(G, g, Parity::P);
  double worst = 0.0;
  for (Index i = 2; i < d.nx - 2; ++i)
    for (Index j = 2; j < d.ny - 2; ++j)
      for (Index k = 2; k < d.nz - 2; ++k)
        for (int a = 0; a < 3; ++a) worst = std::max(worst, std::abs(C[a](i, j, k)));
  EXPECT_LE(worst, 1e-12 * G.max_abs());
}

TEST(ApplyCurlCurl, ZeroAndCurlFree) {
  Rng rng(54);
  const LebedevGrid g = random_lebedev(10, 10, 10, rng);
  const MaxwellMedium m = two_layer(g, rng);
  const Dims3 d = g.nodes();
  EXPECT_EQ(apply_curl_curl(VectorField(d), m, g).max_abs(), 0.0);

  VectorField H(d);  // gradient of a quadratic, curl-free away from the boundary
  const auto phi = [&](Index i, Index j, Index k) {
    const cplx x = g.coords(0)[i], y = g.coords(1)[j], z = g.coords(2)[k];
    return x * x - 2.0 * y * z + 0.5 * z;
  };
  for (Index i = 1; i < d.nx - 1; ++i)
    for (Index j = 1; j < d.ny - 1; ++j)
      for (Index k = 1; k < d.nz - 1; ++k) {
        if (LebedevGrid::parity(i, j, k) != Parity::P) continue;
        H[0](i, j, k) = (phi(i + 1, j, k) - phi(i - 1, j, k)) / g.span(0, i);
        H[1](i, j, k) = (phi(i, j + 1, k) - phi(i, j - 1, k)) / g.span(1, j);
        H[2](i, j, k) = (phi(i, j, k + 1) - phi(i, j, k - 1)) / g.span(2, k);
      }
  const VectorField A = apply_curl_curl(H, m, g);
  double worst = 0.0;
  for (Index i = 0; i < d.nx; ++i)
    for (Index j = 0; j < d.ny; ++j)
      for (Index k = 0; k < d.nz; ++k) {
        if (!deep(d, i, j, k, 3) || LebedevGrid::parity(i, j, k) != Parity::P) continue;
        for (int a = 0; a < 3; ++a) worst = std::max(worst, std::abs(A[a](i, j, k) + m.iwm() * H[a](i, j, k)));
      }
  EXPECT_LE(worst, 1e-12 * H.max_abs());
}

TEST(ApplyCurlCurl, MatchesAssembledMatrix) {
  Rng rng(55);
  for (int trial = 0; trial < 5; ++trial) {
    const LebedevGrid g = random_lebedev(8, 8, 8, rng);
    const MaxwellMedium m = two_layer(g, rng);
    const VectorField H = random_on(g, Parity::P, rng);
    const AssembledSystem s = assemble_maxwell(g, m);
    const Eigen::VectorXcd ref = s.matrix() * pack(H, s);
    const Eigen::VectorXcd got = pack(apply_curl_curl(H, m, g), s);
    ASSERT_LE((got - ref).cwiseAbs().maxCoeff(), 1e-12 * ref.cwiseAbs().maxCoeff());
  }
}

TEST(ApplyCurlCurl, SymmetricUnderVolumeWeights) {
  Rng rng(56);
  const LebedevGrid g = random_lebedev(6, 8, 6, rng);
  const MaxwellMedium m = two_layer(g, rng);
  const AssembledSystem s = assemble_maxwell(g, m);
  Eigen::MatrixXcd A = Eigen::MatrixXcd(s.matrix());
  for (Index r = 0; r < s.n; ++r) {
    const auto& ix = s.index[r];
    A.row(r) *= g.span(0, ix[0]) * g.span(1, ix[1]) * g.span(2, ix[2]);
  }
  EXPECT_LE((A - A.transpose()).cwiseAbs().maxCoeff(), 1e-13 * A.cwiseAbs().maxCoeff());
}

TEST(MaxwellRhs, Examples) {
  Rng rng(57);
  const LebedevGrid g = random_lebedev(8, 8, 8, rng);
  const Dims3 d = g.nodes();
  const MaxwellMedium unit = MaxwellMedium::uniform(g.gz(), 1.0, 1.0, 1.0, 1.0, 1.0);
  EXPECT_EQ(assemble_maxwell_rhs(VectorField(d), unit, g).max_abs(), 0.0);

  VectorField J(d);
  for (int a = 0; a < 3; ++a) J[a].fill(cplx(a + 1.0, -0.5));
  const VectorField f = assemble_maxwell_rhs(J, unit, g);
  double worst = 0.0;
  for (Index i = 2; i < d.nx - 2; ++i)
    for (Index j = 2; j < d.ny - 2; ++j)
      for (Index k = 2; k < d.nz - 2; ++k)
        for (int a = 0; a < 3; ++a) worst = std::max(worst, std::abs(f[a](i, j, k)));
  EXPECT_LE(worst, 1e-13);

  VectorField dip(d);
  dip[2](3, 4, 4) = 1.0;  // R node
  const VectorField fd = assemble_maxwell_rhs(dip, two_layer(g, rng), g);
  for (Index i = 0; i < d.nx; ++i)
    for (Index j = 0; j < d.ny; ++j)
      for (Index k = 0; k < d.nz; ++k) {
        const bool nb = (std::abs(i - 3) + std::abs(j - 4) + std::abs(k - 4)) == 1;
        if (nb) continue;
        for (int a = 0; a < 3; ++a) EXPECT_EQ(fd[a](i, j, k), cplx(0.0)) << i << " " << j << " " << k;
      }
  EXPECT_NE(fd[0](3, 5, 4), cplx(0.0));
  EXPECT_NE(fd[1](4, 4, 4), cplx(0.0));
  EXPECT_EQ(fd[2](3, 4, 5), cplx(0.0));
}

TEST(StaggeredBasis, Invariants) {
  Rng rng(58);
  for (int trial = 0; trial < 20; ++trial) {
    const Grid1D g = random_grid(2 * rng.integer(2, 10), rng);
    const StaggeredBasis b = staggered_basis(g);
    EXPECT_LE(b.primary.pencil_residual(b.pencil), kPencilResidualTol);
    EXPECT_LE(b.primary.biorthonormality_error(), kBiorthonormalityTol);
    EXPECT_LE(b.dual.biorthonormality_error(), kBiorthonormalityTol);
    EXPECT_EQ(b.lambda[0], cplx(0.0));
    // d/dx of the dual mode returns -lambda times the primary mode
    const auto x = g.coordinates();
    for (Index l = 1; l < b.n; ++l)
      for (Index a = 0; a < b.n - 1; ++a) {
        const cplx dd = (b.dual.W()(a + 1, l) - b.dual.W()(a, l)) / (x[2 * a + 3] - x[2 * a + 1]);
        ASSERT_LE(std::abs(dd + b.lambda[l] * b.primary.W()(a, l - 1)), 1e-11 * std::abs(b.lambda[l]) * b.primary.W().cwiseAbs().maxCoeff());
      }
  }
}

TEST(Transforms, MaxwellRoundTrip) {
  Rng rng(59);
  const LebedevGrid g = random_lebedev(8, 6, 6, rng);
  const MaxwellBases B = maxwell_bases(g);
  const VectorField H = random_on(g, Parity::P, rng);
  EXPECT_LE(max_abs_diff(maxwell_inverse(maxwell_forward(H, g, B), g, B), H), 1e-12);
}

TEST(HarmonicSystem, ZeroHarmonicIsDiagonal) {
  Rng rng(60);
  const LebedevGrid g = random_lebedev(6, 6, 6, rng);
  const MaxwellMedium m = two_layer(g, rng);
  const YeeFamily pd{NodeType::primary, NodeType::dual};
  std::vector<cplx> fz(detail::levels(flip(pd.t()), g.half(2)).size());
  for (std::size_t i = 0; i < fz.size(); ++i) fz[i] = cplx(1.0 + static_cast<double>(i), -1.0);
  const HarmonicSystem h = assemble_harmonic_system(pd, 0, 0, 0.0, 0.0, g, m, {}, {}, fz);
  EXPECT_FALSE(h.has_x);
  EXPECT_FALSE(h.has_y);
  ASSERT_TRUE(h.has_z);
  const auto U = solve_block_tridiagonal(h.sys);
  const auto Z = reconstruct_hz(h, U);
  for (std::size_t i = 0; i < Z.size(); ++i) EXPECT_LE(std::abs(Z[i] - fz[i] / (-m.iwm())), 1e-15);
}

TEST(HarmonicSystem, EquationsMatchProjectedOperator) {
  // Build H from one harmonic of one family, apply A_h and transform back:
  // the harmonic equations must hold exactly and no other harmonic appears.
  Rng rng(61);
  const LebedevGrid g = random_lebedev(8, 6, 8, rng);
  const MaxwellMedium m = two_layer(g, rng);
  const MaxwellBases B = maxwell_bases(g);
  for (int q = 0; q < 4; ++q) {
    const YeeFamily fam = kYeeFamilies[q];
    for (Index l = 0; l < B.x.n; ++l)
      for (Index mm = 0; mm < B.y.n; ++mm) {
        std::array<FamilyCoefficients, 4> C;
        for (int qq = 0; qq < 4; ++qq)
          for (int c = 0; c < 3; ++c) C[qq][c] = Field3D(detail::family_dims(kYeeFamilies[qq], c, g));
        bool any = false;
        for (int c = 0; c < 3; ++c) {
          const auto t = fam.types(c);
          const Index a = StaggeredBasis::mode(t[0], l), b = StaggeredBasis::mode(t[1], mm);
          if (a < 0 || b < 0) continue;
          any = true;
          for (Index k = 0; k < C[q][c].nz(); ++k) C[q][c](a, b, k) = rng.complex();
        }
        if (!any) continue;
        const VectorField H = maxwell_inverse(C, g, B);
        const auto F = maxwell_forward(apply_curl_curl(H, m, g), g, B);
        const auto line = [&](const std::array<FamilyCoefficients, 4>& X, int c) -> std::vector<cplx> {
          const auto t = fam.types(c);
          const Index a = StaggeredBasis::mode(t[0], l), b = StaggeredBasis::mode(t[1], mm);
          if (a < 0 || b < 0) return {};
          return {X[q][c].line(a, b), X[q][c].line(a, b) + X[q][c].nz()};
        };
        const auto fx = line(F, 0), fy = line(F, 1), fz = line(F, 2);
        const HarmonicSystem h = assemble_harmonic_system(fam, l, mm, B.x.lambda[l], B.y.lambda[mm], g, m, fx, fy, fz);
        const auto hx = line(C, 0), hy = line(C, 1), hz = line(C, 2);
        std::vector<Vec2> U(h.t_levels.size(), Vec2::Zero());
        for (std::size_t k = 0; k < U.size(); ++k) U[k] << (hx.empty() ? 0.0 : hx[k]), (hy.empty() ? 0.0 : hy[k]);
        std::vector<cplx> Z = hz.empty() ? std::vector<cplx>(h.tbar_levels.size(), 0.0) : hz;
        ASSERT_LE(harmonic_residual(h, U, Z), 1e-12) << fam.name() << " l=" << l << " m=" << mm;
        // the eliminated system reproduces the same coefficients
        const auto Us = solve_block_tridiagonal(h.sys);
        for (std::size_t k = 0; k < U.size(); ++k) ASSERT_LE((Us[k] - U[k]).cwiseAbs().maxCoeff(), 1e-10);
        const auto Zs = reconstruct_hz(h, Us);
        if (h.has_z) {
          for (std::size_t k = 0; k < Z.size(); ++k) ASSERT_LE(std::abs(Zs[k] - Z[k]), 1e-10);
        }
        // nothing leaks into other harmonics or families
        double leak = 0.0;
        for (int qq = 0; qq < 4; ++qq)
          for (int c = 0; c < 3; ++c) {
            const auto t = kYeeFamilies[qq].types(c);
            const Index a = StaggeredBasis::mode(t[0], l), b = StaggeredBasis::mode(t[1], mm);
            const Field3D& X = F[qq][c];
            for (Index i = 0; i < X.nx(); ++i)
              for (Index j = 0; j < X.ny(); ++j) {
                if (qq == q && i == a && j == b) continue;
                for (Index k = 0; k < X.nz(); ++k) leak = std::max(leak, std::abs(X(i, j, k)));
              }
          }
        ASSERT_LE(leak, 1e-11) << fam.name() << " l=" << l << " m=" << mm;
      }
  }
}

TEST(HarmonicSystem, ResonantPivotRaises) {
  Rng rng(62);
  const LebedevGrid g = random_lebedev(6, 6, 6, rng);
  const MaxwellBases B = maxwell_bases(g);
  const cplx lam = B.x.lambda[1], nu = B.y.lambda[1];
  // c1 = c2 = c chosen so that c (lambda^2 + nu^2) = i omega mu
  const double omega = 1.0;
  const cplx c = cplx{0.0, omega} / (lam * lam + nu * nu);
  const MaxwellMedium m = MaxwellMedium::uniform(g.gz(), c, c, 1.0, 1.0, omega);
  const YeeFamily dd{NodeType::dual, NodeType::dual};
  EXPECT_THROW(assemble_harmonic_system(dd, 1, 1, lam, nu, g, m, std::vector<cplx>(2, 0.0), std::vector<cplx>(2, 0.0),
                                        std::vector<cplx>(3, 1.0)),
               ResonanceError);
  VectorField f(g.nodes());
  f[2](3, 3, 2) = 1.0;
  EXPECT_THROW(solve_maxwell_layered(f, m, g), ResonanceError);
}

TEST(MaxwellLayered, ZeroSource) {
  Rng rng(63);
  const LebedevGrid g = random_lebedev(6, 6, 6, rng);
  EXPECT_EQ(solve_maxwell_layered(VectorField(g.nodes()), two_layer(g, rng), g).max_abs(), 0.0);
}

TEST(MaxwellLayered, RoundTrip) {
  Rng rng(64);
  const LebedevGrid g = random_lebedev(8, 10, 8, rng);
  const MaxwellMedium m = two_layer(g, rng);
  const VectorField H = random_on(g, Parity::P, rng);
  double reassembly = -1.0;
  MaxwellSolveOptions opt;
  opt.max_reassembly_residual = &reassembly;
  const VectorField got = solve_maxwell_layered(apply_curl_curl(H, m, g), m, g, opt);
  EXPECT_LE(relative_inf_error(got, H), 1e-8);
  EXPECT_GE(reassembly, 0.0);
  EXPECT_LE(reassembly, 1e-12);
}

TEST(MaxwellLayered, MatchesOracle) {
  Rng rng(65);
  const LebedevGrid g = random_lebedev(10, 10, 10, rng);
  const MaxwellMedium m = two_layer(g, rng);
  VectorField J(g.nodes());
  J[0](5, 4, 4) = 1.0;  // point dipole on an R node
  const VectorField f = assemble_maxwell_rhs(J, m, g);
  EXPECT_LE(relative_inf_error(solve_maxwell_layered(f, m, g), oracle_solve_maxwell(g, m, f)), 1e-8);
  const VectorField fr = random_on(g, Parity::P, rng);
  EXPECT_LE(relative_inf_error(solve_maxwell_layered(fr, m, g), oracle_solve_maxwell(g, m, fr)), 1e-8);
}

TEST(MaxwellCyclic, SingleBlockEqualsLayered) {
  Rng rng(66);
  const LebedevGrid g = random_lebedev(8, 8, 6, rng);
  const MaxwellMedium m = two_layer(g, rng);
  const auto pl = plan_maxwell(g, m, BlockPartition::single(g.nodes().nx), BlockPartition::single(g.nodes().ny));
  const VectorField f = random_on(g, Parity::P, rng);
  EXPECT_LE(max_abs_diff(solve_maxwell_cyclic(pl, f), solve_maxwell_layered(f, m, g)), 1e-14);
  EXPECT_EQ(solve_maxwell_cyclic(pl, VectorField(g.nodes())).max_abs(), 0.0);
}

TEST(MaxwellCyclic, MatchesLayeredOnTwoByTwoBlocks) {
  Rng rng(67);
  const LebedevGrid g = random_lebedev(12, 12, 8, rng);
  const MaxwellMedium m = two_layer(g, rng);
  const auto px = BlockPartition::from_interfaces(g.nodes().nx, {6});
  const auto pl = plan_maxwell(g, m, px, px);
  ASSERT_EQ(pl.blocks.size(), 4u);
  const VectorField f = random_on(g, Parity::P, rng);
  MaxwellCyclicReport rep;
  const VectorField H = solve_maxwell_cyclic(pl, f, &rep);
  EXPECT_LE(relative_inf_error(H, solve_maxwell_layered(f, m, g)), 1e-8);
  EXPECT_LE(rep.off_slab_residual, 1e-11 * rep.f_norm);
  EXPECT_GT(rep.slab_nodes, 0);
}

TEST(MaxwellCyclic, UnevenBlocksAndThreads) {
  Rng rng(68);
  const LebedevGrid g = random_lebedev(16, 12, 6, rng);
  const MaxwellMedium m = two_layer(g, rng);
  const auto px = BlockPartition::from_interfaces(g.nodes().nx, {4, 10});
  const auto py = BlockPartition::from_interfaces(g.nodes().ny, {8});
  const VectorField f = random_on(g, Parity::P, rng);
  const VectorField ref = solve_maxwell_layered(f, m, g);
  VectorField first;
  for (int threads : {1, 2, 8}) {
    const VectorField H = solve_maxwell_cyclic(plan_maxwell(g, m, px, py, threads), f, nullptr, threads);
    EXPECT_LE(relative_inf_error(H, ref), 1e-8);
    if (threads == 1)
      first = H;
    else
      EXPECT_LE(max_abs_diff(H, first), 1e-12 * first.max_abs());
  }
}

TEST(MaxwellCyclic, InterfaceAlignment) {
  const Grid1D g = Grid1D::uniform(20, 1.0);
  const LebedevGrid lg(g, g, Grid1D::uniform(4, 1.0));
  const MaxwellMedium m = MaxwellMedium::uniform(lg.gz(), 1.0, 1.0, 1.0, 1.0, 1.0);
  const auto odd = BlockPartition::from_interfaces(21, {5});
  EXPECT_THROW(plan_maxwell(lg, m, odd, odd), GridError);
  EXPECT_EQ(align_for_maxwell(odd).interfaces(), (std::vector<Index>{6}));
  EXPECT_EQ(align_for_maxwell(partition_sqrt(21)).interfaces(), (std::vector<Index>{6, 12}));
  EXPECT_TRUE(align_for_maxwell(BlockPartition::from_interfaces(21, {2})).interfaces().empty());
}
