#pragma once

// Brute-force reference: assemble the full sparse system in coordinate form
// straight from the stencil and factor it with a sparse LU.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <array>
#include <vector>

#include "strata/field.hpp"
#include "strata/grid1d.hpp"
#include "strata/helmholtz_ops.hpp"
#include "strata/maxwell.hpp"

namespace strata {

inline constexpr Index kOracleDefaultCap = 60000;

struct AssembledSystem {
  using Triplet = Eigen::Triplet<cplx, Index>;
  Index n = 0;
  std::vector<Triplet> entries;             // coordinate form, duplicates summed
  Eigen::VectorXcd rhs;
  std::vector<std::array<Index, 4>> index;  // row -> (i, j, k, component)

  Eigen::SparseMatrix<cplx> matrix() const {
    Eigen::SparseMatrix<cplx> A(n, n);
    A.setFromTriplets(entries.begin(), entries.end());
    return A;
  }
};

inline void check_oracle_cap(Index unknowns, Index cap) {
  if (unknowns > cap)
    throw OracleCapError("oracle: " + std::to_string(unknowns) + " unknowns exceed the cap of " + std::to_string(cap));
}

/// Scalar system A u = M f from the 7-point finite-volume stencil. f may be
/// empty (zero right-hand side).
inline AssembledSystem assemble_helmholtz(const Grid1D& gx, const Grid1D& gy, const Grid1D& gz,
                                          const LayeredMedium& medium, const Field3D* f = nullptr,
                                          Index cap = kOracleDefaultCap) {
  medium.validate(gz);
  const Index nx = gx.unknowns(), ny = gy.unknowns(), nz = gz.unknowns();
  if (nx < 1 || ny < 1 || nz < 1) throw GridError("oracle: empty grid");
  const Index n = nx * ny * nz;
  check_oracle_cap(n, cap);
  if (f != nullptr && !(f->dims() == Dims3{nx, ny, nz})) throw DimensionError("oracle: rhs dims mismatch");
  const ControlVolumes cx = control_volumes(gx), cy = control_volumes(gy), cz = control_volumes(gz);

  AssembledSystem s;
  s.n = n;
  s.rhs = Eigen::VectorXcd::Zero(n);
  s.index.resize(static_cast<std::size_t>(n));
  s.entries.reserve(static_cast<std::size_t>(7 * n));
  const auto row = [&](Index a, Index b, Index c) { return (a * ny + b) * nz + c; };
  for (Index a = 0; a < nx; ++a)
    for (Index b = 0; b < ny; ++b)
      for (Index c = 0; c < nz; ++c) {
        // grid nodes
        const Index i = a + 1, j = b + 1, k = c + 1;
        const cplx hx = cx[i], hy = cy[j], hz = cz[k];
        const cplx sk = medium.sigma_nodes[k];
        const cplx xl = sk * hy * hz / gx.step(i - 1), xr = sk * hy * hz / gx.step(i);
        const cplx yl = sk * hx * hz / gy.step(j - 1), yr = sk * hx * hz / gy.step(j);
        const cplx zl = hx * hy * medium.sigma_half[k - 1] / gz.step(k - 1);
        const cplx zr = hx * hy * medium.sigma_half[k] / gz.step(k);
        const Index r = row(a, b, c);
        s.index[r] = {a, b, c, 0};
        s.entries.emplace_back(r, r, -(xl + xr + yl + yr + zl + zr) + medium.lambda * hx * hy * hz);
        if (a > 0) s.entries.emplace_back(r, row(a - 1, b, c), xl);
        if (a + 1 < nx) s.entries.emplace_back(r, row(a + 1, b, c), xr);
        if (b > 0) s.entries.emplace_back(r, row(a, b - 1, c), yl);
        if (b + 1 < ny) s.entries.emplace_back(r, row(a, b + 1, c), yr);
        if (c > 0) s.entries.emplace_back(r, row(a, b, c - 1), zl);
        if (c + 1 < nz) s.entries.emplace_back(r, row(a, b, c + 1), zr);
        if (f != nullptr) s.rhs[r] = hx * hy * hz * (*f)(a, b, c);
      }
  return s;
}

/// Sparse LU solve with a residual check.
inline Eigen::VectorXcd solve_direct(const AssembledSystem& sys) {
  const Eigen::SparseMatrix<cplx> A = sys.matrix();
  Eigen::SparseLU<Eigen::SparseMatrix<cplx>, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success) throw Error("oracle: factorization failed (singular matrix)");
  Eigen::VectorXcd x = lu.solve(sys.rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw Error("oracle: solve failed");
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(A.rows());
  for (Index c = 0; c < A.outerSize(); ++c)
    for (Eigen::SparseMatrix<cplx>::InnerIterator it(A, c); it; ++it) rows[it.row()] += std::abs(it.value());
  const double a_norm = rows.size() > 0 ? rows.maxCoeff() : 0.0;
  const double res = (A * x - sys.rhs).cwiseAbs().maxCoeff();
  const double bound = 1e-11 * (a_norm * x.cwiseAbs().maxCoeff() + sys.rhs.cwiseAbs().maxCoeff());
  if (sys.n > 0 && res > bound) throw Error("oracle: residual check failed (matrix numerically singular)");
  return x;
}

inline Field3D oracle_solve_helmholtz(const Grid1D& gx, const Grid1D& gy, const Grid1D& gz,
                                      const LayeredMedium& medium, const Field3D& f, Index cap = kOracleDefaultCap) {
  const AssembledSystem sys = assemble_helmholtz(gx, gy, gz, medium, &f, cap);
  const Eigen::VectorXcd x = solve_direct(sys);
  Field3D u(f.dims());
  for (Index r = 0; r < sys.n; ++r) u.data()[r] = x[r];
  return u;
}

/// Curl-curl system on the three components of H at the interior P nodes,
/// assembled as C_PR diag(rho) C_RP - i omega mu I from the centered
/// differences. Index entries are (i, j, k, component) in grid nodes.
inline AssembledSystem assemble_maxwell(const LebedevGrid& g, const MaxwellMedium& med, const VectorField* f = nullptr,
                                        Index cap = kOracleDefaultCap) {
  med.validate(g.gz());
  const Dims3 d = g.nodes();
  std::vector<Index> prow(static_cast<std::size_t>(d.size()), -1), rrow(static_cast<std::size_t>(d.size()), -1);
  Index np = 0, nr = 0;
  const auto lin = [&](Index i, Index j, Index k) { return (i * d.ny + j) * d.nz + k; };
  for (Index i = 1; i < d.nx - 1; ++i)
    for (Index j = 1; j < d.ny - 1; ++j)
      for (Index k = 1; k < d.nz - 1; ++k) {
        if ((i + j + k) % 2 == 0)
          prow[lin(i, j, k)] = np++;
        else
          rrow[lin(i, j, k)] = nr++;
      }
  check_oracle_cap(3 * np, cap);
  if (f != nullptr && !(f->dims() == d)) throw DimensionError("oracle: rhs dims mismatch");

  using Sp = Eigen::SparseMatrix<cplx>;
  using T = Eigen::Triplet<cplx, Index>;
  const auto& x = g.coords(0);
  const auto& y = g.coords(1);
  const auto& z = g.coords(2);
  // curl from the nodes of one parity (rows) reading the other (cols)
  const auto curl = [&](const std::vector<Index>& rows, Index nrows, const std::vector<Index>& cols, Index ncols) {
    std::vector<T> t;
    for (Index i = 1; i < d.nx - 1; ++i)
      for (Index j = 1; j < d.ny - 1; ++j)
        for (Index k = 1; k < d.nz - 1; ++k) {
          const Index r = rows[lin(i, j, k)];
          if (r < 0) continue;
          const cplx hx = x[i + 1] - x[i - 1], hy = y[j + 1] - y[j - 1], hz = z[k + 1] - z[k - 1];
          const auto put = [&](Index comp_out, Index a, Index b, Index c, Index comp_in, cplx v) {
            const Index col = cols[lin(a, b, c)];
            if (col >= 0) t.emplace_back(3 * r + comp_out, 3 * col + comp_in, v);
          };
          // x: dy Fz - dz Fy
          put(0, i, j + 1, k, 2, 1.0 / hy);
          put(0, i, j - 1, k, 2, -1.0 / hy);
          put(0, i, j, k + 1, 1, -1.0 / hz);
          put(0, i, j, k - 1, 1, 1.0 / hz);
          // y: dz Fx - dx Fz
          put(1, i, j, k + 1, 0, 1.0 / hz);
          put(1, i, j, k - 1, 0, -1.0 / hz);
          put(1, i + 1, j, k, 2, -1.0 / hx);
          put(1, i - 1, j, k, 2, 1.0 / hx);
          // z: dx Fy - dy Fx
          put(2, i + 1, j, k, 1, 1.0 / hx);
          put(2, i - 1, j, k, 1, -1.0 / hx);
          put(2, i, j + 1, k, 0, -1.0 / hy);
          put(2, i, j - 1, k, 0, 1.0 / hy);
        }
    Sp C(3 * nrows, 3 * ncols);
    C.setFromTriplets(t.begin(), t.end());
    return C;
  };
  const Sp Crp = curl(rrow, nr, prow, np);
  const Sp Cpr = curl(prow, np, rrow, nr);
  Eigen::VectorXcd rho(3 * nr);
  for (Index i = 1; i < d.nx - 1; ++i)
    for (Index j = 1; j < d.ny - 1; ++j)
      for (Index k = 1; k < d.nz - 1; ++k) {
        const Index r = rrow[lin(i, j, k)];
        if (r < 0) continue;
        rho[3 * r] = med.c1[k];
        rho[3 * r + 1] = med.c2[k];
        rho[3 * r + 2] = med.c3[k];
      }
  Sp I(3 * np, 3 * np);
  I.setIdentity();
  const Sp A = Sp(Cpr * rho.asDiagonal() * Crp) - med.iwm() * I;

  AssembledSystem s;
  s.n = 3 * np;
  s.rhs = Eigen::VectorXcd::Zero(s.n);
  s.index.resize(static_cast<std::size_t>(s.n));
  for (Index c = 0; c < A.outerSize(); ++c)
    for (Sp::InnerIterator it(A, c); it; ++it) s.entries.emplace_back(it.row(), it.col(), it.value());
  for (Index i = 1; i < d.nx - 1; ++i)
    for (Index j = 1; j < d.ny - 1; ++j)
      for (Index k = 1; k < d.nz - 1; ++k) {
        const Index p = prow[lin(i, j, k)];
        if (p < 0) continue;
        for (Index a = 0; a < 3; ++a) {
          s.index[3 * p + a] = {i, j, k, a};
          if (f != nullptr) s.rhs[3 * p + a] = (*f)[static_cast<int>(a)](i, j, k);
        }
      }
  return s;
}

inline VectorField oracle_solve_maxwell(const LebedevGrid& g, const MaxwellMedium& med, const VectorField& f,
                                        Index cap = kOracleDefaultCap) {
  const AssembledSystem sys = assemble_maxwell(g, med, &f, cap);
  const Eigen::VectorXcd x = solve_direct(sys);
  VectorField H(g.nodes());
  for (Index r = 0; r < sys.n; ++r) {
    const auto& ix = sys.index[r];
    H[static_cast<int>(ix[3])](ix[0], ix[1], ix[2]) = x[r];
  }
  return H;
}

}  // namespace strata
