#pragma once

// Two-level cyclic reduction for the layered Helmholtz operator.
//
// The horizontal grid is split into blocks S^{ij} = S^i_x x S^j_y x S_z
// separated by single interface planes. A solve runs seven steps:
//   1. per-block forward transform of f,
//   2. per-block harmonic z-line solves with homogeneous Dirichlet data (v),
//   3. inverse transform of v on the block rows next to an interface,
//   4. residual r = f - M^{-1} A v on the interface planes,
//   5. global transform of r, global harmonic solves, inverse transform on
//      the interface planes (w there),
//   6. per-block homogeneous solves with the Dirichlet data w lifted into the
//      right-hand side,
//   7. per-block inverse transform of v~ + w~ and assembly, u = w on interfaces.

#include <algorithm>
#include <array>
#include <chrono>
#include <string>
#include <vector>

#include "strata/field.hpp"
#include "strata/grid1d.hpp"
#include "strata/helmholtz_ops.hpp"
#include "strata/spectral.hpp"
#include "strata/zline.hpp"

namespace strata {

struct PlanOptions {
  bool allow_fast = true;  // use sine/DST bases on uniform blocks
  int threads = 1;
};

struct BlockInfo {
  Index bx = 0;  // x-block index
  Index by = 0;  // y-block index
  NodeRange ux;  // unknown ranges
  NodeRange uy;
  bool left = false, right = false, front = false, back = false;  // interface neighbours (x-, x+, y-, y+)
  bool empty() const { return ux.empty() || uy.empty(); }
  Dims3 dims(Index nz) const { return {ux.empty() ? 0 : ux.size(), uy.empty() ? 0 : uy.size(), nz}; }
};

struct SolverPlan {
  Grid1D gx, gy, gz;
  BlockPartition px, py;
  LayeredMedium medium;
  SeparableOperator op;
  SpectralBasis global_x, global_y;
  std::vector<SpectralBasis> block_x;  // per x-block (empty basis for blocks without unknowns)
  std::vector<SpectralBasis> block_y;
  std::vector<BlockInfo> blocks;       // x-major
  std::vector<Index> iface_x;          // unknown indices of interface planes
  std::vector<Index> iface_y;

  Dims3 dims() const { return op.dims(); }
};

/// Hoists every eigendecomposition out of the solve and validates the bases.
inline SolverPlan plan(const Grid1D& gx, const Grid1D& gy, const Grid1D& gz, const BlockPartition& px,
                       const BlockPartition& py, const LayeredMedium& medium, PlanOptions opt = {}) {
  if (px.nodes() != gx.nodes() || py.nodes() != gy.nodes()) throw DimensionError("plan: partition does not match grid");
  SolverPlan p;
  p.gx = gx;
  p.gy = gy;
  p.gz = gz;
  p.px = px;
  p.py = py;
  p.medium = medium;
  p.op = SeparableOperator::build(gx, gy, gz, medium);
  p.global_x = eig_1d(p.op.x, opt.allow_fast, "global-x");
  p.global_y = eig_1d(p.op.y, opt.allow_fast, "global-y");
  p.iface_x = px.interface_unknowns();
  p.iface_y = py.interface_unknowns();

  const auto make_block_bases = [&](const BlockPartition& part, const Pencil1D& pencil, const char* axis) {
    std::vector<SpectralBasis> out(static_cast<std::size_t>(part.block_count()));
    parallel_for(part.block_count(), opt.threads, [&](Index b) {
      const NodeRange u = part.block_unknowns(b);
      if (u.empty()) return;
      out[b] = eig_1d(pencil.slice(u.first, u.size()), opt.allow_fast, std::string(axis) + "-block-" + std::to_string(b));
    });
    return out;
  };
  p.block_x = make_block_bases(px, p.op.x, "x");
  p.block_y = make_block_bases(py, p.op.y, "y");

  const auto is_iface = [](const std::vector<Index>& v, Index u) { return std::find(v.begin(), v.end(), u) != v.end(); };
  for (Index bx = 0; bx < px.block_count(); ++bx) {
    for (Index by = 0; by < py.block_count(); ++by) {
      BlockInfo info;
      info.bx = bx;
      info.by = by;
      info.ux = px.block_unknowns(bx);
      info.uy = py.block_unknowns(by);
      if (!info.empty()) {
        info.left = is_iface(p.iface_x, info.ux.first - 1);
        info.right = is_iface(p.iface_x, info.ux.last + 1);
        info.front = is_iface(p.iface_y, info.uy.first - 1);
        info.back = is_iface(p.iface_y, info.uy.last + 1);
      }
      p.blocks.push_back(info);
    }
  }
  return p;
}

inline constexpr int kCyclicSteps = 7;

struct SolveOptions {
  int threads = 1;
  /// Evaluate f - M^{-1} A v off the interfaces after step 2 (diagnostic, not timed).
  bool check_interface_support = false;
};

struct SolveReport {
  double residual = 0.0;  // |A u - M f|_inf / |M f|_inf
  std::array<double, kCyclicSteps> step_seconds{};
  std::array<std::uint64_t, kCyclicSteps> step_ops{};
  double off_interface_residual = -1.0;  // max |f - M^{-1} A v| off the interfaces, when checked
  double f_norm = 0.0;
  Index interface_nodes = 0;  // |union of interface planes|
  Index blocks = 0;

  std::uint64_t total_ops() const {
    std::uint64_t s = 0;
    for (auto v : step_ops) s += v;
    return s;
  }
  double total_seconds() const {
    double s = 0;
    for (auto v : step_seconds) s += v;
    return s;
  }
};

/// Negated stencil coupling of Dirichlet data w (given on the interface
/// planes, global indexing) into the block rows adjacent to them, in load
/// (A) space. Solving the homogeneous block system with this right-hand side
/// reproduces the Dirichlet solution.
inline Field3D block_dirichlet_rhs(const Field3D& w_boundary, const SeparableOperator& op, const BlockInfo& block) {
  const Index nz = op.dims().nz;
  Field3D g(block.dims(nz));
  if (block.empty()) return g;
  const Index nbx = block.ux.size(), nby = block.uy.size();
  const auto& S = op.z.S;
  const auto add_x = [&](Index a, Index nb_i, cplx coupling) {
    for (Index b = 0; b < nby; ++b) {
      const Index j = block.uy.first + b;
      const cplx c = coupling * op.y.M[j];
      for (Index k = 0; k < nz; ++k) g(a, b, k) -= c * S[k] * w_boundary(nb_i, j, k);
    }
  };
  const auto add_y = [&](Index b, Index nb_j, cplx coupling) {
    for (Index a = 0; a < nbx; ++a) {
      const Index i = block.ux.first + a;
      const cplx c = coupling * op.x.M[i];
      for (Index k = 0; k < nz; ++k) g(a, b, k) -= c * S[k] * w_boundary(i, nb_j, k);
    }
  };
  if (block.left) add_x(0, block.ux.first - 1, op.x.A.sub[block.ux.first - 1]);
  if (block.right) add_x(nbx - 1, block.ux.last + 1, op.x.A.sup[block.ux.last]);
  if (block.front) add_y(0, block.uy.first - 1, op.y.A.sub[block.uy.first - 1]);
  if (block.back) add_y(nby - 1, block.uy.last + 1, op.y.A.sup[block.uy.last]);
  return g;
}

namespace detail {

/// In place: coefficients c~ -> v~ solving [A_z + (lx_l + ly_m) S + lambda M] v~ = M c~ for every (l, m).
inline void harmonic_solves(Field3D& c, const SpectralBasis& bx, const SpectralBasis& by, const SeparableOperator& op,
                            OpCounter* ops, int threads = 1) {
  const Dims3 d = c.dims();
  const auto& Az = op.z.pencil.A;
  const auto& Mz = op.z.pencil.M;
  const auto& S = op.z.S;
  parallel_for(d.nx, threads, [&](Index l) {
    std::vector<cplx> diag(static_cast<std::size_t>(d.nz)), rhs(static_cast<std::size_t>(d.nz));
    for (Index m = 0; m < d.ny; ++m) {
      const cplx shift = bx.eigenvalue(l) + by.eigenvalue(m);
      cplx* line = c.line(l, m);
      for (Index k = 0; k < d.nz; ++k) {
        diag[k] = Az.diag[k] + shift * S[k] + op.lambda * Mz[k];
        rhs[k] = Mz[k] * line[k];
      }
      solve_tridiagonal(Az.sub, diag, Az.sup, rhs, std::span<cplx>(line, static_cast<std::size_t>(d.nz)), l, m, ops);
    }
  });
  count_ops(ops, 16 * static_cast<std::uint64_t>(d.size()));
}

inline Field3D extract_block(const Field3D& f, const BlockInfo& b) {
  Field3D out(b.dims(f.nz()));
  for (Index a = 0; a < out.nx(); ++a)
    for (Index c = 0; c < out.ny(); ++c) {
      const cplx* src = f.line(b.ux.first + a, b.uy.first + c);
      std::copy(src, src + f.nz(), out.line(a, c));
    }
  return out;
}

class StepTimer {
 public:
  explicit StepTimer(double& slot) : slot_(slot), t0_(std::chrono::steady_clock::now()) {}
  ~StepTimer() { slot_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  double& slot_;
  std::chrono::steady_clock::time_point t0_;
};

}  // namespace detail

/// Solves A u = M f by two-level cyclic reduction.
inline Field3D solve(const SolverPlan& p, const Field3D& f, SolveReport* report = nullptr, SolveOptions opt = {}) {
  const Dims3 d = p.dims();
  if (!(f.dims() == d)) throw DimensionError("solve: right-hand side dims do not match the plan");
  const SeparableOperator& op = p.op;
  const Index nb = static_cast<Index>(p.blocks.size());
  std::array<OpCounter, kCyclicSteps> ops;
  SolveReport rep;
  rep.blocks = nb;

  // 1. per-block forward transforms
  std::vector<Field3D> vt(static_cast<std::size_t>(nb));
  {
    detail::StepTimer t(rep.step_seconds[0]);
    parallel_for(nb, opt.threads, [&](Index b) {
      const BlockInfo& blk = p.blocks[b];
      if (blk.empty()) return;
      vt[b] = forward_2d(detail::extract_block(f, blk), p.block_x[blk.bx], p.block_y[blk.by], &ops[0]);
    });
  }

  // 2. per-block harmonic solves, homogeneous Dirichlet data
  {
    detail::StepTimer t(rep.step_seconds[1]);
    parallel_for(nb, opt.threads, [&](Index b) {
      const BlockInfo& blk = p.blocks[b];
      if (blk.empty()) return;
      detail::harmonic_solves(vt[b], p.block_x[blk.bx], p.block_y[blk.by], op, &ops[1]);
    });
  }

  if (opt.check_interface_support) {
    Field3D v(d);
    for (Index b = 0; b < nb; ++b) {
      const BlockInfo& blk = p.blocks[b];
      if (blk.empty()) continue;
      const Field3D vb = inverse_2d(vt[b], p.block_x[blk.bx], p.block_y[blk.by]);
      for (Index a = 0; a < vb.nx(); ++a)
        for (Index c = 0; c < vb.ny(); ++c)
          std::copy(vb.line(a, c), vb.line(a, c) + d.nz, v.line(blk.ux.first + a, blk.uy.first + c));
    }
    std::vector<unsigned char> ix(static_cast<std::size_t>(d.nx), 0), iy(static_cast<std::size_t>(d.ny), 0);
    for (Index i : p.iface_x) ix[i] = 1;
    for (Index j : p.iface_y) iy[j] = 1;
    double worst = 0.0;
    for (Index i = 0; i < d.nx; ++i)
      for (Index j = 0; j < d.ny; ++j) {
        if (ix[i] || iy[j]) continue;
        for (Index k = 0; k < d.nz; ++k)
          worst = std::max(worst, std::abs(f(i, j, k) - op.apply_at(v, i, j, k) / op.mass_at(i, j, k)));
      }
    rep.off_interface_residual = worst;
  }

  const PlaneSet iface{p.iface_x, p.iface_y};
  Field3D w(d);  // w on the interface planes
  if (!iface.empty()) {
    // 3. v next to the interfaces
    Field3D v(d);
    KnownMask known(d);
    {
      detail::StepTimer t(rep.step_seconds[2]);
      parallel_for(nb, opt.threads, [&](Index b) {
        const BlockInfo& blk = p.blocks[b];
        if (blk.empty()) return;
        const Dims3 bd = blk.dims(d.nz);
        PlaneSet rows;
        if (blk.left) rows.x.push_back(0);
        if (blk.right && (bd.nx - 1 != 0 || !blk.left)) rows.x.push_back(bd.nx - 1);
        if (blk.front) rows.y.push_back(0);
        if (blk.back && (bd.ny - 1 != 0 || !blk.front)) rows.y.push_back(bd.ny - 1);
        if (rows.empty()) return;
        const Field3D vb = inverse_2d_on_planes(vt[b], rows, p.block_x[blk.bx], p.block_y[blk.by], &ops[2]);
        for (Index a = 0; a < bd.nx; ++a)
          for (Index c = 0; c < bd.ny; ++c) {
            if (!rows.contains(a, c)) continue;
            const Index gi = blk.ux.first + a, gj = blk.uy.first + c;
            std::copy(vb.line(a, c), vb.line(a, c) + d.nz, v.line(gi, gj));
            for (Index k = 0; k < d.nz; ++k) known.set(gi, gj, k);
          }
      });
    }

    // 4. residual on the interface planes (v vanishes there)
    Field3D r(d);
    {
      detail::StepTimer t(rep.step_seconds[3]);
      std::vector<Index3> targets;
      for (Index i = 0; i < d.nx; ++i)
        for (Index j = 0; j < d.ny; ++j) {
          if (!iface.contains(i, j)) continue;
          for (Index k = 0; k < d.nz; ++k) {
            targets.push_back({i, j, k});
            known.set(i, j, k);
          }
        }
      rep.interface_nodes = static_cast<Index>(targets.size());
      const std::vector<cplx> av = apply_A_restricted(op, v, targets, &known, &ops[3]);
      for (std::size_t n = 0; n < targets.size(); ++n) {
        const auto& tg = targets[n];
        r(tg.i, tg.j, tg.k) = f(tg.i, tg.j, tg.k) - av[n] / op.mass_at(tg.i, tg.j, tg.k);
      }
      count_ops(&ops[3], 8 * targets.size());
    }

    // 5. global correction on the interfaces
    {
      detail::StepTimer t(rep.step_seconds[4]);
      Field3D wt = forward_2d_sparse(r, iface, p.global_x, p.global_y, &ops[4], false);
      detail::harmonic_solves(wt, p.global_x, p.global_y, op, &ops[4], opt.threads);
      w = inverse_2d_on_planes(wt, iface, p.global_x, p.global_y, &ops[4]);
    }
  }

  // 6. per-block solves with the interface values as Dirichlet data
  std::vector<Field3D> wt_blocks(static_cast<std::size_t>(nb));
  {
    detail::StepTimer t(rep.step_seconds[5]);
    parallel_for(nb, opt.threads, [&](Index b) {
      const BlockInfo& blk = p.blocks[b];
      if (blk.empty() || !(blk.left || blk.right || blk.front || blk.back)) return;
      Field3D g = block_dirichlet_rhs(w, op, blk);
      for (Index a = 0; a < g.nx(); ++a)
        for (Index c = 0; c < g.ny(); ++c)
          for (Index k = 0; k < d.nz; ++k) g(a, c, k) /= op.mass_at(blk.ux.first + a, blk.uy.first + c, k);
      count_ops(&ops[5], 6 * static_cast<std::uint64_t>(g.size()));
      wt_blocks[b] = forward_2d(g, p.block_x[blk.bx], p.block_y[blk.by], &ops[5]);
      detail::harmonic_solves(wt_blocks[b], p.block_x[blk.bx], p.block_y[blk.by], op, &ops[5]);
    });
  }

  // 7. assemble u
  Field3D u(d);
  {
    detail::StepTimer t(rep.step_seconds[6]);
    parallel_for(nb, opt.threads, [&](Index b) {
      const BlockInfo& blk = p.blocks[b];
      if (blk.empty()) return;
      Field3D& coeffs = vt[b];
      if (wt_blocks[b].size() > 0) {
        for (Index n = 0; n < coeffs.size(); ++n) coeffs.data()[n] += wt_blocks[b].data()[n];
        count_ops(&ops[6], 2 * static_cast<std::uint64_t>(coeffs.size()));
      }
      const Field3D ub = inverse_2d(coeffs, p.block_x[blk.bx], p.block_y[blk.by], &ops[6]);
      for (Index a = 0; a < ub.nx(); ++a)
        for (Index c = 0; c < ub.ny(); ++c)
          std::copy(ub.line(a, c), ub.line(a, c) + d.nz, u.line(blk.ux.first + a, blk.uy.first + c));
    });
    for (Index i = 0; i < d.nx; ++i)
      for (Index j = 0; j < d.ny; ++j)
        if (iface.contains(i, j)) std::copy(w.line(i, j), w.line(i, j) + d.nz, u.line(i, j));
  }

  for (int s = 0; s < kCyclicSteps; ++s) rep.step_ops[s] = ops[s].value();
  if (report != nullptr) {
    const Field3D Mf = apply_mass(op, f);
    const Field3D Au = apply_A(op, u);
    rep.f_norm = f.max_abs();
    const double mn = Mf.max_abs();
    const double diff = max_abs_diff(Au, Mf);
    rep.residual = mn == 0.0 ? diff : diff / mn;
    *report = rep;
  }
  return u;
}

}  // namespace strata
