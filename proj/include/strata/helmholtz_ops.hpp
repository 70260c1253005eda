#pragma once

// Finite-volume 7-point discretisation of
//   sigma(z) (u_xx + u_yy) + (sigma(z) u_z)_z + lambda u = f
// in Kronecker form
//   A = A_x (x) M_y (x) S_z + M_x (x) A_y (x) S_z + M_x (x) M_y (x) A_z + lambda M_x (x) M_y (x) M_z,
// where S_z = diag(sigma_k * hz_k) carries the sigma_k factor of the
// horizontal terms and A u = (M_x (x) M_y (x) M_z) f.

#include <span>
#include <vector>

#include "strata/field.hpp"
#include "strata/grid1d.hpp"

namespace strata {

/// Symmetric-pattern tridiagonal matrix; sub[i] is entry (i+1, i), sup[i] is (i, i+1).
struct Tridiagonal {
  std::vector<cplx> sub;
  std::vector<cplx> diag;
  std::vector<cplx> sup;

  Index size() const { return static_cast<Index>(diag.size()); }

  /// Principal submatrix on rows/cols [first, first+n).
  Tridiagonal slice(Index first, Index n) const {
    Tridiagonal t;
    t.diag.assign(diag.begin() + first, diag.begin() + first + n);
    if (n > 1) {
      t.sub.assign(sub.begin() + first, sub.begin() + first + n - 1);
      t.sup.assign(sup.begin() + first, sup.begin() + first + n - 1);
    }
    return t;
  }

  double inf_norm() const {
    double m = 0.0;
    const Index n = size();
    for (Index i = 0; i < n; ++i) {
      double r = std::abs(diag[i]);
      if (i > 0) r += std::abs(sub[i - 1]);
      if (i + 1 < n) r += std::abs(sup[i]);
      m = std::max(m, r);
    }
    return m;
  }
};

/// A 1D stiffness/mass pencil on the unknowns of one axis.
struct Pencil1D {
  Tridiagonal A;
  std::vector<cplx> M;  // diagonal mass

  Index size() const { return A.size(); }
  Pencil1D slice(Index first, Index n) const {
    return {A.slice(first, n), std::vector<cplx>(M.begin() + first, M.begin() + first + n)};
  }
};

/// z-dependent coefficients and the spectral shift.
struct LayeredMedium {
  std::vector<cplx> sigma_nodes;  // one per z node (boundary nodes included)
  std::vector<cplx> sigma_half;   // one per z step
  cplx lambda{0.0, 0.0};

  static LayeredMedium uniform(const Grid1D& gz, cplx sigma, cplx lambda) {
    LayeredMedium m;
    m.sigma_nodes.assign(static_cast<std::size_t>(gz.nodes()), sigma);
    m.sigma_half.assign(static_cast<std::size_t>(gz.cells()), sigma);
    m.lambda = lambda;
    return m;
  }

  /// Piecewise-constant sigma. interfaces are depths (real coordinate, z_0 = 0)
  /// strictly increasing; sigma has one entry per layer. Edge values take the
  /// layer containing the edge midpoint.
  static LayeredMedium from_layers(const Grid1D& gz, std::span<const double> interfaces, std::span<const cplx> sigma,
                                   cplx lambda) {
    if (sigma.size() != interfaces.size() + 1) throw GridError("need one sigma per layer");
    for (std::size_t i = 1; i < interfaces.size(); ++i)
      if (!(interfaces[i] > interfaces[i - 1])) throw GridError("layer interfaces must be strictly increasing");
    const auto layer_of = [&](double z) {
      return static_cast<std::size_t>(std::upper_bound(interfaces.begin(), interfaces.end(), z) - interfaces.begin());
    };
    const auto z = gz.coordinates();
    LayeredMedium m;
    m.lambda = lambda;
    for (const auto& zk : z) m.sigma_nodes.push_back(sigma[layer_of(zk.real())]);
    for (Index k = 0; k < gz.cells(); ++k)
      m.sigma_half.push_back(sigma[layer_of(0.5 * (z[k].real() + z[k + 1].real()))]);
    return m;
  }

  void validate(const Grid1D& gz) const {
    if (static_cast<Index>(sigma_nodes.size()) != gz.nodes() || static_cast<Index>(sigma_half.size()) != gz.cells())
      throw DimensionError("medium length does not match the z grid");
    for (const auto& s : sigma_nodes)
      if (!(s.real() > 0.0)) throw GridError("sigma must have a positive real part");
    for (const auto& s : sigma_half)
      if (!(s.real() > 0.0)) throw GridError("sigma must have a positive real part");
  }
};

/// Horizontal second-difference pencil: row i = [1/h_{i-1}, -(1/h_{i-1}+1/h_i), 1/h_i], M = diag(hh_i).
inline Pencil1D assemble_1d(const Grid1D& g, const ControlVolumes& cv) {
  const Index n = g.unknowns();
  if (n < 1) throw GridError("grid has no interior nodes");
  Pencil1D p;
  p.A.diag.resize(static_cast<std::size_t>(n));
  p.A.sub.resize(static_cast<std::size_t>(n - 1));
  p.A.sup.resize(static_cast<std::size_t>(n - 1));
  p.M.resize(static_cast<std::size_t>(n));
  for (Index u = 0; u < n; ++u) {
    const Index node = u + 1;
    const cplx wl = 1.0 / g.step(node - 1);
    const cplx wr = 1.0 / g.step(node);
    p.A.diag[u] = -(wl + wr);
    if (u + 1 < n) {
      p.A.sup[u] = wr;
      p.A.sub[u] = wr;
    }
    p.M[u] = cv[node];
  }
  return p;
}

inline Pencil1D assemble_1d(const Grid1D& g) { return assemble_1d(g, control_volumes(g)); }

/// z pencil: edge weights sigma_{k+-1/2}/h; also returns S_z = diag(sigma_k hz_k).
struct ZOperator {
  Pencil1D pencil;        // A_z, M_z
  std::vector<cplx> S;    // sigma-weighted mass
};

inline ZOperator assemble_z(const Grid1D& gz, const ControlVolumes& cv, const LayeredMedium& medium) {
  medium.validate(gz);
  const Index n = gz.unknowns();
  if (n < 1) throw GridError("z grid has no interior nodes");
  ZOperator z;
  auto& A = z.pencil.A;
  A.diag.resize(static_cast<std::size_t>(n));
  A.sub.resize(static_cast<std::size_t>(n - 1));
  A.sup.resize(static_cast<std::size_t>(n - 1));
  z.pencil.M.resize(static_cast<std::size_t>(n));
  z.S.resize(static_cast<std::size_t>(n));
  for (Index u = 0; u < n; ++u) {
    const Index k = u + 1;
    const cplx wl = medium.sigma_half[k - 1] / gz.step(k - 1);
    const cplx wr = medium.sigma_half[k] / gz.step(k);
    A.diag[u] = -(wl + wr);
    if (u + 1 < n) {
      A.sup[u] = wr;
      A.sub[u] = wr;
    }
    z.pencil.M[u] = cv[k];
    z.S[u] = medium.sigma_nodes[k] * cv[k];
  }
  return z;
}

struct SeparableOperator {
  Pencil1D x;
  Pencil1D y;
  ZOperator z;
  cplx lambda{0.0, 0.0};

  Dims3 dims() const { return {x.size(), y.size(), z.pencil.size()}; }

  static SeparableOperator build(const Grid1D& gx, const Grid1D& gy, const Grid1D& gz, const LayeredMedium& medium) {
    SeparableOperator op;
    op.x = assemble_1d(gx);
    op.y = assemble_1d(gy);
    op.z = assemble_z(gz, control_volumes(gz), medium);
    op.lambda = medium.lambda;
    return op;
  }

  /// Value of (A u) at one unknown; neighbours outside the unknown box are zero.
  cplx apply_at(const Field3D& u, Index i, Index j, Index k) const {
    const Dims3 d = dims();
    const auto val = [&](Index a, Index b, Index c) -> cplx {
      if (a < 0 || b < 0 || c < 0 || a >= d.nx || b >= d.ny || c >= d.nz) return 0.0;
      return u(a, b, c);
    };
    const cplx c0 = u(i, j, k);
    cplx ax = x.A.diag[i] * c0;
    if (i > 0) ax += x.A.sub[i - 1] * val(i - 1, j, k);
    if (i + 1 < d.nx) ax += x.A.sup[i] * val(i + 1, j, k);
    cplx ay = y.A.diag[j] * c0;
    if (j > 0) ay += y.A.sub[j - 1] * val(i, j - 1, k);
    if (j + 1 < d.ny) ay += y.A.sup[j] * val(i, j + 1, k);
    const auto& Az = z.pencil.A;
    cplx az = Az.diag[k] * c0;
    if (k > 0) az += Az.sub[k - 1] * val(i, j, k - 1);
    if (k + 1 < d.nz) az += Az.sup[k] * val(i, j, k + 1);
    const cplx mx = x.M[i], my = y.M[j], mz = z.pencil.M[k];
    return (ax * my + mx * ay) * z.S[k] + mx * my * az + lambda * mx * my * mz * c0;
  }

  cplx mass_at(Index i, Index j, Index k) const { return x.M[i] * y.M[j] * z.pencil.M[k]; }
};

/// A u over all unknowns, O(N).
inline Field3D apply_A(const SeparableOperator& op, const Field3D& u) {
  if (!(u.dims() == op.dims())) throw DimensionError("apply_A: field dims do not match operator");
  Field3D out(u.dims());
  const Dims3 d = u.dims();
  for (Index i = 0; i < d.nx; ++i)
    for (Index j = 0; j < d.ny; ++j)
      for (Index k = 0; k < d.nz; ++k) out(i, j, k) = op.apply_at(u, i, j, k);
  return out;
}

/// (M_x (x) M_y (x) M_z) f
inline Field3D apply_mass(const SeparableOperator& op, const Field3D& f) {
  if (!(f.dims() == op.dims())) throw DimensionError("apply_mass: field dims do not match operator");
  Field3D out(f.dims());
  const Dims3 d = f.dims();
  for (Index i = 0; i < d.nx; ++i)
    for (Index j = 0; j < d.ny; ++j)
      for (Index k = 0; k < d.nz; ++k) out(i, j, k) = op.mass_at(i, j, k) * f(i, j, k);
  return out;
}

/// Mask of unknowns whose values are available to apply_A_restricted.
class KnownMask {
 public:
  KnownMask() = default;
  explicit KnownMask(Dims3 d) : dims_(d), bits_(static_cast<std::size_t>(d.size()), 0) {}
  void set(Index i, Index j, Index k) { bits_[static_cast<std::size_t>((i * dims_.ny + j) * dims_.nz + k)] = 1; }
  bool known(Index i, Index j, Index k) const {
    return bits_[static_cast<std::size_t>((i * dims_.ny + j) * dims_.nz + k)] != 0;
  }
  const Dims3& dims() const { return dims_; }

 private:
  Dims3 dims_;
  std::vector<unsigned char> bits_;
};

/// (A u) on a target set, O(|targets|). With a mask, every target and 7-point
/// neighbour must be marked known.
inline std::vector<cplx> apply_A_restricted(const SeparableOperator& op, const Field3D& u, std::span<const Index3> targets,
                                            const KnownMask* mask = nullptr, OpCounter* ops = nullptr) {
  if (!(u.dims() == op.dims())) throw DimensionError("apply_A_restricted: field dims do not match operator");
  const Dims3 d = u.dims();
  std::vector<cplx> out;
  out.reserve(targets.size());
  for (const auto& t : targets) {
    if (t.i < 0 || t.j < 0 || t.k < 0 || t.i >= d.nx || t.j >= d.ny || t.k >= d.nz)
      throw DimensionError("apply_A_restricted: target outside the grid");
    if (mask != nullptr) {
      const Index3 nb[7] = {{t.i, t.j, t.k},     {t.i - 1, t.j, t.k}, {t.i + 1, t.j, t.k}, {t.i, t.j - 1, t.k},
                            {t.i, t.j + 1, t.k}, {t.i, t.j, t.k - 1}, {t.i, t.j, t.k + 1}};
      for (const auto& n : nb) {
        if (n.i < 0 || n.j < 0 || n.k < 0 || n.i >= d.nx || n.j >= d.ny || n.k >= d.nz) continue;
        if (!mask->known(n.i, n.j, n.k)) throw Error("apply_A_restricted: missing neighbour value");
      }
    }
    out.push_back(op.apply_at(u, t.i, t.j, t.k));
  }
  count_ops(ops, 20 * static_cast<std::uint64_t>(targets.size()));
  return out;
}

}  // namespace strata
