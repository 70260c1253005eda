#pragma once

// Frequency-domain Maxwell equations on a Lebedev grid in a layered medium:
//   curl(rho curl H) - i omega mu H = f,   f = curl(rho J'),
// with rho = diag(c1, c2, c3)(z). All three components of H live on the
// P nodes (even index sum), all three of E = rho curl H on the R nodes.
// H vanishes on boundary P nodes and E on boundary R nodes.
//
// Along each axis the even nodes form the primary grid and the odd nodes the
// dual grid. Horizontal expansions use primary modes (Dirichlet) and dual
// modes (Neumann, obtained by differentiating primary modes, plus the
// constant), linked by d/dx phi_p = lambda phi_d and d/dx phi_d = -lambda phi_p.
// The unknowns split into four independent Yee families; each horizontal
// harmonic of a family couples (H_x, H_y) along z in a 2x2 block-tridiagonal
// system after H_z is eliminated.

#include <array>
#include <string>
#include <vector>

#include "strata/field.hpp"
#include "strata/grid1d.hpp"
#include "strata/spectral.hpp"
#include "strata/zline.hpp"

namespace strata {

enum class NodeType { primary, dual };

inline NodeType flip(NodeType t) { return t == NodeType::primary ? NodeType::dual : NodeType::primary; }
inline NodeType node_type(Index i) { return i % 2 == 0 ? NodeType::primary : NodeType::dual; }
/// +1 on primary, -1 on dual: sign of the modal derivative.
inline double derivative_sign(NodeType t) { return t == NodeType::primary ? 1.0 : -1.0; }

enum class Parity { P, R };

class LebedevGrid {
 public:
  LebedevGrid() = default;
  LebedevGrid(Grid1D gx, Grid1D gy, Grid1D gz) : g_{std::move(gx), std::move(gy), std::move(gz)} {
    for (int a = 0; a < 3; ++a) {
      const Index c = g_[a].cells();
      if (c < 4 || c % 2 != 0)
        throw GridError("Lebedev grid needs an even number of cells, at least 4, along every axis");
      coords_[a] = g_[a].coordinates();
    }
  }

  const Grid1D& axis(int a) const { return g_[a]; }
  const Grid1D& gx() const { return g_[0]; }
  const Grid1D& gy() const { return g_[1]; }
  const Grid1D& gz() const { return g_[2]; }
  const std::vector<cplx>& coords(int a) const { return coords_[a]; }
  Dims3 nodes() const { return {g_[0].nodes(), g_[1].nodes(), g_[2].nodes()}; }
  /// Half the cell count along an axis.
  Index half(int a) const { return g_[a].cells() / 2; }

  static Parity parity(Index i, Index j, Index k) { return (i + j + k) % 2 == 0 ? Parity::P : Parity::R; }
  bool interior(Index i, Index j, Index k) const {
    const Dims3 n = nodes();
    return i > 0 && j > 0 && k > 0 && i < n.nx - 1 && j < n.ny - 1 && k < n.nz - 1;
  }
  /// "pp", "dd", "pd" or "dp": types of the horizontal indices.
  static std::string subgrid(Index i, Index j) {
    return std::string(i % 2 == 0 ? "p" : "d") + (j % 2 == 0 ? "p" : "d");
  }
  /// Central difference span x_{i+1} - x_{i-1}.
  cplx span(int a, Index i) const { return coords_[a][i + 1] - coords_[a][i - 1]; }

 private:
  std::array<Grid1D, 3> g_;
  std::array<std::vector<cplx>, 3> coords_;
};

inline LebedevGrid build_lebedev(const Grid1D& gx, const Grid1D& gy, const Grid1D& gz) { return {gx, gy, gz}; }

struct MaxwellMedium {
  std::vector<cplx> c1, c2, c3;  // resistivity components per z node
  double mu = 1.0;
  double omega = 1.0;

  static MaxwellMedium uniform(const Grid1D& gz, cplx c1, cplx c2, cplx c3, double mu, double omega) {
    const auto n = static_cast<std::size_t>(gz.nodes());
    return {std::vector<cplx>(n, c1), std::vector<cplx>(n, c2), std::vector<cplx>(n, c3), mu, omega};
  }

  /// Piecewise-constant layers; rho[l] = (c1, c2, c3) of layer l.
  static MaxwellMedium from_layers(const Grid1D& gz, std::span<const double> interfaces,
                                   std::span<const std::array<cplx, 3>> rho, double mu, double omega) {
    if (rho.size() != interfaces.size() + 1) throw GridError("need one resistivity triple per layer");
    for (std::size_t i = 1; i < interfaces.size(); ++i)
      if (!(interfaces[i] > interfaces[i - 1])) throw GridError("layer interfaces must be strictly increasing");
    MaxwellMedium m;
    m.mu = mu;
    m.omega = omega;
    for (const auto& z : gz.coordinates()) {
      const auto l = static_cast<std::size_t>(std::upper_bound(interfaces.begin(), interfaces.end(), z.real()) -
                                              interfaces.begin());
      m.c1.push_back(rho[l][0]);
      m.c2.push_back(rho[l][1]);
      m.c3.push_back(rho[l][2]);
    }
    return m;
  }

  cplx c(int comp, Index k) const { return comp == 0 ? c1[k] : comp == 1 ? c2[k] : c3[k]; }
  cplx iwm() const { return cplx{0.0, omega * mu}; }

  void validate(const Grid1D& gz) const {
    const auto n = static_cast<std::size_t>(gz.nodes());
    if (c1.size() != n || c2.size() != n || c3.size() != n) throw DimensionError("medium length does not match z grid");
    if (!(omega > 0.0)) throw GridError("omega must be positive");
    if (!(mu > 0.0)) throw GridError("mu must be positive");
  }
};

/// Three complex components on every node of a grid; only one parity is meaningful.
struct VectorField {
  std::array<Field3D, 3> c;

  VectorField() = default;
  explicit VectorField(Dims3 d) : c{Field3D(d), Field3D(d), Field3D(d)} {}
  const Dims3& dims() const { return c[0].dims(); }
  Field3D& operator[](int a) { return c[a]; }
  const Field3D& operator[](int a) const { return c[a]; }
  double max_abs() const { return std::max({c[0].max_abs(), c[1].max_abs(), c[2].max_abs()}); }
};

inline double max_abs_diff(const VectorField& a, const VectorField& b) {
  return std::max({max_abs_diff(a[0], b[0]), max_abs_diff(a[1], b[1]), max_abs_diff(a[2], b[2])});
}

inline double relative_inf_error(const VectorField& a, const VectorField& b) {
  const double d = max_abs_diff(a, b), s = b.max_abs();
  if (s == 0.0) return d == 0.0 ? 0.0 : INFINITY;
  return d / s;
}

/// Zeroes the components on nodes that are not interior nodes of the given parity.
inline void restrict_to(VectorField& f, const LebedevGrid& g, Parity p) {
  const Dims3 d = f.dims();
  for (Index i = 0; i < d.nx; ++i)
    for (Index j = 0; j < d.ny; ++j)
      for (Index k = 0; k < d.nz; ++k)
        if (LebedevGrid::parity(i, j, k) != p || !g.interior(i, j, k))
          for (int a = 0; a < 3; ++a) f[a](i, j, k) = 0.0;
}

/// Centered-difference curl, evaluated on the interior nodes of the opposite
/// parity; reads the source field on nodes of parity `source` only.
inline VectorField discrete_curl(const VectorField& F, const LebedevGrid& g, Parity source) {
  const Dims3 d = g.nodes();
  if (!(F.dims() == d)) throw DimensionError("discrete_curl: field dims do not match grid");
  VectorField out(d);
  const Parity target = source == Parity::P ? Parity::R : Parity::P;
  for (Index i = 1; i < d.nx - 1; ++i)
    for (Index j = 1; j < d.ny - 1; ++j)
      for (Index k = 1; k < d.nz - 1; ++k) {
        if (LebedevGrid::parity(i, j, k) != target) continue;
        const cplx hx = g.span(0, i), hy = g.span(1, j), hz = g.span(2, k);
        const auto dx = [&](int a) { return (F[a](i + 1, j, k) - F[a](i - 1, j, k)) / hx; };
        const auto dy = [&](int a) { return (F[a](i, j + 1, k) - F[a](i, j - 1, k)) / hy; };
        const auto dz = [&](int a) { return (F[a](i, j, k + 1) - F[a](i, j, k - 1)) / hz; };
        out[0](i, j, k) = dy(2) - dz(1);
        out[1](i, j, k) = dz(0) - dx(2);
        out[2](i, j, k) = dx(1) - dy(0);
      }
  return out;
}

/// Pointwise rho on R nodes.
inline void apply_rho(VectorField& E, const MaxwellMedium& m) {
  const Dims3 d = E.dims();
  for (int a = 0; a < 3; ++a)
    for (Index i = 0; i < d.nx; ++i)
      for (Index j = 0; j < d.ny; ++j)
        for (Index k = 0; k < d.nz; ++k) E[a](i, j, k) *= m.c(a, k);
}

/// E = rho curl H on interior R nodes.
inline VectorField electric_field(const VectorField& H, const MaxwellMedium& m, const LebedevGrid& g) {
  VectorField Hm = H;
  restrict_to(Hm, g, Parity::P);
  VectorField E = discrete_curl(Hm, g, Parity::P);
  apply_rho(E, m);
  return E;
}

/// A_h H = curl(rho curl H) - i omega mu H on interior P nodes.
inline VectorField apply_curl_curl(const VectorField& H, const MaxwellMedium& m, const LebedevGrid& g) {
  m.validate(g.gz());
  if (!(H.dims() == g.nodes())) throw DimensionError("apply_curl_curl: field dims do not match grid");
  VectorField Hm = H;
  restrict_to(Hm, g, Parity::P);
  VectorField E = discrete_curl(Hm, g, Parity::P);
  apply_rho(E, m);
  VectorField out = discrete_curl(E, g, Parity::R);
  const cplx iwm = m.iwm();
  for (int a = 0; a < 3; ++a)
    for (Index n = 0; n < out[a].size(); ++n) out[a].data()[n] -= iwm * Hm[a].data()[n];
  return out;
}

/// f = curl(rho J') from a source current on R nodes (boundary R values are dropped).
inline VectorField assemble_maxwell_rhs(const VectorField& J, const MaxwellMedium& m, const LebedevGrid& g) {
  m.validate(g.gz());
  if (!(J.dims() == g.nodes())) throw DimensionError("assemble_maxwell_rhs: field dims do not match grid");
  VectorField rj = J;
  restrict_to(rj, g, Parity::R);
  apply_rho(rj, m);
  return discrete_curl(rj, g, Parity::R);
}

// ---------------------------------------------------------------------------
// 1D staggered bases.

/// Primary (Dirichlet) and dual (Neumann) modes of one axis with 2n cells.
/// Harmonic l = 0..n-1; the primary mode l is column l-1 of `primary`
/// (no primary l = 0), the dual mode l is column l of `dual`.
struct StaggeredBasis {
  Index n = 0;
  SpectralBasis primary;
  SpectralBasis dual;
  std::vector<cplx> lambda;  // lambda[0] = 0
  Pencil1D pencil;           // primary pencil (-D^T M_d D, M_p)

  const SpectralBasis& of(NodeType t) const { return t == NodeType::primary ? primary : dual; }
  /// Coefficient index of harmonic l on a node type, -1 when absent.
  static Index mode(NodeType t, Index l) { return t == NodeType::primary ? l - 1 : l; }
  Index modes(NodeType t) const { return t == NodeType::primary ? n - 1 : n; }
};

/// Node index of local position a on the interior nodes of a type.
inline Index type_node(NodeType t, Index a) { return t == NodeType::primary ? 2 * (a + 1) : 2 * a + 1; }
/// Local position of node i among the interior nodes of its type.
inline Index type_local(Index i) { return i % 2 == 0 ? i / 2 - 1 : (i - 1) / 2; }
/// Number of interior nodes of a type along an axis with 2n cells.
inline Index type_count(NodeType t, Index n) { return t == NodeType::primary ? n - 1 : n; }

inline StaggeredBasis staggered_basis(const Grid1D& g, const std::string& id = "") {
  if (g.cells() < 4 || g.cells() % 2 != 0) throw GridError("staggered basis needs an even cell count >= 4");
  const auto x = g.coordinates();
  const Index n = g.cells() / 2;
  StaggeredBasis sb;
  sb.n = n;
  std::vector<cplx> Hd(static_cast<std::size_t>(n));
  for (Index b = 0; b < n; ++b) Hd[b] = x[2 * b + 2] - x[2 * b];
  const Index np = n - 1;
  Pencil1D& p = sb.pencil;
  p.A.diag.resize(static_cast<std::size_t>(np));
  p.A.sub.resize(static_cast<std::size_t>(np - 1));
  p.A.sup.resize(static_cast<std::size_t>(np - 1));
  p.M.resize(static_cast<std::size_t>(np));
  for (Index a = 0; a < np; ++a) {
    p.A.diag[a] = -(1.0 / Hd[a] + 1.0 / Hd[a + 1]);
    if (a + 1 < np) {
      p.A.sub[a] = 1.0 / Hd[a + 1];
      p.A.sup[a] = 1.0 / Hd[a + 1];
    }
    p.M[a] = x[2 * a + 3] - x[2 * a + 1];
  }
  sb.primary = eig_1d(p, true, id + "-primary");

  sb.lambda.assign(static_cast<std::size_t>(n), cplx{0.0, 0.0});
  std::vector<cplx> dual_values(static_cast<std::size_t>(n), cplx{0.0, 0.0});
  Eigen::MatrixXcd Wd(n, n);
  cplx total{0.0, 0.0};
  for (const auto& h : Hd) total += h;
  Wd.col(0).setConstant(1.0 / std::sqrt(total));
  const Eigen::MatrixXcd& Wp = sb.primary.W();
  for (Index l = 1; l < n; ++l) {
    const cplx ev = sb.primary.eigenvalue(l - 1);
    const cplx lam = std::sqrt(-ev);
    if (std::abs(lam) == 0.0) throw SpectralError("staggered basis: zero primary eigenvalue");
    sb.lambda[l] = lam;
    dual_values[l] = ev;
    for (Index b = 0; b < n; ++b) {
      const cplx right = b < np ? Wp(b, l - 1) : cplx{0.0, 0.0};
      const cplx left = b > 0 ? Wp(b - 1, l - 1) : cplx{0.0, 0.0};
      Wd(b, l) = (right - left) / (Hd[b] * lam);
    }
  }
  sb.dual = SpectralBasis(std::move(dual_values), std::move(Wd), Hd, id + "-dual");
  if (sb.dual.biorthonormality_error() > kBiorthonormalityTol) throw SpectralError("dual basis is not biorthonormal");
  return sb;
}

struct MaxwellBases {
  StaggeredBasis x;
  StaggeredBasis y;
};

inline MaxwellBases maxwell_bases(const LebedevGrid& g) { return {staggered_basis(g.gx(), "x"), staggered_basis(g.gy(), "y")}; }

// ---------------------------------------------------------------------------
// Yee families.

/// Family with H_x on (a, b, t), H_y on (a', b', t), H_z on (a', b, t'),
/// where ' flips the type and t = a xor b.
struct YeeFamily {
  NodeType a;
  NodeType b;

  NodeType t() const { return a == b ? NodeType::primary : NodeType::dual; }
  std::array<NodeType, 3> types(int comp) const {
    switch (comp) {
      case 0: return {a, b, t()};
      case 1: return {flip(a), flip(b), t()};
      default: return {flip(a), b, flip(t())};
    }
  }
  double sXy() const { return derivative_sign(b); }
  double sYx() const { return derivative_sign(flip(a)); }
  double sZx() const { return derivative_sign(flip(a)); }
  double sZy() const { return derivative_sign(b); }
  std::string name() const {
    const auto c = [](NodeType t) { return t == NodeType::primary ? "p" : "d"; };
    return std::string(c(a)) + c(b);
  }
};

inline constexpr std::array<YeeFamily, 4> kYeeFamilies{{{NodeType::primary, NodeType::primary},
                                                        {NodeType::dual, NodeType::dual},
                                                        {NodeType::primary, NodeType::dual},
                                                        {NodeType::dual, NodeType::primary}}};

/// Coefficient arrays (l-mode, m-mode, z level) of the three components of one family.
using FamilyCoefficients = std::array<Field3D, 3>;

namespace detail {

inline Dims3 family_dims(const YeeFamily& fam, int comp, const LebedevGrid& g) {
  const auto t = fam.types(comp);
  return {type_count(t[0], g.half(0)), type_count(t[1], g.half(1)), type_count(t[2], g.half(2))};
}

inline Field3D extract_component(const VectorField& F, const YeeFamily& fam, int comp, const LebedevGrid& g) {
  const auto t = fam.types(comp);
  Field3D out(family_dims(fam, comp, g));
  for (Index a = 0; a < out.nx(); ++a)
    for (Index b = 0; b < out.ny(); ++b)
      for (Index c = 0; c < out.nz(); ++c) out(a, b, c) = F[comp](type_node(t[0], a), type_node(t[1], b), type_node(t[2], c));
  return out;
}

inline void scatter_component(const Field3D& v, VectorField& F, const YeeFamily& fam, int comp, bool accumulate = false) {
  const auto t = fam.types(comp);
  for (Index a = 0; a < v.nx(); ++a)
    for (Index b = 0; b < v.ny(); ++b)
      for (Index c = 0; c < v.nz(); ++c) {
        cplx& dst = F[comp](type_node(t[0], a), type_node(t[1], b), type_node(t[2], c));
        dst = accumulate ? dst + v(a, b, c) : v(a, b, c);
      }
}

}  // namespace detail

inline std::array<FamilyCoefficients, 4> maxwell_forward(const VectorField& f, const LebedevGrid& g,
                                                         const MaxwellBases& B, OpCounter* ops = nullptr) {
  std::array<FamilyCoefficients, 4> out;
  for (int q = 0; q < 4; ++q) {
    const YeeFamily& fam = kYeeFamilies[q];
    for (int c = 0; c < 3; ++c) {
      const auto t = fam.types(c);
      out[q][c] = forward_2d(detail::extract_component(f, fam, c, g), B.x.of(t[0]), B.y.of(t[1]), ops);
    }
  }
  return out;
}

inline VectorField maxwell_inverse(const std::array<FamilyCoefficients, 4>& coeffs, const LebedevGrid& g,
                                   const MaxwellBases& B, OpCounter* ops = nullptr) {
  VectorField H(g.nodes());
  for (int q = 0; q < 4; ++q) {
    const YeeFamily& fam = kYeeFamilies[q];
    for (int c = 0; c < 3; ++c) {
      const auto t = fam.types(c);
      detail::scatter_component(inverse_2d(coeffs[q][c], B.x.of(t[0]), B.y.of(t[1]), ops), H, fam, c);
    }
  }
  return H;
}

// ---------------------------------------------------------------------------
// Per-harmonic systems.

/// One harmonic (l, m) of one family: the 2x2 block system in (H_x, H_y) over
/// the interior z levels of type t, plus what is needed to recover H_z.
struct HarmonicSystem {
  YeeFamily family;
  Index l = 0, m = 0;
  cplx lambda{0.0, 0.0}, nu{0.0, 0.0};
  bool has_x = false, has_y = false, has_z = false;
  BlockTridiagonalSystem sys;
  std::vector<Index> t_levels;     // z nodes of the unknowns (X, Y)
  std::vector<Index> tbar_levels;  // interior z nodes of H_z
  std::vector<cplx> fx, fy, fz;    // harmonic right-hand sides on those levels
  std::vector<cplx> inv_d;         // 1/D on tbar levels (0 without H_z)
  const LebedevGrid* grid = nullptr;
  const MaxwellMedium* medium = nullptr;
};

namespace detail {

inline bool present(NodeType t, Index l) { return StaggeredBasis::mode(t, l) >= 0; }

inline bool has_component(const YeeFamily& fam, int comp, Index l, Index m) {
  const auto t = fam.types(comp);
  return present(t[0], l) && present(t[1], m);
}

/// Levels of a type on the z axis with 2n cells (interior only).
inline std::vector<Index> levels(NodeType t, Index n) {
  std::vector<Index> out;
  for (Index a = 0; a < type_count(t, n); ++a) out.push_back(type_node(t, a));
  return out;
}

}  // namespace detail

/// Assembles the 2x2 block-tridiagonal system of harmonic (l, m). fx, fy are
/// the harmonic right-hand sides on the t levels, fz on the interior tbar
/// levels (empty spans for absent components).
inline HarmonicSystem assemble_harmonic_system(const YeeFamily& fam, Index l, Index m, cplx lambda, cplx nu,
                                               const LebedevGrid& g, const MaxwellMedium& med,
                                               std::span<const cplx> fx, std::span<const cplx> fy,
                                               std::span<const cplx> fz) {
  HarmonicSystem h;
  h.family = fam;
  h.l = l;
  h.m = m;
  h.lambda = lambda;
  h.nu = nu;
  h.grid = &g;
  h.medium = &med;
  h.has_x = detail::has_component(fam, 0, l, m);
  h.has_y = detail::has_component(fam, 1, l, m);
  h.has_z = detail::has_component(fam, 2, l, m);
  const Index nzh = g.half(2);
  const NodeType t = fam.t(), tb = flip(t);
  h.t_levels = detail::levels(t, nzh);
  h.tbar_levels = detail::levels(tb, nzh);
  const Index nt = static_cast<Index>(h.t_levels.size());
  const Index nq = static_cast<Index>(h.tbar_levels.size());
  const auto take = [](std::span<const cplx> s, Index n, bool has) {
    std::vector<cplx> v(static_cast<std::size_t>(n), cplx{0.0, 0.0});
    if (has) {
      if (static_cast<Index>(s.size()) != n) throw DimensionError("harmonic system: rhs length mismatch");
      std::copy(s.begin(), s.end(), v.begin());
    }
    return v;
  };
  h.fx = take(fx, nt, h.has_x);
  h.fy = take(fy, nt, h.has_y);
  h.fz = take(fz, nq, h.has_z);

  const auto& z = g.coords(2);
  const Index nzn = g.nodes().nz;
  const cplx iwm = med.iwm();
  const double sZx = fam.sZx(), sZy = fam.sZy(), sXy = fam.sXy(), sYx = fam.sYx();

  // Per z node (tbar levels, boundary included): E_y = alpha.(U_{q+1}-U_{q-1}) + e, E_x = beta.(...) + e'.
  std::vector<Eigen::RowVector2cd> alpha(static_cast<std::size_t>(nzn), Eigen::RowVector2cd::Zero());
  std::vector<Eigen::RowVector2cd> beta(static_cast<std::size_t>(nzn), Eigen::RowVector2cd::Zero());
  std::vector<cplx> e(static_cast<std::size_t>(nzn)), ep(static_cast<std::size_t>(nzn));
  h.inv_d.assign(static_cast<std::size_t>(nq), cplx{0.0, 0.0});
  for (Index iq = 0; iq < nq; ++iq) {
    const Index q = h.tbar_levels[iq];
    const cplx hq = z[q + 1] - z[q - 1];
    const cplx c1 = med.c1[q], c2 = med.c2[q];
    cplx inv_d{0.0, 0.0};
    if (h.has_z) {
      const cplx D = c2 * lambda * lambda + c1 * nu * nu - iwm;
      const double scale = std::abs(c2 * lambda * lambda) + std::abs(c1 * nu * nu) + std::abs(iwm);
      if (std::abs(D) <= kResonanceTol * scale) throw ResonanceError("singular H_z elimination pivot", l, m);
      inv_d = 1.0 / D;
    }
    h.inv_d[iq] = inv_d;
    const cplx a = c2 * (1.0 - lambda * lambda * c2 * inv_d);
    const cplx b = -c1 * c2 * sZx * sZy * lambda * nu * inv_d;
    const cplx d = -c1 * (1.0 - nu * nu * c1 * inv_d);
    alpha[q] << a / hq, b / hq;
    beta[q] << -b / hq, d / hq;
    e[q] = -c2 * sZx * lambda * h.fz[iq] * inv_d;
    ep[q] = c1 * sZy * nu * h.fz[iq] * inv_d;
  }

  auto& s = h.sys;
  s.diag.assign(static_cast<std::size_t>(nt), Block2::Zero());
  s.rhs.assign(static_cast<std::size_t>(nt), Vec2::Zero());
  s.sub.assign(static_cast<std::size_t>(std::max<Index>(nt - 1, 0)), Block2::Zero());
  s.sup.assign(static_cast<std::size_t>(std::max<Index>(nt - 1, 0)), Block2::Zero());
  for (Index ik = 0; ik < nt; ++ik) {
    const Index k = h.t_levels[ik];
    const cplx hk = z[k + 1] - z[k - 1];
    const cplx c3 = med.c3[k];
    Block2 D0;
    D0 << c3 * nu * nu - iwm, -c3 * sXy * sYx * lambda * nu, -c3 * sYx * sXy * lambda * nu, c3 * lambda * lambda - iwm;
    D0.row(0) += (alpha[k + 1] + alpha[k - 1]) / hk;
    D0.row(1) -= (beta[k + 1] + beta[k - 1]) / hk;
    s.diag[ik] = D0;
    if (ik + 1 < nt) {
      s.sup[ik].row(0) = -alpha[k + 1] / hk;
      s.sup[ik].row(1) = beta[k + 1] / hk;
    }
    if (ik > 0) {
      s.sub[ik - 1].row(0) = -alpha[k - 1] / hk;
      s.sub[ik - 1].row(1) = beta[k - 1] / hk;
    }
    s.rhs[ik] << h.fx[ik] + (e[k + 1] - e[k - 1]) / hk, h.fy[ik] - (ep[k + 1] - ep[k - 1]) / hk;
  }
  // Absent components: unit rows, decoupled columns.
  for (int c = 0; c < 2; ++c) {
    if (c == 0 ? h.has_x : h.has_y) continue;
    for (Index ik = 0; ik < nt; ++ik) {
      s.diag[ik].col(c).setZero();
      s.diag[ik].row(c).setZero();
      s.diag[ik](c, c) = 1.0;
      s.rhs[ik][c] = 0.0;
      if (ik + 1 < nt) {
        s.sup[ik].row(c).setZero();
        s.sup[ik].col(c).setZero();
        s.sub[ik].row(c).setZero();
        s.sub[ik].col(c).setZero();
      }
    }
  }
  return h;
}

namespace detail {

/// Value of a t-level unknown at z node k (zero off the interior t levels).
inline cplx level_value(const HarmonicSystem& h, const std::vector<Vec2>& U, int comp, Index k) {
  const Index nzn = h.grid->nodes().nz;
  if (k <= 0 || k >= nzn - 1) return 0.0;
  return U[static_cast<std::size_t>(type_local(k))][comp];
}

}  // namespace detail

/// H_z on the interior tbar levels from the solved (H_x, H_y).
inline std::vector<cplx> reconstruct_hz(const HarmonicSystem& h, const std::vector<Vec2>& U) {
  std::vector<cplx> Z(h.tbar_levels.size(), cplx{0.0, 0.0});
  if (!h.has_z) return Z;
  const auto& z = h.grid->coords(2);
  for (std::size_t iq = 0; iq < Z.size(); ++iq) {
    const Index q = h.tbar_levels[iq];
    const cplx hq = z[q + 1] - z[q - 1];
    const cplx dX = (detail::level_value(h, U, 0, q + 1) - detail::level_value(h, U, 0, q - 1)) / hq;
    const cplx dY = (detail::level_value(h, U, 1, q + 1) - detail::level_value(h, U, 1, q - 1)) / hq;
    Z[iq] = h.inv_d[iq] * (h.fz[iq] + h.family.sZx() * h.lambda * h.medium->c2[q] * dX +
                           h.family.sZy() * h.nu * h.medium->c1[q] * dY);
  }
  return Z;
}

/// Residual of the three uneliminated harmonic equations, max |r_i| over
/// max sum |terms_i| (a normwise backward error).
inline double harmonic_residual(const HarmonicSystem& h, const std::vector<Vec2>& U, const std::vector<cplx>& Z) {
  const auto& z = h.grid->coords(2);
  const auto& med = *h.medium;
  const Index nzn = h.grid->nodes().nz;
  const cplx iwm = med.iwm();
  const YeeFamily& fam = h.family;
  const cplx lam = h.lambda, nu = h.nu;
  std::vector<cplx> zval(static_cast<std::size_t>(nzn), cplx{0.0, 0.0});
  for (std::size_t iq = 0; iq < Z.size(); ++iq) zval[h.tbar_levels[iq]] = Z[iq];
  // E components with term magnitudes.
  std::vector<cplx> Ex(static_cast<std::size_t>(nzn)), Ey(static_cast<std::size_t>(nzn)), Ez(static_cast<std::size_t>(nzn));
  std::vector<double> Exm(static_cast<std::size_t>(nzn)), Eym(static_cast<std::size_t>(nzn)), Ezm(static_cast<std::size_t>(nzn));
  for (Index q : h.tbar_levels) {
    const cplx hq = z[q + 1] - z[q - 1];
    const cplx dX = (detail::level_value(h, U, 0, q + 1) - detail::level_value(h, U, 0, q - 1)) / hq;
    const cplx dY = (detail::level_value(h, U, 1, q + 1) - detail::level_value(h, U, 1, q - 1)) / hq;
    const cplx t1 = med.c2[q] * dX, t2 = med.c2[q] * fam.sZx() * lam * zval[q];
    Ey[q] = t1 - t2;
    Eym[q] = std::abs(t1) + std::abs(t2);
    const cplx t3 = med.c1[q] * fam.sZy() * nu * zval[q], t4 = med.c1[q] * dY;
    Ex[q] = t3 - t4;
    Exm[q] = std::abs(t3) + std::abs(t4);
  }
  for (std::size_t ik = 0; ik < h.t_levels.size(); ++ik) {
    const Index k = h.t_levels[ik];
    const cplx t1 = med.c3[k] * fam.sYx() * lam * U[ik][1], t2 = med.c3[k] * fam.sXy() * nu * U[ik][0];
    Ez[k] = t1 - t2;
    Ezm[k] = std::abs(t1) + std::abs(t2);
  }
  double res = 0.0, scale = 0.0;
  for (std::size_t ik = 0; ik < h.t_levels.size(); ++ik) {
    const Index k = h.t_levels[ik];
    const cplx hk = z[k + 1] - z[k - 1];
    if (h.has_x) {
      const cplx r = -fam.sXy() * nu * Ez[k] - (Ey[k + 1] - Ey[k - 1]) / hk - iwm * U[ik][0] - h.fx[ik];
      const double m = std::abs(nu) * Ezm[k] + (Eym[k + 1] + Eym[k - 1]) / std::abs(hk) + std::abs(iwm * U[ik][0]) +
                       std::abs(h.fx[ik]);
      res = std::max(res, std::abs(r));
      scale = std::max(scale, m);
    }
    if (h.has_y) {
      const cplx r = (Ex[k + 1] - Ex[k - 1]) / hk + fam.sYx() * lam * Ez[k] - iwm * U[ik][1] - h.fy[ik];
      const double m = (Exm[k + 1] + Exm[k - 1]) / std::abs(hk) + std::abs(lam) * Ezm[k] + std::abs(iwm * U[ik][1]) +
                       std::abs(h.fy[ik]);
      res = std::max(res, std::abs(r));
      scale = std::max(scale, m);
    }
  }
  if (h.has_z) {
    for (std::size_t iq = 0; iq < h.tbar_levels.size(); ++iq) {
      const Index q = h.tbar_levels[iq];
      const cplx r = -fam.sZx() * lam * Ey[q] + fam.sZy() * nu * Ex[q] - iwm * Z[iq] - h.fz[iq];
      const double m = std::abs(lam) * Eym[q] + std::abs(nu) * Exm[q] + std::abs(iwm * Z[iq]) + std::abs(h.fz[iq]);
      res = std::max(res, std::abs(r));
      scale = std::max(scale, m);
    }
  }
  return scale == 0.0 ? res : res / scale;
}

struct MaxwellSolveOptions {
  int threads = 1;
  /// Largest harmonic reassembly residual is written here when non-null.
  double* max_reassembly_residual = nullptr;
};

/// Replaces right-hand-side coefficients by solution coefficients, harmonic by harmonic.
inline void maxwell_harmonic_solves(std::array<FamilyCoefficients, 4>& coeffs, const LebedevGrid& g,
                                    const MaxwellMedium& med, const MaxwellBases& B, MaxwellSolveOptions opt = {},
                                    OpCounter* ops = nullptr) {
  const Index nx = B.x.n, ny = B.y.n;
  std::vector<double> worst(static_cast<std::size_t>(4 * nx), 0.0);
  for (int q = 0; q < 4; ++q) {
    const YeeFamily& fam = kYeeFamilies[q];
    FamilyCoefficients& C = coeffs[q];
    const auto tX = fam.types(0), tY = fam.types(1), tZ = fam.types(2);
    parallel_for(nx, opt.threads, [&](Index l) {
      for (Index m = 0; m < ny; ++m) {
        const auto line = [&](int comp, const std::array<NodeType, 3>& t) -> std::span<const cplx> {
          const Index a = StaggeredBasis::mode(t[0], l), b = StaggeredBasis::mode(t[1], m);
          if (a < 0 || b < 0) return {};
          return {C[comp].line(a, b), static_cast<std::size_t>(C[comp].nz())};
        };
        const HarmonicSystem h = assemble_harmonic_system(fam, l, m, B.x.lambda[l], B.y.lambda[m], g, med,
                                                          line(0, tX), line(1, tY), line(2, tZ));
        const std::vector<Vec2> U = solve_block_tridiagonal(h.sys, l, m, ops);
        const std::vector<cplx> Z = reconstruct_hz(h, U);
        if (opt.max_reassembly_residual != nullptr)
          worst[q * nx + l] = std::max(worst[q * nx + l], harmonic_residual(h, U, Z));
        if (h.has_x) {
          cplx* o = C[0].line(StaggeredBasis::mode(tX[0], l), StaggeredBasis::mode(tX[1], m));
          for (std::size_t i = 0; i < U.size(); ++i) o[i] = U[i][0];
        }
        if (h.has_y) {
          cplx* o = C[1].line(StaggeredBasis::mode(tY[0], l), StaggeredBasis::mode(tY[1], m));
          for (std::size_t i = 0; i < U.size(); ++i) o[i] = U[i][1];
        }
        if (h.has_z) {
          cplx* o = C[2].line(StaggeredBasis::mode(tZ[0], l), StaggeredBasis::mode(tZ[1], m));
          std::copy(Z.begin(), Z.end(), o);
        }
      }
    });
  }
  if (opt.max_reassembly_residual != nullptr)
    *opt.max_reassembly_residual = worst.empty() ? 0.0 : *std::max_element(worst.begin(), worst.end());
}

/// Direct spectral solve of A_h H = f for a layered medium.
inline VectorField solve_maxwell_layered(const VectorField& f, const MaxwellMedium& med, const LebedevGrid& g,
                                         const MaxwellBases& B, MaxwellSolveOptions opt = {}) {
  med.validate(g.gz());
  if (!(f.dims() == g.nodes())) throw DimensionError("solve_maxwell_layered: rhs dims do not match grid");
  auto coeffs = maxwell_forward(f, g, B);
  maxwell_harmonic_solves(coeffs, g, med, B, opt);
  return maxwell_inverse(coeffs, g, B);
}

inline VectorField solve_maxwell_layered(const VectorField& f, const MaxwellMedium& med, const LebedevGrid& g,
                                         MaxwellSolveOptions opt = {}) {
  return solve_maxwell_layered(f, med, g, maxwell_bases(g), opt);
}

// ---------------------------------------------------------------------------
// Two-level splitting H = H1 + H2.

struct MaxwellBlock {
  Index x0 = 0, x1 = 0;  // node span (block boundary planes included)
  Index y0 = 0, y1 = 0;
  LebedevGrid grid;
  MaxwellBases bases;
};

struct MaxwellCyclicPlan {
  LebedevGrid grid;
  MaxwellMedium medium;
  BlockPartition px, py;
  MaxwellBases global;
  std::vector<MaxwellBlock> blocks;
};

namespace detail {

inline Grid1D sub_grid(const Grid1D& g, Index first_node, Index last_node) {
  std::vector<cplx> steps(g.steps().begin() + first_node, g.steps().begin() + last_node);
  std::vector<SegmentTag> tags(g.tags().begin() + first_node, g.tags().begin() + last_node);
  return Grid1D(std::move(steps), std::move(tags));
}

inline std::pair<Index, Index> block_span(const BlockPartition& p, Index b) {
  const NodeRange& r = p.blocks()[static_cast<std::size_t>(b)];
  return {r.first == 0 ? 0 : r.first - 1, r.last == p.nodes() - 1 ? r.last : r.last + 1};
}

}  // namespace detail

/// Interfaces must sit on even (primary) nodes so every block is itself a
/// Lebedev grid with an even cell count.
inline MaxwellCyclicPlan plan_maxwell(const LebedevGrid& g, const MaxwellMedium& med, const BlockPartition& px,
                                      const BlockPartition& py, int threads = 1) {
  med.validate(g.gz());
  if (px.nodes() != g.nodes().nx || py.nodes() != g.nodes().ny) throw DimensionError("plan_maxwell: partition does not match grid");
  for (const auto* p : {&px, &py})
    for (Index s : p->interfaces())
      if (s % 2 != 0) throw GridError("Maxwell interfaces must be on even nodes (node " + std::to_string(s) + ")");
  MaxwellCyclicPlan plan{g, med, px, py, maxwell_bases(g), {}};
  for (Index bx = 0; bx < px.block_count(); ++bx)
    for (Index by = 0; by < py.block_count(); ++by) {
      MaxwellBlock blk;
      std::tie(blk.x0, blk.x1) = detail::block_span(px, bx);
      std::tie(blk.y0, blk.y1) = detail::block_span(py, by);
      plan.blocks.push_back(std::move(blk));
    }
  parallel_for(static_cast<Index>(plan.blocks.size()), threads, [&](Index b) {
    MaxwellBlock& blk = plan.blocks[b];
    blk.grid = LebedevGrid(detail::sub_grid(g.gx(), blk.x0, blk.x1), detail::sub_grid(g.gy(), blk.y0, blk.y1), g.gz());
    blk.bases = maxwell_bases(blk.grid);
  });
  return plan;
}

/// Moves interface nodes to the nearest even node, dropping ones that collide
/// or leave a block thinner than 4 cells.
inline BlockPartition align_for_maxwell(const BlockPartition& p) {
  std::vector<Index> out;
  Index prev = 0;
  for (Index s : p.interfaces()) {
    const Index e = s % 2 == 0 ? s : s + 1;
    if (e - prev >= 4 && p.nodes() - 1 - e >= 4) {
      out.push_back(e);
      prev = e;
    }
  }
  return BlockPartition::from_interfaces(p.nodes(), out);
}

struct MaxwellCyclicReport {
  double off_slab_residual = 0.0;  // max |f - A H1| away from the interface slabs
  double f_norm = 0.0;
  Index slab_nodes = 0;
};

inline VectorField solve_maxwell_cyclic(const MaxwellCyclicPlan& plan, const VectorField& f,
                                        MaxwellCyclicReport* report = nullptr, int threads = 1) {
  const LebedevGrid& g = plan.grid;
  const MaxwellMedium& med = plan.medium;
  const Dims3 d = g.nodes();
  if (!(f.dims() == d)) throw DimensionError("solve_maxwell_cyclic: rhs dims do not match grid");
  const Index nb = static_cast<Index>(plan.blocks.size());
  const auto& ix = plan.px.interfaces();
  const auto& iy = plan.py.interfaces();
  std::vector<unsigned char> on_x(static_cast<std::size_t>(d.nx), 0), on_y(static_cast<std::size_t>(d.ny), 0);
  std::vector<unsigned char> slab_x(static_cast<std::size_t>(d.nx), 0), slab_y(static_cast<std::size_t>(d.ny), 0);
  for (Index s : ix) on_x[s] = slab_x[s - 1] = slab_x[s] = slab_x[s + 1] = 1;
  for (Index s : iy) on_y[s] = slab_y[s - 1] = slab_y[s] = slab_y[s + 1] = 1;
  const auto on_iface = [&](Index i, Index j) { return on_x[i] || on_y[j]; };

  const auto extract_block = [&](const VectorField& F, const MaxwellBlock& blk) {
    VectorField out(blk.grid.nodes());
    for (int a = 0; a < 3; ++a)
      for (Index i = blk.x0; i <= blk.x1; ++i)
        for (Index j = blk.y0; j <= blk.y1; ++j)
          std::copy(F[a].line(i, j), F[a].line(i, j) + d.nz, out[a].line(i - blk.x0, j - blk.y0));
    return out;
  };
  const auto insert_interior = [&](const VectorField& F, const MaxwellBlock& blk, VectorField& dst) {
    for (int a = 0; a < 3; ++a)
      for (Index i = blk.x0 + 1; i < blk.x1; ++i)
        for (Index j = blk.y0 + 1; j < blk.y1; ++j)
          std::copy(F[a].line(i - blk.x0, j - blk.y0), F[a].line(i - blk.x0, j - blk.y0) + d.nz, dst[a].line(i, j));
  };

  // 1-2. block solves with homogeneous boundary conditions
  std::vector<std::array<FamilyCoefficients, 4>> h1(static_cast<std::size_t>(nb));
  parallel_for(nb, threads, [&](Index b) {
    const MaxwellBlock& blk = plan.blocks[b];
    h1[b] = maxwell_forward(extract_block(f, blk), blk.grid, blk.bases);
    maxwell_harmonic_solves(h1[b], blk.grid, med, blk.bases);
  });

  // 3. H1 on the grid
  VectorField H1(d);
  for (Index b = 0; b < nb; ++b) {
    const MaxwellBlock& blk = plan.blocks[b];
    insert_interior(maxwell_inverse(h1[b], blk.grid, blk.bases), blk, H1);
  }
  if (ix.empty() && iy.empty()) {
    if (report != nullptr) *report = {0.0, f.max_abs(), 0};
    return H1;
  }

  // 4. residual, supported on the slabs around the interfaces
  VectorField r = apply_curl_curl(H1, med, g);
  MaxwellCyclicReport rep;
  rep.f_norm = f.max_abs();
  for (int a = 0; a < 3; ++a)
    for (Index i = 0; i < d.nx; ++i)
      for (Index j = 0; j < d.ny; ++j)
        for (Index k = 0; k < d.nz; ++k) {
          cplx& v = r[a](i, j, k);
          const bool p_int = LebedevGrid::parity(i, j, k) == Parity::P && g.interior(i, j, k);
          v = p_int ? f[a](i, j, k) - v : cplx{0.0, 0.0};
          if (!(slab_x[i] || slab_y[j])) {
            rep.off_slab_residual = std::max(rep.off_slab_residual, std::abs(v));
            v = 0.0;
          } else if (a == 0 && p_int) {
            ++rep.slab_nodes;
          }
        }

  // 5. global correction H2 on the slabs
  VectorField H2(d);
  {
    std::array<FamilyCoefficients, 4> c2;
    std::array<std::array<PlaneSet, 3>, 4> planes;
    for (int q = 0; q < 4; ++q) {
      const YeeFamily& fam = kYeeFamilies[q];
      for (int c = 0; c < 3; ++c) {
        const auto t = fam.types(c);
        PlaneSet& ps = planes[q][c];
        for (Index i = 1; i < d.nx - 1; ++i)
          if (slab_x[i] && node_type(i) == t[0]) ps.x.push_back(type_local(i));
        for (Index j = 1; j < d.ny - 1; ++j)
          if (slab_y[j] && node_type(j) == t[1]) ps.y.push_back(type_local(j));
        c2[q][c] = forward_2d_sparse(detail::extract_component(r, fam, c, g), ps, plan.global.x.of(t[0]),
                                     plan.global.y.of(t[1]));
      }
    }
    maxwell_harmonic_solves(c2, g, med, plan.global, {threads, nullptr});
    for (int q = 0; q < 4; ++q) {
      const YeeFamily& fam = kYeeFamilies[q];
      for (int c = 0; c < 3; ++c) {
        const auto t = fam.types(c);
        detail::scatter_component(
            inverse_2d_on_planes(c2[q][c], planes[q][c], plan.global.x.of(t[0]), plan.global.y.of(t[1])), H2, fam, c);
      }
    }
  }

  // 6. tangential E on the interfaces, lifted into block right-hand sides
  VectorField Htot = H1;
  for (int a = 0; a < 3; ++a)
    for (Index n = 0; n < Htot[a].size(); ++n) Htot[a].data()[n] += H2[a].data()[n];
  const VectorField E = electric_field(Htot, med, g);
  std::vector<std::array<FamilyCoefficients, 4>> hc(static_cast<std::size_t>(nb));
  parallel_for(nb, threads, [&](Index b) {
    const MaxwellBlock& blk = plan.blocks[b];
    const LebedevGrid& bg = blk.grid;
    const Dims3 bd = bg.nodes();
    VectorField Hb(bd);
    for (int a = 0; a < 3; ++a)
      for (Index i = 0; i < bd.nx; ++i)
        for (Index j = 0; j < bd.ny; ++j) {
          const Index gi = i + blk.x0, gj = j + blk.y0;
          if ((i == 0 || i == bd.nx - 1 || j == 0 || j == bd.ny - 1) && on_iface(gi, gj))
            std::copy(H2[a].line(gi, gj), H2[a].line(gi, gj) + d.nz, Hb[a].line(i, j));
        }
    VectorField El = discrete_curl(Hb, bg, Parity::P);
    apply_rho(El, med);
    for (int a = 0; a < 3; ++a)
      for (Index i = 0; i < bd.nx; ++i)
        for (Index j = 0; j < bd.ny; ++j) {
          const Index gi = i + blk.x0, gj = j + blk.y0;
          if ((i == 0 || i == bd.nx - 1 || j == 0 || j == bd.ny - 1) && on_iface(gi, gj))
            std::copy(E[a].line(gi, gj), E[a].line(gi, gj) + d.nz, El[a].line(i, j));
        }
    VectorField lift = discrete_curl(El, bg, Parity::R);
    for (int a = 0; a < 3; ++a)
      for (auto& v : lift[a].values()) v = -v;
    hc[b] = maxwell_forward(lift, bg, blk.bases);
    maxwell_harmonic_solves(hc[b], bg, med, blk.bases);
  });

  // 7. assembly
  VectorField H(d);
  for (Index b = 0; b < nb; ++b) {
    const MaxwellBlock& blk = plan.blocks[b];
    for (int q = 0; q < 4; ++q)
      for (int c = 0; c < 3; ++c) {
        Field3D& dst = h1[b][q][c];
        for (Index n = 0; n < dst.size(); ++n) dst.data()[n] += hc[b][q][c].data()[n];
      }
    insert_interior(maxwell_inverse(h1[b], blk.grid, blk.bases), blk, H);
  }
  for (int a = 0; a < 3; ++a)
    for (Index i = 0; i < d.nx; ++i)
      for (Index j = 0; j < d.ny; ++j)
        if (on_iface(i, j)) std::copy(H2[a].line(i, j), H2[a].line(i, j) + d.nz, H[a].line(i, j));
  restrict_to(H, g, Parity::P);
  if (report != nullptr) *report = rep;
  return H;
}

}  // namespace strata
