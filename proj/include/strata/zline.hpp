#pragma once

// Per-harmonic solves along z: scalar tridiagonal systems for the Helmholtz
// problem and 2x2 block-tridiagonal systems for the Maxwell problem.
//
// Thomas elimination without pivoting is tried first. If a pivot is small or
// the residual check fails, the system is refactored with partial pivoting;
// a tiny pivot there means the harmonic is resonant and ResonanceError is
// raised instead of returning an unreliable solution.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "strata/common.hpp"
#include "strata/helmholtz_ops.hpp"

namespace strata {

/// Relative pivot size below which a system is treated as singular.
inline constexpr double kResonanceTol = 1e-10;
/// Residual acceptance: |Ax - b| <= tol (|A| |x| + |b|).
inline constexpr double kLineResidualTol = 1e-10;

struct TridiagonalSystem {
  std::vector<cplx> sub;   // n-1, entry (i+1, i)
  std::vector<cplx> diag;  // n
  std::vector<cplx> sup;   // n-1, entry (i, i+1)
  std::vector<cplx> rhs;   // n

  Index size() const { return static_cast<Index>(diag.size()); }
  void validate() const {
    const auto n = diag.size();
    if (rhs.size() != n || (n > 0 && (sub.size() != n - 1 || sup.size() != n - 1)))
      throw DimensionError("tridiagonal system: inconsistent lengths");
  }
};

namespace detail {

inline double tri_row_norm(std::span<const cplx> sub, std::span<const cplx> diag, std::span<const cplx> sup, Index i) {
  const Index n = static_cast<Index>(diag.size());
  double r = std::abs(diag[i]);
  if (i > 0) r += std::abs(sub[i - 1]);
  if (i + 1 < n) r += std::abs(sup[i]);
  return r;
}

inline bool tri_residual_ok(std::span<const cplx> sub, std::span<const cplx> diag, std::span<const cplx> sup,
                            std::span<const cplx> rhs, std::span<const cplx> x) {
  const Index n = static_cast<Index>(diag.size());
  double res = 0.0, an = 0.0, xn = 0.0, bn = 0.0;
  for (Index i = 0; i < n; ++i) {
    cplx ax = diag[i] * x[i];
    if (i > 0) ax += sub[i - 1] * x[i - 1];
    if (i + 1 < n) ax += sup[i] * x[i + 1];
    if (!std::isfinite(ax.real()) || !std::isfinite(ax.imag())) return false;
    res = std::max(res, std::abs(ax - rhs[i]));
    an = std::max(an, tri_row_norm(sub, diag, sup, i));
    xn = std::max(xn, std::abs(x[i]));
    bn = std::max(bn, std::abs(rhs[i]));
  }
  return res <= kLineResidualTol * (an * xn + bn);
}

/// Banded LU with partial pivoting (one sub-diagonal, fill-in of a second super-diagonal).
inline void tri_solve_pivoted(std::span<const cplx> sub, std::span<const cplx> diag, std::span<const cplx> sup,
                              std::span<const cplx> rhs, std::span<cplx> x, Index l, Index m) {
  const Index n = static_cast<Index>(diag.size());
  std::vector<cplx> d(diag.begin(), diag.end());
  std::vector<cplx> u1(static_cast<std::size_t>(n), 0.0), u2(static_cast<std::size_t>(n), 0.0);
  std::vector<cplx> lo(static_cast<std::size_t>(n), 0.0), b(rhs.begin(), rhs.end());
  for (Index i = 0; i + 1 < n; ++i) u1[i] = sup[i];
  std::vector<cplx> s(sub.begin(), sub.end());
  double anorm = 0.0;
  for (Index i = 0; i < n; ++i) anorm = std::max(anorm, tri_row_norm(sub, diag, sup, i));
  for (Index i = 0; i + 1 < n; ++i) {
    // Rows i and i+1; row i+1 holds (s[i], d[i+1], u1[i+1]).
    if (std::abs(s[i]) > std::abs(d[i])) {
      std::swap(d[i], s[i]);
      std::swap(u1[i], d[i + 1]);
      std::swap(u2[i], u1[i + 1]);
      std::swap(b[i], b[i + 1]);
    }
    if (std::abs(d[i]) <= kResonanceTol * anorm) throw ResonanceError("singular z-line system", l, m);
    const cplx f = s[i] / d[i];
    lo[i] = f;
    d[i + 1] -= f * u1[i];
    u1[i + 1] -= f * u2[i];
    b[i + 1] -= f * b[i];
  }
  if (std::abs(d[n - 1]) <= kResonanceTol * anorm) throw ResonanceError("singular z-line system", l, m);
  for (Index i = n - 1; i >= 0; --i) {
    cplx v = b[i];
    if (i + 1 < n) v -= u1[i] * x[i + 1];
    if (i + 2 < n) v -= u2[i] * x[i + 2];
    x[i] = v / d[i];
  }
}

}  // namespace detail

/// Solves a tridiagonal system given as spans into x. l, m label the harmonic in errors.
inline void solve_tridiagonal(std::span<const cplx> sub, std::span<const cplx> diag, std::span<const cplx> sup,
                              std::span<const cplx> rhs, std::span<cplx> x, Index l = -1, Index m = -1,
                              OpCounter* ops = nullptr) {
  const Index n = static_cast<Index>(diag.size());
  if (n == 0) return;
  thread_local std::vector<cplx> cp;
  if (static_cast<Index>(cp.size()) < n) cp.resize(static_cast<std::size_t>(n));
  bool ok = true;
  cplx piv = diag[0];
  if (std::abs(piv) <= kResonanceTol * detail::tri_row_norm(sub, diag, sup, 0)) ok = false;
  if (ok) {
    cp[0] = n > 1 ? sup[0] / piv : cplx{0.0, 0.0};
    x[0] = rhs[0] / piv;
    for (Index i = 1; i < n; ++i) {
      piv = diag[i] - sub[i - 1] * cp[i - 1];
      if (std::abs(piv) <= kResonanceTol * detail::tri_row_norm(sub, diag, sup, i)) {
        ok = false;
        break;
      }
      cp[i] = i + 1 < n ? sup[i] / piv : cplx{0.0, 0.0};
      x[i] = (rhs[i] - sub[i - 1] * x[i - 1]) / piv;
    }
  }
  if (ok) {
    for (Index i = n - 2; i >= 0; --i) x[i] -= cp[i] * x[i + 1];
    ok = detail::tri_residual_ok(sub, diag, sup, rhs, x);
  }
  count_ops(ops, 40 * static_cast<std::uint64_t>(n));
  if (!ok) {
    detail::tri_solve_pivoted(sub, diag, sup, rhs, x, l, m);
    if (!detail::tri_residual_ok(sub, diag, sup, rhs, x))
      throw ResonanceError("z-line system residual check failed", l, m);
  }
}

inline std::vector<cplx> solve_tridiagonal(const TridiagonalSystem& sys, Index l = -1, Index m = -1,
                                           OpCounter* ops = nullptr) {
  sys.validate();
  std::vector<cplx> x(sys.diag.size());
  solve_tridiagonal(sys.sub, sys.diag, sys.sup, sys.rhs, x, l, m, ops);
  return x;
}

/// Harmonic z-system  [A_z + (lambda_x + nu_y) S_z + lambda M_z] v = M_z rhs.
/// With sigma = 1, S_z = M_z and the matrix is A_z + (lambda_x + nu_y + lambda) M_z.
inline TridiagonalSystem build_helmholtz_zsystem(cplx lambda_x, cplx nu_y, const ZOperator& z, cplx lambda,
                                                 std::span<const cplx> rhs_tilde) {
  const Index n = z.pencil.size();
  if (static_cast<Index>(rhs_tilde.size()) != n) throw DimensionError("z-system rhs length mismatch");
  TridiagonalSystem s;
  s.sub = z.pencil.A.sub;
  s.sup = z.pencil.A.sup;
  s.diag.resize(static_cast<std::size_t>(n));
  s.rhs.resize(static_cast<std::size_t>(n));
  const cplx shift = lambda_x + nu_y;
  for (Index k = 0; k < n; ++k) {
    s.diag[k] = z.pencil.A.diag[k] + shift * z.S[k] + lambda * z.pencil.M[k];
    s.rhs[k] = z.pencil.M[k] * rhs_tilde[k];
  }
  return s;
}

// ---------------------------------------------------------------------------

using Block2 = Eigen::Matrix2cd;
using Vec2 = Eigen::Vector2cd;

struct BlockTridiagonalSystem {
  std::vector<Block2> sub;   // n-1, block (i+1, i)
  std::vector<Block2> diag;  // n
  std::vector<Block2> sup;   // n-1, block (i, i+1)
  std::vector<Vec2> rhs;     // n

  Index size() const { return static_cast<Index>(diag.size()); }
  void validate() const {
    const auto n = diag.size();
    if (rhs.size() != n || (n > 0 && (sub.size() != n - 1 || sup.size() != n - 1)))
      throw DimensionError("block tridiagonal system: inconsistent lengths");
  }

  Eigen::MatrixXcd dense() const {
    const Index n = size();
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
    for (Index i = 0; i < n; ++i) {
      A.block<2, 2>(2 * i, 2 * i) = diag[i];
      if (i + 1 < n) {
        A.block<2, 2>(2 * i, 2 * i + 2) = sup[i];
        A.block<2, 2>(2 * i + 2, 2 * i) = sub[i];
      }
    }
    return A;
  }
};

namespace detail {

inline double block_inf_norm(const Block2& b) { return b.cwiseAbs().rowwise().sum().maxCoeff(); }

inline bool block_residual_ok(const BlockTridiagonalSystem& s, const std::vector<Vec2>& x) {
  const Index n = s.size();
  double res = 0.0, an = 0.0, xn = 0.0, bn = 0.0;
  for (Index i = 0; i < n; ++i) {
    Vec2 ax = s.diag[i] * x[i];
    double rn = block_inf_norm(s.diag[i]);
    if (i > 0) {
      ax += s.sub[i - 1] * x[i - 1];
      rn += block_inf_norm(s.sub[i - 1]);
    }
    if (i + 1 < n) {
      ax += s.sup[i] * x[i + 1];
      rn += block_inf_norm(s.sup[i]);
    }
    if (!ax.allFinite()) return false;
    res = std::max(res, (ax - s.rhs[i]).cwiseAbs().maxCoeff());
    an = std::max(an, rn);
    xn = std::max(xn, x[i].cwiseAbs().maxCoeff());
    bn = std::max(bn, s.rhs[i].cwiseAbs().maxCoeff());
  }
  return res <= kLineResidualTol * (an * xn + bn);
}

}  // namespace detail

/// Block Thomas recursion; dense partial-pivoting LU fallback when the
/// residual check fails.
inline std::vector<Vec2> solve_block_tridiagonal(const BlockTridiagonalSystem& s, Index l = -1, Index m = -1,
                                                 OpCounter* ops = nullptr) {
  s.validate();
  const Index n = s.size();
  std::vector<Vec2> x(static_cast<std::size_t>(n));
  if (n == 0) return x;
  double anorm = 0.0;
  for (Index i = 0; i < n; ++i) anorm = std::max(anorm, detail::block_inf_norm(s.diag[i]));
  std::vector<Block2> cp(static_cast<std::size_t>(n));
  std::vector<Vec2> dp(static_cast<std::size_t>(n));
  bool ok = true;
  for (Index i = 0; i < n && ok; ++i) {
    Block2 piv = s.diag[i];
    Vec2 r = s.rhs[i];
    if (i > 0) {
      piv -= s.sub[i - 1] * cp[i - 1];
      r -= s.sub[i - 1] * dp[i - 1];
    }
    const double pn = detail::block_inf_norm(piv);
    if (std::abs(piv.determinant()) <= kResonanceTol * pn * pn || pn <= kResonanceTol * anorm) {
      ok = false;
      break;
    }
    const Block2 inv = piv.inverse();
    if (i + 1 < n) cp[i] = inv * s.sup[i];
    dp[i] = inv * r;
  }
  if (ok) {
    x[n - 1] = dp[n - 1];
    for (Index i = n - 2; i >= 0; --i) x[i] = dp[i] - cp[i] * x[i + 1];
    ok = detail::block_residual_ok(s, x);
  }
  count_ops(ops, 250 * static_cast<std::uint64_t>(n));
  if (ok) return x;

  Eigen::MatrixXcd A = s.dense();
  Eigen::VectorXcd b(2 * n);
  for (Index i = 0; i < n; ++i) b.segment<2>(2 * i) = s.rhs[i];
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
  const Eigen::MatrixXcd& U = lu.matrixLU();
  const double an = A.cwiseAbs().rowwise().sum().maxCoeff();
  for (Index i = 0; i < 2 * n; ++i)
    if (std::abs(U(i, i)) <= kResonanceTol * an) throw ResonanceError("singular block z-line system", l, m);
  const Eigen::VectorXcd sol = lu.solve(b);
  for (Index i = 0; i < n; ++i) x[i] = sol.segment<2>(2 * i);
  if (!detail::block_residual_ok(s, x)) throw ResonanceError("block z-line residual check failed", l, m);
  return x;
}

}  // namespace strata
