#pragma once

// Generalised eigenpairs of 1D pencils (A, M) and the horizontal spectral
// transforms built on them.
//
// Bases are normalised with the transpose bilinear form, W^T M W = I, so the
// same code covers real grids and complex-symmetric (PML) pencils. The
// forward transform returns expansion coefficients f~ = (W^T M) f and the
// inverse transform is f = W f~.

#include <fftw3.h>

#include <Eigen/Dense>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strata/field.hpp"
#include "strata/helmholtz_ops.hpp"

namespace strata {

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// DST-I (FFTW RODFT00) of one real line; planning is serialised, execution is reentrant.
class DstPlan {
 public:
  explicit DstPlan(Index n) : n_(n) {
    std::vector<double> in(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan_ = fftw_plan_r2r_1d(static_cast<int>(n), in.data(), out.data(), FFTW_RODFT00,
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan_ == nullptr) throw SpectralError("FFTW could not plan a DST of size " + std::to_string(n));
    double add = 0, mul = 0, fma = 0;
    fftw_flops(plan_, &add, &mul, &fma);
    flops_ = static_cast<std::uint64_t>(add + mul + 2.0 * fma);
  }
  DstPlan(const DstPlan&) = delete;
  DstPlan& operator=(const DstPlan&) = delete;
  ~DstPlan() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }

  void execute(double* in, double* out) const { fftw_execute_r2r(plan_, in, out); }
  Index size() const { return n_; }
  /// Real flops of one execution as reported by the planner.
  std::uint64_t flops() const { return flops_; }

 private:
  Index n_;
  fftw_plan plan_ = nullptr;
  std::uint64_t flops_ = 0;
};

// Real flop charges for complex arithmetic in the cost model.
inline constexpr std::uint64_t kComplexMulAdd = 8;

}  // namespace detail

/// Tolerances every computed basis is checked against.
inline constexpr double kPencilResidualTol = 1e-11;
inline constexpr double kBiorthonormalityTol = 1e-11;

class SpectralBasis {
 public:
  SpectralBasis() = default;

  /// Basis from explicit eigenpairs; eigenvalues[l] belongs to column l of W.
  SpectralBasis(std::vector<cplx> eigenvalues, Eigen::MatrixXcd W, std::vector<cplx> mass, std::string id = "")
      : eigenvalues_(std::move(eigenvalues)), W_(std::move(W)), mass_(std::move(mass)), id_(std::move(id)) {
    if (W_.rows() != W_.cols() || W_.rows() != static_cast<Index>(mass_.size()) ||
        W_.cols() != static_cast<Index>(eigenvalues_.size()))
      throw DimensionError("spectral basis: inconsistent sizes");
    build_forward();
  }

  Index size() const { return static_cast<Index>(mass_.size()); }
  const std::vector<cplx>& eigenvalues() const { return eigenvalues_; }
  cplx eigenvalue(Index l) const { return eigenvalues_[static_cast<std::size_t>(l)]; }
  const Eigen::MatrixXcd& W() const { return W_; }
  /// W^T diag(M)
  const Eigen::MatrixXcd& forward_matrix() const { return WtM_; }
  const std::vector<cplx>& mass() const { return mass_; }
  bool fast() const { return dst_ != nullptr; }
  const std::string& id() const { return id_; }
  void set_id(std::string id) { id_ = std::move(id); }

  /// Uniform constant-coefficient pencil: exact sine modes with a DST fast path.
  static SpectralBasis sine(Index n, double h, std::string id = "") {
    SpectralBasis b;
    b.id_ = std::move(id);
    b.mass_.assign(static_cast<std::size_t>(n), cplx{h, 0.0});
    b.eigenvalues_.resize(static_cast<std::size_t>(n));
    b.W_.resize(n, n);
    const double np1 = static_cast<double>(n + 1);
    const double s = std::sqrt(2.0 / (np1 * h));
    for (Index l = 0; l < n; ++l) {
      const double sn = std::sin(static_cast<double>(l + 1) * std::numbers::pi / (2.0 * np1));
      b.eigenvalues_[l] = -(4.0 / (h * h)) * sn * sn;
      for (Index i = 0; i < n; ++i)
        b.W_(i, l) = s * std::sin(std::numbers::pi * static_cast<double>((i + 1) * (l + 1)) / np1);
    }
    b.build_forward();
    b.dst_ = std::make_shared<detail::DstPlan>(n);
    b.fwd_scale_ = 0.5 * s * h;
    b.inv_scale_ = 0.5 * s;
    return b;
  }

  /// Applies the basis along one strided line of complex values: forward
  /// (W^T M x) or inverse (W x), through the DST when available.
  void apply_line(const cplx* in, Index stride_in, cplx* out, Index stride_out, bool forward,
                  OpCounter* ops = nullptr) const {
    const Index n = size();
    if (fast()) {
      thread_local std::vector<double> buf;
      if (static_cast<Index>(buf.size()) < 4 * n) buf.resize(static_cast<std::size_t>(4 * n));
      double* re = buf.data();
      double* im = re + n;
      double* tre = im + n;
      double* tim = tre + n;
      for (Index i = 0; i < n; ++i) {
        re[i] = in[i * stride_in].real();
        im[i] = in[i * stride_in].imag();
      }
      dst_->execute(re, tre);
      dst_->execute(im, tim);
      const double sc = forward ? fwd_scale_ : inv_scale_;
      for (Index i = 0; i < n; ++i) out[i * stride_out] = sc * cplx{tre[i], tim[i]};
      count_ops(ops, 2 * dst_->flops() + 2 * static_cast<std::uint64_t>(n));
      return;
    }
    const Eigen::MatrixXcd& T = forward ? WtM_ : W_;
    std::vector<cplx> tmp(static_cast<std::size_t>(n));
    for (Index r = 0; r < n; ++r) {
      cplx acc{0.0, 0.0};
      for (Index c = 0; c < n; ++c) acc += T(r, c) * in[c * stride_in];
      tmp[r] = acc;
    }
    for (Index r = 0; r < n; ++r) out[r * stride_out] = tmp[r];
    count_ops(ops, detail::kComplexMulAdd * static_cast<std::uint64_t>(n * n));
  }

  /// max |A W - M W Lambda| relative to |A|_inf |W|_inf.
  double pencil_residual(const Pencil1D& p) const {
    const Index n = size();
    double res = 0.0;
    for (Index l = 0; l < n; ++l) {
      for (Index i = 0; i < n; ++i) {
        cplx aw = p.A.diag[i] * W_(i, l);
        if (i > 0) aw += p.A.sub[i - 1] * W_(i - 1, l);
        if (i + 1 < n) aw += p.A.sup[i] * W_(i + 1, l);
        res = std::max(res, std::abs(aw - p.M[i] * W_(i, l) * eigenvalues_[l]));
      }
    }
    const double wn = W_.cwiseAbs().rowwise().sum().maxCoeff();
    const double an = std::max(p.A.inf_norm(), 1e-300);
    return res / (an * wn);
  }

  /// max |W^T M W - I|
  double biorthonormality_error() const {
    const Eigen::MatrixXcd G = WtM_ * W_;
    return (G - Eigen::MatrixXcd::Identity(size(), size())).cwiseAbs().maxCoeff();
  }

 private:
  void build_forward() {
    WtM_ = W_.transpose();
    for (Index c = 0; c < size(); ++c) WtM_.col(c) *= mass_[c];
  }

  std::vector<cplx> eigenvalues_;
  Eigen::MatrixXcd W_;
  Eigen::MatrixXcd WtM_;
  std::vector<cplx> mass_;
  std::string id_;
  std::shared_ptr<const detail::DstPlan> dst_;
  double fwd_scale_ = 0.0;
  double inv_scale_ = 0.0;
};

namespace detail {

inline bool nearly_equal(cplx a, cplx b) { return std::abs(a - b) <= 1e-13 * std::max(std::abs(a), std::abs(b)); }

/// Returns the step h when the pencil is h^{-1} tridiag(1,-2,1) with M = h I, h real > 0.
inline std::optional<double> uniform_step(const Pencil1D& p) {
  const Index n = p.size();
  const cplx h = p.M[0];
  if (h.imag() != 0.0 || !(h.real() > 0.0)) return std::nullopt;
  for (Index i = 0; i < n; ++i) {
    if (!nearly_equal(p.M[i], h) || !nearly_equal(p.A.diag[i], -2.0 / h)) return std::nullopt;
    if (i + 1 < n && (!nearly_equal(p.A.sub[i], 1.0 / h) || !nearly_equal(p.A.sup[i], 1.0 / h))) return std::nullopt;
  }
  return h.real();
}

/// Modified Gram-Schmidt under the bilinear form <u, v> = u^T M v.
inline void rebiorthogonalize(Eigen::MatrixXcd& W, const std::vector<cplx>& M) {
  const Index n = W.rows();
  const auto form = [&](Index a, Index b) {
    cplx s{0.0, 0.0};
    for (Index i = 0; i < n; ++i) s += W(i, a) * M[i] * W(i, b);
    return s;
  };
  for (Index c = 0; c < W.cols(); ++c) {
    for (Index p = 0; p < c; ++p) W.col(c) -= form(p, c) * W.col(p);
    W.col(c) /= std::sqrt(form(c, c));
  }
}

}  // namespace detail

/// Full eigenpair set of the pencil (A, M), W^T M W = I, eigenvalues sorted by
/// decreasing real part. Uniform pencils get exact sine modes and the DST path
/// unless allow_fast is false.
inline SpectralBasis eig_1d(const Pencil1D& p, bool allow_fast = true, std::string id = "") {
  const Index n = p.size();
  if (n < 1) throw DimensionError("eig_1d: empty pencil");
  if (static_cast<Index>(p.M.size()) != n) throw DimensionError("eig_1d: mass size mismatch");
  for (const auto& m : p.M)
    if (m == cplx{0.0, 0.0}) throw SpectralError("eig_1d: singular mass matrix");

  if (allow_fast) {
    if (auto h = detail::uniform_step(p)) {
      SpectralBasis b = SpectralBasis::sine(n, *h, std::move(id));
      if (b.pencil_residual(p) > kPencilResidualTol) throw SpectralError("eig_1d: sine basis failed the pencil check");
      return b;
    }
  }

  bool real = true;
  for (Index i = 0; i < n && real; ++i) {
    real = p.M[i].imag() == 0.0 && p.M[i].real() > 0.0 && p.A.diag[i].imag() == 0.0 &&
           (i + 1 >= n || (p.A.sub[i].imag() == 0.0 && p.A.sup[i].imag() == 0.0));
  }

  std::vector<cplx> isqm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) isqm[i] = 1.0 / std::sqrt(p.M[i]);

  std::vector<cplx> values(static_cast<std::size_t>(n));
  Eigen::MatrixXcd V(n, n);
  if (real) {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      B(i, i) = p.A.diag[i].real() * isqm[i].real() * isqm[i].real();
      if (i + 1 < n) {
        const double off = 0.5 * (p.A.sub[i].real() + p.A.sup[i].real()) * isqm[i].real() * isqm[i + 1].real();
        B(i, i + 1) = off;
        B(i + 1, i) = off;
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
    if (es.info() != Eigen::Success) throw SpectralError("eig_1d: symmetric eigensolver failed");
    for (Index l = 0; l < n; ++l) values[l] = es.eigenvalues()(l);
    V = es.eigenvectors().cast<cplx>();
  } else {
    Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      B(i, i) = p.A.diag[i] * isqm[i] * isqm[i];
      if (i + 1 < n) {
        B(i, i + 1) = p.A.sup[i] * isqm[i] * isqm[i + 1];
        B(i + 1, i) = p.A.sub[i] * isqm[i] * isqm[i + 1];
      }
    }
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(B);
    if (es.info() != Eigen::Success) throw SpectralError("eig_1d: complex eigensolver failed");
    for (Index l = 0; l < n; ++l) values[l] = es.eigenvalues()(l);
    V = es.eigenvectors();
    for (Index l = 0; l < n; ++l) {
      const cplx nrm = std::sqrt(cplx((V.col(l).transpose() * V.col(l)).value()));
      if (std::abs(nrm) < 1e-8) throw SpectralError("eig_1d: quasi-null eigenvector (defective pencil)");
      V.col(l) /= nrm;
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index l = 0; l < n; ++l) order[l] = l;
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (values[a].real() != values[b].real()) return values[a].real() > values[b].real();
    return values[a].imag() > values[b].imag();
  });

  std::vector<cplx> sorted(static_cast<std::size_t>(n));
  Eigen::MatrixXcd W(n, n);
  for (Index c = 0; c < n; ++c) {
    const Index l = order[c];
    sorted[c] = values[l];
    for (Index i = 0; i < n; ++i) W(i, c) = isqm[i] * V(i, l);
    // Deterministic sign: largest-magnitude entry has positive real part.
    Index imax = 0;
    for (Index i = 1; i < n; ++i)
      if (std::abs(W(i, c)) > std::abs(W(imax, c)) * (1.0 + 1e-12)) imax = i;
    if (W(imax, c).real() < 0.0) W.col(c) *= -1.0;
  }

  SpectralBasis b(std::move(sorted), std::move(W), p.M, std::move(id));
  if (b.biorthonormality_error() > kBiorthonormalityTol) {
    Eigen::MatrixXcd Wr = b.W();
    detail::rebiorthogonalize(Wr, p.M);
    b = SpectralBasis(b.eigenvalues(), std::move(Wr), p.M, b.id());
  }
  if (b.pencil_residual(p) > kPencilResidualTol)
    throw SpectralError("eig_1d: eigenvector residual above tolerance (defective pencil?)");
  if (b.biorthonormality_error() > kBiorthonormalityTol)
    throw SpectralError("eig_1d: basis is not biorthonormal");
  return b;
}

// ---------------------------------------------------------------------------
// Transforms. Coefficient arrays are Field3D with (l, m, k) indexing.

namespace detail {

/// Applies b along axis 0 (x) of f, in place.
inline void transform_x(Field3D& f, const SpectralBasis& b, bool forward, OpCounter* ops) {
  const Dims3 d = f.dims();
  if (b.size() != d.nx) throw DimensionError("transform: x basis size mismatch");
  const Index cols = d.ny * d.nz;
  if (cols == 0 || d.nx == 0) return;
  if (b.fast()) {
    for (Index c = 0; c < cols; ++c) b.apply_line(f.data() + c, cols, f.data() + c, cols, forward, ops);
    return;
  }
  using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<RowMat> F(f.data(), d.nx, cols);
  const Eigen::MatrixXcd& T = forward ? b.forward_matrix() : b.W();
  RowMat G = T * F;
  F = G;
  count_ops(ops, kComplexMulAdd * static_cast<std::uint64_t>(d.nx * d.nx * cols));
}

/// Applies b along axis 1 (y) of f, in place.
inline void transform_y(Field3D& f, const SpectralBasis& b, bool forward, OpCounter* ops) {
  const Dims3 d = f.dims();
  if (b.size() != d.ny) throw DimensionError("transform: y basis size mismatch");
  if (d.ny == 0 || d.nz == 0) return;
  using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::MatrixXcd& T = forward ? b.forward_matrix() : b.W();
  for (Index i = 0; i < d.nx; ++i) {
    cplx* slab = f.line(i, 0);
    if (b.fast()) {
      for (Index k = 0; k < d.nz; ++k) b.apply_line(slab + k, d.nz, slab + k, d.nz, forward, ops);
    } else {
      Eigen::Map<RowMat> S(slab, d.ny, d.nz);
      RowMat G = T * S;
      S = G;
    }
  }
  if (!b.fast()) count_ops(ops, kComplexMulAdd * static_cast<std::uint64_t>(d.nx * d.ny * d.ny * d.nz));
}

}  // namespace detail

/// Expansion coefficients (W_x^T M_x) (x) (W_y^T M_y) (x) I applied to f.
inline Field3D forward_2d(const Field3D& f, const SpectralBasis& bx, const SpectralBasis& by, OpCounter* ops = nullptr) {
  Field3D c = f;
  detail::transform_x(c, bx, true, ops);
  detail::transform_y(c, by, true, ops);
  return c;
}

/// W_x (x) W_y (x) I applied to coefficients.
inline Field3D inverse_2d(const Field3D& coeffs, const SpectralBasis& bx, const SpectralBasis& by,
                          OpCounter* ops = nullptr) {
  Field3D f = coeffs;
  detail::transform_y(f, by, false, ops);
  detail::transform_x(f, bx, false, ops);
  return f;
}

/// Union of full x-planes (fixed i) and y-planes (fixed j), all k.
struct PlaneSet {
  std::vector<Index> x;
  std::vector<Index> y;

  bool empty() const { return x.empty() && y.empty(); }
  bool contains(Index i, Index j) const {
    return std::find(x.begin(), x.end(), i) != x.end() || std::find(y.begin(), y.end(), j) != y.end();
  }
};

/// forward_2d of a field supported on the plane set, touching only that support.
/// Cost O((|x|(n_y^2 + n_x n_y) + |y|(n_x^2 + n_x n_y)) n_z).
inline Field3D forward_2d_sparse(const Field3D& f, const PlaneSet& planes, const SpectralBasis& bx,
                                 const SpectralBasis& by, OpCounter* ops = nullptr, bool check_support = true) {
  const Dims3 d = f.dims();
  if (bx.size() != d.nx || by.size() != d.ny) throw DimensionError("forward_2d_sparse: basis size mismatch");
  for (Index i : planes.x)
    if (i < 0 || i >= d.nx) throw DimensionError("forward_2d_sparse: x-plane out of range");
  for (Index j : planes.y)
    if (j < 0 || j >= d.ny) throw DimensionError("forward_2d_sparse: y-plane out of range");
  std::vector<unsigned char> in_x(static_cast<std::size_t>(d.nx), 0), in_y(static_cast<std::size_t>(d.ny), 0);
  for (Index i : planes.x) in_x[i] = 1;
  for (Index j : planes.y) in_y[j] = 1;
  if (check_support) {
    for (Index i = 0; i < d.nx; ++i) {
      if (in_x[i]) continue;
      for (Index j = 0; j < d.ny; ++j) {
        if (in_y[j]) continue;
        const cplx* ln = f.line(i, j);
        for (Index k = 0; k < d.nz; ++k)
          if (ln[k] != cplx{0.0, 0.0})
            throw Error("forward_2d_sparse: field has support outside the declared interface set");
      }
    }
  }

  Field3D out(d);
  const auto& Mx = bx.mass();
  const auto& My = by.mass();
  std::vector<cplx> tmp(static_cast<std::size_t>(std::max(d.nx, d.ny) * d.nz));
  const Eigen::MatrixXcd& Wx = bx.W();
  const Eigen::MatrixXcd& Wy = by.W();

  for (Index i : planes.x) {
    // y-transform of the plane, then spread over l with W_x[i, l] M_x[i].
    for (Index k = 0; k < d.nz; ++k) by.apply_line(f.line(i, 0) + k, d.nz, tmp.data() + k, d.nz, true, ops);
    for (Index l = 0; l < d.nx; ++l) {
      const cplx w = Wx(i, l) * Mx[i];
      for (Index m = 0; m < d.ny; ++m) {
        cplx* o = out.line(l, m);
        const cplx* t = tmp.data() + m * d.nz;
        for (Index k = 0; k < d.nz; ++k) o[k] += w * t[k];
      }
    }
    count_ops(ops, detail::kComplexMulAdd * static_cast<std::uint64_t>(d.nx * d.ny * d.nz));
  }
  std::vector<cplx> col(static_cast<std::size_t>(d.nx * d.nz));
  for (Index j : planes.y) {
    // Crossing nodes were already taken by the x-planes.
    for (Index i = 0; i < d.nx; ++i)
      for (Index k = 0; k < d.nz; ++k) col[i * d.nz + k] = in_x[i] ? cplx{0.0, 0.0} : f(i, j, k);
    for (Index k = 0; k < d.nz; ++k) bx.apply_line(col.data() + k, d.nz, tmp.data() + k, d.nz, true, ops);
    for (Index m = 0; m < d.ny; ++m) {
      const cplx w = Wy(j, m) * My[j];
      for (Index l = 0; l < d.nx; ++l) {
        cplx* o = out.line(l, m);
        const cplx* t = tmp.data() + l * d.nz;
        for (Index k = 0; k < d.nz; ++k) o[k] += w * t[k];
      }
    }
    count_ops(ops, detail::kComplexMulAdd * static_cast<std::uint64_t>(d.nx * d.ny * d.nz));
  }
  return out;
}

/// inverse_2d evaluated only on a plane set; other entries of the result are zero.
/// Cost O((|x|(n_x n_y + n_y^2) + |y|(n_x n_y + n_x^2)) n_z).
inline Field3D inverse_2d_on_planes(const Field3D& coeffs, const PlaneSet& planes, const SpectralBasis& bx,
                                   const SpectralBasis& by, OpCounter* ops = nullptr) {
  const Dims3 d = coeffs.dims();
  if (bx.size() != d.nx || by.size() != d.ny) throw DimensionError("inverse_2d_on_planes: basis size mismatch");
  Field3D out(d);
  const Eigen::MatrixXcd& Wx = bx.W();
  const Eigen::MatrixXcd& Wy = by.W();
  std::vector<cplx> tmp(static_cast<std::size_t>(std::max(d.nx, d.ny) * d.nz));
  for (Index i : planes.x) {
    if (i < 0 || i >= d.nx) throw DimensionError("inverse_2d_on_planes: x-plane out of range");
    std::fill(tmp.begin(), tmp.begin() + d.ny * d.nz, cplx{0.0, 0.0});
    for (Index l = 0; l < d.nx; ++l) {
      const cplx w = Wx(i, l);
      for (Index m = 0; m < d.ny; ++m) {
        const cplx* c = coeffs.line(l, m);
        cplx* t = tmp.data() + m * d.nz;
        for (Index k = 0; k < d.nz; ++k) t[k] += w * c[k];
      }
    }
    count_ops(ops, detail::kComplexMulAdd * static_cast<std::uint64_t>(d.nx * d.ny * d.nz));
    for (Index k = 0; k < d.nz; ++k) by.apply_line(tmp.data() + k, d.nz, out.line(i, 0) + k, d.nz, false, ops);
  }
  for (Index j : planes.y) {
    if (j < 0 || j >= d.ny) throw DimensionError("inverse_2d_on_planes: y-plane out of range");
    std::fill(tmp.begin(), tmp.begin() + d.nx * d.nz, cplx{0.0, 0.0});
    for (Index m = 0; m < d.ny; ++m) {
      const cplx w = Wy(j, m);
      for (Index l = 0; l < d.nx; ++l) {
        const cplx* c = coeffs.line(l, m);
        cplx* t = tmp.data() + l * d.nz;
        for (Index k = 0; k < d.nz; ++k) t[k] += w * c[k];
      }
    }
    count_ops(ops, detail::kComplexMulAdd * static_cast<std::uint64_t>(d.nx * d.ny * d.nz));
    std::vector<cplx> col(static_cast<std::size_t>(d.nx * d.nz));
    for (Index k = 0; k < d.nz; ++k) bx.apply_line(tmp.data() + k, d.nz, col.data() + k, d.nz, false, ops);
    for (Index i = 0; i < d.nx; ++i)
      for (Index k = 0; k < d.nz; ++k) out(i, j, k) = col[i * d.nz + k];
  }
  return out;
}

}  // namespace strata
