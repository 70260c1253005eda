#pragma once

// Shared generators and dense reference builders for the test suite.

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "strata/field.hpp"
#include "strata/grid1d.hpp"
#include "strata/helmholtz_ops.hpp"

namespace strata::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double a = -1.0, double b = 1.0) { return std::uniform_real_distribution<double>(a, b)(gen_); }
  Index integer(Index a, Index b) { return std::uniform_int_distribution<Index>(a, b)(gen_); }
  cplx complex() { return {uniform(), uniform()}; }
  bool coin() { return integer(0, 1) == 1; }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

inline Field3D random_field(Dims3 d, Rng& rng) {
  Field3D f(d);
  for (auto& v : f.values()) v = rng.complex();
  return f;
}

/// Random real steps in [lo, hi].
inline Grid1D random_grid(Index cells, Rng& rng, double lo = 0.5, double hi = 2.0) {
  std::vector<cplx> s;
  for (Index i = 0; i < cells; ++i) s.emplace_back(rng.uniform(lo, hi), 0.0);
  return Grid1D::from_steps(s);
}

inline Eigen::MatrixXcd dense(const Tridiagonal& t) {
  const Index n = t.size();
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    A(i, i) = t.diag[i];
    if (i + 1 < n) {
      A(i + 1, i) = t.sub[i];
      A(i, i + 1) = t.sup[i];
    }
  }
  return A;
}

inline Eigen::MatrixXcd diag(const std::vector<cplx>& d) {
  Eigen::VectorXcd v(static_cast<Index>(d.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = d[i];
  return v.asDiagonal();
}

inline Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Dense Kronecker assembly of the separable operator (x slowest, z fastest).
inline Eigen::MatrixXcd dense_operator(const SeparableOperator& op) {
  const auto Ax = dense(op.x.A), Ay = dense(op.y.A), Az = dense(op.z.pencil.A);
  const auto Mx = diag(op.x.M), My = diag(op.y.M), Mz = diag(op.z.pencil.M), S = diag(op.z.S);
  return kron(kron(Ax, My), S) + kron(kron(Mx, Ay), S) + kron(kron(Mx, My), Az) +
         op.lambda * kron(kron(Mx, My), Mz);
}

inline Eigen::VectorXcd to_vector(const Field3D& f) {
  return Eigen::Map<const Eigen::VectorXcd>(f.data(), f.size());
}

inline Field3D to_field(const Eigen::VectorXcd& v, Dims3 d) {
  Field3D f(d);
  for (Index n = 0; n < f.size(); ++n) f.data()[n] = v[n];
  return f;
}

}  // namespace strata::testing
