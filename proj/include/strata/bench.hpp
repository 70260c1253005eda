#pragma once

// Size sweeps over the horizontal grid with instrumented operation counts and
// least-squares scaling fits.

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "strata/cyclic.hpp"

namespace strata {

enum class BenchRegime {
  fft,    // uniform core, graded tails and PML, three blocks per direction
  dense,  // non-uniform steps everywhere, sqrt(N) blocks per direction
};

inline const char* to_string(BenchRegime r) { return r == BenchRegime::fft ? "fft" : "dense"; }

struct BenchRow {
  BenchRegime regime = BenchRegime::fft;
  Index n = 0;  // nominal size per horizontal direction
  Dims3 dims;   // unknowns
  double plan_seconds = 0.0;
  double solve_seconds = 0.0;
  std::uint64_t ops = 0;
  std::array<std::uint64_t, kCyclicSteps> step_ops{};
  double residual = 0.0;
};

/// Horizontal grid with n unknowns for a regime. The fft regime has a uniform
/// core and ceil(log2 n) graded cells plus two PML cells on each side; the
/// dense regime has non-uniform steps everywhere.
inline Grid1D bench_grid(BenchRegime r, Index n) {
  if (r == BenchRegime::fft) {
    const Index tail = static_cast<Index>(std::ceil(std::log2(static_cast<double>(n))));
    const std::vector<cplx> pml{cplx{2.0, 2.0}, cplx{2.0, 4.0}};
    const Index core_cells = n + 1 - 2 * (tail + static_cast<Index>(pml.size()));
    if (core_cells < 2) throw GridError("bench size too small for the fft regime");
    return build_grid(static_cast<double>(core_cells), 1.0, tail, 1.4, pml);
  }
  if (n < 1) throw GridError("bench size must be positive");
  std::vector<cplx> steps;
  for (Index i = 0; i <= n; ++i) steps.emplace_back(1.0 + 0.4 * std::sin(1.7 * static_cast<double>(i)), 0.0);
  return Grid1D::from_steps(steps);
}

inline BenchRow run_bench_case(BenchRegime r, Index n, Index nz, int threads = 1) {
  const Grid1D gx = bench_grid(r, n), gy = bench_grid(r, n);
  const Grid1D gz = Grid1D::uniform(nz + 1, 1.0);
  const std::vector<double> layers{0.5 * static_cast<double>(nz + 1)};
  const std::vector<cplx> sigma{1.0, 3.0};
  const LayeredMedium medium = LayeredMedium::from_layers(gz, layers, sigma, cplx{-0.3, 0.1});
  const BlockPartition px = r == BenchRegime::fft ? partition_three(gx) : partition_sqrt(gx);
  const BlockPartition py = r == BenchRegime::fft ? partition_three(gy) : partition_sqrt(gy);

  BenchRow row;
  row.regime = r;
  row.n = n;
  const auto t0 = std::chrono::steady_clock::now();
  PlanOptions popt;
  popt.threads = threads;
  const SolverPlan p = plan(gx, gy, gz, px, py, medium, popt);
  const auto t1 = std::chrono::steady_clock::now();
  row.dims = p.dims();
  Field3D f(row.dims);
  // deterministic smooth-plus-oscillating source
  for (Index i = 0; i < row.dims.nx; ++i)
    for (Index j = 0; j < row.dims.ny; ++j)
      for (Index k = 0; k < row.dims.nz; ++k)
        f(i, j, k) = cplx{std::sin(0.3 * static_cast<double>(i + 2 * j + 3 * k)), std::cos(0.2 * static_cast<double>(i * j + k))};
  SolveReport rep;
  SolveOptions sopt;
  sopt.threads = threads;
  solve(p, f, &rep, sopt);
  const auto t2 = std::chrono::steady_clock::now();
  row.plan_seconds = std::chrono::duration<double>(t1 - t0).count();
  row.solve_seconds = std::chrono::duration<double>(t2 - t1).count();
  row.ops = rep.total_ops();
  row.step_ops = rep.step_ops;
  row.residual = rep.residual;
  return row;
}

/// Least-squares slope of log(y) against log(x).
inline double fit_exponent(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("fit_exponent: need at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct ScalingFit {
  double exponent = 0.0;  // in P = N_x N_y
  bool log_modeled = false;
};

/// Exponent of the op count in P = N_x N_y. With log_factor the count is
/// first divided by log(P), fitting c P^a log(P).
inline ScalingFit fit_rows(const std::vector<BenchRow>& rows, bool log_factor) {
  std::vector<double> x, y;
  for (const auto& r : rows) {
    const double P = static_cast<double>(r.dims.nx * r.dims.ny);
    x.push_back(P);
    const double per_z = static_cast<double>(r.ops) / static_cast<double>(r.dims.nz);
    y.push_back(log_factor ? per_z / std::log(P) : per_z);
  }
  return {fit_exponent(x, y), log_factor};
}

}  // namespace strata
