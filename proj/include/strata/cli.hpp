#pragma once

// Batch front-end: solve, verify and bench commands driven by a model config.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "strata/bench.hpp"
#include "strata/config.hpp"
#include "strata/io.hpp"

namespace strata {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitParse = 2,
  kExitResonance = 3,
  kExitTolerance = 4,
  kExitOracleCap = 5,
};

struct HelmholtzModel {
  Grid1D gx, gy, gz;
  LayeredMedium medium;
  BlockPartition px, py;
  Field3D f;
};

struct MaxwellModel {
  LebedevGrid grid;
  MaxwellMedium medium;
  BlockPartition px, py;
  VectorField f;
};

namespace detail {

inline FieldFile read_source_file(const SourceSpec& s, const std::filesystem::path& base, ProblemKind kind, Dims3 dims,
                                  std::size_t comps) {
  std::filesystem::path p(s.path);
  if (p.is_relative()) p = base / p;
  FieldFile f = read_field(p.string());
  if (f.kind != kind || !(f.dims == dims) || f.components.size() != comps)
    throw ConfigError("config: /source/file: field file does not match the problem kind or grid");
  return f;
}

inline BlockPartition scalar_partition(const std::string& how, const Grid1D& g) {
  if (how == "three") return partition_three(g);
  if (how == "sqrt") return partition_sqrt(g);
  return BlockPartition::single(g.nodes());
}

}  // namespace detail

/// Grids, medium, partitions and right-hand side of a Helmholtz config.
/// Relative source paths resolve against `base`.
inline HelmholtzModel build_helmholtz(const ModelConfig& c, const std::filesystem::path& base = ".") {
  if (c.problem != ProblemKind::helmholtz) throw ConfigError("config: /problem: expected helmholtz");
  HelmholtzModel m;
  try {
    m.gx = build_axis(c.axes[0]);
    m.gy = build_axis(c.axes[1]);
    m.gz = build_axis(c.axes[2]);
    m.medium = LayeredMedium::from_layers(m.gz, c.interfaces, c.sigma, c.lambda);
    m.px = detail::scalar_partition(c.partition, m.gx);
    m.py = detail::scalar_partition(c.partition, m.gy);
  } catch (const GridError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const Dims3 d{m.gx.unknowns(), m.gy.unknowns(), m.gz.unknowns()};
  m.f = Field3D(d);
  switch (c.source.kind) {
    case SourceKind::zero: break;
    case SourceKind::point: {
      const auto& s = c.source;
      const Index i = nearest_node(m.gx.coordinates(), s.location[0], 1, m.gx.nodes() - 2);
      const Index j = nearest_node(m.gy.coordinates(), s.location[1], 1, m.gy.nodes() - 2);
      const Index k = nearest_node(m.gz.coordinates(), s.location[2], 1, m.gz.nodes() - 2);
      const cplx vol = control_volumes(m.gx)[i] * control_volumes(m.gy)[j] * control_volumes(m.gz)[k];
      m.f(i - 1, j - 1, k - 1) = s.moment[0] / vol;
      break;
    }
    case SourceKind::random: {
      SourceRng rng(c.source.seed);
      for (auto& v : m.f.values()) v = rng.complex();
      break;
    }
    case SourceKind::file:
      m.f = detail::read_source_file(c.source, base, ProblemKind::helmholtz, d, 1).components[0];
      break;
  }
  return m;
}

/// Lebedev grid, medium, aligned partitions and right-hand side of a Maxwell
/// config. Point sources are current dipoles on the nearest R node.
inline MaxwellModel build_maxwell(const ModelConfig& c, const std::filesystem::path& base = ".") {
  if (c.problem != ProblemKind::maxwell) throw ConfigError("config: /problem: expected maxwell");
  MaxwellModel m;
  try {
    m.grid = LebedevGrid(build_axis(c.axes[0]), build_axis(c.axes[1]), build_axis(c.axes[2]));
    m.medium = MaxwellMedium::from_layers(m.grid.gz(), c.interfaces, c.rho, c.mu, c.omega);
    m.medium.validate(m.grid.gz());
    const auto part = [&](const Grid1D& g) {
      if (c.partition == "none") return BlockPartition::single(g.nodes());
      return align_for_maxwell(c.partition == "three" ? partition_three(g) : partition_sqrt(g));
    };
    m.px = part(m.grid.gx());
    m.py = part(m.grid.gy());
  } catch (const GridError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const Dims3 d = m.grid.nodes();
  m.f = VectorField(d);
  switch (c.source.kind) {
    case SourceKind::zero: break;
    case SourceKind::point: {
      const auto& s = c.source;
      const Index i = nearest_node(m.grid.coords(0), s.location[0], 1, d.nx - 2);
      const Index j = nearest_node(m.grid.coords(1), s.location[1], 1, d.ny - 2);
      Index k = nearest_node(m.grid.coords(2), s.location[2], 1, d.nz - 2);
      if (LebedevGrid::parity(i, j, k) == Parity::P) k += k + 1 < d.nz - 1 ? 1 : -1;
      VectorField J(d);
      for (int a = 0; a < 3; ++a) J[a](i, j, k) = s.moment[a];
      m.f = assemble_maxwell_rhs(J, m.medium, m.grid);
      break;
    }
    case SourceKind::random: {
      SourceRng rng(c.source.seed);
      for (int a = 0; a < 3; ++a)
        for (auto& v : m.f[a].values()) v = rng.complex();
      restrict_to(m.f, m.grid, Parity::P);
      break;
    }
    case SourceKind::file: {
      FieldFile ff = detail::read_source_file(c.source, base, ProblemKind::maxwell, d, 3);
      for (int a = 0; a < 3; ++a) m.f[a] = std::move(ff.components[a]);
      restrict_to(m.f, m.grid, Parity::P);
      break;
    }
  }
  return m;
}

/// max |A_h H - f| / max |f| over the interior P nodes (0 for f = 0).
inline double maxwell_residual(const MaxwellModel& m, const VectorField& H) {
  const VectorField r = apply_curl_curl(H, m.medium, m.grid);
  const double fn = m.f.max_abs();
  return fn == 0.0 ? r.max_abs() : max_abs_diff(r, m.f) / fn;
}

struct RunOptions {
  int threads = 1;
  std::string output_dir;  // overrides the config when set
  std::vector<Index> sizes;  // bench sweep override
};

namespace detail {

struct SolveOutcome {
  FieldFile field;
  double residual = 0.0;
  Index blocks = 0;
  std::array<std::uint64_t, kCyclicSteps> step_ops{};
  std::array<double, kCyclicSteps> step_seconds{};
  double seconds = 0.0;
  std::vector<cplx> xs, ys;
  Index slice_k = 0;
};

inline SolveOutcome run_solver(const ModelConfig& c, const std::filesystem::path& base, int threads) {
  SolveOutcome o;
  const auto t0 = std::chrono::steady_clock::now();
  if (c.problem == ProblemKind::helmholtz) {
    const HelmholtzModel m = build_helmholtz(c, base);
    PlanOptions po;
    po.threads = threads;
    SolveOptions so;
    so.threads = threads;
    const SolverPlan p = plan(m.gx, m.gy, m.gz, m.px, m.py, m.medium, po);
    SolveReport rep;
    Field3D u = solve(p, m.f, &rep, so);
    o.residual = rep.residual;
    o.blocks = rep.blocks;
    o.step_ops = rep.step_ops;
    o.step_seconds = rep.step_seconds;
    o.field = {ProblemKind::helmholtz, u.dims(), {std::move(u)}};
    const auto cx = m.gx.coordinates(), cy = m.gy.coordinates();
    o.xs.assign(cx.begin() + 1, cx.end() - 1);
    o.ys.assign(cy.begin() + 1, cy.end() - 1);
  } else {
    const MaxwellModel m = build_maxwell(c, base);
    const MaxwellCyclicPlan p = plan_maxwell(m.grid, m.medium, m.px, m.py, threads);
    VectorField H = solve_maxwell_cyclic(p, m.f, nullptr, threads);
    o.residual = maxwell_residual(m, H);
    o.blocks = static_cast<Index>(p.blocks.size());
    o.field = {ProblemKind::maxwell, H.dims(), {std::move(H[0]), std::move(H[1]), std::move(H[2])}};
    o.xs = m.grid.coords(0);
    o.ys = m.grid.coords(1);
  }
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.slice_k = o.field.dims.nz / 2;
  return o;
}

inline void write_reports(const std::filesystem::path& dir, const ModelConfig& c, const SolveOutcome& o, bool ok,
                          int threads) {
  const char* kind = c.problem == ProblemKind::helmholtz ? "helmholtz" : "maxwell";
  nlohmann::json j{{"problem", kind},
                   {"dims", {o.field.dims.nx, o.field.dims.ny, o.field.dims.nz}},
                   {"partition", c.partition},
                   {"blocks", o.blocks},
                   {"threads", threads},
                   {"residual", o.residual},
                   {"tolerance", c.residual_tol},
                   {"status", ok ? "ok" : "tolerance_exceeded"},
                   {"step_ops", o.step_ops},
                   {"step_seconds", o.step_seconds},
                   {"seconds", o.seconds},
                   {"field", "field.lcrf"},
                   {"slice", {{"file", "slice.csv"}, {"k", o.slice_k}}}};
  std::ofstream js(dir / "report.json");
  js << j.dump(2) << "\n";

  std::ofstream txt(dir / "report.txt");
  txt << "problem    " << kind << "\n"
      << "dims       " << o.field.dims.nx << " x " << o.field.dims.ny << " x " << o.field.dims.nz << "\n"
      << "partition  " << c.partition << " (" << o.blocks << " blocks)\n"
      << "threads    " << threads << "\n"
      << std::scientific << std::setprecision(3) << "residual   " << o.residual << "\n"
      << "tolerance  " << c.residual_tol << "\n"
      << "status     " << (ok ? "ok" : "tolerance exceeded") << "\n"
      << std::defaultfloat << std::setprecision(6) << "seconds    " << o.seconds << "\n";
  if (c.problem == ProblemKind::helmholtz) {
    txt << "step  ops            seconds\n";
    for (int s = 0; s < kCyclicSteps; ++s)
      txt << (s + 1) << "     " << std::setw(14) << std::left << o.step_ops[s] << " " << o.step_seconds[s] << "\n";
  }
}

inline std::filesystem::path output_path(const ModelConfig& c, const RunOptions& r) {
  return r.output_dir.empty() ? std::filesystem::path(c.output_dir) : std::filesystem::path(r.output_dir);
}

}  // namespace detail

/// Solves the configured problem and writes field.lcrf, slice.csv,
/// report.txt and report.json.
inline int cmd_solve(const ModelConfig& c, const std::filesystem::path& base, const RunOptions& r, std::ostream& out) {
  const detail::SolveOutcome o = detail::run_solver(c, base, r.threads);
  const bool ok = o.residual <= c.residual_tol;
  const std::filesystem::path dir = detail::output_path(c, r);
  std::filesystem::create_directories(dir);
  write_field((dir / "field.lcrf").string(), o.field);
  write_csv_slice((dir / "slice.csv").string(), o.field, o.slice_k, o.xs, o.ys);
  detail::write_reports(dir, c, o, ok, r.threads);
  out << "residual " << std::scientific << std::setprecision(3) << o.residual << " (tolerance " << c.residual_tol << "), "
      << (ok ? "ok" : "tolerance exceeded") << "; wrote " << dir.string() << "\n"
      << std::defaultfloat;
  return ok ? kExitOk : kExitTolerance;
}

/// Runs the fast solver and the sparse direct oracle on the configured
/// problem and compares them.
inline int cmd_verify(const ModelConfig& c, const std::filesystem::path& base, const RunOptions& r, std::ostream& out) {
  double diff = 0.0;
  if (c.problem == ProblemKind::helmholtz) {
    const HelmholtzModel m = build_helmholtz(c, base);
    const Field3D ref = oracle_solve_helmholtz(m.gx, m.gy, m.gz, m.medium, m.f, c.oracle_cap);
    PlanOptions po;
    po.threads = r.threads;
    SolveOptions so;
    so.threads = r.threads;
    const Field3D u = solve(plan(m.gx, m.gy, m.gz, m.px, m.py, m.medium, po), m.f, nullptr, so);
    diff = relative_inf_error(u, ref);
  } else {
    const MaxwellModel m = build_maxwell(c, base);
    const VectorField ref = oracle_solve_maxwell(m.grid, m.medium, m.f, c.oracle_cap);
    const VectorField H = solve_maxwell_cyclic(plan_maxwell(m.grid, m.medium, m.px, m.py, r.threads), m.f, nullptr, r.threads);
    diff = relative_inf_error(H, ref);
  }
  const bool ok = diff <= c.verify_tol;
  out << "relative inf-norm difference " << std::scientific << std::setprecision(3) << diff << " (tolerance "
      << c.verify_tol << "), " << (ok ? "ok" : "tolerance exceeded") << "\n"
      << std::defaultfloat;
  return ok ? kExitOk : kExitTolerance;
}

/// Size sweep per regime with a table, bench.csv and fitted exponents in
/// P = N_x N_y.
inline int cmd_bench(const ModelConfig& c, const RunOptions& r, std::ostream& out, std::ostream& err) {
  const std::vector<Index> sizes = r.sizes.empty() ? c.bench.sizes : r.sizes;
  const std::filesystem::path dir = detail::output_path(c, r);
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "bench.csv");
  csv << "regime,n,nx,ny,nz,plan_seconds,solve_seconds,ops";
  for (int s = 1; s <= kCyclicSteps; ++s) csv << ",step" << s << "_ops";
  csv << "\n";
  out << "regime      n     nx     ny   nz    plan s   solve s            ops\n";
  for (const auto& name : c.bench.regimes) {
    const BenchRegime reg = name == "fft" ? BenchRegime::fft : BenchRegime::dense;
    std::vector<BenchRow> rows;
    for (Index n : sizes) {
      const BenchRow row = run_bench_case(reg, n, c.bench.nz, r.threads);
      rows.push_back(row);
      out << std::left << std::setw(7) << name << std::right << std::setw(6) << n << std::setw(7) << row.dims.nx
          << std::setw(7) << row.dims.ny << std::setw(5) << row.dims.nz << std::fixed << std::setprecision(4)
          << std::setw(10) << row.plan_seconds << std::setw(10) << row.solve_seconds << std::setw(15) << row.ops << "\n"
          << std::defaultfloat;
      csv << name << "," << n << "," << row.dims.nx << "," << row.dims.ny << "," << row.dims.nz << "," << row.plan_seconds
          << "," << row.solve_seconds << "," << row.ops;
      for (auto v : row.step_ops) csv << "," << v;
      csv << "\n";
    }
    if (rows.size() < 2) {
      err << "warning: " << name << ": a single size gives no scaling fit\n";
      continue;
    }
    const ScalingFit raw = fit_rows(rows, false), logm = fit_rows(rows, true);
    out << std::fixed << std::setprecision(3) << name << ": op-count exponent in P = Nx*Ny: " << raw.exponent
        << " (with log P factor removed: " << logm.exponent << ")\n"
        << std::defaultfloat;
  }
  return kExitOk;
}

/// Entry point of the strata executable.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Fast direct Helmholtz and Maxwell solver for layered media", "strata"};
  app.require_subcommand(1);
  std::string config_path;
  RunOptions run;
  run.threads = default_threads();
  bool dump = false;
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : std::vector<std::pair<const char*, const char*>>{
           {"solve", "solve the configured problem and write field and reports"},
           {"verify", "compare the fast solver with the direct oracle"},
           {"bench", "op-count and timing sweep with scaling fits"}}) {
    CLI::App* s = app.add_subcommand(name, help);
    auto* opt = s->add_option("--config", config_path, "model config (JSON)");
    if (std::string(name) != "bench") opt->required();
    s->add_option("--threads", run.threads, "worker threads")->check(CLI::PositiveNumber);
    s->add_option("--output", run.output_dir, "output directory (overrides the config)");
    s->add_flag("--dump-effective-config", dump, "print the effective config and exit");
    if (std::string(name) == "bench")
      s->add_option("--sizes", run.sizes, "comma-separated sizes per horizontal direction")->delimiter(',')->check(CLI::PositiveNumber);
    subs.push_back(s);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kExitOk : kExitParse;
  }

  try {
    ModelConfig c;
    std::filesystem::path base = ".";
    if (!config_path.empty()) {
      c = load_config(config_path);
      base = std::filesystem::path(config_path).parent_path();
      if (base.empty()) base = ".";
    }
    if (!run.output_dir.empty()) c.output_dir = run.output_dir;
    if (dump) {
      out << config_to_json(c).dump(2) << "\n";
      return kExitOk;
    }
    if (subs[0]->parsed()) return cmd_solve(c, base, run, out);
    if (subs[1]->parsed()) return cmd_verify(c, base, run, out);
    return cmd_bench(c, run, out, err);
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kExitParse;
  } catch (const ResonanceError& e) {
    err << "resonance: " << e.what() << "\n";
    return kExitResonance;
  } catch (const OracleCapError& e) {
    err << e.what() << "\n";
    return kExitOracleCap;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace strata
