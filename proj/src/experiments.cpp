#include "hdgch/experiments.hpp"

#include "hdgch/error.hpp"
#include "hdgch/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace hdgch {

namespace {

constexpr double pi = std::numbers::pi;

// X(s) = s^2 (s-1)^2 and derivatives
double bump(double s) { return s * s * (s - 1) * (s - 1); }
double bump_d(double s) { return 2 * s * (s - 1) * (2 * s - 1); }
double bump_dd(double s) { return 12 * s * s - 12 * s + 2; }

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(5) << v;
  return os.str();
}

}  // namespace

ManufacturedCase smooth_case() {
  ManufacturedCase c;
  c.u = [](const Point2& x, double t) { return 50 * std::exp(-t) * bump(x.x()) * bump(x.y()); };
  c.u_t = [u = c.u](const Point2& x, double t) { return -u(x, t); };
  c.grad_u = [](const Point2& x, double t) -> Point2 {
    const double s = 50 * std::exp(-t);
    return {s * bump_d(x.x()) * bump(x.y()), s * bump(x.x()) * bump_d(x.y())};
  };
  c.lap_u = [](const Point2& x, double t) {
    return 50 * std::exp(-t) * (bump_dd(x.x()) * bump(x.y()) + bump(x.x()) * bump_dd(x.y()));
  };
  c.phi = [](const Point2& x, double t) { return 0.1 * std::sin(t) * std::cos(2 * pi * x.x()) * std::cos(2 * pi * x.y()); };
  c.grad_phi = [](const Point2& x, double t) -> Point2 {
    const double s = -0.2 * pi * std::sin(t);
    return {s * std::sin(2 * pi * x.x()) * std::cos(2 * pi * x.y()), s * std::cos(2 * pi * x.x()) * std::sin(2 * pi * x.y())};
  };
  c.lap_phi = [phi = c.phi](const Point2& x, double t) { return -8 * pi * pi * phi(x, t); };
  c.beta = [](const Point2& x) -> Point2 {
    const double sx = std::sin(pi * x.x()), cx = std::cos(pi * x.x());
    const double sy = std::sin(pi * x.y()), cy = std::cos(pi * x.y());
    return {sx * sx * sy * cy, -sy * sy * sx * cx};
  };
  // d/dx(sin^2 pi x) sin pi y cos pi y - d/dy(sin^2 pi y) sin pi x cos pi x
  c.div_beta = [](const Point2& x) {
    const double sx = std::sin(pi * x.x()), cx = std::cos(pi * x.x());
    const double sy = std::sin(pi * x.y()), cy = std::cos(pi * x.y());
    return 2 * pi * sx * cx * sy * cy - 2 * pi * sy * cy * sx * cx;
  };
  return c;
}

ManufacturedCase constant_case(double u, double phi) {
  ManufacturedCase c;
  c.u = [u](const Point2&, double) { return u; };
  c.phi = [phi](const Point2&, double) { return phi; };
  c.u_t = [](const Point2&, double) { return 0.0; };
  c.grad_u = c.grad_phi = [](const Point2&, double) { return Point2(0, 0); };
  c.lap_u = c.lap_phi = [](const Point2&, double) { return 0.0; };
  c.beta = [](const Point2&) { return Point2(0, 0); };
  c.div_beta = [](const Point2&) { return 0.0; };
  return c;
}

Sources manufactured_sources(const ManufacturedCase& c, double pe, double eps) {
  Sources s;
  s.s1 = [c, pe](const Point2& x, double t) {
    // div(beta u) = beta . grad u + u div beta
    return c.u_t(x, t) - c.lap_phi(x, t) / pe + c.beta(x).dot(c.grad_u(x, t)) + c.u(x, t) * c.div_beta(x);
  };
  s.s2 = [c, eps](const Point2& x, double t) {
    const double u = c.u(x, t);
    return -eps * eps * c.lap_u(x, t) + u * u * u - u - c.phi(x, t);
  };
  return s;
}

ErrorNorms compute_errors(const HdgSpace& space, const CoupledState& state, const ManufacturedCase& c, double t) {
  const auto& ct = space.cell_tables(Integrand::source);
  const int nv = space.nv();
  const int nc = space.mesh().num_cells();
  std::vector<std::array<double, 4>> per(nc);
  parallel_for(nc, 1, [&](int cell) {
    const double det = space.map(cell).det;
    const Eigen::VectorXd u = ct.scalar * state.u.scalar.col(cell);
    const Eigen::VectorXd ph = ct.scalar * state.phi.scalar.col(cell);
    const Eigen::VectorXd qx = ct.flux * state.u.flux.col(cell).head(nv);
    const Eigen::VectorXd qy = ct.flux * state.u.flux.col(cell).tail(nv);
    const Eigen::VectorXd px = ct.flux * state.phi.flux.col(cell).head(nv);
    const Eigen::VectorXd py = ct.flux * state.phi.flux.col(cell).tail(nv);
    std::array<double, 4> e{0, 0, 0, 0};
    for (Eigen::Index q = 0; q < ct.rule.size(); ++q) {
      const Point2 x = space.cell_point(cell, Integrand::source, q);
      const double w = ct.rule.weights(q) * det;
      const Point2 gu = -c.grad_u(x, t), gp = -c.grad_phi(x, t);
      e[0] += w * std::pow(u(q) - c.u(x, t), 2);
      e[1] += w * std::pow(ph(q) - c.phi(x, t), 2);
      e[2] += w * (std::pow(qx(q) - gu.x(), 2) + std::pow(qy(q) - gu.y(), 2));
      e[3] += w * (std::pow(px(q) - gp.x(), 2) + std::pow(py(q) - gp.y(), 2));
    }
    per[cell] = e;
  });
  std::array<double, 4> s{0, 0, 0, 0};
  for (const auto& e : per)
    for (int i = 0; i < 4; ++i) s[i] += e[i];
  return {std::sqrt(s[0]), std::sqrt(s[1]), std::sqrt(s[2]), std::sqrt(s[3])};
}

double table_time_step(int k, int level) { return 2.0 * std::pow(std::ldexp(1.0, -level), k + 2); }

double eoc(double prev, double cur) {
  if (!(prev > 0) || !(cur > 0)) return std::numeric_limits<double>::quiet_NaN();
  return std::log2(prev / cur);
}

std::vector<ConvergenceRow> run_convergence(const RunConfig& cfg, const std::vector<int>& levels,
                                            const ManufacturedCase& c, bool dt_rule, const ProgressFn& progress) {
  if (levels.size() < 2) throw ParameterError("convergence study needs at least two levels");
  std::vector<ConvergenceRow> rows;
  for (int level : levels) {
    ConvergenceRow row;
    row.k = cfg.k;
    row.level = level;
    row.h_over_sqrt2 = std::ldexp(1.0, -level);
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig lc = cfg;
    if (dt_rule) lc.dt = table_time_step(cfg.k, level);
    try {
      const Mesh mesh = build_structured_mesh(level);
      const HdgSpace space(mesh, cfg.k);
      const TimeStepper stepper(space, lc, c.beta, manufactured_sources(c, lc.pe, lc.eps));
      CoupledState state = init_state(space, [&](const Point2& x) { return c.u(x, 0.0); });
      row.steps = lc.num_steps();
      for (int n = 0; n < row.steps; ++n) {
        TimeStepReport rep;
        state = stepper.advance(state, &rep);
        row.newton_total += rep.newton_iterations;
        row.newton_max = std::max(row.newton_max, rep.newton_iterations);
        for (int m : rep.minres_iterations) row.minres_total += m;
      }
      row.err = compute_errors(space, state, c, state.time);
    } catch (const Error& e) {
      row.failed = true;
      row.failure = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.rate = {nan, nan, nan, nan};
    if (!rows.empty() && !rows.back().failed && !row.failed && rows.back().level + 1 == level) {
      const ErrorNorms& p = rows.back().err;
      row.rate = {eoc(p.u, row.err.u), eoc(p.phi, row.err.phi), eoc(p.q, row.err.q), eoc(p.p, row.err.p)};
    }
    if (progress) {
      std::ostringstream os;
      os << "k=" << row.k << " level=" << level << (row.failed ? " FAILED: " + row.failure : "") << " e_u=" << sci(row.err.u)
         << " e_phi=" << sci(row.err.phi) << " e_q=" << sci(row.err.q) << " e_p=" << sci(row.err.p)
         << " steps=" << row.steps << " newton<=" << row.newton_max << " minres=" << row.minres_total << " "
         << std::fixed << std::setprecision(1) << row.seconds << "s";
      progress(os.str());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_convergence_csv(const std::vector<ConvergenceRow>& rows, std::ostream& os) {
  os << "k,level,h_over_sqrt2,err_u,rate_u,err_phi,rate_phi,err_q,rate_q,err_p,rate_p\n";
  auto num = [&](double v) {
    if (std::isnan(v)) return std::string();
    std::ostringstream s;
    s << std::scientific << std::setprecision(5) << v;
    return s.str();
  };
  for (const auto& r : rows) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const ErrorNorms e = r.failed ? ErrorNorms{nan, nan, nan, nan} : r.err;
    os << r.k << ',' << r.level << ',' << num(r.h_over_sqrt2) << ',' << num(e.u) << ',' << num(r.rate.u) << ','
       << num(e.phi) << ',' << num(r.rate.phi) << ',' << num(e.q) << ',' << num(r.rate.q) << ',' << num(e.p) << ','
       << num(r.rate.p) << '\n';
  }
}

// ---------------------------------------------------------------------------

std::string to_string(InitialDatum d) { return d == InitialDatum::disk ? "disk" : "cross"; }

InitialDatum parse_datum(const std::string& s) {
  if (s == "cross") return InitialDatum::cross;
  if (s == "disk") return InitialDatum::disk;
  throw ParameterError("unknown case '" + s + "' (expected cross or disk)");
}

VelocityField circular_velocity(double a, double b) {
  return [a, b](const Point2& x) -> Point2 {
    const double r = std::hypot(x.x() - 0.5, x.y() - 0.5);
    const double v = 0.5 * (1 + std::tanh(a * (0.5 - b - r)));
    return {v * (2 * x.y() - 1), v * (1 - 2 * x.x())};
  };
}

double cross_profile(const Point2& x) {
  auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  const bool bar1 = in(x.x(), 0.25, 0.75) && in(x.y(), 0.375, 0.625);
  const bool bar2 = in(x.x(), 0.375, 0.625) && in(x.y(), 0.25, 0.75);
  return bar1 || bar2 ? 1.0 : -1.0;
}

CoupledState simulation_initial_state(const HdgSpace& space, const SimulationCase& sc) {
  if (sc.datum == InitialDatum::cross) return init_state(space, cross_profile);
  const Mesh& mesh = space.mesh();
  std::mt19937_64 gen(sc.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<double> value(mesh.num_cells(), -1.0);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& v = mesh.cells[c];
    const Point2 g = (mesh.vertices[v[0]] + mesh.vertices[v[1]] + mesh.vertices[v[2]]) / 3.0;
    if ((g - Point2(0.5, 0.5)).squaredNorm() <= 0.16) value[c] = uni(gen);
  }
  CoupledState s;
  s.u = HdgTriple::zeros(space);
  s.phi = HdgTriple::zeros(space);
  const Eigen::MatrixXd one = constant_scalar(space, 1.0);
  for (int c = 0; c < mesh.num_cells(); ++c) s.u.scalar.col(c) = value[c] * one.col(c);
  // constants have constant traces; the first trace coefficient carries them
  const Eigen::MatrixXd trace_one = project_face([](const Point2&) { return 1.0; }, space.k(), mesh);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const auto& fc = mesh.face_cells[f];
    const double v = fc[1] < 0 ? value[fc[0]] : 0.5 * (value[fc[0]] + value[fc[1]]);
    s.u.trace.col(f) = v * trace_one.col(f);
  }
  s.mass = compute_mass(space, s);
  return s;
}

void lift_initial_state(const HdgSpace& space, const LocalOperators& ops, CoupledState& state,
                        const SolverOptions& options) {
  const HdgTriple lift = laplacian_lift(space, ops, state.u.scalar, options);
  state.u.flux = lift.flux;
  state.u.trace = lift.trace;
}

Eigen::MatrixXd sample_grid(const HdgSpace& space, const Eigen::MatrixXd& scalar, int res) {
  Eigen::MatrixXd g(res, res);
  for (int j = 0; j < res; ++j)
    for (int i = 0; i < res; ++i) g(j, i) = evaluate_scalar(space, scalar, Point2((i + 0.5) / res, (j + 0.5) / res));
  return g;
}

void write_grid_csv(const Eigen::MatrixXd& grid, std::ostream& os) {
  os << std::scientific << std::setprecision(5);
  for (Eigen::Index j = 0; j < grid.rows(); ++j) {
    for (Eigen::Index i = 0; i < grid.cols(); ++i) os << (i ? "," : "") << grid(j, i);
    os << '\n';
  }
}

void write_grid_vtk(const Eigen::MatrixXd& grid, double time, std::ostream& os) {
  const Eigen::Index nx = grid.cols(), ny = grid.rows();
  os << "# vtk DataFile Version 3.0\n";
  os << "u_h t=" << std::setprecision(10) << time << "\n";
  os << "ASCII\nDATASET STRUCTURED_POINTS\n";
  os << "DIMENSIONS " << nx << ' ' << ny << " 1\n";
  os << std::scientific << std::setprecision(6);
  os << "ORIGIN " << 0.5 / nx << ' ' << 0.5 / ny << " 0\n";
  os << "SPACING " << 1.0 / nx << ' ' << 1.0 / ny << " 1\n";
  os << "POINT_DATA " << nx * ny << "\nSCALARS u double 1\nLOOKUP_TABLE default\n";
  os << std::setprecision(5);
  for (Eigen::Index j = 0; j < ny; ++j)
    for (Eigen::Index i = 0; i < nx; ++i) os << grid(j, i) << '\n';
}

void write_diagnostics_csv(const std::vector<DiagnosticsRow>& rows, std::ostream& os) {
  os << "step,t,mass,energy,newton_iters,minres_iters\n";
  for (const auto& r : rows)
    os << r.step << ',' << sci(r.t) << ',' << std::scientific << std::setprecision(12) << r.mass << ','
       << sci(r.energy) << ',' << r.newton_iters << ',' << r.minres_iters << '\n';
}

namespace {

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream f(path);
  if (!f) throw ResourceError("cannot open " + path.string() + " for writing");
  body(f);
  if (!f) throw ResourceError("write failed: " + path.string());
}

}  // namespace

SimulationResult run_simulation(const SimulationCase& sc, const RunConfig& cfg, const std::string& out_dir,
                                const ProgressFn& progress) {
  if (sc.subdivisions < 1) throw ParameterError("subdivisions must be positive");
  const Mesh mesh = build_structured_mesh_n(sc.subdivisions);
  const HdgSpace space(mesh, cfg.k);
  const TimeStepper stepper(space, cfg, circular_velocity(sc.a, sc.b));
  const int steps = cfg.num_steps();
  std::vector<int> snap_steps;
  for (double t : sc.snapshot_times) {
    if (t < 0 || t > cfg.T * (1 + 1e-12)) throw ParameterError("snapshot time " + std::to_string(t) + " outside [0, T]");
    snap_steps.push_back(static_cast<int>(std::llround(t / cfg.dt)));
  }
  const std::filesystem::path dir(out_dir);
  const bool write = !out_dir.empty();
  if (write) std::filesystem::create_directories(dir);

  SimulationResult res;
  CoupledState state = simulation_initial_state(space, sc);
  auto record = [&](const CoupledState& s, const TimeStepReport* rep) {
    DiagnosticsRow r;
    r.step = s.step;
    r.t = s.time;
    r.mass = s.mass;
    r.energy = rep ? rep->energy : compute_energy(space, stepper.operators(), s, cfg.eps);
    if (rep) {
      r.newton_iters = rep->newton_iterations;
      for (int m : rep->minres_iterations) r.minres_iters += m;
      r.asymmetry = rep->max_asymmetry;
    }
    res.diagnostics.push_back(r);
  };
  auto snapshot = [&](const CoupledState& s) {
    if (std::find(snap_steps.begin(), snap_steps.end(), s.step) == snap_steps.end()) return;
    std::ostringstream stem;
    stem << "snapshot_" << std::setw(7) << std::setfill('0') << s.step;
    res.snapshots.push_back(stem.str());
    if (!write) return;
    const Eigen::MatrixXd g = sample_grid(space, s.u.scalar, sc.snapshot_resolution);
    write_file(dir / (stem.str() + ".csv"), [&](std::ostream& os) { write_grid_csv(g, os); });
    write_file(dir / (stem.str() + ".vtk"), [&](std::ostream& os) { write_grid_vtk(g, s.time, os); });
  };
  auto flush = [&] {
    if (write) write_file(dir / "diagnostics.csv", [&](std::ostream& os) { write_diagnostics_csv(res.diagnostics, os); });
  };

  record(state, nullptr);
  snapshot(state);
  const int every = std::max(1, steps / 20);
  try {
    for (int n = 0; n < steps; ++n) {
      TimeStepReport rep;
      state = stepper.advance(state, &rep);
      record(state, &rep);
      snapshot(state);
      if (progress && (state.step % every == 0 || state.step == steps)) {
        std::ostringstream os;
        os << "step " << state.step << "/" << steps << " t=" << state.time << " mass=" << std::setprecision(12)
           << state.mass << " energy=" << std::setprecision(6) << rep.energy << " newton=" << rep.newton_iterations;
        progress(os.str());
      }
    }
  } catch (const Error& e) {
    res.failed = true;
    res.failure = e.what();
  }
  flush();
  return res;
}

}  // namespace hdgch
