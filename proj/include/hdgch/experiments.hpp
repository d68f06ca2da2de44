#pragma once

#include "hdgch/stepper.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace hdgch {

using VectorSpaceTimeField = std::function<Point2(const Point2&, double)>;

/// Smooth exact solution with the derivatives the sources and projections need.
struct ManufacturedCase {
  SpaceTimeField u, phi;
  SpaceTimeField u_t;
  VectorSpaceTimeField grad_u, grad_phi;
  SpaceTimeField lap_u, lap_phi;
  VelocityField beta;
  ScalarField div_beta;
};

/// u = 50 e^-t x^2(x-1)^2 y^2(y-1)^2, phi = 0.1 sin t cos 2pi x cos 2pi y,
/// beta = (sin^2 pi x sin pi y cos pi y, -sin^2 pi y sin pi x cos pi x).
ManufacturedCase smooth_case();

/// Time-independent constants with beta = 0 (projections of constants are exact).
ManufacturedCase constant_case(double u, double phi);

/// s1 = u_t - Delta phi / Pe + div(beta u), s2 = -eps^2 Delta u + u^3 - u - phi.
Sources manufactured_sources(const ManufacturedCase& c, double pe, double eps);

struct ErrorNorms {
  double u = 0, phi = 0, q = 0, p = 0;
};

/// L2 errors of (u, phi, q, p) against (u, phi, -grad u, -grad phi) at time t.
ErrorNorms compute_errors(const HdgSpace& space, const CoupledState& state, const ManufacturedCase& c, double t);

/// dt = 2 (h / sqrt 2)^(k+2) on the level-L mesh, where h / sqrt 2 = 2^-L.
double table_time_step(int k, int level);

struct ConvergenceRow {
  int k = 0;
  int level = 0;
  double h_over_sqrt2 = 0;
  ErrorNorms err;
  ErrorNorms rate;  ///< NaN on the first row
  int steps = 0;
  int newton_total = 0;
  int newton_max = 0;
  long minres_total = 0;
  double seconds = 0;
  bool failed = false;
  std::string failure;
};

using ProgressFn = std::function<void(const std::string&)>;

/// One full integration to cfg.T per level. `dt_rule` true uses table_time_step,
/// otherwise cfg.dt. Needs at least two levels. A failing level is marked and the study continues.
std::vector<ConvergenceRow> run_convergence(const RunConfig& cfg, const std::vector<int>& levels,
                                            const ManufacturedCase& c, bool dt_rule = true,
                                            const ProgressFn& progress = {});

/// log2(prev / cur).
double eoc(double prev, double cur);

void write_convergence_csv(const std::vector<ConvergenceRow>& rows, std::ostream& os);

// ---------------------------------------------------------------------------

enum class InitialDatum { cross, disk };

std::string to_string(InitialDatum d);
InitialDatum parse_datum(const std::string& s);

/// v(r) (2y - 1, 1 - 2x), v(r) = (1 + tanh(a (1/2 - b - r))) / 2.
VelocityField circular_velocity(double a = 200.0, double b = 0.1);

struct SimulationCase {
  InitialDatum datum = InitialDatum::cross;
  double a = 200.0, b = 0.1;
  int subdivisions = 50;  ///< squares per side, n = 1/h
  std::vector<double> snapshot_times;
  int snapshot_resolution = 256;
  std::uint64_t seed = 0;
};

/// Cross initial datum evaluated pointwise.
double cross_profile(const Point2& x);

/// Initial state for a simulation datum. The disk datum draws one uniform
/// value in [-1, 1] per cell whose centroid lies in the disk; the trace is the
/// mean of the two adjacent cell traces.
CoupledState simulation_initial_state(const HdgSpace& space, const SimulationCase& sc);

/// Replaces (q, uh) by the HDG lift of u, i.e. A(q, u, uh; r, 0, mu) = 0.
void lift_initial_state(const HdgSpace& space, const LocalOperators& ops, CoupledState& state,
                        const SolverOptions& options = {});

struct DiagnosticsRow {
  int step = 0;
  double t = 0, mass = 0, energy = 0;
  int newton_iters = 0;
  long minres_iters = 0;
  double asymmetry = 0;
};

/// Row-major res x res samples of u_h at cell-centred lattice points.
Eigen::MatrixXd sample_grid(const HdgSpace& space, const Eigen::MatrixXd& scalar, int res);

void write_grid_csv(const Eigen::MatrixXd& grid, std::ostream& os);
void write_grid_vtk(const Eigen::MatrixXd& grid, double time, std::ostream& os);
void write_diagnostics_csv(const std::vector<DiagnosticsRow>& rows, std::ostream& os);

struct SimulationResult {
  std::vector<DiagnosticsRow> diagnostics;
  std::vector<std::string> snapshots;  ///< written file stems
  bool failed = false;
  std::string failure;
};

/// Runs to cfg.T. Snapshots go to out_dir/snapshot_<step>.{csv,vtk}; the
/// diagnostics CSV is rewritten at the end (and on failure). An empty out_dir
/// writes nothing.
SimulationResult run_simulation(const SimulationCase& sc, const RunConfig& cfg, const std::string& out_dir,
                                const ProgressFn& progress = {});

}  // namespace hdgch
