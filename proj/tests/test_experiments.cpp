#include <doctest.h>

#include "hdgch/error.hpp"
#include "hdgch/experiments.hpp"
#include "hdgch/projections.hpp"

#include "step_oracle.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace hdgch;

namespace {

// fourth-order central differences
constexpr double fd_h = 1e-3;

double d1(const std::function<double(double)>& f, double x, double h = fd_h) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}
double d2(const std::function<double(double)>& f, double x) {
  const double h = fd_h;
  return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h);
}

double fd_lap(const SpaceTimeField& f, const Point2& p, double t) {
  return d2([&](double x) { return f({x, p.y()}, t); }, p.x()) + d2([&](double y) { return f({p.x(), y}, t); }, p.y());
}
Point2 fd_grad(const SpaceTimeField& f, const Point2& p, double t) {
  return {d1([&](double x) { return f({x, p.y()}, t); }, p.x()), d1([&](double y) { return f({p.x(), y}, t); }, p.y())};
}
double fd_div(const VelocityField& b, const Point2& p, double h = fd_h) {
  return d1([&](double x) { return b({x, p.y()}).x(); }, p.x(), h) + d1([&](double y) { return b({p.x(), y}).y(); }, p.y(), h);
}

std::vector<Point2> sample_points(int n, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> ud(0.05, 0.95);
  std::vector<Point2> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(ud(gen), ud(gen));
  return pts;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("smooth case derivatives agree with finite differences") {
  const ManufacturedCase c = smooth_case();
  for (const Point2& x : sample_points(40, 1))
    for (double t : {0.0, 0.3}) {
      CHECK(c.lap_u(x, t) == doctest::Approx(fd_lap(c.u, x, t)).epsilon(1e-7).scale(1));
      CHECK(c.lap_phi(x, t) == doctest::Approx(fd_lap(c.phi, x, t)).epsilon(1e-7).scale(1));
      CHECK((c.grad_u(x, t) - fd_grad(c.u, x, t)).norm() < 1e-9);
      CHECK((c.grad_phi(x, t) - fd_grad(c.phi, x, t)).norm() < 1e-9);
      CHECK(c.u_t(x, t) == doctest::Approx(d1([&](double s) { return c.u(x, s); }, t + 0.01)).epsilon(1e-2));
      CHECK(std::abs(c.div_beta(x) - fd_div(c.beta, x)) < 1e-9);
    }
  CHECK(c.u({0.5, 0.5}, 0.0) == doctest::Approx(50.0 / 256.0));
}

TEST_CASE("manufactured sources close the model equations") {
  const ManufacturedCase c = smooth_case();
  const double pe = 3, eps = 2;
  const Sources s = manufactured_sources(c, pe, eps);
  for (const Point2& x : sample_points(40, 2)) {
    const double t = 0.2;
    const double u = c.u(x, t);
    // s2 = -eps^2 Delta u + u^3 - u - phi
    CHECK(s.s2(x, t) == doctest::Approx(-eps * eps * fd_lap(c.u, x, t) + u * u * u - u - c.phi(x, t)).epsilon(1e-7).scale(1));
    // s1 = u_t - Delta phi / Pe + div(beta u)
    const VelocityField flux = [&](const Point2& y) { return Point2(c.beta(y) * c.u(y, t)); };
    const double ut = d1([&](double r) { return c.u(x, r); }, t);
    CHECK(s.s1(x, t) == doctest::Approx(ut - fd_lap(c.phi, x, t) / pe + fd_div(flux, x)).epsilon(1e-7).scale(1));
  }
}

TEST_CASE("velocity fields are tangential on the boundary") {
  const ManufacturedCase c = smooth_case();
  const VelocityField circ = circular_velocity();
  for (int i = 0; i <= 50; ++i) {
    const double s = i / 50.0;
    for (const VelocityField& b : {c.beta, circ}) {
      CHECK(std::abs(b({0, s}).x()) < 1e-12);
      CHECK(std::abs(b({1, s}).x()) < 1e-12);
      CHECK(std::abs(b({s, 0}).y()) < 1e-12);
      CHECK(std::abs(b({s, 1}).y()) < 1e-12);
    }
  }
  for (const Point2& x : sample_points(40, 3)) {
    CHECK(std::abs(fd_div(circ, x, 1e-5)) < 1e-7);  // the tanh layer is 1/200 wide
    CHECK(std::abs(fd_div(c.beta, x)) < 1e-9);
  }
  // rigid rotation near the centre
  const Point2 v = circ({0.6, 0.5});
  CHECK(v.x() == doctest::Approx(0.0));
  CHECK(v.y() == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(circ({0.98, 0.5}).norm() < 1e-12);
}

TEST_CASE("cross profile") {
  CHECK(cross_profile({0.5, 0.5}) == 1.0);
  CHECK(cross_profile({0.3, 0.5}) == 1.0);
  CHECK(cross_profile({0.5, 0.7}) == 1.0);
  CHECK(cross_profile({0.3, 0.3}) == -1.0);
  CHECK(cross_profile({0.1, 0.5}) == -1.0);
}

TEST_CASE("table time step and rates") {
  CHECK(table_time_step(0, 3) == doctest::Approx(2.0 / 64));
  CHECK(table_time_step(1, 2) == doctest::Approx(2.0 / 64));
  CHECK(table_time_step(1, 4) == doctest::Approx(2.0 / 4096));
  CHECK(eoc(4.0, 1.0) == doctest::Approx(2.0));
  CHECK(eoc(1.0, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("errors vanish on exactly represented constants") {
  const Mesh mesh = build_structured_mesh(2);
  const HdgSpace space(mesh, 1);
  const ManufacturedCase c = constant_case(0.7, -0.2);
  const CoupledState s = init_state(space, [](const Point2&) { return 0.7; });
  CoupledState t = s;
  t.phi.scalar = project_cell([](const Point2&) { return -0.2; }, 2, mesh);
  const ErrorNorms e = compute_errors(space, t, c, 0.0);
  CHECK(e.u < 1e-13);
  CHECK(e.phi < 1e-13);
  CHECK(e.q < 1e-13);
  CHECK(e.p < 1e-13);
  // phi = 0 instead of -0.2: the error is |0.2| * sqrt(|Omega|)
  CHECK(compute_errors(space, s, c, 0.0).phi == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("error norms against the oracle quadrature") {
  const Mesh mesh = build_structured_mesh(2);
  const HdgSpace space(mesh, 1);
  const ManufacturedCase c = smooth_case();
  std::mt19937 gen(4);
  CoupledState s;
  s.u = oracle::random_triple(space, gen);
  s.phi = oracle::random_triple(space, gen);
  const double t = 0.25;
  double eu = 0, eq = 0;
  for (int cell = 0; cell < mesh.num_cells(); ++cell) {
    const oracle::CellFields f = oracle::fields(space, s.u, cell);
    eu += oracle::cell_integral(space, cell, [&](const Point2& x) { return std::pow(f.u_at(x) - c.u(x, t), 2); }, 20);
    eq += oracle::cell_integral(space, cell, [&](const Point2& x) { return (f.q_at(x) + c.grad_u(x, t)).squaredNorm(); }, 20);
  }
  const ErrorNorms e = compute_errors(space, s, c, t);
  CHECK(e.u == doctest::Approx(std::sqrt(eu)).epsilon(1e-6));
  CHECK(e.q == doctest::Approx(std::sqrt(eq)).epsilon(1e-6));
}

TEST_CASE("convergence study on coarse levels") {
  RunConfig cfg;
  cfg.k = 0;
  cfg.pe = 3;
  cfg.eps = 2;
  cfg.alpha = 10;
  cfg.T = 0.5;
  const auto rows = run_convergence(cfg, {1, 2}, smooth_case());
  REQUIRE(rows.size() == 2);
  CHECK(std::isnan(rows[0].rate.u));
  CHECK(rows[1].steps == 4);
  CHECK(!rows[1].failed);
  CHECK(rows[1].err.u < rows[0].err.u);
  std::ostringstream os;
  write_convergence_csv(rows, os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "k,level,h_over_sqrt2,err_u,rate_u,err_phi,rate_phi,err_q,rate_q,err_p,rate_p");
  std::getline(in, line);
  CHECK(line.rfind("0,1,5.00000e-01,", 0) == 0);
  CHECK_THROWS_AS(run_convergence(cfg, {2}, smooth_case()), ParameterError);
}

TEST_CASE("datum names") {
  CHECK(parse_datum("cross") == InitialDatum::cross);
  CHECK(parse_datum("disk") == InitialDatum::disk);
  CHECK(to_string(InitialDatum::disk) == "disk");
  CHECK_THROWS_AS(parse_datum("square"), ParameterError);
}

TEST_CASE("disk datum") {
  const Mesh mesh = build_structured_mesh_n(20);
  const HdgSpace space(mesh, 0);
  SimulationCase sc;
  sc.datum = InitialDatum::disk;
  sc.seed = 42;
  const CoupledState a = simulation_initial_state(space, sc);
  const CoupledState b = simulation_initial_state(space, sc);
  CHECK(oracle::max_diff(a, b) == 0.0);
  sc.seed = 43;
  CHECK(oracle::max_diff(a, simulation_initial_state(space, sc)) > 0.0);
  int inside = 0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& v3 = mesh.cells[c];
    const Point2 m = (mesh.vertices[v3[0]] + mesh.vertices[v3[1]] + mesh.vertices[v3[2]]) / 3.0;
    const double v = oracle::fields(space, a.u, c).u_at(m);
    if ((m - Point2(0.5, 0.5)).norm() < 0.4) {
      ++inside;
      CHECK(v >= -1.0 - 1e-12);
      CHECK(v <= 1.0 + 1e-12);
    } else {
      CHECK(v == doctest::Approx(-1.0));
    }
  }
  CHECK(inside > 0);
}

TEST_CASE("grid sampling and writers") {
  const Mesh mesh = build_structured_mesh_n(4);
  const HdgSpace space(mesh, 1);
  const Eigen::MatrixXd c = project_cell([](const Point2& x) { return x.x() + 2 * x.y(); }, 2, mesh);
  const Eigen::MatrixXd g = sample_grid(space, c, 8);
  REQUIRE(g.rows() == 8);
  REQUIRE(g.cols() == 8);
  CHECK(g(0, 0) == doctest::Approx(3 * 0.5 / 8));
  CHECK(g(2, 5) == doctest::Approx(5.5 / 8 + 2 * 2.5 / 8));

  std::ostringstream csv;
  write_grid_csv(g.topLeftCorner(2, 2), csv);
  CHECK(csv.str() == "1.87500e-01,3.12500e-01\n4.37500e-01,5.62500e-01\n");
  std::ostringstream vtk;
  write_grid_vtk(g, 1.5, vtk);
  CHECK(vtk.str().find("DATASET STRUCTURED_POINTS\nDIMENSIONS 8 8 1\n") != std::string::npos);
  CHECK(vtk.str().find("POINT_DATA 64\nSCALARS u double 1\n") != std::string::npos);

  std::ostringstream diag;
  write_diagnostics_csv({}, diag);
  CHECK(diag.str() == "step,t,mass,energy,newton_iters,minres_iters\n");
}

TEST_CASE("reduced simulation writes snapshots and diagnostics") {
  const auto dir = std::filesystem::temp_directory_path() / "hdgch_sim_test";
  std::filesystem::remove_all(dir);
  SimulationCase sc;
  sc.datum = InitialDatum::disk;
  sc.subdivisions = 8;
  sc.seed = 1;
  sc.snapshot_times = {0.0, 0.003};
  sc.snapshot_resolution = 16;
  RunConfig cfg;
  cfg.pe = 200;
  cfg.eps = 0.05;
  cfg.dt = 1e-3;
  cfg.T = 3e-3;
  const SimulationResult r = run_simulation(sc, cfg, dir.string());
  CHECK(!r.failed);
  REQUIRE(r.diagnostics.size() == 4);
  REQUIRE(r.snapshots.size() == 2);
  CHECK(r.snapshots[1] == "snapshot_0000003");
  for (const auto& d : r.diagnostics) CHECK(d.mass == doctest::Approx(r.diagnostics[0].mass).epsilon(1e-12));
  CHECK(std::filesystem::exists(dir / "snapshot_0000000.csv"));
  CHECK(std::filesystem::exists(dir / "snapshot_0000003.vtk"));
  CHECK(std::filesystem::exists(dir / "diagnostics.csv"));

  // the step-0 snapshot is the sampled initial projection
  const Mesh mesh = build_structured_mesh_n(8);
  const HdgSpace space(mesh, 0);
  std::ostringstream expect;
  write_grid_csv(sample_grid(space, simulation_initial_state(space, sc).u.scalar, 16), expect);
  CHECK(slurp(dir / "snapshot_0000000.csv") == expect.str());

  // same seed, same bytes
  const auto dir2 = dir.string() + "_again";
  run_simulation(sc, cfg, dir2);
  CHECK(slurp(dir / "snapshot_0000003.csv") == slurp(std::filesystem::path(dir2) / "snapshot_0000003.csv"));
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);

  sc.snapshot_times = {1.0};
  CHECK_THROWS_AS(run_simulation(sc, cfg, ""), ParameterError);
}

TEST_CASE("elliptic projection of constants is exact") {
  const Mesh mesh = build_structured_mesh(2);
  for (int k : {0, 1}) {
    const HdgSpace space(mesh, k);
    ProjectionParams p;
    p.solver.minres.abs_tol = 1e-15;
    p.solver.minres.rel_tol = 1e-14;
    const EllipticProjection pr = solve_elliptic_projection(space, constant_case(0.0, 0.0), p);
    CHECK(pr.u.scalar.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(pr.phi.trace.cwiseAbs().maxCoeff() < 1e-12);
    const EllipticProjection pc = solve_elliptic_projection(space, constant_case(0.4, -1.5), p);
    CoupledState s;
    s.u = pc.u;
    s.phi = pc.phi;
    const ErrorNorms e = compute_errors(space, s, constant_case(0.4, -1.5), p.time);
    CHECK(e.u < 1e-11);
    CHECK(e.phi < 1e-11);
    CHECK(e.q < 1e-11);
    CHECK(e.p < 1e-11);
  }
}

TEST_CASE("elliptic projection preserves means and converges") {
  ProjectionParams p;
  p.solver.minres.abs_tol = 1e-15;
  p.solver.minres.rel_tol = 1e-13;
  for (Scheme scheme : {Scheme::centered, Scheme::upwind}) {
    p.scheme = scheme;
    const auto rows = projection_error_study(smooth_case(), {2, 3}, 0, p);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
      CHECK(r.mean_u < 1e-11);
      CHECK(r.mean_phi < 1e-11);
    }
    CHECK(rows[1].rate.u > 1.5);
    CHECK(rows[1].rate.q > 0.7);
  }
  p.pe = -1;
  const Mesh mesh = build_structured_mesh(1);
  CHECK_THROWS_AS(solve_elliptic_projection(HdgSpace(mesh, 0), smooth_case(), p), ParameterError);
  std::ostringstream os;
  write_projection_csv({}, os);
  CHECK(os.str() == "level,h,error_u,rate_u,error_q,rate_q,error_phi,rate_phi,error_p,rate_p\n");
}
