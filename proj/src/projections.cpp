#include "hdgch/projections.hpp"

#include "hdgch/error.hpp"
#include "hdgch/parallel.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

namespace hdgch {

namespace {

// (f, w) for every scalar basis function, source rule.
Eigen::MatrixXd moments(const HdgSpace& space, const ScalarField& f, int threads) {
  const auto& ct = space.cell_tables(Integrand::source);
  const int nc = space.mesh().num_cells();
  Eigen::MatrixXd out(space.nw(), nc);
  parallel_for(nc, threads, [&](int c) {
    Eigen::VectorXd fw(ct.rule.size());
    for (Eigen::Index q = 0; q < ct.rule.size(); ++q) fw(q) = ct.rule.weights(q) * f(space.cell_point(c, Integrand::source, q));
    out.col(c) = space.map(c).det * ct.scalar.transpose() * fw;
  });
  return out;
}

// (f, 1) = sum_K sum_i (f, phi_i) c_i, c the coefficients of 1
double integral(const HdgSpace& space, const ScalarField& f) {
  return moments(space, f, 1).cwiseProduct(constant_scalar(space, 1.0)).sum();
}

struct Solved {
  HdgTriple t;
  double multiplier;
  int iterations;
};

// scale * S A x + lambda c = S (0, load_w, load_mu), (x_w, 1) = mean
Solved solve_mean_constrained(const HdgSpace& space, const LocalOperators& ops, double scale, const Eigen::MatrixXd& load_w,
                              const Eigen::MatrixXd* load_mu, double mean, const SolverOptions& opt) {
  const Mesh& mesh = space.mesh();
  const int nq = 2 * space.nv(), nw = space.nw(), nm = space.nm();
  const int l = space.local_size();
  CondensationProblem prob;
  prob.interior_size = nq + nw;
  prob.trace_block = nm;
  prob.with_multiplier = true;
  prob.constraint_value = mean;
  prob.cells.resize(mesh.num_cells());
  const Eigen::MatrixXd& ints = space.scalar_integrals();
  for (int c = 0; c < mesh.num_cells(); ++c) {
    LocalSystem& ls = prob.cells[c];
    ls.matrix = scale * ops.matrices[c];
    ls.matrix.bottomRows(l - nq) *= -1.0;
    ls.rhs = Eigen::VectorXd::Zero(l);
    ls.rhs.segment(nq, nw) = -load_w.col(c);
    if (load_mu)
      for (int lf = 0; lf < 3; ++lf) {
        const int f = mesh.cell_faces[c][lf];
        if (mesh.face_cells[f][0] == c) ls.rhs.segment(nq + nw + lf * nm, nm) = -load_mu->col(f);
      }
    ls.constraint = Eigen::VectorXd::Zero(l);
    ls.constraint.segment(nq, nw) = ints.col(c);
  }
  const CondensedSolution sol = condense_and_solve(mesh, prob, opt);
  Solved s;
  s.t.flux = sol.interior.topRows(nq);
  s.t.scalar = sol.interior.bottomRows(nw);
  s.t.trace = sol.trace;
  s.multiplier = sol.multiplier;
  s.iterations = sol.minres_iterations;
  return s;
}

}  // namespace

EllipticProjection solve_elliptic_projection(const HdgSpace& space, const ManufacturedCase& c, const ProjectionParams& p) {
  if (!(p.pe > 0) || !(p.alpha > 0)) throw ParameterError("projection: Pe and alpha must be positive");
  if (p.scheme == Scheme::upwind && !(p.tau_c > 0)) throw ParameterError("projection: tau_c must be positive");
  const Mesh& mesh = space.mesh();
  const double t = p.time;
  const int th = p.solver.threads;
  const LocalOperators ops = build_local_operators(space, p.alpha, th);

  EllipticProjection out;
  const Eigen::MatrixXd load_u = moments(space, [&](const Point2& x) { return -c.lap_u(x, t); }, th);
  const double mean_u = integral(space, [&](const Point2& x) { return c.u(x, t); });
  const Solved su = solve_mean_constrained(space, ops, 1.0, load_u, nullptr, mean_u, p.solver);
  out.u = su.t;
  out.multiplier_u = su.multiplier;

  // phi system: A / Pe = (div(beta u) - Delta phi / Pe, w) - B(u_I, uh_I; w, mu)
  Eigen::MatrixXd load_phi = moments(space, [&](const Point2& x) {
    return c.beta(x).dot(c.grad_u(x, t)) + c.u(x, t) * c.div_beta(x) - c.lap_phi(x, t) / p.pe;
  }, th);
  std::optional<Eigen::MatrixXd> load_mu;
  if (c.beta) {
    std::vector<double> tau;
    if (p.scheme == Scheme::upwind) tau.assign(mesh.num_faces(), p.tau_c);
    const ConvectionOperator conv(space, c.beta, tau);
    const ConvectionFunctional b = conv.apply(out.u.scalar, out.u.trace);
    load_phi -= b.cell;
    if (b.trace.size() > 0) load_mu = -b.trace;
  }
  const double mean_phi = integral(space, [&](const Point2& x) { return c.phi(x, t); });
  const Solved sp = solve_mean_constrained(space, ops, 1.0 / p.pe, load_phi, load_mu ? &*load_mu : nullptr, mean_phi, p.solver);
  out.phi = sp.t;
  out.multiplier_phi = sp.multiplier;
  out.minres_iterations = su.iterations + sp.iterations;
  return out;
}

std::vector<ProjectionRow> projection_error_study(const ManufacturedCase& c, const std::vector<int>& levels, int k,
                                                  const ProjectionParams& p, const ProgressFn& progress) {
  if (levels.empty()) throw ParameterError("projection study needs at least one level");
  std::vector<ProjectionRow> rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int level : levels) {
    const Mesh mesh = build_structured_mesh(level);
    const HdgSpace space(mesh, k);
    const EllipticProjection proj = solve_elliptic_projection(space, c, p);
    CoupledState s;
    s.u = proj.u;
    s.phi = proj.phi;
    ProjectionRow row;
    row.level = level;
    row.h = std::ldexp(1.0, -level);
    row.err = compute_errors(space, s, c, p.time);
    row.mean_u = std::abs(integrate_scalar(space, proj.u.scalar) - integral(space, [&](const Point2& x) { return c.u(x, p.time); }));
    row.mean_phi =
        std::abs(integrate_scalar(space, proj.phi.scalar) - integral(space, [&](const Point2& x) { return c.phi(x, p.time); }));
    row.rate = {nan, nan, nan, nan};
    if (!rows.empty() && rows.back().level + 1 == level) {
      const ErrorNorms& e = rows.back().err;
      row.rate = {eoc(e.u, row.err.u), eoc(e.phi, row.err.phi), eoc(e.q, row.err.q), eoc(e.p, row.err.p)};
    }
    if (progress) {
      std::ostringstream os;
      os << std::scientific << std::setprecision(4) << "k=" << k << " level=" << level << " e_u=" << row.err.u
         << " e_phi=" << row.err.phi << " e_q=" << row.err.q << " e_p=" << row.err.p << " minres=" << proj.minres_iterations;
      progress(os.str());
    }
    rows.push_back(row);
  }
  return rows;
}

void write_projection_csv(const std::vector<ProjectionRow>& rows, std::ostream& os) {
  os << "level,h,error_u,rate_u,error_q,rate_q,error_phi,rate_phi,error_p,rate_p\n";
  auto num = [](double v) {
    if (std::isnan(v)) return std::string();
    std::ostringstream s;
    s << std::scientific << std::setprecision(5) << v;
    return s.str();
  };
  for (const auto& r : rows)
    os << r.level << ',' << num(r.h) << ',' << num(r.err.u) << ',' << num(r.rate.u) << ',' << num(r.err.q) << ','
       << num(r.rate.q) << ',' << num(r.err.phi) << ',' << num(r.rate.phi) << ',' << num(r.err.p) << ',' << num(r.rate.p)
       << '\n';
}

}  // namespace hdgch
