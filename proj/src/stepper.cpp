#include "hdgch/stepper.hpp"

#include "hdgch/error.hpp"
#include "hdgch/parallel.hpp"

#include <cmath>
#include <string>

namespace hdgch {

std::string to_string(Scheme s) { return s == Scheme::upwind ? "upwind" : "centered"; }

Scheme parse_scheme(const std::string& s) {
  if (s == "centered") return Scheme::centered;
  if (s == "upwind") return Scheme::upwind;
  throw ParameterError("unknown scheme '" + s + "' (expected centered or upwind)");
}

int RunConfig::num_steps() const { return static_cast<int>(std::llround(T / dt)); }

void RunConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0) || !std::isfinite(v)) throw ParameterError(std::string(name) + " must be positive, got " + std::to_string(v));
  };
  if (k < 0) throw ParameterError("k must be nonnegative");
  positive(pe, "Pe");
  positive(eps, "eps");
  positive(alpha, "alpha");
  if (scheme == Scheme::upwind) positive(tau_c, "tau_c");
  positive(dt, "dt");
  if (!(T >= 0)) throw ParameterError("T must be nonnegative");
  positive(newton_abs_tol, "newton tolerance");
  positive(minres_abs_tol, "minres absolute tolerance");
  positive(minres_rel_tol, "minres relative tolerance");
  if (newton_max_iter < 1 || minres_max_iter < 1) throw ParameterError("iteration limits must be positive");
  if (threads < 1) throw ParameterError("threads must be positive");
}

SolverOptions RunConfig::solver_options() const {
  SolverOptions o;
  o.minres.abs_tol = minres_abs_tol;
  o.minres.rel_tol = minres_rel_tol;
  o.minres.max_iter = minres_max_iter;
  o.preconditioner = preconditioner;
  o.threads = threads;
  return o;
}

CoupledState init_state(const HdgSpace& space, const ScalarField& u0) {
  const Mesh& mesh = space.mesh();
  CoupledState s;
  s.u = HdgTriple::zeros(space);
  s.phi = HdgTriple::zeros(space);
  const int exact = 2 * (space.k() + 1) + 8;  // the degree-8 bump of the smooth case is integrated exactly
  s.u.scalar = project_cell(u0, space.k() + 1, mesh, exact);
  s.u.trace = project_face(u0, space.k(), mesh, exact);
  s.mass = integrate_scalar(space, s.u.scalar);
  return s;
}

double compute_mass(const HdgSpace& space, const CoupledState& state) { return integrate_scalar(space, state.u.scalar); }

double compute_energy(const HdgSpace& space, const LocalOperators& ops, const CoupledState& state, double eps) {
  const auto& ct = space.cell_tables(Integrand::nonlinear);
  double bulk = 0.0;
  for (int c = 0; c < space.mesh().num_cells(); ++c) {
    const Eigen::VectorXd uq = ct.scalar * state.u.scalar.col(c);
    const Eigen::ArrayXd g = uq.array().square() - 1.0;
    bulk += space.map(c).det * ct.rule.weights.dot((g * g).matrix());
  }
  // A(v; v) = ||q||^2 + alpha ||h^-1/2 (P u - uh)||^2
  return 0.25 * bulk + 0.5 * eps * eps * a_form(space, ops, state.u, state.u);
}

TimeStepper::TimeStepper(const HdgSpace& space, const RunConfig& cfg, VelocityField beta, Sources sources)
    : space_(&space), cfg_(cfg), sources_(std::move(sources)) {
  cfg_.validate();
  if (cfg_.k != space.k()) throw ParameterError("RunConfig.k does not match the space degree");
  const Mesh& mesh = space.mesh();
  ops_ = build_local_operators(space, cfg_.alpha, cfg_.threads);
  const int nq = 2 * space.nv();
  cells_.resize(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    Eigen::MatrixXd sa = ops_.matrices[c];
    sa.bottomRows(sa.rows() - nq) *= -1.0;
    cells_[c].sa = std::move(sa);
  }
  if (beta) {
    std::vector<double> tau;
    if (cfg_.scheme == Scheme::upwind) tau.assign(mesh.num_faces(), cfg_.tau_c);
    convection_.emplace(space, beta, std::move(tau));
  }

  const int l = space.local_size();
  const int base = 2 * space.nv() + space.nw();
  const int ni = 2 * base;
  const int nm = space.nm();
  permutation_.resize(2 * l);
  for (int part = 0; part < 2; ++part) {
    for (int i = 0; i < l; ++i) {
      int target;
      if (i < base) {
        target = part * base + i;
      } else {
        const int lf = (i - base) / nm, j = (i - base) % nm;
        target = ni + lf * 2 * nm + part * nm + j;
      }
      permutation_[part * l + i] = target;
    }
  }
}

Eigen::MatrixXd TimeStepper::source_moments(const SpaceTimeField& s, double time) const {
  const HdgSpace& space = *space_;
  const int nc = space.mesh().num_cells();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(space.nw(), nc);
  if (!s) return out;
  const auto& ct = space.cell_tables(Integrand::source);
  parallel_for(nc, cfg_.threads, [&](int c) {
    Eigen::VectorXd fw(ct.rule.size());
    for (Eigen::Index q = 0; q < ct.rule.size(); ++q)
      fw(q) = ct.rule.weights(q) * s(space.cell_point(c, Integrand::source, q), time);
    out.col(c) = space.map(c).det * ct.scalar.transpose() * fw;
  });
  return out;
}

void TimeStepper::cell_system(int c, const CoupledState& prev, const CoupledState& it, const Eigen::VectorXd& src1,
                              const Eigen::VectorXd& src2, const ConvectionFunctional* conv, Eigen::MatrixXd& kmat,
                              Eigen::VectorXd& b, Eigen::MatrixXd* aux) const {
  const HdgSpace& space = *space_;
  const Mesh& mesh = space.mesh();
  const int l = space.local_size();
  const int nw = space.nw(), nm = space.nm();
  const int ws = space.local_scalar_offset();
  const int ts = space.local_trace_offset();
  const double det = space.map(c).det;
  const double dt = cfg_.dt;
  const Eigen::MatrixXd& sa = cells_[c].sa;

  // cubic terms at the Newton iterate
  const auto& ct = space.cell_tables(Integrand::nonlinear);
  const Eigen::VectorXd uq = ct.scalar * it.u.scalar.col(c);
  const Eigen::VectorXd wq = ct.rule.weights * det;
  const Eigen::VectorXd w3 = (3.0 * wq.array() * uq.array().square()).matrix();
  const Eigen::MatrixXd nmat = ct.scalar.transpose() * w3.asDiagonal() * ct.scalar;
  const Eigen::VectorXd cubic = ct.scalar.transpose() * (wq.array() * uq.array().cube()).matrix();

  kmat.setZero(2 * l, 2 * l);
  kmat.topLeftCorner(l, l) = (dt / cfg_.pe) * sa;
  kmat.bottomRightCorner(l, l) = -cfg_.eps * cfg_.eps * sa;
  kmat.block(l + ws, l + ws, nw, nw) += nmat;
  for (int i = 0; i < nw; ++i) {
    kmat(ws + i, l + ws + i) = -det;
    kmat(l + ws + i, ws + i) = -det;
  }

  if (aux) {
    // decoupled SPD-able surrogate: the coupling -M is replaced by reaction
    // shifts sqrt(a/b) M and sqrt(b/a) M, a = dt/Pe, b = eps^2
    const double ab = std::sqrt((dt / cfg_.pe) / (cfg_.eps * cfg_.eps));
    aux->setZero(2 * l, 2 * l);
    aux->topLeftCorner(l, l) = kmat.topLeftCorner(l, l);
    aux->bottomRightCorner(l, l) = kmat.bottomRightCorner(l, l);
    for (int i = 0; i < nw; ++i) {
      (*aux)(ws + i, ws + i) -= ab * det;
      (*aux)(l + ws + i, l + ws + i) += det / ab;
    }
  }

  b.setZero(2 * l);
  const Eigen::VectorXd uprev = det * prev.u.scalar.col(c);
  // u-equation: dt S [ (u^{n-1}/dt, w) - B(u^{n-1}, uh^{n-1}; w, mu) + (s1, w) ]
  Eigen::VectorXd g1w = uprev / dt + src1;
  if (conv) g1w -= conv->cell.col(c);
  b.segment(ws, nw) = -dt * g1w;
  if (conv && conv->trace.size() > 0) {
    for (int lf = 0; lf < 3; ++lf) {
      const int f = mesh.cell_faces[c][lf];
      // each face's trace functional is carried by its first cell
      if (mesh.face_cells[f][0] != c) continue;
      b.segment(ts + lf * nm, nm) = dt * conv->trace.col(f);
    }
  }
  // phi-equation: -S [ (2 u_j^3 + u^{n-1} + s2, w) ]
  b.segment(l + ws, nw) = 2.0 * cubic + uprev + src2;
}

void TimeStepper::assemble(const CoupledState& prev, const CoupledState& iterate, double time, LinearizedSystem* sys,
                           double* residual) const {
  const HdgSpace& space = *space_;
  const Mesh& mesh = space.mesh();
  const int nc = mesh.num_cells();
  const int l = space.local_size();
  const int n = 2 * l;
  const int base = 2 * space.nv() + space.nw();
  const int ni = 2 * base;
  const int tb = 2 * space.nm();

  const Eigen::MatrixXd s1 = source_moments(sources_.s1, time);
  const Eigen::MatrixXd s2 = source_moments(sources_.s2, time);
  const bool want_aux = sys && cfg_.preconditioner == Preconditioner::split_ichol;
  std::optional<ConvectionFunctional> conv;
  if (convection_) conv = convection_->apply(prev.u.scalar, prev.u.trace);

  if (sys) {
    sys->problem = CondensationProblem{};
    sys->problem.interior_size = ni;
    sys->problem.trace_block = tb;
    sys->problem.trace_split = space.nm();
    if (want_aux) sys->problem.auxiliary.resize(nc);
    sys->problem.cells.resize(nc);
    // warm start from the iterate's traces
    sys->problem.initial_trace.resize(tb, mesh.num_faces());
    sys->problem.initial_trace.topRows(space.nm()) = iterate.phi.trace;
    sys->problem.initial_trace.bottomRows(space.nm()) = iterate.u.trace;
  }
  std::vector<double> interior_sq(residual ? nc : 0, 0.0);
  std::vector<Eigen::VectorXd> trace_res(residual ? nc : 0);

  parallel_for(nc, cfg_.threads, [&](int c) {
    Eigen::MatrixXd kmat, amat;
    Eigen::VectorXd b;
    cell_system(c, prev, iterate, s1.col(c), s2.col(c), conv ? &*conv : nullptr, kmat, b, want_aux ? &amat : nullptr);
    Eigen::MatrixXd kp(n, n);
    Eigen::VectorXd bp(n);
    for (int i = 0; i < n; ++i) {
      bp(permutation_[i]) = b(i);
      for (int j = 0; j < n; ++j) kp(permutation_[i], permutation_[j]) = kmat(i, j);
    }
    if (residual) {
      Eigen::VectorXd x(n);
      const Eigen::VectorXd xu = gather(space, iterate.u, c), xp = gather(space, iterate.phi, c);
      for (int i = 0; i < l; ++i) {
        x(permutation_[i]) = xp(i);
        x(permutation_[l + i]) = xu(i);
      }
      const Eigen::VectorXd r = kp * x - bp;
      interior_sq[c] = r.head(ni).squaredNorm();
      trace_res[c] = r.tail(n - ni);
    }
    if (sys) {
      LocalSystem& ls = sys->problem.cells[c];
      ls.matrix = std::move(kp);
      ls.rhs = std::move(bp);
      if (want_aux) {
        Eigen::MatrixXd& ap = sys->problem.auxiliary[c].matrix;
        ap.resize(n, n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) ap(permutation_[i], permutation_[j]) = amat(i, j);
        sys->problem.auxiliary[c].rhs = Eigen::VectorXd::Zero(n);
      }
    }
  });

  if (residual) {
    Eigen::MatrixXd faces = Eigen::MatrixXd::Zero(tb, mesh.num_faces());
    double sq = 0.0;
    for (int c = 0; c < nc; ++c) {
      sq += interior_sq[c];
      for (int lf = 0; lf < 3; ++lf) faces.col(mesh.cell_faces[c][lf]) += trace_res[c].segment(lf * tb, tb);
    }
    *residual = std::sqrt(sq + faces.squaredNorm());
    if (sys) sys->residual = *residual;
  }
}

LinearizedSystem TimeStepper::linearize(const CoupledState& prev, const CoupledState& iterate, double time) const {
  LinearizedSystem sys;
  double r = 0.0;
  assemble(prev, iterate, time, &sys, &r);
  return sys;
}

double TimeStepper::residual(const CoupledState& prev, const CoupledState& iterate, double time) const {
  double r = 0.0;
  assemble(prev, iterate, time, nullptr, &r);
  return r;
}

CoupledState TimeStepper::unpack(const CondensedSolution& sol, const CoupledState& like) const {
  const HdgSpace& space = *space_;
  const int nq = 2 * space.nv(), nw = space.nw(), nm = space.nm();
  const int base = nq + nw;
  CoupledState s;
  s.step = like.step;
  s.time = like.time;
  s.phi.flux = sol.interior.topRows(nq);
  s.phi.scalar = sol.interior.middleRows(nq, nw);
  s.u.flux = sol.interior.middleRows(base, nq);
  s.u.scalar = sol.interior.middleRows(base + nq, nw);
  s.phi.trace = sol.trace.topRows(nm);
  s.u.trace = sol.trace.bottomRows(nm);
  s.mass = compute_mass(space, s);
  return s;
}

NewtonUpdate TimeStepper::newton_step(const CoupledState& prev, const CoupledState& iterate, double time) const {
  const LinearizedSystem sys = linearize(prev, iterate, time);
  const CondensedSolution sol = condense_and_solve(space_->mesh(), sys.problem, cfg_.solver_options());
  NewtonUpdate out;
  out.state = unpack(sol, iterate);
  out.residual = residual(prev, out.state, time);
  out.minres_iterations = sol.minres_iterations;
  out.asymmetry = sol.relative_asymmetry;
  return out;
}

CoupledState TimeStepper::advance(const CoupledState& prev, TimeStepReport* report) const {
  TimeStepReport rep;
  const int step = prev.step + 1;
  const double time = step * cfg_.dt;
  CoupledState it = prev;
  it.step = step;
  it.time = time;
  int growth = 0;
  for (int iter = 0;; ++iter) {
    LinearizedSystem sys;
    double r = 0.0;
    assemble(prev, it, time, &sys, &r);
    if (!rep.residuals.empty()) {
      if (r >= rep.residuals.back()) {
        if (r > cfg_.newton_abs_tol) rep.monotone = false;
        growth = r > rep.residuals.back() ? growth + 1 : 0;
      } else {
        growth = 0;
      }
    }
    rep.residuals.push_back(r);
    if (r <= cfg_.newton_abs_tol) break;
    if (growth >= 2 || iter >= cfg_.newton_max_iter || !std::isfinite(r)) {
      const std::string why = growth >= 2 ? "diverged" : "did not converge";
      throw ConvergenceError("Newton " + why + " at step " + std::to_string(step) + " after " + std::to_string(iter) +
                                 " iterations (residual " + std::to_string(r) + ")",
                             rep.residuals);
    }
    const CondensedSolution sol = condense_and_solve(space_->mesh(), sys.problem, cfg_.solver_options());
    it = unpack(sol, it);
    rep.minres_iterations.push_back(sol.minres_iterations);
    rep.max_asymmetry = std::max(rep.max_asymmetry, sol.relative_asymmetry);
    ++rep.newton_iterations;
  }
  it.mass = compute_mass(*space_, it);
  rep.mass_drift = it.mass - prev.mass;
  rep.energy = compute_energy(*space_, ops_, it, cfg_.eps);
  if (report) *report = std::move(rep);
  return it;
}

}  // namespace hdgch
