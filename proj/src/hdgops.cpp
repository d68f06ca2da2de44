#include "hdgch/hdgops.hpp"

#include "hdgch/error.hpp"
#include "hdgch/parallel.hpp"

#include <cmath>
#include <string>

namespace hdgch {

Eigen::MatrixXd LocalBlocks::matrix() const {
  const Eigen::Index nq = rq.rows(), nu = ww.rows(), nh = hathat.rows();
  Eigen::MatrixXd m(nq + nu + nh, nq + nu + nh);
  m << rq, ru, rhat,  //
      wq, ww, what,   //
      hatq, hatu, hathat;
  return m;
}

LocalBlocks assemble_A_local(const HdgSpace& space, int cell, double alpha) {
  if (!(alpha > 0)) throw ParameterError("stabilization alpha must be positive");
  const Mesh& mesh = space.mesh();
  const int nv = space.nv(), nw = space.nw(), nm = space.nm();
  const CellMap& map = space.map(cell);
  const auto& ct = space.cell_tables(Integrand::bilinear);
  const Eigen::Matrix2d& ji = map.inverse_jacobian;

  LocalBlocks b;
  b.rq = Eigen::MatrixXd::Zero(2 * nv, 2 * nv);
  b.ru = Eigen::MatrixXd::Zero(2 * nv, nw);
  b.mass = Eigen::MatrixXd::Zero(nw, nw);
  for (Eigen::Index q = 0; q < ct.rule.size(); ++q) {
    const double wdet = ct.rule.weights(q) * map.det;
    const auto fv = ct.flux.row(q);
    const auto sv = ct.scalar.row(q);
    // physical flux-basis gradients, J^{-T} grad_xi
    const Eigen::RowVectorXd gx = ji(0, 0) * ct.flux_dxi.row(q) + ji(1, 0) * ct.flux_deta.row(q);
    const Eigen::RowVectorXd gy = ji(0, 1) * ct.flux_dxi.row(q) + ji(1, 1) * ct.flux_deta.row(q);
    const Eigen::MatrixXd vv = wdet * fv.transpose() * fv;
    b.rq.topLeftCorner(nv, nv) += vv;
    b.rq.bottomRightCorner(nv, nv) += vv;
    b.ru.topRows(nv) -= wdet * gx.transpose() * sv;
    b.ru.bottomRows(nv) -= wdet * gy.transpose() * sv;
    b.mass.noalias() += wdet * sv.transpose() * sv;
  }
  b.wq = -b.ru.transpose();

  b.rhat = Eigen::MatrixXd::Zero(2 * nv, 3 * nm);
  b.ww = Eigen::MatrixXd::Zero(nw, nw);
  b.what = Eigen::MatrixXd::Zero(nw, 3 * nm);
  b.hatu = Eigen::MatrixXd::Zero(3 * nm, nw);
  b.hathat = Eigen::MatrixXd::Zero(3 * nm, 3 * nm);
  const auto& ft = space.face_tables(Integrand::bilinear);
  for (int lf = 0; lf < 3; ++lf) {
    const int f = mesh.cell_faces[cell][lf];
    const double len = space.face_length(f);
    const Point2 n = mesh.outward_normal(cell, lf);
    const auto& cf = space.cell_face_tables(cell, lf, Integrand::bilinear);
    // int_E phi_i psi_j over the face, nv x nm
    const Eigen::MatrixXd vm = len * cf.flux.transpose() * ft.rule.weights.asDiagonal() * ft.trace;
    b.rhat.block(0, lf * nm, nv, nm) = n.x() * vm;
    b.rhat.block(nv, lf * nm, nv, nm) = n.y() * vm;

    // alpha h^-1 <a, b>_E with face mass |E| I and h_E = |E| reduces to alpha a.b
    const Eigen::MatrixXd& t = space.trace_projection(cell, lf);
    b.stabilization[lf] = alpha / len;
    const double s = b.stabilization[lf] * len;
    b.ww += s * t.transpose() * t;
    b.what.middleCols(lf * nm, nm) = -s * t.transpose();
    b.hatu.middleRows(lf * nm, nm) = -s * t;
    b.hathat.block(lf * nm, lf * nm, nm, nm) = s * Eigen::MatrixXd::Identity(nm, nm);
  }
  b.hatq = -b.rhat.transpose();
  return b;
}

LocalOperators build_local_operators(const HdgSpace& space, double alpha, int threads) {
  LocalOperators ops;
  ops.alpha = alpha;
  ops.matrices.resize(space.mesh().num_cells());
  parallel_for(space.mesh().num_cells(), threads,
               [&](int c) { ops.matrices[c] = assemble_A_local(space, c, alpha).matrix(); });
  return ops;
}

double a_form(const HdgSpace& space, const LocalOperators& ops, const HdgTriple& trial, const HdgTriple& test) {
  double sum = 0.0;
  for (int c = 0; c < space.mesh().num_cells(); ++c)
    sum += gather(space, test, c).dot(ops.matrices[c] * gather(space, trial, c));
  return sum;
}

ConvectionOperator::ConvectionOperator(const HdgSpace& space, const VelocityField& beta, std::vector<double> tau_c,
                                       double boundary_tolerance)
    : space_(&space), tau_(std::move(tau_c)) {
  const Mesh& mesh = space.mesh();
  const int nc = mesh.num_cells();
  const int nw = space.nw();
  if (!tau_.empty()) {
    if (static_cast<int>(tau_.size()) != mesh.num_faces())
      throw ParameterError("tau_c needs one value per face");
    for (double t : tau_)
      if (!(t > 0)) throw ParameterError("tau_c must be positive on every face");
  }

  // beta.n = 0 on the boundary, checked at the source-rule points
  const auto& fts = space.face_tables(Integrand::source);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    if (!mesh.boundary[f]) continue;
    for (Eigen::Index q = 0; q < fts.rule.size(); ++q) {
      const double bn = std::abs(beta(space.face_point_at(f, Integrand::source, q)).dot(mesh.face_normals[f]));
      max_boundary_flux_ = std::max(max_boundary_flux_, bn);
      if (bn > boundary_tolerance)
        throw ModelError("velocity penetrates the boundary: |beta.n| = " + std::to_string(bn) + " on face " +
                         std::to_string(f));
    }
  }

  const auto& cts = space.cell_tables(Integrand::source);
  cell_.resize(nc);
  face_.resize(3 * static_cast<std::size_t>(nc));
  if (upwind()) face_uu_.resize(3 * static_cast<std::size_t>(nc));
  const auto& ftb = space.face_tables(Integrand::bilinear);
  for (int c = 0; c < nc; ++c) {
    const double det = space.map(c).det;
    Eigen::MatrixXd cm = Eigen::MatrixXd::Zero(nw, nw);
    for (Eigen::Index q = 0; q < cts.rule.size(); ++q) {
      const Point2 b = beta(space.cell_point(c, Integrand::source, q));
      const auto g = space.scalar_gradients(c, Integrand::source, q);
      const Eigen::RowVectorXd bgrad = b.x() * g.row(0) + b.y() * g.row(1);
      cm.noalias() -= cts.rule.weights(q) * det * bgrad.transpose() * cts.scalar.row(q);
    }
    cell_[c] = std::move(cm);
    for (int lf = 0; lf < 3; ++lf) {
      const int f = mesh.cell_faces[c][lf];
      const double len = space.face_length(f);
      const Point2 n = mesh.outward_normal(c, lf);
      const auto& cf = space.cell_face_tables(c, lf, Integrand::source);
      Eigen::VectorXd wbn(fts.rule.size());
      for (Eigen::Index q = 0; q < fts.rule.size(); ++q)
        wbn(q) = fts.rule.weights(q) * len * beta(space.face_point_at(f, Integrand::source, q)).dot(n);
      face_[3 * c + lf] = cf.scalar.transpose() * wbn.asDiagonal() * fts.trace;
      if (upwind()) {
        const auto& cfb = space.cell_face_tables(c, lf, Integrand::bilinear);
        face_uu_[3 * c + lf] = len * cfb.scalar.transpose() * ftb.rule.weights.asDiagonal() * cfb.scalar;
      }
    }
  }
}

ConvectionFunctional ConvectionOperator::apply(const Eigen::MatrixXd& u, const Eigen::MatrixXd& uhat) const {
  const HdgSpace& space = *space_;
  const Mesh& mesh = space.mesh();
  const int nc = mesh.num_cells();
  ConvectionFunctional out;
  out.cell.resize(space.nw(), nc);
  out.trace = Eigen::MatrixXd::Zero(space.nm(), mesh.num_faces());
  for (int c = 0; c < nc; ++c) {
    Eigen::VectorXd col = cell_[c] * u.col(c);
    for (int lf = 0; lf < 3; ++lf) {
      const int f = mesh.cell_faces[c][lf];
      col.noalias() += face_[3 * c + lf] * uhat.col(f);
      if (upwind()) {
        const double tau = tau_[f];
        const double len = space.face_length(f);
        // <tau (u - uh), w>_E and -<tau (u - uh), mu>_E; <phi_i, psi_j>_E = |E| T^T
        const Eigen::MatrixXd& t = space.trace_projection(c, lf);
        col.noalias() += tau * (face_uu_[3 * c + lf] * u.col(c) - len * t.transpose() * uhat.col(f));
        out.trace.col(f).noalias() -= tau * len * (t * u.col(c) - uhat.col(f));
      }
    }
    out.cell.col(c) = col;
  }
  return out;
}

Eigen::MatrixXd assemble_B_explicit(const HdgSpace& space, const Eigen::MatrixXd& u, const Eigen::MatrixXd& uhat,
                                    const VelocityField& beta) {
  return ConvectionOperator(space, beta).apply(u, uhat).cell;
}

ConvectionFunctional assemble_B_upwind(const HdgSpace& space, const Eigen::MatrixXd& u, const Eigen::MatrixXd& uhat,
                                       const VelocityField& beta, double tau_c) {
  if (!(tau_c > 0)) throw ParameterError("tau_c must be positive");
  return ConvectionOperator(space, beta, std::vector<double>(space.mesh().num_faces(), tau_c)).apply(u, uhat);
}

namespace {

/// Local index sets of a triple: flux, scalar, trace.
struct TripleLayout {
  int nq, nu, nh;
  explicit TripleLayout(const HdgSpace& s) : nq(2 * s.nv()), nu(s.nw()), nh(3 * s.nm()) {}
};

}  // namespace

HdgTriple laplacian_lift(const HdgSpace& space, const LocalOperators& ops, const Eigen::MatrixXd& u,
                         const SolverOptions& options) {
  const Mesh& mesh = space.mesh();
  const TripleLayout l(space);
  CondensationProblem prob;
  prob.interior_size = l.nq;
  prob.trace_block = space.nm();
  prob.cells.resize(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Eigen::MatrixXd& a = ops.matrices[c];
    LocalSystem& ls = prob.cells[c];
    // unknowns (q, uh); mu rows negated for symmetry
    ls.matrix.resize(l.nq + l.nh, l.nq + l.nh);
    ls.matrix << a.block(0, 0, l.nq, l.nq), a.block(0, l.nq + l.nu, l.nq, l.nh),  //
        -a.block(l.nq + l.nu, 0, l.nh, l.nq), -a.block(l.nq + l.nu, l.nq + l.nu, l.nh, l.nh);
    ls.rhs.resize(l.nq + l.nh);
    ls.rhs << -a.block(0, l.nq, l.nq, l.nu) * u.col(c), a.block(l.nq + l.nu, l.nq, l.nh, l.nu) * u.col(c);
  }
  const CondensedSolution sol = condense_and_solve(mesh, prob, options);
  HdgTriple t;
  t.flux = sol.interior;
  t.scalar = u;
  t.trace = sol.trace;
  return t;
}

Eigen::MatrixXd discrete_laplacian(const HdgSpace& space, const LocalOperators& ops, const Eigen::MatrixXd& u,
                                   const SolverOptions& options) {
  const HdgTriple lift = laplacian_lift(space, ops, u, options);
  const TripleLayout l(space);
  Eigen::MatrixXd out(space.nw(), space.mesh().num_cells());
  for (int c = 0; c < space.mesh().num_cells(); ++c) {
    const Eigen::VectorXd x = gather(space, lift, c);
    const Eigen::VectorXd aw = ops.matrices[c].middleRows(l.nq, l.nu) * x;
    out.col(c) = -aw / space.map(c).det;
  }
  return out;
}

Eigen::MatrixXd constant_scalar(const HdgSpace& space, double value) {
  Eigen::MatrixXd out(space.nw(), space.mesh().num_cells());
  for (int c = 0; c < space.mesh().num_cells(); ++c)
    out.col(c) = value * space.scalar_integrals().col(c) / space.map(c).det;
  return out;
}

LaplaceInverse hdg_laplace_inverse(const HdgSpace& space, const LocalOperators& ops, const Eigen::MatrixXd& u_in,
                                   const SolverOptions& options) {
  const Mesh& mesh = space.mesh();
  const TripleLayout l(space);
  Eigen::MatrixXd u = u_in;
  const double mean = integrate_scalar(space, u);
  if (std::abs(mean) > 1e-12) u -= constant_scalar(space, mean);

  LaplaceInverse out;
  if (u.cwiseAbs().maxCoeff() == 0.0) {
    out.triple = HdgTriple::zeros(space);
    return out;
  }
  CondensationProblem prob;
  prob.interior_size = l.nq + l.nu;
  prob.trace_block = space.nm();
  prob.with_multiplier = true;
  prob.constraint_value = 0.0;
  prob.cells.resize(mesh.num_cells());
  const int n = l.nq + l.nu + l.nh;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    LocalSystem& ls = prob.cells[c];
    ls.matrix = ops.matrices[c];
    ls.matrix.bottomRows(l.nu + l.nh) *= -1.0;
    ls.rhs = Eigen::VectorXd::Zero(n);
    ls.rhs.segment(l.nq, l.nu) = -space.map(c).det * u.col(c);
    ls.constraint = Eigen::VectorXd::Zero(n);
    ls.constraint.segment(l.nq, l.nu) = space.scalar_integrals().col(c);
  }
  const CondensedSolution sol = condense_and_solve(mesh, prob, options);
  out.triple.flux = sol.interior.topRows(l.nq);
  out.triple.scalar = sol.interior.bottomRows(l.nu);
  out.triple.trace = sol.trace;
  double s = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) s += space.map(c).det * u.col(c).dot(out.triple.scalar.col(c));
  out.norm = std::sqrt(std::max(0.0, s));
  return out;
}

}  // namespace hdgch
