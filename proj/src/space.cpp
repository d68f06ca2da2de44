#include "hdgch/space.hpp"

#include "hdgch/error.hpp"

namespace hdgch {

namespace {

int cell_exactness(Integrand kind, int k) {
  switch (kind) {
    case Integrand::bilinear: return 2 * (k + 1);
    case Integrand::nonlinear: return 4 * (k + 1);
    case Integrand::source: return 2 * (k + 1) + 4;
  }
  return 0;
}

}  // namespace

HdgSpace::HdgSpace(const Mesh& mesh, int k)
    : mesh_(&mesh),
      k_(k),
      nv_(cell_dimension(k)),
      nw_(cell_dimension(k + 1)),
      nm_(face_dimension(k)),
      flux_basis_(BasisKind::cell, k),
      scalar_basis_(BasisKind::cell, k + 1),
      trace_basis_(BasisKind::face, k) {
  if (k < 0) throw ParameterError("polynomial degree k must be nonnegative");
  const int nc = mesh.num_cells();
  maps_.reserve(nc);
  for (int c = 0; c < nc; ++c) maps_.push_back(cell_map(mesh, c));
  face_lengths_.resize(mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) face_lengths_[f] = face_geometry(mesh, f).length;

  for (int kind = 0; kind < 3; ++kind) {
    const int deg = cell_exactness(static_cast<Integrand>(kind), k);
    CellTables& ct = cell_tables_[kind];
    ct.rule = triangle_rule<double>(deg);
    const Eigen::Index nq = ct.rule.size();
    ct.scalar.resize(nq, nw_);
    ct.scalar_dxi.resize(nq, nw_);
    ct.scalar_deta.resize(nq, nw_);
    ct.flux.resize(nq, nv_);
    ct.flux_dxi.resize(nq, nv_);
    ct.flux_deta.resize(nq, nv_);
    for (Eigen::Index q = 0; q < nq; ++q) {
      const double xi = ct.rule.points(0, q), eta = ct.rule.points(1, q);
      ct.scalar.row(q) = scalar_basis_.values(xi, eta).transpose();
      const auto gs = scalar_basis_.gradients(xi, eta);
      ct.scalar_dxi.row(q) = gs.row(0);
      ct.scalar_deta.row(q) = gs.row(1);
      ct.flux.row(q) = flux_basis_.values(xi, eta).transpose();
      const auto gf = flux_basis_.gradients(xi, eta);
      ct.flux_dxi.row(q) = gf.row(0);
      ct.flux_deta.row(q) = gf.row(1);
    }

    FaceTables& ft = face_tables_[kind];
    ft.rule = segment_rule<double>(deg);
    ft.trace = trace_basis_.tabulate(ft.rule);

    auto& cft = cell_face_tables_[kind];
    cft.resize(3 * static_cast<std::size_t>(nc));
    for (int c = 0; c < nc; ++c) {
      for (int lf = 0; lf < 3; ++lf) {
        const int f = mesh.cell_faces[c][lf];
        CellFaceTables& t = cft[3 * c + lf];
        t.scalar.resize(ft.rule.size(), nw_);
        t.flux.resize(ft.rule.size(), nv_);
        for (Eigen::Index q = 0; q < ft.rule.size(); ++q) {
          const Point2 ref = maps_[c].to_reference(face_point(mesh, f, ft.rule.points(0, q)));
          t.scalar.row(q) = scalar_basis_.values(ref.x(), ref.y()).transpose();
          t.flux.row(q) = flux_basis_.values(ref.x(), ref.y()).transpose();
        }
      }
    }
  }

  // bilinear face tables integrate P^{k+1} x P^k exactly
  trace_proj_.resize(3 * static_cast<std::size_t>(nc));
  const FaceTables& fb = face_tables_[index(Integrand::bilinear)];
  for (int c = 0; c < nc; ++c) {
    for (int lf = 0; lf < 3; ++lf) {
      const CellFaceTables& t = cell_face_tables_[index(Integrand::bilinear)][3 * c + lf];
      trace_proj_[3 * c + lf] = fb.trace.transpose() * fb.rule.weights.asDiagonal() * t.scalar;
    }
  }

  scalar_integrals_.resize(nw_, nc);
  const CellTables& cb = cell_tables_[index(Integrand::bilinear)];
  const Eigen::VectorXd ref_integrals = cb.scalar.transpose() * cb.rule.weights;
  for (int c = 0; c < nc; ++c) scalar_integrals_.col(c) = maps_[c].det * ref_integrals;
}

Eigen::Matrix<double, 2, Eigen::Dynamic> HdgSpace::scalar_gradients(int cell, Integrand kind, Eigen::Index q) const {
  const CellTables& ct = cell_tables(kind);
  const Eigen::Matrix2d& ji = maps_[cell].inverse_jacobian;
  Eigen::Matrix<double, 2, Eigen::Dynamic> g(2, nw_);
  // grad_x = J^{-T} grad_xi
  g.row(0) = ji(0, 0) * ct.scalar_dxi.row(q) + ji(1, 0) * ct.scalar_deta.row(q);
  g.row(1) = ji(0, 1) * ct.scalar_dxi.row(q) + ji(1, 1) * ct.scalar_deta.row(q);
  return g;
}

HdgTriple HdgTriple::zeros(const HdgSpace& space) {
  const Mesh& m = space.mesh();
  return {Eigen::MatrixXd::Zero(2 * space.nv(), m.num_cells()), Eigen::MatrixXd::Zero(space.nw(), m.num_cells()),
          Eigen::MatrixXd::Zero(space.nm(), m.num_faces())};
}

Eigen::VectorXd gather(const HdgSpace& space, const HdgTriple& t, int cell) {
  Eigen::VectorXd v(space.local_size());
  v.head(2 * space.nv()) = t.flux.col(cell);
  v.segment(space.local_scalar_offset(), space.nw()) = t.scalar.col(cell);
  for (int lf = 0; lf < 3; ++lf)
    v.segment(space.local_trace_offset() + lf * space.nm(), space.nm()) = t.trace.col(space.mesh().cell_faces[cell][lf]);
  return v;
}

double integrate_scalar(const HdgSpace& space, const Eigen::MatrixXd& scalar) {
  return space.scalar_integrals().cwiseProduct(scalar).sum();
}

double evaluate_scalar(const HdgSpace& space, const Eigen::MatrixXd& scalar, const Point2& x) {
  const auto cell = space.mesh().locate(x);
  if (!cell) throw IndexError("point outside the domain");
  return evaluate_cell(space.scalar_basis(), space.map(*cell), scalar.col(*cell), x);
}

}  // namespace hdgch
