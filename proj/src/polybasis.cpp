#include "hdgch/polybasis.hpp"

#include "hdgch/error.hpp"

#include <Eigen/LU>

#include <string>

namespace hdgch {

CellMap cell_map(const Mesh& mesh, int cell) {
  const auto& c = mesh.cells.at(cell);
  CellMap m;
  m.origin = mesh.vertices[c[0]];
  m.jacobian.col(0) = mesh.vertices[c[1]] - m.origin;
  m.jacobian.col(1) = mesh.vertices[c[2]] - m.origin;
  m.det = m.jacobian.determinant();
  m.inverse_jacobian = m.jacobian.inverse();
  return m;
}

Eigen::MatrixXd project_cell(const ScalarField& f, int degree, const Mesh& mesh, int exactness) {
  if (exactness < 0) exactness = 2 * degree + 4;
  const ReferenceBasis<double> basis(BasisKind::cell, degree);
  const auto rule = triangle_rule<double>(exactness);
  const Eigen::MatrixXd table = basis.tabulate(rule);
  Eigen::MatrixXd out(basis.dimension(), mesh.num_cells());
  Eigen::VectorXd fw(rule.size());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const CellMap map = cell_map(mesh, c);
    for (Eigen::Index q = 0; q < rule.size(); ++q)
      fw(q) = rule.weights(q) * f(map.to_physical(rule.points.col(q)));
    out.col(c) = table.transpose() * fw;
  }
  return out;
}

Eigen::MatrixXd project_face(const ScalarField& f, int degree, const Mesh& mesh, int exactness) {
  if (exactness < 0) exactness = 2 * degree + 4;
  const ReferenceBasis<double> basis(BasisKind::face, degree);
  const auto rule = segment_rule<double>(exactness);
  const Eigen::MatrixXd table = basis.tabulate(rule);
  Eigen::MatrixXd out(basis.dimension(), mesh.num_faces());
  Eigen::VectorXd fw(rule.size());
  for (int e = 0; e < mesh.num_faces(); ++e) {
    for (Eigen::Index q = 0; q < rule.size(); ++q) fw(q) = rule.weights(q) * f(face_point(mesh, e, rule.points(0, q)));
    out.col(e) = table.transpose() * fw;
  }
  return out;
}

Eigen::MatrixXd trace_projection_matrix(int cell_degree, int face_degree, const Mesh& mesh, int cell, int face) {
  if (cell < 0 || cell >= mesh.num_cells()) throw IndexError("cell id " + std::to_string(cell) + " out of range");
  if (face < 0 || face >= mesh.num_faces()) throw IndexError("face id " + std::to_string(face) + " out of range");
  const auto& cf = mesh.cell_faces[cell];
  if (cf[0] != face && cf[1] != face && cf[2] != face)
    throw TopologyError("face " + std::to_string(face) + " is not a face of cell " + std::to_string(cell));
  const ReferenceBasis<double> cb(BasisKind::cell, cell_degree);
  const ReferenceBasis<double> fb(BasisKind::face, face_degree);
  const auto rule = segment_rule<double>(cell_degree + face_degree);
  const CellMap map = cell_map(mesh, cell);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(fb.dimension(), cb.dimension());
  for (Eigen::Index q = 0; q < rule.size(); ++q) {
    const double s = rule.points(0, q);
    const Point2 ref = map.to_reference(face_point(mesh, face, s));
    m.noalias() += rule.weights(q) * fb.values(s) * cb.values(ref.x(), ref.y()).transpose();
  }
  return m;
}

double evaluate_cell(const ReferenceBasis<double>& basis, const CellMap& map,
                     const Eigen::Ref<const Eigen::VectorXd>& coeffs, const Point2& x) {
  const Point2 ref = map.to_reference(x);
  return basis.values(ref.x(), ref.y()).dot(coeffs);
}

}  // namespace hdgch
