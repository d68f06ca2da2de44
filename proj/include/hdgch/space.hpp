#pragma once

#include "hdgch/mesh.hpp"
#include "hdgch/polybasis.hpp"

#include <Eigen/Core>

#include <array>
#include <vector>

namespace hdgch {

/// Quadrature strength classes used throughout the discretization.
enum class Integrand {
  bilinear,   ///< products of two discrete functions: exact for degree 2(k+1)
  nonlinear,  ///< quartic terms (u^3 w, (u^2-1)^2): exact for degree 4(k+1)
  source,     ///< smooth data times a discrete function: degree 2(k+1)+4
};

/// Discrete spaces on a mesh: V_h = [P^k]^2, W_h = P^{k+1}, M_h = P^k(E),
/// with quadrature tables and per-cell geometry precomputed.
///
/// Local coefficient layout for a triple (flux, scalar, trace) on one cell is
/// [flux_x (nv) | flux_y (nv) | scalar (nw) | trace on local faces 0,1,2 (nm each)].
class HdgSpace {
 public:
  HdgSpace(const Mesh& mesh, int k);

  const Mesh& mesh() const { return *mesh_; }
  int k() const { return k_; }
  /// Dimension of P^k on a cell (one flux component).
  int nv() const { return nv_; }
  /// Dimension of P^{k+1} on a cell.
  int nw() const { return nw_; }
  /// Dimension of P^k on a face.
  int nm() const { return nm_; }
  int local_flux_offset() const { return 0; }
  int local_scalar_offset() const { return 2 * nv_; }
  int local_trace_offset() const { return 2 * nv_ + nw_; }
  int local_size() const { return 2 * nv_ + nw_ + 3 * nm_; }

  const ReferenceBasis<double>& flux_basis() const { return flux_basis_; }
  const ReferenceBasis<double>& scalar_basis() const { return scalar_basis_; }
  const ReferenceBasis<double>& trace_basis() const { return trace_basis_; }

  const CellMap& map(int cell) const { return maps_[cell]; }
  double face_length(int face) const { return face_lengths_[face]; }

  struct CellTables {
    TriangleRule<double> rule;
    Eigen::MatrixXd scalar;     ///< nq x nw
    Eigen::MatrixXd scalar_dxi; ///< reference d/dxi, nq x nw
    Eigen::MatrixXd scalar_deta;
    Eigen::MatrixXd flux;       ///< nq x nv
    Eigen::MatrixXd flux_dxi;
    Eigen::MatrixXd flux_deta;
  };
  struct FaceTables {
    SegmentRule<double> rule;
    Eigen::MatrixXd trace;  ///< nq x nm, parametrized along the stored face orientation
  };
  /// Cell-side tabulation on one face: cell basis values at the face rule points.
  struct CellFaceTables {
    Eigen::MatrixXd scalar;  ///< nq x nw
    Eigen::MatrixXd flux;    ///< nq x nv
  };

  const CellTables& cell_tables(Integrand kind) const { return cell_tables_[index(kind)]; }
  const FaceTables& face_tables(Integrand kind) const { return face_tables_[index(kind)]; }
  const CellFaceTables& cell_face_tables(int cell, int local_face, Integrand kind) const {
    return cell_face_tables_[index(kind)][3 * cell + local_face];
  }
  /// Face projection of the scalar-basis trace: nm x nw.
  const Eigen::MatrixXd& trace_projection(int cell, int local_face) const { return trace_proj_[3 * cell + local_face]; }

  /// Physical gradients of the scalar basis at cell-rule point q: 2 x nw.
  Eigen::Matrix<double, 2, Eigen::Dynamic> scalar_gradients(int cell, Integrand kind, Eigen::Index q) const;
  /// Physical points of the cell rule.
  Point2 cell_point(int cell, Integrand kind, Eigen::Index q) const {
    return maps_[cell].to_physical(cell_tables(kind).rule.points.col(q));
  }
  Point2 face_point_at(int face, Integrand kind, Eigen::Index q) const {
    return face_point(*mesh_, face, face_tables(kind).rule.points(0, q));
  }

  /// (phi_i, 1)_K for every scalar basis function of every cell: nw x ncells.
  const Eigen::MatrixXd& scalar_integrals() const { return scalar_integrals_; }

 private:
  static int index(Integrand kind) { return static_cast<int>(kind); }

  const Mesh* mesh_;
  int k_, nv_, nw_, nm_;
  ReferenceBasis<double> flux_basis_, scalar_basis_, trace_basis_;
  std::vector<CellMap> maps_;
  std::vector<double> face_lengths_;
  std::array<CellTables, 3> cell_tables_;
  std::array<FaceTables, 3> face_tables_;
  std::array<std::vector<CellFaceTables>, 3> cell_face_tables_;
  std::vector<Eigen::MatrixXd> trace_proj_;
  Eigen::MatrixXd scalar_integrals_;
};

/// Discrete triple (flux, scalar, trace) over the whole mesh: flux is
/// 2nv x ncells, scalar nw x ncells, trace nm x nfaces.
struct HdgTriple {
  Eigen::MatrixXd flux;
  Eigen::MatrixXd scalar;
  Eigen::MatrixXd trace;

  static HdgTriple zeros(const HdgSpace& space);
};

/// Local coefficient vector of `t` on `cell`.
Eigen::VectorXd gather(const HdgSpace& space, const HdgTriple& t, int cell);

/// (u, 1)_Omega for a scalar field in W_h.
double integrate_scalar(const HdgSpace& space, const Eigen::MatrixXd& scalar);

/// Value of a W_h function at a physical point.
double evaluate_scalar(const HdgSpace& space, const Eigen::MatrixXd& scalar, const Point2& x);

}  // namespace hdgch
