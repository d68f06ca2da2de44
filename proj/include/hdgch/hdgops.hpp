#pragma once

#include "hdgch/condensation.hpp"
#include "hdgch/space.hpp"

#include <Eigen/Core>

#include <array>
#include <functional>
#include <vector>

namespace hdgch {

using VelocityField = std::function<Point2(const Point2&)>;

/// Element blocks of the diffusion form
///   A(q,u,uh; r,w,mu) = (q,r) - (u, div r) + <uh, r.n> + (div q, w) - <q.n, mu>
///                       + alpha <h^-1 (P u - uh), P w - mu>
/// on one cell, P being the face L2 projection onto P^k. Each block is named
/// (test, trial); trace blocks cover local faces 0, 1, 2 in order.
struct LocalBlocks {
  Eigen::MatrixXd rq;      ///< (q, r)
  Eigen::MatrixXd ru;      ///< -(u, div r)
  Eigen::MatrixXd rhat;    ///< <uh, r.n>
  Eigen::MatrixXd wq;      ///< (div q, w)
  Eigen::MatrixXd hatq;    ///< -<q.n, mu>
  Eigen::MatrixXd ww;      ///< alpha <h^-1 P u, P w>
  Eigen::MatrixXd what;    ///< -alpha <h^-1 uh, P w>
  Eigen::MatrixXd hatu;    ///< -alpha <h^-1 P u, mu>
  Eigen::MatrixXd hathat;  ///< alpha <h^-1 uh, mu>
  Eigen::MatrixXd mass;    ///< (u, w)
  std::array<double, 3> stabilization{};  ///< alpha / h_E per local face

  /// Full local matrix, rows (r, w, mu), columns (q, u, uh).
  Eigen::MatrixXd matrix() const;
};

LocalBlocks assemble_A_local(const HdgSpace& space, int cell, double alpha);

/// Cached local matrices of A for every cell.
struct LocalOperators {
  double alpha = 0.0;
  std::vector<Eigen::MatrixXd> matrices;
};

LocalOperators build_local_operators(const HdgSpace& space, double alpha, int threads = 1);

/// A(trial; test) summed over all cells.
double a_form(const HdgSpace& space, const LocalOperators& ops, const HdgTriple& trial, const HdgTriple& test);

/// Test-function coefficients of a convection functional: `cell` over W_h
/// (nw x ncells), `trace` over M_h (nm x nfaces; zero for the centered form).
struct ConvectionFunctional {
  Eigen::MatrixXd cell;
  Eigen::MatrixXd trace;
};

/// Explicit convection B(u, uh; w) = -(beta u, grad w) + <beta.n uh, w>, with
/// the optional penalty <tau_c (u - uh), w - mu>, as precomputed linear maps.
class ConvectionOperator {
 public:
  /// Empty `tau_c` selects the centered form; otherwise one positive value per face.
  ConvectionOperator(const HdgSpace& space, const VelocityField& beta, std::vector<double> tau_c = {},
                     double boundary_tolerance = 1e-10);

  ConvectionFunctional apply(const Eigen::MatrixXd& u, const Eigen::MatrixXd& uhat) const;
  bool upwind() const { return !tau_.empty(); }
  /// Largest |beta.n| seen at boundary quadrature points.
  double max_boundary_flux() const { return max_boundary_flux_; }

 private:
  const HdgSpace* space_;
  std::vector<double> tau_;
  std::vector<Eigen::MatrixXd> cell_;     // nw x nw
  std::vector<Eigen::MatrixXd> face_;     // nw x nm, 3 per cell
  std::vector<Eigen::MatrixXd> face_uu_;  // nw x nw, 3 per cell (upwind only)
  double max_boundary_flux_ = 0.0;
};

/// B(u, uh; w) of the centered form, for every W_h basis function.
Eigen::MatrixXd assemble_B_explicit(const HdgSpace& space, const Eigen::MatrixXd& u, const Eigen::MatrixXd& uhat,
                                    const VelocityField& beta);

/// B(u, uh; w, mu) including the penalty <tau_c (u - uh), w - mu>.
ConvectionFunctional assemble_B_upwind(const HdgSpace& space, const Eigen::MatrixXd& u, const Eigen::MatrixXd& uhat,
                                       const VelocityField& beta, double tau_c);

/// Auxiliary (q^u, uh^u) with A(q^u, u, uh^u; r, 0, mu) = 0 for all (r, mu).
HdgTriple laplacian_lift(const HdgSpace& space, const LocalOperators& ops, const Eigen::MatrixXd& u,
                         const SolverOptions& options = {});

/// Delta_h u defined by (Delta_h u, w) = -A(q^u, u, uh^u; r, w, mu).
Eigen::MatrixXd discrete_laplacian(const HdgSpace& space, const LocalOperators& ops, const Eigen::MatrixXd& u,
                                   const SolverOptions& options = {});

struct LaplaceInverse {
  HdgTriple triple;  ///< (Pi_V u, Pi_W u, Pi_M u)
  double norm = 0.0; ///< ||u||_{-1,h} = sqrt((u, Pi_W u))
};

/// HDG Laplace inverse of a mean-zero u (the mean is removed if present).
LaplaceInverse hdg_laplace_inverse(const HdgSpace& space, const LocalOperators& ops, const Eigen::MatrixXd& u,
                                   const SolverOptions& options = {});

/// Coefficients of the constant function 1 in each cell's scalar basis.
Eigen::MatrixXd constant_scalar(const HdgSpace& space, double value);

}  // namespace hdgch
