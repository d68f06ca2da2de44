#pragma once

#include "hdgch/linalg.hpp"
#include "hdgch/mesh.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace hdgch {

/// One cell's dense equations. Unknowns are ordered interior first, then the
/// trace blocks of local faces 0, 1, 2 (trace_block entries each). The
/// optional constraint vector couples the cell to a global scalar multiplier:
/// it appears as a column (multiplier) and as a row (constraint).
struct LocalSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
  Eigen::VectorXd constraint;
};

struct CondensationProblem {
  int interior_size = 0;
  int trace_block = 0;
  std::vector<LocalSystem> cells;
  /// Appends one multiplier unknown with constraint sum_K c_K . x_K = constraint_value.
  bool with_multiplier = false;
  double constraint_value = 0.0;
  /// Within each trace block, entries [0, trace_split) form one field and the
  /// rest another (0: a single field). Used by the split preconditioner.
  int trace_split = 0;
  /// Optional MINRES starting guess, trace_block x nfaces.
  Eigen::MatrixXd initial_trace;
  /// Optional local systems (same layout, no multiplier) whose condensed
  /// matrix the split preconditioner factors instead of the system matrix.
  std::vector<LocalSystem> auxiliary;
};

enum class Preconditioner {
  none,
  block_jacobi,  ///< |D_E|^-1 per face block
  split_ichol,   ///< incomplete Cholesky of the sign-adjusted field blocks
                 ///< (of the auxiliary systems when present)
};

std::string to_string(Preconditioner p);
/// Accepts none, jacobi, ichol.
Preconditioner parse_preconditioner(const std::string& s);

struct SolverOptions {
  MinresOptions minres;
  Preconditioner preconditioner = Preconditioner::none;
  int threads = 1;
  double symmetry_tolerance = 1e-12;
};

/// Per-cell elimination data: interior = particular - coupling * trace - multiplier_column * lambda.
struct CellElimination {
  Eigen::VectorXd particular;
  Eigen::MatrixXd coupling;
  Eigen::VectorXd multiplier_column;
};

/// Trace-only system after static condensation.
struct CondensedSystem {
  SymmetricSparseMatrix<double> matrix;
  Eigen::VectorXd rhs;
  std::vector<CellElimination> eliminations;
  int trace_block = 0;
  bool with_multiplier = false;
};

struct CondensedSolution {
  Eigen::MatrixXd interior;  ///< interior_size x ncells
  Eigen::MatrixXd trace;     ///< trace_block x nfaces
  double multiplier = 0.0;
  int minres_iterations = 0;
  double minres_residual = 0.0;
  double relative_asymmetry = 0.0;
};

/// Eliminates interiors cell by cell and assembles the symmetric trace system.
/// Throws EliminationError for a singular interior block and AssemblyError when
/// the condensed matrix fails its symmetry certificate.
CondensedSystem condense(const Mesh& mesh, const CondensationProblem& problem, const SolverOptions& options);

/// Recovers interiors from a trace solution (and multiplier, if any).
CondensedSolution back_substitute(const Mesh& mesh, const CondensationProblem& problem, const CondensedSystem& system,
                                  const Eigen::VectorXd& trace_solution);

/// condense + MINRES + back_substitute.
CondensedSolution condense_and_solve(const Mesh& mesh, const CondensationProblem& problem, const SolverOptions& options);

}  // namespace hdgch
