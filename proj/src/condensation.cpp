#include "hdgch/condensation.hpp"

#include "hdgch/error.hpp"
#include "hdgch/parallel.hpp"

#include <optional>
#include <string>

namespace hdgch {

namespace {

struct CellSchur {
  Eigen::MatrixXd matrix;  // nt x nt
  Eigen::VectorXd rhs;     // nt
  Eigen::VectorXd column;  // nt, multiplier coupling
  double corner = 0.0;
  double constraint_rhs = 0.0;
};

}  // namespace

CondensedSystem condense(const Mesh& mesh, const CondensationProblem& problem, const SolverOptions& options) {
  const int nc = mesh.num_cells();
  if (static_cast<int>(problem.cells.size()) != nc) throw AssemblyError("condense: one local system per cell required");
  const int ni = problem.interior_size;
  const int tb = problem.trace_block;
  const int nt = 3 * tb;
  const bool mult = problem.with_multiplier;

  CondensedSystem sys;
  sys.trace_block = tb;
  sys.with_multiplier = mult;
  sys.eliminations.resize(nc);
  std::vector<CellSchur> schur(nc);

  parallel_for(nc, options.threads, [&](int c) {
    const LocalSystem& ls = problem.cells[c];
    if (ls.matrix.rows() != ni + nt || ls.matrix.cols() != ni + nt || ls.rhs.size() != ni + nt)
      throw AssemblyError("condense: local system of cell " + std::to_string(c) + " has the wrong size");
    const auto kii = ls.matrix.topLeftCorner(ni, ni);
    const auto kit = ls.matrix.topRightCorner(ni, nt);
    const auto kti = ls.matrix.bottomLeftCorner(nt, ni);
    const auto ktt = ls.matrix.bottomRightCorner(nt, nt);
    const DenseBlock<double> block(kii, c);
    const int extra = mult ? 2 : 1;
    Eigen::MatrixXd rhs(ni, nt + extra);
    rhs.leftCols(nt) = kit;
    rhs.col(nt) = ls.rhs.head(ni);
    if (mult) rhs.col(nt + 1) = ls.constraint.head(ni);
    const Eigen::MatrixXd sol = block.solve(rhs);

    CellElimination& el = sys.eliminations[c];
    el.coupling = sol.leftCols(nt);
    el.particular = sol.col(nt);
    CellSchur& s = schur[c];
    s.matrix = ktt - kti * el.coupling;
    s.rhs = ls.rhs.tail(nt) - kti * el.particular;
    if (mult) {
      el.multiplier_column = sol.col(nt + 1);
      const auto ci = ls.constraint.head(ni);
      s.column = ls.constraint.tail(nt) - kti * el.multiplier_column;
      s.corner = -ci.dot(el.multiplier_column);
      s.constraint_rhs = -ci.dot(el.particular);
    }
  });

  const Eigen::Index ntrace = static_cast<Eigen::Index>(mesh.num_faces()) * tb;
  const Eigen::Index dim = ntrace + (mult ? 1 : 0);
  sys.matrix = SymmetricSparseMatrix<double>(dim);
  sys.matrix.reserve(static_cast<std::size_t>(nc) * (nt * nt + (mult ? 2 * nt + 1 : 0)));
  sys.rhs = Eigen::VectorXd::Zero(dim);
  double corner = 0.0;
  double constraint_rhs = problem.constraint_value;
  for (int c = 0; c < nc; ++c) {
    const auto& faces = mesh.cell_faces[c];
    const CellSchur& s = schur[c];
    for (int a = 0; a < 3; ++a) {
      const Eigen::Index ra = static_cast<Eigen::Index>(faces[a]) * tb;
      for (int i = 0; i < tb; ++i) {
        sys.rhs(ra + i) += s.rhs(a * tb + i);
        for (int b = 0; b < 3; ++b) {
          const Eigen::Index rb = static_cast<Eigen::Index>(faces[b]) * tb;
          for (int j = 0; j < tb; ++j) sys.matrix.add(ra + i, rb + j, s.matrix(a * tb + i, b * tb + j));
        }
        if (mult) {
          sys.matrix.add(ra + i, ntrace, s.column(a * tb + i));
          sys.matrix.add(ntrace, ra + i, s.column(a * tb + i));
        }
      }
    }
    if (mult) {
      corner += s.corner;
      constraint_rhs += s.constraint_rhs;
    }
  }
  if (mult) {
    sys.matrix.add(ntrace, ntrace, corner);
    sys.rhs(ntrace) = constraint_rhs;
  }
  sys.matrix.finalize(options.symmetry_tolerance);
  return sys;
}

CondensedSolution back_substitute(const Mesh& mesh, const CondensationProblem& problem, const CondensedSystem& system,
                                  const Eigen::VectorXd& trace_solution) {
  const int nc = mesh.num_cells();
  const int tb = system.trace_block;
  const Eigen::Index ntrace = static_cast<Eigen::Index>(mesh.num_faces()) * tb;
  CondensedSolution out;
  out.trace = Eigen::Map<const Eigen::MatrixXd>(trace_solution.data(), tb, mesh.num_faces());
  out.multiplier = system.with_multiplier ? trace_solution(ntrace) : 0.0;
  out.interior.resize(problem.interior_size, nc);
  out.relative_asymmetry = system.matrix.relative_asymmetry();
  Eigen::VectorXd local(3 * tb);
  for (int c = 0; c < nc; ++c) {
    for (int a = 0; a < 3; ++a) local.segment(a * tb, tb) = out.trace.col(mesh.cell_faces[c][a]);
    const CellElimination& el = system.eliminations[c];
    out.interior.col(c) = el.particular - el.coupling * local;
    if (system.with_multiplier) out.interior.col(c) -= out.multiplier * el.multiplier_column;
  }
  return out;
}

CondensedSolution condense_and_solve(const Mesh& mesh, const CondensationProblem& problem, const SolverOptions& options) {
  const CondensedSystem sys = condense(mesh, problem, options);
  const int tb = problem.trace_block;
  const Eigen::Index ntrace = static_cast<Eigen::Index>(mesh.num_faces()) * tb;
  Eigen::VectorXd x0;
  if (problem.initial_trace.size() > 0) {
    if (problem.initial_trace.rows() != tb || problem.initial_trace.cols() != mesh.num_faces())
      throw AssemblyError("condense_and_solve: initial trace has the wrong shape");
    x0 = Eigen::VectorXd::Zero(sys.matrix.dimension());
    x0.head(ntrace) = problem.initial_trace.reshaped();
  }
  MinresResult<double> res;
  switch (options.preconditioner) {
    case Preconditioner::block_jacobi: {
      const BlockJacobi<double> jacobi(sys.matrix, tb);
      res = minres_solve<double>(sys.matrix, sys.rhs, options.minres,
                                 [&jacobi](const Eigen::VectorXd& r, Eigen::VectorXd& z) { jacobi.apply(r, z); }, x0);
      break;
    }
    case Preconditioner::split_ichol: {
      std::vector<int> field(ntrace);
      for (Eigen::Index i = 0; i < ntrace; ++i) field[i] = problem.trace_split > 0 && i % tb >= problem.trace_split ? 1 : 0;
      const Eigen::Index dim = sys.matrix.dimension();
      std::optional<SplitIncompleteCholesky<double>> ic;
      if (!problem.auxiliary.empty()) {
        CondensationProblem aux;
        aux.interior_size = problem.interior_size;
        aux.trace_block = tb;
        aux.cells = problem.auxiliary;
        ic.emplace(condense(mesh, aux, options).matrix, field);
      } else {
        field.resize(dim, -1);  // the multiplier keeps the identity
        ic.emplace(sys.matrix, field);
      }
      const auto apply = [&](const Eigen::VectorXd& r, Eigen::VectorXd& z) {
        if (ic->dimension() == dim) return ic->apply(r, z);
        Eigen::VectorXd zt;
        ic->apply(r.head(ntrace), zt);
        z = r;
        z.head(ntrace) = zt;
      };
      res = minres_solve<double>(sys.matrix, sys.rhs, options.minres, apply, x0);
      break;
    }
    case Preconditioner::none:
      res = minres_solve<double>(sys.matrix, sys.rhs, options.minres, {}, x0);
      break;
  }
  CondensedSolution out = back_substitute(mesh, problem, sys, res.x);
  out.minres_iterations = res.iterations;
  out.minres_residual = res.residual;
  return out;
}

std::string to_string(Preconditioner p) {
  switch (p) {
    case Preconditioner::block_jacobi: return "jacobi";
    case Preconditioner::split_ichol: return "ichol";
    default: return "none";
  }
}

Preconditioner parse_preconditioner(const std::string& s) {
  if (s == "none") return Preconditioner::none;
  if (s == "jacobi") return Preconditioner::block_jacobi;
  if (s == "ichol") return Preconditioner::split_ichol;
  throw ParameterError("unknown preconditioner '" + s + "' (expected none, jacobi or ichol)");
}

}  // namespace hdgch
