#pragma once

#include "hdgch/error.hpp"

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace hdgch {

/// Sparse matrix that is symmetric up to a recorded roundoff certificate.
///
/// Entries are gathered as triplets, sorted by (row, col) with a stable sort
/// so duplicates are summed in insertion order, and compressed on finalize.
/// finalize() rejects matrices whose max |a_ij - a_ji| exceeds
/// tolerance * max |a_ij|.
template <typename Scalar = double>
class SymmetricSparseMatrix {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Storage = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>;

  explicit SymmetricSparseMatrix(Eigen::Index dim = 0) : dim_(dim) {}

  Eigen::Index dimension() const { return dim_; }

  void add(Eigen::Index row, Eigen::Index col, Scalar value) {
    if (finalized_) throw AssemblyError("SymmetricSparseMatrix: add after finalize");
    triplets_.emplace_back(static_cast<int>(row), static_cast<int>(col), value);
  }

  void reserve(std::size_t n) { triplets_.reserve(n); }

  /// Compresses storage and computes the symmetry certificate.
  void finalize(Scalar tolerance = Scalar(1e-12)) {
    std::stable_sort(triplets_.begin(), triplets_.end(), [](const auto& a, const auto& b) {
      return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
    });
    storage_.resize(dim_, dim_);
    storage_.setFromTriplets(triplets_.begin(), triplets_.end());
    storage_.makeCompressed();
    triplets_.clear();
    triplets_.shrink_to_fit();

    max_entry_ = 0;
    for (int k = 0; k < storage_.outerSize(); ++k)
      for (typename Storage::InnerIterator it(storage_, k); it; ++it) max_entry_ = std::max(max_entry_, std::abs(it.value()));
    const Storage transposed = storage_.transpose();
    const Storage diff = storage_ - transposed;
    asymmetry_ = 0;
    for (int k = 0; k < diff.outerSize(); ++k)
      for (typename Storage::InnerIterator it(diff, k); it; ++it) asymmetry_ = std::max(asymmetry_, std::abs(it.value()));
    finalized_ = true;
    if (asymmetry_ > tolerance * max_entry_)
      throw AssemblyError("symmetry certificate failed: max |a_ij - a_ji| = " + std::to_string(asymmetry_) +
                          " exceeds " + std::to_string(tolerance) + " * max |a_ij| = " + std::to_string(max_entry_));
  }

  bool finalized() const { return finalized_; }
  Scalar asymmetry() const { return asymmetry_; }
  Scalar max_entry() const { return max_entry_; }
  /// Asymmetry relative to the largest entry.
  Scalar relative_asymmetry() const { return max_entry_ > 0 ? asymmetry_ / max_entry_ : Scalar(0); }

  const Storage& storage() const { return storage_; }

  Vector operator*(const Vector& x) const {
    require_finalized();
    return storage_ * x;
  }

  void multiply(const Vector& x, Vector& y) const {
    require_finalized();
    y.noalias() = storage_ * x;
  }

  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> to_dense() const {
    require_finalized();
    return Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>(storage_);
  }

  /// Coordinate text: "row col value" per line, zero-based, sorted.
  void write_coordinate(std::ostream& os) const {
    require_finalized();
    os.precision(17);
    for (int k = 0; k < storage_.outerSize(); ++k)
      for (typename Storage::InnerIterator it(storage_, k); it; ++it)
        os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  }

 private:
  void require_finalized() const {
    if (!finalized_) throw AssemblyError("SymmetricSparseMatrix used before finalize");
  }

  Eigen::Index dim_;
  std::vector<Eigen::Triplet<Scalar, int>> triplets_;
  Storage storage_;
  bool finalized_ = false;
  Scalar asymmetry_ = 0;
  Scalar max_entry_ = 0;
};

/// Square dense matrix with a cached partial-pivoting LU factorization.
template <typename Scalar = double>
class DenseBlock {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  DenseBlock() = default;

  /// Factors `m`; throws EliminationError (tagged with `owner`) when a pivot
  /// falls below pivot_threshold times the scale of its row.
  explicit DenseBlock(Matrix m, int owner = -1, Scalar pivot_threshold = Scalar(1e-13)) : matrix_(std::move(m)) {
    if (matrix_.rows() != matrix_.cols()) throw EliminationError("DenseBlock: matrix is not square", owner);
    lu_.compute(matrix_);
    const Matrix permuted = lu_.permutationP() * matrix_;
    const Matrix& lu = lu_.matrixLU();
    for (Eigen::Index i = 0; i < lu.rows(); ++i) {
      const Scalar scale = permuted.row(i).cwiseAbs().maxCoeff();
      if (!(std::abs(lu(i, i)) > pivot_threshold * scale))
        throw EliminationError("singular local block" + (owner >= 0 ? " in cell " + std::to_string(owner) : std::string()) +
                                   " (pivot " + std::to_string(i) + ")",
                               owner);
    }
  }

  const Matrix& matrix() const { return matrix_; }
  Eigen::Index size() const { return matrix_.rows(); }

  template <typename Rhs>
  Matrix solve(const Eigen::MatrixBase<Rhs>& rhs) const {
    return lu_.solve(rhs);
  }

 private:
  Matrix matrix_;
  Eigen::PartialPivLU<Matrix> lu_;
};

/// Factor-and-solve in one call.
template <typename Derived, typename Rhs>
auto dense_factor_solve(const Eigen::MatrixBase<Derived>& m, const Eigen::MatrixBase<Rhs>& rhs, int owner = -1) {
  using Scalar = typename Derived::Scalar;
  const DenseBlock<Scalar> block(m.eval(), owner);
  return block.solve(rhs);
}

struct MinresOptions {
  double abs_tol = 1e-14;
  double rel_tol = 1e-12;
  int max_iter = 20000;
};

template <typename Scalar = double>
struct MinresResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  int iterations = 0;
  /// True residual ||b - A x||_2 at return.
  Scalar residual = 0;
  /// Recurrence residual estimate after every iteration (preconditioned norm
  /// when a preconditioner is used).
  std::vector<Scalar> history;
};

/// MINRES (Paige-Saunders) for symmetric, possibly indefinite A.
///
/// `apply(x, y)` computes y = A x. `precondition`, if set, applies an SPD
/// approximation of A^-1. Stops when ||b - A x|| <= max(abs_tol, rel_tol ||b||),
/// checked on the true residual; the recurrence is restarted from the current
/// iterate if roundoff made the estimate optimistic. A nonempty `x0` is the
/// starting iterate (the target stays relative to ||b||).
template <typename Scalar, typename Apply>
MinresResult<Scalar> minres(const Apply& apply, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b, const MinresOptions& opt,
                            const std::function<void(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&,
                                                     Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&)>& precondition = {},
                            const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x0 = {}) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = b.size();
  if (!b.allFinite()) throw SolverError("MINRES: right-hand side is not finite", std::numeric_limits<double>::quiet_NaN());
  if (x0.size() != 0 && x0.size() != n) throw SolverError("MINRES: initial guess has the wrong size", 0.0);
  MinresResult<Scalar> result;
  const Scalar bnorm = b.norm();
  const Scalar target = std::max(Scalar(opt.abs_tol), Scalar(opt.rel_tol) * bnorm);
  Vector r = b;
  Vector tmp(n);
  if (x0.size() != 0 && x0.allFinite()) {
    result.x = x0;
    apply(result.x, tmp);
    r = b - tmp;
  } else {
    result.x = Vector::Zero(n);
  }
  result.residual = r.norm();
  if (result.residual <= target) return result;
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  int restarts = 0;

  while (true) {
    // one MINRES cycle on A d = r, x += d
    Vector y(n), r1 = r, r2 = r, v(n), w = Vector::Zero(n), w1(n), w2 = Vector::Zero(n), d = Vector::Zero(n);
    if (precondition) {
      precondition(r1, y);
    } else {
      y = r1;
    }
    const Scalar ry = r1.dot(y);
    if (ry < 0) throw SolverError("MINRES: preconditioner is not positive definite", r.norm());
    const Scalar beta1 = std::sqrt(ry);
    const Scalar cycle_target = precondition ? target * beta1 / r.norm() : target;
    Scalar oldb = 0, beta = beta1, dbar = 0, epsln = 0, phibar = beta1, cs = -1, sn = 0;
    bool estimate_converged = false;
    while (result.iterations < opt.max_iter) {
      ++result.iterations;
      v = y / beta;
      apply(v, y);
      if (oldb > 0) y -= (beta / oldb) * r1;
      const Scalar alfa = v.dot(y);
      y -= (alfa / beta) * r2;
      r1.swap(r2);
      r2 = y;
      if (precondition) {
        precondition(r2, y);
      } else {
        y = r2;
      }
      oldb = beta;
      const Scalar r2y = r2.dot(y);
      if (r2y < 0) throw SolverError("MINRES: preconditioner is not positive definite", phibar);
      beta = std::sqrt(r2y);
      const Scalar oldeps = epsln;
      const Scalar delta = cs * dbar + sn * alfa;
      const Scalar gbar = sn * dbar - cs * alfa;
      epsln = sn * beta;
      dbar = -cs * beta;
      Scalar gamma = std::hypot(gbar, beta);
      if (gamma == 0) {
        throw SolverError("MINRES breakdown: singular tridiagonal (zero gamma) with residual " + std::to_string(phibar),
                          static_cast<double>(phibar));
      }
      gamma = std::max(gamma, eps);
      cs = gbar / gamma;
      sn = beta / gamma;
      const Scalar phi = cs * phibar;
      const Scalar previous = phibar;
      phibar = sn * phibar;
      w1.swap(w2);
      w2.swap(w);
      w = (v - oldeps * w1 - delta * w2) / gamma;
      d += phi * w;
      result.history.push_back(phibar);
      if (phibar > previous * (1 + 64 * eps))
        throw SolverError("MINRES residual estimate increased", static_cast<double>(phibar));
      if (phibar <= cycle_target) {
        estimate_converged = true;
        break;
      }
      if (beta <= eps * beta1) {
        // Lanczos breakdown: Krylov space is invariant; the estimate is exact
        estimate_converged = true;
        break;
      }
    }
    result.x += d;
    apply(result.x, tmp);
    r = b - tmp;
    result.residual = r.norm();
    if (result.residual <= target) return result;
    if (!estimate_converged || result.iterations >= opt.max_iter) {
      std::vector<double> hist(result.history.begin(), result.history.end());
      throw ConvergenceError("MINRES did not converge in " + std::to_string(result.iterations) +
                                 " iterations (residual " + std::to_string(result.residual) + ", target " +
                                 std::to_string(target) + ")",
                             std::move(hist));
    }
    if (++restarts > 20)
      throw SolverError("MINRES stagnated: true residual " + std::to_string(result.residual) + " above target " +
                            std::to_string(target),
                        static_cast<double>(result.residual));
  }
}

/// MINRES on a finalized symmetric sparse matrix.
template <typename Scalar>
MinresResult<Scalar> minres_solve(const SymmetricSparseMatrix<Scalar>& a, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b,
                                  const MinresOptions& opt,
                                  const std::function<void(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&,
                                                           Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&)>& precondition = {},
                                  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x0 = {}) {
  if (!a.finalized()) throw AssemblyError("minres_solve: matrix not finalized");
  if (b.size() != a.dimension()) throw SolverError("minres_solve: dimension mismatch", 0.0);
  const auto apply = [&a](const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& y) {
    a.multiply(x, y);
  };
  return minres<Scalar>(apply, b, opt, precondition, x0);
}

/// Block-diagonal SPD preconditioner |D_B|^-1 built from the diagonal blocks
/// of a symmetric matrix (matrix absolute value of each block). Entries past
/// the last full block are treated as 1x1 blocks.
template <typename Scalar = double>
class BlockJacobi {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  BlockJacobi(const SymmetricSparseMatrix<Scalar>& a, int block_size) : block_(block_size), n_(a.dimension()) {
    const auto& s = a.storage();
    const Eigen::Index nblocks = n_ / block_;
    inverses_.reserve(nblocks + (n_ % block_));
    for (Eigen::Index blk = 0; blk * block_ < n_; ++blk) {
      const Eigen::Index start = blk * block_;
      const Eigen::Index size = std::min<Eigen::Index>(block_, n_ - start);
      Matrix d = Matrix::Zero(size, size);
      for (Eigen::Index i = 0; i < size; ++i)
        for (typename SymmetricSparseMatrix<Scalar>::Storage::InnerIterator it(s, start + i); it; ++it)
          if (it.col() >= start && it.col() < start + size) d(i, it.col() - start) = it.value();
      d = Scalar(0.5) * (d + d.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Matrix> es(d);
      Vector lam = es.eigenvalues().cwiseAbs();
      const Scalar floor = std::max(lam.maxCoeff() * Scalar(1e-14), std::numeric_limits<Scalar>::min());
      for (Eigen::Index i = 0; i < lam.size(); ++i) lam(i) = lam(i) > floor ? Scalar(1) / lam(i) : Scalar(1);
      inverses_.push_back(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
    }
  }

  void apply(const Vector& r, Vector& z) const {
    z.resize(n_);
    for (std::size_t blk = 0; blk < inverses_.size(); ++blk) {
      const Eigen::Index start = static_cast<Eigen::Index>(blk) * block_;
      const Eigen::Index size = inverses_[blk].rows();
      z.segment(start, size).noalias() = inverses_[blk] * r.segment(start, size);
    }
  }

 private:
  Eigen::Index block_;
  Eigen::Index n_;
  std::vector<Matrix> inverses_;
};

/// SPD preconditioner for symmetric matrices whose unknowns split into fields
/// of definite sign: couplings between different fields are dropped, each
/// field block is negated if its diagonal is negative on balance, and the
/// result is factored by incomplete Cholesky. Unknowns with field < 0 get the
/// identity.
template <typename Scalar = double>
class SplitIncompleteCholesky {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using ColMatrix = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>;

  SplitIncompleteCholesky(const SymmetricSparseMatrix<Scalar>& a, const std::vector<int>& field) : n_(a.dimension()) {
    if (static_cast<Eigen::Index>(field.size()) != n_) throw SolverError("SplitIncompleteCholesky: field map size", 0.0);
    int nfields = 0;
    for (int f : field) nfields = std::max(nfields, f + 1);
    const auto& s = a.storage();
    for (int f = 0; f < nfields; ++f) {
      Part part;
      std::vector<int> local(n_, -1);
      for (Eigen::Index i = 0; i < n_; ++i)
        if (field[i] == f) {
          local[i] = static_cast<int>(part.index.size());
          part.index.push_back(static_cast<int>(i));
        }
      if (part.index.empty()) continue;
      std::vector<Eigen::Triplet<Scalar, int>> t;
      Scalar diag = 0;
      for (int i : part.index)
        for (typename SymmetricSparseMatrix<Scalar>::Storage::InnerIterator it(s, i); it; ++it)
          if (local[it.col()] >= 0) {
            t.emplace_back(local[i], local[it.col()], it.value());
            if (it.col() == i) diag += it.value();
          }
      const Scalar sign = diag < 0 ? Scalar(-1) : Scalar(1);
      for (auto& e : t) e = Eigen::Triplet<Scalar, int>(e.row(), e.col(), sign * e.value());
      const Eigen::Index m = static_cast<Eigen::Index>(part.index.size());
      ColMatrix b(m, m);
      b.setFromTriplets(t.begin(), t.end());
      part.sign = sign;
      part.factor = std::make_shared<Factor>();
      part.factor->compute(b);
      if (part.factor->info() != Eigen::Success) throw SolverError("incomplete Cholesky failed", 0.0);
      parts_.push_back(std::move(part));
    }
    identity_.reserve(n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      if (field[i] < 0) identity_.push_back(static_cast<int>(i));
  }

  Eigen::Index dimension() const { return n_; }

  void apply(const Vector& r, Vector& z) const {
    z.resize(n_);
    for (int i : identity_) z(i) = r(i);
    for (const Part& p : parts_) {
      Vector rl(p.index.size());
      for (std::size_t j = 0; j < p.index.size(); ++j) rl(j) = r(p.index[j]);
      const Vector zl = p.factor->solve(rl);
      for (std::size_t j = 0; j < p.index.size(); ++j) z(p.index[j]) = zl(j);
    }
  }

 private:
  using Factor = Eigen::IncompleteCholesky<Scalar, Eigen::Lower, Eigen::NaturalOrdering<int>>;
  struct Part {
    std::vector<int> index;
    Scalar sign = 1;
    std::shared_ptr<Factor> factor;
  };
  Eigen::Index n_;
  std::vector<Part> parts_;
  std::vector<int> identity_;
};

}  // namespace hdgch
