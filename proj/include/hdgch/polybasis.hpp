#pragma once

#include "hdgch/mesh.hpp"
#include "hdgch/quadrature.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <stdexcept>

namespace hdgch {

enum class BasisKind { cell, face };

/// Number of polynomials of total degree <= d in two variables.
constexpr int cell_dimension(int degree) { return (degree + 1) * (degree + 2) / 2; }
constexpr int face_dimension(int degree) { return degree + 1; }

/// L2-orthonormal polynomial basis on the reference triangle (0,0),(1,0),(0,1)
/// or on the reference segment [0,1].
///
/// Cell functions are Gram-Schmidt orthonormalized monomials in (xi - 1/3,
/// eta - 1/3), ordered by total degree. The process is hierarchical, so the
/// degree-d basis is a prefix of the degree-(d+1) basis. Face functions are
/// shifted Legendre polynomials sqrt(2j+1) P_j(2s-1).
template <typename Scalar = double>
class ReferenceBasis {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  ReferenceBasis(BasisKind kind, int degree) : kind_(kind), degree_(degree) {
    if (degree < 0) throw std::invalid_argument("ReferenceBasis: negative degree");
    if (kind == BasisKind::cell) build_cell();
  }

  BasisKind kind() const { return kind_; }
  int degree() const { return degree_; }
  int dimension() const { return kind_ == BasisKind::cell ? cell_dimension(degree_) : face_dimension(degree_); }

  /// Values at a reference point (xi, eta) for cells or (s) for faces.
  Vector values(Scalar xi, Scalar eta = Scalar(0)) const {
    if (kind_ == BasisKind::face) return legendre(xi);
    return coeffs_ * monomials(xi, eta);
  }

  /// Reference gradients, 2 x dimension (cells) or 1 x dimension (faces).
  Matrix gradients(Scalar xi, Scalar eta = Scalar(0)) const {
    if (kind_ == BasisKind::face) {
      Matrix g(1, dimension());
      g.row(0) = legendre_derivative(xi).transpose();
      return g;
    }
    const int n = dimension();
    Vector dx(n), dy(n);
    monomial_gradients(xi, eta, dx, dy);
    Matrix g(2, n);
    g.row(0) = (coeffs_ * dx).transpose();
    g.row(1) = (coeffs_ * dy).transpose();
    return g;
  }

  /// Basis values at every rule point: rows = points, cols = basis functions.
  template <int Dim>
  Matrix tabulate(const QuadratureRule<Scalar, Dim>& rule) const {
    Matrix t(rule.size(), dimension());
    for (Eigen::Index q = 0; q < rule.size(); ++q) {
      const Scalar eta = Dim == 2 ? rule.points(Dim - 1, q) : Scalar(0);
      t.row(q) = values(rule.points(0, q), eta).transpose();
    }
    return t;
  }

 private:
  Vector monomials(Scalar xi, Scalar eta) const {
    const Scalar a = xi - Scalar(1) / 3, b = eta - Scalar(1) / 3;
    Vector m(dimension());
    int idx = 0;
    for (int d = 0; d <= degree_; ++d)
      for (int j = 0; j <= d; ++j) m(idx++) = ipow(a, d - j) * ipow(b, j);
    return m;
  }

  void monomial_gradients(Scalar xi, Scalar eta, Vector& dx, Vector& dy) const {
    const Scalar a = xi - Scalar(1) / 3, b = eta - Scalar(1) / 3;
    int idx = 0;
    for (int d = 0; d <= degree_; ++d) {
      for (int j = 0; j <= d; ++j, ++idx) {
        const int i = d - j;
        dx(idx) = i > 0 ? Scalar(i) * ipow(a, i - 1) * ipow(b, j) : Scalar(0);
        dy(idx) = j > 0 ? Scalar(j) * ipow(a, i) * ipow(b, j - 1) : Scalar(0);
      }
    }
  }

  Vector legendre(Scalar s) const {
    Vector p(dimension());
    const Scalar x = 2 * s - 1;
    Scalar p0 = 1, p1 = x;
    for (int j = 0; j <= degree_; ++j) {
      Scalar pj;
      if (j == 0) {
        pj = 1;
      } else if (j == 1) {
        pj = x;
      } else {
        pj = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = pj;
      }
      p(j) = std::sqrt(Scalar(2 * j + 1)) * pj;
    }
    return p;
  }

  Vector legendre_derivative(Scalar s) const {
    // d/ds P_j(2s-1) = 2 P_j'(x), with P_j' = sum of (2m+1) P_m over m = j-1, j-3, ...
    const Scalar x = 2 * s - 1;
    Vector raw(dimension());
    Scalar p0 = 1, p1 = x;
    for (int j = 0; j <= degree_; ++j) {
      if (j == 0) {
        raw(j) = 1;
      } else if (j == 1) {
        raw(j) = x;
      } else {
        raw(j) = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = raw(j);
      }
    }
    Vector d = Vector::Zero(dimension());
    for (int j = 1; j <= degree_; ++j) {
      Scalar acc = 0;
      for (int m = j - 1; m >= 0; m -= 2) acc += Scalar(2 * m + 1) * raw(m);
      d(j) = std::sqrt(Scalar(2 * j + 1)) * 2 * acc;
    }
    return d;
  }

  void build_cell() {
    const int n = dimension();
    coeffs_ = Matrix::Identity(n, n);
    const auto rule = triangle_rule<Scalar>(2 * degree_);
    // two Cholesky passes reach orthonormality at roundoff level
    for (int pass = 0; pass < 2; ++pass) {
      Matrix gram = Matrix::Zero(n, n);
      for (Eigen::Index q = 0; q < rule.size(); ++q) {
        const Vector v = coeffs_ * monomials(rule.points(0, q), rule.points(1, q));
        gram.noalias() += rule.weights(q) * v * v.transpose();
      }
      Eigen::LLT<Matrix> llt(gram);
      const Matrix linv = llt.matrixL().solve(Matrix::Identity(n, n));
      coeffs_ = linv * coeffs_;
    }
  }

  static Scalar ipow(Scalar x, int p) {
    Scalar r = 1;
    for (int i = 0; i < p; ++i) r *= x;
    return r;
  }

  BasisKind kind_;
  int degree_;
  Matrix coeffs_;
};

/// Affine map from the reference triangle onto a mesh cell.
struct CellMap {
  Point2 origin;
  Eigen::Matrix2d jacobian;
  Eigen::Matrix2d inverse_jacobian;
  double det = 0.0;

  Point2 to_physical(const Point2& ref) const { return origin + jacobian * ref; }
  Point2 to_reference(const Point2& x) const { return inverse_jacobian * (x - origin); }
};

CellMap cell_map(const Mesh& mesh, int cell);

/// Point on face f at parameter s in [0,1], running from faces[f][0] to faces[f][1].
inline Point2 face_point(const Mesh& mesh, int face, double s) {
  const Point2& a = mesh.vertices[mesh.faces[face][0]];
  const Point2& b = mesh.vertices[mesh.faces[face][1]];
  return a + s * (b - a);
}

using ScalarField = std::function<double(const Point2&)>;

/// L2 projection onto P^degree on every cell; column c holds cell c's
/// coefficients in the orthonormal basis (physical mass matrix = det J * I).
Eigen::MatrixXd project_cell(const ScalarField& f, int degree, const Mesh& mesh, int exactness = -1);

/// L2 projection onto P^degree on every face; column f holds face f's coefficients.
Eigen::MatrixXd project_face(const ScalarField& f, int degree, const Mesh& mesh, int exactness = -1);

/// Matrix M with (M c)_j = j-th face coefficient of the face L2 projection of
/// the trace of the cell expansion c.
Eigen::MatrixXd trace_projection_matrix(int cell_degree, int face_degree, const Mesh& mesh, int cell, int face);

/// Value of a cell expansion at a physical point inside the cell.
double evaluate_cell(const ReferenceBasis<double>& basis, const CellMap& map,
                     const Eigen::Ref<const Eigen::VectorXd>& coeffs, const Point2& x);

}  // namespace hdgch
