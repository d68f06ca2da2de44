#include <doctest.h>

#include "hdgch/error.hpp"
#include "hdgch/linalg.hpp"

#include <Eigen/Dense>

#include <random>
#include <sstream>

using namespace hdgch;

namespace {

SymmetricSparseMatrix<double> from_dense(const Eigen::MatrixXd& a, double tol = 1e-12) {
  SymmetricSparseMatrix<double> s(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0) s.add(i, j, a(i, j));
  s.finalize(tol);
  return s;
}

Eigen::MatrixXd random_symmetric(int n, std::mt19937& gen, double shift) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = nd(gen);
  // spectrum pushed away from zero on both sides: well conditioned, indefinite
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  Eigen::VectorXd lam = es.eigenvalues();
  for (auto& l : lam) l = l >= 0 ? l + shift : l - shift;
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

TEST_CASE("symmetric sparse matrix") {
  std::mt19937 gen(1);
  SUBCASE("matvec matches dense oracle") {
    for (int n : {1, 7, 60, 200}) {
      const Eigen::MatrixXd a = random_symmetric(n, gen, 0.5);
      const auto s = from_dense(a);
      const Eigen::VectorXd x = Eigen::VectorXd::Random(n);
      CHECK(((s * x) - a * x).cwiseAbs().maxCoeff() < 1e-13 * std::max(1.0, (a * x).cwiseAbs().maxCoeff()));
      CHECK((s.to_dense() - a).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  SUBCASE("duplicates are summed") {
    SymmetricSparseMatrix<double> s(2);
    s.add(0, 1, 1.0);
    s.add(0, 1, 2.0);
    s.add(1, 0, 3.0);
    s.add(0, 0, 1.0);
    s.finalize();
    CHECK(s.to_dense()(0, 1) == 3.0);
    CHECK(s.asymmetry() == 0.0);
  }
  SUBCASE("asymmetric input is rejected") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
    a(0, 2) = 1e-6;
    CHECK_THROWS_AS(from_dense(a), AssemblyError);
  }
  SUBCASE("roundoff-level asymmetry passes and is recorded") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
    a(0, 2) = 1e-14;
    const auto s = from_dense(a, 1e-12);
    CHECK(s.relative_asymmetry() == doctest::Approx(1e-14));
  }
  SUBCASE("use before finalize") {
    SymmetricSparseMatrix<double> s(2);
    CHECK_THROWS_AS(s * Eigen::VectorXd::Zero(2), AssemblyError);
  }
  SUBCASE("coordinate export") {
    Eigen::MatrixXd a(2, 2);
    a << 1, 2, 2, 0;
    std::ostringstream os;
    from_dense(a).write_coordinate(os);
    CHECK(os.str() == "0 0 1\n0 1 2\n1 0 2\n");
  }
}

TEST_CASE("dense factor solve") {
  SUBCASE("2I") {
    const Eigen::MatrixXd m = 2 * Eigen::MatrixXd::Identity(4, 4);
    const Eigen::MatrixXd x = dense_factor_solve(m, Eigen::VectorXd::Ones(4));
    CHECK((x.array() - 0.5).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("constructed instances") {
    std::mt19937 gen(2);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 20; ++t) {
      Eigen::MatrixXd m(6, 6);
      Eigen::VectorXd xs(6);
      for (auto& v : m.reshaped()) v = nd(gen);
      for (auto& v : xs) v = nd(gen);
      m += 6 * Eigen::MatrixXd::Identity(6, 6);
      const Eigen::MatrixXd x = dense_factor_solve(m, m * xs);
      CHECK((x - xs).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("Hilbert 5x5") {
    Eigen::MatrixXd h(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) h(i, j) = 1.0 / (i + j + 1);
    const Eigen::VectorXd b = Eigen::VectorXd::Ones(5);
    const Eigen::MatrixXd x = dense_factor_solve(h, b);
    const double cond = h.norm() * h.inverse().norm();
    CHECK((h * x - b).norm() <= 1e-11 * b.norm() * std::max(1.0, cond * 1e-5));
  }
  SUBCASE("singular block names its cell") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Ones(3, 3);
    try {
      DenseBlock<double> block(m, 17);
      FAIL("expected EliminationError");
    } catch (const EliminationError& e) {
      CHECK(e.cell() == 17);
      CHECK(std::string(e.what()).find("17") != std::string::npos);
    }
  }
  SUBCASE("long double instantiation") {
    Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> m(2, 2);
    m << 4, 1, 1, 3;
    Eigen::Matrix<long double, Eigen::Dynamic, 1> b(2);
    b << 1, 2;
    const auto x = DenseBlock<long double>(m).solve(b);
    CHECK(static_cast<double>((m * x - b).norm()) < 1e-17);
  }
}

TEST_CASE("minres small cases") {
  SUBCASE("identity converges in one iteration") {
    const auto s = from_dense(Eigen::MatrixXd::Identity(5, 5));
    Eigen::VectorXd b(5);
    b << 1, -2, 3, 0.5, 7;
    const auto r = minres_solve<double>(s, b, MinresOptions{});
    CHECK(r.iterations == 1);
    CHECK((r.x - b).norm() < 1e-14);
  }
  SUBCASE("symmetric indefinite 2x2") {
    Eigen::MatrixXd a(2, 2);
    a << 0, 1, 1, 0;
    const auto r = minres_solve<double>(from_dense(a), Eigen::Vector2d(1, 0), MinresOptions{});
    CHECK(std::abs(r.x(0)) < 1e-14);
    CHECK(std::abs(r.x(1) - 1) < 1e-14);
  }
  SUBCASE("zero rhs returns zero without iterating") {
    const auto r = minres_solve<double>(from_dense(Eigen::MatrixXd::Identity(3, 3)), Eigen::VectorXd::Zero(3), MinresOptions{});
    CHECK(r.iterations == 0);
    CHECK(r.x.norm() == 0.0);
  }
  SUBCASE("max_iter exceeded carries history") {
    std::mt19937 gen(9);
    const auto s = from_dense(random_symmetric(40, gen, 0.01));
    MinresOptions opt;
    opt.max_iter = 3;
    try {
      minres_solve<double>(s, Eigen::VectorXd::Ones(40), opt);
      FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
      CHECK(e.history().size() == 3);
    }
  }
  SUBCASE("non-finite rhs") {
    Eigen::VectorXd b = Eigen::VectorXd::Ones(2);
    b(1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(minres_solve<double>(from_dense(Eigen::MatrixXd::Identity(2, 2)), b, MinresOptions{}), SolverError);
  }
}

TEST_CASE("minres matches dense oracle with monotone residuals over random instances") {
  std::mt19937 gen(4);
  std::normal_distribution<double> nd;
  int count = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 10 + t % 41;
    const Eigen::MatrixXd a = random_symmetric(n, gen, 1.0);
    const auto s = from_dense(a);
    Eigen::VectorXd b(n);
    for (auto& v : b) v = nd(gen);
    const bool precond = t % 2 == 1;
    MinresResult<double> r;
    if (precond) {
      const BlockJacobi<double> jac(s, 3);
      r = minres_solve<double>(s, b, MinresOptions{}, [&](const Eigen::VectorXd& v, Eigen::VectorXd& z) { jac.apply(v, z); });
    } else {
      r = minres_solve<double>(s, b, MinresOptions{});
    }
    const Eigen::VectorXd x = a.partialPivLu().solve(b);
    CHECK((r.x - x).norm() <= 1e-9 * std::max(1.0, x.norm()));
    CHECK((a * r.x - b).norm() <= std::max(1e-14, 1e-12 * b.norm()));
    for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1] * (1 + 1e-14));
    ++count;
  }
  CHECK(count >= 100);
}

TEST_CASE("block Jacobi is the inverse absolute value of each diagonal block") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(5, 5);
  a.topLeftCorner(2, 2) << 1, 2, 2, 1;  // eigenvalues 3, -1
  a(2, 2) = -4;
  a(3, 3) = 2;
  a(4, 4) = 5;
  a(0, 4) = a(4, 0) = 0.3;
  const auto s = from_dense(a);
  const BlockJacobi<double> jac(s, 2);
  Eigen::VectorXd z;
  jac.apply(Eigen::VectorXd::Unit(5, 0), z);
  // |[[1,2],[2,1]]|^-1 = [[2/3, -1/3], [-1/3, 2/3]]
  CHECK(z(0) == doctest::Approx(2.0 / 3));
  CHECK(z(1) == doctest::Approx(-1.0 / 3));
  jac.apply(Eigen::VectorXd::Unit(5, 2), z);
  CHECK(z(2) == doctest::Approx(0.25));
  jac.apply(Eigen::VectorXd::Unit(5, 4), z);
  CHECK(z(4) == doctest::Approx(0.2));
}
