#include <doctest.h>

#include "hdgch/error.hpp"
#include "hdgch/polybasis.hpp"
#include "hdgch/quadrature.hpp"

#include <cmath>
#include <random>

using namespace hdgch;

namespace {

// exact reference-triangle moment: int xi^a eta^b = a! b! / (a+b+2)!
double triangle_moment(int a, int b) {
  return std::tgamma(a + 1.0) * std::tgamma(b + 1.0) / std::tgamma(a + b + 3.0);
}

// brute-force oracle: split the reference triangle into m^2 subtriangles
// with a degree-8 rule on each
template <typename F>
double fine_triangle_integral(const F& f, int m = 24) {
  const auto rule = triangle_rule<double>(8);
  double sum = 0;
  const double hh = 1.0 / m;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m - i; ++j)
      for (int up = 0; up < 2; ++up) {
        if (up == 1 && i + j == m - 1) continue;
        Eigen::Vector2d o, a, b;
        if (up == 0) {
          o = {i * hh, j * hh};
          a = {hh, 0};
          b = {0, hh};
        } else {
          o = {(i + 1) * hh, (j + 1) * hh};
          a = {-hh, 0};
          b = {0, -hh};
        }
        for (Eigen::Index q = 0; q < rule.size(); ++q) {
          const Eigen::Vector2d x = o + rule.points(0, q) * a + rule.points(1, q) * b;
          sum += rule.weights(q) * hh * hh * f(x.x(), x.y());
        }
      }
  return sum;
}

double l2_cell_error(const ScalarField& f, const Eigen::MatrixXd& coeffs, int degree, const Mesh& mesh) {
  const ReferenceBasis<double> basis(BasisKind::cell, degree);
  const auto rule = triangle_rule<double>(2 * degree + 10);
  double err = 0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const CellMap map = cell_map(mesh, c);
    for (Eigen::Index q = 0; q < rule.size(); ++q) {
      const Point2 x = map.to_physical(rule.points.col(q));
      const double v = basis.values(rule.points(0, q), rule.points(1, q)).dot(coeffs.col(c));
      err += rule.weights(q) * map.det * std::pow(v - f(x), 2);
    }
  }
  return std::sqrt(err);
}

}  // namespace

TEST_CASE("quadrature rules integrate monomials up to their exactness") {
  for (int d = 0; d <= 14; ++d) {
    const auto tri = triangle_rule<double>(d);
    CHECK(tri.weights.sum() == doctest::Approx(0.5).epsilon(1e-14));
    CHECK((tri.weights.array() > 0).all());
    for (int a = 0; a <= d; ++a)
      for (int b = 0; a + b <= d; ++b) {
        double s = 0;
        for (Eigen::Index q = 0; q < tri.size(); ++q)
          s += tri.weights(q) * std::pow(tri.points(0, q), a) * std::pow(tri.points(1, q), b);
        CHECK(std::abs(s - triangle_moment(a, b)) < 1e-13);
      }
    const auto seg = segment_rule<double>(d);
    CHECK(seg.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
    for (int a = 0; a <= d; ++a) {
      double s = 0;
      for (Eigen::Index q = 0; q < seg.size(); ++q) s += seg.weights(q) * std::pow(seg.points(0, q), a);
      CHECK(std::abs(s - 1.0 / (a + 1)) < 1e-13);
    }
  }
}

TEST_CASE("reference bases are orthonormal") {
  for (int deg = 0; deg <= 5; ++deg) {
    const ReferenceBasis<double> cb(BasisKind::cell, deg);
    CHECK(cb.dimension() == (deg + 1) * (deg + 2) / 2);
    const auto rule = triangle_rule<double>(2 * deg + 2);
    const Eigen::MatrixXd t = cb.tabulate(rule);
    const Eigen::MatrixXd gram = t.transpose() * rule.weights.asDiagonal() * t;
    CHECK((gram - Eigen::MatrixXd::Identity(cb.dimension(), cb.dimension())).cwiseAbs().maxCoeff() < 1e-12);

    const ReferenceBasis<double> fb(BasisKind::face, deg);
    CHECK(fb.dimension() == deg + 1);
    const auto srule = segment_rule<double>(2 * deg + 2);
    const Eigen::MatrixXd s = fb.tabulate(srule);
    const Eigen::MatrixXd sgram = s.transpose() * srule.weights.asDiagonal() * s;
    CHECK((sgram - Eigen::MatrixXd::Identity(deg + 1, deg + 1)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("cell basis is hierarchical") {
  const ReferenceBasis<double> b2(BasisKind::cell, 2), b3(BasisKind::cell, 3);
  for (double xi : {0.1, 0.3, 0.6})
    for (double eta : {0.05, 0.2}) {
      const Eigen::VectorXd v2 = b2.values(xi, eta), v3 = b3.values(xi, eta);
      CHECK((v3.head(v2.size()) - v2).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("basis gradients match central differences") {
  const double h = 1e-6;
  for (int deg = 0; deg <= 4; ++deg) {
    const ReferenceBasis<double> cb(BasisKind::cell, deg);
    const ReferenceBasis<double> fb(BasisKind::face, deg);
    for (const auto& p : {Eigen::Vector2d(0.2, 0.3), Eigen::Vector2d(0.7, 0.1), Eigen::Vector2d(0.05, 0.9)}) {
      const Eigen::MatrixXd g = cb.gradients(p.x(), p.y());
      const Eigen::VectorXd dx = (cb.values(p.x() + h, p.y()) - cb.values(p.x() - h, p.y())) / (2 * h);
      const Eigen::VectorXd dy = (cb.values(p.x(), p.y() + h) - cb.values(p.x(), p.y() - h)) / (2 * h);
      CHECK((g.row(0).transpose() - dx).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, dx.cwiseAbs().maxCoeff()));
      CHECK((g.row(1).transpose() - dy).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, dy.cwiseAbs().maxCoeff()));
      const Eigen::MatrixXd gs = fb.gradients(p.x());
      const Eigen::VectorXd ds = (fb.values(p.x() + h) - fb.values(p.x() - h)) / (2 * h);
      CHECK((gs.row(0).transpose() - ds).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, ds.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("project_cell reproduces polynomials") {
  const Mesh mesh = build_structured_mesh(2);
  SUBCASE("constant") {
    for (int deg = 0; deg <= 3; ++deg) {
      const auto c = project_cell([](const Point2&) { return 3.7; }, deg, mesh);
      CHECK(l2_cell_error([](const Point2&) { return 3.7; }, c, deg, mesh) < 1e-13);
    }
  }
  SUBCASE("linear") {
    const ScalarField f = [](const Point2& x) { return x.x(); };
    CHECK(l2_cell_error(f, project_cell(f, 1, mesh), 1, mesh) < 1e-13);
  }
  SUBCASE("idempotence") {
    const ScalarField f = [](const Point2& x) { return 1 + x.x() * x.y() - 2 * x.y() * x.y() * x.y(); };
    const auto c = project_cell(f, 3, mesh);
    const ReferenceBasis<double> b(BasisKind::cell, 3);
    // reproject the discrete function itself
    const ScalarField g = [&](const Point2& x) {
      const int cell = mesh.locate(x).value();
      return evaluate_cell(b, cell_map(mesh, cell), c.col(cell), x);
    };
    const auto c2 = project_cell(g, 3, mesh);
    CHECK((c2 - c).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(l2_cell_error(f, c, 3, mesh) < 1e-13);
  }
}

TEST_CASE("project_cell convergence order on sin(pi x) sin(pi y)") {
  const ScalarField f = [](const Point2& x) { return std::sin(M_PI * x.x()) * std::sin(M_PI * x.y()); };
  for (int deg = 1; deg <= 3; ++deg) {
    double prev = 0;
    for (int level = 2; level <= 5; ++level) {
      const Mesh mesh = build_structured_mesh(level);
      const double e = l2_cell_error(f, project_cell(f, deg, mesh), deg, mesh);
      if (level > 2) {
        const double rate = std::log2(prev / e);
        CAPTURE(deg);
        CAPTURE(level);
        CHECK(std::abs(rate - (deg + 1)) < 0.1);
      }
      prev = e;
    }
  }
}

TEST_CASE("project_cell orthogonality over random cells and fields") {
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> u(-1, 1);
  const Mesh mesh = build_structured_mesh(2);
  int instances = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const double a = u(gen), b = u(gen), c = u(gen);
    const ScalarField f = [=](const Point2& x) { return std::exp(a * x.x()) * std::cos(3 * b * x.y() + c); };
    const int deg = trial % 3;
    const int cell = static_cast<int>(gen() % mesh.num_cells());
    const Eigen::MatrixXd coeffs = project_cell(f, deg, mesh, 20);
    const ReferenceBasis<double> basis(BasisKind::cell, deg);
    const CellMap map = cell_map(mesh, cell);
    // (f - Pf, phi_i) with an independent composite rule
    for (int i = 0; i < basis.dimension(); ++i) {
      const double r = fine_triangle_integral([&](double xi, double eta) {
        const Eigen::VectorXd v = basis.values(xi, eta);
        return (f(map.to_physical(Point2(xi, eta))) - v.dot(coeffs.col(cell))) * v(i);
      });
      CHECK(std::abs(r) < 1e-12);
    }
    ++instances;
  }
  CHECK(instances >= 100);
}

TEST_CASE("project_face") {
  const Mesh mesh = build_structured_mesh(2);
  SUBCASE("constant is exact") {
    const auto c = project_face([](const Point2&) { return -2.5; }, 2, mesh);
    for (int e = 0; e < mesh.num_faces(); ++e) {
      CHECK(c(0, e) == doctest::Approx(-2.5).epsilon(1e-14));
      CHECK(std::abs(c(1, e)) < 1e-14);
      CHECK(std::abs(c(2, e)) < 1e-14);
    }
  }
  SUBCASE("degree 0 of a linear function is the midpoint value") {
    const ScalarField f = [](const Point2& x) { return 2 * x.x() - 3 * x.y() + 1; };
    const auto c = project_face(f, 0, mesh);
    for (int e = 0; e < mesh.num_faces(); ++e) CHECK(c(0, e) == doctest::Approx(f(face_geometry(mesh, e).midpoint)));
  }
  SUBCASE("degree 1 face projection of x^2 converges at order 2") {
    const ScalarField f = [](const Point2& x) { return x.x() * x.x() + 0.5 * std::sin(2 * x.y()); };
    double prev = 0;
    for (int level = 2; level <= 5; ++level) {
      const Mesh m = build_structured_mesh(level);
      const auto c = project_face(f, 1, m);
      const ReferenceBasis<double> fb(BasisKind::face, 1);
      const auto rule = segment_rule<double>(12);
      double err = 0;
      // max norm over faces keeps the face-measure scaling out of the rate
      for (int e = 0; e < m.num_faces(); ++e)
        for (Eigen::Index q = 0; q < rule.size(); ++q)
          err = std::max(err, std::abs(fb.values(rule.points(0, q)).dot(c.col(e)) -
                                       f(face_point(m, e, rule.points(0, q)))));
      if (level > 2) CHECK(std::abs(std::log2(prev / err) - 2) < 0.15);
      prev = err;
    }
  }
}

TEST_CASE("trace_projection_matrix") {
  const Mesh mesh = build_structured_mesh(2);
  SUBCASE("constant cell function maps to the constant face function") {
    const ReferenceBasis<double> cb(BasisKind::cell, 1);
    for (int c = 0; c < 4; ++c)
      for (int f : mesh.cell_faces[c]) {
        const Eigen::MatrixXd m = trace_projection_matrix(1, 0, mesh, c, f);
        // constant 1 in the orthonormal basis has coefficients (int phi_i)
        Eigen::VectorXd one = Eigen::VectorXd::Zero(cb.dimension());
        one(0) = 1.0 / cb.values(0.3, 0.3)(0);
        CHECK((m * one)(0) == doctest::Approx(1.0).epsilon(1e-13));
      }
  }
  SUBCASE("x on a vertical face projects to its mean") {
    const Mesh m1 = build_structured_mesh(1);
    const auto coeffs = project_cell([](const Point2& x) { return x.x(); }, 1, m1);
    for (int c = 0; c < m1.num_cells(); ++c)
      for (int f : m1.cell_faces[c]) {
        const auto g = face_geometry(m1, f);
        if (std::abs(g.normal.y()) > 1e-12) continue;
        const Eigen::VectorXd p = trace_projection_matrix(1, 0, m1, c, f) * coeffs.col(c);
        CHECK(p(0) == doctest::Approx(g.midpoint.x()).epsilon(1e-13));
      }
  }
  SUBCASE("random cell functions: face residual is orthogonal to P^k(E)") {
    std::mt19937 gen(5);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 100; ++trial) {
      const int k = trial % 3;
      const int c = static_cast<int>(gen() % mesh.num_cells());
      const int lf = static_cast<int>(gen() % 3);
      const int f = mesh.cell_faces[c][lf];
      const ReferenceBasis<double> cb(BasisKind::cell, k + 1), fb(BasisKind::face, k);
      Eigen::VectorXd w(cb.dimension());
      for (auto& x : w) x = nd(gen);
      const Eigen::VectorXd pw = trace_projection_matrix(k + 1, k, mesh, c, f) * w;
      const CellMap map = cell_map(mesh, c);
      // oracle: composite Gauss on 16 sub-segments
      const auto rule = segment_rule<double>(6);
      Eigen::VectorXd res = Eigen::VectorXd::Zero(k + 1);
      for (int sub = 0; sub < 16; ++sub)
        for (Eigen::Index q = 0; q < rule.size(); ++q) {
          const double s = (sub + rule.points(0, q)) / 16;
          const Point2 ref = map.to_reference(face_point(mesh, f, s));
          const double diff = fb.values(s).dot(pw) - cb.values(ref.x(), ref.y()).dot(w);
          res += rule.weights(q) / 16 * diff * fb.values(s);
        }
      CHECK(res.cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("mismatched face") {
    CHECK_THROWS_AS(trace_projection_matrix(1, 0, mesh, 0, mesh.num_faces() - 1), TopologyError);
    CHECK_THROWS_AS(trace_projection_matrix(1, 0, mesh, 0, mesh.num_faces()), IndexError);
  }
}

TEST_CASE("inverse inequality ratio stays bounded under refinement") {
  std::mt19937 gen(3);
  std::normal_distribution<double> nd;
  std::vector<double> ratios;
  for (int level = 2; level <= 6; ++level) {
    const Mesh mesh = build_structured_mesh(level);
    const int deg = 2;
    const ReferenceBasis<double> cb(BasisKind::cell, deg);
    const auto srule = segment_rule<double>(2 * deg);
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
      const int c = static_cast<int>(gen() % mesh.num_cells());
      Eigen::VectorXd w(cb.dimension());
      for (auto& x : w) x = nd(gen);
      const CellMap map = cell_map(mesh, c);
      const double vol = w.squaredNorm() * map.det;  // orthonormal basis
      double bnd = 0;
      for (int f : mesh.cell_faces[c]) {
        const double len = face_geometry(mesh, f).length;
        for (Eigen::Index q = 0; q < srule.size(); ++q) {
          const Point2 ref = map.to_reference(face_point(mesh, f, srule.points(0, q)));
          bnd += srule.weights(q) * len * std::pow(cb.values(ref.x(), ref.y()).dot(w), 2);
        }
      }
      worst = std::max(worst, std::sqrt(bnd * mesh.square_side() / vol));
    }
    ratios.push_back(worst);
  }
  const double lo = *std::min_element(ratios.begin(), ratios.end());
  const double hi = *std::max_element(ratios.begin(), ratios.end());
  CHECK(hi < 3 * lo);
}
