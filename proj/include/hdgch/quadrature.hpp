#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hdgch {

/// Points (one per column) and positive weights on a reference element.
template <typename Scalar, int Dim>
struct QuadratureRule {
  Eigen::Matrix<Scalar, Dim, Eigen::Dynamic> points;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;
  int exactness = 0;

  Eigen::Index size() const { return weights.size(); }
};

template <typename Scalar>
using SegmentRule = QuadratureRule<Scalar, 1>;
template <typename Scalar>
using TriangleRule = QuadratureRule<Scalar, 2>;

/// n-point Gauss-Legendre rule on [0, 1]; exact through degree 2n-1.
template <typename Scalar = double>
SegmentRule<Scalar> gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one point");
  SegmentRule<Scalar> rule;
  rule.points.resize(1, n);
  rule.weights.resize(n);
  rule.exactness = 2 * n - 1;
  const Scalar pi = std::numbers::pi_v<Scalar>;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    Scalar x = std::cos(pi * (Scalar(i) + Scalar(0.75)) / (Scalar(n) + Scalar(0.5)));
    Scalar dp = 0;
    for (int it = 0; it < 100; ++it) {
      Scalar p0 = 1, p1 = x;
      for (int j = 2; j <= n; ++j) {
        const Scalar p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
      const Scalar dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 8 * std::numeric_limits<Scalar>::epsilon()) break;
    }
    {
      Scalar p0 = 1, p1 = x;
      for (int j = 2; j <= n; ++j) {
        const Scalar p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
    }
    const Scalar w = 2 / ((1 - x * x) * dp * dp);
    // map [-1, 1] -> [0, 1]
    rule.points(0, i) = (1 - x) / 2;
    rule.points(0, n - 1 - i) = (1 + x) / 2;
    rule.weights(i) = w / 2;
    rule.weights(n - 1 - i) = w / 2;
  }
  return rule;
}

/// Segment rule on [0, 1] exact through `degree`.
template <typename Scalar = double>
SegmentRule<Scalar> segment_rule(int degree) {
  auto rule = gauss_legendre<Scalar>(std::max(1, (degree + 2) / 2));
  return rule;
}

/// Collapsed (Duffy) Gauss rule on the triangle (0,0), (1,0), (0,1), exact
/// through `degree`. Weights sum to 1/2.
template <typename Scalar = double>
TriangleRule<Scalar> triangle_rule(int degree) {
  if (degree < 0) throw std::invalid_argument("triangle_rule: negative degree");
  const auto ga = gauss_legendre<Scalar>(std::max(1, (degree + 3) / 2));
  const auto gb = gauss_legendre<Scalar>(std::max(1, (degree + 2) / 2));
  TriangleRule<Scalar> rule;
  const Eigen::Index n = ga.size() * gb.size();
  rule.points.resize(2, n);
  rule.weights.resize(n);
  rule.exactness = degree;
  Eigen::Index q = 0;
  for (Eigen::Index i = 0; i < ga.size(); ++i) {
    const Scalar a = ga.points(0, i);
    for (Eigen::Index j = 0; j < gb.size(); ++j, ++q) {
      const Scalar b = gb.points(0, j);
      rule.points(0, q) = a;
      rule.points(1, q) = b * (1 - a);
      rule.weights(q) = ga.weights(i) * gb.weights(j) * (1 - a);
    }
  }
  return rule;
}

}  // namespace hdgch
