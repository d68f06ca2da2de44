#pragma once

#include "hdgch/experiments.hpp"

#include <iosfwd>
#include <vector>

namespace hdgch {

/// HDG elliptic projection of (u, phi) at one time:
///   A(q, u, uh; r, w, mu) = (-Delta u, w),
///   B(u_I, uh_I; w[, mu]) + A(p, phi, phih; r, w, mu) / Pe = (div(beta u) - Delta phi / Pe, w),
/// with (u_I - u, 1) = (phi_I - phi, 1) = 0.
struct EllipticProjection {
  HdgTriple u;    ///< (q_I, u_I, uh_I)
  HdgTriple phi;  ///< (p_I, phi_I, phih_I)
  double multiplier_u = 0.0;
  double multiplier_phi = 0.0;
  int minres_iterations = 0;
};

struct ProjectionParams {
  double pe = 3.0;
  double alpha = 10.0;
  double tau_c = 10.0;
  Scheme scheme = Scheme::centered;
  double time = 0.3;
  SolverOptions solver;
};

/// Solves the u system first, then the phi system with (u_I, uh_I) on the right.
EllipticProjection solve_elliptic_projection(const HdgSpace& space, const ManufacturedCase& c, const ProjectionParams& p);

struct ProjectionRow {
  int level = 0;
  double h = 0;  ///< square side 2^-level
  ErrorNorms err;
  ErrorNorms rate;
  double mean_u = 0, mean_phi = 0;  ///< |(u_I - u, 1)|, |(phi_I - phi, 1)|
};

std::vector<ProjectionRow> projection_error_study(const ManufacturedCase& c, const std::vector<int>& levels, int k,
                                                  const ProjectionParams& p, const ProgressFn& progress = {});

/// Columns: level, h, error_u, rate_u, error_q, rate_q, error_phi, rate_phi, error_p, rate_p.
void write_projection_csv(const std::vector<ProjectionRow>& rows, std::ostream& os);

}  // namespace hdgch
