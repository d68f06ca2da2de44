#pragma once

#include "hdgch/condensation.hpp"
#include "hdgch/hdgops.hpp"
#include "hdgch/space.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hdgch {

enum class Scheme { centered, upwind };

std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& s);

struct RunConfig {
  int k = 0;
  double pe = 1.0;
  double eps = 1.0;
  double alpha = 10.0;
  double tau_c = 10.0;
  double dt = 1e-3;
  double T = 1.0;
  Scheme scheme = Scheme::centered;
  double newton_abs_tol = 1e-11;
  int newton_max_iter = 25;
  double minres_abs_tol = 1e-14;
  double minres_rel_tol = 1e-12;
  int minres_max_iter = 20000;
  Preconditioner preconditioner = Preconditioner::split_ichol;
  std::uint64_t seed = 0;
  int threads = 1;

  /// Number of steps, N = T / dt rounded to the nearest integer.
  int num_steps() const;
  /// Throws ParameterError on nonpositive values.
  void validate() const;
  SolverOptions solver_options() const;
};

/// Space-time source s(x, t); an empty function means zero.
using SpaceTimeField = std::function<double(const Point2&, double)>;

struct Sources {
  SpaceTimeField s1;  ///< added to the u-equation
  SpaceTimeField s2;  ///< added to the phi-equation
};

/// One time level: u = (q, u, uh), phi = (p, phi, phih).
struct CoupledState {
  int step = 0;
  double time = 0.0;
  HdgTriple u;
  HdgTriple phi;
  double mass = 0.0;
};

/// u = Pi_{k+1} u0, uh = Pi_k^face u0, everything else zero.
CoupledState init_state(const HdgSpace& space, const ScalarField& u0);

/// (u, 1) over the domain.
double compute_mass(const HdgSpace& space, const CoupledState& state);

/// 1/4 ||u^2 - 1||^2 + eps^2/2 (||q||^2 + alpha ||h^-1/2 (P u - uh)||^2).
double compute_energy(const HdgSpace& space, const LocalOperators& ops, const CoupledState& state, double eps);

struct TimeStepReport {
  int newton_iterations = 0;
  std::vector<double> residuals;       ///< before each solve and at the returned iterate
  std::vector<int> minres_iterations;  ///< per Newton solve
  bool monotone = true;                ///< residuals strictly decreasing until convergence
  double mass_drift = 0.0;             ///< (u^n, 1) - (u^{n-1}, 1)
  double energy = 0.0;
  double max_asymmetry = 0.0;          ///< largest relative asymmetry of the condensed matrices
};

/// Symmetric linearized system of one Newton iteration, in condensation form.
///
/// Interior unknowns per cell are [p, phi, q, u]; the trace block of a face is
/// [phih, uh]. The u-equation rows are scaled by dt S and the phi-equation rows
/// by -S, where S = diag(I, -I, -I) over (r, w, mu), so the matrix is symmetric.
struct LinearizedSystem {
  CondensationProblem problem;
  /// l2 norm of the nonlinear residual at the linearization point.
  double residual = 0.0;
};

struct NewtonUpdate {
  CoupledState state;
  double residual = 0.0;  ///< nonlinear residual at `state`
  int minres_iterations = 0;
  double asymmetry = 0.0;
};

/// Convex-splitting HDG time integrator for the convective Cahn-Hilliard model.
class TimeStepper {
 public:
  /// `beta` empty means no convection.
  TimeStepper(const HdgSpace& space, const RunConfig& cfg, VelocityField beta = {}, Sources sources = {});

  const HdgSpace& space() const { return *space_; }
  const RunConfig& config() const { return cfg_; }
  const LocalOperators& operators() const { return ops_; }

  /// Linearization of the step prev -> (time) around `iterate`.
  LinearizedSystem linearize(const CoupledState& prev, const CoupledState& iterate, double time) const;

  /// Nonlinear residual norm of the step equations at `iterate`.
  double residual(const CoupledState& prev, const CoupledState& iterate, double time) const;

  /// One Newton update: linearize, condense, MINRES, back-substitute.
  NewtonUpdate newton_step(const CoupledState& prev, const CoupledState& iterate, double time) const;

  /// Unpacks a condensed solution into a state (time/step/mass taken from `like`).
  CoupledState unpack(const CondensedSolution& sol, const CoupledState& like) const;

  /// Full step with Newton iteration from the previous level.
  CoupledState advance(const CoupledState& prev, TimeStepReport* report = nullptr) const;

 private:
  struct CellData {
    Eigen::MatrixXd sa;  // S A, symmetric
  };
  void cell_system(int cell, const CoupledState& prev, const CoupledState& iterate, const Eigen::VectorXd& src1,
                   const Eigen::VectorXd& src2, const ConvectionFunctional* conv, Eigen::MatrixXd& k,
                   Eigen::VectorXd& b, Eigen::MatrixXd* aux) const;
  Eigen::MatrixXd source_moments(const SpaceTimeField& s, double time) const;
  void assemble(const CoupledState& prev, const CoupledState& iterate, double time, LinearizedSystem* sys,
                double* residual) const;

  const HdgSpace* space_;
  RunConfig cfg_;
  Sources sources_;
  LocalOperators ops_;
  std::vector<CellData> cells_;
  std::optional<ConvectionOperator> convection_;
  std::vector<int> permutation_;  // natural local index -> condensation index
};

}  // namespace hdgch
