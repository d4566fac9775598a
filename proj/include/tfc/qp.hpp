#pragma once

#include "tfc/dynamics.hpp"
#include "tfc/network.hpp"
#include "tfc/reference.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace tfc {

/// Per (controlled bus, step) linearization mode selected by the reference
/// trajectory's branch: Upper pins omega above the upper threshold with
/// nonpositive input, Lower mirrors it below, Interior forces zero input.
enum class SignMode : std::uint8_t { Interior = 0, Upper = 1, Lower = 2 };

struct SignConstraintSet {
  int N = 0;
  std::vector<int> controlled;  // model-internal bus indices, ascending
  // row r = position in `controlled`, column k = step; values are SignMode
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> mode;

  SignMode at(int row, int k) const { return static_cast<SignMode>(mode(row, k)); }
  bool all_interior() const { return mode.maxCoeff() == 0; }
};

/// Builds the convex sign set from a certified reference trajectory,
/// keying each (bus, step) on the reference frequency against the bus
/// thresholds; boundary values go to the saturated branch.
SignConstraintSet build_phi_cvx(const NetworkModel& model, const HorizonTrajectory& ref);

/// Membership test for the nonconvex sign set: for every controlled bus and
/// step, omega*u <= 0 when omega is outside the open threshold band and
/// u exactly zero when inside.
bool phi_disc_member(const NetworkModel& model, const Mat& omega, const Mat& u);

/// Structured description of the convexified finite-horizon problem: the
/// diagonal input cost, the Euler dynamics equalities with fixed initial
/// column, and per-variable bounds combining the frequency bounds, the sign
/// set, and the admissible-input zero rows.
struct QpProblem {
  const NetworkModel* model = nullptr;
  int N = 0;
  double T = 0.0;
  Vec f0, omega0;
  Mat pfcst;  // n x N
  SignConstraintSet modes;
  // Bounds on omega columns 1..N (column j corresponds to step k = j+1).
  Mat omega_lb, omega_ub;  // n x N
  // Bounds on input columns 0..N-1.
  Mat u_lb, u_ub;  // n x N
  Vec weights;     // c_i per bus, zero at uncontrolled buses
  // Step-0 modes constrain the fixed initial frequency; recorded here when
  // the initial state contradicts its own mode (possible only with a
  // foreign reference).
  bool x0_consistent = true;
  std::string x0_conflict;
  // Optional deterministic initializer for the solver (reference inputs).
  Mat init_u;  // n x N or empty
};

QpProblem assemble_qp(const NetworkModel& model, const State& x0, const Mat& pfcst,
                      const SignConstraintSet& modes, int N, double T);

/// Worst absolute constraint violation of a trajectory against a problem
/// (dynamics rows, bounds, and fixed initial column).
double qp_violation(const QpProblem& qp, const Mat& F, const Mat& Omega, const Mat& U);

/// Objective g(U) = sum_i sum_k c_i u_i(k)^2.
double qp_objective(const QpProblem& qp, const Mat& U);

enum class SolveStatus { Optimal, MaxIterations, Infeasible };

struct SolverSettings {
  double eps_abs = 1e-8;
  double eps_rel = 1e-6;
  int max_iter = 20000;
  double rho = 0.1;            // base step size
  double rho_eq_scale = 1e3;   // extra weight on structural equality rows
  double sigma = 1e-6;         // proximal regularization
  double alpha = 1.6;          // over-relaxation
  bool adaptive_rho = true;
  int rho_adapt_interval = 100;
  // Condense the horizon (inputs as the only decision variables) when
  // N*(m+n) exceeds this; 0/1/2 in `path` forces auto/sparse/condensed.
  int condense_threshold = 2000;
  int path = 0;
};

struct QpSolution {
  Mat F;      // m x (N+1), rolled exactly from the returned inputs
  Mat Omega;  // n x (N+1)
  Mat U;      // n x N, box-exact (interior and uncontrolled entries are 0.0)
  double objective = 0.0;
  SolveStatus status = SolveStatus::Optimal;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool condensed = false;
};

/// Reusable per-controller workspace: KKT/Gram factorizations and condensing
/// data survive across solves as long as (model, N, T, weights) and the
/// solver settings stay fixed. Bounds, initial state, and forecast may
/// change freely between solves.
class QpSolverCache;
using QpSolverCachePtr = std::shared_ptr<QpSolverCache>;
QpSolverCachePtr make_solver_cache();

QpSolution solve_qp(const QpProblem& problem, const SolverSettings& settings = {},
                    QpSolverCache* cache = nullptr, const QpSolution* warm_start = nullptr);

/// Explicit sparse realization of a problem (for the sparse solver path,
/// cross-checks, and the debug dump): cost diagonal, equality block
/// A_eq z = b, and the full constraint matrix C = [A_eq; bound selectors]
/// with l <= C z <= u. Variable order: F columns 1..N, Omega columns 1..N,
/// U columns 0..N-1, column-major within each block.
struct SparseQpData {
  int n_vars = 0;
  int n_eq = 0;
  Vec p_diag;  // objective = 1/2 z' diag(p_diag) z
  SpMat a_eq;
  Vec b;
  SpMat c;
  Vec l, u;
};

SparseQpData realize_sparse(const QpProblem& problem);

/// Writes the sparse realization as documented text: dimension header,
/// "i j value" triplets for A_eq and C, and the vectors.
void dump_qp(const QpProblem& problem, std::ostream& os);

/// Generic box-constrained QP, min 1/2 x'diag(p)x + q'x s.t. l <= Cx <= u,
/// solved by the same operator-splitting iteration. The first n_eq rows of
/// C are treated as structural equalities for step-size weighting.
struct BoxQp {
  Vec p_diag, q;
  SpMat c;
  Vec l, u;
  int n_eq = 0;
};

struct BoxQpResult {
  Vec x;
  Vec z;  // projected row values, exactly inside [l, u]
  SolveStatus status = SolveStatus::Optimal;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

BoxQpResult solve_box_qp(const BoxQp& qp, const SolverSettings& settings = {},
                         const Vec* x_init = nullptr);

}  // namespace tfc
