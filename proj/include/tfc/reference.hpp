#pragma once

#include "tfc/dynamics.hpp"
#include "tfc/network.hpp"

#include <string>

namespace tfc {

/// Discrete trajectories over an N-step horizon. Column k of F/Omega is the
/// state at step k (k = 0..N); column k of U/Pfcst applies over step k
/// (k = 0..N-1). U rows at uncontrolled buses are identically zero.
struct HorizonTrajectory {
  Mat F;      // m x (N+1)
  Mat Omega;  // n x (N+1)
  Mat U;      // n x N
  Mat Pfcst;  // n x N
  double T = 0.0;
  int steps() const { return static_cast<int>(U.cols()); }
};

/// Result of checking a rolled trajectory against the discretized problem's
/// constraints: dynamics, admissible inputs, frequency bounds, and the
/// stability sign conditions.
struct RefCertificate {
  bool ok = true;
  double max_residual = 0.0;  // worst dynamics residual encountered
  std::string detail;         // first violation, empty when ok
};

/// Threshold-barrier control law for one controlled bus. Returns zero for
/// controlled buses without a frequency constraint and in the open band
/// between the thresholds; outside, the barrier term caps the drift v so the
/// rolled frequency cannot escape the safe bound. The bus's gains and
/// bounds/thresholds are used; `v` is the drift term of the same step.
double ref_control(const Bus& bus, double omega_ref, double v);

/// Drift term v_i(k) = q_i(f_ref) + p_fcst_i - E_i omega_ref_i for a
/// frequency-constrained bus.
double drift_term(const NetworkModel& model, const Vec& f_ref, const Vec& omega_ref,
                  const Vec& p_fcst, int bus);

/// Rolls the prediction model forward from x0 under the barrier law and
/// certifies the result. `pfcst` must be n x N. A false certificate means T
/// is too large for this state/forecast; the caller decides how to react.
HorizonTrajectory generate_reference(const NetworkModel& model, const State& x0, const Mat& pfcst,
                                     int N, double T, RefCertificate* certificate = nullptr);

/// Residual check used by the certificate, callable on any trajectory:
/// returns the worst absolute violation over dynamics rows, input
/// admissibility, frequency bounds (steps 1..N), and sign conditions.
RefCertificate check_trajectory(const NetworkModel& model, const HorizonTrajectory& traj);

}  // namespace tfc
