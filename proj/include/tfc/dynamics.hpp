#pragma once

#include "tfc/network.hpp"

namespace tfc {

/// Plant state: line flows f (length m) and per-bus frequency deviations
/// omega (length n), in the units of the scenario (Hz deviation).
struct State {
  Vec f;
  Vec omega;
};

struct Equilibrium {
  Vec f_inf;
  double omega_inf = 0.0;
};

/// Advances the continuous plant
///   f' = Y_b D omega,  M omega' = -E omega - D^T f + p + u
/// by dt using classical RK4 with `substeps` internal steps; p and u are
/// held constant over the step. Throws on dimension mismatch or a nonzero
/// input at an uncontrolled bus.
State plant_step(const NetworkModel& model, const State& state, const Vec& p, const Vec& u,
                 double dt, int substeps = 10);

/// One explicit-Euler step of the prediction model:
///   f(k+1) = f(k) + T Y_b D omega(k)
///   M omega(k+1) = M omega(k) + T(-E omega(k) - D^T f(k) + p(k) + u(k))
void predict_step(const NetworkModel& model, const Vec& f, const Vec& omega, const Vec& p,
                  const Vec& u, double T, Vec& f_next, Vec& omega_next);

/// Open-loop equilibrium for constant injection p*: synchronized frequency
/// omega_inf = sum(p*) / sum(E) and flows f_inf = f0 + Y_b D theta with
/// L theta = p* - E omega_inf 1 - D^T f0 solved on the complement of the
/// 1-vector kernel.
Equilibrium compute_equilibrium(const NetworkModel& model, const Vec& p_star, const Vec& f0);

/// Aggregated electrical power injected into `bus` from its neighbors,
/// q_i = -(D^T f)_i.
double aggregate_injection(const NetworkModel& model, const Vec& f, int bus);

}  // namespace tfc
