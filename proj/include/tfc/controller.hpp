#pragma once

#include "tfc/dynamics.hpp"
#include "tfc/network.hpp"
#include "tfc/qp.hpp"
#include "tfc/signals.hpp"

#include <string>
#include <vector>

namespace tfc {

enum class RunMode { OpenLoop, Centralized, Distributed };
enum class ForecastKind { Oracle, ConstantHold };

struct ControllerConfig {
  double T = 1e-3;      // prediction step
  int N = 200;          // horizon steps
  double T_mpc = 1e-2;  // recompute interval, integer multiple of the log step
  ForecastKind forecast = ForecastKind::Oracle;
  SolverSettings solver;
  bool warm_start = false;
  int rk_substeps = 10;  // plant RK4 substeps per log step
};

struct StepDiagnostics {
  bool shortcut = false;  // all-interior sign set, zero input returned directly
  bool fallback = false;  // solver did not reach optimal, reference input used
  int iterations = 0;
};

/// Receding-horizon input for the whole network: builds the reference,
/// the sign set, assembles and solves the convexified problem, and returns
/// the first input column. Throws if the reference fails to certify.
Vec centralized_step(const NetworkModel& model, const State& x, const Forecast& forecast,
                     const ControllerConfig& config, QpSolverCache* cache = nullptr,
                     const QpSolution* warm = nullptr, StepDiagnostics* diag = nullptr,
                     QpSolution* solution = nullptr);

/// Boundary power flows of a region folded into per-member-bus constant
/// injections: inflow on lines whose positive end is outside, outflow where
/// it is inside. Returns one entry per region member, in member order.
Vec fold_boundary_flows(const NetworkModel& model, const Region& region, const Vec& f);

/// Per-region bundle used by the distributed controller.
struct RegionContext {
  Region region;
  NetworkModel submodel;
  QpSolverCachePtr cache;
  QpSolution last_solution;
  bool has_last = false;
};

/// Builds contexts and validates the decomposition (every controlled bus in
/// exactly one region); throws with the report text on violation.
std::vector<RegionContext> make_region_contexts(const NetworkModel& model,
                                                const std::vector<Region>& regions);

/// One distributed recompute: each region independently solves its own
/// convexified problem with boundary flows folded as constant injections;
/// buses outside every region get zero input. Regions run concurrently.
Vec distributed_step(const NetworkModel& model, std::vector<RegionContext>& contexts,
                     const State& x, const Forecast& forecast, const ControllerConfig& config,
                     std::vector<StepDiagnostics>* diags = nullptr);

/// The pointwise stability condition: zero input strictly inside the
/// threshold band, opposing sign outside.
bool check_stability_condition(double omega, double u, double thr_min, double thr_max);

struct TrajectoryLog {
  std::vector<double> t;
  Mat f;      // m x L
  Mat omega;  // n x L
  Mat u;      // n x L
  Mat p;      // n x L
  int size() const { return static_cast<int>(t.size()); }
};

struct FrequencyViolation {
  int bus = 0;  // external label
  double t = 0.0;
  double omega = 0.0;
  double amount = 0.0;  // distance past the bound
};

struct MonitorReport {
  bool stability_ok = true;
  int stability_exceptions = 0;
  bool dead_zone_ok = true;
  int dead_zone_exceptions = 0;
  bool freq_invariance_ok = true;
  double worst_bound_violation = 0.0;
  std::vector<FrequencyViolation> violations;
  double last_nonzero_input_time = -1.0;  // -1 when inputs never fired
  double min_constrained_omega = 0.0;
  double max_constrained_omega = 0.0;
  std::string text() const;
};

/// Fills a report purely from a logged trajectory.
MonitorReport analyze_log(const NetworkModel& model, const TrajectoryLog& log);

struct RunStats {
  int mpc_steps = 0;
  int shortcuts = 0;
  int fallbacks = 0;
  long long solver_iterations = 0;
};

struct RunResult {
  TrajectoryLog log;
  MonitorReport monitor;
  RunStats stats;
};

/// Simulates the plant with the chosen controller recomputed every T_mpc
/// and held constant in between; the state, input, and injection are logged
/// every `log_step`. Rejects initial states outside the safe bounds.
RunResult run_closed_loop(const NetworkModel& model, const InjectionSignal& signal,
                          const ControllerConfig& config, double t_end, RunMode mode,
                          const std::vector<Region>& regions, const State& x0,
                          double log_step = 0.01);

}  // namespace tfc
