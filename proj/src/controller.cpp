#include "tfc/controller.hpp"

#include <cmath>
#include <future>
#include <sstream>
#include <stdexcept>

namespace tfc {

namespace {

/// Common body of the centralized and per-region laws.
Vec control_step(const NetworkModel& model, const State& x, const Mat& pfcst,
                 const ControllerConfig& config, QpSolverCache* cache, const QpSolution* warm,
                 StepDiagnostics* diag, QpSolution* solution_out) {
  RefCertificate cert;
  const HorizonTrajectory ref =
      generate_reference(model, x, pfcst, config.N, config.T, &cert);
  if (!cert.ok)
    throw std::runtime_error("controller: reference failed to certify (" + cert.detail +
                             "); reduce the sampling period T");

  const SignConstraintSet modes = build_phi_cvx(model, ref);
  if (modes.all_interior()) {
    // the sign set pins every input to zero; the reference is the optimum
    if (diag) diag->shortcut = true;
    if (solution_out) {
      solution_out->U = ref.U;
      solution_out->F = ref.F;
      solution_out->Omega = ref.Omega;
      solution_out->objective = 0.0;
      solution_out->status = SolveStatus::Optimal;
      solution_out->iterations = 0;
    }
    return Vec::Zero(model.num_buses());
  }

  QpProblem qp = assemble_qp(model, x, pfcst, modes, config.N, config.T);
  qp.init_u = ref.U;
  const QpSolution sol =
      solve_qp(qp, config.solver, cache, config.warm_start ? warm : nullptr);
  if (diag) diag->iterations = sol.iterations;
  if (solution_out) *solution_out = sol;

  if (sol.status != SolveStatus::Optimal) {
    // the certified reference is always feasible; fall back to its first step
    if (diag) diag->fallback = true;
    if (solution_out) {
      solution_out->U = ref.U;
      solution_out->F = ref.F;
      solution_out->Omega = ref.Omega;
      solution_out->objective = qp_objective(qp, ref.U);
    }
    return ref.U.col(0);
  }
  return sol.U.col(0);
}

}  // namespace

Vec centralized_step(const NetworkModel& model, const State& x, const Forecast& forecast,
                     const ControllerConfig& config, QpSolverCache* cache, const QpSolution* warm,
                     StepDiagnostics* diag, QpSolution* solution) {
  return control_step(model, x, forecast.columns, config, cache, warm, diag, solution);
}

Vec fold_boundary_flows(const NetworkModel& model, const Region& region, const Vec& f) {
  if (f.size() != model.num_lines())
    throw std::invalid_argument("fold_boundary_flows: flow dimension mismatch");
  Vec folded = Vec::Zero(region.members().size());
  for (const BoundaryEdge& e : region.boundary()) {
    const int local = region.local_bus(e.inside_bus);
    folded[local] += e.positive_end_inside ? -f[e.line] : f[e.line];
  }
  return folded;
}

std::vector<RegionContext> make_region_contexts(const NetworkModel& model,
                                                const std::vector<Region>& regions) {
  const RegionReport report = validate_regions(model, regions);
  if (!report.ok) throw std::invalid_argument(report.text());
  std::vector<RegionContext> contexts;
  contexts.reserve(regions.size());
  for (const Region& r : regions)
    contexts.push_back({r, subnetwork(model, r), make_solver_cache(), {}, false});
  return contexts;
}

namespace {

Vec regional_input(const NetworkModel& model, RegionContext& ctx, const State& x,
                   const Mat& pfcst_global, const ControllerConfig& config,
                   StepDiagnostics* diag) {
  const Region& region = ctx.region;
  const auto& members = region.members();
  const auto& lines = region.interior_lines();

  State x_local;
  x_local.f.resize(lines.size());
  for (size_t k = 0; k < lines.size(); ++k) x_local.f[k] = x.f[lines[k]];
  x_local.omega.resize(members.size());
  for (size_t i = 0; i < members.size(); ++i) x_local.omega[i] = x.omega[members[i]];

  Mat p_local(members.size(), pfcst_global.cols());
  for (size_t i = 0; i < members.size(); ++i) p_local.row(i) = pfcst_global.row(members[i]);
  if (!region.boundary().empty()) {
    const Vec folded = fold_boundary_flows(model, region, x.f);
    p_local.colwise() += folded;
  }

  QpSolution sol;
  Vec u_local = control_step(ctx.submodel, x_local, p_local, config, ctx.cache.get(),
                             ctx.has_last ? &ctx.last_solution : nullptr, diag, &sol);
  if (config.warm_start) {
    ctx.last_solution = std::move(sol);
    ctx.has_last = true;
  }
  return u_local;
}

}  // namespace

Vec distributed_step(const NetworkModel& model, std::vector<RegionContext>& contexts,
                     const State& x, const Forecast& forecast, const ControllerConfig& config,
                     std::vector<StepDiagnostics>* diags) {
  if (diags) diags->assign(contexts.size(), {});
  std::vector<Vec> locals(contexts.size());

  if (contexts.size() > 1) {
    std::vector<std::future<Vec>> futures;
    futures.reserve(contexts.size());
    for (size_t r = 0; r < contexts.size(); ++r)
      futures.push_back(std::async(std::launch::async, [&, r] {
        return regional_input(model, contexts[r], x, forecast.columns, config,
                              diags ? &(*diags)[r] : nullptr);
      }));
    for (size_t r = 0; r < contexts.size(); ++r) locals[r] = futures[r].get();
  } else {
    for (size_t r = 0; r < contexts.size(); ++r)
      locals[r] = regional_input(model, contexts[r], x, forecast.columns, config,
                                 diags ? &(*diags)[r] : nullptr);
  }

  Vec u = Vec::Zero(model.num_buses());
  for (size_t r = 0; r < contexts.size(); ++r) {
    const Region& region = contexts[r].region;
    for (int g : region.controlled_members()) u[g] = locals[r][region.local_bus(g)];
  }
  return u;
}

bool check_stability_condition(double omega, double u, double thr_min, double thr_max) {
  const bool inside = omega > thr_min && omega < thr_max;
  return inside ? (u == 0.0) : (omega * u <= 0.0);
}

std::string MonitorReport::text() const {
  std::ostringstream os;
  os << "stability condition: " << (stability_ok ? "ok" : "VIOLATED") << " ("
     << stability_exceptions << " exceptions)\n";
  os << "dead zone: " << (dead_zone_ok ? "ok" : "VIOLATED") << " (" << dead_zone_exceptions
     << " exceptions)\n";
  os << "frequency invariance: " << (freq_invariance_ok ? "ok" : "VIOLATED")
     << " (worst excess " << worst_bound_violation << ")\n";
  os << "constrained omega range: [" << min_constrained_omega << ", " << max_constrained_omega
     << "]\n";
  os << "last nonzero input time: " << last_nonzero_input_time << "\n";
  if (!violations.empty()) {
    os << "bound violations:\n";
    for (const auto& v : violations)
      os << "  bus " << v.bus << " t=" << v.t << " omega=" << v.omega << " excess=" << v.amount
         << "\n";
  }
  return os.str();
}

MonitorReport analyze_log(const NetworkModel& model, const TrajectoryLog& log) {
  MonitorReport report;
  report.min_constrained_omega = std::numeric_limits<double>::infinity();
  report.max_constrained_omega = -std::numeric_limits<double>::infinity();

  for (int j = 0; j < log.size(); ++j) {
    for (int i : model.controlled()) {
      const Bus& bus = model.bus(i);
      const double w = log.omega(i, j);
      const double u = log.u(i, j);
      if (!check_stability_condition(w, u, bus.thr_min, bus.thr_max)) {
        report.stability_ok = false;
        ++report.stability_exceptions;
      }
      if (w > bus.thr_min && w < bus.thr_max && u != 0.0) {
        report.dead_zone_ok = false;
        ++report.dead_zone_exceptions;
      }
    }
    for (int i : model.constrained()) {
      const Bus& bus = model.bus(i);
      const double w = log.omega(i, j);
      report.min_constrained_omega = std::min(report.min_constrained_omega, w);
      report.max_constrained_omega = std::max(report.max_constrained_omega, w);
      const double excess = std::max(bus.omega_min - w, w - bus.omega_max);
      if (excess > 0.0) {
        report.freq_invariance_ok = false;
        report.worst_bound_violation = std::max(report.worst_bound_violation, excess);
        if (report.violations.size() < 100)
          report.violations.push_back({bus.id, log.t[j], w, excess});
      }
    }
    if (log.u.col(j).cwiseAbs().maxCoeff() > 0.0) report.last_nonzero_input_time = log.t[j];
  }
  if (model.constrained().empty()) {
    report.min_constrained_omega = 0.0;
    report.max_constrained_omega = 0.0;
  }
  return report;
}

RunResult run_closed_loop(const NetworkModel& model, const InjectionSignal& signal,
                          const ControllerConfig& config, double t_end, RunMode mode,
                          const std::vector<Region>& regions, const State& x0, double log_step) {
  if (t_end <= 0.0) throw std::invalid_argument("run_closed_loop: t_end must be > 0");
  if (log_step <= 0.0) throw std::invalid_argument("run_closed_loop: log_step must be > 0");
  const double ratio = config.T_mpc / log_step;
  const int steps_per_mpc = static_cast<int>(std::lround(ratio));
  if (steps_per_mpc < 1 || std::abs(ratio - steps_per_mpc) > 1e-9)
    throw std::invalid_argument(
        "run_closed_loop: T_mpc must be a positive integer multiple of the log step");
  if (signal.size() != model.num_buses())
    throw std::invalid_argument("run_closed_loop: signal dimension mismatch");

  for (int i : model.constrained()) {
    const Bus& bus = model.bus(i);
    if (x0.omega[i] < bus.omega_min || x0.omega[i] > bus.omega_max)
      throw std::invalid_argument("run_closed_loop: initial frequency at bus " +
                                  std::to_string(bus.id) + " is outside the safe bounds");
  }

  std::vector<RegionContext> contexts;
  if (mode == RunMode::Distributed) contexts = make_region_contexts(model, regions);
  QpSolverCachePtr central_cache = make_solver_cache();
  QpSolution central_last;
  bool has_central_last = false;

  const int n_logs = static_cast<int>(std::lround(t_end / log_step));
  RunResult result;
  result.log.t.resize(n_logs + 1);
  result.log.f.resize(model.num_lines(), n_logs + 1);
  result.log.omega.resize(model.num_buses(), n_logs + 1);
  result.log.u.resize(model.num_buses(), n_logs + 1);
  result.log.p.resize(model.num_buses(), n_logs + 1);

  State x = x0;
  Vec u = Vec::Zero(model.num_buses());
  std::vector<StepDiagnostics> region_diags;

  for (int j = 0; j <= n_logs; ++j) {
    const double t = j * log_step;
    if (j % steps_per_mpc == 0 && mode != RunMode::OpenLoop) {
      const Forecast forecast = config.forecast == ForecastKind::Oracle
                                    ? oracle_forecast(signal, t, config.N, config.T)
                                    : constant_hold_forecast(signal, t, config.N, config.T);
      ++result.stats.mpc_steps;
      if (mode == RunMode::Centralized) {
        StepDiagnostics diag;
        QpSolution sol;
        u = centralized_step(model, x, forecast, config, central_cache.get(),
                             has_central_last ? &central_last : nullptr, &diag, &sol);
        if (config.warm_start) {
          central_last = std::move(sol);
          has_central_last = true;
        }
        result.stats.shortcuts += diag.shortcut;
        result.stats.fallbacks += diag.fallback;
        result.stats.solver_iterations += diag.iterations;
      } else {
        u = distributed_step(model, contexts, x, forecast, config, &region_diags);
        for (const auto& d : region_diags) {
          result.stats.shortcuts += d.shortcut;
          result.stats.fallbacks += d.fallback;
          result.stats.solver_iterations += d.iterations;
        }
      }
    }
    const Vec p = signal.value(t);
    result.log.t[j] = t;
    result.log.f.col(j) = x.f;
    result.log.omega.col(j) = x.omega;
    result.log.u.col(j) = u;
    result.log.p.col(j) = p;
    if (j < n_logs) x = plant_step(model, x, p, u, log_step, config.rk_substeps);
  }

  result.monitor = analyze_log(model, result.log);
  return result;
}

}  // namespace tfc
