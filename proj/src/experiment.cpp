#include "tfc/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tfc {

namespace {

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

RunMode parse_mode(const std::string& mode) {
  if (mode == "open-loop") return RunMode::OpenLoop;
  if (mode == "centralized") return RunMode::Centralized;
  if (mode == "distributed") return RunMode::Distributed;
  throw ValidationError("unknown mode '" + mode + "' (open-loop|centralized|distributed)");
}

void write_trajectory_csv(const std::string& path, const NetworkModel& model,
                          const TrajectoryLog& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t";
  for (int k = 0; k < model.num_lines(); ++k) out << ",f_" << (k + 1);
  for (int i = 0; i < model.num_buses(); ++i) out << ",omega_" << model.label_of(i);
  for (int i = 0; i < model.num_buses(); ++i) out << ",u_" << model.label_of(i);
  for (int i = 0; i < model.num_buses(); ++i) out << ",p_" << model.label_of(i);
  out << "\n";
  for (int j = 0; j < log.size(); ++j) {
    out << fmt9(log.t[j]);
    for (int k = 0; k < model.num_lines(); ++k) out << "," << fmt9(log.f(k, j));
    for (int i = 0; i < model.num_buses(); ++i) out << "," << fmt9(log.omega(i, j));
    for (int i = 0; i < model.num_buses(); ++i) out << "," << fmt9(log.u(i, j));
    for (int i = 0; i < model.num_buses(); ++i) out << "," << fmt9(log.p(i, j));
    out << "\n";
  }
}

std::string ExperimentSummary::text(const MonitorReport& monitor, const RunStats& stats) const {
  std::ostringstream os;
  os << "mode: " << mode << "\n";
  os << "min constrained omega: " << fmt9(min_constrained_omega) << "\n";
  os << "max constrained omega: " << fmt9(max_constrained_omega) << "\n";
  os << "first bound violation time: " << fmt9(first_violation_time) << "\n";
  os << "last nonzero input time: " << fmt9(last_nonzero_input_time) << "\n";
  os << "terminal distance to equilibrium: " << fmt9(terminal_equilibrium_distance) << "\n";
  for (const auto& [bus, peak] : peak_input_magnitudes)
    os << "peak |u_" << bus << "|: " << fmt9(peak) << "\n";
  os << "mpc recomputes: " << stats.mpc_steps << " (shortcuts " << stats.shortcuts
     << ", fallbacks " << stats.fallbacks << ", solver iterations " << stats.solver_iterations
     << ")\n";
  os << monitor.text();
  return os.str();
}

ExperimentArtifacts run_experiment(const Scenario& scenario, RunMode mode,
                                   const std::string& out_dir) {
  namespace fs = std::filesystem;
  const NetworkModel& model = *scenario.model;
  if (mode == RunMode::Distributed && scenario.regions.empty())
    throw ValidationError(scenario.path + ": distributed mode requires region records");

  ExperimentArtifacts art;
  art.run = run_closed_loop(model, scenario.signal, scenario.config, scenario.t_end, mode,
                            scenario.regions, scenario.x0, scenario.log_step);
  const TrajectoryLog& log = art.run.log;
  const MonitorReport& monitor = art.run.monitor;

  art.summary.mode = mode == RunMode::OpenLoop      ? "open-loop"
                     : mode == RunMode::Centralized ? "centralized"
                                                    : "distributed";
  art.summary.min_constrained_omega = monitor.min_constrained_omega;
  art.summary.max_constrained_omega = monitor.max_constrained_omega;
  art.summary.first_violation_time =
      monitor.violations.empty() ? -1.0 : monitor.violations.front().t;
  art.summary.last_nonzero_input_time = monitor.last_nonzero_input_time;
  for (int i : model.controlled())
    art.summary.peak_input_magnitudes.emplace_back(model.label_of(i),
                                                   log.u.row(i).cwiseAbs().maxCoeff());

  const Equilibrium eq =
      compute_equilibrium(model, scenario.signal.settled_value(), scenario.x0.f);
  const int last = log.size() - 1;
  const double df = (log.f.col(last) - eq.f_inf).cwiseAbs().maxCoeff();
  const double dw = (log.omega.col(last).array() - eq.omega_inf).abs().maxCoeff();
  art.summary.terminal_equilibrium_distance = std::max(df, dw);

  fs::create_directories(out_dir);
  art.trajectory_csv = (fs::path(out_dir) / "trajectory.csv").string();
  write_trajectory_csv(art.trajectory_csv, model, log);

  if (mode == RunMode::Distributed) {
    for (const Region& region : scenario.regions) {
      const std::string path =
          (fs::path(out_dir) / ("region_" + std::to_string(region.id()) + "_inputs.csv"))
              .string();
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot write " + path);
      out << "t";
      for (int g : region.controlled_members()) out << ",u_" << model.label_of(g);
      out << "\n";
      for (int j = 0; j < log.size(); ++j) {
        out << fmt9(log.t[j]);
        for (int g : region.controlled_members()) out << "," << fmt9(log.u(g, j));
        out << "\n";
      }
      art.region_csvs.push_back(path);
    }
  }

  art.summary_path = (fs::path(out_dir) / "summary.txt").string();
  std::ofstream summary_out(art.summary_path);
  summary_out << art.summary.text(monitor, art.run.stats);
  return art;
}

void emit_plot_data(const std::string& csv_path, const std::vector<std::string>& columns,
                    std::ostream& out) {
  std::ifstream in(csv_path);
  if (!in) throw ValidationError("cannot open " + csv_path);
  std::string header;
  if (!std::getline(in, header)) throw ValidationError(csv_path + ": empty file");

  std::vector<std::string> names;
  {
    std::istringstream is(header);
    std::string name;
    while (std::getline(is, name, ',')) names.push_back(name);
  }
  std::vector<int> picks;
  for (const std::string& want : columns) {
    auto it = std::find(names.begin(), names.end(), want);
    if (it == names.end()) throw ValidationError("unknown column '" + want + "'");
    picks.push_back(static_cast<int>(it - names.begin()));
  }

  for (size_t c = 0; c < picks.size(); ++c) out << (c ? "," : "") << names[picks[c]];
  out << "\n";
  std::string line;
  std::vector<std::string> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    cells.clear();
    std::istringstream is(line);
    std::string cell;
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    for (size_t c = 0; c < picks.size(); ++c) {
      if (picks[c] >= static_cast<int>(cells.size()))
        throw ValidationError(csv_path + ": short row");
      out << (c ? "," : "") << cells[picks[c]];
    }
    out << "\n";
  }
}

}  // namespace tfc
