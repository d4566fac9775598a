#pragma once

#include "tfc/controller.hpp"
#include "tfc/scenario.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace tfc {

struct ExperimentSummary {
  std::string mode;
  double min_constrained_omega = 0.0;
  double max_constrained_omega = 0.0;
  double first_violation_time = -1.0;
  double last_nonzero_input_time = -1.0;
  double terminal_equilibrium_distance = 0.0;
  std::vector<std::pair<int, double>> peak_input_magnitudes;  // (bus label, peak |u|)
  std::string text(const MonitorReport& monitor, const RunStats& stats) const;
};

struct ExperimentArtifacts {
  std::string trajectory_csv;
  std::vector<std::string> region_csvs;
  std::string summary_path;
  ExperimentSummary summary;
  RunResult run;
};

/// Runs the scenario in the given mode and writes the trajectory CSV, the
/// per-region input CSVs (distributed mode), and the monitor summary under
/// `out_dir` (created if missing).
ExperimentArtifacts run_experiment(const Scenario& scenario, RunMode mode,
                                   const std::string& out_dir);

/// CSV with header t,f_1..f_m,omega_<id>..,u_<id>..,p_<id>.. and fixed
/// 9-significant-digit values.
void write_trajectory_csv(const std::string& path, const NetworkModel& model,
                          const TrajectoryLog& log);

/// Copies the selected columns of a trajectory CSV, values unchanged.
/// Throws ValidationError on unknown column names.
void emit_plot_data(const std::string& csv_path, const std::vector<std::string>& columns,
                    std::ostream& out);

RunMode parse_mode(const std::string& mode);

}  // namespace tfc
