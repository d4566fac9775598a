#include "tfc/experiment.hpp"
#include "tfc/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

int run_validate(const std::string& scenario_path) {
  const tfc::Scenario sc = tfc::load_scenario(scenario_path);
  std::cout << "ok: " << sc.model->num_buses() << " buses, " << sc.model->num_lines()
            << " lines, " << sc.regions.size() << " regions, "
            << sc.model->controlled().size() << " controlled, "
            << sc.model->constrained().size() << " constrained\n";
  return kExitOk;
}

int run_equilibrium(const std::string& scenario_path) {
  const tfc::Scenario sc = tfc::load_scenario(scenario_path);
  const tfc::Equilibrium eq = tfc::compute_equilibrium(
      *sc.model, sc.signal.settled_value(), sc.x0.f);
  std::cout << "omega_inf " << eq.omega_inf << "\n";
  for (int k = 0; k < sc.model->num_lines(); ++k)
    std::cout << "f_" << (k + 1) << " " << eq.f_inf[k] << "\n";
  return kExitOk;
}

int run_simulate(const std::string& scenario_path, const std::string& mode_name, double t_end,
                 const std::string& out_dir) {
  tfc::Scenario sc = tfc::load_scenario(scenario_path);
  const tfc::RunMode mode = tfc::parse_mode(mode_name);
  if (t_end > 0.0) sc.t_end = t_end;
  const tfc::ExperimentArtifacts art = tfc::run_experiment(sc, mode, out_dir);
  std::cout << art.summary.text(art.run.monitor, art.run.stats);
  std::cout << "trajectory: " << art.trajectory_csv << "\n";
  for (const auto& path : art.region_csvs) std::cout << "region inputs: " << path << "\n";
  std::cout << "summary: " << art.summary_path << "\n";
  return kExitOk;
}

int run_plot_data(const std::string& csv, const std::vector<std::string>& cols,
                  const std::string& out_file) {
  if (out_file.empty()) {
    tfc::emit_plot_data(csv, cols, std::cout);
  } else {
    std::ofstream out(out_file);
    if (!out) throw std::runtime_error("cannot write " + out_file);
    tfc::emit_plot_data(csv, cols, out);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transient frequency control toolkit"};
  app.require_subcommand(1);

  std::string scenario_path, mode_name = "distributed", out_dir = "out", csv_path, out_file;
  std::vector<std::string> cols;
  double t_end = -1.0;

  auto* validate = app.add_subcommand("validate", "parse and validate a scenario file");
  validate->add_option("scenario", scenario_path, "scenario file")->required();

  auto* equilibrium =
      app.add_subcommand("equilibrium", "print the open-loop equilibrium of a scenario");
  equilibrium->add_option("scenario", scenario_path, "scenario file")->required();

  auto* simulate = app.add_subcommand("simulate", "run an experiment and write CSV logs");
  simulate->add_option("scenario", scenario_path, "scenario file")->required();
  simulate->add_option("--mode", mode_name, "open-loop|centralized|distributed");
  simulate->add_option("--t-end", t_end, "override the scenario run length (s)");
  simulate->add_option("--out", out_dir, "output directory");

  auto* plot = app.add_subcommand("plot-data", "extract columns from a trajectory CSV");
  plot->add_option("csv", csv_path, "trajectory CSV")->required();
  plot->add_option("--cols", cols, "column names")->required()->delimiter(',');
  plot->add_option("--out", out_file, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return run_validate(scenario_path);
    if (equilibrium->parsed()) return run_equilibrium(scenario_path);
    if (simulate->parsed()) return run_simulate(scenario_path, mode_name, t_end, out_dir);
    if (plot->parsed()) return run_plot_data(csv_path, cols, out_file);
  } catch (const tfc::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
