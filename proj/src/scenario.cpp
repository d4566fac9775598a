#include "tfc/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace tfc {

namespace {

struct Record {
  std::string kind;
  std::map<std::string, std::string> kv;
  int line_no = 0;
};

[[noreturn]] void fail(const std::string& path, int line, const std::string& msg) {
  throw ValidationError(path + ":" + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(item);
  return out;
}

class RecordReader {
 public:
  RecordReader(const Record& rec, const std::string& path) : rec_(rec), path_(path) {}
  ~RecordReader() = default;

  bool has(const std::string& key) const { return rec_.kv.count(key) != 0; }

  std::string str(const std::string& key) {
    used_.insert(key);
    auto it = rec_.kv.find(key);
    if (it == rec_.kv.end()) fail(path_, rec_.line_no, "missing key '" + key + "'");
    return it->second;
  }
  std::string str_or(const std::string& key, const std::string& def) {
    return has(key) ? str(key) : (used_.insert(key), def);
  }
  double num(const std::string& key) {
    const std::string v = str(key);
    try {
      size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      fail(path_, rec_.line_no, "key '" + key + "': not a number: '" + v + "'");
    }
  }
  double num_or(const std::string& key, double def) { return has(key) ? num(key) : def; }
  int integer(const std::string& key) {
    const double d = num(key);
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d)
      fail(path_, rec_.line_no, "key '" + key + "': not an integer");
    return i;
  }
  int integer_or(const std::string& key, int def) { return has(key) ? integer(key) : def; }
  bool flag(const std::string& key, bool def) {
    if (!has(key)) return def;
    const std::string v = str(key);
    if (v == "true") return true;
    if (v == "false") return false;
    fail(path_, rec_.line_no, "key '" + key + "': expected true or false");
  }
  std::vector<double> num_list(const std::string& key) {
    std::vector<double> out;
    for (const std::string& item : split(str(key), ',')) {
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        fail(path_, rec_.line_no, "key '" + key + "': bad list entry '" + item + "'");
      }
    }
    return out;
  }
  std::vector<int> int_list(const std::string& key) {
    std::vector<int> out;
    for (double d : num_list(key)) out.push_back(static_cast<int>(d));
    return out;
  }

  void check_no_unknown() const {
    for (const auto& [key, value] : rec_.kv)
      if (!used_.count(key)) fail(path_, rec_.line_no, "unknown key '" + key + "'");
  }

  int line() const { return rec_.line_no; }

 private:
  const Record& rec_;
  const std::string& path_;
  std::set<std::string> used_;
};

std::vector<Record> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open file");
  std::vector<Record> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream is(line);
    std::string tok;
    Record rec;
    rec.line_no = line_no;
    if (!(is >> rec.kind)) continue;  // blank line
    while (is >> tok) {
      const size_t eq = tok.find('=');
      if (eq == std::string::npos) {
        if (rec.kind == "format_version" && rec.kv.empty()) {
          rec.kv["value"] = tok;
          continue;
        }
        fail(path, line_no, "expected key=value, got '" + tok + "'");
      }
      const std::string key = tok.substr(0, eq);
      if (rec.kv.count(key)) fail(path, line_no, "duplicate key '" + key + "'");
      rec.kv[key] = tok.substr(eq + 1);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

Scenario load_scenario(const std::string& path) {
  const std::vector<Record> records = read_records(path);

  static const std::set<std::string> known_kinds = {
      "format_version", "bus",        "line",       "region",        "controller",
      "solver",         "disturbance", "piecewise", "run",           "initial_omega",
      "initial_f"};
  for (const Record& rec : records)
    if (!known_kinds.count(rec.kind)) fail(path, rec.line_no, "unknown record '" + rec.kind + "'");

  bool version_seen = false;
  for (const Record& rec : records) {
    if (rec.kind != "format_version") continue;
    if (version_seen) fail(path, rec.line_no, "duplicate format_version");
    version_seen = true;
    auto it = rec.kv.find("value");
    if (it == rec.kv.end() || it->second != "1")
      fail(path, rec.line_no, "unsupported format_version (expected 1)");
  }
  if (!version_seen) throw ValidationError(path + ": missing format_version record");

  Scenario sc;
  sc.path = path;

  // desired sine-disturbance parameters, shared by all buses marked with it
  double dist_amplitude = 0.3, dist_t_on = 0.5, dist_t_off = 15.5;
  for (const Record& rec : records) {
    if (rec.kind != "disturbance") continue;
    RecordReader r(rec, path);
    dist_amplitude = r.num_or("amplitude", dist_amplitude);
    dist_t_on = r.num_or("t_on", dist_t_on);
    dist_t_off = r.num_or("t_off", dist_t_off);
    r.check_no_unknown();
    if (dist_t_off <= dist_t_on) fail(path, rec.line_no, "disturbance window is empty");
  }

  std::vector<Bus> buses;
  std::vector<double> p0_list;
  std::vector<std::string> signal_kinds;
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> piecewise_tables;
  double gamma_up_default = 1.0, gamma_down_default = 1.0;

  for (const Record& rec : records) {
    if (rec.kind != "controller") continue;
    RecordReader r(rec, path);
    gamma_up_default = r.num_or("gamma_up", 1.0);
    gamma_down_default = r.num_or("gamma_down", 1.0);
    sc.config.T = r.num_or("T", sc.config.T);
    sc.config.N = r.integer_or("N", sc.config.N);
    sc.config.T_mpc = r.num_or("T_mpc", sc.config.T_mpc);
    sc.config.warm_start = r.flag("warm_start", sc.config.warm_start);
    sc.config.rk_substeps = r.integer_or("rk_substeps", sc.config.rk_substeps);
    const std::string fc = r.str_or("forecast", "oracle");
    if (fc == "oracle")
      sc.config.forecast = ForecastKind::Oracle;
    else if (fc == "constant_hold")
      sc.config.forecast = ForecastKind::ConstantHold;
    else
      fail(path, rec.line_no, "forecast must be oracle or constant_hold");
    r.check_no_unknown();
    if (sc.config.T <= 0 || sc.config.N < 1 || sc.config.T_mpc < sc.config.T)
      fail(path, rec.line_no, "controller requires T > 0, N >= 1, T_mpc >= T");
  }

  for (const Record& rec : records) {
    if (rec.kind != "solver") continue;
    RecordReader r(rec, path);
    SolverSettings& st = sc.config.solver;
    st.eps_abs = r.num_or("eps_abs", st.eps_abs);
    st.eps_rel = r.num_or("eps_rel", st.eps_rel);
    st.max_iter = r.integer_or("max_iter", st.max_iter);
    st.rho = r.num_or("rho", st.rho);
    st.rho_eq_scale = r.num_or("rho_eq_scale", st.rho_eq_scale);
    st.sigma = r.num_or("sigma", st.sigma);
    st.alpha = r.num_or("alpha", st.alpha);
    st.adaptive_rho = r.flag("adaptive_rho", st.adaptive_rho);
    st.condense_threshold = r.integer_or("condense_threshold", st.condense_threshold);
    const std::string p = r.str_or("path", "auto");
    if (p == "auto") st.path = 0;
    else if (p == "sparse") st.path = 1;
    else if (p == "condensed") st.path = 2;
    else fail(path, rec.line_no, "path must be auto, sparse, or condensed");
    r.check_no_unknown();
  }

  for (const Record& rec : records) {
    if (rec.kind != "bus") continue;
    RecordReader r(rec, path);
    Bus bus;
    bus.id = r.integer("id");
    bus.inertia = r.num("M");
    bus.damping = r.num("E");
    bus.generator = r.flag("generator", false);
    bus.controlled = r.flag("controlled", false);
    bus.freq_constrained = r.flag("constrained", false);
    bus.cost_weight = r.num_or("weight", 1.0);
    bus.omega_min = r.num_or("omega_min", 0.0);
    bus.omega_max = r.num_or("omega_max", 0.0);
    bus.thr_min = r.num_or("thr_min", 0.0);
    bus.thr_max = r.num_or("thr_max", 0.0);
    bus.gamma_upper = r.num_or("gamma_up", gamma_up_default);
    bus.gamma_lower = r.num_or("gamma_down", gamma_down_default);
    if (bus.freq_constrained && (!r.has("omega_min") || !r.has("omega_max")))
      fail(path, rec.line_no, "constrained bus must declare omega_min and omega_max");
    if (bus.controlled && (!r.has("thr_min") || !r.has("thr_max")))
      fail(path, rec.line_no, "controlled bus must declare thr_min and thr_max");
    p0_list.push_back(r.num_or("p0", 0.0));
    signal_kinds.push_back(r.str_or("signal", "constant"));
    r.check_no_unknown();
    buses.push_back(bus);
  }
  if (buses.empty()) throw ValidationError(path + ": no buses declared");

  std::vector<Line> lines;
  for (const Record& rec : records) {
    if (rec.kind != "line") continue;
    RecordReader r(rec, path);
    Line line;
    line.from = r.integer("from");
    line.to = r.integer("to");
    line.susceptance = r.num("b");
    // default orientation: lower bus id is the positive end
    if (line.from > line.to) std::swap(line.from, line.to);
    if (r.has("positive")) {
      const int pos = r.integer("positive");
      if (pos != line.from && pos != line.to)
        fail(path, rec.line_no, "positive end must be one of the endpoints");
      if (pos == line.to) std::swap(line.from, line.to);
    }
    r.check_no_unknown();
    lines.push_back(line);
  }

  try {
    sc.model = std::make_shared<NetworkModel>(std::move(buses), std::move(lines));
  } catch (const std::invalid_argument& e) {
    throw ValidationError(path + ": " + e.what());
  }
  const NetworkModel& model = *sc.model;
  const int n = model.num_buses();

  for (const Record& rec : records) {
    if (rec.kind != "piecewise") continue;
    RecordReader r(rec, path);
    const int bus = r.integer("bus");
    auto times = r.num_list("t");
    auto values = r.num_list("p");
    r.check_no_unknown();
    if (times.size() != values.size() || times.empty())
      fail(path, rec.line_no, "piecewise table needs matching nonempty t and p lists");
    if (!std::is_sorted(times.begin(), times.end()))
      fail(path, rec.line_no, "piecewise breakpoints must be ascending");
    if (!model.has_label(bus)) fail(path, rec.line_no, "unknown bus id " + std::to_string(bus));
    piecewise_tables[bus] = {std::move(times), std::move(values)};
  }

  sc.p0 = Vec::Zero(n);
  std::vector<BusSignal> per_bus(n);
  for (int i = 0; i < n; ++i) {
    sc.p0[i] = p0_list[i];
    BusSignal& s = per_bus[i];
    const std::string& kind = signal_kinds[i];
    if (kind == "constant") {
      s.kind = SignalKind::Constant;
      s.base = sc.p0[i];
    } else if (kind == "disturbance") {
      s.kind = SignalKind::SineDisturbance;
      s.base = sc.p0[i];
      s.amplitude = dist_amplitude;
      s.t_on = dist_t_on;
      s.t_off = dist_t_off;
    } else if (kind == "piecewise") {
      auto it = piecewise_tables.find(model.label_of(i));
      if (it == piecewise_tables.end())
        throw ValidationError(path + ": bus " + std::to_string(model.label_of(i)) +
                              " declares a piecewise signal but no table");
      s.kind = SignalKind::Piecewise;
      s.base = sc.p0[i];
      s.times = it->second.first;
      s.values = it->second.second;
    } else {
      throw ValidationError(path + ": bus " + std::to_string(model.label_of(i)) +
                            ": unknown signal kind '" + kind + "'");
    }
  }
  sc.signal = InjectionSignal(std::move(per_bus));

  for (const Record& rec : records) {
    if (rec.kind != "region") continue;
    RecordReader r(rec, path);
    const int id = r.integer("id");
    const std::vector<int> members = r.int_list("buses");
    r.check_no_unknown();
    try {
      sc.regions.emplace_back(model, id, members);
    } catch (const std::invalid_argument& e) {
      fail(path, rec.line_no, e.what());
    }
  }
  if (!sc.regions.empty()) {
    const RegionReport report = validate_regions(model, sc.regions);
    if (!report.ok) throw ValidationError(path + ": " + report.text());
  }

  std::string initial = "equilibrium";
  for (const Record& rec : records) {
    if (rec.kind != "run") continue;
    RecordReader r(rec, path);
    sc.t_end = r.num_or("t_end", sc.t_end);
    sc.log_step = r.num_or("log_step", sc.log_step);
    initial = r.str_or("initial", initial);
    r.check_no_unknown();
    if (sc.t_end <= 0 || sc.log_step <= 0) fail(path, rec.line_no, "t_end and log_step must be > 0");
  }

  if (initial == "equilibrium") {
    sc.initial_equilibrium = true;
    const Equilibrium eq = compute_equilibrium(model, sc.p0, Vec::Zero(model.num_lines()));
    sc.x0.f = eq.f_inf;
    sc.x0.omega = Vec::Constant(n, eq.omega_inf);
  } else if (initial == "explicit") {
    sc.initial_equilibrium = false;
    bool have_f = false, have_w = false;
    for (const Record& rec : records) {
      if (rec.kind == "initial_omega") {
        RecordReader r(rec, path);
        auto vals = r.num_list("values");
        r.check_no_unknown();
        if (static_cast<int>(vals.size()) != n)
          fail(path, rec.line_no, "initial_omega needs one value per bus");
        sc.x0.omega = Eigen::Map<Vec>(vals.data(), n);
        have_w = true;
      } else if (rec.kind == "initial_f") {
        RecordReader r(rec, path);
        auto vals = r.num_list("values");
        r.check_no_unknown();
        if (static_cast<int>(vals.size()) != model.num_lines())
          fail(path, rec.line_no, "initial_f needs one value per line");
        sc.x0.f = Eigen::Map<Vec>(vals.data(), model.num_lines());
        have_f = true;
      }
    }
    if (!have_f || !have_w)
      throw ValidationError(path + ": explicit initial state needs initial_f and initial_omega");
  } else {
    throw ValidationError(path + ": initial must be equilibrium or explicit");
  }

  for (int i : model.constrained()) {
    const Bus& bus = model.bus(i);
    if (sc.x0.omega[i] < bus.omega_min || sc.x0.omega[i] > bus.omega_max)
      throw ValidationError(path + ": initial frequency at bus " + std::to_string(bus.id) +
                            " (" + std::to_string(sc.x0.omega[i]) +
                            ") lies outside the safe bounds");
  }

  return sc;
}

}  // namespace tfc
