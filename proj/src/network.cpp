#include "tfc/network.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tfc {

SpMat build_incidence(const std::vector<std::pair<int, int>>& lines, int n_buses) {
  const int m = static_cast<int>(lines.size());
  std::set<std::pair<int, int>> seen;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * m);
  for (int k = 0; k < m; ++k) {
    const auto [i, j] = lines[k];
    if (i < 0 || i >= n_buses || j < 0 || j >= n_buses)
      throw std::invalid_argument("line " + std::to_string(k) + ": bus index out of range");
    if (i == j)
      throw std::invalid_argument("line " + std::to_string(k) + ": self-loop at bus " +
                                  std::to_string(i));
    auto key = std::minmax(i, j);
    if (!seen.insert(key).second)
      throw std::invalid_argument("line " + std::to_string(k) + ": duplicate edge (" +
                                  std::to_string(i) + "," + std::to_string(j) + ")");
    trips.emplace_back(k, i, 1.0);
    trips.emplace_back(k, j, -1.0);
  }
  SpMat d(m, n_buses);
  d.setFromTriplets(trips.begin(), trips.end());
  return d;
}

namespace {

bool graph_connected(int n, const std::vector<int>& pos, const std::vector<int>& neg) {
  if (n == 0) return true;
  std::vector<std::vector<int>> adj(n);
  for (size_t k = 0; k < pos.size(); ++k) {
    adj[pos[k]].push_back(neg[k]);
    adj[neg[k]].push_back(pos[k]);
  }
  std::vector<char> vis(n, 0);
  std::queue<int> q;
  q.push(0);
  vis[0] = 1;
  int count = 1;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int w : adj[v])
      if (!vis[w]) {
        vis[w] = 1;
        ++count;
        q.push(w);
      }
  }
  return count == n;
}

}  // namespace

NetworkModel::NetworkModel(std::vector<Bus> buses, std::vector<Line> lines,
                           bool require_connected)
    : buses_(std::move(buses)) {
  const int n = static_cast<int>(buses_.size());
  if (n == 0) throw std::invalid_argument("network: no buses");

  for (int i = 0; i < n; ++i) {
    const Bus& b = buses_[i];
    if (!label_to_index_.emplace(b.id, i).second)
      throw std::invalid_argument("network: duplicate bus id " + std::to_string(b.id));
    if (b.inertia <= 0.0)
      throw std::invalid_argument("bus " + std::to_string(b.id) + ": inertia must be > 0");
    if (b.damping <= 0.0)
      throw std::invalid_argument("bus " + std::to_string(b.id) + ": damping must be > 0");
    if (b.freq_constrained && !b.controlled)
      throw std::invalid_argument("bus " + std::to_string(b.id) +
                                  ": frequency-constrained bus must be controlled");
    if (b.controlled) {
      if (!(b.thr_min < 0.0 && 0.0 < b.thr_max))
        throw std::invalid_argument("bus " + std::to_string(b.id) +
                                    ": thresholds must straddle zero");
      if (b.cost_weight <= 0.0)
        throw std::invalid_argument("bus " + std::to_string(b.id) + ": cost weight must be > 0");
      if (b.gamma_upper <= 0.0 || b.gamma_lower <= 0.0)
        throw std::invalid_argument("bus " + std::to_string(b.id) + ": gains must be > 0");
    }
    if (b.freq_constrained) {
      if (!(b.omega_min < b.thr_min && b.thr_max < b.omega_max))
        throw std::invalid_argument(
            "bus " + std::to_string(b.id) +
            ": bound/threshold ordering must be omega_min < thr_min < thr_max < omega_max");
    }
  }

  const int m = static_cast<int>(lines.size());
  pos_end_.resize(m);
  neg_end_.resize(m);
  b_.resize(m);
  std::vector<std::pair<int, int>> internal(m);
  for (int k = 0; k < m; ++k) {
    const Line& l = lines[k];
    if (l.susceptance <= 0.0)
      throw std::invalid_argument("line (" + std::to_string(l.from) + "," + std::to_string(l.to) +
                                  "): susceptance must be > 0");
    pos_end_[k] = index_of(l.from);
    neg_end_[k] = index_of(l.to);
    b_[k] = l.susceptance;
    internal[k] = {pos_end_[k], neg_end_[k]};
  }
  incidence_ = build_incidence(internal, n);
  flow_matrix_ = b_.asDiagonal() * incidence_;

  inertia_.resize(n);
  damping_.resize(n);
  for (int i = 0; i < n; ++i) {
    inertia_[i] = buses_[i].inertia;
    damping_[i] = buses_[i].damping;
    if (buses_[i].controlled) controlled_.push_back(i);
    if (buses_[i].freq_constrained) constrained_.push_back(i);
  }

  connected_ = graph_connected(n, pos_end_, neg_end_);
  if (require_connected && !connected_)
    throw std::invalid_argument("network: graph is not connected");
}

int NetworkModel::index_of(int external_id) const {
  auto it = label_to_index_.find(external_id);
  if (it == label_to_index_.end())
    throw std::invalid_argument("unknown bus id " + std::to_string(external_id));
  return it->second;
}

bool NetworkModel::has_label(int external_id) const {
  return label_to_index_.count(external_id) != 0;
}

Region::Region(const NetworkModel& model, int id, const std::vector<int>& member_labels)
    : id_(id) {
  std::set<int> mem;
  for (int label : member_labels) mem.insert(model.index_of(label));
  members_.assign(mem.begin(), mem.end());
  for (size_t l = 0; l < members_.size(); ++l) local_of_bus_[members_[l]] = static_cast<int>(l);

  for (int k = 0; k < model.num_lines(); ++k) {
    const bool pin = mem.count(model.line_pos_end(k)) != 0;
    const bool nin = mem.count(model.line_neg_end(k)) != 0;
    if (pin && nin) {
      local_of_line_[k] = static_cast<int>(interior_lines_.size());
      interior_lines_.push_back(k);
    } else if (pin || nin) {
      boundary_.push_back({k, pin, pin ? model.line_pos_end(k) : model.line_neg_end(k)});
    }
  }

  for (int g : members_) {
    if (model.bus(g).controlled) controlled_members_.push_back(g);
    if (model.bus(g).freq_constrained) constrained_members_.push_back(g);
  }
}

std::vector<BoundaryEdge> boundary_edges(const NetworkModel& model,
                                         const std::vector<int>& member_labels) {
  return Region(model, 0, member_labels).boundary();
}

std::string RegionReport::text() const {
  if (ok) return "regions: ok";
  std::ostringstream os;
  os << "regions: " << violations.size() << " violation(s)\n";
  for (const auto& v : violations) os << "  bus " << v.bus << ": " << v.reason << "\n";
  return os.str();
}

RegionReport validate_regions(const NetworkModel& model, const std::vector<Region>& regions) {
  RegionReport report;
  if (regions.empty()) throw std::invalid_argument("validate_regions: no regions given");

  for (int g : model.controlled()) {
    int hits = 0;
    for (const Region& r : regions)
      if (r.contains_bus(g)) ++hits;
    if (hits == 0) {
      report.ok = false;
      report.violations.push_back({model.label_of(g), "controlled bus not covered by any region"});
    } else if (hits > 1) {
      report.ok = false;
      report.violations.push_back(
          {model.label_of(g), "controlled bus belongs to " + std::to_string(hits) + " regions"});
    }
  }
  return report;
}

NetworkModel subnetwork(const NetworkModel& model, const Region& region) {
  std::vector<Bus> buses;
  buses.reserve(region.members().size());
  for (int g : region.members()) buses.push_back(model.bus(g));
  std::vector<Line> lines;
  lines.reserve(region.interior_lines().size());
  for (int k : region.interior_lines()) {
    lines.push_back({model.label_of(model.line_pos_end(k)), model.label_of(model.line_neg_end(k)),
                     model.line_susceptance(k)});
  }
  return NetworkModel(std::move(buses), std::move(lines), /*require_connected=*/false);
}

}  // namespace tfc
