#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <string>
#include <unordered_map>
#include <vector>

namespace tfc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

/// One bus of the network. `id` is the external label used in scenario
/// files; everywhere else buses are addressed by dense internal index.
struct Bus {
  int id = 0;
  double inertia = 0.0;  // M_i, strictly positive
  double damping = 0.0;  // E_i, strictly positive
  bool generator = false;
  bool controlled = false;        // has a sub-controller
  bool freq_constrained = false;  // has a safe frequency band
  double omega_min = 0.0;         // safe bounds, valid when freq_constrained
  double omega_max = 0.0;
  double thr_min = 0.0;  // inner thresholds, valid when controlled
  double thr_max = 0.0;
  double cost_weight = 1.0;  // c_i, used when controlled
  double gamma_upper = 1.0;  // reference-law gains, used when controlled
  double gamma_lower = 1.0;
};

/// Transmission line between two buses, in external labels.
/// `from` is the positive end of the orientation.
struct Line {
  int from = 0;
  int to = 0;
  double susceptance = 0.0;  // b_ij, strictly positive
};

/// Builds the signed incidence matrix for lines given in internal indices:
/// row k has +1 at the positive end of line k, -1 at the negative end.
/// Throws on self-loops, duplicate undirected edges, out-of-range indices.
SpMat build_incidence(const std::vector<std::pair<int, int>>& lines, int n_buses);

class Region;

/// Immutable graph + parameters of the power network. Validates structural
/// assumptions on construction: positive M, E, b; no duplicate edges;
/// threshold/bound ordering; constrained buses controlled; connectivity
/// (optional for region submodels).
class NetworkModel {
 public:
  NetworkModel(std::vector<Bus> buses, std::vector<Line> lines,
               bool require_connected = true);

  int num_buses() const { return static_cast<int>(buses_.size()); }
  int num_lines() const { return static_cast<int>(pos_end_.size()); }

  const Bus& bus(int idx) const { return buses_[idx]; }
  const std::vector<Bus>& buses() const { return buses_; }

  int line_pos_end(int k) const { return pos_end_[k]; }
  int line_neg_end(int k) const { return neg_end_[k]; }
  double line_susceptance(int k) const { return b_[k]; }

  /// Maps an external bus label to the internal index; throws if unknown.
  int index_of(int external_id) const;
  int label_of(int idx) const { return buses_[idx].id; }
  bool has_label(int external_id) const;

  const SpMat& incidence() const { return incidence_; }      // D, m x n
  const SpMat& flow_matrix() const { return flow_matrix_; }  // Y_b D
  const Vec& susceptances() const { return b_; }             // diag of Y_b
  const Vec& inertia() const { return inertia_; }
  const Vec& damping() const { return damping_; }

  /// Internal indices of I^u and I^omega, ascending.
  const std::vector<int>& controlled() const { return controlled_; }
  const std::vector<int>& constrained() const { return constrained_; }

  bool connected() const { return connected_; }

 private:
  std::vector<Bus> buses_;
  std::vector<int> pos_end_, neg_end_;  // internal endpoint indices per line
  Vec b_;
  Vec inertia_, damping_;
  SpMat incidence_, flow_matrix_;
  std::vector<int> controlled_, constrained_;
  std::unordered_map<int, int> label_to_index_;
  bool connected_ = false;
};

/// A boundary line of a region: global line index plus which side of the
/// orientation lies inside the region.
struct BoundaryEdge {
  int line = 0;              // global line index
  bool positive_end_inside = false;
  int inside_bus = 0;        // global internal index of the inside endpoint
};

/// An induced subgraph with its boundary and local index maps.
class Region {
 public:
  /// `member_labels` are external bus labels; throws on unknown labels.
  Region(const NetworkModel& model, int id, const std::vector<int>& member_labels);

  int id() const { return id_; }
  /// Member buses as global internal indices, ascending.
  const std::vector<int>& members() const { return members_; }
  /// Induced edge set E_beta, global line indices.
  const std::vector<int>& interior_lines() const { return interior_lines_; }
  /// Boundary edge set E'_beta.
  const std::vector<BoundaryEdge>& boundary() const { return boundary_; }

  bool contains_bus(int global_idx) const { return local_of_bus_.count(global_idx) != 0; }
  int local_bus(int global_idx) const { return local_of_bus_.at(global_idx); }
  int global_bus(int local_idx) const { return members_[local_idx]; }
  int local_line(int global_line) const { return local_of_line_.at(global_line); }

  /// Controlled / constrained members as global internal indices.
  const std::vector<int>& controlled_members() const { return controlled_members_; }
  const std::vector<int>& constrained_members() const { return constrained_members_; }

 private:
  int id_ = 0;
  std::vector<int> members_;
  std::vector<int> interior_lines_;
  std::vector<BoundaryEdge> boundary_;
  std::unordered_map<int, int> local_of_bus_, local_of_line_;
  std::vector<int> controlled_members_, constrained_members_;
};

/// Computes E'_beta for a bus set given by external labels, without
/// building a full Region. Throws on unknown labels.
std::vector<BoundaryEdge> boundary_edges(const NetworkModel& model,
                                         const std::vector<int>& member_labels);

struct RegionViolation {
  int bus = 0;  // external label of the offending bus
  std::string reason;
};

struct RegionReport {
  bool ok = true;
  std::vector<RegionViolation> violations;
  std::string text() const;
};

/// Checks the region decomposition: every controlled bus covered by some
/// region and no controlled bus in two regions. Returns a report instead
/// of throwing; the report names each offending bus.
RegionReport validate_regions(const NetworkModel& model,
                              const std::vector<Region>& regions);

/// Builds the regional submodel: member buses (global ascending order) with
/// their parameters and the induced lines, connectivity not required.
NetworkModel subnetwork(const NetworkModel& model, const Region& region);

}  // namespace tfc
