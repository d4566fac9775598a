#pragma once

// Fixtures shared by the unit tests: small hand-built networks, the IEEE-39
// topology, and a seeded random connected-network generator.

#include "tfc/network.hpp"

#include <algorithm>
#include <random>
#include <utility>
#include <vector>

namespace tfc::testing {

inline Bus plain_bus(int id, double m = 1.0, double e = 1.0) {
  Bus b;
  b.id = id;
  b.inertia = m;
  b.damping = e;
  return b;
}

inline Bus controlled_bus(int id, double m = 1.0, double e = 1.0, bool constrained = true,
                          double weight = 1.0) {
  Bus b = plain_bus(id, m, e);
  b.controlled = true;
  b.thr_min = -0.1;
  b.thr_max = 0.1;
  b.cost_weight = weight;
  if (constrained) {
    b.freq_constrained = true;
    b.omega_min = -0.2;
    b.omega_max = 0.2;
  }
  return b;
}

/// Two buses joined by one unit-susceptance line, both controlled+constrained.
inline NetworkModel two_bus(double b = 1.0, double m = 1.0, double e = 1.0) {
  return NetworkModel({controlled_bus(1, m, e), controlled_bus(2, m, e)}, {{1, 2, b}});
}

inline NetworkModel triangle() {
  return NetworkModel({controlled_bus(1), plain_bus(2), plain_bus(3)},
                      {{1, 2, 1.0}, {2, 3, 2.0}, {1, 3, 3.0}});
}

struct RandomNetworkOptions {
  int min_buses = 5;
  int max_buses = 15;
  double control_fraction = 0.5;
  double constrain_fraction = 0.6;  // of the controlled buses
};

/// Random connected graph: spanning tree plus a few chords; buses get random
/// inertia/damping and a nonempty controlled set with thresholds +-0.1 and
/// bounds +-0.2 on the constrained subset.
inline NetworkModel random_connected(std::mt19937& rng, RandomNetworkOptions opt = {}) {
  std::uniform_int_distribution<int> size_dist(opt.min_buses, opt.max_buses);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> b_dist(0.5, 5.0);
  std::uniform_real_distribution<double> m_dist(0.2, 1.5);
  std::uniform_real_distribution<double> e_dist(0.5, 2.0);
  std::uniform_real_distribution<double> w_dist(0.5, 2.0);

  const int n = size_dist(rng);
  std::vector<Bus> buses;
  for (int i = 1; i <= n; ++i) buses.push_back(plain_bus(i, m_dist(rng), e_dist(rng)));

  std::vector<Line> lines;
  std::vector<std::pair<int, int>> used;
  for (int i = 2; i <= n; ++i) {
    std::uniform_int_distribution<int> parent_dist(1, i - 1);
    const int parent = parent_dist(rng);
    lines.push_back({parent, i, b_dist(rng)});
    used.emplace_back(std::min(parent, i), std::max(parent, i));
  }
  const int extra = n / 3;
  std::uniform_int_distribution<int> node_dist(1, n);
  for (int tries = 0, added = 0; tries < 20 * extra && added < extra; ++tries) {
    int a = node_dist(rng), b = node_dist(rng);
    if (a == b) continue;
    const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
    if (std::find(used.begin(), used.end(), key) != used.end()) continue;
    used.push_back(key);
    lines.push_back({key.first, key.second, b_dist(rng)});
    ++added;
  }

  int controlled_count = 0;
  for (Bus& bus : buses) {
    if (unit(rng) < opt.control_fraction) {
      bus.controlled = true;
      bus.thr_min = -0.1;
      bus.thr_max = 0.1;
      bus.cost_weight = w_dist(rng);
      ++controlled_count;
      if (unit(rng) < opt.constrain_fraction) {
        bus.freq_constrained = true;
        bus.omega_min = -0.2;
        bus.omega_max = 0.2;
      }
    }
  }
  if (controlled_count == 0) {
    buses[0].controlled = true;
    buses[0].freq_constrained = true;
    buses[0].thr_min = -0.1;
    buses[0].thr_max = 0.1;
    buses[0].omega_min = -0.2;
    buses[0].omega_max = 0.2;
  }
  bool any_constrained = false;
  for (const Bus& bus : buses) any_constrained |= bus.freq_constrained;
  if (!any_constrained)
    for (Bus& bus : buses)
      if (bus.controlled) {
        bus.freq_constrained = true;
        bus.omega_min = -0.2;
        bus.omega_max = 0.2;
        break;
      }
  return NetworkModel(std::move(buses), std::move(lines));
}

/// The 46 branches of the IEEE 39-bus system (endpoint labels only).
inline const std::vector<std::pair<int, int>>& ieee39_lines() {
  static const std::vector<std::pair<int, int>> lines = {
      {1, 2},   {1, 39},  {2, 3},   {2, 25},  {2, 30},  {3, 4},   {3, 18},  {4, 5},
      {4, 14},  {5, 6},   {5, 8},   {6, 7},   {6, 11},  {6, 31},  {7, 8},   {8, 9},
      {9, 39},  {10, 11}, {10, 13}, {10, 32}, {12, 11}, {12, 13}, {13, 14}, {14, 15},
      {15, 16}, {16, 17}, {16, 19}, {16, 21}, {16, 24}, {17, 18}, {17, 27}, {19, 20},
      {19, 33}, {20, 34}, {21, 22}, {22, 23}, {22, 35}, {23, 24}, {23, 36}, {25, 26},
      {25, 37}, {26, 27}, {26, 28}, {26, 29}, {28, 29}, {29, 38}};
  return lines;
}

/// IEEE-39 model with unit parameters, controlled set {3,7,25,30,31,32} and
/// constrained set {30,31,32}; used by the structural tests.
inline NetworkModel ieee39_topology() {
  std::vector<Bus> buses;
  for (int id = 1; id <= 39; ++id) {
    const bool controlled = id == 3 || id == 7 || id == 25 || id == 30 || id == 31 || id == 32;
    const bool constrained = id == 30 || id == 31 || id == 32;
    buses.push_back(controlled ? controlled_bus(id, 1.0, 1.0, constrained) : plain_bus(id));
  }
  std::vector<Line> lines;
  for (auto [a, b] : ieee39_lines()) lines.push_back({a, b, 1.0});
  return NetworkModel(std::move(buses), std::move(lines));
}

/// 2-hop neighborhoods of buses 30, 31, 32 in the IEEE-39 topology.
inline std::vector<std::vector<int>> ieee39_region_sets() {
  return {{30, 2, 1, 3, 25}, {31, 6, 5, 7, 11}, {32, 10, 11, 13}};
}

}  // namespace tfc::testing
