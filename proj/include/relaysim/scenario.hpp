#pragma once

// Node placement, obstacles and geometric LOS/NLOS determination.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "relaysim/antenna.hpp"
#include "relaysim/error.hpp"
#include "relaysim/geometry.hpp"

namespace relaysim {

enum class NodeRole { Gnb, Ue, Relay };

inline const char* to_string(NodeRole r) {
  switch (r) {
    case NodeRole::Gnb: return "gnb";
    case NodeRole::Ue: return "ue";
    case NodeRole::Relay: return "relay";
  }
  return "?";
}

struct Node {
  int id = 0;
  NodeRole role = NodeRole::Ue;
  Vec3 position{0.0, 0.0, 0.0};
  ArrayGeometry array;
  double tx_power_dbm = 33.0;
  /// Intended destination of an interfering gNB (ignored for the serving gNB).
  std::optional<int> target;
};

struct Box {
  Vec3 min{0.0, 0.0, 0.0};
  Vec3 max{0.0, 0.0, 0.0};
};

struct Obstacle {
  Box box;
  double penetration_loss_db = 40.0;
};

struct Scenario {
  std::vector<Node> nodes;
  std::vector<Obstacle> obstacles;
  double carrier_hz = 28e9;
  double bandwidth_hz = 100e6;

  const Node& node(int id) const {
    for (const auto& n : nodes)
      if (n.id == id) return n;
    throw ConfigError("scenario: unknown node id " + std::to_string(id));
  }

  std::vector<const Node*> with_role(NodeRole role) const {
    std::vector<const Node*> out;
    for (const auto& n : nodes)
      if (n.role == role) out.push_back(&n);
    return out;
  }

  void validate() const {
    if (!(carrier_hz >= 0.5e9 && carrier_hz <= 100e9))
      throw ConfigError("carrier_hz: outside the 0.5-100 GHz model range");
    if (!(bandwidth_hz > 0.0)) throw ConfigError("bandwidth_hz: must be > 0");
    std::size_t gnbs = 0, relays = 0;
    for (const auto& n : nodes) {
      for (double c : n.position)
        if (!std::isfinite(c)) throw ConfigError("nodes[].pos: non-finite coordinate");
      n.array.validate();
      if (n.role == NodeRole::Gnb) {
        ++gnbs;
        if (n.tx_power_dbm < 0.0 || n.tx_power_dbm > 50.0)
          throw ConfigError("nodes[].tx_power_dbm: outside [0, 50] dBm");
      }
      if (n.role == NodeRole::Relay) ++relays;
      for (const auto& m : nodes)
        if (&m != &n && m.id == n.id) throw ConfigError("nodes[].id: duplicate id " + std::to_string(n.id));
    }
    if (gnbs < 1) throw ConfigError("nodes: at least one gnb is required");
    if (relays > 1) throw ConfigError("nodes: at most one relay is supported");
    for (const auto& o : obstacles) {
      for (int k = 0; k < 3; ++k)
        if (o.box.min[k] > o.box.max[k]) throw ConfigError("obstacles[]: box_min exceeds box_max");
      if (o.penetration_loss_db < 0.0) throw ConfigError("obstacles[].loss_db: must be >= 0");
    }
  }
};

struct LosState {
  std::vector<Obstacle> blockers;
  bool los() const { return blockers.empty(); }
};

inline double distance_3d(const Node& a, const Node& b) { return norm(b.position - a.position); }

/// Closed segment vs closed box (slab test). Touching a face counts as a hit.
inline bool segment_hits_box(const Vec3& p0, const Vec3& p1, const Box& box) {
  double t_lo = 0.0, t_hi = 1.0;
  for (int k = 0; k < 3; ++k) {
    const double d = p1[k] - p0[k];
    if (d == 0.0) {
      if (p0[k] < box.min[k] || p0[k] > box.max[k]) return false;
      continue;
    }
    double t0 = (box.min[k] - p0[k]) / d;
    double t1 = (box.max[k] - p0[k]) / d;
    if (t0 > t1) std::swap(t0, t1);
    t_lo = std::max(t_lo, t0);
    t_hi = std::min(t_hi, t1);
    if (t_lo > t_hi) return false;
  }
  return true;
}

inline LosState los_state(const Scenario& scenario, const Node& a, const Node& b) {
  expects(a.id != b.id, "los_state: endpoints must differ");
  LosState s;
  for (const auto& o : scenario.obstacles)
    if (segment_hits_box(a.position, b.position, o.box)) s.blockers.push_back(o);
  return s;
}

inline double blockage_loss_db(const LosState& state) {
  double loss = 0.0;
  for (const auto& o : state.blockers) loss += o.penetration_loss_db;
  return loss;
}

}  // namespace relaysim
