#pragma once

// Scenario file loading and relay override strings.
//
//   {
//     "name": "scenario1", "carrier_hz": 28e9, "bandwidth_hz": 100e6,
//     "nodes": [{"id": 0, "role": "gnb", "pos": [0, 0, 25], "tx_power_dbm": 33,
//                "array": {"rows_v": 8, "cols_h": 8, "spacing_wl": 0.5, "pattern": "tr38901",
//                          "boresight_az_deg": 0, "boresight_zen_deg": 90,
//                          "codebook": {"n_az": 16, "n_zen": 16}}}, ...],
//     "obstacles": [{"box_min": [..], "box_max": [..], "loss_db": 40}],
//     "relay": {"kind": "irs", "rows_v": 120, "cols_h": 60, "amp_gain_db": 0,
//               "noise_figure_db": 5, "codebook": {"oversampling": 2}},
//     "channel": {"n_clusters": 20, "n_rays": 20, "coherence_s": 0.1, ...,
//                 "los": {...}, "nlos": {...}},
//     "receiver": {"noise_figure_db": 9, "n_subbands": 50}
//   }

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "relaysim/antenna.hpp"
#include "relaysim/channel.hpp"
#include "relaysim/error.hpp"
#include "relaysim/relay.hpp"
#include "relaysim/scenario.hpp"

namespace relaysim {

using Json = nlohmann::json;

struct BeamGrid {
  int n_az = 0;  // 0: twice the array size
  int n_zen = 0;
};

struct RelaySpec {
  RelayKind kind = RelayKind::IRS;
  int rows_v = 1;
  int cols_h = 1;
  double amp_gain_db = 0.0;
  double noise_figure_db = 5.0;
  int oversampling = 2;
  std::optional<DirectionGrid> n_in;
  std::optional<DirectionGrid> n_out;
  ElementPattern element = ElementPattern::iso();

  std::size_t elements() const { return static_cast<std::size_t>(rows_v) * cols_h; }
};

struct ReceiverSpec {
  double noise_figure_db = 9.0;
  int n_subbands = 50;
};

struct ScenarioConfig {
  std::string name;
  Json meta = Json::object();
  Scenario scenario;
  std::map<int, BeamGrid> beam_grids;
  std::optional<RelaySpec> relay;
  ChannelProfile los = default_profile(Environment::UmaLos);
  ChannelProfile nlos = default_profile(Environment::UmaNlos);
  ReceiverSpec receiver;
  Json source = Json::object();

  /// Relay node from `nodes` (position and orientation); absent if none.
  const Node* relay_node() const {
    auto r = scenario.with_role(NodeRole::Relay);
    return r.empty() ? nullptr : r.front();
  }

  /// The serving gNB: the first gNB without an interference `target`.
  const Node& serving_gnb() const {
    for (const auto* g : scenario.with_role(NodeRole::Gnb))
      if (!g->target) return *g;
    throw ConfigError("nodes: no serving gnb (every gnb has a target)");
  }
};

namespace detail {

template <class T>
T get(const Json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path + "." + key + ": missing");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

template <class T>
T get_or(const Json& j, const std::string& key, T fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

inline Vec3 get_vec3(const Json& j, const std::string& key, const std::string& path) {
  const auto v = get<std::vector<double>>(j, key, path);
  if (v.size() != 3) throw ConfigError(path + "." + key + ": expected 3 numbers");
  return {v[0], v[1], v[2]};
}

inline ElementPattern parse_pattern(const std::string& s, const std::string& path) {
  if (s == "iso") return ElementPattern::iso();
  if (s == "tr38901") return ElementPattern::tr38901();
  throw ConfigError(path + ": unknown pattern \"" + s + "\"");
}

inline ArrayGeometry parse_array(const Json& j, const std::string& path, BeamGrid* grid) {
  ArrayGeometry g;
  g.rows_v = get_or<int>(j, "rows_v", 1, path);
  g.cols_h = get_or<int>(j, "cols_h", 1, path);
  g.spacing = get_or<double>(j, "spacing_wl", 0.5, path);
  g.boresight_az = deg_to_rad(get_or<double>(j, "boresight_az_deg", 0.0, path));
  g.boresight_zen = deg_to_rad(get_or<double>(j, "boresight_zen_deg", 90.0, path));
  g.element = parse_pattern(get_or<std::string>(j, "pattern", "iso", path), path + ".pattern");
  try {
    g.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (grid != nullptr && j.contains("codebook")) {
    const auto& cb = j.at("codebook");
    const std::string p = path + ".codebook";
    if (cb.contains("oversampling")) {
      const int os = get<int>(cb, "oversampling", p);
      if (os < 1) throw ConfigError(p + ".oversampling: must be >= 1");
      *grid = {os * g.cols_h, os * g.rows_v};
    }
    grid->n_az = get_or<int>(cb, "n_az", grid->n_az, p);
    grid->n_zen = get_or<int>(cb, "n_zen", grid->n_zen, p);
    if (grid->n_az < 0 || grid->n_zen < 0) throw ConfigError(p + ": counts must be >= 1");
  }
  return g;
}

inline DirectionGrid parse_direction_grid(const Json& j, const std::string& path) {
  if (j.is_number_integer()) return {j.get<int>(), 1};
  if (j.is_array() && j.size() == 2 && j[0].is_number_integer() && j[1].is_number_integer())
    return {j[0].get<int>(), j[1].get<int>()};
  throw ConfigError(path + ": expected a count or [n_h, n_v]");
}

inline void apply_profile(const Json& j, ChannelProfile& p, const std::string& path) {
  p.n_clusters = get_or<int>(j, "n_clusters", p.n_clusters, path);
  p.n_rays = get_or<int>(j, "n_rays", p.n_rays, path);
  p.delay_spread_s = get_or<double>(j, "delay_spread_s", p.delay_spread_s, path);
  p.decay_db = get_or<double>(j, "decay_db", p.decay_db, path);
  p.asd_deg = get_or<double>(j, "asd_deg", p.asd_deg, path);
  p.zsd_deg = get_or<double>(j, "zsd_deg", p.zsd_deg, path);
  p.cluster_aod_az_deg = get_or<double>(j, "cluster_aod_az_deg", p.cluster_aod_az_deg, path);
  p.cluster_aoa_az_deg = get_or<double>(j, "cluster_aoa_az_deg", p.cluster_aoa_az_deg, path);
  p.cluster_aod_zen_deg = get_or<double>(j, "cluster_aod_zen_deg", p.cluster_aod_zen_deg, path);
  p.cluster_aoa_zen_deg = get_or<double>(j, "cluster_aoa_zen_deg", p.cluster_aoa_zen_deg, path);
  if (j.contains("k_factor_db")) {
    if (j.at("k_factor_db").is_null())
      p.k_factor_db.reset();
    else
      p.k_factor_db = get<double>(j, "k_factor_db", path);
  }
  p.coherence_s = get_or<double>(j, "coherence_s", p.coherence_s, path);
  p.shadow_sigma_db = get_or<double>(j, "shadow_sigma_db", p.shadow_sigma_db, path);
  p.ue_speed_mps = get_or<double>(j, "ue_speed_mps", p.ue_speed_mps, path);
  try {
    p.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline NodeRole parse_role(const std::string& s, const std::string& path) {
  if (s == "gnb") return NodeRole::Gnb;
  if (s == "ue") return NodeRole::Ue;
  if (s == "relay") return NodeRole::Relay;
  throw ConfigError(path + ": unknown role \"" + s + "\"");
}

}  // namespace detail

inline RelaySpec parse_relay_spec(const Json& j, const std::string& path = "relay") {
  RelaySpec r;
  r.kind = parse_relay_kind(detail::get<std::string>(j, "kind", path));
  r.rows_v = detail::get_or<int>(j, "rows_v", 1, path);
  r.cols_h = detail::get_or<int>(j, "cols_h", 1, path);
  r.amp_gain_db = detail::get_or<double>(j, "amp_gain_db", 0.0, path);
  r.noise_figure_db = detail::get_or<double>(j, "noise_figure_db", 5.0, path);
  r.element = detail::parse_pattern(detail::get_or<std::string>(j, "pattern", "iso", path), path + ".pattern");
  if (r.rows_v < 1 || r.cols_h < 1) throw ConfigError(path + ": rows_v and cols_h must be >= 1");
  if (r.elements() > (std::size_t{1} << 16)) throw ConfigError(path + ": more than 2^16 elements");
  if (r.kind == RelayKind::IRS && r.amp_gain_db != 0.0) throw ConfigError(path + ".amp_gain_db: must be 0 for an IRS");
  if (r.amp_gain_db < 0.0) throw ConfigError(path + ".amp_gain_db: must be >= 0");
  if (j.contains("codebook")) {
    const auto& cb = j.at("codebook");
    const std::string p = path + ".codebook";
    r.oversampling = detail::get_or<int>(cb, "oversampling", r.oversampling, p);
    if (r.oversampling < 1) throw ConfigError(p + ".oversampling: must be >= 1");
    if (cb.contains("n_in")) r.n_in = detail::parse_direction_grid(cb.at("n_in"), p + ".n_in");
    if (cb.contains("n_out")) r.n_out = detail::parse_direction_grid(cb.at("n_out"), p + ".n_out");
    for (const auto* g : {&r.n_in, &r.n_out})
      if (*g && ((*g)->n_h < 1 || (*g)->n_v < 1)) throw ConfigError(p + ": direction counts must be >= 1");
  }
  return r;
}

/// "none", "irs:<cols_h>x<rows_v>" or "af:<cols_h>x<rows_v>:<gain_db>".
inline std::optional<RelaySpec> parse_relay_override(const std::string& s) {
  if (s == "none") return std::nullopt;
  static const std::regex re(R"(^(irs|af):(\d+)x(\d+)(?::([0-9]+(?:\.[0-9]+)?))?$)");
  std::smatch m;
  if (!std::regex_match(s, m, re)) throw ConfigError("relay override: cannot parse \"" + s + "\"");
  RelaySpec r;
  r.kind = parse_relay_kind(m[1]);
  r.cols_h = std::stoi(m[2]);
  r.rows_v = std::stoi(m[3]);
  if (r.kind == RelayKind::AF) {
    if (!m[4].matched) throw ConfigError("relay override: AF needs a gain, e.g. af:16x16:40");
    r.amp_gain_db = std::stod(m[4]);
  } else if (m[4].matched) {
    throw ConfigError("relay override: an IRS takes no gain");
  }
  if (r.rows_v < 1 || r.cols_h < 1) throw ConfigError("relay override: sizes must be >= 1");
  if (r.elements() > (std::size_t{1} << 16)) throw ConfigError("relay override: more than 2^16 elements");
  return r;
}

inline std::string relay_label(const std::optional<RelaySpec>& r) {
  if (!r) return "none";
  std::string s = std::string(to_string(r->kind)) + ":" + std::to_string(r->cols_h) + "x" + std::to_string(r->rows_v);
  if (r->kind == RelayKind::AF) {
    std::ostringstream g;
    g << r->amp_gain_db;
    s += ":" + g.str();
  }
  return s;
}

inline ScenarioConfig parse_scenario(const Json& j) {
  if (!j.is_object()) throw ConfigError("scenario: top level must be an object");
  ScenarioConfig c;
  c.source = j;
  c.name = detail::get_or<std::string>(j, "name", "scenario", "scenario");
  if (j.contains("meta")) c.meta = j.at("meta");
  c.scenario.carrier_hz = detail::get_or<double>(j, "carrier_hz", 28e9, "scenario");
  c.scenario.bandwidth_hz = detail::get_or<double>(j, "bandwidth_hz", 100e6, "scenario");

  if (!j.contains("nodes") || !j.at("nodes").is_array()) throw ConfigError("nodes: missing or not an array");
  for (std::size_t i = 0; i < j.at("nodes").size(); ++i) {
    const auto& jn = j.at("nodes")[i];
    const std::string path = "nodes[" + std::to_string(i) + "]";
    Node n;
    n.id = detail::get<int>(jn, "id", path);
    n.role = detail::parse_role(detail::get<std::string>(jn, "role", path), path + ".role");
    n.position = detail::get_vec3(jn, "pos", path);
    n.tx_power_dbm = detail::get_or<double>(jn, "tx_power_dbm", 33.0, path);
    if (jn.contains("target")) n.target = detail::get<int>(jn, "target", path);
    BeamGrid grid;
    if (jn.contains("array")) n.array = detail::parse_array(jn.at("array"), path + ".array", &grid);
    c.beam_grids[n.id] = grid;
    c.scenario.nodes.push_back(n);
  }
  if (j.contains("obstacles")) {
    const auto& jo = j.at("obstacles");
    if (!jo.is_array()) throw ConfigError("obstacles: not an array");
    for (std::size_t i = 0; i < jo.size(); ++i) {
      const std::string path = "obstacles[" + std::to_string(i) + "]";
      Obstacle o;
      o.box.min = detail::get_vec3(jo[i], "box_min", path);
      o.box.max = detail::get_vec3(jo[i], "box_max", path);
      o.penetration_loss_db = detail::get_or<double>(jo[i], "loss_db", 40.0, path);
      c.scenario.obstacles.push_back(o);
    }
  }
  c.scenario.validate();
  for (const auto& n : c.scenario.nodes)
    if (n.target) {
      const auto& t = c.scenario.node(*n.target);
      if (t.role != NodeRole::Ue) throw ConfigError("nodes[].target: must reference a ue");
    }
  if (c.scenario.with_role(NodeRole::Ue).empty()) throw ConfigError("nodes: at least one ue is required");

  if (j.contains("relay") && !j.at("relay").is_null()) {
    if (c.relay_node() == nullptr) throw ConfigError("relay: no node with role \"relay\"");
    c.relay = parse_relay_spec(j.at("relay"));
  }
  if (j.contains("channel")) {
    const auto& jc = j.at("channel");
    detail::apply_profile(jc, c.los, "channel");
    detail::apply_profile(jc, c.nlos, "channel");
    if (jc.contains("los")) detail::apply_profile(jc.at("los"), c.los, "channel.los");
    if (jc.contains("nlos")) detail::apply_profile(jc.at("nlos"), c.nlos, "channel.nlos");
    c.nlos.k_factor_db.reset();
  }
  if (j.contains("receiver")) {
    c.receiver.noise_figure_db = detail::get_or<double>(j.at("receiver"), "noise_figure_db", 9.0, "receiver");
    c.receiver.n_subbands = detail::get_or<int>(j.at("receiver"), "n_subbands", 50, "receiver");
    if (c.receiver.n_subbands < 1) throw ConfigError("receiver.n_subbands: must be >= 1");
  }
  return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scenario: cannot open " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("scenario: " + path + ": " + e.what());
  }
  return parse_scenario(j);
}

/// Grid file: either an array of override strings or {"relays": [...]}.
inline std::vector<std::string> load_relay_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("grid: cannot open " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("grid: " + path + ": " + e.what());
  }
  const Json& arr = j.is_object() && j.contains("relays") ? j.at("relays") : j;
  if (!arr.is_array() || arr.empty()) throw ConfigError("grid.relays: expected a non-empty array");
  std::vector<std::string> out;
  for (const auto& e : arr) {
    if (!e.is_string()) throw ConfigError("grid.relays: entries must be strings");
    out.push_back(e.get<std::string>());
    parse_relay_override(out.back());
  }
  return out;
}

}  // namespace relaysim
